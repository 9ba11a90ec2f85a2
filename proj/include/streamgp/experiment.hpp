#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamgp/metrics.hpp"
#include "streamgp/optimize.hpp"
#include "streamgp/predict.hpp"
#include "streamgp/simulate.hpp"

namespace streamgp {

struct ExperimentConfig {
    SimulationConfig sim;
    UncertainInputPriors priors;
    CaseStudy case_study = CaseStudy::CS1;
    std::uint64_t truth_seed = 2890;
    std::uint64_t master_seed = 20240601;
    int replicates = 100;
    std::size_t mt = 20;
    std::vector<Framework> frameworks{kAllFrameworks.begin(), kAllFrameworks.end()};
    OptimizerConfig bgp;
    OptimizerConfig gpr = [] {
        OptimizerConfig c;
        c.n_starts = 10;
        return c;
    }();
    // noise redraws allowed per replicate when a count table cell is unsatisfiable
    int max_redraws = 1000;
    std::vector<int> timing_nt{50, 100, 200, 400};
    double timing_min_seconds = 0.2;
    void validate() const;
};

struct ReplicateInput {
    int replicate = 0;
    int attempts = 1;  // noise draws used (1 = first draw accepted)
    std::uint64_t seed = 0;
    Dataset data;
};

// Replicate r draws its noise from replicate_seed(master, r). Under CS2 a draw
// whose counts cannot be met is replaced by the next attempt.
ReplicateInput draw_replicate(const LatentTruth& truth, const ExperimentConfig& cfg, int r);

// Prediction locations: every dense-grid time except the training subsample,
// at all sites and both functions; truth in request order.
struct PredictionTargets {
    PredictionRequest request;
    Vec truth;
};
PredictionTargets prediction_targets(const LatentTruth& truth, const SimulationConfig& c);
std::vector<Row> prediction_rows(const SimulationConfig& c);

// Splits a request-ordered vector by function.
PerFunction split_by_function(const std::vector<Row>& rows, const Vec& v);

ReplicateScore score_prediction(const PredictionTargets& tg, const PredictionResult& pr);

struct FrameworkRun {
    Framework framework = Framework::MOBGPLVM;
    ReplicateScore score;
    PredictionResult prediction;
    std::optional<GprFit> gpr;
    std::optional<FitResult> bgp;
    std::string error;  // empty on success
};

SpatialInputs deterministic_inputs(const SimulationConfig& c);
SpatialInputs measured_inputs(const UncertainInputPriors& p);

// Fits every configured framework on one replicate and scores it. Failures are
// recorded in FrameworkRun::error and do not stop the other frameworks.
std::vector<FrameworkRun> run_replicate(const ExperimentConfig& cfg, const ReplicateInput& in,
                                        const PredictionTargets& tg);

struct TimingRow {
    int n_t = 0;
    Framework framework = Framework::MOBGPLVM;
    double seconds_per_eval = 0.0;
    int n_params = 0;  // differentiated parameters
    double seconds_per_iteration() const { return (2.0 * n_params + 1.0) * seconds_per_eval; }
};

// Per-evaluation cost of the collapsed bound (MOBGPLVM) and of the exact log
// marginal (ExactGPR) on uncensored data with n_t points per series.
std::vector<TimingRow> timing_sweep(const ExperimentConfig& cfg, const LatentTruth& truth);

int worker_threads();  // STREAMGP_THREADS, else hardware concurrency

}  // namespace streamgp
