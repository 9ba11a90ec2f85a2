#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "streamgp/kernels.hpp"
#include "streamgp/likelihood.hpp"

namespace streamgp {

// Per (function, site): observed, between-limits, below-detection counts.
using CellCounts = std::array<std::array<std::array<int, 3>, 3>, 2>;

// Table 7 of the case study, read as counts remaining after removal.
CellCounts table7_counts();

enum class CountsMode { Remaining, Removed };

struct SimulationConfig {
    std::array<MovingAverageParams, 2> kernels{MovingAverageParams{15.625, 15.0, 0.495, 0.5},
                                               MovingAverageParams{18.75, 20.0, 1.32, 1.7}};
    std::array<double, 3> tau{3.8730, 2.2361, 3.1623};
    std::array<double, 2> gamma{0.9808, 0.1199};
    std::array<double, 2> noise_sd{0.35, 0.25};
    int grid_points = 1000;
    double t_min = 0.0;
    double t_max = 10.0;
    int subsample = 50;
    // percentiles (quantification, detection) per function
    std::array<std::array<double, 2>, 2> censor_pct{{{25.0, 15.0}, {35.0, 20.0}}};
    CellCounts counts = table7_counts();
    CountsMode counts_mode = CountsMode::Remaining;
    void validate() const;
};

struct LatentTruth {
    Vec t;                                  // dense grid
    std::array<std::array<Vec, 3>, 2> f;    // f[function][site]
};

// Cholesky factor of the dense-grid prior covariance; reusable across seeds.
struct TruthSampler {
    std::vector<Row> rows;
    Vec t;
    Mat L;
    double jitter = 0.0;
    explicit TruthSampler(const SimulationConfig& c);
    LatentTruth sample(std::uint64_t seed) const;
};

LatentTruth sample_latent_truth(const SimulationConfig& c, std::uint64_t seed);

enum class CaseStudy { CS1, CS2 };

struct Dataset {
    std::vector<Observation> rows;  // includes Missing rows
    std::optional<CensoringLimits> limits;
};

// Grid indices of the equally spaced subsample.
std::vector<int> subsample_indices(int grid_points, int n);

// Linear interpolation between order statistics.
double quantile_type7(std::vector<double> v, double p);

// Fails with a configuration error when a count table cell cannot be met.
Dataset make_dataset(const LatentTruth& truth, const SimulationConfig& c, CaseStudy mode, std::uint64_t seed);
// Same, but reports an unsatisfiable cell through `why` and returns nothing.
std::optional<Dataset> try_make_dataset(const LatentTruth& truth, const SimulationConfig& c, CaseStudy mode,
                                        std::uint64_t seed, std::string* why = nullptr);

// Censoring step alone; applying it to an already censored dataset is a no-op.
void apply_censoring(Dataset& d, const CensoringLimits& lim);

// Uncensored dataset with n_t equally spaced subsample points per site and function.
Dataset make_timing_dataset(const LatentTruth& truth, const SimulationConfig& c, int n_t, std::uint64_t seed);

std::uint64_t replicate_seed(std::uint64_t master, int replicate);

// Status counts per (function, site).
CellCounts status_counts(const std::vector<Observation>& rows);

}  // namespace streamgp
