#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "streamgp/experiment.hpp"

namespace streamgp {

// 17 significant digits, so a value read back is bit-identical.
std::string format_double(double v);

// Dataset CSV: function_id,site_id,t,value,status (ids 1-based, missing rows have an empty value).
void write_dataset_csv(std::ostream& os, const Dataset& d);
// Limits are recovered from censored rows (bql rows carry l_q, bdl rows l_d);
// `fallback` fills a limit that the rows do not determine.
Dataset read_dataset_csv(std::istream& is, const std::string& source,
                         const std::optional<CensoringLimits>& fallback = std::nullopt);

void write_truth_csv(std::ostream& os, const LatentTruth& truth);

void write_prediction_csv(std::ostream& os, const std::vector<Row>& rows, const PredictionResult& p);
struct PredictionTable {
    std::vector<Row> rows;
    PredictionResult result;
};
PredictionTable read_prediction_csv(std::istream& is, const std::string& source);

void write_metrics_csv(std::ostream& os, const std::vector<ReplicateScore>& s);
std::vector<ReplicateScore> read_metrics_csv(std::istream& is, const std::string& source);

void write_boxplot_csv(std::ostream& os, const std::vector<FrameworkSummary>& s);
void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows);

// Experiment configuration, JSON with "schema": "streamgp-experiment/1".
// Unknown keys and type errors are reported with their line number.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source);
ExperimentConfig load_experiment_config(const std::string& path);
std::string experiment_config_json(const ExperimentConfig& cfg);  // canonical form
std::uint64_t fnv1a(const std::string& s);
// Digest of the settings a fit depends on (framework selection and replicate count excluded).
std::uint64_t config_digest(const ExperimentConfig& cfg);

// Lossless name -> value maps.
std::map<std::string, double> to_param_map(const ModelParams& p);
ModelParams from_param_map(const std::map<std::string, double>& m);
std::map<std::string, double> to_param_map(const GprParams& p);
GprParams gpr_from_param_map(const std::map<std::string, double>& m);

struct FitSnapshot {
    Framework framework = Framework::MOBGPLVM;
    std::map<std::string, double> params;
    double objective = 0.0;  // collapsed bound, or log marginal for the GPR baselines
    std::map<std::string, double> constraints;  // residuals / slacks
    std::uint64_t config_digest = 0;
    std::uint64_t seed = 0;
    bool converged = false;
    bool positive_definite = false;
    CellCounts censored{};  // per (function, site): observed, between-limits, below-detection rows used
    std::vector<StartRecord> records;
};

std::string snapshot_json(const FitSnapshot& s);
FitSnapshot parse_snapshot(const std::string& text, const std::string& source);

}  // namespace streamgp
