#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "streamgp/bound.hpp"
#include "streamgp/optimize.hpp"

namespace streamgp {

enum class Scale { LogLatent, Original };

struct PredictionRequest {
    std::vector<Row> rows;
    Scale scale = Scale::LogLatent;
};

struct PredictionResult {
    Vec mean;  // log scale
    Vec sd;
    Vec mean_orig;  // filled for Scale::Original
    Vec sd_orig;
    int clipped = 0;  // variances clipped at zero beyond -1e-10
};

// Log-normal moments of exp(f), f ~ N(mean, sd^2).
std::pair<double, double> to_original_scale(double mean, double sd);

PredictionResult predictive_moments(const ModelParams& p, const Problem& prob, const PredictionRequest& req);

// Moments of q(f* | x) at fixed spatial inputs x with q(u) from the fit.
struct ConditionalMoments {
    Vec mean;
    Vec var;
};
ConditionalMoments conditional_moments(const ModelParams& p, const Problem& prob, const QU& qu,
                                       const SpatialInputs& x, const std::vector<Row>& rows);

// Monte Carlo moment matching over x ~ q(x).
struct PredictiveMonteCarlo {
    Vec mean, var;
    Vec mean_se, var_se;
};
PredictiveMonteCarlo predictive_mc_oracle(const ModelParams& p, const Problem& prob, const PredictionRequest& req,
                                          std::int64_t samples, std::uint64_t seed);

PredictionResult gpr_predict(const GprParams& p, const SpatialInputs& x, const GprData& d, const PredictionRequest& req);

// K(rows, cols) between latent function values.
Mat cross_cov_ff(const KernelConfig& k, Coupling c, const SpatialInputs& x, const std::vector<Row>& rows,
                 const std::vector<Row>& cols);

}  // namespace streamgp
