#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "streamgp/bound.hpp"

namespace streamgp {

struct OptimizerConfig {
    int n_starts = 40;
    int max_iterations = 300;  // quasi-Newton iterations per start, all outer loops together
    double h_fd = 1e-6;
    double tol_bound = 1e-8;
    double tol_step = 1e-8;
    double tol_constraint = 1e-8;
    std::uint64_t seed = 1;
    int lbfgs_memory = 10;
    int al_max_outer = 10;
    double al_rho0 = 10.0;
    int zeta_every = 10;  // zeta coordinate update period (censored data only)
    void validate() const;
};

using Objective = std::function<double(const Vec&)>;

// Central differences on the first n coordinates (all when n < 0), relative
// step max(h, h |x_i|). Falls back to a one-sided difference when a probe is
// not finite; fails if both sides are.
Vec gradient(const Objective& f, const Vec& x, double h, Eigen::Index n = -1,
             double fx = std::numeric_limits<double>::quiet_NaN());

struct AscentOptions {
    int max_iterations = 300;
    double tol_f = 1e-8;
    double tol_step = 1e-8;
    int memory = 10;
    double h_fd = 1e-6;
    Eigen::Index n_diff = -1;
    double max_step = 5.0;  // infinity-norm cap on one step
    std::function<void(Vec&)> project;
};

struct AscentResult {
    Vec x;
    double f = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> history;  // accepted objective values
};

// Maximises f by L-BFGS with a backtracking Armijo search. Accepted iterates
// never decrease f.
AscentResult lbfgs_maximize(const Objective& f, const Vec& x0, const AscentOptions& o);

struct AlOptions {
    AscentOptions inner;
    int max_outer = 10;
    double rho0 = 10.0;
    double tol_constraint = 1e-8;
    // called between inner chunks; may change the non-differentiated block of x
    std::function<void(Vec&)> refresh;
    int refresh_every = 0;  // 0 = only between outer iterations
};

struct AlResult {
    Vec x;
    double f = -std::numeric_limits<double>::infinity();
    Vec equality;
    Vec lambda;
    int outer = 0;
    int iterations = 0;
    bool inner_converged = false;
    bool converged = false;
    std::string message;
};

// max f(x) s.t. c(x) = 0 by the augmented Lagrangian f - lambda^T c - rho/2 |c|^2.
AlResult augmented_lagrangian_maximize(const Objective& f, const std::function<Vec(const Vec&)>& c,
                                       const Vec& x0, const AlOptions& o);

struct StartRecord {
    int start = 0;
    bool converged = false;
    bool feasible = false;
    int iterations = 0;
    double wall_time_s = 0.0;
    double objective = -std::numeric_limits<double>::infinity();
    std::string message;
};

// Maps a point back onto both equality manifolds: (Phi(alpha_2), Phi(alpha_3))
// is rescaled to unit length, and mu_gamma_2, mu_gamma_3 are shifted by a
// common offset found by bisection.
void project_equalities(ModelParams& p);

struct FitResult {
    ModelParams best;
    double bound = -std::numeric_limits<double>::infinity();
    int best_start = -1;
    bool converged = false;
    ConstraintValues constraints;
    std::vector<StartRecord> records;
};

// Draws one randomised start around a reference point (start 0 is the reference).
using StartSampler = std::function<ModelParams(int start, std::mt19937_64& rng)>;

StartSampler default_bgp_sampler(const ModelParams& reference, const Problem& prob);

FitResult fit_bgp(const Problem& prob, const OptimizerConfig& cfg, const StartSampler& sampler);

// Coordinate maximisation of the bound in zeta: zeta = E_q[f] at censored rows.
void update_zeta(ModelParams& p, const Problem& prob);

// Exact / Uncertain GPR baselines.
struct GprParams {
    std::array<double, 2> xi{1.0, 1.0};
    std::array<double, 2> l_s{1.0, 1.0};
    std::array<double, 2> l_t{1.0, 1.0};
    std::array<double, 2> sigma{0.1, 0.1};
    KernelConfig kernels() const;
};

// Observations with censored rows placed at their recorded limit values.
struct GprData {
    std::vector<Row> rows;
    Vec y;
};
GprData gpr_data(const std::vector<Observation>& canonical);

double gpr_log_marginal(const GprParams& p, const SpatialInputs& x, const GprData& d);

struct GprFit {
    GprParams params;
    double log_marginal = -std::numeric_limits<double>::infinity();
    int best_start = -1;
    bool converged = false;
    std::vector<StartRecord> records;
};

GprParams gpr_heuristic_start(const SpatialInputs& x, const GprData& d);
GprFit fit_gpr(const SpatialInputs& x, const GprData& d, const OptimizerConfig& cfg);

// BGP reference point warm-started from GPR hyperparameters, inducing kernels tied.
ModelParams bgp_reference(const GprParams& g, const Problem& prob, std::size_t mt, double t_lo, double t_hi);

}  // namespace streamgp
