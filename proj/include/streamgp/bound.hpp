#pragma once

#include <optional>
#include <string>
#include <vector>

#include "streamgp/kernels.hpp"
#include "streamgp/latent.hpp"
#include "streamgp/likelihood.hpp"
#include "streamgp/psi.hpp"

namespace streamgp {

struct ModelParams {
    KernelConfig kernels;
    VariationalPosterior q;
    InducingGeometry geo;
    std::vector<double> t_inducing;
    std::array<double, 2> sigma{};  // noise sd per function
    LocalBoundState local;
};

// Inducing rows in canonical order: function, site, time.
std::vector<Row> inducing_rows(const std::vector<double>& t_inducing);

struct Problem {
    std::vector<Observation> observations;  // canonical (missing rows dropped)
    std::optional<CensoringLimits> limits;
    UncertainInputPriors priors;
    Coupling coupling = Coupling::MultiOutput;
    static Problem make(const std::vector<Observation>& obs, std::optional<CensoringLimits> limits,
                        const UncertainInputPriors& priors, Coupling coupling);
    std::size_t censored() const { return count_censored(observations); }
};

// Everything the bound, q(u) and the predictor share.
struct ModelState {
    PseudoData pseudo;
    std::vector<Row> inducing;
    PsiStatistics psi;  // Psi2 is left empty; see psi_factored
    double trace_kinv_psi2 = 0.0;
    Mat Kmm;  // includes the jitter actually used
    JitteredCholesky LK;
    // Q = K_MM + Psi2 is handled as L (I + B) L^T, B = L^-1 Psi2 L^-T, so that
    // jitter is only ever added to K_MM.
    Eigen::LLT<Mat> LB;
    Vec v;     // Psi1^T Sigma^-1 y_l
    Vec beta;  // Q^-1 v
    double half_logdet_q() const;
    Mat q_inverse() const;
    Mat kmm_inverse() const;
};

ModelState model_state(const ModelParams& p, const Problem& prob, bool verify_grid = false);
// Cholesky factor of I + L^-1 Psi2 L^-T for L the K_MM factor.
Eigen::LLT<Mat> whitened_factor(const JitteredCholesky& LK, const Mat& Psi2);
// Same, from Psi2 = F F^T; also returns tr(K_MM^-1 Psi2).
Eigen::LLT<Mat> whitened_factor_sqrt(const JitteredCholesky& LK, const Mat& F, double* trace);

struct BoundTerms {
    double total = 0.0;
    double data = 0.0;  // total + kl
    double kl = 0.0;
    double half_logdet_kmm = 0.0;
    double half_logdet_q = 0.0;
    double quad = 0.0;      // -1/2 y_l^T A y_l
    double censored = 0.0;  // local-bound bracket
    double noise = 0.0;     // -1/2 sum ln(2 pi sigma_a^2) over uncensored rows
    double trace = 0.0;     // -psi0/2 + tr(K^-1 Psi2)/2
};

BoundTerms bound_terms(const ModelParams& p, const Problem& prob, const ModelState& st);
BoundTerms collapsed_bound_terms(const ModelParams& p, const Problem& prob);
double collapsed_bound(const ModelParams& p, const Problem& prob);
double bound_uncensored(const ModelParams& p, const Problem& prob);

struct QU {
    Vec mean;
    Mat cov;
};
QU optimal_qu(const Mat& Kmm, const PsiStatistics& psi, const PseudoData& pseudo);
QU optimal_qu_from_state(const ModelState& st);

struct ConstraintValues {
    std::vector<double> equality;
    std::vector<double> slack;  // feasible iff >= 0
    std::vector<std::string> equality_names;
    std::vector<std::string> slack_names;
    bool feasible(double eq_tol = 1e-8, double slack_tol = 0.0) const;
    std::vector<std::string> violated(double eq_tol = 1e-8, double slack_tol = 0.0) const;
};

inline constexpr double kPlacementEps = 1e-6;
inline constexpr double kHetOffset = 1e-3;

ConstraintValues constraints_eval(const ModelParams& p);

// Largest admissible h'_j under the placement constraints (eps included).
std::array<double, 3> placement_upper(const KernelConfig& k, const VariationalPosterior& q);

// Flat unconstrained parameter vector. zeta entries come last and are not
// differentiated (they are updated by coordinate maximisation).
class ParamLayout {
public:
    ParamLayout(std::size_t n_inducing_times, std::size_t n_zeta, bool heteroskedastic);
    std::size_t size() const { return names_.size(); }
    std::size_t gradient_size() const { return size() - n_zeta_; }
    std::size_t zeta_offset() const { return gradient_size(); }
    const std::vector<std::string>& names() const { return names_; }
    Vec pack(const ModelParams& p) const;
    ModelParams unpack(const Vec& z) const;

private:
    std::size_t mt_, n_zeta_;
    bool het_;
    std::vector<std::string> names_;
};

}  // namespace streamgp
