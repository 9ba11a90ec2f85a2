#pragma once

#include <array>

#include "streamgp/common.hpp"

namespace streamgp {

// Standard normal helpers.
double norm_pdf(double x);
double norm_cdf(double x);
double norm_quantile(double p);
double log_norm_pdf(double x);
double log_norm_cdf(double x);
// log(Phi(a) - Phi(b)) for a > b, computed without cancellation.
double log_norm_cdf_diff(double a, double b);
double gaussian_pdf(double x, double mu, double var);

double owens_t(double a, double b);

// E[Phi^2(g)], g ~ N(mu, var).
double expected_phi_sq(double mu, double var);
// E[Phi(g)], g ~ N(mu, var).
double expected_phi(double mu, double var);
// E[exp(-c x^2)], x ~ N(mu, var), c >= 0.
double expected_exp_sq(double c, double mu, double var);

struct UncertainInputPriors {
    std::array<double, 3> d_tau{3.7093, 2.0828, 3.2979};
    std::array<double, 2> d_gamma{0.7899, 0.3035};
    double sd_gamma = 0.25;
    double eta_mean = -1.0;
    double eta_sd = 0.75;
};

struct VariationalPosterior {
    std::array<double, 3> mu_tau{};
    std::array<double, 3> sd_tau{};
    std::array<double, 2> mu_gamma{};
    std::array<double, 2> sd_gamma{};
    double mu_eta = -1.0;
    double sd_eta = 0.75;
};

double kl_gaussian(double mu_q, double var_q, double mu_p, double var_p);
double kl_block(const VariationalPosterior& q, const UncertainInputPriors& p);
// Variant with the exact expectation over q(eta) (log-variance term mu_eta);
// kept as a diagnostic.
double kl_block_exact_eta(const VariationalPosterior& q, const UncertainInputPriors& p);

// Change-of-variables densities for h = tau^2, w = Phi^2(gamma), s2 = exp(eta).
double posterior_density_h(double h, double mu_tau, double sd_tau);
double posterior_density_w(double w, double mu_gamma, double sd_gamma);
double posterior_density_sigma_tau(double s2, double mu_eta, double sd_eta);

}  // namespace streamgp
