#include "streamgp/latent.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/owens_t.hpp>
#include <cmath>
#include <limits>

namespace streamgp {

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double log_norm_pdf(double x) { return -0.5 * x * x - 0.5 * kLog2Pi; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::Domain, "normal quantile needs p in (0,1)");
    static const boost::math::normal_distribution<double> nd;
    return boost::math::quantile(nd, p);
}

double log_norm_cdf(double x) {
    if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
    if (x > -37.0) return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
    // asymptotic Mills ratio; relative error far below 1e-16 here
    const double z2 = 1.0 / (x * x);
    const double s = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2 * (1.0 - 7.0 * z2)));
    return log_norm_pdf(x) - std::log(-x) + std::log(s);
}

double log_norm_cdf_diff(double a, double b) {
    if (!(a > b)) return -std::numeric_limits<double>::infinity();
    if (b > 0.0) {
        // upper tail: Phi(-b) - Phi(-a)
        const double la = log_norm_cdf(-a), lb = log_norm_cdf(-b);
        return lb + std::log1p(-std::exp(la - lb));
    }
    const double la = log_norm_cdf(a), lb = log_norm_cdf(b);
    return la + std::log1p(-std::exp(lb - la));
}

double gaussian_pdf(double x, double mu, double var) {
    const double z = x - mu;
    return std::exp(-0.5 * z * z / var) / std::sqrt(2.0 * kPi * var);
}

double owens_t(double a, double b) {
    if (b == 0.0) return 0.0;
    const double sgn = b < 0.0 ? -1.0 : 1.0;
    return sgn * boost::math::owens_t(std::abs(a), std::abs(b));
}

double expected_phi(double mu, double var) {
    if (var < 0.0) fail(ErrorKind::Parameter, "variance must be nonnegative");
    return norm_cdf(mu / std::sqrt(1.0 + var));
}

double expected_phi_sq(double mu, double var) {
    if (var < 0.0) fail(ErrorKind::Parameter, "variance must be nonnegative");
    const double a = mu / std::sqrt(1.0 + var);
    const double b = 1.0 / std::sqrt(1.0 + 2.0 * var);
    return norm_cdf(a) - 2.0 * owens_t(a, b);
}

double expected_exp_sq(double c, double mu, double var) {
    const double den = 1.0 + 2.0 * c * var;
    return std::exp(-c * mu * mu / den) / std::sqrt(den);
}

double kl_gaussian(double mu_q, double var_q, double mu_p, double var_p) {
    require_positive(var_q, "posterior variance");
    require_positive(var_p, "prior variance");
    const double dm = mu_q - mu_p;
    return 0.5 * (std::log(var_p / var_q) + (var_q + dm * dm) / var_p - 1.0);
}

namespace {
double kl_tail(const VariationalPosterior& q, const UncertainInputPriors& p) {
    double kl = 0.0;
    for (int k = 0; k < 2; ++k)
        kl += kl_gaussian(q.mu_gamma[k], q.sd_gamma[k] * q.sd_gamma[k], p.d_gamma[k],
                          p.sd_gamma * p.sd_gamma);
    kl += kl_gaussian(q.mu_eta, q.sd_eta * q.sd_eta, p.eta_mean, p.eta_sd * p.eta_sd);
    return kl;
}
}  // namespace

double kl_block(const VariationalPosterior& q, const UncertainInputPriors& p) {
    const double prior_var = std::exp(q.mu_eta - 0.5 * q.sd_eta * q.sd_eta);
    double kl = 0.0;
    for (int j = 0; j < 3; ++j)
        kl += kl_gaussian(q.mu_tau[j], q.sd_tau[j] * q.sd_tau[j], p.d_tau[j], prior_var);
    return kl + kl_tail(q, p);
}

double kl_block_exact_eta(const VariationalPosterior& q, const UncertainInputPriors& p) {
    // E_q(eta) KL[q(tau) || N(d, e^eta)] = 0.5[mu_eta - ln s_q^2 + E[e^-eta](s_q^2 + dm^2) - 1]
    const double inv = std::exp(-q.mu_eta + 0.5 * q.sd_eta * q.sd_eta);
    double kl = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double vq = q.sd_tau[j] * q.sd_tau[j];
        const double dm = q.mu_tau[j] - p.d_tau[j];
        kl += 0.5 * (q.mu_eta - std::log(vq) + inv * (vq + dm * dm) - 1.0);
    }
    return kl + kl_tail(q, p);
}

double posterior_density_h(double h, double mu_tau, double sd_tau) {
    if (!(h > 0.0)) fail(ErrorKind::Domain, "h must be positive");
    const double r = std::sqrt(h);
    const double v = sd_tau * sd_tau;
    return (gaussian_pdf(-r, mu_tau, v) + gaussian_pdf(r, mu_tau, v)) / (2.0 * r);
}

double posterior_density_w(double w, double mu_gamma, double sd_gamma) {
    if (!(w > 0.0 && w < 1.0)) fail(ErrorKind::Domain, "w must lie in (0,1)");
    // gamma = Phi^{-1}(sqrt w); dgamma/dw = 1 / (2 sqrt(w) phi(gamma))
    const double g = norm_quantile(std::sqrt(w));
    return gaussian_pdf(g, mu_gamma, sd_gamma * sd_gamma) / (2.0 * std::sqrt(w) * norm_pdf(g));
}

double posterior_density_sigma_tau(double s2, double mu_eta, double sd_eta) {
    if (!(s2 > 0.0)) fail(ErrorKind::Domain, "variance argument must be positive");
    return gaussian_pdf(std::log(s2), mu_eta, sd_eta * sd_eta) / s2;
}

}  // namespace streamgp
