#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "streamgp/bound.hpp"
#include "streamgp/kernels.hpp"
#include "streamgp/network.hpp"

namespace th {

using namespace streamgp;

inline double quad(const std::function<double(double)>& f, double lo, double hi) {
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, hi, 20, 1e-13);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Spatial moving-average function of the exponential family, upstream of c.
inline double g_s(const MovingAverageParams& p, double x, double c) {
    return x < c ? 0.0 : p.nu_s / (p.l_s * p.l_s) * std::exp(-(x - c) / (2.0 * p.l_s * p.l_s));
}

// Temporal moving-average function.
inline double g_t(const MovingAverageParams& p, double z) {
    return p.nu_t / p.l_t * std::exp(-z * z / (2.0 * p.l_t * p.l_t));
}

inline double temporal_quad(const MovingAverageParams& a, const MovingAverageParams& b, double tp, double tq) {
    const double inf = std::numeric_limits<double>::infinity();
    return quad([&](double z) { return g_t(a, tp - z) * g_t(b, tq - z); }, -inf, inf);
}

// Tails-up network integral by quadrature: sum over shared upstream segments
// of the between-set weights times the product of the moving-average functions.
inline double network_quad(const StreamNetwork& net, SiteId a, const MovingAverageParams& ga,
                           const std::array<double, 4>& wa, SiteId b, const MovingAverageParams& gb,
                           const std::array<double, 4>& wb) {
    if (!net.flow_connected(a, b)) return 0.0;
    const double ca = net.site(a).coord, cb = net.site(b).coord;
    double total = 0.0;
    for (int j = 1; j <= 3; ++j) {
        if (!net.sets(a).upstream.count(j) || !net.sets(b).upstream.count(j)) continue;
        double w = 1.0;
        for (int k : net.between_to_segment(a, j)) w *= wa[k];
        for (int k : net.between_to_segment(b, j)) w *= wb[k];
        const auto& seg = net.segment(j);
        const double lo = std::max({seg.lower, ca, cb});
        if (!(seg.upper > lo)) continue;
        total += w * quad([&](double x) { return g_s(ga, x, ca) * g_s(gb, x, cb); }, lo, seg.upper);
    }
    return total;
}

inline MovingAverageParams unit_params() { return {1.0, 1.0, 1.0, 1.0}; }

inline std::array<MovingAverageParams, 2> table_si1() {
    return {MovingAverageParams{15.625, 15.0, 0.495, 0.5}, MovingAverageParams{18.75, 20.0, 1.32, 1.7}};
}

// Ground-truth kernels at the true inputs with (nearly) delta variational
// posteriors and the inducing sites at the data sites.
inline ModelParams delta_model(std::size_t mt, double sd = 1e-9) {
    ModelParams p;
    p.kernels = KernelConfig::tied(table_si1());
    p.q.mu_tau = {3.8730, 2.2361, 3.1623};
    p.q.sd_tau = {sd, sd, sd};
    p.q.mu_gamma = {0.9808, 0.1199};
    p.q.sd_gamma = {sd, sd};
    for (int j = 0; j < 3; ++j) p.geo.hp[j] = p.q.mu_tau[j] * p.q.mu_tau[j] - 1e-6;
    p.geo.alpha = {0.9808, 0.1199};
    p.sigma = {0.35, 0.25};
    for (std::size_t k = 0; k < mt; ++k) p.t_inducing.push_back(mt == 1 ? 5.0 : 10.0 * k / (mt - 1));
    return p;
}

inline std::vector<Observation> gaussian_obs(std::mt19937_64& rng, std::size_t nt, int n_sites = 3) {
    std::normal_distribution<double> n;
    std::vector<Observation> obs;
    for (int f = 0; f < 2; ++f)
        for (int s = 0; s < n_sites; ++s)
            for (std::size_t k = 0; k < nt; ++k)
                obs.push_back({f, s, nt == 1 ? 5.0 : 10.0 * k / (nt - 1), n(rng), Status::Observed});
    return obs;
}

// ln N(y | 0, K_NN + sigma^2 I) at the posterior means.
inline double exact_log_marginal(const ModelParams& p, const Problem& prob) {
    GramInputs gi;
    gi.kernels = &p.kernels;
    gi.coupling = prob.coupling;
    gi.x = SpatialInputs::from_tau_gamma(p.q.mu_tau, p.q.mu_gamma);
    gi.g = p.geo;
    std::vector<Row> rows;
    Vec y(static_cast<Eigen::Index>(prob.observations.size()));
    for (std::size_t i = 0; i < prob.observations.size(); ++i) {
        const auto& o = prob.observations[i];
        rows.push_back({o.function, o.site, o.t});
        y[static_cast<Eigen::Index>(i)] = o.value;
    }
    Mat K = build_gram(GramKind::FF, rows, {}, gi);
    for (std::size_t i = 0; i < rows.size(); ++i)
        K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += p.sigma[rows[i].function] * p.sigma[rows[i].function];
    Eigen::LLT<Mat> L(K);
    const double ld = 2.0 * L.matrixLLT().diagonal().array().log().sum();
    return -0.5 * y.dot(L.solve(y)) - 0.5 * ld - 0.5 * static_cast<double>(rows.size()) * kLog2Pi;
}

}  // namespace th
