#include "streamgp/predict.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <random>

namespace streamgp {

std::pair<double, double> to_original_scale(double mean, double sd) {
    const double v = sd * sd;
    const double m = std::exp(mean + 0.5 * v);
    return {m, m * std::sqrt(std::expm1(v))};
}

namespace {

void check_rows(const std::vector<Row>& rows) {
    for (const auto& r : rows) {
        if (r.function < 0 || r.function > 1) fail(ErrorKind::Lookup, "unknown function id " + std::to_string(r.function));
        if (r.site < 0 || r.site > 2) fail(ErrorKind::Lookup, "unknown site id " + std::to_string(r.site));
        if (!std::isfinite(r.t)) fail(ErrorKind::Domain, "prediction time must be finite");
    }
}

void finish(PredictionResult& out, const Vec& var, Scale scale) {
    const Eigen::Index n = var.size();
    out.sd.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isfinite(var[i]) || !std::isfinite(out.mean[i]))
            fail(ErrorKind::Numerical, "non-finite predictive moment at row " + std::to_string(i));
        double v = var[i];
        if (v < 0.0) {
            if (v < -1e-10) ++out.clipped;
            v = 0.0;
        }
        out.sd[i] = std::sqrt(v);
    }
    if (out.clipped > 0) spdlog::warn("{} predictive variances clipped at zero", out.clipped);
    if (scale == Scale::Original) {
        out.mean_orig.resize(n);
        out.sd_orig.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) std::tie(out.mean_orig[i], out.sd_orig[i]) = to_original_scale(out.mean[i], out.sd[i]);
    }
}

}  // namespace

PredictionResult predictive_moments(const ModelParams& p, const Problem& prob, const PredictionRequest& req) {
    check_rows(req.rows);
    const ModelState st = model_state(p, prob);
    PsiRequest r;
    r.kernels = &p.kernels;
    r.coupling = prob.coupling;
    r.q = p.q;
    r.g = p.geo;
    r.rows = req.rows;
    r.weights = Vec::Ones(static_cast<Eigen::Index>(req.rows.size()));
    r.inducing = st.inducing;
    const PredictivePsi pp = psi_predictive(r);

    PredictionResult out;
    out.mean = pp.Psi1 * st.beta;
    const auto L = st.LK.llt.matrixL();
    const Eigen::Index n = out.mean.size();
    Vec var(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        // tr[(Q^-1 - K^-1) F F^T] = tr[A^T B^-1 A] - |A|^2 with A = L^-1 F
        const Mat A = L.solve(pp.F[static_cast<std::size_t>(i)]);
        const double t1 = (A.array() * st.LB.solve(A).array()).sum() - A.squaredNorm();
        const double t2 = (pp.F[static_cast<std::size_t>(i)].transpose() * st.beta).squaredNorm();
        var[i] = t1 + t2 + pp.psi0[i] - out.mean[i] * out.mean[i];
    }
    finish(out, var, req.scale);
    return out;
}

Mat cross_cov_ff(const KernelConfig& k, Coupling c, const SpatialInputs& x, const std::vector<Row>& rows,
                 const std::vector<Row>& cols) {
    const SpatialTable S = spatial_table_ff(k, c, x);
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size()), m = static_cast<Eigen::Index>(cols.size());
    Mat K(n, m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row& a = rows[i];
        for (Eigen::Index j = 0; j < m; ++j) {
            const Row& b = cols[j];
            const double s = S(a.function * 3 + a.site, b.function * 3 + b.site);
            K(i, j) = s == 0.0 ? 0.0 : s * temporal_cov(k.latent[a.function], k.latent[b.function], a.t, b.t);
        }
    }
    return K;
}

ConditionalMoments conditional_moments(const ModelParams& p, const Problem& prob, const QU& qu,
                                       const SpatialInputs& x, const std::vector<Row>& rows) {
    GramInputs gi;
    gi.kernels = &p.kernels;
    gi.coupling = prob.coupling;
    gi.x = x;
    gi.g = p.geo;
    const auto ind = inducing_rows(p.t_inducing);
    Mat Kmm = build_gram(GramKind::UU, ind, {}, gi);
    const auto LK = jittered_cholesky(Kmm, "K_MM");
    const Mat Ksm = build_gram(GramKind::UF, rows, ind, gi);
    ConditionalMoments out;
    const Mat W = LK.llt.solve(Ksm.transpose());  // K^-1 k*
    out.mean = W.transpose() * qu.mean;
    out.var.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& pf = p.kernels.latent[rows[i].function];
        const double kss = spatial_ff(pf, rows[i].site, pf, rows[i].site, x) * temporal_cov(pf, pf, 0.0, 0.0);
        const Eigen::Index c = static_cast<Eigen::Index>(i);
        out.var[c] = kss - Ksm.row(c).dot(W.col(c)) + W.col(c).dot(qu.cov * W.col(c));
    }
    return out;
}

PredictiveMonteCarlo predictive_mc_oracle(const ModelParams& p, const Problem& prob, const PredictionRequest& req,
                                          std::int64_t samples, std::uint64_t seed) {
    check_rows(req.rows);
    if (samples < 1000) fail(ErrorKind::Parameter, "MC oracle needs at least 1e3 samples");
    const ModelState st = model_state(p, prob);
    const QU qu = optimal_qu_from_state(st);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const Eigen::Index n = static_cast<Eigen::Index>(req.rows.size());
    // per draw: conditional mean m and second moment v + m^2
    Vec mean1 = Vec::Zero(n), M1 = Vec::Zero(n), mean2 = Vec::Zero(n), M2 = Vec::Zero(n);
    Mat C = Mat::Zero(n, 1);
    Vec cross = Vec::Zero(n);
    for (std::int64_t s = 1; s <= samples; ++s) {
        std::array<double, 3> tau;
        std::array<double, 2> gam;
        for (int j = 0; j < 3; ++j) tau[j] = p.q.mu_tau[j] + p.q.sd_tau[j] * z(rng);
        for (int j = 0; j < 2; ++j) gam[j] = p.q.mu_gamma[j] + p.q.sd_gamma[j] * z(rng);
        const auto cm = conditional_moments(p, prob, qu, SpatialInputs::from_tau_gamma(tau, gam), req.rows);
        const Vec second = cm.var + cm.mean.cwiseAbs2();
        const double inv = 1.0 / static_cast<double>(s);
        const Vec d1 = cm.mean - mean1;
        const Vec d2 = second - mean2;
        mean1 += d1 * inv;
        mean2 += d2 * inv;
        cross += (static_cast<double>(s - 1) * inv) * d1.cwiseProduct(d2);
        M1 += d1.cwiseProduct(cm.mean - mean1);
        M2 += d2.cwiseProduct(second - mean2);
    }
    const double S = static_cast<double>(samples);
    PredictiveMonteCarlo out;
    out.mean = mean1;
    out.var = mean2 - mean1.cwiseAbs2();
    out.mean_se = (M1 / (S - 1.0) / S).cwiseSqrt();
    // delta method for var = E[s] - E[m]^2
    const Vec var_s = M2 / (S - 1.0), var_m = M1 / (S - 1.0), cov_ms = cross / (S - 1.0);
    Vec v = var_s - 4.0 * mean1.cwiseProduct(cov_ms) + 4.0 * mean1.cwiseAbs2().cwiseProduct(var_m);
    out.var_se = (v.cwiseMax(0.0) / S).cwiseSqrt();
    return out;
}

PredictionResult gpr_predict(const GprParams& p, const SpatialInputs& x, const GprData& d, const PredictionRequest& req) {
    check_rows(req.rows);
    const KernelConfig k = p.kernels();
    GramInputs gi;
    gi.kernels = &k;
    gi.x = x;
    Mat K = build_gram(GramKind::FF, d.rows, {}, gi);
    for (std::size_t i = 0; i < d.rows.size(); ++i) K(i, i) += p.sigma[d.rows[i].function] * p.sigma[d.rows[i].function];
    const auto L = jittered_cholesky(K, "K_NN + sigma^2 I");
    const Mat Ks = cross_cov_ff(k, Coupling::MultiOutput, x, req.rows, d.rows);
    PredictionResult out;
    out.mean = Ks * L.llt.solve(d.y);
    const Mat A = L.llt.matrixL().solve(Ks.transpose());
    Vec var(static_cast<Eigen::Index>(req.rows.size()));
    for (std::size_t i = 0; i < req.rows.size(); ++i) {
        const auto& pf = k.latent[req.rows[i].function];
        const double kss = spatial_ff(pf, req.rows[i].site, pf, req.rows[i].site, x) * temporal_cov(pf, pf, 0.0, 0.0);
        var[static_cast<Eigen::Index>(i)] = kss - A.col(static_cast<Eigen::Index>(i)).squaredNorm();
    }
    finish(out, var, req.scale);
    return out;
}

}  // namespace streamgp
