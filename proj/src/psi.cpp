#include "streamgp/psi.hpp"

#include <cmath>
#include <map>
#include <random>

namespace streamgp {

Poly uf_poly(const MovingAverageParams& pu, int j, const MovingAverageParams& pf, int s,
             const InducingGeometry& g) {
    const double lf2 = pf.l_s * pf.l_s, lu2 = pu.l_s * pu.l_s;
    const double c = 0.5 / lf2 + 0.5 / lu2;
    const double K = 2.0 * pf.nu_s * pu.nu_s / (lf2 + lu2);
    const auto sa = g.sqrt_w();
    Poly p;
    auto add = [&](double coef, double kappa, double offset, int site, int p2, int p3) {
        p.push_back(Monomial{coef, kappa, offset, site, p2, p3});
    };
    if (s == 0 && j == 0) {
        const double e = std::exp(-c * g.hp[0]);
        const double kap = 0.5 / lf2;
        const double off = kap * g.hp[0];
        add(K * (1.0 - e), kap, off, 0, 0, 0);
        add(K * e * sa[0], kap, off, 0, 1, 0);
        add(K * e * sa[1], kap, off, 0, 0, 1);
    } else if (s == 0) {
        const double kap = 0.5 / lf2;
        add(K, kap, -kap * g.hp[j], 0, j == 1 ? 1 : 0, j == 2 ? 1 : 0);
    } else if (j == 0) {
        const double kap = 0.5 / lu2;
        add(K * sa[s - 1], kap, -kap * g.hp[0], s, 0, 0);
    } else if (j == s) {
        const double kap = 0.5 / lu2;
        add(K, kap, kap * g.hp[j], s, 0, 0);
    }
    return p;
}

Poly ff_diag_poly(const MovingAverageParams& pf, int s) {
    const double l2 = pf.l_s * pf.l_s;
    const double K = pf.nu_s * pf.nu_s / l2;
    if (s != 0) return {Monomial{K, 0.0, 0.0, s, 0, 0}};
    return {Monomial{K, 0.0, 0.0, 0, 0, 0}, Monomial{-K, 1.0 / l2, 0.0, 0, 0, 0},
            Monomial{K, 1.0 / l2, 0.0, 0, 2, 0}, Monomial{K, 1.0 / l2, 0.0, 0, 0, 2}};
}

double eval_poly(const Poly& p, const SpatialInputs& x) {
    double v = 0.0;
    for (const auto& m : p)
        v += m.coef * std::exp(m.offset - m.kappa * x.h[m.site]) * std::pow(x.sqrt_w[0], m.p2) *
             std::pow(x.sqrt_w[1], m.p3);
    return v;
}

InputMoments::InputMoments(const VariationalPosterior& qq) : q(qq) {
    for (int k = 0; k < 2; ++k) {
        const double v = q.sd_gamma[k] * q.sd_gamma[k];
        phi1[k] = expected_phi(q.mu_gamma[k], v);
        phi2[k] = expected_phi_sq(q.mu_gamma[k], v);
    }
}

double InputMoments::phi_power(int k, int p) const {
    switch (p) {
        case 0: return 1.0;
        case 1: return phi1[k];
        case 2: return phi2[k];
        default: fail(ErrorKind::Capability, "closed form covers Phi powers up to 2 only");
    }
}

namespace {

// log E[exp(-kappa tau_site^2)]
double log_exp_moment(double kappa, int site, const InputMoments& m) {
    if (kappa == 0.0) return 0.0;
    const double v = m.q.sd_tau[site] * m.q.sd_tau[site];
    const double mu = m.q.mu_tau[site];
    const double den = 1.0 + 2.0 * kappa * v;
    return -kappa * mu * mu / den - 0.5 * std::log(den);
}

}  // namespace

double expect_poly(const Poly& p, const InputMoments& m) {
    double v = 0.0;
    for (const auto& t : p)
        v += t.coef * std::exp(t.offset + log_exp_moment(t.kappa, t.site, m)) * m.phi_power(0, t.p2) * m.phi_power(1, t.p3);
    return v;
}

double expect_poly_product(const Poly& a, const Poly& b, const InputMoments& m) {
    double v = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) {
            double le = x.offset + y.offset;
            if (x.site == y.site)
                le += log_exp_moment(x.kappa + y.kappa, x.site, m);
            else
                le += log_exp_moment(x.kappa, x.site, m) + log_exp_moment(y.kappa, y.site, m);
            const double e = std::exp(le);
            v += x.coef * y.coef * e * m.phi_power(0, x.p2 + y.p2) * m.phi_power(1, x.p3 + y.p3);
        }
    return v;
}

ExpectedSpatial expected_spatial(const KernelConfig& k, Coupling c, const VariationalPosterior& q,
                                 const InducingGeometry& g) {
    const InputMoments mom(q);
    ExpectedSpatial es;
    for (int b = 0; b < 2; ++b)
        for (int s = 0; s < 3; ++s) {
            const int gi = b * 3 + s;
            std::array<Poly, 6> polys;
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 3; ++j)
                    if (!(c == Coupling::Independent && a != b))
                        polys[a * 3 + j] = uf_poly(k.inducing[a], j, k.latent[b], s, g);
            for (int m = 0; m < 6; ++m) es.e1(gi, m) = expect_poly(polys[m], mom);
            for (int m = 0; m < 6; ++m)
                for (int n = m; n < 6; ++n) {
                    const double v = expect_poly_product(polys[m], polys[n], mom);
                    es.e2[gi](m, n) = v;
                    es.e2[gi](n, m) = v;
                }
            es.e0[gi] = expect_poly(ff_diag_poly(k.latent[b], s), mom);
        }
    return es;
}

namespace {

struct TemporalKeys {
    std::vector<int> key_of;
    std::vector<std::pair<int, double>> keys;
};

TemporalKeys temporal_keys(const std::vector<Row>& inducing) {
    TemporalKeys tk;
    std::map<std::pair<int, double>, int> idx;
    for (const auto& r : inducing) {
        const auto key = std::make_pair(r.function, r.t);
        auto it = idx.find(key);
        if (it == idx.end()) {
            it = idx.emplace(key, static_cast<int>(tk.keys.size())).first;
            tk.keys.push_back(key);
        }
        tk.key_of.push_back(it->second);
    }
    return tk;
}

void check_request(const PsiRequest& r) {
    if (!r.kernels) fail(ErrorKind::Misuse, "psi request needs kernels");
    if (r.weights.size() != static_cast<Eigen::Index>(r.rows.size()))
        fail(ErrorKind::Internal, "psi weights do not match rows");
    for (const auto& row : r.rows)
        if (row.function < 0 || row.function > 1 || row.site < 0 || row.site > 2)
            fail(ErrorKind::Capability, "closed-form psi supports the fixed network only");
}

int group(const Row& r) { return r.function * 3 + r.site; }

double t0(const MovingAverageParams& p) { return temporal_cov(p, p, 0.0, 0.0); }

}  // namespace

Mat psi1_closed(const PsiRequest& r) {
    check_request(r);
    const ExpectedSpatial es = expected_spatial(*r.kernels, r.coupling, r.q, r.g);
    const auto& k = *r.kernels;
    const Eigen::Index n = static_cast<Eigen::Index>(r.rows.size());
    const Eigen::Index m = static_cast<Eigen::Index>(r.inducing.size());
    Mat P(n, m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row& row = r.rows[i];
        for (Eigen::Index j = 0; j < m; ++j) {
            const Row& u = r.inducing[j];
            const double sp = es.e1(group(row), group(u));
            P(i, j) = sp == 0.0 ? 0.0 : sp * temporal_cov(k.latent[row.function], k.inducing[u.function], row.t, u.t);
        }
    }
    return P;
}

double psi0_closed(const PsiRequest& r) {
    check_request(r);
    const ExpectedSpatial es = expected_spatial(*r.kernels, r.coupling, r.q, r.g);
    double v = 0.0;
    for (std::size_t i = 0; i < r.rows.size(); ++i)
        v += r.weights[i] * es.e0[group(r.rows[i])] * t0(r.kernels->latent[r.rows[i].function]);
    return v;
}

namespace {

Mat psi2_from(const PsiRequest& r, const ExpectedSpatial& es, Mat* psi1) {
    const auto& k = *r.kernels;
    const TemporalKeys tk = temporal_keys(r.inducing);
    const Eigen::Index m = static_cast<Eigen::Index>(r.inducing.size());
    const Eigen::Index nk = static_cast<Eigen::Index>(tk.keys.size());
    std::array<std::vector<Eigen::Index>, 6> members;
    for (std::size_t i = 0; i < r.rows.size(); ++i) members[group(r.rows[i])].push_back(static_cast<Eigen::Index>(i));

    std::array<Mat, 6> TT;
    for (int g = 0; g < 6; ++g) {
        const auto& mem = members[g];
        if (mem.empty()) continue;
        const int b = g / 3;
        Mat T(static_cast<Eigen::Index>(mem.size()), nk);
        for (std::size_t i = 0; i < mem.size(); ++i) {
            const Row& row = r.rows[mem[i]];
            for (Eigen::Index q = 0; q < nk; ++q)
                T(i, q) = temporal_cov(k.latent[b], k.inducing[tk.keys[q].first], row.t, tk.keys[q].second);
            if (psi1)
                for (Eigen::Index j = 0; j < m; ++j)
                    (*psi1)(mem[i], j) = es.e1(g, group(r.inducing[j])) * T(i, tk.key_of[j]);
        }
        Vec w(static_cast<Eigen::Index>(mem.size()));
        for (std::size_t i = 0; i < mem.size(); ++i) w[i] = r.weights[mem[i]];
        TT[g] = T.transpose() * w.asDiagonal() * T;
    }
    Mat P2 = Mat::Zero(m, m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index a = 0; a < m; ++a) {
        const int ga = group(r.inducing[a]);
        const int ka = tk.key_of[a];
        for (Eigen::Index b = 0; b <= a; ++b) {
            const int gb = group(r.inducing[b]);
            const int kb = tk.key_of[b];
            double v = 0.0;
            for (int g = 0; g < 6; ++g)
                if (TT[g].size() > 0) v += es.e2[g](ga, gb) * TT[g](ka, kb);
            P2(a, b) = v;
        }
    }
    P2.triangularView<Eigen::StrictlyUpper>() = P2.transpose().triangularView<Eigen::StrictlyUpper>();
    return P2;
}

}  // namespace

Mat psi2_closed(const PsiRequest& r) {
    check_request(r);
    const ExpectedSpatial es = expected_spatial(*r.kernels, r.coupling, r.q, r.g);
    return psi2_from(r, es, nullptr);
}

PsiStatistics psi_closed(const PsiRequest& r) {
    check_request(r);
    const ExpectedSpatial es = expected_spatial(*r.kernels, r.coupling, r.q, r.g);
    PsiStatistics out;
    out.Psi1.resize(static_cast<Eigen::Index>(r.rows.size()), static_cast<Eigen::Index>(r.inducing.size()));
    out.Psi2 = psi2_from(r, es, &out.Psi1);
    for (std::size_t i = 0; i < r.rows.size(); ++i)
        out.psi0 += r.weights[i] * es.e0[group(r.rows[i])] * t0(r.kernels->latent[r.rows[i].function]);
    return out;
}

PsiFactored psi_factored(const PsiRequest& r) {
    check_request(r);
    const auto& k = *r.kernels;
    const ExpectedSpatial es = expected_spatial(k, r.coupling, r.q, r.g);
    const TemporalKeys tk = temporal_keys(r.inducing);
    const TemporalKeys rk = temporal_keys(r.rows);
    const Eigen::Index n = static_cast<Eigen::Index>(r.rows.size());
    const Eigen::Index m = static_cast<Eigen::Index>(r.inducing.size());
    const Eigen::Index nk = static_cast<Eigen::Index>(tk.keys.size());
    const Eigen::Index nr = static_cast<Eigen::Index>(rk.keys.size());
    std::vector<int> gu(static_cast<std::size_t>(m));
    for (Eigen::Index j = 0; j < m; ++j) gu[j] = group(r.inducing[j]);

    // temporal covariances per (row key, inducing key) and weighted spatial moments per row key
    Mat T(nr, nk);
    std::vector<SpatialTable> G(static_cast<std::size_t>(nr), SpatialTable::Zero());
    for (Eigen::Index q = 0; q < nr; ++q)
        for (Eigen::Index c = 0; c < nk; ++c)
            T(q, c) = temporal_cov(k.latent[rk.keys[q].first], k.inducing[tk.keys[c].first], rk.keys[q].second,
                                   tk.keys[c].second);
    PsiFactored out;
    out.Psi1.resize(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row& row = r.rows[i];
        const int g = group(row), q = rk.key_of[i];
        for (Eigen::Index j = 0; j < m; ++j) out.Psi1(i, j) = es.e1(g, gu[j]) * T(q, tk.key_of[j]);
        G[q] += r.weights[i] * es.e2[g];
        out.psi0 += r.weights[i] * es.e0[g] * t0(k.latent[row.function]);
    }

    std::vector<Eigen::Matrix<double, 6, Eigen::Dynamic>> C(static_cast<std::size_t>(nr));
    std::vector<Eigen::Index> offset(static_cast<std::size_t>(nr) + 1, 0);
    for (Eigen::Index q = 0; q < nr; ++q) {
        Eigen::SelfAdjointEigenSolver<SpatialTable> eig(G[q]);
        const auto& lam = eig.eigenvalues();
        const double tol = 1e-14 * std::max(lam.maxCoeff(), 0.0);
        int keep = 0;
        for (int e = 0; e < 6; ++e) keep += lam[e] > tol;
        C[q].resize(6, keep);
        for (int e = 0, c = 0; e < 6; ++e)
            if (lam[e] > tol) C[q].col(c++) = std::sqrt(lam[e]) * eig.eigenvectors().col(e);
        offset[q + 1] = offset[q] + keep;
    }
    out.F.resize(m, offset[nr]);
#pragma omp parallel for schedule(static)
    for (Eigen::Index q = 0; q < nr; ++q)
        for (Eigen::Index c = 0; c < C[q].cols(); ++c)
            for (Eigen::Index j = 0; j < m; ++j) out.F(j, offset[q] + c) = T(q, tk.key_of[j]) * C[q](gu[j], c);
    return out;
}

PsiStatistics psi_closed_serial(const PsiRequest& r) {
    check_request(r);
    const auto& k = *r.kernels;
    const InputMoments mom(r.q);
    const std::size_t n = r.rows.size(), m = r.inducing.size();
    auto poly = [&](const Row& f, const Row& u) -> Poly {
        if (r.coupling == Coupling::Independent && f.function != u.function) return {};
        return uf_poly(k.inducing[u.function], u.site, k.latent[f.function], f.site, r.g);
    };
    auto temp = [&](const Row& f, const Row& u) {
        return temporal_cov(k.latent[f.function], k.inducing[u.function], f.t, u.t);
    };
    PsiStatistics out;
    out.Psi1 = Mat::Zero(n, m);
    out.Psi2 = Mat::Zero(m, m);
    for (std::size_t i = 0; i < n; ++i) {
        const Row& f = r.rows[i];
        out.psi0 += r.weights[i] * expect_poly(ff_diag_poly(k.latent[f.function], f.site), mom) * t0(k.latent[f.function]);
        for (std::size_t a = 0; a < m; ++a) {
            const Poly pa = poly(f, r.inducing[a]);
            out.Psi1(i, a) = expect_poly(pa, mom) * temp(f, r.inducing[a]);
            for (std::size_t b = 0; b < m; ++b)
                out.Psi2(a, b) += r.weights[i] * expect_poly_product(pa, poly(f, r.inducing[b]), mom) *
                                  temp(f, r.inducing[a]) * temp(f, r.inducing[b]);
        }
    }
    return out;
}

PredictivePsi psi_predictive(const PsiRequest& r) {
    if (!r.kernels) fail(ErrorKind::Misuse, "psi request needs kernels");
    for (const auto& row : r.rows)
        if (row.function < 0 || row.function > 1 || row.site < 0 || row.site > 2)
            fail(ErrorKind::Lookup, "prediction rows must use functions 0..1 and sampled sites 0..2");
    const auto& k = *r.kernels;
    const ExpectedSpatial es = expected_spatial(k, r.coupling, r.q, r.g);
    const Eigen::Index n = static_cast<Eigen::Index>(r.rows.size());
    const Eigen::Index m = static_cast<Eigen::Index>(r.inducing.size());
    std::array<Eigen::Matrix<double, 6, Eigen::Dynamic>, 6> C;
    for (int g = 0; g < 6; ++g) {
        Eigen::SelfAdjointEigenSolver<SpatialTable> eig(es.e2[g]);
        const auto& lam = eig.eigenvalues();
        const double tol = 1e-14 * std::max(lam.maxCoeff(), 0.0);
        int keep = 0;
        for (int e = 0; e < 6; ++e) keep += lam[e] > tol;
        C[g].resize(6, keep);
        for (int e = 0, c = 0; e < 6; ++e)
            if (lam[e] > tol) C[g].col(c++) = std::sqrt(lam[e]) * eig.eigenvectors().col(e);
    }
    PredictivePsi out;
    out.Psi1.resize(n, m);
    out.F.resize(r.rows.size());
    out.psi0.resize(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row& f = r.rows[i];
        const int g = group(f);
        Mat F(m, C[g].cols());
        for (Eigen::Index j = 0; j < m; ++j) {
            const Row& u = r.inducing[j];
            const double T = temporal_cov(k.latent[f.function], k.inducing[u.function], f.t, u.t);
            out.Psi1(i, j) = es.e1(g, group(u)) * T;
            F.row(j) = T * C[g].row(group(u));
        }
        out.F[i] = std::move(F);
        out.psi0[i] = es.e0[g] * t0(k.latent[f.function]);
    }
    return out;
}

PsiMonteCarlo psi_mc_oracle(const PsiRequest& r, std::int64_t samples, std::uint64_t seed) {
    check_request(r);
    if (samples < 1000) fail(ErrorKind::Parameter, "MC oracle needs at least 1e3 samples");
    const auto& k = *r.kernels;
    const Eigen::Index n = static_cast<Eigen::Index>(r.rows.size());
    const Eigen::Index m = static_cast<Eigen::Index>(r.inducing.size());
    Mat T(n, m);
    Vec T0(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row& f = r.rows[i];
        T0[i] = t0(k.latent[f.function]);
        for (Eigen::Index j = 0; j < m; ++j)
            T(i, j) = temporal_cov(k.latent[f.function], k.inducing[r.inducing[j].function], f.t, r.inducing[j].t);
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Mat mean1 = Mat::Zero(n, m), m21 = Mat::Zero(n, m);
    Mat mean2 = Mat::Zero(m, m), m22 = Mat::Zero(m, m);
    double mean0 = 0.0, m20 = 0.0;
    Mat K(n, m), P2(m, m), d(n, m), d2(m, m);
    for (std::int64_t s = 1; s <= samples; ++s) {
        std::array<double, 3> tau;
        std::array<double, 2> gam;
        for (int j = 0; j < 3; ++j) tau[j] = r.q.mu_tau[j] + r.q.sd_tau[j] * z(rng);
        for (int j = 0; j < 2; ++j) gam[j] = r.q.mu_gamma[j] + r.q.sd_gamma[j] * z(rng);
        const SpatialInputs x = SpatialInputs::from_tau_gamma(tau, gam);
        const SpatialTable S = spatial_table_fu(k, r.coupling, x, r.g);
        double p0 = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Row& f = r.rows[i];
            const auto& pf = k.latent[f.function];
            p0 += r.weights[i] * spatial_ff(pf, f.site, pf, f.site, x) * T0[i];
            for (Eigen::Index j = 0; j < m; ++j) K(i, j) = S(group(f), group(r.inducing[j])) * T(i, j);
        }
        P2.noalias() = K.transpose() * r.weights.asDiagonal() * K;
        const double inv = 1.0 / static_cast<double>(s);
        d = K - mean1;
        mean1 += d * inv;
        m21.array() += d.array() * (K - mean1).array();
        d2 = P2 - mean2;
        mean2 += d2 * inv;
        m22.array() += d2.array() * (P2 - mean2).array();
        const double d0 = p0 - mean0;
        mean0 += d0 * inv;
        m20 += d0 * (p0 - mean0);
    }
    const double S = static_cast<double>(samples);
    PsiMonteCarlo out;
    out.mean.Psi1 = mean1;
    out.mean.Psi2 = mean2;
    out.mean.psi0 = mean0;
    out.Psi1_se = (m21.array() / (S - 1.0) / S).sqrt().matrix();
    out.Psi2_se = (m22.array() / (S - 1.0) / S).sqrt().matrix();
    out.psi0_se = std::sqrt(m20 / (S - 1.0) / S);
    return out;
}

}  // namespace streamgp
