#include "streamgp/kernels.hpp"

#include <cmath>
#include <limits>

#include "streamgp/latent.hpp"

namespace streamgp {

void MovingAverageParams::validate() const {
    require_positive(nu_s, "spatial scale nu_s");
    require_positive(l_s, "spatial lengthscale l_s");
    require_positive(nu_t, "temporal scale nu_t");
    require_positive(l_t, "temporal lengthscale l_t");
}

KernelConfig KernelConfig::from_xi(const std::array<double, 2>& xi, const std::array<double, 2>& ls,
                                   const std::array<double, 2>& lt, const std::array<double, 2>& xi_u,
                                   const std::array<double, 2>& ls_u,
                                   const std::array<double, 2>& lt_u) {
    KernelConfig k;
    for (int a = 0; a < 2; ++a) {
        k.latent[a] = {xi[a], ls[a], 1.0, lt[a]};
        k.inducing[a] = {xi_u[a], ls_u[a], 1.0, lt_u[a]};
    }
    return k;
}

KernelConfig KernelConfig::tied(const std::array<MovingAverageParams, 2>& latent) {
    KernelConfig k;
    k.latent = latent;
    k.inducing = latent;
    return k;
}

SpatialInputs SpatialInputs::from_tau_gamma(const std::array<double, 3>& tau,
                                            const std::array<double, 2>& gamma) {
    SpatialInputs x;
    for (int j = 0; j < 3; ++j) x.h[j] = tau[j] * tau[j];
    for (int k = 0; k < 2; ++k) x.sqrt_w[k] = norm_cdf(gamma[k]);
    return x;
}

std::array<double, 2> InducingGeometry::sqrt_w() const {
    return {norm_cdf(alpha[0]), norm_cdf(alpha[1])};
}

double temporal_cov(const MovingAverageParams& a, const MovingAverageParams& b, double tp, double tq) {
    if (!(a.l_t > 0.0) || !(b.l_t > 0.0)) fail(ErrorKind::Parameter, "temporal lengthscale must be positive");
    const double s = a.l_t * a.l_t + b.l_t * b.l_t;
    const double dt = tp - tq;
    return kSqrt2Pi * a.nu_t * b.nu_t / std::sqrt(s) * std::exp(-0.5 * dt * dt / s);
}

double spatial_cov_unweighted(const MovingAverageParams& shifted, const MovingAverageParams& other, double d) {
    if (d < 0.0) fail(ErrorKind::Domain, "hydrological distance must be nonnegative");
    const double la2 = shifted.l_s * shifted.l_s, lb2 = other.l_s * other.l_s;
    return 2.0 * shifted.nu_s * other.nu_s / (la2 + lb2) * std::exp(-0.5 * d / la2);
}

double segment_integral(const MovingAverageParams& ga, double ca, const MovingAverageParams& gb,
                        double cb, double lo, double hi) {
    if (!(hi > lo)) return 0.0;
    const double la2 = ga.l_s * ga.l_s, lb2 = gb.l_s * gb.l_s;
    const double c = 0.5 / la2 + 0.5 / lb2;
    const double pre = ga.nu_s * gb.nu_s / (la2 * lb2) *
                       std::exp(-0.5 * (lo - ca) / la2 - 0.5 * (lo - cb) / lb2);
    const double span = std::isinf(hi) ? 1.0 : -std::expm1(-c * (hi - lo));
    return pre * span / c;
}

double network_spatial_cov(const StreamNetwork& net, SiteId a, const MovingAverageParams& ga,
                           const std::array<double, 4>& wa, SiteId b, const MovingAverageParams& gb,
                           const std::array<double, 4>& wb) {
    if (!net.flow_connected(a, b)) return 0.0;
    const auto ua = net.sets(a).upstream;
    const auto ub = net.sets(b).upstream;
    const double ca = net.site(a).coord, cb = net.site(b).coord;
    double total = 0.0;
    for (int j : ua) {
        if (!ub.count(j)) continue;
        double w = 1.0;
        for (int k : net.between_to_segment(a, j)) w *= wa[k];
        for (int k : net.between_to_segment(b, j)) w *= wb[k];
        const auto& seg = net.segment(j);
        const double lo = std::max({seg.lower, ca, cb});
        total += w * segment_integral(ga, ca, gb, cb, lo, seg.upper);
    }
    return total;
}

namespace {

struct Pair {
    double c;  // 1/(2 la^2) + 1/(2 lb^2)
    double k;  // 2 nu_a nu_b / (la^2 + lb^2)
};

Pair pair_of(const MovingAverageParams& a, const MovingAverageParams& b) {
    const double la2 = a.l_s * a.l_s, lb2 = b.l_s * b.l_s;
    return {0.5 / la2 + 0.5 / lb2, 2.0 * a.nu_s * b.nu_s / (la2 + lb2)};
}

// Shared structure of the f-f and u-u closed forms: site 0 on segment 1 at
// distance h0 below the junction, sites 1,2 at distance h1,h2 above it.
double same_kind(const MovingAverageParams& pa, int sa, const MovingAverageParams& pb, int sb,
                 const std::array<double, 3>& h, const std::array<double, 2>& sw) {
    const Pair p = pair_of(pa, pb);
    if (sa == sb) {
        if (sa != 0) return p.k;
        const double e = std::exp(-p.c * h[0]);
        const double w = sw[0] * sw[0] + sw[1] * sw[1];
        return p.k * ((1.0 - e) + w * e);
    }
    if (sa != 0 && sb != 0) return 0.0;
    // the site on segment 1 is downstream; its kernel carries the shift
    const MovingAverageParams& down = sa == 0 ? pa : pb;
    const int up = sa == 0 ? sb : sa;
    const double d = h[0] + h[up];
    return sw[up - 1] * p.k * std::exp(-0.5 * d / (down.l_s * down.l_s));
}

void check_site(int s) {
    if (s < 0 || s > 2) fail(ErrorKind::Lookup, "site index out of range");
}

}  // namespace

double spatial_ff(const MovingAverageParams& pa, int sa, const MovingAverageParams& pb, int sb,
                  const SpatialInputs& x) {
    check_site(sa);
    check_site(sb);
    return same_kind(pa, sa, pb, sb, x.h, x.sqrt_w);
}

double spatial_uu(const MovingAverageParams& pa, int ja, const MovingAverageParams& pb, int jb,
                  const InducingGeometry& g) {
    check_site(ja);
    check_site(jb);
    return same_kind(pa, ja, pb, jb, g.hp, g.sqrt_w());
}

double spatial_uf(const MovingAverageParams& pu, int j, const MovingAverageParams& pf, int s,
                  const SpatialInputs& x, const InducingGeometry& g) {
    check_site(j);
    check_site(s);
    const Pair p = pair_of(pf, pu);
    const auto sa = g.sqrt_w();
    const double lf2 = pf.l_s * pf.l_s, lu2 = pu.l_s * pu.l_s;
    if (s == 0 && j == 0) {
        // s1' lies above s1 on segment 1: f's kernel carries the gap h1 - h1'
        const double e = std::exp(-p.c * g.hp[0]);
        const double w = sa[0] * x.sqrt_w[0] + sa[1] * x.sqrt_w[1];
        return p.k * std::exp(-0.5 * (x.h[0] - g.hp[0]) / lf2) * ((1.0 - e) + w * e);
    }
    if (s == 0) return x.sqrt_w[j - 1] * p.k * std::exp(-0.5 * (x.h[0] + g.hp[j]) / lf2);
    if (j == 0) return sa[s - 1] * p.k * std::exp(-0.5 * (g.hp[0] + x.h[s]) / lu2);
    if (j == s) return p.k * std::exp(-0.5 * (x.h[s] - g.hp[j]) / lu2);
    return 0.0;
}

double st_cov_ff(const KernelConfig& k, Coupling c, int a, int sa, double tp, int b, int sb, double tq,
                 const SpatialInputs& x) {
    if (c == Coupling::Independent && a != b) return 0.0;
    const auto& pa = k.latent.at(a);
    const auto& pb = k.latent.at(b);
    return spatial_ff(pa, sa, pb, sb, x) * temporal_cov(pa, pb, tp, tq);
}

double st_cov_uu(const KernelConfig& k, Coupling c, int a, int ja, double tp, int b, int jb, double tq,
                 const InducingGeometry& g) {
    if (c == Coupling::Independent && a != b) return 0.0;
    const auto& pa = k.inducing.at(a);
    const auto& pb = k.inducing.at(b);
    return spatial_uu(pa, ja, pb, jb, g) * temporal_cov(pa, pb, tp, tq);
}

double st_cov_uf(const KernelConfig& k, Coupling c, int a, int j, double tu, int b, int s, double t,
                 const SpatialInputs& x, const InducingGeometry& g) {
    if (c == Coupling::Independent && a != b) return 0.0;
    const auto& pu = k.inducing.at(a);
    const auto& pf = k.latent.at(b);
    return spatial_uf(pu, j, pf, s, x, g) * temporal_cov(pu, pf, tu, t);
}

SpatialTable spatial_table_ff(const KernelConfig& k, Coupling c, const SpatialInputs& x) {
    SpatialTable S;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (int b = 0; b < 2; ++b)
                for (int r = 0; r < 3; ++r)
                    S(a * 3 + s, b * 3 + r) = (c == Coupling::Independent && a != b)
                                                  ? 0.0
                                                  : spatial_ff(k.latent[a], s, k.latent[b], r, x);
    return S;
}

SpatialTable spatial_table_uu(const KernelConfig& k, Coupling c, const InducingGeometry& g) {
    SpatialTable S;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (int b = 0; b < 2; ++b)
                for (int r = 0; r < 3; ++r)
                    S(a * 3 + s, b * 3 + r) = (c == Coupling::Independent && a != b)
                                                  ? 0.0
                                                  : spatial_uu(k.inducing[a], s, k.inducing[b], r, g);
    return S;
}

SpatialTable spatial_table_fu(const KernelConfig& k, Coupling c, const SpatialInputs& x,
                              const InducingGeometry& g) {
    SpatialTable S;
    for (int b = 0; b < 2; ++b)
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a)
                for (int j = 0; j < 3; ++j)
                    S(b * 3 + s, a * 3 + j) = (c == Coupling::Independent && a != b)
                                                  ? 0.0
                                                  : spatial_uf(k.inducing[a], j, k.latent[b], s, x, g);
    return S;
}

namespace {

void check_rows(const std::vector<Row>& rows) {
    for (const auto& r : rows) {
        if (r.function < 0 || r.function > 1) fail(ErrorKind::Lookup, "function id out of range");
        check_site(r.site);
    }
}

void check_symmetric(const Mat& K) {
    const double scale = std::max(1.0, K.cwiseAbs().maxCoeff());
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        fail(ErrorKind::Internal, "assembled Gram matrix is not symmetric");
}

}  // namespace

Mat build_gram(GramKind kind, const std::vector<Row>& rows, const std::vector<Row>& cols,
               const GramInputs& in) {
    if (!in.kernels) fail(ErrorKind::Misuse, "build_gram needs a kernel config");
    const KernelConfig& k = *in.kernels;
    const std::vector<Row>& cc = kind == GramKind::UF ? cols : rows;
    check_rows(rows);
    check_rows(cc);
    SpatialTable S;
    const std::array<MovingAverageParams, 2>* prow;
    const std::array<MovingAverageParams, 2>* pcol;
    switch (kind) {
        case GramKind::FF:
            S = spatial_table_ff(k, in.coupling, in.x);
            prow = pcol = &k.latent;
            break;
        case GramKind::UU:
            S = spatial_table_uu(k, in.coupling, in.g);
            prow = pcol = &k.inducing;
            break;
        default:
            S = spatial_table_fu(k, in.coupling, in.x, in.g);
            prow = &k.latent;
            pcol = &k.inducing;
            break;
    }
    // temporal constants per function pair
    double amp[2][2], inv2s[2][2];
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            const double s = (*prow)[a].l_t * (*prow)[a].l_t + (*pcol)[b].l_t * (*pcol)[b].l_t;
            amp[a][b] = kSqrt2Pi * (*prow)[a].nu_t * (*pcol)[b].nu_t / std::sqrt(s);
            inv2s[a][b] = 0.5 / s;
        }
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index m = static_cast<Eigen::Index>(cc.size());
    Mat K(n, m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) {
        const Row& r = rows[i];
        const int ri = r.function * 3 + r.site;
        for (Eigen::Index j = 0; j < m; ++j) {
            const Row& q = cc[j];
            const double sp = S(ri, q.function * 3 + q.site);
            if (sp == 0.0) {
                K(i, j) = 0.0;
                continue;
            }
            const double dt = r.t - q.t;
            K(i, j) = sp * amp[r.function][q.function] * std::exp(-dt * dt * inv2s[r.function][q.function]);
        }
    }
    if (kind != GramKind::UF) check_symmetric(K);
    return K;
}

Mat build_gram_serial(GramKind kind, const std::vector<Row>& rows, const std::vector<Row>& cols,
                      const GramInputs& in) {
    if (!in.kernels) fail(ErrorKind::Misuse, "build_gram needs a kernel config");
    const std::vector<Row>& cc = kind == GramKind::UF ? cols : rows;
    check_rows(rows);
    check_rows(cc);
    Mat K(rows.size(), cc.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cc.size(); ++j) {
            const Row& r = rows[i];
            const Row& q = cc[j];
            switch (kind) {
                case GramKind::FF:
                    K(i, j) = st_cov_ff(*in.kernels, in.coupling, r.function, r.site, r.t, q.function, q.site,
                                        q.t, in.x);
                    break;
                case GramKind::UU:
                    K(i, j) = st_cov_uu(*in.kernels, in.coupling, r.function, r.site, r.t, q.function, q.site,
                                        q.t, in.g);
                    break;
                case GramKind::UF:
                    K(i, j) = st_cov_uf(*in.kernels, in.coupling, q.function, q.site, q.t, r.function, r.site,
                                        r.t, in.x, in.g);
                    break;
            }
        }
    if (kind != GramKind::UF) check_symmetric(K);
    return K;
}

double JitteredCholesky::log_det() const {
    const Mat& L = llt.matrixLLT();
    return 2.0 * L.diagonal().array().log().sum();
}

JitteredCholesky jittered_cholesky(const Mat& K, const char* what) {
    if (K.rows() != K.cols()) fail(ErrorKind::Internal, std::string(what) + ": matrix not square");
    JitteredCholesky out;
    if (K.rows() == 0) {
        out.llt.compute(K);
        return out;
    }
    const double mean_diag = std::max(K.diagonal().mean(), std::numeric_limits<double>::min());
    if (!std::isfinite(mean_diag)) fail(ErrorKind::Numerical, std::string(what) + ": non-finite entries");
    for (double rel = 1e-10; rel <= 1e-6 * 1.0000001; rel *= 10.0) {
        Mat A = K;
        A.diagonal().array() += rel * mean_diag;
        out.llt.compute(A);
        if (out.llt.info() == Eigen::Success) {
            const auto d = out.llt.matrixLLT().diagonal();
            if ((d.array() > 0.0).all() && d.allFinite()) {
                out.jitter = rel * mean_diag;
                return out;
            }
        }
    }
    fail(ErrorKind::Numerical, std::string(what) + ": Cholesky failed after jitter escalation to 1e-6");
}

}  // namespace streamgp
