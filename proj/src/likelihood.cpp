#include "streamgp/likelihood.hpp"

#include <algorithm>
#include <cmath>

#include "streamgp/latent.hpp"

namespace streamgp {

const char* status_code(Status s) {
    switch (s) {
        case Status::Observed: return "obs";
        case Status::BetweenLimits: return "bql";
        case Status::BelowDetection: return "bdl";
        case Status::Missing: return "missing";
    }
    return "?";
}

Status parse_status(const std::string& s) {
    if (s == "obs") return Status::Observed;
    if (s == "bql") return Status::BetweenLimits;
    if (s == "bdl") return Status::BelowDetection;
    if (s == "missing") return Status::Missing;
    fail(ErrorKind::Config, "unknown status '" + s + "'");
}

void CensoringLimits::validate() const {
    for (int a = 0; a < 2; ++a)
        if (!(ld[a] < lq[a])) fail(ErrorKind::Config, "detection limit must lie below quantification limit");
}

double censored_log_term(Status status, double f, double lq, double ld, double s2) {
    const double s = std::sqrt(s2);
    if (status == Status::BelowDetection) return log_norm_cdf((ld - f) / s);
    if (status == Status::BetweenLimits) return log_norm_cdf_diff((lq - f) / s, (ld - f) / s);
    fail(ErrorKind::Misuse, "censored_log_term needs a censored status");
}

namespace {

double censored_slope(Status status, double f, double lq, double ld, double s) {
    if (status == Status::BelowDetection) {
        const double z = (ld - f) / s;
        return -std::exp(log_norm_pdf(z) - log_norm_cdf(z)) / s;
    }
    const double zq = (lq - f) / s, zd = (ld - f) / s;
    const double ld_ = log_norm_cdf_diff(zq, zd);
    return (std::exp(log_norm_pdf(zd) - ld_) - std::exp(log_norm_pdf(zq) - ld_)) / s;
}

}  // namespace

LocalBoundCoeffs local_bound_coeffs(Status status, double zeta, double lq, double ld, double sigma2,
                                    double sigma2_het, bool verify_grid) {
    if (status != Status::BetweenLimits && status != Status::BelowDetection)
        fail(ErrorKind::Misuse, "local bound needs a censored status");
    if (!(ld < lq)) fail(ErrorKind::Config, "degenerate censoring limits");
    require_positive(sigma2, "noise variance");
    if (sigma2_het < 0.0) fail(ErrorKind::Parameter, "heteroskedastic variance must be nonnegative");
    LocalBoundCoeffs g;
    g.s2 = sigma2 + sigma2_het;
    g.d = ld + lq;
    const double s = std::sqrt(g.s2);
    const double L = censored_log_term(status, zeta, lq, ld, g.s2);
    const double dL = censored_slope(status, zeta, lq, ld, s);
    g.b = zeta + g.s2 * dL;
    g.c = g.s2 * L + 0.5 * zeta * zeta - g.b * (zeta - g.d);
    if (verify_grid) {
        // L + f^2/(2 s2) is convex, so this only ever catches roundoff
        double worst = 0.0;
        for (int i = 0; i < 400; ++i) {
            const double f = zeta - 8.0 * s + 16.0 * s * i / 399.0;
            worst = std::max(worst, g.value(f) - censored_log_term(status, f, lq, ld, g.s2));
        }
        g.c -= g.s2 * worst;
    }
    return g;
}

std::vector<Observation> canonicalize(std::vector<Observation> obs) {
    obs.erase(std::remove_if(obs.begin(), obs.end(), [](const Observation& o) { return o.status == Status::Missing; }),
              obs.end());
    std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
        if (a.function != b.function) return a.function < b.function;
        if (a.site != b.site) return a.site < b.site;
        return a.t < b.t;
    });
    return obs;
}

std::size_t count_censored(const std::vector<Observation>& obs) {
    return static_cast<std::size_t>(std::count_if(obs.begin(), obs.end(), [](const Observation& o) {
        return o.status == Status::BetweenLimits || o.status == Status::BelowDetection;
    }));
}

namespace {

// Pseudo-data order: observed f1, observed f2, qd f1, qd f2, d f1, d f2.
std::vector<std::size_t> pseudo_order(const std::vector<Observation>& c) {
    std::vector<std::size_t> idx;
    const Status order[3] = {Status::Observed, Status::BetweenLimits, Status::BelowDetection};
    for (Status st : order)
        for (int a = 0; a < 2; ++a)
            for (std::size_t i = 0; i < c.size(); ++i)
                if (c[i].status == st && c[i].function == a) idx.push_back(i);
    return idx;
}

}  // namespace

Vec initial_zeta(const std::vector<Observation>& canonical, const CensoringLimits& lim,
                 const std::array<double, 2>& sigma) {
    const auto idx = pseudo_order(canonical);
    std::vector<double> z;
    for (std::size_t i : idx) {
        const auto& o = canonical[i];
        if (o.status == Status::BetweenLimits) z.push_back(0.5 * (lim.lq[o.function] + lim.ld[o.function]));
        if (o.status == Status::BelowDetection) z.push_back(lim.ld[o.function] - sigma[o.function]);
    }
    return Eigen::Map<Vec>(z.data(), static_cast<Eigen::Index>(z.size()));
}

PseudoData assemble_pseudo_data(const std::vector<Observation>& observations,
                                const std::optional<CensoringLimits>& limits, const LocalBoundState& state,
                                const std::array<double, 2>& sigma2, bool verify_grid) {
    const auto c = canonicalize(observations);
    const std::size_t nc = count_censored(c);
    if (nc > 0 && !limits) fail(ErrorKind::Config, "censored rows present but no censoring limits given");
    if (limits) limits->validate();
    if (static_cast<std::size_t>(state.zeta.size()) != nc)
        fail(ErrorKind::Internal, "zeta vector does not match the censored row count");
    const auto idx = pseudo_order(c);
    PseudoData p;
    const std::size_t n = idx.size();
    p.rows.reserve(n);
    p.y_l.resize(static_cast<Eigen::Index>(n));
    p.sigma2_l.resize(static_cast<Eigen::Index>(n));
    const Eigen::Index ncen = static_cast<Eigen::Index>(nc);
    p.b.resize(ncen);
    p.c.resize(ncen);
    p.d.resize(ncen);
    p.ones = Vec::Ones(ncen);
    p.sigma2_c.resize(ncen);
    Eigen::Index k = 0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto& o = c[idx[r]];
        p.rows.push_back(Row{o.function, o.site, o.t});
        p.status.push_back(o.status);
        p.source.push_back(idx[r]);
        const int a = o.function;
        if (o.status == Status::Observed) {
            p.y_l[r] = o.value;
            p.sigma2_l[r] = sigma2[a];
            ++p.n_observed[a];
            ++p.n_uncensored;
            continue;
        }
        const double lq = limits->lq[a], ld = limits->ld[a];
        const double tol = 1e-9 * std::max(1.0, std::abs(o.value));
        if (o.status == Status::BetweenLimits) {
            if (std::abs(o.value - lq) > tol) fail(ErrorKind::Config, "between-limits row must carry l_q");
            ++p.n_qd[a];
        } else {
            if (std::abs(o.value - ld) > tol) fail(ErrorKind::Config, "below-detection row must carry l_d");
            ++p.n_d[a];
        }
        const double het = o.status == Status::BetweenLimits ? state.sigma2_qd[a] : state.sigma2_d[a];
        const auto g = local_bound_coeffs(o.status, state.zeta[k], lq, ld, sigma2[a], het, verify_grid);
        p.b[k] = g.b;
        p.c[k] = g.c;
        p.d[k] = g.d;
        p.sigma2_c[k] = g.s2;
        p.y_l[r] = g.b;
        p.sigma2_l[r] = g.s2;
        ++k;
    }
    return p;
}

double exact_censored_loglik(const Vec& f, const std::vector<Observation>& observations,
                             const std::optional<CensoringLimits>& limits, const std::array<double, 2>& sigma2,
                             const std::array<double, 2>& sigma2_qd, const std::array<double, 2>& sigma2_d) {
    const auto c = canonicalize(observations);
    if (static_cast<std::size_t>(f.size()) != c.size()) fail(ErrorKind::Internal, "latent vector length mismatch");
    double ll = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& o = c[i];
        const int a = o.function;
        if (o.status == Status::Observed) {
            const double r = o.value - f[i];
            ll += -0.5 * (kLog2Pi + std::log(sigma2[a]) + r * r / sigma2[a]);
            continue;
        }
        if (!limits) fail(ErrorKind::Config, "censored rows present but no censoring limits given");
        const double het = o.status == Status::BetweenLimits ? sigma2_qd[a] : sigma2_d[a];
        ll += censored_log_term(o.status, f[i], limits->lq[a], limits->ld[a], sigma2[a] + het);
    }
    return ll;
}

}  // namespace streamgp
