#include "streamgp/checks.hpp"

#include <algorithm>
#include <cmath>

namespace streamgp {

PsiCase psi_worked_element_case() {
    PsiCase c;
    c.name = "worked element (l'=1, l=1, mu_tau=2, var_tau=0.25, h'=3)";
    const MovingAverageParams unit{1.0, 1.0, 1.0, 1.0};
    c.kernels = KernelConfig::tied({unit, unit});
    auto& r = c.request;
    r.coupling = Coupling::MultiOutput;
    r.q.mu_tau = {2.0, 2.0, 2.0};
    r.q.sd_tau = {0.5, 0.5, 0.5};
    r.q.mu_gamma = {0.5, 0.5};
    r.q.sd_gamma = {0.2, 0.2};
    r.g.hp = {3.0, 3.0, 3.0};
    r.g.alpha = {0.5, 0.5};
    r.rows = {Row{0, 0, 0.0}};
    r.weights = Vec::Ones(1);
    r.inducing = {Row{0, 0, 0.0}};
    return c;
}

PsiCase random_psi_case(std::mt19937_64& rng, int index) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto in = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    PsiCase c;
    c.name = "random " + std::to_string(index);
    std::array<MovingAverageParams, 2> lat, ind;
    for (int a = 0; a < 2; ++a) {
        lat[a] = {in(0.5, 2.0), in(1.0, 4.0), 1.0, in(0.3, 2.0)};
        ind[a] = {in(0.5, 2.0), in(1.0, 4.0), 1.0, in(0.3, 2.0)};
    }
    c.kernels.latent = lat;
    c.kernels.inducing = ind;
    auto& r = c.request;
    r.coupling = u(rng) < 0.75 ? Coupling::MultiOutput : Coupling::Independent;
    for (int j = 0; j < 3; ++j) {
        r.q.mu_tau[j] = in(1.0, 3.0);
        r.q.sd_tau[j] = in(0.05, 0.5);
        r.g.hp[j] = in(0.2, 3.0);
    }
    for (int k = 0; k < 2; ++k) {
        r.q.mu_gamma[k] = in(-1.0, 1.0);
        r.q.sd_gamma[k] = in(0.05, 0.5);
        r.g.alpha[k] = in(-1.0, 1.0);
    }
    const int n = 4;
    r.weights.resize(n);
    for (int i = 0; i < n; ++i) {
        r.rows.push_back(Row{static_cast<int>(u(rng) * 2) % 2, static_cast<int>(u(rng) * 3) % 3, in(0.0, 3.0)});
        r.weights[i] = in(1.0, 10.0);
    }
    const double tu[2] = {in(0.0, 1.5), in(1.5, 3.0)};
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (double t : tu) r.inducing.push_back(Row{a, s, t});
    return c;
}

namespace {

// Entry-wise agreement of one family; the family passes at the single-comparison
// 3-SE level after a Sidak adjustment over its m entries.
struct Family {
    int entries = 0, beyond = 0;
    double max_z = 0.0;
    bool exact_mismatch = false;
    void add(double closed, double mc, double se) {
        ++entries;
        const double diff = std::abs(closed - mc);
        if (se > 0.0) {
            const double z = diff / se;
            max_z = std::max(max_z, z);
            if (z > 3.0) ++beyond;
        } else if (diff > 1e-12 * std::max(1.0, std::abs(mc))) {
            exact_mismatch = true;
        }
    }
    bool ok() const {
        if (exact_mismatch || !std::isfinite(max_z)) return false;
        const double alpha = std::erfc(3.0 / std::sqrt(2.0));  // two-sided 3-SE level
        const double per = 1.0 - std::pow(1.0 - alpha, 1.0 / std::max(entries, 1));
        const double p_min = std::erfc(max_z / std::sqrt(2.0));
        return p_min >= per;
    }
};

}  // namespace

PsiCheckCase psi_check_case(const PsiCase& c, std::int64_t samples, std::uint64_t seed) {
    PsiRequest r = c.request;
    r.kernels = &c.kernels;
    const PsiStatistics cf = psi_closed(r);
    const PsiMonteCarlo mc = psi_mc_oracle(r, samples, seed);
    Family f0, f1, f2;
    f0.add(cf.psi0, mc.mean.psi0, mc.psi0_se);
    for (Eigen::Index i = 0; i < cf.Psi1.rows(); ++i)
        for (Eigen::Index j = 0; j < cf.Psi1.cols(); ++j) f1.add(cf.Psi1(i, j), mc.mean.Psi1(i, j), mc.Psi1_se(i, j));
    for (Eigen::Index i = 0; i < cf.Psi2.rows(); ++i)
        for (Eigen::Index j = i; j < cf.Psi2.cols(); ++j) f2.add(cf.Psi2(i, j), mc.mean.Psi2(i, j), mc.Psi2_se(i, j));
    PsiCheckCase out;
    out.name = c.name;
    out.entries = f0.entries + f1.entries + f2.entries;
    out.beyond_3se = f0.beyond + f1.beyond + f2.beyond;
    out.max_z = std::max({f0.max_z, f1.max_z, f2.max_z});
    out.family_ok = {f0.ok(), f1.ok(), f2.ok()};
    return out;
}

std::vector<PsiCheckCase> psi_check_suite(int n_random, std::int64_t samples, std::uint64_t seed) {
    std::vector<PsiCheckCase> out;
    out.push_back(psi_check_case(psi_worked_element_case(), samples, seed));
    std::mt19937_64 rng(seed);
    for (int i = 0; i < n_random; ++i) {
        const PsiCase c = random_psi_case(rng, i + 1);
        out.push_back(psi_check_case(c, samples, seed + 1 + static_cast<std::uint64_t>(i)));
    }
    return out;
}

}  // namespace streamgp
