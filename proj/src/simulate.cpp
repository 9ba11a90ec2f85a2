#include "streamgp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace streamgp {

CellCounts table7_counts() {
    CellCounts c{};
    c[0][0] = {32, 1, 0};
    c[0][1] = {32, 3, 3};
    c[0][2] = {32, 0, 3};
    c[1][0] = {28, 6, 2};
    c[1][1] = {28, 5, 2};
    c[1][2] = {28, 2, 10};
    return c;
}

void SimulationConfig::validate() const {
    for (const auto& k : kernels) k.validate();
    for (double v : noise_sd) require_positive(v, "noise sd");
    if (grid_points < 2 || !(t_max > t_min)) fail(ErrorKind::Config, "invalid truth grid");
    if (subsample < 1 || subsample > grid_points) fail(ErrorKind::Config, "subsample count must be in [1, grid_points]");
    for (const auto& p : censor_pct)
        if (!(p[1] > 0 && p[1] < p[0] && p[0] < 100))
            fail(ErrorKind::Config, "censoring percentiles must satisfy 0 < detection < quantification < 100");
    for (const auto& f : counts)
        for (const auto& s : f) {
            if (s[0] < 0 || s[1] < 0 || s[2] < 0) fail(ErrorKind::Config, "negative cell count");
            if (s[0] + s[1] + s[2] > subsample) fail(ErrorKind::Config, "cell counts exceed the subsample size");
        }
}

TruthSampler::TruthSampler(const SimulationConfig& c) {
    c.validate();
    t.resize(c.grid_points);
    for (int i = 0; i < c.grid_points; ++i) t[i] = c.t_min + (c.t_max - c.t_min) * i / (c.grid_points - 1);
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < c.grid_points; ++i) rows.push_back(Row{a, s, t[i]});
    const KernelConfig k = KernelConfig::tied(c.kernels);
    GramInputs gi;
    gi.kernels = &k;
    gi.x = SpatialInputs::from_tau_gamma(c.tau, c.gamma);
    const Mat K = build_gram(GramKind::FF, rows, {}, gi);
    const auto llt = jittered_cholesky(K, "truth K_NN");
    L = llt.llt.matrixL();
    jitter = llt.jitter;
}

LatentTruth TruthSampler::sample(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Vec e(L.rows());
    for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = z(rng);
    const Vec f = L.triangularView<Eigen::Lower>() * e;
    LatentTruth out;
    out.t = t;
    const Eigen::Index n = t.size();
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s) out.f[a][s] = f.segment((a * 3 + s) * n, n);
    return out;
}

LatentTruth sample_latent_truth(const SimulationConfig& c, std::uint64_t seed) { return TruthSampler(c).sample(seed); }

std::vector<int> subsample_indices(int grid_points, int n) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    const double stride = static_cast<double>(grid_points) / n;
    for (int k = 0; k < n; ++k) idx[k] = static_cast<int>(std::floor(stride * (k + 0.5)));
    return idx;
}

double quantile_type7(std::vector<double> v, double p) {
    if (v.empty()) fail(ErrorKind::Domain, "quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Domain, "quantile level outside [0, 1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::uint64_t replicate_seed(std::uint64_t master, int replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(replicate), 0x5eedu};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

Dataset noisy_subsample(const LatentTruth& truth, const SimulationConfig& c, const std::vector<int>& idx,
                        std::mt19937_64& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    Dataset d;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (int i : idx)
                d.rows.push_back(Observation{a, s, truth.t[i], truth.f[a][s][i] + c.noise_sd[a] * z(rng), Status::Observed});
    return d;
}

}  // namespace

void apply_censoring(Dataset& d, const CensoringLimits& lim) {
    lim.validate();
    for (auto& o : d.rows) {
        if (o.status == Status::Missing) continue;
        if (o.value <= lim.ld[o.function]) {
            o.status = Status::BelowDetection;
            o.value = lim.ld[o.function];
        } else if (o.value <= lim.lq[o.function]) {
            o.status = Status::BetweenLimits;
            o.value = lim.lq[o.function];
        }
    }
    d.limits = lim;
}

CellCounts status_counts(const std::vector<Observation>& rows) {
    CellCounts c{};
    for (const auto& o : rows) {
        if (o.status == Status::Missing) continue;
        const int k = o.status == Status::Observed ? 0 : o.status == Status::BetweenLimits ? 1 : 2;
        ++c[o.function][o.site][k];
    }
    return c;
}

std::optional<Dataset> try_make_dataset(const LatentTruth& truth, const SimulationConfig& c, CaseStudy mode,
                                        std::uint64_t seed, std::string* why) {
    c.validate();
    std::mt19937_64 rng(seed);
    Dataset d = noisy_subsample(truth, c, subsample_indices(static_cast<int>(truth.t.size()), c.subsample), rng);
    if (mode == CaseStudy::CS1) return d;

    CensoringLimits lim;
    for (int a = 0; a < 2; ++a) {
        std::vector<double> v;
        for (const auto& o : d.rows)
            if (o.function == a) v.push_back(o.value);
        lim.lq[a] = quantile_type7(v, c.censor_pct[a][0] / 100.0);
        lim.ld[a] = quantile_type7(v, c.censor_pct[a][1] / 100.0);
    }
    apply_censoring(d, lim);

    const Status kinds[3] = {Status::Observed, Status::BetweenLimits, Status::BelowDetection};
    const char* names[3] = {"observed", "between-limits", "below-detection"};
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (int k = 0; k < 3; ++k) {
                std::vector<std::size_t> cell;
                for (std::size_t i = 0; i < d.rows.size(); ++i)
                    if (d.rows[i].function == a && d.rows[i].site == s && d.rows[i].status == kinds[k]) cell.push_back(i);
                const int n = static_cast<int>(cell.size());
                const int target = c.counts[a][s][k];
                const int remove = c.counts_mode == CountsMode::Remaining ? n - target : target;
                if (remove < 0 || remove > n) {
                    if (why)
                        *why = "count table cell f" + std::to_string(a + 1) + " s" + std::to_string(s + 1) + " " +
                               names[k] + " needs " + std::to_string(target) + " but only " + std::to_string(n) +
                               " rows are available";
                    return std::nullopt;
                }
                std::shuffle(cell.begin(), cell.end(), rng);
                for (int r = 0; r < remove; ++r) {
                    d.rows[cell[r]].status = Status::Missing;
                    d.rows[cell[r]].value = std::numeric_limits<double>::quiet_NaN();
                }
            }
    return d;
}

Dataset make_dataset(const LatentTruth& truth, const SimulationConfig& c, CaseStudy mode, std::uint64_t seed) {
    std::string why;
    auto d = try_make_dataset(truth, c, mode, seed, &why);
    if (!d) fail(ErrorKind::Config, why);
    return std::move(*d);
}

Dataset make_timing_dataset(const LatentTruth& truth, const SimulationConfig& c, int n_t, std::uint64_t seed) {
    if (n_t < 1 || n_t > truth.t.size()) fail(ErrorKind::Config, "timing N_t must be in [1, grid points]");
    std::mt19937_64 rng(seed);
    return noisy_subsample(truth, c, subsample_indices(static_cast<int>(truth.t.size()), n_t), rng);
}

}  // namespace streamgp
