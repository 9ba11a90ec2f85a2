#include "streamgp/experiment.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

namespace streamgp {

void ExperimentConfig::validate() const {
    sim.validate();
    if (replicates < 1) fail(ErrorKind::Config, "replicates must be >= 1");
    if (mt < 1) fail(ErrorKind::Config, "mt must be >= 1");
    if (frameworks.empty()) fail(ErrorKind::Config, "no frameworks selected");
    if (max_redraws < 1) fail(ErrorKind::Config, "max_redraws must be >= 1");
    for (std::size_t i = 0; i < timing_nt.size(); ++i) {
        if (timing_nt[i] < 1 || timing_nt[i] > sim.grid_points)
            fail(ErrorKind::Config, "timing n_t must be in [1, grid_points]");
        if (i > 0 && timing_nt[i] <= timing_nt[i - 1]) fail(ErrorKind::Config, "timing n_t must increase");
    }
    if (!(timing_min_seconds > 0.0)) fail(ErrorKind::Config, "timing min_seconds must be positive");
    bgp.validate();
    gpr.validate();
}

ReplicateInput draw_replicate(const LatentTruth& truth, const ExperimentConfig& cfg, int r) {
    ReplicateInput in;
    in.replicate = r;
    const std::uint64_t base = replicate_seed(cfg.master_seed, r);
    std::string why;
    for (int a = 0; a < cfg.max_redraws; ++a) {
        const std::uint64_t seed = a == 0 ? base : replicate_seed(base, a);
        auto d = try_make_dataset(truth, cfg.sim, cfg.case_study, seed, &why);
        if (!d) continue;
        in.attempts = a + 1;
        in.seed = seed;
        in.data = std::move(*d);
        if (a > 0) spdlog::debug("replicate {}: accepted noise draw {}", r, a + 1);
        return in;
    }
    fail(ErrorKind::Config, "replicate " + std::to_string(r) + ": no admissible noise draw in " +
                                std::to_string(cfg.max_redraws) + " attempts (" + why + ")");
}

PredictionTargets prediction_targets(const LatentTruth& truth, const SimulationConfig& c) {
    const int n = static_cast<int>(truth.t.size());
    std::vector<bool> train(static_cast<std::size_t>(n), false);
    for (int i : subsample_indices(n, c.subsample)) train[static_cast<std::size_t>(i)] = true;
    PredictionTargets tg;
    std::vector<double> f;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < n; ++i)
                if (!train[static_cast<std::size_t>(i)]) {
                    tg.request.rows.push_back(Row{a, s, truth.t[i]});
                    f.push_back(truth.f[a][s][i]);
                }
    tg.truth = Eigen::Map<Vec>(f.data(), static_cast<Eigen::Index>(f.size()));
    return tg;
}

std::vector<Row> prediction_rows(const SimulationConfig& c) {
    c.validate();
    const int n = c.grid_points;
    std::vector<bool> train(static_cast<std::size_t>(n), false);
    for (int i : subsample_indices(n, c.subsample)) train[static_cast<std::size_t>(i)] = true;
    Vec t(n);
    for (int i = 0; i < n; ++i) t[i] = c.t_min + (c.t_max - c.t_min) * i / (n - 1);  // same grid as the truth
    std::vector<Row> rows;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (int i = 0; i < n; ++i)
                if (!train[static_cast<std::size_t>(i)]) rows.push_back(Row{a, s, t[i]});
    return rows;
}

PerFunction split_by_function(const std::vector<Row>& rows, const Vec& v) {
    if (static_cast<Eigen::Index>(rows.size()) != v.size()) fail(ErrorKind::Domain, "split: length mismatch");
    std::vector<std::vector<double>> parts(2);
    for (std::size_t i = 0; i < rows.size(); ++i) parts.at(static_cast<std::size_t>(rows[i].function)).push_back(v[i]);
    PerFunction out;
    for (auto& p : parts)
        if (!p.empty()) out.push_back(Eigen::Map<Vec>(p.data(), static_cast<Eigen::Index>(p.size())));
    return out;
}

ReplicateScore score_prediction(const PredictionTargets& tg, const PredictionResult& pr) {
    const auto& rows = tg.request.rows;
    const PerFunction t = split_by_function(rows, tg.truth);
    const PerFunction m = split_by_function(rows, pr.mean);
    const PerFunction s = split_by_function(rows, pr.sd);
    ReplicateScore sc;
    sc.rmse = rmse(t, m);
    sc.mae = mae(t, m);
    sc.mnll = mnll(t, m, s);
    return sc;
}

SpatialInputs deterministic_inputs(const SimulationConfig& c) { return SpatialInputs::from_tau_gamma(c.tau, c.gamma); }
SpatialInputs measured_inputs(const UncertainInputPriors& p) { return SpatialInputs::from_tau_gamma(p.d_tau, p.d_gamma); }

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::pair<double, double> time_range(const std::vector<Observation>& obs) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& o : obs) {
        lo = std::min(lo, o.t);
        hi = std::max(hi, o.t);
    }
    return {lo, hi};
}

}  // namespace

std::vector<FrameworkRun> run_replicate(const ExperimentConfig& cfg, const ReplicateInput& in,
                                        const PredictionTargets& tg) {
    std::vector<FrameworkRun> out;
    const Problem base = Problem::make(in.data.rows, in.data.limits, cfg.priors, Coupling::MultiOutput);
    const GprData gd = gpr_data(base.observations);
    const SpatialInputs xe = deterministic_inputs(cfg.sim);
    const SpatialInputs xu = measured_inputs(cfg.priors);
    const auto [t_lo, t_hi] = time_range(base.observations);

    auto wants = [&](Framework f) {
        return std::find(cfg.frameworks.begin(), cfg.frameworks.end(), f) != cfg.frameworks.end();
    };
    // BGP variants start from the Uncertain-GPR fit, so it is computed when either is wanted.
    std::optional<GprFit> unc;
    double unc_time = 0.0;
    std::string unc_error;
    const bool need_unc = wants(Framework::UncertainGPR) || wants(Framework::InBGPLVM) || wants(Framework::MOBGPLVM);
    if (need_unc) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            unc = fit_gpr(xu, gd, cfg.gpr);
        } catch (const Error& e) {
            unc_error = std::string(to_string(e.kind())) + ": " + e.what();
        }
        unc_time = seconds_since(t0);
    }

    for (Framework f : kAllFrameworks) {
        if (!wants(f)) continue;
        FrameworkRun run;
        run.framework = f;
        run.score.replicate = in.replicate;
        run.score.framework = f;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            switch (f) {
                case Framework::ExactGPR: {
                    run.gpr = fit_gpr(xe, gd, cfg.gpr);
                    run.prediction = gpr_predict(run.gpr->params, xe, gd, tg.request);
                    run.score.converged = run.gpr->converged;
                    break;
                }
                case Framework::UncertainGPR: {
                    if (!unc) fail(ErrorKind::Numerical, unc_error);
                    run.gpr = unc;
                    run.prediction = gpr_predict(unc->params, xu, gd, tg.request);
                    run.score.converged = unc->converged;
                    break;
                }
                case Framework::InBGPLVM:
                case Framework::MOBGPLVM: {
                    if (!unc) fail(ErrorKind::Numerical, "warm start unavailable: " + unc_error);
                    Problem prob = base;
                    prob.coupling = f == Framework::MOBGPLVM ? Coupling::MultiOutput : Coupling::Independent;
                    const ModelParams ref = bgp_reference(unc->params, prob, cfg.mt, t_lo, t_hi);
                    run.bgp = fit_bgp(prob, cfg.bgp, default_bgp_sampler(ref, prob));
                    run.prediction = predictive_moments(run.bgp->best, prob, tg.request);
                    run.score.converged = run.bgp->converged;
                    break;
                }
            }
            const ReplicateScore s = score_prediction(tg, run.prediction);
            run.score.rmse = s.rmse;
            run.score.mae = s.mae;
            run.score.mnll = s.mnll;
        } catch (const Error& e) {
            run.error = std::string(to_string(e.kind())) + ": " + e.what();
            run.score.converged = false;
            run.score.rmse = run.score.mae = run.score.mnll = std::numeric_limits<double>::quiet_NaN();
            spdlog::warn("replicate {} {}: {}", in.replicate, framework_name(f), run.error);
        }
        run.score.wall_time_s = seconds_since(t0) + (f == Framework::UncertainGPR ? unc_time : 0.0);
        spdlog::info("replicate {} {}: rmse {:.4f} mae {:.4f} mnll {:.4f} converged {} ({:.1f} s)", in.replicate,
                     framework_name(f), run.score.rmse, run.score.mae, run.score.mnll, run.score.converged,
                     run.score.wall_time_s);
        out.push_back(std::move(run));
    }
    return out;
}

namespace {

template <class F>
double time_per_call(F&& f, double min_seconds) {
    f();  // warm-up
    std::vector<double> reps;
    // a few blocks; the median resists scheduler hiccups
    for (int block = 0; block < 5; ++block) {
        const auto b0 = std::chrono::steady_clock::now();
        int k = 0;
        do {
            f();
            ++k;
        } while (seconds_since(b0) < min_seconds / 5.0);
        reps.push_back(seconds_since(b0) / k);
    }
    std::sort(reps.begin(), reps.end());
    return reps[reps.size() / 2];
}

}  // namespace

std::vector<TimingRow> timing_sweep(const ExperimentConfig& cfg, const LatentTruth& truth) {
    std::vector<TimingRow> out;
    const SpatialInputs xe = deterministic_inputs(cfg.sim);
    for (std::size_t i = 0; i < cfg.timing_nt.size(); ++i) {
        const int n = cfg.timing_nt[i];
        const Dataset d = make_timing_dataset(truth, cfg.sim, n, replicate_seed(cfg.master_seed ^ 0x7157ull, n));
        const Problem prob = Problem::make(d.rows, std::nullopt, cfg.priors, Coupling::MultiOutput);
        const GprData gd = gpr_data(prob.observations);
        const GprParams g = gpr_heuristic_start(xe, gd);
        const auto [t_lo, t_hi] = time_range(prob.observations);
        const ModelParams p = bgp_reference(g, prob, cfg.mt, t_lo, t_hi);
        volatile double sink = 0.0;
        TimingRow b;
        b.n_t = n;
        b.framework = Framework::MOBGPLVM;
        b.seconds_per_eval = time_per_call([&] { sink = collapsed_bound(p, prob); }, cfg.timing_min_seconds);
        b.n_params = static_cast<int>(ParamLayout(cfg.mt, 0, false).gradient_size());
        TimingRow e;
        e.n_t = n;
        e.framework = Framework::ExactGPR;
        e.seconds_per_eval = time_per_call([&] { sink = gpr_log_marginal(g, xe, gd); }, cfg.timing_min_seconds);
        e.n_params = 8;
        (void)sink;
        spdlog::info("timing N_t {}: bound {:.3e} s/eval, exact {:.3e} s/eval", n, b.seconds_per_eval,
                     e.seconds_per_eval);
        out.push_back(b);
        out.push_back(e);
    }
    return out;
}

int worker_threads() {
    if (const char* s = std::getenv("STREAMGP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(s, &end, 10);
        if (end == s || *end != '\0' || v < 1) fail(ErrorKind::Config, "STREAMGP_THREADS must be a positive integer");
        return static_cast<int>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace streamgp
