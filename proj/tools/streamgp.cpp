#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <fmt/format.h>
#include <omp.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <mutex>
#include <sstream>
#include <thread>

#include "streamgp/checks.hpp"
#include "streamgp/experiment.hpp"
#include "streamgp/io.hpp"

namespace fs = std::filesystem;
using namespace streamgp;
using json = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kPartial = 4 };

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> frameworks;
    std::optional<int> replicates;
    std::optional<std::size_t> mt;
    std::vector<std::string> inputs;
    std::int64_t samples = 1000000;
    int configs = 20;
    bool skip_timing = false;
};

ExperimentConfig load(const Options& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
    if (o.replicates) c.replicates = *o.replicates;
    if (o.mt) c.mt = *o.mt;
    if (!o.frameworks.empty()) {
        c.frameworks.clear();
        for (const auto& f : o.frameworks) c.frameworks.push_back(parse_framework(f));
    }
    c.validate();
    return c;
}

void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(p.parent_path(), ec);
        if (ec) fail(ErrorKind::Config, "cannot create directory " + p.parent_path().string() + ": " + ec.message());
    }
    std::ofstream f(p, std::ios::binary);
    if (!f) fail(ErrorKind::Config, "cannot write " + p.string());
    f << content;
    if (!f) fail(ErrorKind::Config, "write failed for " + p.string());
}

std::string read_file(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) fail(ErrorKind::Config, "cannot read " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

template <class W>
std::string render(W&& w) {
    std::ostringstream os;
    w(os);
    return os.str();
}

std::optional<CensoringLimits> manifest_limits(const fs::path& dataset) {
    const fs::path m = dataset.parent_path() / "manifest.json";
    if (!fs::exists(m)) return std::nullopt;
    try {
        const json j = json::parse(read_file(m));
        for (const auto& r : j.at("replicates"))
            if (r.at("file").get<std::string>() == dataset.filename().string() && r.contains("limits")) {
                CensoringLimits l;
                l.lq = r["limits"].at("lq").get<std::array<double, 2>>();
                l.ld = r["limits"].at("ld").get<std::array<double, 2>>();
                return l;
            }
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, m.string() + ": " + e.what());
    }
    return std::nullopt;
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::Config, "cannot read dataset " + path);
    return read_dataset_csv(f, path, manifest_limits(path));
}

std::string replicate_file(int r) { return fmt::format("dataset_r{:03d}.csv", r); }

// ---------------------------------------------------------------- simulate

int cmd_simulate(const Options& o) {
    ExperimentConfig c = load(o);
    if (o.seed) c.master_seed = *o.seed;
    const fs::path out = o.out.empty() ? "out" : o.out;
    const LatentTruth truth = sample_latent_truth(c.sim, c.truth_seed);
    write_file(out / "truth.csv", render([&](std::ostream& os) { write_truth_csv(os, truth); }));
    json reps = json::array();
    for (int r = 0; r < c.replicates; ++r) {
        const ReplicateInput in = draw_replicate(truth, c, r);
        write_file(out / replicate_file(r), render([&](std::ostream& os) { write_dataset_csv(os, in.data); }));
        json e = {{"replicate", r}, {"file", replicate_file(r)}, {"seed", in.seed}, {"attempts", in.attempts}};
        if (in.data.limits) e["limits"] = {{"lq", in.data.limits->lq}, {"ld", in.data.limits->ld}};
        reps.push_back(e);
    }
    json m = {{"schema", "streamgp-manifest/1"},
              {"config_digest", fmt::format("{:016x}", config_digest(c))},
              {"case_study", c.case_study == CaseStudy::CS1 ? "CS1" : "CS2"},
              {"truth_seed", c.truth_seed},
              {"master_seed", c.master_seed},
              {"truth_file", "truth.csv"},
              {"replicates", reps}};
    write_file(out / "manifest.json", m.dump(2) + "\n");
    spdlog::info("wrote {} replicate(s) to {}", c.replicates, out.string());
    return kOk;
}

// ---------------------------------------------------------------- fit

bool gpr_positive_definite(const GprParams& g, const SpatialInputs& x, const GprData& d) {
    Mat K = cross_cov_ff(g.kernels(), Coupling::MultiOutput, x, d.rows, d.rows);
    for (std::size_t i = 0; i < d.rows.size(); ++i) K(i, i) += g.sigma[d.rows[i].function] * g.sigma[d.rows[i].function];
    return Eigen::LLT<Mat>(K).info() == Eigen::Success;
}

Coupling coupling_of(Framework f) { return f == Framework::InBGPLVM ? Coupling::Independent : Coupling::MultiOutput; }

int cmd_fit(const Options& o) {
    if (o.inputs.size() != 1) fail(ErrorKind::Config, "fit needs one dataset file");
    ExperimentConfig c = load(o);
    if (c.frameworks.size() != 1) fail(ErrorKind::Config, "fit needs exactly one framework (use --framework)");
    if (o.seed) c.bgp.seed = c.gpr.seed = *o.seed;
    const Framework fw = c.frameworks.front();
    const Dataset d = load_dataset(o.inputs[0]);
    const Problem prob = Problem::make(d.rows, d.limits, c.priors, coupling_of(fw));
    const GprData gd = gpr_data(prob.observations);
    FitSnapshot s;
    s.framework = fw;
    s.config_digest = config_digest(c);
    s.censored = status_counts(prob.observations);
    int code = kOk;
    if (fw == Framework::ExactGPR || fw == Framework::UncertainGPR) {
        s.seed = c.gpr.seed;
        const SpatialInputs x = fw == Framework::ExactGPR ? deterministic_inputs(c.sim) : measured_inputs(c.priors);
        const GprFit g = fit_gpr(x, gd, c.gpr);
        s.params = to_param_map(g.params);
        s.objective = g.log_marginal;
        s.converged = g.converged;
        s.records = g.records;
        s.positive_definite = gpr_positive_definite(g.params, x, gd);
    } else {
        s.seed = c.bgp.seed;
        const GprFit g = fit_gpr(measured_inputs(c.priors), gd, c.gpr);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (const auto& ob : prob.observations) {
            lo = std::min(lo, ob.t);
            hi = std::max(hi, ob.t);
        }
        const ModelParams ref = bgp_reference(g.params, prob, c.mt, lo, hi);
        try {
            const FitResult f = fit_bgp(prob, c.bgp, default_bgp_sampler(ref, prob));
            s.params = to_param_map(f.best);
            s.objective = f.bound;
            s.converged = f.converged;
            s.records = f.records;
            for (std::size_t i = 0; i < f.constraints.equality.size(); ++i)
                s.constraints[f.constraints.equality_names[i]] = f.constraints.equality[i];
            for (std::size_t i = 0; i < f.constraints.slack.size(); ++i)
                s.constraints[f.constraints.slack_names[i]] = f.constraints.slack[i];
            try {
                (void)model_state(f.best, prob);
                s.positive_definite = true;
            } catch (const Error&) {
                s.positive_definite = false;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::Infeasible && e.kind() != ErrorKind::Numerical) throw;
            spdlog::error("{}", e.what());
            s.params = to_param_map(ref);
            s.objective = -std::numeric_limits<double>::infinity();
            s.converged = false;
            code = kNumerical;
        }
    }
    const fs::path out = o.out.empty() ? fs::path(o.inputs[0]).replace_extension(".fit.json") : fs::path(o.out);
    write_file(out, snapshot_json(s));
    spdlog::info("{}: objective {:.6f} converged {} -> {}", framework_name(fw), s.objective, s.converged, out.string());
    return code;
}

// ---------------------------------------------------------------- predict

int cmd_predict(const Options& o) {
    if (o.inputs.size() != 2) fail(ErrorKind::Config, "predict needs a snapshot file and its dataset file");
    const ExperimentConfig c = load(o);
    const FitSnapshot s = parse_snapshot(read_file(o.inputs[0]), o.inputs[0]);
    if (s.config_digest != config_digest(c))
        spdlog::warn("snapshot was fitted under a different configuration");
    const Dataset d = load_dataset(o.inputs[1]);
    const Problem prob = Problem::make(d.rows, d.limits, c.priors, coupling_of(s.framework));
    PredictionRequest req;
    req.rows = prediction_rows(c.sim);
    req.scale = Scale::Original;
    PredictionResult p;
    if (s.framework == Framework::ExactGPR || s.framework == Framework::UncertainGPR) {
        const SpatialInputs x =
            s.framework == Framework::ExactGPR ? deterministic_inputs(c.sim) : measured_inputs(c.priors);
        p = gpr_predict(gpr_from_param_map(s.params), x, gpr_data(prob.observations), req);
    } else {
        p = predictive_moments(from_param_map(s.params), prob, req);
    }
    if (p.clipped > 0) spdlog::warn("{} predictive variances clipped at zero", p.clipped);
    const fs::path out = o.out.empty() ? fs::path(o.inputs[0]).replace_extension(".pred.csv") : fs::path(o.out);
    write_file(out, render([&](std::ostream& os) { write_prediction_csv(os, req.rows, p); }));
    spdlog::info("wrote {} predictions to {}", req.rows.size(), out.string());
    return kOk;
}

// ---------------------------------------------------------------- benchmark

int cmd_benchmark(const Options& o) {
    ExperimentConfig c = load(o);
    if (o.seed) c.master_seed = *o.seed;
    const fs::path out = o.out.empty() ? "out" : o.out;
    const LatentTruth truth = sample_latent_truth(c.sim, c.truth_seed);
    const PredictionTargets tg = prediction_targets(truth, c.sim);

    std::vector<std::vector<FrameworkRun>> runs(static_cast<std::size_t>(c.replicates));
    std::vector<std::string> failures;
    std::mutex mu;
    std::atomic<int> next{0};
    const int pool = std::min(worker_threads(), c.replicates);
    auto worker = [&] {
        if (pool > 1) omp_set_num_threads(1);
        for (int r; (r = next++) < c.replicates;) {
            try {
                const ReplicateInput in = draw_replicate(truth, c, r);
                runs[static_cast<std::size_t>(r)] = run_replicate(c, in, tg);
            } catch (const Error& e) {
                std::lock_guard<std::mutex> lk(mu);
                failures.push_back(fmt::format("replicate {}: {}", r, e.what()));
                spdlog::error("replicate {}: {}", r, e.what());
            }
        }
    };
    std::vector<std::thread> threads;
    for (int i = 0; i < pool; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    std::vector<ReplicateScore> scores;
    for (const auto& rr : runs)
        for (const auto& fr : rr) {
            scores.push_back(fr.score);
            if (!fr.error.empty())
                failures.push_back(fmt::format("replicate {} {}: {}", fr.score.replicate, framework_name(fr.framework), fr.error));
        }
    write_file(out / "metrics.csv", render([&](std::ostream& os) { write_metrics_csv(os, scores); }));

    std::vector<ReplicateScore> finite;
    for (const auto& s : scores)
        if (std::isfinite(s.rmse) && std::isfinite(s.mae) && std::isfinite(s.mnll)) finite.push_back(s);
    const std::set<int> keep = iqr_filter(finite);
    const auto summary = aggregate(finite, keep);
    write_file(out / "boxplot.csv", render([&](std::ostream& os) { write_boxplot_csv(os, summary); }));

    json js = {{"schema", "streamgp-summary/1"}, {"retained", std::vector<int>(keep.begin(), keep.end())}};
    json fw = json::array();
    for (const auto& f : summary) {
        fw.push_back({{"framework", framework_name(f.framework)}, {"n", f.n}, {"mean_rmse", f.mean_rmse},
                      {"mean_mae", f.mean_mae}, {"mean_mnll", f.mean_mnll}});
        spdlog::info("{:<13} n {:3d}  RMSE {:.4f}  MAE {:.4f}  MNLL {:.4f}", framework_name(f.framework), f.n,
                     f.mean_rmse, f.mean_mae, f.mean_mnll);
    }
    js["frameworks"] = fw;
    js["failures"] = failures;
    write_file(out / "summary.json", js.dump(2) + "\n");

    if (!o.skip_timing) {
        const auto rows = timing_sweep(c, truth);
        write_file(out / "timing.csv", render([&](std::ostream& os) { write_timing_csv(os, rows); }));
    }
    if (!failures.empty()) {
        spdlog::warn("{} job(s) failed; see summary.json", failures.size());
        return kPartial;
    }
    return kOk;
}

// ---------------------------------------------------------------- psi-check

int cmd_psi_check(const Options& o) {
    const auto cases = psi_check_suite(o.configs, o.samples, o.seed.value_or(12345));
    bool ok = true;
    for (const auto& c : cases) {
        fmt::print("{} {:<58} entries {:4d}  beyond 3 SE {:3d}  max |z| {:.2f}\n", c.pass() ? "PASS" : "FAIL", c.name,
                   c.entries, c.beyond_3se, c.max_z);
        ok = ok && c.pass();
    }
    return ok ? kOk : kNumerical;
}

int exit_code(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Config:
        case ErrorKind::Parameter:
        case ErrorKind::Lookup:
        case ErrorKind::Misuse: return kConfig;
        default: return kNumerical;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse variational GP models for stream-network time series"};
    app.require_subcommand(1);
    Options o;
    std::uint64_t seed = 0;
    int replicates = 0;
    std::size_t mt = 0;
    std::string level = "info";
    app.add_option("--log-level", level, "trace, debug, info, warn, error")->capture_default_str();

    auto common = [&](CLI::App* s, bool positional, const std::string& what) {
        s->add_option("--config", o.config, "experiment config (JSON)");
        s->add_option("--out", o.out, "output file or directory");
        s->add_option("--seed", seed, "seed override");
        s->add_option("--framework", o.frameworks, "ExactGPR, UncertainGPR, InBGPLVM or MOBGPLVM (repeatable)")
            ->allow_extra_args(false);
        s->add_option("--replicates", replicates, "number of replicates")->check(CLI::PositiveNumber);
        s->add_option("--mt", mt, "temporal inducing points")->check(CLI::PositiveNumber);
        if (positional) s->add_option("inputs", o.inputs, what);
    };
    auto* sim = app.add_subcommand("simulate", "generate truth and replicate datasets");
    common(sim, false, "");
    auto* fit = app.add_subcommand("fit", "fit one framework to a dataset");
    common(fit, true, "dataset CSV");
    auto* pred = app.add_subcommand("predict", "predict from a fit snapshot");
    common(pred, true, "snapshot JSON, then dataset CSV");
    auto* bench = app.add_subcommand("benchmark", "simulate, fit, predict and score every replicate");
    common(bench, false, "");
    bench->add_flag("--skip-timing", o.skip_timing, "skip the runtime sweep");
    auto* psi = app.add_subcommand("psi-check", "closed-form Psi statistics against Monte Carlo");
    psi->add_option("--seed", seed, "seed");
    psi->add_option("--samples", o.samples, "Monte Carlo samples")->capture_default_str();
    psi->add_option("--configs", o.configs, "random configurations")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_default_logger(spdlog::stderr_color_mt("streamgp"));
    spdlog::set_level(spdlog::level::from_str(level));
    for (auto* s : app.get_subcommands()) {
        auto given = [&](const char* name) {
            const auto* opt = s->get_option_no_throw(name);
            return opt && opt->count() > 0;
        };
        if (given("--seed")) o.seed = seed;
        if (given("--replicates")) o.replicates = replicates;
        if (given("--mt")) o.mt = mt;
    }
    try {
        if (std::getenv("STREAMGP_THREADS")) omp_set_num_threads(worker_threads());
        if (sim->parsed()) return cmd_simulate(o);
        if (fit->parsed()) return cmd_fit(o);
        if (pred->parsed()) return cmd_predict(o);
        if (bench->parsed()) return cmd_benchmark(o);
        if (psi->parsed()) return cmd_psi_check(o);
    } catch (const Error& e) {
        spdlog::error("{} error: {}", to_string(e.kind()), e.what());
        return exit_code(e);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kNumerical;
    }
    return kOk;
}
