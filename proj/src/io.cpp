#include "streamgp/io.hpp"

#include <fmt/format.h>

#include <fstream>
#include <iostream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace streamgp {

using json = nlohmann::ordered_json;

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    return fmt::format("{:.17g}", v);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

[[noreturn]] void csv_fail(const std::string& source, int line, const std::string& msg) {
    fail(ErrorKind::Config, source + ":" + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& s, const std::string& source, int line) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        csv_fail(source, line, "not a number: '" + s + "'");
    }
}

int to_int(const std::string& s, const std::string& source, int line) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        csv_fail(source, line, "not an integer: '" + s + "'");
    }
}

// Reads header + rows, checking the header and the column count.
std::vector<std::pair<int, std::vector<std::string>>> read_table(std::istream& is, const std::string& source,
                                                                 const std::string& header) {
    std::string line;
    if (!std::getline(is, line)) csv_fail(source, 1, "empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) csv_fail(source, 1, "expected header '" + header + "'");
    const std::size_t ncol = split_csv(header).size();
    std::vector<std::pair<int, std::vector<std::string>>> rows;
    int n = 1;
    while (std::getline(is, line)) {
        ++n;
        if (line.empty() || line == "\r") continue;
        auto f = split_csv(line);
        if (f.size() != ncol)
            csv_fail(source, n, "expected " + std::to_string(ncol) + " fields, got " + std::to_string(f.size()));
        rows.emplace_back(n, std::move(f));
    }
    return rows;
}

void check_ids(int fn, int site, const std::string& source, int line) {
    if (fn < 1 || fn > 2) csv_fail(source, line, "function_id must be 1 or 2");
    if (site < 1 || site > 3) csv_fail(source, line, "site_id must be 1, 2 or 3");
}

}  // namespace

void write_dataset_csv(std::ostream& os, const Dataset& d) {
    os << "function_id,site_id,t,value,status\n";
    for (const auto& o : d.rows) {
        os << o.function + 1 << ',' << o.site + 1 << ',' << format_double(o.t) << ',';
        if (o.status != Status::Missing) os << format_double(o.value);
        os << ',' << status_code(o.status) << '\n';
    }
}

Dataset read_dataset_csv(std::istream& is, const std::string& source, const std::optional<CensoringLimits>& fallback) {
    Dataset d;
    std::array<std::optional<double>, 2> lq, ld;
    bool censored = false;
    for (const auto& [line, f] : read_table(is, source, "function_id,site_id,t,value,status")) {
        Observation o;
        o.function = to_int(f[0], source, line) - 1;
        o.site = to_int(f[1], source, line) - 1;
        check_ids(o.function + 1, o.site + 1, source, line);
        o.t = to_double(f[2], source, line);
        try {
            o.status = parse_status(f[4]);
        } catch (const Error& e) {
            csv_fail(source, line, e.what());
        }
        if (o.status == Status::Missing) {
            if (!f[3].empty()) csv_fail(source, line, "missing rows must have an empty value");
            o.value = std::numeric_limits<double>::quiet_NaN();
        } else {
            o.value = to_double(f[3], source, line);
            if (!std::isfinite(o.value)) csv_fail(source, line, "value must be finite");
        }
        auto pin = [&](std::optional<double>& slot, const char* what) {
            if (slot && *slot != o.value)
                csv_fail(source, line, std::string(what) + " rows of one function must share one value");
            slot = o.value;
        };
        if (o.status == Status::BetweenLimits) pin(lq[o.function], "bql");
        if (o.status == Status::BelowDetection) pin(ld[o.function], "bdl");
        censored = censored || o.status == Status::BetweenLimits || o.status == Status::BelowDetection;
        d.rows.push_back(o);
    }
    if (censored || fallback) {
        CensoringLimits lim;
        for (int a = 0; a < 2; ++a) {
            if (!lq[a] && fallback) lq[a] = fallback->lq[a];
            if (!ld[a] && fallback) ld[a] = fallback->ld[a];
            const bool any = std::any_of(d.rows.begin(), d.rows.end(), [&](const Observation& o) {
                return o.function == a && (o.status == Status::BetweenLimits || o.status == Status::BelowDetection);
            });
            if (any && (!lq[a] || !ld[a]))
                fail(ErrorKind::Config, source + ": censoring limits of function " + std::to_string(a + 1) +
                                            " are not determined by the rows; supply them in the manifest");
            lim.lq[a] = lq[a].value_or(ld[a] ? *ld[a] + 1.0 : 1.0);
            lim.ld[a] = ld[a].value_or(lim.lq[a] - 1.0);
        }
        lim.validate();
        d.limits = lim;
    }
    return d;
}

void write_truth_csv(std::ostream& os, const LatentTruth& truth) {
    os << "function_id,site_id,t,value\n";
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s)
            for (Eigen::Index i = 0; i < truth.t.size(); ++i)
                os << a + 1 << ',' << s + 1 << ',' << format_double(truth.t[i]) << ','
                   << format_double(truth.f[a][s][i]) << '\n';
}

void write_prediction_csv(std::ostream& os, const std::vector<Row>& rows, const PredictionResult& p) {
    os << "function_id,site_id,t,mean_log,sd_log,mean_orig,sd_orig\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double mo = 0, so = 0;
        if (p.mean_orig.size() == static_cast<Eigen::Index>(rows.size())) {
            mo = p.mean_orig[i];
            so = p.sd_orig[i];
        } else {
            std::tie(mo, so) = to_original_scale(p.mean[i], p.sd[i]);
        }
        os << rows[i].function + 1 << ',' << rows[i].site + 1 << ',' << format_double(rows[i].t) << ','
           << format_double(p.mean[i]) << ',' << format_double(p.sd[i]) << ',' << format_double(mo) << ','
           << format_double(so) << '\n';
    }
}

PredictionTable read_prediction_csv(std::istream& is, const std::string& source) {
    const auto rows = read_table(is, source, "function_id,site_id,t,mean_log,sd_log,mean_orig,sd_orig");
    PredictionTable t;
    const auto n = static_cast<Eigen::Index>(rows.size());
    t.result.mean.resize(n);
    t.result.sd.resize(n);
    t.result.mean_orig.resize(n);
    t.result.sd_orig.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& [line, f] = rows[static_cast<std::size_t>(i)];
        Row r{to_int(f[0], source, line) - 1, to_int(f[1], source, line) - 1, to_double(f[2], source, line)};
        check_ids(r.function + 1, r.site + 1, source, line);
        t.rows.push_back(r);
        t.result.mean[i] = to_double(f[3], source, line);
        t.result.sd[i] = to_double(f[4], source, line);
        t.result.mean_orig[i] = to_double(f[5], source, line);
        t.result.sd_orig[i] = to_double(f[6], source, line);
    }
    return t;
}

void write_metrics_csv(std::ostream& os, const std::vector<ReplicateScore>& s) {
    os << "replicate,framework,rmse,mae,mnll,converged,wall_time_s\n";
    for (const auto& r : s)
        os << r.replicate << ',' << framework_name(r.framework) << ',' << format_double(r.rmse) << ','
           << format_double(r.mae) << ',' << format_double(r.mnll) << ',' << (r.converged ? "true" : "false") << ','
           << format_double(r.wall_time_s) << '\n';
}

std::vector<ReplicateScore> read_metrics_csv(std::istream& is, const std::string& source) {
    std::vector<ReplicateScore> out;
    for (const auto& [line, f] : read_table(is, source, "replicate,framework,rmse,mae,mnll,converged,wall_time_s")) {
        ReplicateScore r;
        r.replicate = to_int(f[0], source, line);
        try {
            r.framework = parse_framework(f[1]);
        } catch (const Error& e) {
            csv_fail(source, line, e.what());
        }
        r.rmse = to_double(f[2], source, line);
        r.mae = to_double(f[3], source, line);
        r.mnll = to_double(f[4], source, line);
        if (f[5] != "true" && f[5] != "false") csv_fail(source, line, "converged must be true or false");
        r.converged = f[5] == "true";
        r.wall_time_s = to_double(f[6], source, line);
        out.push_back(r);
    }
    return out;
}

void write_boxplot_csv(std::ostream& os, const std::vector<FrameworkSummary>& s) {
    os << "framework,metric,n,mean,min,q1,median,q3,max\n";
    for (const auto& f : s) {
        const std::pair<const char*, std::pair<double, FiveNumber>> m[3] = {
            {"rmse", {f.mean_rmse, f.rmse}}, {"mae", {f.mean_mae, f.mae}}, {"mnll", {f.mean_mnll, f.mnll}}};
        for (const auto& [name, v] : m)
            os << framework_name(f.framework) << ',' << name << ',' << f.n << ',' << format_double(v.first) << ','
               << format_double(v.second.min) << ',' << format_double(v.second.q1) << ','
               << format_double(v.second.median) << ',' << format_double(v.second.q3) << ','
               << format_double(v.second.max) << '\n';
    }
}

void write_timing_csv(std::ostream& os, const std::vector<TimingRow>& rows) {
    os << "N,framework,seconds_per_eval,n_params,seconds_per_iteration\n";
    for (const auto& r : rows)
        os << r.n_t << ',' << framework_name(r.framework) << ',' << format_double(r.seconds_per_eval) << ','
           << r.n_params << ',' << format_double(r.seconds_per_iteration()) << '\n';
}

// ---------------------------------------------------------------- config

namespace {

struct ConfigReader {
    const std::string& text;
    const std::string& source;

    int line_of(const std::string& key) const {
        const std::string needle = "\"" + key + "\"";
        std::size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            std::size_t k = pos + needle.size();
            while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
            if (k < text.size() && text[k] == ':') return 1 + static_cast<int>(std::count(text.begin(), text.begin() + pos, '\n'));
            pos += needle.size();
        }
        return 0;
    }

    [[noreturn]] void error(const std::string& key, const std::string& msg) const {
        const int l = line_of(key);
        fail(ErrorKind::Config, source + (l > 0 ? ":" + std::to_string(l) : "") + ": " + msg);
    }

    void allow(const json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
        if (!obj.is_object()) error(path, "'" + path + "' must be an object");
        std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = obj.begin(); it != obj.end(); ++it)
            if (!ok.count(it.key())) error(it.key(), "unknown key '" + it.key() + "' in " + path);
    }

    template <class T>
    void get(const json& obj, const char* key, T& out) const {
        if (!obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception& e) {
            error(key, std::string("key '") + key + "': " + e.what());
        }
    }

    double positive(const json& obj, const char* key, double v) const {
        get(obj, key, v);
        if (!(v > 0.0) || !std::isfinite(v)) error(key, std::string("key '") + key + "' must be positive");
        return v;
    }
};

void read_optimizer(const ConfigReader& r, const json& j, const std::string& name, OptimizerConfig& c) {
    r.allow(j, name,
            {"n_starts", "max_iterations", "h_fd", "tol_bound", "tol_step", "tol_constraint", "seed", "lbfgs_memory",
             "al_max_outer", "al_rho0", "zeta_every"});
    r.get(j, "n_starts", c.n_starts);
    r.get(j, "max_iterations", c.max_iterations);
    r.get(j, "h_fd", c.h_fd);
    r.get(j, "tol_bound", c.tol_bound);
    r.get(j, "tol_step", c.tol_step);
    r.get(j, "tol_constraint", c.tol_constraint);
    r.get(j, "seed", c.seed);
    r.get(j, "lbfgs_memory", c.lbfgs_memory);
    r.get(j, "al_max_outer", c.al_max_outer);
    r.get(j, "al_rho0", c.al_rho0);
    r.get(j, "zeta_every", c.zeta_every);
    try {
        c.validate();
    } catch (const Error& e) {
        r.error(name, name + ": " + e.what());
    }
}

json optimizer_json(const OptimizerConfig& c) {
    return json{{"n_starts", c.n_starts},         {"max_iterations", c.max_iterations}, {"h_fd", c.h_fd},
                {"tol_bound", c.tol_bound},       {"tol_step", c.tol_step},             {"tol_constraint", c.tol_constraint},
                {"seed", c.seed},                 {"lbfgs_memory", c.lbfgs_memory},     {"al_max_outer", c.al_max_outer},
                {"al_rho0", c.al_rho0},           {"zeta_every", c.zeta_every}};
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // byte offset -> line
        const std::size_t off = std::min<std::size_t>(e.byte, text.size());
        const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + off, '\n'));
        fail(ErrorKind::Config, source + ":" + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
    }
    const ConfigReader r{text, source};
    r.allow(j, "config",
            {"schema", "case_study", "replicates", "mt", "frameworks", "seeds", "network", "kernels", "simulation",
             "optimizer", "timing"});
    if (!j.contains("schema") || !j["schema"].is_string() || j["schema"] != "streamgp-experiment/1")
        r.error("schema", "'schema' must be \"streamgp-experiment/1\"");

    ExperimentConfig c;
    if (j.contains("case_study")) {
        std::string cs;
        r.get(j, "case_study", cs);
        if (cs == "CS1") c.case_study = CaseStudy::CS1;
        else if (cs == "CS2") c.case_study = CaseStudy::CS2;
        else r.error("case_study", "case_study must be \"CS1\" or \"CS2\"");
    }
    r.get(j, "replicates", c.replicates);
    r.get(j, "mt", c.mt);
    if (j.contains("frameworks")) {
        std::vector<std::string> names;
        r.get(j, "frameworks", names);
        c.frameworks.clear();
        for (const auto& n : names) {
            try {
                c.frameworks.push_back(parse_framework(n));
            } catch (const Error& e) {
                r.error("frameworks", e.what());
            }
        }
    }
    if (j.contains("seeds")) {
        const auto& s = j["seeds"];
        r.allow(s, "seeds", {"truth", "master"});
        r.get(s, "truth", c.truth_seed);
        r.get(s, "master", c.master_seed);
    }
    if (j.contains("network")) {
        const auto& n = j["network"];
        r.allow(n, "network", {"tau", "gamma", "d_tau", "d_gamma", "sd_gamma", "eta_mean", "eta_sd"});
        r.get(n, "tau", c.sim.tau);
        r.get(n, "gamma", c.sim.gamma);
        r.get(n, "d_tau", c.priors.d_tau);
        r.get(n, "d_gamma", c.priors.d_gamma);
        c.priors.sd_gamma = r.positive(n, "sd_gamma", c.priors.sd_gamma);
        r.get(n, "eta_mean", c.priors.eta_mean);
        c.priors.eta_sd = r.positive(n, "eta_sd", c.priors.eta_sd);
    }
    if (j.contains("kernels")) {
        const auto& k = j["kernels"];
        if (!k.is_array() || k.size() != 2) r.error("kernels", "'kernels' must be an array of two objects");
        for (int a = 0; a < 2; ++a) {
            const auto& e = k[static_cast<std::size_t>(a)];
            r.allow(e, "kernels[" + std::to_string(a) + "]", {"nu_s", "l_s", "nu_t", "l_t"});
            auto& m = c.sim.kernels[static_cast<std::size_t>(a)];
            m.nu_s = r.positive(e, "nu_s", m.nu_s);
            m.l_s = r.positive(e, "l_s", m.l_s);
            m.nu_t = r.positive(e, "nu_t", m.nu_t);
            m.l_t = r.positive(e, "l_t", m.l_t);
        }
    }
    if (j.contains("simulation")) {
        const auto& s = j["simulation"];
        r.allow(s, "simulation",
                {"noise_sd", "grid_points", "t_min", "t_max", "subsample", "censor_pct", "counts", "counts_mode",
                 "max_redraws"});
        r.get(s, "noise_sd", c.sim.noise_sd);
        r.get(s, "grid_points", c.sim.grid_points);
        r.get(s, "t_min", c.sim.t_min);
        r.get(s, "t_max", c.sim.t_max);
        r.get(s, "subsample", c.sim.subsample);
        r.get(s, "censor_pct", c.sim.censor_pct);
        r.get(s, "counts", c.sim.counts);
        r.get(s, "max_redraws", c.max_redraws);
        if (s.contains("counts_mode")) {
            std::string m;
            r.get(s, "counts_mode", m);
            if (m == "remaining") c.sim.counts_mode = CountsMode::Remaining;
            else if (m == "removed") c.sim.counts_mode = CountsMode::Removed;
            else r.error("counts_mode", "counts_mode must be \"remaining\" or \"removed\"");
        }
    }
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        r.allow(o, "optimizer", {"bgp", "gpr"});
        if (o.contains("bgp")) read_optimizer(r, o["bgp"], "bgp", c.bgp);
        if (o.contains("gpr")) read_optimizer(r, o["gpr"], "gpr", c.gpr);
    }
    if (j.contains("timing")) {
        const auto& t = j["timing"];
        r.allow(t, "timing", {"n_t", "min_seconds"});
        r.get(t, "n_t", c.timing_nt);
        r.get(t, "min_seconds", c.timing_min_seconds);
    }
    try {
        c.validate();
    } catch (const Error& e) {
        fail(ErrorKind::Config, source + ": " + e.what());
    }
    return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Config, "cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_experiment_config(ss.str(), path);
}

std::string experiment_config_json(const ExperimentConfig& c) {
    json j;
    j["schema"] = "streamgp-experiment/1";
    j["case_study"] = c.case_study == CaseStudy::CS1 ? "CS1" : "CS2";
    j["replicates"] = c.replicates;
    j["mt"] = c.mt;
    json fw = json::array();
    for (Framework f : c.frameworks) fw.push_back(framework_name(f));
    j["frameworks"] = fw;
    j["seeds"] = {{"truth", c.truth_seed}, {"master", c.master_seed}};
    j["network"] = {{"tau", c.sim.tau},           {"gamma", c.sim.gamma},       {"d_tau", c.priors.d_tau},
                    {"d_gamma", c.priors.d_gamma}, {"sd_gamma", c.priors.sd_gamma}, {"eta_mean", c.priors.eta_mean},
                    {"eta_sd", c.priors.eta_sd}};
    json k = json::array();
    for (const auto& m : c.sim.kernels) k.push_back({{"nu_s", m.nu_s}, {"l_s", m.l_s}, {"nu_t", m.nu_t}, {"l_t", m.l_t}});
    j["kernels"] = k;
    j["simulation"] = {{"noise_sd", c.sim.noise_sd},
                       {"grid_points", c.sim.grid_points},
                       {"t_min", c.sim.t_min},
                       {"t_max", c.sim.t_max},
                       {"subsample", c.sim.subsample},
                       {"censor_pct", c.sim.censor_pct},
                       {"counts", c.sim.counts},
                       {"counts_mode", c.sim.counts_mode == CountsMode::Remaining ? "remaining" : "removed"},
                       {"max_redraws", c.max_redraws}};
    j["optimizer"] = {{"bgp", optimizer_json(c.bgp)}, {"gpr", optimizer_json(c.gpr)}};
    j["timing"] = {{"n_t", c.timing_nt}, {"min_seconds", c.timing_min_seconds}};
    return j.dump(2) + "\n";
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t config_digest(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.frameworks = {Framework::MOBGPLVM};
    c.replicates = 1;
    return fnv1a(experiment_config_json(c));
}

// ---------------------------------------------------------------- params

std::map<std::string, double> to_param_map(const ModelParams& p) {
    std::map<std::string, double> m;
    const char* kinds[2] = {"latent", "inducing"};
    for (int k = 0; k < 2; ++k)
        for (int a = 0; a < 2; ++a) {
            const auto& g = k == 0 ? p.kernels.latent[a] : p.kernels.inducing[a];
            const std::string pre = fmt::format("{}{}.", kinds[k], a + 1);
            m[pre + "nu_s"] = g.nu_s;
            m[pre + "l_s"] = g.l_s;
            m[pre + "nu_t"] = g.nu_t;
            m[pre + "l_t"] = g.l_t;
        }
    for (int j = 0; j < 3; ++j) {
        m[fmt::format("mu_tau{}", j + 1)] = p.q.mu_tau[j];
        m[fmt::format("sd_tau{}", j + 1)] = p.q.sd_tau[j];
        m[fmt::format("hp{}", j + 1)] = p.geo.hp[j];
    }
    for (int k = 0; k < 2; ++k) {
        m[fmt::format("mu_gamma{}", k + 2)] = p.q.mu_gamma[k];
        m[fmt::format("sd_gamma{}", k + 2)] = p.q.sd_gamma[k];
        m[fmt::format("alpha{}", k + 2)] = p.geo.alpha[k];
    }
    m["mu_eta"] = p.q.mu_eta;
    m["sd_eta"] = p.q.sd_eta;
    for (int a = 0; a < 2; ++a) {
        m[fmt::format("sigma{}", a + 1)] = p.sigma[a];
        m[fmt::format("sigma2_qd{}", a + 1)] = p.local.sigma2_qd[a];
        m[fmt::format("sigma2_d{}", a + 1)] = p.local.sigma2_d[a];
    }
    for (std::size_t i = 0; i < p.t_inducing.size(); ++i) m[fmt::format("t_u{:04d}", i + 1)] = p.t_inducing[i];
    for (Eigen::Index i = 0; i < p.local.zeta.size(); ++i) m[fmt::format("zeta{:05d}", i + 1)] = p.local.zeta[i];
    return m;
}

namespace {

double need(const std::map<std::string, double>& m, const std::string& k) {
    auto it = m.find(k);
    if (it == m.end()) fail(ErrorKind::Config, "snapshot: missing parameter '" + k + "'");
    return it->second;
}

}  // namespace

ModelParams from_param_map(const std::map<std::string, double>& m) {
    ModelParams p;
    const char* kinds[2] = {"latent", "inducing"};
    for (int k = 0; k < 2; ++k)
        for (int a = 0; a < 2; ++a) {
            auto& g = k == 0 ? p.kernels.latent[a] : p.kernels.inducing[a];
            const std::string pre = fmt::format("{}{}.", kinds[k], a + 1);
            g.nu_s = need(m, pre + "nu_s");
            g.l_s = need(m, pre + "l_s");
            g.nu_t = need(m, pre + "nu_t");
            g.l_t = need(m, pre + "l_t");
        }
    for (int j = 0; j < 3; ++j) {
        p.q.mu_tau[j] = need(m, fmt::format("mu_tau{}", j + 1));
        p.q.sd_tau[j] = need(m, fmt::format("sd_tau{}", j + 1));
        p.geo.hp[j] = need(m, fmt::format("hp{}", j + 1));
    }
    for (int k = 0; k < 2; ++k) {
        p.q.mu_gamma[k] = need(m, fmt::format("mu_gamma{}", k + 2));
        p.q.sd_gamma[k] = need(m, fmt::format("sd_gamma{}", k + 2));
        p.geo.alpha[k] = need(m, fmt::format("alpha{}", k + 2));
    }
    p.q.mu_eta = need(m, "mu_eta");
    p.q.sd_eta = need(m, "sd_eta");
    for (int a = 0; a < 2; ++a) {
        p.sigma[a] = need(m, fmt::format("sigma{}", a + 1));
        p.local.sigma2_qd[a] = need(m, fmt::format("sigma2_qd{}", a + 1));
        p.local.sigma2_d[a] = need(m, fmt::format("sigma2_d{}", a + 1));
    }
    std::vector<double> z;
    for (const auto& [k, v] : m) {
        if (k.rfind("t_u", 0) == 0) p.t_inducing.push_back(v);  // keys sort in index order
        if (k.rfind("zeta", 0) == 0) z.push_back(v);
    }
    p.local.zeta = Eigen::Map<Vec>(z.data(), static_cast<Eigen::Index>(z.size()));
    return p;
}

std::map<std::string, double> to_param_map(const GprParams& p) {
    std::map<std::string, double> m;
    for (int a = 0; a < 2; ++a) {
        m[fmt::format("xi{}", a + 1)] = p.xi[a];
        m[fmt::format("l_s{}", a + 1)] = p.l_s[a];
        m[fmt::format("l_t{}", a + 1)] = p.l_t[a];
        m[fmt::format("sigma{}", a + 1)] = p.sigma[a];
    }
    return m;
}

GprParams gpr_from_param_map(const std::map<std::string, double>& m) {
    GprParams p;
    for (int a = 0; a < 2; ++a) {
        p.xi[a] = need(m, fmt::format("xi{}", a + 1));
        p.l_s[a] = need(m, fmt::format("l_s{}", a + 1));
        p.l_t[a] = need(m, fmt::format("l_t{}", a + 1));
        p.sigma[a] = need(m, fmt::format("sigma{}", a + 1));
    }
    return p;
}

// ---------------------------------------------------------------- snapshot

namespace {

// JSON numbers cannot be non-finite; those are stored as strings.
json num(double v) {
    if (std::isfinite(v)) return v;
    return std::isnan(v) ? "nan" : v > 0 ? "inf" : "-inf";
}

double denum(const json& j) {
    if (j.is_number()) return j.get<double>();
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    fail(ErrorKind::Config, "snapshot: bad number '" + s + "'");
}

}  // namespace

std::string snapshot_json(const FitSnapshot& s) {
    json j;
    j["schema"] = "streamgp-snapshot/1";
    j["framework"] = framework_name(s.framework);
    json p = json::object();
    for (const auto& [k, v] : s.params) p[k] = num(v);
    j["params"] = p;
    j["objective"] = num(s.objective);
    json c = json::object();
    for (const auto& [k, v] : s.constraints) c[k] = num(v);
    j["constraints"] = c;
    j["config_digest"] = fmt::format("{:016x}", s.config_digest);
    j["seed"] = s.seed;
    j["converged"] = s.converged;
    j["positive_definite"] = s.positive_definite;
    json cells = json::array();
    const char* kinds[3] = {"obs", "bql", "bdl"};
    for (int a = 0; a < 2; ++a)
        for (int st = 0; st < 3; ++st) {
            json e = {{"function_id", a + 1}, {"site_id", st + 1}};
            for (int k = 0; k < 3; ++k) e[kinds[k]] = s.censored[a][st][k];
            cells.push_back(e);
        }
    j["cells"] = cells;
    json rec = json::array();
    for (const auto& r : s.records)
        rec.push_back({{"start", r.start},
                       {"converged", r.converged},
                       {"feasible", r.feasible},
                       {"iterations", r.iterations},
                       {"wall_time_s", num(r.wall_time_s)},
                       {"objective", num(r.objective)},
                       {"message", r.message}});
    j["starts"] = rec;
    return j.dump(2) + "\n";
}

FitSnapshot parse_snapshot(const std::string& text, const std::string& source) {
    FitSnapshot s;
    try {
        const json j = json::parse(text);
        if (j.value("schema", "") != "streamgp-snapshot/1")
            fail(ErrorKind::Config, source + ": not a streamgp-snapshot/1 file");
        s.framework = parse_framework(j.at("framework").get<std::string>());
        for (auto it = j.at("params").begin(); it != j.at("params").end(); ++it) s.params[it.key()] = denum(it.value());
        s.objective = denum(j.at("objective"));
        for (auto it = j.at("constraints").begin(); it != j.at("constraints").end(); ++it)
            s.constraints[it.key()] = denum(it.value());
        s.config_digest = std::stoull(j.at("config_digest").get<std::string>(), nullptr, 16);
        s.seed = j.at("seed").get<std::uint64_t>();
        s.converged = j.at("converged").get<bool>();
        s.positive_definite = j.at("positive_definite").get<bool>();
        const char* kinds[3] = {"obs", "bql", "bdl"};
        for (const auto& e : j.at("cells")) {
            const int a = e.at("function_id").get<int>() - 1, st = e.at("site_id").get<int>() - 1;
            if (a < 0 || a > 1 || st < 0 || st > 2) fail(ErrorKind::Config, source + ": bad cell ids");
            for (int k = 0; k < 3; ++k) s.censored[a][st][k] = e.at(kinds[k]).get<int>();
        }
        for (const auto& e : j.at("starts")) {
            StartRecord r;
            r.start = e.at("start").get<int>();
            r.converged = e.at("converged").get<bool>();
            r.feasible = e.at("feasible").get<bool>();
            r.iterations = e.at("iterations").get<int>();
            r.wall_time_s = denum(e.at("wall_time_s"));
            r.objective = denum(e.at("objective"));
            r.message = e.at("message").get<std::string>();
            s.records.push_back(r);
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, source + ": malformed snapshot (" + e.what() + ")");
    }
    return s;
}

}  // namespace streamgp
