#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "streamgp/io.hpp"

using namespace streamgp;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = STREAMGP_SOURCE_DIR;
const std::string kCli = STREAMGP_CLI;

fs::path scratch() {
    static const fs::path d = [] {
        fs::path p = fs::temp_directory_path() / ("streamgp_cli_" + std::to_string(::getpid()));
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return d;
}

int run(const std::string& args) {
    const std::string cmd = kCli + " --log-level warn " + args + " >" + (scratch() / "stdout.txt").string() + " 2>" +
                            (scratch() / "stderr.txt").string();
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::string smoke() { return (kSource / "configs" / "smoke.json").string(); }

std::size_t data_lines(const fs::path& p) {
    std::istringstream is(slurp(p));
    std::string line;
    std::size_t n = 0;
    std::getline(is, line);
    while (std::getline(is, line))
        if (!line.empty()) ++n;
    return n;
}

}  // namespace

TEST_CASE("simulate writes data sets, truth and a manifest, reproducibly") {
    const fs::path a = scratch() / "sim_a", b = scratch() / "sim_b";
    REQUIRE(run("simulate --config " + smoke() + " --out " + a.string()) == 0);
    REQUIRE(run("simulate --config " + smoke() + " --out " + b.string()) == 0);
    for (const char* f : {"truth.csv", "dataset_r000.csv", "manifest.json"}) {
        CHECK(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK(std::distance(fs::directory_iterator(a), fs::directory_iterator{}) == 3);
    CHECK(data_lines(a / "dataset_r000.csv") == 300);
    const std::string m = slurp(a / "manifest.json");
    CHECK(m.find("\"attempts\"") != std::string::npos);
    CHECK(m.find("\"config_digest\"") != std::string::npos);

    const fs::path c = scratch() / "sim_cs1";
    REQUIRE(run("simulate --config " + (kSource / "configs" / "cs1.json").string() + " --replicates 2 --out " + c.string()) == 0);
    for (const char* f : {"dataset_r000.csv", "dataset_r001.csv"}) {
        CHECK(data_lines(c / f) == 300);
        CHECK(slurp(c / f).find("missing") == std::string::npos);
    }
}

TEST_CASE("fit and predict") {
    const fs::path d = scratch() / "fit";
    REQUIRE(run("simulate --config " + smoke() + " --out " + d.string()) == 0);
    const std::string ds = (d / "dataset_r000.csv").string();

    // ExactGPR on a 10-row toy
    const fs::path toy = scratch() / "toy.csv";
    {
        std::ofstream os(toy);
        os << "function_id,site_id,t,value,status\n";
        for (int i = 0; i < 10; ++i) os << (i % 2 + 1) << "," << (i % 3 + 1) << "," << i << "," << 0.1 * i - 0.3 << ",obs\n";
    }
    const fs::path toy_fit = scratch() / "toy.fit.json";
    REQUIRE(run("fit --config " + smoke() + " --framework ExactGPR --out " + toy_fit.string() + " " + toy.string()) == 0);
    const FitSnapshot ts = parse_snapshot(slurp(toy_fit), "toy");
    CHECK(ts.positive_definite);
    CHECK(ts.framework == Framework::ExactGPR);

    // MOBGPLVM on a CS2 replicate
    const fs::path snap = d / "mo.fit.json";
    const int rc = run("fit --config " + smoke() + " --framework MOBGPLVM --out " + snap.string() + " " + ds);
    REQUIRE(rc == 0);
    const FitSnapshot s = parse_snapshot(slurp(snap), "mo");
    CHECK(s.censored == table7_counts());
    CHECK(s.records.size() == 1);
    const ExperimentConfig cfg = load_experiment_config(smoke());
    CHECK(s.config_digest == config_digest(cfg));
    std::ifstream is(ds);
    const Dataset data = read_dataset_csv(is, ds);
    const Problem prob = Problem::make(data.rows, data.limits, cfg.priors, Coupling::MultiOutput);
    const double b = collapsed_bound(from_param_map(s.params), prob);
    CHECK(std::abs(b - s.objective) <= 1e-10 * std::abs(b));

    const fs::path pred = d / "mo.pred.csv";
    REQUIRE(run("predict --config " + smoke() + " --out " + pred.string() + " " + snap.string() + " " + ds) == 0);
    // dense grid minus the training times, 2 functions x 3 sites
    CHECK(data_lines(pred) == 5700);
    std::ifstream ps(pred);
    const PredictionTable pt = read_prediction_csv(ps, "pred");
    CHECK(pt.result.sd.minCoeff() >= 0.0);
    CHECK(pt.result.mean_orig.minCoeff() > 0.0);

    // two frameworks at once is a usage error
    CHECK(run("fit --config " + smoke() + " --framework MOBGPLVM --framework ExactGPR " + ds) == 2);
}

TEST_CASE("benchmark") {
    const fs::path d = scratch() / "bench";
    REQUIRE(run("benchmark --config " + smoke() + " --replicates 2 --out " + d.string()) == 0);
    std::ifstream ms(d / "metrics.csv");
    const auto scores = read_metrics_csv(ms, "metrics");
    CHECK(scores.size() == 4);
    for (const auto& s : scores) CHECK(std::isfinite(s.rmse));
    CHECK(fs::exists(d / "boxplot.csv"));
    CHECK(fs::exists(d / "summary.json"));
    std::istringstream ts(slurp(d / "timing.csv"));
    std::string line;
    std::getline(ts, line);
    int prev = 0, rows = 0;
    while (std::getline(ts, line)) {
        const int n = std::stoi(line.substr(0, line.find(',')));
        CHECK(n >= prev);
        prev = n;
        ++rows;
    }
    CHECK(rows == 4);
    // byte-identical metrics apart from the wall time column
    const fs::path e = scratch() / "bench2";
    REQUIRE(run("benchmark --config " + smoke() + " --replicates 2 --skip-timing --out " + e.string()) == 0);
    std::ifstream ms2(e / "metrics.csv");
    const auto again = read_metrics_csv(ms2, "metrics");
    REQUIRE(again.size() == scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        CHECK(again[i].rmse == scores[i].rmse);
        CHECK(again[i].mnll == scores[i].mnll);
    }
    CHECK(slurp(e / "boxplot.csv") == slurp(d / "boxplot.csv"));
}

TEST_CASE("configuration errors exit with code 2 and a line number") {
    const fs::path bad = scratch() / "bad.json";
    {
        std::ofstream os(bad);
        os << "{\n  \"schema\": \"streamgp-experiment/1\",\n  \"replicates\": 2,\n  \"mtt\": 4\n}\n";
    }
    CHECK(run("simulate --config " + bad.string() + " --out " + (scratch() / "x").string()) == 2);
    const std::string err = slurp(scratch() / "stderr.txt");
    CHECK(err.find("bad.json:4") != std::string::npos);
    CHECK(run("fit --config " + smoke() + " --framework MOBGPLVM " + (scratch() / "none.csv").string()) == 2);
    CHECK(run("fit --config " + smoke() + " --framework Nope x.csv") == 2);
    CHECK(run("frobnicate") != 0);
}

TEST_CASE("psi-check runs the closed-form suite") {
    const int rc = run("psi-check --samples 20000 --configs 2 --seed 3");
    CHECK((rc == 0 || rc == 3));
    const std::string out = slurp(scratch() / "stdout.txt");
    CHECK(out.find("worked") != std::string::npos);
}
