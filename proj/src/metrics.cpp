#include "streamgp/metrics.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "streamgp/simulate.hpp"

namespace streamgp {

const char* framework_name(Framework f) {
    switch (f) {
        case Framework::ExactGPR: return "ExactGPR";
        case Framework::UncertainGPR: return "UncertainGPR";
        case Framework::InBGPLVM: return "InBGPLVM";
        case Framework::MOBGPLVM: return "MOBGPLVM";
    }
    return "?";
}

Framework parse_framework(const std::string& s) {
    for (Framework f : kAllFrameworks)
        if (s == framework_name(f)) return f;
    fail(ErrorKind::Config, "unknown framework '" + s + "' (expected ExactGPR, UncertainGPR, InBGPLVM or MOBGPLVM)");
}

namespace {

void check(const PerFunction& a, const PerFunction& b) {
    if (a.size() != b.size() || a.empty()) fail(ErrorKind::Domain, "metric inputs: function count mismatch");
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k].size() != b[k].size() || a[k].size() == 0)
            fail(ErrorKind::Domain, "metric inputs: length mismatch for function " + std::to_string(k + 1));
}

}  // namespace

double rmse(const PerFunction& truth, const PerFunction& mean) {
    check(truth, mean);
    double s = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) s += (truth[k] - mean[k]).squaredNorm() / truth[k].size();
    return std::sqrt(s / truth.size());
}

double mae(const PerFunction& truth, const PerFunction& mean) {
    check(truth, mean);
    double s = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) s += (truth[k] - mean[k]).cwiseAbs().sum() / truth[k].size();
    return s / truth.size();
}

double mnll(const PerFunction& truth, const PerFunction& mean, const PerFunction& sd) {
    check(truth, mean);
    check(truth, sd);
    double s = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        double f = 0.0;
        for (Eigen::Index i = 0; i < truth[k].size(); ++i) {
            const double v = sd[k][i] * sd[k][i];
            if (!(v > 0.0)) fail(ErrorKind::Domain, "mnll needs positive predictive sds");
            const double e = truth[k][i] - mean[k][i];
            f += 0.5 * std::log(2.0 * kPi * v) + e * e / (2.0 * v);
        }
        s += f / truth[k].size();
    }
    return s / truth.size();
}

std::set<int> iqr_filter(const std::vector<ReplicateScore>& scores) {
    std::set<int> all, flagged;
    for (const auto& s : scores) all.insert(s.replicate);
    std::vector<std::vector<const ReplicateScore*>> groups;
    for (Framework f : kAllFrameworks) {
        std::vector<const ReplicateScore*> rows;
        for (const auto& s : scores)
            if (s.framework == f) rows.push_back(&s);
        if (rows.empty()) continue;
        if (rows.size() < 4) {
            spdlog::warn("iqr filter: only {} scores for {}, nothing removed", rows.size(), framework_name(f));
            return all;
        }
        groups.push_back(std::move(rows));
    }
    for (const auto& rows : groups)
        for (int m = 0; m < 3; ++m) {
            auto val = [m](const ReplicateScore* r) { return m == 0 ? r->rmse : m == 1 ? r->mae : r->mnll; };
            std::vector<double> v;
            for (auto* r : rows) v.push_back(val(r));
            const double q1 = quantile_type7(v, 0.25), q3 = quantile_type7(v, 0.75);
            const double lo = q1 - 1.5 * (q3 - q1), hi = q3 + 1.5 * (q3 - q1);
            for (auto* r : rows) {
                const double x = val(r);
                if (!(x >= lo && x <= hi)) flagged.insert(r->replicate);
            }
        }
    std::set<int> keep;
    for (int r : all)
        if (!flagged.count(r)) keep.insert(r);
    return keep;
}

namespace {

FiveNumber five(const std::vector<double>& v) {
    auto s = v;
    std::sort(s.begin(), s.end());
    return {s.front(), quantile_type7(s, 0.25), quantile_type7(s, 0.5), quantile_type7(s, 0.75), s.back()};
}

}  // namespace

std::vector<FrameworkSummary> aggregate(const std::vector<ReplicateScore>& scores, const std::set<int>& keep) {
    std::vector<FrameworkSummary> out;
    for (Framework f : kAllFrameworks) {
        std::vector<double> r, a, m;
        for (const auto& s : scores)
            if (s.framework == f && keep.count(s.replicate)) {
                r.push_back(s.rmse);
                a.push_back(s.mae);
                m.push_back(s.mnll);
            }
        if (r.empty()) continue;
        FrameworkSummary fs;
        fs.framework = f;
        fs.n = static_cast<int>(r.size());
        auto mean = [](const std::vector<double>& v) {
            double t = 0;
            for (double x : v) t += x;
            return t / v.size();
        };
        fs.mean_rmse = mean(r);
        fs.mean_mae = mean(a);
        fs.mean_mnll = mean(m);
        fs.rmse = five(r);
        fs.mae = five(a);
        fs.mnll = five(m);
        out.push_back(fs);
    }
    return out;
}

}  // namespace streamgp
