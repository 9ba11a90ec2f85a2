#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "streamgp/common.hpp"

namespace streamgp {

enum class Framework { ExactGPR, UncertainGPR, InBGPLVM, MOBGPLVM };
const char* framework_name(Framework f);
Framework parse_framework(const std::string& s);
inline constexpr std::array<Framework, 4> kAllFrameworks{Framework::ExactGPR, Framework::UncertainGPR,
                                                         Framework::InBGPLVM, Framework::MOBGPLVM};

// Per-function vectors; metrics average within each function, then across functions.
using PerFunction = std::vector<Vec>;

double rmse(const PerFunction& truth, const PerFunction& mean);
double mae(const PerFunction& truth, const PerFunction& mean);
double mnll(const PerFunction& truth, const PerFunction& mean, const PerFunction& sd);

struct ReplicateScore {
    int replicate = 0;
    Framework framework = Framework::MOBGPLVM;
    double rmse = 0.0;
    double mae = 0.0;
    double mnll = 0.0;
    bool converged = false;
    double wall_time_s = 0.0;
};

// Tukey fences on type-7 quartiles, applied jointly: a replicate flagged by any
// metric of any framework is dropped from every framework.
std::set<int> iqr_filter(const std::vector<ReplicateScore>& scores);

struct FiveNumber {
    double min, q1, median, q3, max;
};

struct FrameworkSummary {
    Framework framework;
    int n = 0;
    double mean_rmse = 0.0, mean_mae = 0.0, mean_mnll = 0.0;
    FiveNumber rmse{}, mae{}, mnll{};
};

std::vector<FrameworkSummary> aggregate(const std::vector<ReplicateScore>& scores, const std::set<int>& keep);

}  // namespace streamgp
