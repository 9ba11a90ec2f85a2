#pragma once

#include <array>
#include <optional>
#include <vector>

#include "streamgp/common.hpp"
#include "streamgp/kernels.hpp"

namespace streamgp {

enum class Status { Observed, BetweenLimits, BelowDetection, Missing };

const char* status_code(Status s);        // obs / bql / bdl / missing
Status parse_status(const std::string& s);

struct Observation {
    int function = 0;
    int site = 0;
    double t = 0.0;
    double value = 0.0;  // log scale; ignored for Missing
    Status status = Status::Observed;
};

struct CensoringLimits {
    std::array<double, 2> lq{};
    std::array<double, 2> ld{};
    void validate() const;
};

struct LocalBoundState {
    Vec zeta;  // one per censored row, in pseudo-data order (qd f1, qd f2, d f1, d f2)
    std::array<double, 2> sigma2_qd{};
    std::array<double, 2> sigma2_d{};
};

// g(f) = [-f^2/2 + b (f - d) + c] / s2 is a global lower bound on the log
// censored-term probability, tangent at zeta.
struct LocalBoundCoeffs {
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    double s2 = 1.0;
    double value(double f) const { return (-0.5 * f * f + b * (f - d) + c) / s2; }
};

LocalBoundCoeffs local_bound_coeffs(Status status, double zeta, double lq, double ld, double sigma2,
                                    double sigma2_het, bool verify_grid = true);

// log P(censored outcome | f) with total variance s2.
double censored_log_term(Status status, double f, double lq, double ld, double s2);

// Rows sorted by (function, site, time); missing rows dropped.
std::vector<Observation> canonicalize(std::vector<Observation> obs);

struct PseudoData {
    std::vector<Row> rows;           // in y_l order
    std::vector<Status> status;      // per row
    std::vector<std::size_t> source; // index into the canonical observation list
    Vec y_l;
    Vec sigma2_l;                    // diagonal of Sigma_l
    std::size_t n_uncensored = 0;    // leading block of rows
    Vec b, c, d, ones, sigma2_c;     // censored blocks
    std::array<int, 2> n_observed{};
    std::array<int, 2> n_qd{};
    std::array<int, 2> n_d{};
    std::size_t n_censored() const { return rows.size() - n_uncensored; }
};

// Initial tangency points for every censored row of canonical observations.
Vec initial_zeta(const std::vector<Observation>& canonical, const CensoringLimits& lim,
                 const std::array<double, 2>& sigma);

std::size_t count_censored(const std::vector<Observation>& obs);

PseudoData assemble_pseudo_data(const std::vector<Observation>& observations,
                                const std::optional<CensoringLimits>& limits, const LocalBoundState& state,
                                const std::array<double, 2>& sigma2, bool verify_grid = true);

// Exact mixed log-likelihood; f aligned with canonicalize(observations).
double exact_censored_loglik(const Vec& f, const std::vector<Observation>& observations,
                             const std::optional<CensoringLimits>& limits, const std::array<double, 2>& sigma2,
                             const std::array<double, 2>& sigma2_qd = {0.0, 0.0},
                             const std::array<double, 2>& sigma2_d = {0.0, 0.0});

}  // namespace streamgp
