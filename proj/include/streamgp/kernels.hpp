#pragma once

#include <Eigen/Cholesky>
#include <array>
#include <vector>

#include "streamgp/common.hpp"
#include "streamgp/network.hpp"

namespace streamgp {

// Exponential spatial g(x) = nu_s/l_s^2 exp(-x/(2 l_s^2)) and exponentiated
// quadratic temporal G(t) = nu_t/l_t exp(-t^2/(2 l_t^2)) moving-average functions.
struct MovingAverageParams {
    double nu_s = 1.0;
    double l_s = 1.0;
    double nu_t = 1.0;
    double l_t = 1.0;
    void validate() const;
};

struct KernelConfig {
    std::array<MovingAverageParams, 2> latent;
    std::array<MovingAverageParams, 2> inducing;

    // Optimiser-facing form: nu_t fixed to 1 and nu_s = xi.
    static KernelConfig from_xi(const std::array<double, 2>& xi, const std::array<double, 2>& ls,
                                const std::array<double, 2>& lt, const std::array<double, 2>& xi_u,
                                const std::array<double, 2>& ls_u, const std::array<double, 2>& lt_u);
    static KernelConfig tied(const std::array<MovingAverageParams, 2>& latent);
    double xi(int a) const { return latent[a].nu_s * latent[a].nu_t; }
    double xi_inducing(int a) const { return inducing[a].nu_s * inducing[a].nu_t; }
};

// MultiOutput couples the two latent functions; Independent zeroes every
// cross-function block (K_NN, K_MM and K_NM).
enum class Coupling { MultiOutput, Independent };

// Deterministic spatial inputs: h_j = tau_j^2 and sqrt weights Phi(gamma_k).
struct SpatialInputs {
    std::array<double, 3> h{};
    std::array<double, 2> sqrt_w{};
    static SpatialInputs from_tau_gamma(const std::array<double, 3>& tau,
                                        const std::array<double, 2>& gamma);
};

// Inducing geometry: offsets h'_j of s_j' from the junction and alpha weights.
struct InducingGeometry {
    std::array<double, 3> hp{};
    std::array<double, 2> alpha{};
    std::array<double, 2> sqrt_w() const;
};

double temporal_cov(const MovingAverageParams& a, const MovingAverageParams& b, double tp, double tq);

// First argument is the kernel that carries the +d shift.
double spatial_cov_unweighted(const MovingAverageParams& shifted, const MovingAverageParams& other, double d);

// int_lo^hi g_a(x - ca) g_b(x - cb) dx for lo >= max(ca, cb); hi may be +inf.
double segment_integral(const MovingAverageParams& ga, double ca, const MovingAverageParams& gb,
                        double cb, double lo, double hi);

// Tails-up covariance by summing segment integrals over the network.
// Weights are per-segment sqrt weights indexed by segment id.
double network_spatial_cov(const StreamNetwork& net, SiteId a, const MovingAverageParams& ga,
                           const std::array<double, 4>& wa, SiteId b, const MovingAverageParams& gb,
                           const std::array<double, 4>& wb);

// Closed forms on the fixed topology; site indices 0..2 = s1..s3 (or s1'..s3').
double spatial_ff(const MovingAverageParams& pa, int sa, const MovingAverageParams& pb, int sb,
                  const SpatialInputs& x);
double spatial_uu(const MovingAverageParams& pa, int ja, const MovingAverageParams& pb, int jb,
                  const InducingGeometry& g);
double spatial_uf(const MovingAverageParams& pu, int j, const MovingAverageParams& pf, int s,
                  const SpatialInputs& x, const InducingGeometry& g);

double st_cov_ff(const KernelConfig& k, Coupling c, int a, int sa, double tp, int b, int sb, double tq,
                 const SpatialInputs& x);
double st_cov_uu(const KernelConfig& k, Coupling c, int a, int ja, double tp, int b, int jb, double tq,
                 const InducingGeometry& g);
// u_a at inducing site j and time tu against f_b at site s and time t.
double st_cov_uf(const KernelConfig& k, Coupling c, int a, int j, double tu, int b, int s, double t,
                 const SpatialInputs& x, const InducingGeometry& g);

struct Row {
    int function = 0;  // 0 or 1
    int site = 0;      // 0..2
    double t = 0.0;
};

enum class GramKind { FF, UU, UF };

struct GramInputs {
    const KernelConfig* kernels = nullptr;
    Coupling coupling = Coupling::MultiOutput;
    SpatialInputs x;
    InducingGeometry g;
};

// FF: rows x rows of f; UU: rows x rows of u; UF: K_NM with rows = f design
// rows and cols = inducing rows. cols is ignored for FF/UU.
Mat build_gram(GramKind kind, const std::vector<Row>& rows, const std::vector<Row>& cols,
               const GramInputs& in);
// Element-by-element reference used in tests and benchmarks.
Mat build_gram_serial(GramKind kind, const std::vector<Row>& rows, const std::vector<Row>& cols,
                      const GramInputs& in);

// 6x6 spatial tables indexed by function*3 + site.
using SpatialTable = Eigen::Matrix<double, 6, 6>;
SpatialTable spatial_table_ff(const KernelConfig& k, Coupling c, const SpatialInputs& x);
SpatialTable spatial_table_uu(const KernelConfig& k, Coupling c, const InducingGeometry& g);
// rows f(b,s), cols u(a,j)
SpatialTable spatial_table_fu(const KernelConfig& k, Coupling c, const SpatialInputs& x,
                              const InducingGeometry& g);

struct JitteredCholesky {
    Eigen::LLT<Mat> llt;
    double jitter = 0.0;
    double log_det() const;
};

// Adds 1e-10 * mean diagonal, escalating x10 up to 1e-6 before failing.
JitteredCholesky jittered_cholesky(const Mat& K, const char* what);

}  // namespace streamgp
