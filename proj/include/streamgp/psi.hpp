#pragma once

#include <cstdint>
#include <vector>

#include "streamgp/kernels.hpp"
#include "streamgp/latent.hpp"

namespace streamgp {

// coef * exp(offset - kappa * tau_site^2) * Phi(gamma_2)^p2 * Phi(gamma_3)^p3
struct Monomial {
    double coef = 0.0;
    double kappa = 0.0;
    double offset = 0.0;
    int site = 0;
    int p2 = 0;
    int p3 = 0;
};
using Poly = std::vector<Monomial>;

// Spatial u_a(s_j') x f_b(s) covariance as a polynomial in the uncertain inputs.
Poly uf_poly(const MovingAverageParams& pu, int j, const MovingAverageParams& pf, int s,
             const InducingGeometry& g);
// Spatial variance of f_b(s); keeps the Phi^2 weight terms explicit.
Poly ff_diag_poly(const MovingAverageParams& pf, int s);

double eval_poly(const Poly& p, const SpatialInputs& x);

// Moments of the variational posterior that the polynomials need.
struct InputMoments {
    VariationalPosterior q;
    std::array<double, 2> phi1{};  // E[Phi(gamma_k)]
    std::array<double, 2> phi2{};  // E[Phi^2(gamma_k)]
    explicit InputMoments(const VariationalPosterior& q);
    double phi_power(int k, int p) const;
};

double expect_poly(const Poly& p, const InputMoments& m);
double expect_poly_product(const Poly& a, const Poly& b, const InputMoments& m);

// Expected spatial blocks, indexed like the kernels module's 6x6 tables.
struct ExpectedSpatial {
    SpatialTable e1;                   // rows f(b,s), cols u(a,j)
    std::array<SpatialTable, 6> e2;    // per f group (b,s): E[S(.,m) S(.,m')]
    std::array<double, 6> e0{};        // E[spatial variance of f(b,s)]
};

ExpectedSpatial expected_spatial(const KernelConfig& k, Coupling c, const VariationalPosterior& q,
                                 const InducingGeometry& g);

struct PsiStatistics {
    double psi0 = 0.0;  // tr{E[K_NN] Sigma^-1}
    Mat Psi1;           // E[K_NM]
    Mat Psi2;           // E[K_MN Sigma^-1 K_NM]
};

struct PsiRequest {
    const KernelConfig* kernels = nullptr;
    Coupling coupling = Coupling::MultiOutput;
    VariationalPosterior q;
    InducingGeometry g;
    std::vector<Row> rows;      // data rows
    Vec weights;                // Sigma_l^-1 diagonal, one per row
    std::vector<Row> inducing;  // inducing rows
};

Mat psi1_closed(const PsiRequest& r);
Mat psi2_closed(const PsiRequest& r);
double psi0_closed(const PsiRequest& r);
PsiStatistics psi_closed(const PsiRequest& r);
// Direct O(N M^2) summation, kept as a reference for tests and benchmarks.
PsiStatistics psi_closed_serial(const PsiRequest& r);

// Psi2 = F F^T with at most six columns per distinct (function, time) data
// key. The bound whitens F rather than Psi2 itself, which keeps the trace and
// log-determinant terms accurate when K_MM is badly conditioned.
struct PsiFactored {
    double psi0 = 0.0;
    Mat Psi1;
    Mat F;
};
PsiFactored psi_factored(const PsiRequest& r);

// Prediction-point variants: for each row, E[k*], E[k* k*^T] and E[k**].
struct PredictivePsi {
    Mat Psi1;             // N* x M
    std::vector<Mat> F;   // per row, Psi2* = F F^T (M x <=6)
    Vec psi0;             // per row
    Mat psi2(std::size_t i) const { return F[i] * F[i].transpose(); }
};
PredictivePsi psi_predictive(const PsiRequest& r);

struct PsiMonteCarlo {
    PsiStatistics mean;
    double psi0_se = 0.0;
    Mat Psi1_se;
    Mat Psi2_se;
};

PsiMonteCarlo psi_mc_oracle(const PsiRequest& r, std::int64_t samples, std::uint64_t seed);

}  // namespace streamgp
