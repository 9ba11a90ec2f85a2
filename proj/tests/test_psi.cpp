#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "streamgp/checks.hpp"
#include "streamgp/psi.hpp"

using namespace streamgp;

namespace {

struct Fixture {
    PsiCase c;
    explicit Fixture(std::uint64_t seed, int index = 1) {
        std::mt19937_64 rng(seed);
        c = random_psi_case(rng, index);
        c.request.kernels = &c.kernels;
    }
    PsiRequest req() const {
        PsiRequest r = c.request;
        r.kernels = &c.kernels;
        return r;
    }
};

PsiRequest with_zero_variance(PsiRequest r) {
    r.q.sd_tau = {0.0, 0.0, 0.0};
    r.q.sd_gamma = {0.0, 0.0};
    return r;
}

}  // namespace

TEST_CASE("degenerate posterior gives the deterministic blocks") {
    Fixture f(7);
    const PsiRequest r = with_zero_variance(f.req());
    const SpatialInputs x = SpatialInputs::from_tau_gamma(r.q.mu_tau, r.q.mu_gamma);
    GramInputs in{r.kernels, r.coupling, x, r.g};
    const Mat Kuf = build_gram(GramKind::UF, r.rows, r.inducing, in);
    const Mat Kff = build_gram(GramKind::FF, r.rows, {}, in);
    const PsiStatistics s = psi_closed(r);
    CHECK((s.Psi1 - Kuf).cwiseAbs().maxCoeff() < 1e-12 * Kuf.cwiseAbs().maxCoeff());
    const Mat P2 = Kuf.transpose() * r.weights.asDiagonal() * Kuf;
    CHECK((s.Psi2 - P2).cwiseAbs().maxCoeff() < 1e-11 * P2.cwiseAbs().maxCoeff());
    CHECK(s.psi0 == doctest::Approx((Kff.diagonal().array() * r.weights.array()).sum()).epsilon(1e-12));
    // Monte Carlo with a degenerate posterior is exact for any sample count
    const PsiMonteCarlo mc = psi_mc_oracle(r, 1000, 3);
    CHECK((mc.mean.Psi1 - Kuf).cwiseAbs().maxCoeff() < 1e-12 * Kuf.cwiseAbs().maxCoeff());
    CHECK(mc.Psi1_se.maxCoeff() < 1e-12);
}

TEST_CASE("worked element closed form") {
    const PsiCase c = psi_worked_element_case();
    PsiRequest r = c.request;
    r.kernels = &c.kernels;
    // Psi2 for one row and one inducing point: E over tau_1 of the squared
    // u(s1') x f(s1) covariance, with the temporal factor sqrt(pi) squared
    const double psi2 = psi2_closed(r)(0, 0);
    const double t = std::sqrt(kPi);
    const double mu = 2.0, v = 0.25, hp = 3.0;
    // unit kernels: exp(-(tau^2 - h')/2)[(1 - e^{-h'}) + w e^{-h'}]
    const auto sa = r.g.sqrt_w();
    auto integrand = [&](double z) {
        const double tau = mu + std::sqrt(v) * z;
        const double e = std::exp(-hp);
        const double acc = th::quad([&](double z2) {
            return norm_pdf(z2) * th::quad([&](double z3) {
                const double g2 = r.q.mu_gamma[0] + r.q.sd_gamma[0] * z2, g3 = r.q.mu_gamma[1] + r.q.sd_gamma[1] * z3;
                const double w = sa[0] * norm_cdf(g2) + sa[1] * norm_cdf(g3);
                const double s = std::exp(-0.5 * (tau * tau - hp)) * ((1.0 - e) + w * e);
                return norm_pdf(z3) * s * s;
            }, -12, 12);
        }, -12, 12);
        return norm_pdf(z) * acc;
    };
    const double q = th::quad(integrand, -12, 12) * t * t;
    CHECK(psi2 == doctest::Approx(q).epsilon(1e-9));
    const PsiCheckCase mc = psi_check_case(c, 200000, 5);
    CHECK(mc.pass());

    // sigma_tau -> 0: the square of the deterministic element at tau = mu
    PsiRequest d = r;
    d.q.sd_tau = {1e-8, 1e-8, 1e-8};
    d.q.sd_gamma = {1e-8, 1e-8};
    const SpatialInputs x = SpatialInputs::from_tau_gamma(d.q.mu_tau, d.q.mu_gamma);
    const double el = st_cov_uf(c.kernels, d.coupling, 0, 0, 0.0, 0, 0, 0.0, x, d.g);
    CHECK(psi2_closed(d)(0, 0) == doctest::Approx(el * el).epsilon(1e-7));
}

TEST_CASE("closed forms agree with Monte Carlo on random configurations") {
    const auto cases = psi_check_suite(6, 100000, 99);
    for (const auto& c : cases) {
        INFO(c.name, " max z ", c.max_z);
        CHECK(c.pass());
    }
}

TEST_CASE("Monte Carlo standard errors scale as 1/sqrt(S)") {
    Fixture f(21);
    const PsiRequest r = f.req();
    const PsiMonteCarlo a = psi_mc_oracle(r, 20000, 1);
    const PsiMonteCarlo b = psi_mc_oracle(r, 80000, 2);
    const double ratio = a.Psi1_se.sum() / b.Psi1_se.sum();
    CHECK(ratio == doctest::Approx(2.0).epsilon(0.2));
    CHECK(a.psi0_se / b.psi0_se == doctest::Approx(2.0).epsilon(0.2));
    // determinism under a fixed seed
    const PsiMonteCarlo c = psi_mc_oracle(r, 20000, 1);
    CHECK((a.mean.Psi2 - c.mean.Psi2).norm() == 0.0);
    CHECK_THROWS_AS(psi_mc_oracle(r, 999, 1), Error);
}

TEST_CASE("Psi2 factor, PSD and trace invariants") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Fixture f(seed * 31);
        const PsiRequest r = f.req();
        const PsiStatistics s = psi_closed(r);
        const PsiFactored fac = psi_factored(r);
        const Mat FF = fac.F * fac.F.transpose();
        CHECK((FF - s.Psi2).cwiseAbs().maxCoeff() <= 1e-12 * s.Psi2.cwiseAbs().maxCoeff());
        CHECK((fac.Psi1 - s.Psi1).norm() <= 1e-14 * s.Psi1.norm());
        CHECK(fac.psi0 == doctest::Approx(s.psi0).epsilon(1e-14));
        CHECK((s.Psi2 - s.Psi2.transpose()).norm() == 0.0);
        const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(s.Psi2).eigenvalues().minCoeff();
        CHECK(lmin >= -1e-10 * s.Psi2.trace());
        CHECK(s.psi0 >= 0.0);
        const PsiStatistics ser = psi_closed_serial(r);
        CHECK((ser.Psi2 - s.Psi2).cwiseAbs().maxCoeff() <= 1e-12 * s.Psi2.cwiseAbs().maxCoeff());
        CHECK((ser.Psi1 - s.Psi1).cwiseAbs().maxCoeff() <= 1e-14 * s.Psi1.cwiseAbs().maxCoeff());
    }
    Fixture f(3);
    PsiRequest r = f.req();
    r.rows.clear();
    r.weights.resize(0);
    CHECK(psi0_closed(r) == 0.0);
}

TEST_CASE("temporal factor is untouched by the expectation") {
    Fixture f(44);
    PsiRequest r = f.req();
    r.rows = {Row{0, 1, 0.0}, Row{0, 1, 0.7}};
    r.weights = Vec::Ones(2);
    r.inducing = {Row{0, 1, 0.2}};
    const Mat P1 = psi1_closed(r);
    const auto& k = *r.kernels;
    const double ratio = temporal_cov(k.latent[0], k.inducing[0], 0.0, 0.2) / temporal_cov(k.latent[0], k.inducing[0], 0.7, 0.2);
    CHECK(P1(0, 0) / P1(1, 0) == doctest::Approx(ratio).epsilon(1e-13));
}

TEST_CASE("Psi2 dominates the outer product of Psi1") {
    // sum_n w_n Cov(k_n) is PSD
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Fixture f(seed * 17);
        const PsiRequest r = f.req();
        const PsiStatistics s = psi_closed(r);
        const Mat D = s.Psi2 - s.Psi1.transpose() * r.weights.asDiagonal() * s.Psi1;
        const double lmin = Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (D + D.transpose())).eigenvalues().minCoeff();
        CHECK(lmin >= -1e-10 * s.Psi2.trace());
    }
}

TEST_CASE("predictive statistics per row") {
    Fixture f(61);
    const PsiRequest r = f.req();
    const PredictivePsi p = psi_predictive(r);
    const PsiStatistics s = psi_closed(r);
    CHECK((p.Psi1 - s.Psi1).norm() <= 1e-14 * s.Psi1.norm());
    Mat sum = Mat::Zero(s.Psi2.rows(), s.Psi2.cols());
    double p0 = 0.0;
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        const Mat m = p.psi2(i);
        CHECK((m - m.transpose()).norm() < 1e-14 * std::max(1.0, m.norm()));
        CHECK(Eigen::SelfAdjointEigenSolver<Mat>(m).eigenvalues().minCoeff() >= -1e-10 * std::max(m.trace(), 1e-300));
        sum += r.weights[static_cast<Eigen::Index>(i)] * m;
        p0 += r.weights[static_cast<Eigen::Index>(i)] * p.psi0[static_cast<Eigen::Index>(i)];
    }
    CHECK((sum - s.Psi2).cwiseAbs().maxCoeff() <= 1e-12 * s.Psi2.cwiseAbs().maxCoeff());
    CHECK(p0 == doctest::Approx(s.psi0).epsilon(1e-13));
    PsiRequest bad = r;
    bad.rows.push_back(Row{0, 5, 0.0});
    bad.weights = Vec::Ones(static_cast<Eigen::Index>(bad.rows.size()));
    CHECK_THROWS_AS(psi_predictive(bad), Error);
}
