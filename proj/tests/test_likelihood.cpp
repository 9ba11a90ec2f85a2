#include <doctest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "streamgp/latent.hpp"
#include "streamgp/likelihood.hpp"

using namespace streamgp;

namespace {

const CensoringLimits kLim{{0.2, -0.4}, {-0.6, -1.5}};

std::vector<Observation> mixed_rows(std::mt19937_64& rng, int n) {
    std::vector<Observation> v;
    std::normal_distribution<double> N(0.0, 1.0);
    std::uniform_int_distribution<int> st(0, 3);
    for (int i = 0; i < n; ++i) {
        Observation o;
        o.function = i % 2;
        o.site = (i / 2) % 3;
        o.t = 0.1 * i;
        const int s = st(rng);
        o.status = s == 0 ? Status::BetweenLimits : s == 1 ? Status::BelowDetection : i % 7 == 0 ? Status::Missing : Status::Observed;
        o.value = o.status == Status::BetweenLimits ? kLim.lq[o.function]
                  : o.status == Status::BelowDetection ? kLim.ld[o.function] : N(rng);
        v.push_back(o);
    }
    return v;
}

}  // namespace

TEST_CASE("local bound is tangent at zeta") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-3.0, 3.0), V(0.01, 0.5);
    for (Status st : {Status::BetweenLimits, Status::BelowDetection}) {
        for (int k = 0; k < 1000; ++k) {
            const double lq = U(rng), ld = lq - V(rng) * 4.0, zeta = U(rng);
            const double s2 = V(rng), het = V(rng) * 1e-3;
            const auto g = local_bound_coeffs(st, zeta, lq, ld, s2, het);
            const double ex = censored_log_term(st, zeta, lq, ld, s2 + het);
            CHECK(std::abs(g.value(zeta) - ex) <= 1e-10 * std::max(1.0, std::abs(ex)));
            const double h = 1e-5 * std::sqrt(s2);
            const double dg = (g.value(zeta + h) - g.value(zeta - h)) / (2 * h);
            const double de = (censored_log_term(st, zeta + h, lq, ld, s2 + het) -
                               censored_log_term(st, zeta - h, lq, ld, s2 + het)) / (2 * h);
            CHECK(std::abs(dg - de) <= 1e-5 * std::max(1.0, std::abs(de)));
        }
    }
}

TEST_CASE("local bound dominance on random pairs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(-3.0, 3.0), V(0.01, 0.5);
    for (Status st : {Status::BetweenLimits, Status::BelowDetection}) {
        int violations = 0;
        for (int k = 0; k < 1000; ++k) {
            const double lq = U(rng), ld = lq - V(rng) * 4.0, zeta = U(rng), s2 = V(rng);
            const auto g = local_bound_coeffs(st, zeta, lq, ld, s2, 0.0);
            const double s = std::sqrt(s2);
            std::uniform_real_distribution<double> F(zeta - 6 * s, zeta + 6 * s);
            const double f = F(rng);
            const double ex = censored_log_term(st, f, lq, ld, s2);
            if (g.value(f) > ex + 1e-12 * std::max(1.0, std::abs(ex))) ++violations;
            // dense grid as well
            for (int i = 0; i <= 100; ++i) {
                const double x = zeta - 6 * s + 12 * s * i / 100.0;
                const double e = censored_log_term(st, x, lq, ld, s2);
                if (g.value(x) > e + 1e-12 * std::max(1.0, std::abs(e))) ++violations;
            }
        }
        CHECK(violations == 0);
    }
}

TEST_CASE("worked values of the censored terms") {
    const double ld = -1.0, lq = 0.5, s2 = 0.3;
    CHECK(censored_log_term(Status::BelowDetection, ld, lq, ld, s2) == doctest::Approx(std::log(0.5)).epsilon(1e-15));
    const auto g = local_bound_coeffs(Status::BelowDetection, ld, lq, ld, s2, 0.0);
    CHECK(std::exp(g.value(ld)) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::exp(g.value(ld + 0.7)) <= std::exp(censored_log_term(Status::BelowDetection, ld + 0.7, lq, ld, s2)));

    // between limits against the CDF difference directly
    const double f = 0.1, s = std::sqrt(s2);
    const double direct = std::log(norm_cdf((lq - f) / s) - norm_cdf((ld - f) / s));
    CHECK(censored_log_term(Status::BetweenLimits, f, lq, ld, s2) == doctest::Approx(direct).epsilon(1e-13));
    // tails where the naive difference underflows stay finite
    CHECK(std::isfinite(censored_log_term(Status::BetweenLimits, 40.0, lq, ld, s2)));
    CHECK(std::isfinite(censored_log_term(Status::BelowDetection, 40.0, lq, ld, s2)));

    CHECK_THROWS_AS(local_bound_coeffs(Status::BetweenLimits, 0.0, 0.3, 0.3, 1.0, 0.0), Error);
    try {
        local_bound_coeffs(Status::BetweenLimits, 0.0, 0.3, 0.3, 1.0, 0.0);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
    }
    CHECK_THROWS_AS(local_bound_coeffs(Status::Observed, 0.0, 0.3, 0.0, 1.0, 0.0), Error);
    CHECK_THROWS_AS(local_bound_coeffs(Status::BelowDetection, 0.0, 0.3, 0.0, -1.0, 0.0), Error);
}

TEST_CASE("all observed pseudo data is the data") {
    std::vector<Observation> obs;
    for (int i = 0; i < 6; ++i) obs.push_back({i % 2, i % 3, 0.5 * i, 0.1 * i, Status::Observed});
    const PseudoData p = assemble_pseudo_data(obs, std::nullopt, LocalBoundState{}, {0.04, 0.09});
    CHECK(p.n_censored() == 0);
    CHECK(p.b.size() == 0);
    CHECK(p.n_observed[0] == 3);
    CHECK(p.n_observed[1] == 3);
    for (Eigen::Index r = 0; r < p.y_l.size(); ++r) {
        CHECK(p.sigma2_l[r] == (p.rows[static_cast<std::size_t>(r)].function == 0 ? 0.04 : 0.09));
    }
    const auto c = canonicalize(obs);
    for (Eigen::Index r = 0; r < p.y_l.size(); ++r) CHECK(p.y_l[r] == c[p.source[static_cast<std::size_t>(r)]].value);
    // Gaussian log likelihood when nothing is censored
    Vec f = Vec::Zero(6);
    double ll = 0.0;
    for (const auto& o : c) {
        const double v = o.function == 0 ? 0.04 : 0.09;
        ll += -0.5 * std::log(2 * kPi * v) - 0.5 * o.value * o.value / v;
    }
    CHECK(exact_censored_loglik(f, obs, std::nullopt, {0.04, 0.09}) == doctest::Approx(ll).epsilon(1e-14));
}

TEST_CASE("a single between-limits row") {
    std::vector<Observation> obs = {{0, 0, 0.0, 0.3, Status::Observed},
                                    {0, 0, 1.0, kLim.lq[0], Status::BetweenLimits},
                                    {1, 2, 0.0, -0.1, Status::Observed}};
    LocalBoundState st;
    st.zeta = Vec::Constant(1, -0.2);
    st.sigma2_qd = {1e-4, 0.0};
    const PseudoData p = assemble_pseudo_data(obs, kLim, st, {0.04, 0.09});
    CHECK(p.n_censored() == 1);
    CHECK(p.b.size() == 1);
    CHECK(p.c.size() == 1);
    CHECK(p.d.size() == 1);
    CHECK(p.ones.size() == 1);
    CHECK(p.n_qd[0] == 1);
    CHECK(p.d[0] == doctest::Approx(kLim.ld[0] + kLim.lq[0]));
    CHECK(p.sigma2_c[0] == doctest::Approx(0.04 + 1e-4));
    CHECK(p.status.back() == Status::BetweenLimits);
    CHECK(p.rows.back().t == 1.0);
    CHECK(p.y_l[2] == p.b[0]);
    // wrong value on a censored row
    obs[1].value = 0.0;
    CHECK_THROWS_AS(assemble_pseudo_data(obs, kLim, st, {0.04, 0.09}), Error);
    obs[1].value = kLim.lq[0];
    CHECK_THROWS_AS(assemble_pseudo_data(obs, std::nullopt, st, {0.04, 0.09}), Error);
    st.zeta = Vec::Zero(2);
    CHECK_THROWS_AS(assemble_pseudo_data(obs, kLim, st, {0.04, 0.09}), Error);
}

TEST_CASE("block sizes follow the status counts") {
    // f1: 96 observed, 4 qd, 6 d; f2: 84, 13, 14
    std::vector<Observation> obs;
    auto add = [&](int a, Status s, int n) {
        for (int i = 0; i < n; ++i)
            obs.push_back({a, i % 3, 0.01 * static_cast<double>(obs.size()),
                           s == Status::Observed ? 0.0 : s == Status::BetweenLimits ? kLim.lq[a] : kLim.ld[a], s});
    };
    add(0, Status::Observed, 96);
    add(0, Status::BetweenLimits, 4);
    add(0, Status::BelowDetection, 6);
    add(1, Status::Observed, 84);
    add(1, Status::BetweenLimits, 13);
    add(1, Status::BelowDetection, 14);
    add(1, Status::Missing, 5);
    const auto c = canonicalize(obs);
    LocalBoundState st;
    st.zeta = initial_zeta(c, kLim, {0.2, 0.2});
    CHECK(st.zeta.size() == 37);
    const PseudoData p = assemble_pseudo_data(obs, kLim, st, {0.04, 0.09});
    CHECK(p.n_observed == std::array<int, 2>{96, 84});
    CHECK(p.n_qd == std::array<int, 2>{4, 13});
    CHECK(p.n_d == std::array<int, 2>{6, 14});
    CHECK(p.rows.size() == 217);
    CHECK(p.n_uncensored == 180);
    // order: observed f1, f2, then qd f1, f2, then d f1, f2
    std::vector<std::pair<int, int>> blocks;
    for (std::size_t r = 0; r < p.rows.size(); ++r) {
        const std::pair<int, int> key{static_cast<int>(p.status[r]), p.rows[r].function};
        if (blocks.empty() || blocks.back() != key) blocks.push_back(key);
    }
    CHECK(blocks.size() == 6);
    CHECK(std::is_sorted(blocks.begin(), blocks.end()));
    // initial tangency points
    CHECK(st.zeta[0] == doctest::Approx(0.5 * (kLim.lq[0] + kLim.ld[0])));
    CHECK(st.zeta[36] == doctest::Approx(kLim.ld[1] - 0.2));
    for (Eigen::Index i = 0; i < p.sigma2_l.size(); ++i) CHECK(p.sigma2_l[i] > 0.0);
}

TEST_CASE("pseudo data is invariant to input order and missing rows") {
    std::mt19937_64 rng(3);
    auto obs = mixed_rows(rng, 60);
    const auto c = canonicalize(obs);
    LocalBoundState st;
    st.zeta = initial_zeta(c, kLim, {0.3, 0.3});
    st.sigma2_qd = {1e-4, 2e-4};
    st.sigma2_d = {3e-4, 0.0};
    const PseudoData a = assemble_pseudo_data(obs, kLim, st, {0.09, 0.04});
    for (int k = 0; k < 5; ++k) {
        auto shuffled = obs;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        const PseudoData b = assemble_pseudo_data(shuffled, kLim, st, {0.09, 0.04});
        CHECK(a.y_l == b.y_l);
        CHECK(a.sigma2_l == b.sigma2_l);
        CHECK(a.c == b.c);
        CHECK(a.source == b.source);
    }
    // dropping missing rows changes nothing
    auto kept = obs;
    kept.erase(std::remove_if(kept.begin(), kept.end(), [](const Observation& o) { return o.status == Status::Missing; }),
               kept.end());
    CHECK(kept.size() < obs.size());
    const PseudoData b = assemble_pseudo_data(kept, kLim, st, {0.09, 0.04});
    CHECK(a.y_l == b.y_l);
    CHECK(a.rows.size() == b.rows.size());
}

TEST_CASE("summed local bounds never exceed the exact likelihood") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> N(0.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        auto obs = mixed_rows(rng, 40);
        const auto c = canonicalize(obs);
        const std::array<double, 2> s2{0.05, 0.08};
        LocalBoundState st;
        st.zeta = initial_zeta(c, kLim, {0.2, 0.3});
        for (Eigen::Index i = 0; i < st.zeta.size(); ++i) st.zeta[i] += 0.5 * N(rng);
        st.sigma2_qd = {5e-4, 1e-4};
        st.sigma2_d = {2e-4, 7e-4};
        const PseudoData p = assemble_pseudo_data(obs, kLim, st, s2);
        auto bound_at = [&](const Vec& f) {
            double sum = 0.0;
            Eigen::Index k = 0;
            for (std::size_t r = 0; r < p.rows.size(); ++r) {
                const double fr = f[static_cast<Eigen::Index>(p.source[r])];
                if (p.status[r] == Status::Observed) {
                    const double e = c[p.source[r]].value - fr;
                    const double v = s2[static_cast<std::size_t>(p.rows[r].function)];
                    sum += -0.5 * (std::log(2 * kPi * v) + e * e / v);
                } else {
                    LocalBoundCoeffs g{p.b[k], p.c[k], p.d[k], p.sigma2_c[k]};
                    sum += g.value(fr);
                    ++k;
                }
            }
            return sum;
        };
        for (int k = 0; k < 1000; ++k) {
            Vec f(static_cast<Eigen::Index>(c.size()));
            for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = N(rng);
            const double ex = exact_censored_loglik(f, obs, kLim, s2, st.sigma2_qd, st.sigma2_d);
            CHECK(bound_at(f) <= ex + 1e-10);
        }
        // equality at f = zeta on the censored rows
        Vec f(static_cast<Eigen::Index>(c.size()));
        for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = c[static_cast<std::size_t>(i)].value;
        Eigen::Index k = 0;
        for (std::size_t r = p.n_uncensored; r < p.rows.size(); ++r) f[static_cast<Eigen::Index>(p.source[r])] = st.zeta[k++];
        CHECK(bound_at(f) == doctest::Approx(exact_censored_loglik(f, obs, kLim, s2, st.sigma2_qd, st.sigma2_d)).epsilon(1e-11));
    }
}

TEST_CASE("status codes round trip") {
    for (Status s : {Status::Observed, Status::BetweenLimits, Status::BelowDetection, Status::Missing})
        CHECK(parse_status(status_code(s)) == s);
    CHECK_THROWS_AS(parse_status("nd"), Error);
    CHECK_THROWS_AS((CensoringLimits{{0.0, 0.0}, {0.0, -1.0}}.validate()), Error);
}
