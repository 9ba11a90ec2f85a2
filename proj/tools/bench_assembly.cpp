// Serial reference vs OpenMP assembly of the Gram and Psi blocks.
#include <benchmark/benchmark.h>

#include <random>

#include "streamgp/checks.hpp"
#include "streamgp/kernels.hpp"
#include "streamgp/psi.hpp"

using namespace streamgp;

namespace {

// n_t data times and 20 inducing times per (function, site)
PsiCase make_case(int n_t) {
    std::mt19937_64 rng(5);
    PsiCase c = random_psi_case(rng, 0);
    c.request.rows.clear();
    c.request.inducing.clear();
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 3; ++s) {
            for (int i = 0; i < n_t; ++i) c.request.rows.push_back({a, s, 10.0 * i / (n_t - 1)});
            for (int i = 0; i < 20; ++i) c.request.inducing.push_back({a, s, 10.0 * i / 19});
        }
    c.request.weights = Vec::Ones(static_cast<Eigen::Index>(c.request.rows.size()));
    return c;
}

GramInputs gram_inputs(const PsiCase& c) {
    return {&c.kernels, c.request.coupling,
            SpatialInputs::from_tau_gamma(c.request.q.mu_tau, c.request.q.mu_gamma), c.request.g};
}

template <bool Parallel>
void bm_gram_ff(benchmark::State& st) {
    const PsiCase c = make_case(static_cast<int>(st.range(0)));
    const GramInputs in = gram_inputs(c);
    for (auto _ : st) {
        Mat K = Parallel ? build_gram(GramKind::FF, c.request.rows, {}, in)
                         : build_gram_serial(GramKind::FF, c.request.rows, {}, in);
        benchmark::DoNotOptimize(K.data());
    }
}

template <bool Parallel>
void bm_psi(benchmark::State& st) {
    PsiCase c = make_case(static_cast<int>(st.range(0)));
    c.request.kernels = &c.kernels;
    for (auto _ : st) {
        PsiStatistics s = Parallel ? psi_closed(c.request) : psi_closed_serial(c.request);
        benchmark::DoNotOptimize(s.Psi2.data());
    }
}

}  // namespace

BENCHMARK(bm_gram_ff<false>)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_gram_ff<true>)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_psi<false>)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_psi<true>)->Arg(50)->Arg(100)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
