#include "streamgp/optimize.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>

namespace streamgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::mt19937_64 start_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    return std::mt19937_64(seq);
}

double log_uniform(std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> u(std::log(lo), std::log(hi));
    return std::exp(u(rng));
}

// Objective wrapper: numerical and parameter failures read as -inf so that
// line searches back off instead of aborting.
template <class F>
double guarded(F&& f) {
    try {
        const double v = f();
        return std::isfinite(v) ? v : kNegInf;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Numerical || e.kind() == ErrorKind::Parameter || e.kind() == ErrorKind::Domain)
            return kNegInf;
        throw;
    }
}

}  // namespace

void OptimizerConfig::validate() const {
    if (n_starts < 1) fail(ErrorKind::Config, "optimizer n_starts must be >= 1");
    if (max_iterations < 1) fail(ErrorKind::Config, "optimizer max_iterations must be >= 1");
    if (!(h_fd > 0) || !(tol_bound > 0) || !(tol_step > 0) || !(tol_constraint > 0))
        fail(ErrorKind::Config, "optimizer step and tolerances must be positive");
    if (lbfgs_memory < 1 || al_max_outer < 1 || !(al_rho0 > 0) || zeta_every < 1)
        fail(ErrorKind::Config, "invalid optimizer inner-loop settings");
}

Vec gradient(const Objective& f, const Vec& x, double h, Eigen::Index n, double fx) {
    if (n < 0) n = x.size();
    Vec g = Vec::Zero(x.size());
    Vec p = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double step = std::max(h, h * std::abs(x[i]));
        p[i] = x[i] + step;
        const double fp = f(p);
        p[i] = x[i] - step;
        const double fm = f(p);
        p[i] = x[i];
        if (std::isfinite(fp) && std::isfinite(fm)) {
            g[i] = (fp - fm) / (2.0 * step);
            continue;
        }
        if (std::isnan(fx)) fx = f(x);
        if (!std::isfinite(fx)) fail(ErrorKind::Numerical, "objective not finite at the differentiation point");
        if (std::isfinite(fp))
            g[i] = (fp - fx) / step;
        else if (std::isfinite(fm))
            g[i] = (fx - fm) / step;
        else
            fail(ErrorKind::Numerical, "objective not finite on either side of coordinate " + std::to_string(i));
    }
    return g;
}

AscentResult lbfgs_maximize(const Objective& f, const Vec& x0, const AscentOptions& o) {
    AscentResult r;
    r.x = x0;
    if (o.project) o.project(r.x);
    r.f = f(r.x);
    if (!std::isfinite(r.f)) {
        r.message = "objective not finite at start";
        return r;
    }
    r.history.push_back(r.f);
    const Eigen::Index n = o.n_diff < 0 ? x0.size() : o.n_diff;
    Vec g = gradient(f, r.x, o.h_fd, n, r.f);
    std::deque<std::pair<Vec, Vec>> mem;  // (s, y) for the minimisation of -f
    int small_steps = 0;
    for (int it = 0; it < o.max_iterations; ++it) {
        if (g.lpNorm<Eigen::Infinity>() <= 1e-10 * (1.0 + std::abs(r.f))) {
            r.converged = true;
            r.message = "gradient below tolerance";
            return r;
        }
        bool accepted = false;
        Vec xn;
        double fn = kNegInf;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            // two-loop recursion on q = -g
            Vec q = -g;
            std::vector<double> alpha(mem.size());
            for (std::size_t k = mem.size(); k-- > 0;) {
                const auto& [s, y] = mem[k];
                alpha[k] = s.dot(q) / y.dot(s);
                q -= alpha[k] * y;
            }
            if (!mem.empty()) {
                const auto& [s, y] = mem.back();
                q *= s.dot(y) / y.dot(y);
            } else {
                q /= std::max(1.0, g.lpNorm<Eigen::Infinity>());
            }
            for (std::size_t k = 0; k < mem.size(); ++k) {
                const auto& [s, y] = mem[k];
                const double b = y.dot(q) / y.dot(s);
                q += (alpha[k] - b) * s;
            }
            Vec d = -q;
            if (!(g.dot(d) > 0.0)) {
                mem.clear();
                d = g / std::max(1.0, g.lpNorm<Eigen::Infinity>());
            }
            const double dn = d.lpNorm<Eigen::Infinity>();
            if (dn > o.max_step) d *= o.max_step / dn;
            const double slope = g.dot(d);
            double t = 1.0;
            for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
                xn = r.x + t * d;
                if (o.project) o.project(xn);
                fn = f(xn);
                if (std::isfinite(fn) && fn >= r.f + 1e-4 * t * slope && fn >= r.f) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) mem.clear();
        }
        if (!accepted) {
            r.converged = true;
            r.message = "no ascent step at finite-difference resolution";
            return r;
        }
        const Vec gn = gradient(f, xn, o.h_fd, n, fn);
        const Vec s = xn - r.x;
        const Vec y = -(gn - g);
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            mem.emplace_back(s, y);
            if (static_cast<int>(mem.size()) > o.memory) mem.pop_front();
        }
        const double df = fn - r.f;
        const double step = s.lpNorm<Eigen::Infinity>();
        r.x = xn;
        r.f = fn;
        g = gn;
        r.iterations = it + 1;
        r.history.push_back(fn);
        const bool tiny = df <= o.tol_f * (1.0 + std::abs(fn)) || step <= o.tol_step * (1.0 + r.x.lpNorm<Eigen::Infinity>());
        small_steps = tiny ? small_steps + 1 : 0;
        if (small_steps >= 3) {
            r.converged = true;
            r.message = "objective and step change below tolerance";
            return r;
        }
    }
    r.message = "iteration cap reached";
    return r;
}

AlResult augmented_lagrangian_maximize(const Objective& f, const std::function<Vec(const Vec&)>& c,
                                       const Vec& x0, const AlOptions& o) {
    AlResult r;
    r.x = x0;
    Vec c0 = c(x0);
    r.lambda = Vec::Zero(c0.size());
    double rho = o.rho0;
    double prev = std::numeric_limits<double>::infinity();
    int remaining = o.inner.max_iterations;
    for (int outer = 0; outer < o.max_outer; ++outer) {
        const Vec lambda = r.lambda;
        Objective L = [&, lambda, rho](const Vec& x) {
            const double fx = f(x);
            if (!std::isfinite(fx)) return kNegInf;
            const Vec cx = c(x);
            return fx - lambda.dot(cx) - 0.5 * rho * cx.squaredNorm();
        };
        AscentOptions in = o.inner;
        bool inner_conv = false;
        while (remaining > 0) {
            in.max_iterations = o.refresh_every > 0 ? std::min(o.refresh_every, remaining) : remaining;
            const AscentResult a = lbfgs_maximize(L, r.x, in);
            if (!std::isfinite(a.f)) {
                r.message = a.message;
                r.outer = outer + 1;
                r.equality = c(r.x);
                r.f = f(r.x);
                return r;
            }
            r.x = a.x;
            remaining -= std::max(a.iterations, 1);
            r.iterations += a.iterations;
            if (o.refresh) o.refresh(r.x);
            if (a.converged || o.refresh_every <= 0) {
                inner_conv = a.converged;
                r.message = a.message;
                break;
            }
        }
        r.outer = outer + 1;
        r.inner_converged = inner_conv;
        const Vec cx = c(r.x);
        const double norm = cx.size() ? cx.lpNorm<Eigen::Infinity>() : 0.0;
        if (norm <= o.tol_constraint && inner_conv) {
            r.converged = true;
            break;
        }
        if (remaining <= 0) {
            r.message = "iteration cap reached";
            break;
        }
        r.lambda += rho * cx;
        if (norm > 0.25 * prev) rho = std::min(rho * 10.0, 1e10);
        prev = norm;
    }
    r.equality = c(r.x);
    r.f = f(r.x);
    return r;
}

void project_equalities(ModelParams& p) {
    const double w2 = norm_cdf(p.geo.alpha[0]), w3 = norm_cdf(p.geo.alpha[1]);
    const double nrm = std::hypot(w2, w3);
    auto clamp01 = [](double v) { return std::clamp(v, 1e-15, 1.0 - 1e-15); };
    p.geo.alpha[0] = norm_quantile(clamp01(w2 / nrm));
    p.geo.alpha[1] = norm_quantile(clamp01(w3 / nrm));

    const auto& q = p.q;
    const double v2 = q.sd_gamma[0] * q.sd_gamma[0], v3 = q.sd_gamma[1] * q.sd_gamma[1];
    auto resid = [&](double delta) {
        return expected_phi_sq(q.mu_gamma[0] + delta, v2) + expected_phi_sq(q.mu_gamma[1] + delta, v3) - 1.0;
    };
    double lo = -1.0, hi = 1.0;
    while (resid(lo) > 0.0 && lo > -1e3) lo *= 2.0;
    while (resid(hi) < 0.0 && hi < 1e3) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (resid(mid) > 0.0 ? hi : lo) = mid;
    }
    const double delta = 0.5 * (lo + hi);
    p.q.mu_gamma[0] += delta;
    p.q.mu_gamma[1] += delta;
}

void update_zeta(ModelParams& p, const Problem& prob) {
    const std::size_t nc = prob.censored();
    if (nc == 0) return;
    const ModelState st = model_state(p, prob);
    const Vec m = st.psi.Psi1 * st.beta;
    p.local.zeta = m.tail(static_cast<Eigen::Index>(nc));
}

namespace {

Vec equality_residuals(const ModelParams& p) {
    Vec c(2);
    const auto& q = p.q;
    c[0] = expected_phi_sq(q.mu_gamma[0], q.sd_gamma[0] * q.sd_gamma[0]) +
           expected_phi_sq(q.mu_gamma[1], q.sd_gamma[1] * q.sd_gamma[1]) - 1.0;
    const double a2 = norm_cdf(p.geo.alpha[0]), a3 = norm_cdf(p.geo.alpha[1]);
    c[1] = a2 * a2 + a3 * a3 - 1.0;
    return c;
}

}  // namespace

StartSampler default_bgp_sampler(const ModelParams& reference, const Problem& prob) {
    return [reference, &prob](int start, std::mt19937_64& rng) {
        ModelParams p = reference;
        if (start == 0) return p;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        auto scale = [&](double v) { return v * log_uniform(rng, 1e-2, 1e2); };
        std::array<double, 2> xi, ls, lt;
        for (int a = 0; a < 2; ++a) {
            xi[a] = scale(reference.kernels.xi(a));
            ls[a] = scale(reference.kernels.latent[a].l_s);
            lt[a] = scale(reference.kernels.latent[a].l_t);
            p.sigma[a] = scale(reference.sigma[a]);
        }
        p.kernels = KernelConfig::from_xi(xi, ls, lt, xi, ls, lt);
        for (int j = 0; j < 3; ++j) {
            p.q.mu_tau[j] = prob.priors.d_tau[j];
            p.q.sd_tau[j] = log_uniform(rng, 1e-2, 1.0);
        }
        for (int k = 0; k < 2; ++k) {
            p.q.mu_gamma[k] = prob.priors.d_gamma[k];
            p.q.sd_gamma[k] = log_uniform(rng, 1e-2, 1.0);
            p.geo.alpha[k] = prob.priors.d_gamma[k];
        }
        p.q.mu_eta = prob.priors.eta_mean;
        p.q.sd_eta = log_uniform(rng, 1e-2, 1.0);
        const auto U = placement_upper(p.kernels, p.q);
        for (int j = 0; j < 3; ++j) p.geo.hp[j] = U[j] * (0.5 + 0.49 * unif(rng));
        const std::size_t mt = p.t_inducing.size();
        if (mt > 1) {
            const double spacing = p.t_inducing[1] - p.t_inducing[0];
            for (std::size_t i = 0; i < mt; ++i) p.t_inducing[i] = reference.t_inducing[i] + spacing * 0.25 * (2 * unif(rng) - 1);
        }
        if (prob.censored() > 0) {
            p.local.zeta = initial_zeta(prob.observations, *prob.limits, p.sigma);
            for (int a = 0; a < 2; ++a) {
                p.local.sigma2_qd[a] = 0.1 * p.sigma[a] * p.sigma[a];
                p.local.sigma2_d[a] = 0.1 * p.sigma[a] * p.sigma[a];
            }
        }
        return p;
    };
}

FitResult fit_bgp(const Problem& prob, const OptimizerConfig& cfg, const StartSampler& sampler) {
    cfg.validate();
    const std::size_t nc = prob.censored();
    // draw feasible starts
    std::vector<ModelParams> starts;
    std::vector<std::string> last_violation;
    for (int draw = 0; draw < 10 * cfg.n_starts && static_cast<int>(starts.size()) < cfg.n_starts; ++draw) {
        auto rng = start_rng(cfg.seed, static_cast<std::uint64_t>(draw));
        ModelParams p = sampler(draw == 0 ? 0 : draw, rng);
        project_equalities(p);
        const ConstraintValues cv = constraints_eval(p);
        if (!cv.feasible(1e-8, 0.0)) {
            last_violation = cv.violated(1e-8, 0.0);
            continue;
        }
        const double b = guarded([&] { return collapsed_bound(p, prob); });
        if (!std::isfinite(b)) {
            last_violation = {"collapsed bound not finite"};
            continue;
        }
        starts.push_back(std::move(p));
    }
    if (starts.empty()) {
        std::string names;
        for (const auto& v : last_violation) names += (names.empty() ? "" : ", ") + v;
        fail(ErrorKind::Infeasible, "no feasible start within " + std::to_string(10 * cfg.n_starts) + " draws: " + names);
    }
    const std::size_t mt = starts[0].t_inducing.size();
    const ParamLayout layout(mt, nc, nc > 0);
    const Eigen::Index nd = static_cast<Eigen::Index>(layout.gradient_size());

    FitResult out;
    out.records.resize(starts.size());
    std::vector<ModelParams> finals(starts.size());
    std::vector<std::string> errors(starts.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        StartRecord& rec = out.records[s];
        rec.start = static_cast<int>(s);
        try {
            Objective f = [&](const Vec& z) { return guarded([&] { return collapsed_bound(layout.unpack(z), prob); }); };
            auto c = [&](const Vec& z) { return equality_residuals(layout.unpack(z)); };
            AlOptions al;
            al.inner.max_iterations = cfg.max_iterations;
            al.inner.tol_f = cfg.tol_bound;
            al.inner.tol_step = cfg.tol_step;
            al.inner.memory = cfg.lbfgs_memory;
            al.inner.h_fd = cfg.h_fd;
            al.inner.n_diff = nd;
            al.max_outer = cfg.al_max_outer;
            al.rho0 = cfg.al_rho0;
            al.tol_constraint = cfg.tol_constraint;
            if (nc > 0) {
                al.refresh_every = cfg.zeta_every;
                al.refresh = [&](Vec& z) {
                    try {
                        ModelParams p = layout.unpack(z);
                        update_zeta(p, prob);
                        z.tail(static_cast<Eigen::Index>(nc)) = p.local.zeta;
                    } catch (const Error&) {
                    }
                };
            }
            const AlResult r = augmented_lagrangian_maximize(f, c, layout.pack(starts[s]), al);
            ModelParams p = layout.unpack(r.x);
            project_equalities(p);
            if (nc > 0) update_zeta(p, prob);
            rec.objective = collapsed_bound(p, prob);
            rec.iterations = r.iterations;
            rec.feasible = constraints_eval(p).feasible(1e-6, 1e-8);
            rec.converged = r.inner_converged && rec.feasible && std::isfinite(rec.objective);
            rec.message = r.message;
            finals[s] = std::move(p);
        } catch (const Error& e) {
            rec.converged = false;
            rec.message = e.what();
        }
        rec.wall_time_s = seconds_since(t0);
        spdlog::info("bgp start {}: bound {:.6f} iterations {} converged {} ({:.1f} s) {}", rec.start, rec.objective,
                     rec.iterations, rec.converged, rec.wall_time_s, rec.message);
    }
    for (std::size_t s = 0; s < starts.size(); ++s) {
        const auto& rec = out.records[s];
        if (!rec.feasible || !std::isfinite(rec.objective)) continue;
        if (out.best_start < 0 || rec.objective > out.bound) {
            out.best_start = static_cast<int>(s);
            out.bound = rec.objective;
        }
    }
    if (out.best_start < 0) fail(ErrorKind::Numerical, "every start failed");
    out.best = finals[static_cast<std::size_t>(out.best_start)];
    out.converged = out.records[static_cast<std::size_t>(out.best_start)].converged;
    out.constraints = constraints_eval(out.best);
    return out;
}

KernelConfig GprParams::kernels() const { return KernelConfig::from_xi(xi, l_s, l_t, xi, l_s, l_t); }

GprData gpr_data(const std::vector<Observation>& canonical) {
    GprData d;
    std::vector<double> y;
    for (const auto& o : canonical) {
        if (o.status == Status::Missing) continue;
        d.rows.push_back(Row{o.function, o.site, o.t});
        y.push_back(o.value);
    }
    d.y = Eigen::Map<Vec>(y.data(), static_cast<Eigen::Index>(y.size()));
    return d;
}

double gpr_log_marginal(const GprParams& p, const SpatialInputs& x, const GprData& d) {
    const KernelConfig k = p.kernels();
    GramInputs gi;
    gi.kernels = &k;
    gi.coupling = Coupling::MultiOutput;
    gi.x = x;
    Mat K = build_gram(GramKind::FF, d.rows, {}, gi);
    for (std::size_t i = 0; i < d.rows.size(); ++i) K(i, i) += p.sigma[d.rows[i].function] * p.sigma[d.rows[i].function];
    const auto L = jittered_cholesky(K, "K_NN + sigma^2 I");
    const Vec a = L.llt.matrixL().solve(d.y);
    return -0.5 * a.squaredNorm() - 0.5 * L.log_det() - 0.5 * static_cast<double>(d.y.size()) * kLog2Pi;
}

namespace {

Vec gpr_pack(const GprParams& p) {
    Vec z(8);
    for (int a = 0; a < 2; ++a) {
        z[a] = std::log(p.xi[a]);
        z[2 + a] = std::log(p.l_s[a]);
        z[4 + a] = std::log(p.l_t[a]);
        z[6 + a] = std::log(p.sigma[a]);
    }
    return z;
}

GprParams gpr_unpack(const Vec& z) {
    GprParams p;
    for (int a = 0; a < 2; ++a) {
        p.xi[a] = std::exp(z[a]);
        p.l_s[a] = std::exp(z[2 + a]);
        p.l_t[a] = std::exp(z[4 + a]);
        p.sigma[a] = std::exp(z[6 + a]);
    }
    return p;
}

}  // namespace

GprParams gpr_heuristic_start(const SpatialInputs& x, const GprData& d) {
    GprParams p;
    double tlo = std::numeric_limits<double>::infinity(), thi = -tlo;
    for (const auto& r : d.rows) {
        tlo = std::min(tlo, r.t);
        thi = std::max(thi, r.t);
    }
    const double span = thi > tlo ? thi - tlo : 1.0;
    for (int a = 0; a < 2; ++a) {
        double s = 0, s2 = 0;
        int n = 0;
        for (std::size_t i = 0; i < d.rows.size(); ++i)
            if (d.rows[i].function == a) {
                s += d.y[i];
                s2 += d.y[i] * d.y[i];
                ++n;
            }
        const double var = n > 1 ? std::max((s2 - s * s / n) / (n - 1), 1e-6) : 1.0;
        p.l_s[a] = std::sqrt(x.h[0] + x.h[1] + x.h[2]);
        p.l_t[a] = span / 10.0;
        p.sigma[a] = 0.3 * std::sqrt(var);
        MovingAverageParams unit{1.0, p.l_s[a], 1.0, p.l_t[a]};
        const double v1 = spatial_ff(unit, 0, unit, 0, x) * temporal_cov(unit, unit, 0.0, 0.0);
        p.xi[a] = std::sqrt(0.9 * var / v1);
    }
    return p;
}

GprFit fit_gpr(const SpatialInputs& x, const GprData& d, const OptimizerConfig& cfg) {
    cfg.validate();
    const GprParams h = gpr_heuristic_start(x, d);
    GprFit out;
    out.records.resize(static_cast<std::size_t>(cfg.n_starts));
    std::vector<Vec> finals(out.records.size());
    Objective f = [&](const Vec& z) { return guarded([&] { return gpr_log_marginal(gpr_unpack(z), x, d); }); };
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < cfg.n_starts; ++s) {
        const auto t0 = std::chrono::steady_clock::now();
        auto& rec = out.records[static_cast<std::size_t>(s)];
        rec.start = s;
        Vec z0 = gpr_pack(h);
        if (s > 0) {
            auto rng = start_rng(cfg.seed, static_cast<std::uint64_t>(s));
            std::uniform_real_distribution<double> u(std::log(1e-2), std::log(1e2));
            for (Eigen::Index i = 0; i < z0.size(); ++i) z0[i] += u(rng);
        }
        try {
            AscentOptions o;
            o.max_iterations = cfg.max_iterations;
            o.tol_f = cfg.tol_bound;
            o.tol_step = cfg.tol_step;
            o.memory = cfg.lbfgs_memory;
            o.h_fd = cfg.h_fd;
            const AscentResult r = lbfgs_maximize(f, z0, o);
            rec.objective = r.f;
            rec.iterations = r.iterations;
            rec.converged = r.converged && std::isfinite(r.f);
            rec.feasible = std::isfinite(r.f);
            rec.message = r.message;
            finals[static_cast<std::size_t>(s)] = r.x;
        } catch (const Error& e) {
            rec.message = e.what();
        }
        rec.wall_time_s = seconds_since(t0);
        spdlog::info("gpr start {}: log marginal {:.6f} iterations {} converged {} ({:.1f} s)", s, rec.objective,
                     rec.iterations, rec.converged, rec.wall_time_s);
    }
    for (std::size_t s = 0; s < out.records.size(); ++s)
        if (out.records[s].feasible && (out.best_start < 0 || out.records[s].objective > out.log_marginal)) {
            out.best_start = static_cast<int>(s);
            out.log_marginal = out.records[s].objective;
        }
    if (out.best_start < 0) fail(ErrorKind::Numerical, "every GPR start failed");
    out.params = gpr_unpack(finals[static_cast<std::size_t>(out.best_start)]);
    out.converged = out.records[static_cast<std::size_t>(out.best_start)].converged;
    return out;
}

ModelParams bgp_reference(const GprParams& g, const Problem& prob, std::size_t mt, double t_lo, double t_hi) {
    if (mt < 1) fail(ErrorKind::Config, "M_t must be >= 1");
    ModelParams p;
    p.kernels = g.kernels();
    for (int j = 0; j < 3; ++j) {
        p.q.mu_tau[j] = prob.priors.d_tau[j];
        p.q.sd_tau[j] = 0.1;
    }
    for (int k = 0; k < 2; ++k) {
        p.q.mu_gamma[k] = prob.priors.d_gamma[k];
        p.q.sd_gamma[k] = 0.1;
        p.geo.alpha[k] = prob.priors.d_gamma[k];
    }
    p.q.mu_eta = prob.priors.eta_mean;
    p.q.sd_eta = prob.priors.eta_sd;
    const auto U = placement_upper(p.kernels, p.q);
    for (int j = 0; j < 3; ++j) p.geo.hp[j] = 0.9 * U[j];
    p.t_inducing.resize(mt);
    for (std::size_t i = 0; i < mt; ++i)
        p.t_inducing[i] = mt == 1 ? 0.5 * (t_lo + t_hi) : t_lo + (t_hi - t_lo) * static_cast<double>(i) / (mt - 1);
    p.sigma = g.sigma;
    if (prob.censored() > 0) {
        p.local.zeta = initial_zeta(prob.observations, *prob.limits, p.sigma);
        for (int a = 0; a < 2; ++a) {
            p.local.sigma2_qd[a] = 0.1 * p.sigma[a] * p.sigma[a];
            p.local.sigma2_d[a] = 0.1 * p.sigma[a] * p.sigma[a];
        }
    }
    project_equalities(p);
    return p;
}

}  // namespace streamgp
