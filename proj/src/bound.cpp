#include "streamgp/bound.hpp"

#include <algorithm>
#include <cmath>

namespace streamgp {

std::vector<Row> inducing_rows(const std::vector<double>& t) {
    std::vector<Row> rows;
    rows.reserve(6 * t.size());
    for (int a = 0; a < 2; ++a)
        for (int j = 0; j < 3; ++j)
            for (double tt : t) rows.push_back(Row{a, j, tt});
    return rows;
}

Problem Problem::make(const std::vector<Observation>& obs, std::optional<CensoringLimits> limits,
                      const UncertainInputPriors& priors, Coupling coupling) {
    Problem p;
    p.observations = canonicalize(obs);
    p.limits = limits;
    p.priors = priors;
    p.coupling = coupling;
    if (p.censored() > 0 && !p.limits) fail(ErrorKind::Config, "censored rows need censoring limits");
    return p;
}

Eigen::LLT<Mat> whitened_factor(const JitteredCholesky& LK, const Mat& Psi2) {
    const auto L = LK.llt.matrixL();
    Mat B = L.solve(L.solve(Psi2).transpose());
    B = 0.5 * (B + B.transpose());
    B.diagonal().array() += 1.0;
    Eigen::LLT<Mat> llt(B);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().allFinite())
        fail(ErrorKind::Numerical, "I + L^-1 Psi2 L^-T is not positive definite");
    return llt;
}

Eigen::LLT<Mat> whitened_factor_sqrt(const JitteredCholesky& LK, const Mat& F, double* trace) {
    const Mat A = LK.llt.matrixL().solve(F);
    Mat B = Mat::Identity(A.rows(), A.rows());
    B.selfadjointView<Eigen::Lower>().rankUpdate(A);
    B.triangularView<Eigen::StrictlyUpper>() = B.transpose();
    if (trace) *trace = A.squaredNorm();
    Eigen::LLT<Mat> llt(B);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().allFinite())
        fail(ErrorKind::Numerical, "I + L^-1 Psi2 L^-T is not positive definite");
    return llt;
}

ModelState model_state(const ModelParams& p, const Problem& prob, bool verify_grid) {
    ModelState st;
    const std::array<double, 2> s2{p.sigma[0] * p.sigma[0], p.sigma[1] * p.sigma[1]};
    st.pseudo = assemble_pseudo_data(prob.observations, prob.limits, p.local, s2, verify_grid);
    st.inducing = inducing_rows(p.t_inducing);

    PsiRequest req;
    req.kernels = &p.kernels;
    req.coupling = prob.coupling;
    req.q = p.q;
    req.g = p.geo;
    req.rows = st.pseudo.rows;
    req.weights = st.pseudo.sigma2_l.cwiseInverse();
    req.inducing = st.inducing;
    PsiFactored pf = psi_factored(req);
    st.psi.psi0 = pf.psi0;
    st.psi.Psi1 = std::move(pf.Psi1);

    GramInputs gi;
    gi.kernels = &p.kernels;
    gi.coupling = prob.coupling;
    gi.g = p.geo;
    st.Kmm = build_gram(GramKind::UU, st.inducing, {}, gi);
    st.LK = jittered_cholesky(st.Kmm, "K_MM");
    st.Kmm.diagonal().array() += st.LK.jitter;
    st.LB = whitened_factor_sqrt(st.LK, pf.F, &st.trace_kinv_psi2);
    st.v = st.psi.Psi1.transpose() * req.weights.cwiseProduct(st.pseudo.y_l);
    const auto L = st.LK.llt.matrixL();
    Vec a = L.solve(st.v);
    st.beta = L.transpose().solve(st.LB.solve(a));
    return st;
}

double ModelState::half_logdet_q() const {
    return 0.5 * LK.log_det() + LB.matrixLLT().diagonal().array().log().sum();
}

Mat ModelState::kmm_inverse() const { return LK.llt.solve(Mat::Identity(Kmm.rows(), Kmm.cols())); }

Mat ModelState::q_inverse() const {
    const auto L = LK.llt.matrixL();
    Mat Li = L.solve(Mat::Identity(Kmm.rows(), Kmm.cols()));
    Mat Qi = Li.transpose() * LB.solve(Li);
    return 0.5 * (Qi + Qi.transpose());
}

namespace {
void finite_or_fail(double v, const char* term) {
    if (!std::isfinite(v)) fail(ErrorKind::Numerical, std::string("non-finite bound term: ") + term);
}
}  // namespace

BoundTerms bound_terms(const ModelParams& p, const Problem& prob, const ModelState& st) {
    BoundTerms t;
    const auto& ps = st.pseudo;
    const Vec w = ps.sigma2_l.cwiseInverse();
    t.half_logdet_kmm = 0.5 * st.LK.log_det();
    t.half_logdet_q = st.half_logdet_q();
    t.quad = -0.5 * (w.cwiseProduct(ps.y_l.cwiseAbs2()).sum() - st.v.dot(st.beta));
    for (Eigen::Index k = 0; k < ps.b.size(); ++k)
        t.censored += (0.5 * ps.b[k] * ps.b[k] + ps.c[k] - ps.b[k] * ps.d[k]) / ps.sigma2_c[k];
    for (int f = 0; f < 2; ++f)
        t.noise += -0.5 * ps.n_observed[f] * (kLog2Pi + 2.0 * std::log(p.sigma[f]));
    t.trace = -0.5 * st.psi.psi0 + 0.5 * st.trace_kinv_psi2;
    t.kl = kl_block(p.q, prob.priors);
    t.data = t.half_logdet_kmm - t.half_logdet_q + t.quad + t.censored + t.noise + t.trace;
    t.total = t.data - t.kl;
    finite_or_fail(t.half_logdet_kmm, "ln|K_MM|");
    finite_or_fail(t.half_logdet_q, "ln|K_MM + Psi2|");
    finite_or_fail(t.quad, "y_l^T A y_l");
    finite_or_fail(t.censored, "local-bound bracket");
    finite_or_fail(t.trace, "psi0 / trace correction");
    finite_or_fail(t.kl, "KL block");
    return t;
}

BoundTerms collapsed_bound_terms(const ModelParams& p, const Problem& prob) {
    return bound_terms(p, prob, model_state(p, prob));
}

double collapsed_bound(const ModelParams& p, const Problem& prob) { return collapsed_bound_terms(p, prob).total; }

double bound_uncensored(const ModelParams& p, const Problem& prob) {
    if (prob.censored() > 0) fail(ErrorKind::Misuse, "bound_uncensored called on censored data");
    return collapsed_bound(p, prob);
}

QU optimal_qu(const Mat& Kmm, const PsiStatistics& psi, const PseudoData& pseudo) {
    const Vec w = pseudo.sigma2_l.cwiseInverse();
    const auto LK = jittered_cholesky(Kmm, "K_MM");
    const auto LB = whitened_factor(LK, psi.Psi2);
    const auto L = LK.llt.matrixL();
    // K Q^-1 K = L B^-1 L^T
    const Mat Lm = Mat(L);
    QU out;
    const Vec v = psi.Psi1.transpose() * w.cwiseProduct(pseudo.y_l);
    out.mean = Lm * LB.solve(Vec(L.solve(v)));
    out.cov = Lm * LB.solve(Lm.transpose());
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

QU optimal_qu_from_state(const ModelState& st) {
    const Mat L = Mat(st.LK.llt.matrixL());
    QU out;
    out.mean = L * st.LB.solve(Vec(st.LK.llt.matrixL().solve(st.v)));
    out.cov = L * st.LB.solve(L.transpose());
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    return out;
}

bool ConstraintValues::feasible(double eq_tol, double slack_tol) const { return violated(eq_tol, slack_tol).empty(); }

std::vector<std::string> ConstraintValues::violated(double eq_tol, double slack_tol) const {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < equality.size(); ++i)
        if (!(std::abs(equality[i]) <= eq_tol)) v.push_back(equality_names[i]);
    for (std::size_t i = 0; i < slack.size(); ++i)
        if (!(slack[i] >= -slack_tol)) v.push_back(slack_names[i]);
    return v;
}

namespace {

double single_form(double l, double mu, double var) {
    const double l2 = l * l;
    return l2 * mu * mu / (2.0 * var + l2);
}

double mixed_form(double l1, double l2, double mu, double var) {
    const double a = l1 * l1, b = l2 * l2;
    return a * b * mu * mu / ((a + b) * var + a * b);
}

struct Placement {
    std::array<std::vector<double>, 3> rhs;
    std::array<std::vector<std::string>, 3> names;
};

Placement placement_rhs(const KernelConfig& k, const VariationalPosterior& q) {
    Placement p;
    const double v0 = q.sd_tau[0] * q.sd_tau[0];
    p.rhs[0] = {single_form(k.latent[1].l_s, q.mu_tau[0], v0), single_form(k.latent[0].l_s, q.mu_tau[0], v0)};
    p.names[0] = {"placement h1' (l_2s)", "placement h1' (l_1s)"};
    for (int j = 1; j < 3; ++j) {
        const double v = q.sd_tau[j] * q.sd_tau[j];
        const std::string h = "h" + std::to_string(j + 1) + "'";
        p.rhs[j] = {single_form(k.inducing[1].l_s, q.mu_tau[j], v), single_form(k.inducing[0].l_s, q.mu_tau[j], v),
                    mixed_form(k.inducing[0].l_s, k.inducing[1].l_s, q.mu_tau[j], v)};
        p.names[j] = {"placement " + h + " (l'_2s)", "placement " + h + " (l'_1s)", "placement " + h + " (mixed)"};
    }
    return p;
}

}  // namespace

std::array<double, 3> placement_upper(const KernelConfig& k, const VariationalPosterior& q) {
    const auto p = placement_rhs(k, q);
    std::array<double, 3> u{};
    for (int j = 0; j < 3; ++j) u[j] = *std::min_element(p.rhs[j].begin(), p.rhs[j].end()) - kPlacementEps;
    return u;
}

ConstraintValues constraints_eval(const ModelParams& p) {
    ConstraintValues c;
    const auto& q = p.q;
    c.equality.push_back(expected_phi_sq(q.mu_gamma[0], q.sd_gamma[0] * q.sd_gamma[0]) +
                         expected_phi_sq(q.mu_gamma[1], q.sd_gamma[1] * q.sd_gamma[1]) - 1.0);
    c.equality_names.push_back("E[Phi^2(gamma2)] + E[Phi^2(gamma3)] = 1");
    const double a2 = norm_cdf(p.geo.alpha[0]), a3 = norm_cdf(p.geo.alpha[1]);
    c.equality.push_back(a2 * a2 + a3 * a3 - 1.0);
    c.equality_names.push_back("Phi^2(alpha2) + Phi^2(alpha3) = 1");

    const auto pl = placement_rhs(p.kernels, q);
    for (int j = 0; j < 3; ++j)
        for (std::size_t i = 0; i < pl.rhs[j].size(); ++i) {
            c.slack.push_back(pl.rhs[j][i] - p.geo.hp[j] - kPlacementEps);
            c.slack_names.push_back(pl.names[j][i]);
        }
    for (int a = 0; a < 2; ++a) {
        const double cap = p.sigma[a] * p.sigma[a] + kHetOffset;
        const std::string f = std::to_string(a + 1);
        c.slack.push_back(cap - p.local.sigma2_qd[a]);
        c.slack_names.push_back("sigma2_qd" + f + " cap");
        c.slack.push_back(cap - p.local.sigma2_d[a]);
        c.slack_names.push_back("sigma2_d" + f + " cap");
        c.slack.push_back(p.local.sigma2_qd[a]);
        c.slack_names.push_back("sigma2_qd" + f + " >= 0");
        c.slack.push_back(p.local.sigma2_d[a]);
        c.slack_names.push_back("sigma2_d" + f + " >= 0");
    }
    auto positive = [&](double v, const std::string& n) {
        c.slack.push_back(v > 0.0 ? v : -1.0);
        c.slack_names.push_back(n + " > 0");
    };
    for (int a = 0; a < 2; ++a) {
        const std::string f = std::to_string(a + 1);
        positive(p.kernels.latent[a].l_s, "l_s" + f);
        positive(p.kernels.latent[a].l_t, "l_t" + f);
        positive(p.kernels.inducing[a].l_s, "l'_s" + f);
        positive(p.kernels.inducing[a].l_t, "l'_t" + f);
        positive(p.sigma[a], "sigma" + f);
    }
    for (int j = 0; j < 3; ++j) {
        positive(p.geo.hp[j], "h" + std::to_string(j + 1) + "'");
        positive(q.sd_tau[j], "sd_tau" + std::to_string(j + 1));
    }
    for (int k = 0; k < 2; ++k) positive(q.sd_gamma[k], "sd_gamma" + std::to_string(k + 2));
    positive(q.sd_eta, "sd_eta");
    return c;
}

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }
double logit(double s) {
    s = std::clamp(s, 1e-12, 1.0 - 1e-12);
    return std::log(s / (1.0 - s));
}

}  // namespace

ParamLayout::ParamLayout(std::size_t mt, std::size_t n_zeta, bool het) : mt_(mt), n_zeta_(n_zeta), het_(het) {
    auto add = [&](const std::string& n) { names_.push_back(n); };
    for (const char* base : {"log_xi", "log_ls", "log_lt", "log_xi_u", "log_ls_u", "log_lt_u"})
        for (int a = 1; a <= 2; ++a) add(std::string(base) + std::to_string(a));
    for (int j = 1; j <= 3; ++j) add("mu_tau" + std::to_string(j));
    for (int j = 1; j <= 3; ++j) add("log_sd_tau" + std::to_string(j));
    for (int k = 2; k <= 3; ++k) add("mu_gamma" + std::to_string(k));
    for (int k = 2; k <= 3; ++k) add("log_sd_gamma" + std::to_string(k));
    add("mu_eta");
    add("log_sd_eta");
    for (int j = 1; j <= 3; ++j) add("logit_hp" + std::to_string(j));
    for (int k = 2; k <= 3; ++k) add("alpha" + std::to_string(k));
    for (std::size_t i = 0; i < mt_; ++i) add("t_u" + std::to_string(i + 1));
    for (int a = 1; a <= 2; ++a) add("log_sigma" + std::to_string(a));
    if (het_)
        for (int a = 1; a <= 2; ++a) {
            add("logit_sigma2_qd" + std::to_string(a));
            add("logit_sigma2_d" + std::to_string(a));
        }
    for (std::size_t i = 0; i < n_zeta_; ++i) add("zeta" + std::to_string(i + 1));
}

Vec ParamLayout::pack(const ModelParams& p) const {
    if (p.t_inducing.size() != mt_) fail(ErrorKind::Internal, "inducing time count does not match layout");
    if (static_cast<std::size_t>(p.local.zeta.size()) != n_zeta_) fail(ErrorKind::Internal, "zeta count mismatch");
    Vec z(static_cast<Eigen::Index>(size()));
    Eigen::Index i = 0;
    for (int a = 0; a < 2; ++a) z[i++] = std::log(p.kernels.xi(a));
    for (int a = 0; a < 2; ++a) z[i++] = std::log(p.kernels.latent[a].l_s);
    for (int a = 0; a < 2; ++a) z[i++] = std::log(p.kernels.latent[a].l_t);
    for (int a = 0; a < 2; ++a) z[i++] = std::log(p.kernels.xi_inducing(a));
    for (int a = 0; a < 2; ++a) z[i++] = std::log(p.kernels.inducing[a].l_s);
    for (int a = 0; a < 2; ++a) z[i++] = std::log(p.kernels.inducing[a].l_t);
    for (int j = 0; j < 3; ++j) z[i++] = p.q.mu_tau[j];
    for (int j = 0; j < 3; ++j) z[i++] = std::log(p.q.sd_tau[j]);
    for (int k = 0; k < 2; ++k) z[i++] = p.q.mu_gamma[k];
    for (int k = 0; k < 2; ++k) z[i++] = std::log(p.q.sd_gamma[k]);
    z[i++] = p.q.mu_eta;
    z[i++] = std::log(p.q.sd_eta);
    const auto U = placement_upper(p.kernels, p.q);
    for (int j = 0; j < 3; ++j) z[i++] = logit(p.geo.hp[j] / U[j]);
    for (int k = 0; k < 2; ++k) z[i++] = p.geo.alpha[k];
    for (double t : p.t_inducing) z[i++] = t;
    for (int a = 0; a < 2; ++a) z[i++] = std::log(p.sigma[a]);
    if (het_)
        for (int a = 0; a < 2; ++a) {
            const double cap = p.sigma[a] * p.sigma[a] + kHetOffset;
            z[i++] = logit(p.local.sigma2_qd[a] / cap);
            z[i++] = logit(p.local.sigma2_d[a] / cap);
        }
    for (Eigen::Index k = 0; k < p.local.zeta.size(); ++k) z[i++] = p.local.zeta[k];
    return z;
}

ModelParams ParamLayout::unpack(const Vec& z) const {
    if (static_cast<std::size_t>(z.size()) != size()) fail(ErrorKind::Internal, "parameter vector length mismatch");
    ModelParams p;
    Eigen::Index i = 0;
    std::array<double, 2> xi, ls, lt, xiu, lsu, ltu;
    for (auto* arr : {&xi, &ls, &lt, &xiu, &lsu, &ltu})
        for (int a = 0; a < 2; ++a) (*arr)[a] = std::exp(z[i++]);
    p.kernels = KernelConfig::from_xi(xi, ls, lt, xiu, lsu, ltu);
    for (int j = 0; j < 3; ++j) p.q.mu_tau[j] = z[i++];
    for (int j = 0; j < 3; ++j) p.q.sd_tau[j] = std::exp(z[i++]);
    for (int k = 0; k < 2; ++k) p.q.mu_gamma[k] = z[i++];
    for (int k = 0; k < 2; ++k) p.q.sd_gamma[k] = std::exp(z[i++]);
    p.q.mu_eta = z[i++];
    p.q.sd_eta = std::exp(z[i++]);
    const auto U = placement_upper(p.kernels, p.q);
    for (int j = 0; j < 3; ++j) p.geo.hp[j] = std::max(U[j], 1e-12) * sigmoid(z[i++]);
    for (int k = 0; k < 2; ++k) p.geo.alpha[k] = z[i++];
    p.t_inducing.resize(mt_);
    for (std::size_t k = 0; k < mt_; ++k) p.t_inducing[k] = z[i++];
    for (int a = 0; a < 2; ++a) p.sigma[a] = std::exp(z[i++]);
    if (het_)
        for (int a = 0; a < 2; ++a) {
            const double cap = p.sigma[a] * p.sigma[a] + kHetOffset;
            p.local.sigma2_qd[a] = cap * sigmoid(z[i++]);
            p.local.sigma2_d[a] = cap * sigmoid(z[i++]);
        }
    p.local.zeta.resize(static_cast<Eigen::Index>(n_zeta_));
    for (std::size_t k = 0; k < n_zeta_; ++k) p.local.zeta[static_cast<Eigen::Index>(k)] = z[i++];
    return p;
}

}  // namespace streamgp
