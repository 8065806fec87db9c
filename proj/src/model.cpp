#include "spt/model.hpp"

#include <cmath>
#include <memory>
#include <numeric>

#include "spt/errors.hpp"
#include "spt/random.hpp"

namespace spt {

namespace {

double central_1d(const std::function<double(double)>& f, double t)
{
    // five-point stencil
    const double h = 5e-4 * std::min(t, 1.0 - t);
    return (f(t - 2.0 * h) - 8.0 * f(t - h) + 8.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h);
}

double second_1d(const std::function<double(double)>& f, double t)
{
    const double h = 2e-3 * std::min(t, 1.0 - t);
    return (-f(t - 2.0 * h) + 16.0 * f(t - h) - 30.0 * f(t) + 16.0 * f(t + h) - f(t + 2.0 * h)) / (12.0 * h * h);
}

double log_factor(const UnivariateFactor& f, double t) { return std::log(f.value(t)); }

double dlog_factor(const UnivariateFactor& f, double t)
{
    if (f.dlog) return f.dlog(t);
    return central_1d([&](double s) { return std::log(f.value(s)); }, t);
}

Vec fd_gradient(const ScalarField& f, const Vec& x) { return grad_fd(f, SimplexPoint::unchecked(x)).comps(); }

void require(bool ok, const std::string& what)
{
    if (!ok) throw InvalidParameter(what);
}

void check_pair_matrix(const Mat& alpha, int d, const std::string& label)
{
    require(alpha.rows() == d && alpha.cols() == d, label + " must be " + std::to_string(d) + "x" + std::to_string(d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            require(std::isfinite(alpha(i, j)) && alpha(i, j) >= 0.0, label + " entries must be non-negative");
            require(alpha(i, j) == alpha(j, i), label + " must be symmetric");
        }
}

Mat zero_row_sum(Mat c)
{
    for (Eigen::Index i = 0; i < c.rows(); ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < c.cols(); ++j)
            if (j != i) s += c(i, j);
        c(i, i) = -s;
    }
    return c;
}

} // namespace

double TractableSpec::pair(int i, int j, const Vec& x) const
{
    if (pair_constants) return (*pair_constants)(i, j);
    return f_pair(i, j, x);
}

void TractableSpec::validate() const
{
    require(dim >= 2, "dimension must be at least 2");
    require(static_cast<int>(f.size()) == dim, "need one factor f_i per asset");
    require(pair_constants.has_value() || static_cast<bool>(f_pair), "pair functions f_ij missing");
    for (int i = 0; i < dim; ++i) {
        require(static_cast<bool>(f[i].value), "factor f_" + std::to_string(i + 1) + " missing");
        for (double t : {1e-3, 0.25, 0.5, 0.75, 0.999})
            require(f[i].value(t) > 0.0, "factor f_" + std::to_string(i + 1) + " must be positive on (0,1)");
        require(std::abs(f[i].value(1e-6)) <= 1e-3, "factor f_" + std::to_string(i + 1) + " must vanish at 0");
    }
    const Vec bary = Vec::Constant(dim, 1.0 / dim);
    Vec probe(dim);
    for (int k = 0; k < dim; ++k) probe[k] = (k + 1.0);
    probe /= probe.sum();
    for (const Vec& x : {bary, probe})
        for (int i = 0; i < dim; ++i)
            for (int j = i + 1; j < dim; ++j) {
                const double a = pair(i, j, x), b = pair(j, i, x);
                require(a >= 0.0 && b >= 0.0, "pair functions f_ij must be non-negative");
                require(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)), "pair functions f_ij must be symmetric");
            }
}

ModelInputs make_tractable(TractableSpec spec, InvariantDensity density, Vec proposal_alpha, std::string name)
{
    spec.validate();
    require(static_cast<bool>(density.log_p), "density log_p missing");
    const int d = spec.dim;
    require(proposal_alpha.size() == d, "proposal must have one parameter per asset");

    ModelInputs m;
    m.dim = d;
    m.name = std::move(name);
    m.spec = spec;
    m.density = std::move(density);
    m.proposal_alpha = std::move(proposal_alpha);

    auto s = std::make_shared<const TractableSpec>(std::move(spec));
    m.cov = [s](const Vec& x) {
        const int d = s->dim;
        Vec fv(d);
        for (int i = 0; i < d; ++i) fv[i] = s->f[i].value(x[i]);
        const double g = s->log_g ? std::exp(s->log_g(x)) : 1.0;
        Mat c(d, d);
        for (int i = 0; i < d; ++i) {
            c(i, i) = 0.0;
            for (int j = i + 1; j < d; ++j) {
                const double v = -s->pair(i, j, x) * fv[i] * fv[j] * g;
                c(i, j) = v;
                c(j, i) = v;
            }
        }
        return zero_row_sum(std::move(c));
    };
    m.log_c_potential = [s](const Vec& x) {
        double v = s->log_g_at(x);
        for (int i = 0; i < s->dim; ++i) v += log_factor(s->f[i], x[i]);
        return v;
    };
    m.grad_log_c_potential = [s](const Vec& x) {
        Vec g(s->dim);
        if (s->grad_log_g)
            g = s->grad_log_g(x);
        else if (s->log_g)
            g = fd_gradient(s->log_g, x);
        else
            g.setZero();
        for (int i = 0; i < s->dim; ++i) g[i] += dlog_factor(s->f[i], x[i]);
        return g;
    };
    return m;
}

ModelInputs make_dirichlet(const DirichletParams& params)
{
    const int d = static_cast<int>(params.a.size());
    require(d >= 2, "dirichlet: need at least 2 assets");
    require(params.b.size() == d, "dirichlet: b must have one entry per asset");
    for (int i = 0; i < d; ++i) {
        require(params.a[i] > 0.0 && std::isfinite(params.a[i]), "dirichlet: a^i must be positive");
        require(params.b[i] >= 1.0 && std::isfinite(params.b[i]), "dirichlet: b^i must be at least 1");
    }
    check_pair_matrix(params.alpha, d, "dirichlet: alpha");

    const Vec a = params.a, b = params.b;
    const bool unit_b = (b.array() == 1.0).all();

    TractableSpec spec;
    spec.dim = d;
    for (int i = 0; i < d; ++i) {
        const double bi = b[i];
        spec.f.push_back({[bi](double t) { return std::pow(t, bi); }, [bi](double t) { return bi / t; },
                          [bi](double t) { return -bi / (t * t); }});
    }
    Mat alpha = params.alpha;
    alpha.diagonal().setZero();
    spec.pair_constants = alpha;

    double log_norm = std::lgamma(a.sum());
    for (int i = 0; i < d; ++i) log_norm -= std::lgamma(a[i]);

    InvariantDensity dens;
    dens.normalized = true;
    dens.log_p = [a, log_norm](const Vec& x) { return log_norm + ((a.array() - 1.0) * x.array().log()).sum(); };
    dens.grad_log_p = [a](const Vec& x) { return Vec((a.array() - 1.0) / x.array()); };

    ModelInputs m = make_tractable(std::move(spec), std::move(dens), a, "dirichlet");
    m.proposal_is_density = true;
    m.cov = [alpha, b, unit_b](const Vec& x) {
        const Eigen::Index d = x.size();
        const Vec f = unit_b ? x : Vec(x.array().pow(b.array()));
        Mat c(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            c(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < d; ++j) {
                const double v = -alpha(i, j) * f[i] * f[j];
                c(i, j) = v;
                c(j, i) = v;
            }
        }
        return zero_row_sum(std::move(c));
    };
    m.log_c_potential = [b](const Vec& x) { return (b.array() * x.array().log()).sum(); };
    m.grad_log_c_potential = [b](const Vec& x) { return Vec(b.array() / x.array()); };
    const Vec gamma = params.gamma();
    m.hess_log_R = [gamma](const Vec& x) {
        return Mat(Vec(-0.5 * gamma.array() / x.array().square()).asDiagonal());
    };
    m.preset = params;
    return m;
}

ModelInputs make_dirichlet(const Vec& a, double sigma2, std::optional<Vec> b)
{
    const Eigen::Index d = a.size();
    DirichletParams p;
    p.a = a;
    p.b = b.value_or(Vec::Ones(d));
    p.alpha = Mat::Constant(d, d, sigma2);
    p.alpha.diagonal().setZero();
    return make_dirichlet(p);
}

ModelInputs make_gen_vol_stab(const GenVolStabParams& params)
{
    const int d = static_cast<int>(params.gamma.size());
    require(d >= 2, "gen_vol_stab: need at least 2 assets");
    require(params.beta > 0.0 && std::isfinite(params.beta), "gen_vol_stab: beta must be positive");
    require(params.sigma2 > 0.0 && std::isfinite(params.sigma2), "gen_vol_stab: sigma2 must be positive");
    for (int i = 0; i < d; ++i) require(std::isfinite(params.gamma[i]), "gen_vol_stab: gamma must be finite");
    require(params.k_min > 0.0 && params.k_max >= params.k_min, "gen_vol_stab: need 0 < K_min <= K_max");

    const ScalarField k = params.k_tilde;
    if (k) {
        for (const auto& x : sample_dirichlet(Vec::Ones(d), 1000, 99)) {
            const double v = k(x.coords());
            require(v >= params.k_min && v <= params.k_max, "gen_vol_stab: K_tilde outside its declared bounds");
        }
    }
    const double beta = params.beta, s2 = params.sigma2;
    const Vec gamma = params.gamma;
    const double b_exp = d - gamma.sum() - 2.0 * (d - 1) * beta;
    const double e_exp = 2.0 * (1.0 + (d - 1) * beta) - d;

    ModelInputs m;
    m.dim = d;
    m.name = "gen_vol_stab";
    m.preset = params;
    m.cov = [k, beta, s2](const Vec& x) {
        const Eigen::Index d = x.size();
        const Vec y = x.array().pow(1.0 - 2.0 * beta);
        const double s = x.array().pow(2.0 - 2.0 * beta).sum();
        const double kk = k ? k(x) : 1.0;
        const double scale = s2 * kk * kk;
        Mat c(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            c(i, i) = 0.0;
            for (Eigen::Index j = i + 1; j < d; ++j) {
                const double v = -scale * x[i] * x[j] * (y[i] + y[j] - s);
                c(i, j) = v;
                c(j, i) = v;
            }
        }
        return zero_row_sum(std::move(c));
    };
    auto log_norm2b = [beta](const Vec& x) { return std::log(x.array().pow(2.0 * beta).sum()) / (2.0 * beta); };
    auto grad_log_norm2b = [beta](const Vec& x) {
        const Vec p = x.array().pow(2.0 * beta - 1.0);
        return Vec(p / (p.dot(x)));
    };
    auto log_k2 = [k](const Vec& x) { return k ? 2.0 * std::log(k(x)) : 0.0; };
    auto grad_log_k2 = [k, log_k2](const Vec& x) { return k ? fd_gradient(log_k2, x) : Vec(Vec::Zero(x.size())); };

    m.density.normalized = false;
    m.density.log_p = [=](const Vec& x) {
        return b_exp * log_norm2b(x) + ((gamma.array() + 2.0 * beta - 2.0) * x.array().log()).sum() - log_k2(x);
    };
    m.density.grad_log_p = [=](const Vec& x) {
        return Vec(b_exp * grad_log_norm2b(x).array() + (gamma.array() + 2.0 * beta - 2.0) / x.array() -
                   grad_log_k2(x).array());
    };
    m.log_c_potential = [=](const Vec& x) {
        return log_k2(x) + e_exp * log_norm2b(x) + 2.0 * (1.0 - beta) * x.array().log().sum();
    };
    m.grad_log_c_potential = [=](const Vec& x) {
        return Vec(grad_log_k2(x).array() + e_exp * grad_log_norm2b(x).array() + 2.0 * (1.0 - beta) / x.array());
    };
    const double lead = 1.0 - 0.5 * gamma.sum();
    m.hess_log_R = [=](const Vec& x) {
        const Eigen::Index d = x.size();
        const double s = x.array().pow(2.0 * beta).sum();
        const Vec p1 = x.array().pow(2.0 * beta - 1.0);
        Mat h = -(2.0 * beta / (s * s)) * (p1 * p1.transpose());
        for (Eigen::Index i = 0; i < d; ++i) h(i, i) += (2.0 * beta - 1.0) * std::pow(x[i], 2.0 * beta - 2.0) / s;
        h *= lead;
        for (Eigen::Index i = 0; i < d; ++i) h(i, i) -= 0.5 * gamma[i] / (x[i] * x[i]);
        return h;
    };
    m.proposal_alpha = (gamma.array() + 2.0 * beta - 1.0).max(0.05);
    m.proposal_is_density = false;
    return m;
}

ModelInputs make_logit_normal(const LogitNormalParams& params, std::optional<Vec> proposal_alpha)
{
    const int d = static_cast<int>(params.mu.size());
    require(d >= 2, "logit_normal: need at least 2 assets");
    require(params.a.size() == d && params.b.size() == d, "logit_normal: a and b need one entry per asset");
    require(params.sigma.rows() == d && params.sigma.cols() == d, "logit_normal: Sigma must be d x d");
    require(params.sigma.isApprox(params.sigma.transpose(), 1e-12), "logit_normal: Sigma must be symmetric");
    Eigen::LLT<Mat> llt(params.sigma);
    require(llt.info() == Eigen::Success, "logit_normal: Sigma must be positive definite");
    for (int i = 0; i < d; ++i)
        require(params.a[i] > 0.0 && params.b[i] > 0.0, "logit_normal: a^i and b^i must be positive");
    check_pair_matrix(params.alpha, d, "logit_normal: alpha");

    const Mat prec = llt.solve(Mat::Identity(d, d));
    const Vec mu = params.mu, a = params.a, b = params.b;

    TractableSpec spec;
    spec.dim = d;
    for (int i = 0; i < d; ++i) {
        const double ai = a[i], bi = b[i];
        spec.f.push_back({[ai, bi](double t) { return std::pow(t, ai) * std::pow(1.0 - t, bi); },
                          [ai, bi](double t) { return ai / t - bi / (1.0 - t); },
                          [ai, bi](double t) { return -ai / (t * t) - bi / ((1.0 - t) * (1.0 - t)); }});
    }
    Mat alpha = params.alpha;
    alpha.diagonal().setZero();
    spec.pair_constants = alpha;

    auto centred_logit = [mu](const Vec& x) { return Vec((x.array() / (1.0 - x.array())).log() - mu.array()); };

    InvariantDensity dens;
    dens.normalized = false;
    dens.log_p = [=](const Vec& x) {
        const Vec q = centred_logit(x);
        return -(x.array() * (1.0 - x.array())).log().sum() - 0.5 * q.dot(prec * q);
    };
    dens.grad_log_p = [=](const Vec& x) {
        const Vec s = prec * centred_logit(x);
        const Vec u = 1.0 / (x.array() * (1.0 - x.array()));
        return Vec(-(1.0 / x.array() - 1.0 / (1.0 - x.array())) - s.array() * u.array());
    };

    ModelInputs m = make_tractable(std::move(spec), std::move(dens), proposal_alpha.value_or(Vec::Ones(d)), "logit_normal");
    m.proposal_is_density = false;
    m.log_c_potential = [a, b](const Vec& x) {
        return (a.array() * x.array().log() + b.array() * (1.0 - x.array()).log()).sum();
    };
    m.grad_log_c_potential = [a, b](const Vec& x) { return Vec(a.array() / x.array() - b.array() / (1.0 - x.array())); };
    m.hess_log_R = [=](const Vec& x) {
        const Eigen::Index d = x.size();
        const Vec s = prec * centred_logit(x);
        const Vec u = 1.0 / (x.array() * (1.0 - x.array()));
        Mat h = -0.5 * (u.asDiagonal() * prec * u.asDiagonal());
        for (Eigen::Index i = 0; i < d; ++i) {
            const double xi = x[i];
            h(i, i) += 0.5 * (-(a[i] - 1.0) / (xi * xi) - (b[i] - 1.0) / ((1.0 - xi) * (1.0 - xi))) +
                       0.5 * s[i] * (1.0 - 2.0 * xi) * u[i] * u[i];
        }
        return h;
    };
    m.preset = params;
    return m;
}

ModelInputs make_two_asset(const TwoAssetParams& params)
{
    require(static_cast<bool>(params.c11) && static_cast<bool>(params.log_density), "two_asset: c11 and density required");
    const auto c11 = params.c11;
    const auto logp = params.log_density;
    ModelInputs m;
    m.dim = 2;
    m.name = "two_asset";
    m.preset = params;
    m.cov = [c11](const Vec& x) {
        const double v = c11(x[0]);
        Mat c(2, 2);
        c << v, -v, -v, v;
        return c;
    };
    m.density.normalized = false;
    m.density.log_p = [logp](const Vec& x) { return logp(x[0]); };
    m.density.grad_log_p = [logp](const Vec& x) { return Vec((Vec(2) << central_1d(logp, x[0]), 0.0).finished()); };
    auto logc = [c11](double t) { return std::log(c11(t)); };
    m.log_c_potential = [logc](const Vec& x) { return logc(x[0]); };
    m.grad_log_c_potential = [logc](const Vec& x) { return Vec((Vec(2) << central_1d(logc, x[0]), 0.0).finished()); };
    m.hess_log_R = [logc, logp](const Vec& x) {
        const double v = 0.5 * second_1d([&](double t) { return logp(t) + logc(t); }, x[0]);
        Mat h = Mat::Zero(2, 2);
        h(0, 0) = v;
        return h;
    };
    m.proposal_alpha = Vec::Ones(2);
    return m;
}

Mat covariance(const ModelInputs& m, const SimplexPoint& x) { return m.cov(x.coords()); }

Mat sqrt_covariance(const Mat& c)
{
    const Eigen::Index d = c.rows();
    if (d == 2) {
        const double s = std::sqrt(std::max(0.0, 0.5 * (c(0, 0) + c(1, 1)) / 2.0));
        Mat r(2, 2);
        r << s, -s, -s, s;
        return r;
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(c);
    if (es.info() != Eigen::Success) throw NumericalError("sqrt_covariance: eigensolver failed");
    Vec ev = es.eigenvalues();
    const double cutoff = 1e-13 * std::max(0.0, ev.maxCoeff());
    for (Eigen::Index i = 0; i < d; ++i) ev[i] = ev[i] > cutoff ? std::sqrt(ev[i]) : 0.0;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

Mat sqrt_covariance(const ModelInputs& m, const SimplexPoint& x) { return sqrt_covariance(covariance(m, x)); }

TangentVector c_inv_div_c(const ModelInputs& m, const SimplexPoint& x)
{
    if (m.grad_log_c_potential) return TangentVector(m.grad_log_c_potential(x.coords()));
    if (m.log_c_potential) return grad_fd(m.log_c_potential, x);
    return c_inv_div_c_fd(m, x);
}

Vec div_c_fd(const ModelInputs& m, const SimplexPoint& x, std::optional<double> h)
{
    const int d = x.dim();
    const double step = h.value_or(1e-6 * x.min_coord());
    if (x.min_coord() <= step) throw BoundaryError("div_c_fd: point closer to the boundary than the step");
    Vec div = Vec::Zero(d);
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            Vec xp = x.coords(), xm = x.coords();
            xp[j] += step;
            xp[i] -= step;
            xm[j] -= step;
            xm[i] += step;
            // derivative of c_ij along e_j - e_i; the (j, i) term runs along the opposite direction
            const double dv = (m.cov(xp)(i, j) - m.cov(xm)(i, j)) / (2.0 * step);
            div[i] += dv;
            div[j] -= dv;
        }
    return div;
}

TangentVector c_inv_div_c_fd(const ModelInputs& m, const SimplexPoint& x)
{
    const Mat c = covariance(m, x);
    const Vec rhs = div_c_fd(m, x);
    Eigen::SelfAdjointEigenSolver<Mat> es(c);
    if (es.info() != Eigen::Success) throw NumericalError("c_inv_div_c_fd: eigensolver failed");
    const Vec& ev = es.eigenvalues();
    const double cutoff = 1e-12 * std::max(0.0, ev.maxCoeff());
    Vec coef = es.eigenvectors().transpose() * rhs;
    for (Eigen::Index i = 0; i < ev.size(); ++i) coef[i] = ev[i] > cutoff ? coef[i] / ev[i] : 0.0;
    return TangentVector(es.eigenvectors() * coef);
}

double log_density(const ModelInputs& m, const SimplexPoint& x) { return m.density.log_p(x.coords()); }

TangentVector grad_log_density(const ModelInputs& m, const SimplexPoint& x)
{
    if (m.density.grad_log_p) return TangentVector(m.density.grad_log_p(x.coords()));
    return grad_fd(m.density.log_p, x);
}

TangentVector ell(const ModelInputs& m, const SimplexPoint& x)
{
    const Vec gp = grad_log_density(m, x).comps();
    const Vec gc = c_inv_div_c(m, x).comps();
    return TangentVector(0.5 * (gp + gc));
}

double log_R(const ModelInputs& m, const SimplexPoint& x)
{
    if (!m.log_c_potential)
        throw NotGradientError("model '" + m.name + "' has no closed-form potential for c^{-1} div c");
    return 0.5 * (m.density.log_p(x.coords()) + m.log_c_potential(x.coords()));
}

Mat hess_log_R_chart(const ModelInputs& m, const SimplexPoint& x)
{
    if (m.hess_log_R) return ambient_to_chart_hessian(m.hess_log_R(x.coords()));
    if (!m.log_c_potential)
        throw NotGradientError("model '" + m.name + "' has no closed-form potential for c^{-1} div c");
    return hessian_fd([&](const Vec& y) { return log_R(m, SimplexPoint::unchecked(y)); }, x);
}

double generator(const Mat& c, const Mat& chart_hessian)
{
    const Eigen::Index n = chart_hessian.rows();
    return 0.5 * c.topLeftCorner(n, n).cwiseProduct(chart_hessian).sum();
}

GraphReport check_graph_connectivity(const ModelInputs& m, const SimplexPoint& x)
{
    const int d = m.dim;
    Eigen::MatrixXi adj = Eigen::MatrixXi::Identity(d, d);
    const Mat c = m.spec ? Mat() : covariance(m, x);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            if (i == j) continue;
            const bool edge = m.spec ? m.spec->pair(i, j, x.coords()) > 0.0 : c(i, j) != 0.0;
            adj(i, j) = edge ? 1 : 0;
        }

    std::vector<int> parent(d);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int v) { return parent[v] == v ? v : parent[v] = find(parent[v]); };
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            if (adj(i, j)) parent[find(i)] = find(j);

    GraphReport r;
    r.component.assign(d, -1);
    std::vector<int> label_of_root(d, -1);
    for (int i = 0; i < d; ++i) {
        const int root = find(i);
        if (label_of_root[root] < 0) {
            label_of_root[root] = static_cast<int>(r.components.size());
            r.components.emplace_back();
        }
        r.component[i] = label_of_root[root];
        r.components[r.component[i]].push_back(i);
    }
    r.connected = r.components.size() == 1;

    // reachability: (I + A)^{d-1} > 0 entrywise, computed in boolean arithmetic
    Eigen::MatrixXi reach = adj;
    for (int k = 1; k < d - 1; ++k) reach = ((reach * adj).array() > 0).cast<int>();
    r.matrix_power_positive = (reach.array() > 0).all();
    return r;
}

} // namespace spt
