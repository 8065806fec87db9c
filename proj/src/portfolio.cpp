#include "spt/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "spt/errors.hpp"
#include "spt/integrate.hpp"
#include "spt/random.hpp"

namespace spt {

Vec master_formula_weights(const Vec& grad_log_G, const Vec& x)
{
    const double s = x.dot(grad_log_G);
    return x.array() * (grad_log_G.array() + (1.0 - s));
}

Vec master_formula_weights(const GeneratedPortfolio& gp, const SimplexPoint& x)
{
    return master_formula_weights(gp.grad_log_G(x.coords()), x.coords());
}

Vec GeneratedPortfolio::weights(const SimplexPoint& x) const { return master_formula_weights(*this, x); }

GeneratedPortfolio market_portfolio()
{
    GeneratedPortfolio gp;
    gp.name = "market";
    gp.log_G = [](const Vec&) { return 0.0; };
    gp.grad_log_G = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
    gp.hess_log_G = [](const Vec& x) { return Mat(Mat::Zero(x.size(), x.size())); };
    gp.concave = Concavity::yes;
    return gp;
}

GeneratedPortfolio power_portfolio(const Vec& c)
{
    GeneratedPortfolio gp;
    gp.name = "power";
    gp.log_G = [c](const Vec& x) { return (c.array() * x.array().log()).sum(); };
    gp.grad_log_G = [c](const Vec& x) { return Vec(c.array() / x.array()); };
    gp.hess_log_G = [c](const Vec& x) { return Mat(Vec(-c.array() / x.array().square()).asDiagonal()); };
    // geometric means with total exponent at most 1 are concave
    gp.concave = ((c.array() >= 0.0).all() && c.sum() <= 1.0) ? Concavity::yes : Concavity::unknown;
    return gp;
}

GeneratedPortfolio equal_weight_portfolio(int d)
{
    GeneratedPortfolio gp = power_portfolio(Vec::Constant(d, 1.0 / d));
    gp.name = "equal_weight";
    return gp;
}

GeneratedPortfolio linear_portfolio(const Vec& w)
{
    GeneratedPortfolio gp;
    gp.name = "linear";
    gp.log_G = [w](const Vec& x) { return std::log(w.dot(x)); };
    gp.grad_log_G = [w](const Vec& x) { return Vec(w / w.dot(x)); };
    gp.hess_log_G = [w](const Vec& x) {
        const double s = w.dot(x);
        return Mat(-(w * w.transpose()) / (s * s));
    };
    gp.concave = (w.array() > 0.0).all() ? Concavity::yes : Concavity::unknown;
    return gp;
}

GeneratedPortfolio unconstrained_optimum(const ModelInputs& m)
{
    if (!m.has_gradient_drift())
        throw NotGradientError("unconstrained optimum needs a gradient drift field; model '" + m.name +
                               "' does not provide c^{-1} div c in closed form");
    const double offset = log_R(m, SimplexPoint::barycenter(m.dim));
    GeneratedPortfolio gp;
    gp.name = "unconstrained";
    gp.log_G = [m, offset](const Vec& x) { return log_R(m, SimplexPoint::unchecked(x)) - offset; };
    gp.grad_log_G = [m](const Vec& x) { return ell(m, SimplexPoint::unchecked(x)).comps(); };
    if (m.hess_log_R) gp.hess_log_G = m.hess_log_R;
    gp.smooth = true;
    return gp;
}

double lambda_dirichlet_closed_form(const DirichletParams& p)
{
    const Eigen::Index d = p.a.size();
    const Vec gamma = p.gamma();
    for (Eigen::Index i = 0; i < d; ++i)
        if (!(gamma[i] > 1.0)) throw InvalidParameter("closed-form growth rate needs gamma^i > 1 for every i");
    const double sum_a = p.a.sum();
    // log B(a + delta) - log B(a) for a perturbation touching coordinates i and j
    auto log_beta_ratio = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
        return std::lgamma(p.a[i] + di) - std::lgamma(p.a[i]) + std::lgamma(p.a[j] + dj) - std::lgamma(p.a[j]) -
               (std::lgamma(sum_a + di + dj) - std::lgamma(sum_a));
    };
    double total = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) {
            if (i == j || p.alpha(i, j) == 0.0) continue;
            const double t1 = gamma[i] * gamma[i] * std::exp(log_beta_ratio(i, p.b[i] - 2.0, j, p.b[j]));
            const double t2 = gamma[i] * gamma[j] * std::exp(log_beta_ratio(i, p.b[i] - 1.0, j, p.b[j] - 1.0));
            total += p.alpha(i, j) * (t1 - t2);
        }
    return total / 8.0;
}

namespace {

void require_two_assets(const ModelInputs& m)
{
    if (m.dim != 2) throw InvalidInput("two-asset routine called on a model with d = " + std::to_string(m.dim));
    if (!m.has_gradient_drift()) throw NotGradientError("two-asset routine needs a closed-form drift potential");
}

SimplexPoint pair_point(double x) { return SimplexPoint::unchecked((Vec(2) << x, 1.0 - x).finished()); }

double ell_tilde_at(const ModelInputs& m, double x)
{
    const Vec l = ell(m, pair_point(x)).comps();
    return l[0] - l[1];
}

double ell_tilde_prime_at(const ModelInputs& m, double x) { return hess_log_R_chart(m, pair_point(x))(0, 0); }

double bisect(const std::function<double(double)>& f, double lo, double hi)
{
    double flo = f(lo);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

std::vector<double> sign_changes(const std::function<double(double)>& f, std::size_t grid)
{
    std::vector<double> roots;
    double prev_x = 0.5 / grid, prev = f(prev_x);
    for (std::size_t k = 1; k < grid; ++k) {
        const double x = (k + 0.5) / grid;
        const double v = f(x);
        if ((v > 0.0) != (prev > 0.0)) roots.push_back(bisect(f, prev_x, x));
        prev_x = x;
        prev = v;
    }
    return roots;
}

bool in_unclipped_region(double l, double x) { return l > -1.0 / (1.0 - x) && l < 1.0 / x; }

} // namespace

TwoAssetSolution solve_two_asset_long_only(const ModelInputs& m)
{
    require_two_assets(m);
    TwoAssetSolution s;

    double log_z = 0.0;
    if (!m.density.normalized) {
        // normalize around the mode scale to keep exp() in range
        const double ref = m.density.log_p((Vec(2) << 0.5, 0.5).finished());
        const double z = integrate_1d([&](double x) { return std::exp(m.density.log_p(pair_point(x).coords()) - ref); }, 0.0, 1.0, 1e-10);
        if (!(z > 0.0)) throw NumericalError("two-asset density does not integrate to a positive value");
        log_z = ref + std::log(z);
    }
    s.density = [m, log_z](double x) { return std::exp(m.density.log_p(pair_point(x).coords()) - log_z); };
    s.ell_tilde = [m](double x) { return ell_tilde_at(m, x); };
    s.clipped = [m](double x) { return std::clamp(ell_tilde_at(m, x), -1.0 / (1.0 - x), 1.0 / x); };
    s.pi1 = [clip = s.clipped](double x) { return std::clamp(x + x * (1.0 - x) * clip(x), 0.0, 1.0); };

    const auto upper = sign_changes([&](double x) { return ell_tilde_at(m, x) - 1.0 / x; }, 4000);
    const auto lower = sign_changes([&](double x) { return ell_tilde_at(m, x) + 1.0 / (1.0 - x); }, 4000);
    s.breakpoints = {0.0, 1.0};
    s.breakpoints.insert(s.breakpoints.end(), upper.begin(), upper.end());
    s.breakpoints.insert(s.breakpoints.end(), lower.begin(), lower.end());
    std::sort(s.breakpoints.begin(), s.breakpoints.end());

    const double eps = 1e-9;
    s.x_lower = (ell_tilde_at(m, eps) > 1.0 / eps && !upper.empty()) ? upper.front() : 0.0;
    s.x_upper = (ell_tilde_at(m, 1.0 - eps) < -1.0 / eps && !lower.empty()) ? lower.back() : 1.0;
    s.theta1 = s.x_lower;
    s.theta2 = s.x_upper;
    if (const auto* p = std::get_if<DirichletParams>(&m.preset)) {
        const Vec g = p->gamma();
        const double den = g[0] + g[1] - 2.0;
        s.theta1 = std::clamp((g[0] - 2.0) / den, 0.0, 1.0);
        s.theta2 = std::clamp(g[0] / den, 0.0, 1.0);
    } else if (const auto* p = std::get_if<GenVolStabParams>(&m.preset)) {
        const double inv = 1.0 / (2.0 * p->beta);
        s.theta1 = p->gamma[1] > 2.0 ? std::pow((p->gamma[1] - 2.0) / p->gamma[0], inv) : 0.0;
        s.theta2 = p->gamma[0] > 2.0 ? std::pow(p->gamma[1] / (p->gamma[0] - 2.0), inv)
                                     : std::numeric_limits<double>::infinity();
    }

    auto weighted = [&](double x) {
        const double l = ell_tilde_at(m, x);
        const double c = m.cov(pair_point(x).coords())(0, 0);
        return std::make_pair(l, c * s.density(x));
    };
    s.lambda_unconstrained = 0.5 * integrate_1d_split(
                                       [&](double x) {
                                           const auto [l, w] = weighted(x);
                                           return l * l * w;
                                       },
                                       s.breakpoints);
    s.lambda_long = 0.5 * integrate_1d_split(
                              [&](double x) {
                                  const auto [l, w] = weighted(x);
                                  const double phi = std::clamp(l, -1.0 / (1.0 - x), 1.0 / x);
                                  return (l * l - (l - phi) * (l - phi)) * w;
                              },
                              s.breakpoints);
    s.clipped_mass = integrate_1d_split(
        [&](double x) { return in_unclipped_region(ell_tilde_at(m, x), x) ? 0.0 : s.density(x); }, s.breakpoints);
    s.concave_generated = concavity_criterion(m);

    GeneratedPortfolio gp;
    gp.name = "long_only";
    gp.grad_log_G = [clip = s.clipped](const Vec& x) { return Vec((Vec(2) << clip(x[0]), 0.0).finished()); };
    gp.log_G = [clip = s.clipped](const Vec& x) {
        return integrate_1d_split(clip, {std::min(0.5, x[0]), std::max(0.5, x[0])}, 1e-8) * (x[0] >= 0.5 ? 1.0 : -1.0);
    };
    gp.smooth = false;
    gp.concave = s.concave_generated ? Concavity::yes : Concavity::no;
    s.portfolio = std::move(gp);
    return s;
}

bool concavity_criterion(const ModelInputs& m, std::size_t grid)
{
    require_two_assets(m);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < grid; ++k) {
        const double x = static_cast<double>(k) / grid;
        const double l = ell_tilde_at(m, x);
        if (!in_unclipped_region(l, x)) continue;
        worst = std::max(worst, l * l + ell_tilde_prime_at(m, x));
    }
    return worst <= 1e-9;
}

bool sqrt_cp_concave(const ModelInputs& m, std::size_t grid)
{
    require_two_assets(m);
    // log sqrt(c p) = log R + const, so the second difference is taken on exp(log R - ref)
    auto log_root = [&](double x) { return log_R(m, pair_point(x)); };
    for (std::size_t k = 1; k < grid; ++k) {
        const double x = static_cast<double>(k) / grid;
        const double l = ell_tilde_at(m, x);
        if (!in_unclipped_region(l, x)) continue;
        const double h = 1e-4 * std::min(x, 1.0 - x);
        const double ref = log_root(x);
        const double second =
            (std::exp(log_root(x + h) - ref) - 2.0 + std::exp(log_root(x - h) - ref)) / (h * h);
        // relative second derivative equals ell~^2 + ell~'; allow finite-difference noise
        if (second > 1e-5 * (1.0 + l * l)) return false;
    }
    return true;
}

GrowthRateReport lambda_mc(const ModelInputs& m, const GeneratedPortfolio& gp, std::size_t n, std::uint64_t seed,
                           std::optional<double> closed_form)
{
    const WeightedSample sample = draw_weighted(m, n, seed);
    const bool with_ibp = gp.smooth && (gp.hess_log_G || gp.log_G);

    struct Terms {
        double quadratic = 0.0;
        double ibp = 0.0;
    };
    const auto terms = map_points<Terms>(sample.points, [&](const SimplexPoint& x) {
        const Mat c = covariance(m, x);
        const Vec l = ell(m, x).canonical();
        const Vec pi = gp.weights(x);
        Vec h = pi.array() / x.coords().array();
        h.array() -= h.mean();
        const Vec r = l - h;
        Terms t;
        t.quadratic = 0.5 * (l.dot(c * l) - r.dot(c * r));
        if (with_ibp) {
            Vec g = gp.grad_log_G(x.coords());
            g.array() -= g.mean();
            const Mat hess = gp.hess_log_G ? ambient_to_chart_hessian(gp.hess_log_G(x.coords())) : hessian_fd(gp.log_G, x);
            t.ibp = -(generator(c, hess) + 0.5 * g.dot(c * g));
        }
        return t;
    });

    std::vector<double> quad(terms.size()), ibp(terms.size());
    for (std::size_t k = 0; k < terms.size(); ++k) {
        quad[k] = terms[k].quadratic;
        ibp[k] = terms[k].ibp;
        if (!std::isfinite(quad[k])) throw NumericalError("growth-rate integrand not finite at sample " + std::to_string(k));
    }
    GrowthRateReport rep;
    rep.method = sample.uniform ? "monte_carlo" : "self_normalized_importance_sampling";
    rep.samples = n;
    rep.effective_samples = sample.effective_size();
    const MeanEstimate q = weighted_mean(sample, quad);
    rep.lambda_mc = q.mean;
    rep.stderr_ = q.stderr_;
    rep.divergent_variance = q.mean != 0.0 && q.stderr_ / std::abs(q.mean) > 0.5;
    if (with_ibp) {
        rep.ibp = weighted_mean(sample, ibp);
        rep.ibp_discrepancy = rep.ibp->mean - q.mean;
    }
    rep.lambda_closed_form = closed_form;
    if (closed_form) rep.consistent = std::abs(*closed_form - q.mean) <= 4.0 * q.stderr_;
    return rep;
}

bool is_rank_based_portfolio(const GeneratedPortfolio& gp, int d, std::size_t n_checks, std::uint64_t seed)
{
    const auto pts = sample_dirichlet(Vec::Ones(d), n_checks, seed);
    Rng rng(seed, 1);
    std::vector<int> perm(d);
    for (const auto& x : pts) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        Vec y(d);
        for (int i = 0; i < d; ++i) y[i] = x[perm[i]];
        const Vec wx = gp.weights(x);
        const Vec wy = gp.weights(SimplexPoint::unchecked(y));
        for (int i = 0; i < d; ++i)
            if (std::abs(wy[i] - wx[perm[i]]) > 1e-9) return false;
    }
    return true;
}

} // namespace spt
