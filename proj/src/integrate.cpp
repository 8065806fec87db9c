#include "spt/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "spt/errors.hpp"

namespace spt {

double WeightedSample::effective_size() const
{
    double s2 = 0.0;
    for (double w : weights) s2 += w * w;
    return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

WeightedSample draw_weighted(const ModelInputs& m, std::size_t n, std::uint64_t seed)
{
    WeightedSample s = draw_weighted(m, m.proposal_alpha, n, seed);
    return s;
}

WeightedSample draw_weighted(const ModelInputs& m, const Vec& proposal, std::size_t n, std::uint64_t seed)
{
    WeightedSample s;
    s.points = sample_dirichlet(proposal, n, seed);
    const bool exact = m.proposal_is_density && proposal.size() == m.proposal_alpha.size() &&
                       (proposal - m.proposal_alpha).cwiseAbs().maxCoeff() == 0.0;
    if (exact) {
        s.uniform = true;
        s.weights.assign(n, 1.0 / static_cast<double>(n));
        return s;
    }
    s.uniform = false;
    auto logw = map_points<double>(s.points, [&](const SimplexPoint& x) {
        return m.density.log_p(x.coords()) - dirichlet_log_density(proposal, x.coords());
    });
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logw)
        if (std::isfinite(v)) mx = std::max(mx, v);
    if (!std::isfinite(mx)) throw NumericalError("importance weights are all zero or non-finite");
    double total = 0.0;
    s.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.weights[i] = std::isfinite(logw[i]) ? std::exp(logw[i] - mx) : 0.0;
        total += s.weights[i];
    }
    for (double& w : s.weights) w /= total;
    return s;
}

MeanEstimate weighted_mean(const WeightedSample& s, const std::vector<double>& f)
{
    if (f.size() != s.weights.size()) throw InvalidInput("weighted_mean: size mismatch");
    const std::size_t n = f.size();
    MeanEstimate e;
    if (s.uniform) {
        double sum = 0.0;
        for (double v : f) sum += v;
        e.mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (double v : f) ss += (v - e.mean) * (v - e.mean);
        e.stderr_ = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
        return e;
    }
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += s.weights[i] * f[i];
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += s.weights[i] * s.weights[i] * (f[i] - mean) * (f[i] - mean);
    e.mean = mean;
    e.stderr_ = std::sqrt(var);
    return e;
}

namespace {

double integrate_piece(const std::function<double(double)>& f, double a, double b, double tol, double& err)
{
    err = 0.0;
    if (!(b > a)) return 0.0;
    double v = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-10, &err);
    if (!std::isfinite(v) || err > tol) {
        // endpoint singularities
        boost::math::quadrature::tanh_sinh<double> ts;
        double l1 = 0.0;
        // Points rounding onto an endpoint carry no mass for an integrable singularity.
        const double edge = 1e-12 * (b - a);
        v = ts.integrate(
            [&](double t) {
                const double y = f(t);
                return (!std::isfinite(y) && (t - a < edge || b - t < edge)) ? 0.0 : y;
            },
            a, b, 1e-10, &err, &l1);
    }
    if (!std::isfinite(v)) throw NumericalError("quadrature produced a non-finite value");
    return v;
}

void check_error(double err, double tol)
{
    if (err > tol) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", err);
        throw NumericalError(std::string("quadrature did not reach tolerance (error estimate ") + buf + ")");
    }
}

} // namespace

double integrate_1d(const std::function<double(double)>& f, double a, double b, double tol)
{
    double err = 0.0;
    const double v = integrate_piece(f, a, b, tol, err);
    check_error(err, tol);
    return v;
}

double integrate_1d_split(const std::function<double(double)>& f, std::vector<double> breaks, double tol)
{
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    const double piece_tol = tol / std::max<std::size_t>(1, breaks.size() - 1);
    double total = 0.0, total_err = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        double err = 0.0;
        total += integrate_piece(f, breaks[k], breaks[k + 1], piece_tol, err);
        total_err += err;
    }
    check_error(total_err, tol);
    return total;
}

} // namespace spt
