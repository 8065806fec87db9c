#include "spt/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spt/errors.hpp"
#include "spt/parallel.hpp"
#include "spt/random.hpp"

namespace spt {

SimplexPoint::SimplexPoint(Vec coords)
{
    if (coords.size() < 2) throw InvalidInput("simplex point needs at least 2 coordinates");
    for (Eigen::Index i = 0; i < coords.size(); ++i) {
        if (!std::isfinite(coords[i]) || coords[i] <= 0.0)
            throw InvalidInput("simplex coordinate " + std::to_string(i) + " is not strictly positive");
    }
    const double s = coords.sum();
    if (std::abs(s - 1.0) > 1e-9) throw InvalidInput("simplex coordinates do not sum to 1");
    coords_ = coords / s;
}

SimplexPoint SimplexPoint::unchecked(Vec coords) { return SimplexPoint(std::move(coords), Unchecked{}); }

SimplexPoint SimplexPoint::barycenter(int d) { return SimplexPoint(Vec::Constant(d, 1.0 / d), Unchecked{}); }

Vec TangentVector::canonical() const { return comps_.array() - comps_.mean(); }

bool TangentVector::equivalent(const TangentVector& other, double tol) const
{
    if (comps_.size() != other.comps_.size()) return false;
    return (canonical() - other.canonical()).cwiseAbs().maxCoeff() <= tol;
}

bool TangentVector::is_zero(double tol) const { return canonical().cwiseAbs().maxCoeff() <= tol; }

Vec project_to_closed_simplex(const Vec& y)
{
    const Eigen::Index d = y.size();
    std::vector<double> u(y.data(), y.data() + d);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        cum += u[k];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (u[k] - t > 0.0) theta = t;
    }
    return (y.array() - theta).max(0.0);
}

SimplexPoint project_to_simplex(const Vec& y, double eps_floor)
{
    if (!y.allFinite()) throw InvalidInput("project_to_simplex: non-finite input");
    if (y.size() < 2) throw InvalidInput("project_to_simplex: need at least 2 coordinates");
    Vec w = project_to_closed_simplex(y).cwiseMax(eps_floor);
    w /= w.sum();
    return SimplexPoint::unchecked(std::move(w));
}

RankVector rank(const SimplexPoint& x)
{
    const int d = x.dim();
    RankVector r;
    r.perm.resize(d);
    std::iota(r.perm.begin(), r.perm.end(), 0);
    std::stable_sort(r.perm.begin(), r.perm.end(), [&](int a, int b) { return x[a] > x[b]; });
    r.sorted.resize(d);
    for (int k = 0; k < d; ++k) r.sorted[k] = x[r.perm[k]];
    return r;
}

std::vector<SimplexPoint> sample_dirichlet(const Vec& alpha, std::size_t n, std::uint64_t seed)
{
    if (alpha.size() < 2) throw InvalidParameter("Dirichlet needs at least 2 parameters");
    for (Eigen::Index i = 0; i < alpha.size(); ++i)
        if (!(alpha[i] > 0.0) || !std::isfinite(alpha[i]))
            throw InvalidParameter("Dirichlet parameter " + std::to_string(i) + " must be positive");
    if (n == 0) throw InvalidParameter("sample count must be at least 1");

    constexpr std::size_t chunk = 1024;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<std::vector<SimplexPoint>> parts(n_chunks);
    parallel_chunks(n_chunks, [&](std::size_t c) {
        Rng rng(seed, c);
        const std::size_t begin = c * chunk, end = std::min(n, begin + chunk);
        auto& out = parts[c];
        out.reserve(end - begin);
        Vec g(alpha.size());
        for (std::size_t s = begin; s < end; ++s) {
            for (Eigen::Index i = 0; i < alpha.size(); ++i)
                g[i] = std::max(rng.gamma(alpha[i]), std::numeric_limits<double>::min());
            out.push_back(SimplexPoint::unchecked(g / g.sum()));
        }
    });
    std::vector<SimplexPoint> all;
    all.reserve(n);
    for (auto& p : parts)
        for (auto& x : p) all.push_back(std::move(x));
    return all;
}

double dirichlet_log_density(const Vec& alpha, const Vec& x)
{
    double v = std::lgamma(alpha.sum());
    for (Eigen::Index i = 0; i < alpha.size(); ++i) v += (alpha[i] - 1.0) * std::log(x[i]) - std::lgamma(alpha[i]);
    return v;
}

TangentVector grad_fd(const ScalarField& f, const SimplexPoint& x, std::optional<double> h)
{
    const int d = x.dim();
    const double step = h.value_or(1e-6 * x.min_coord());
    if (!(step > 0.0)) throw InvalidParameter("grad_fd: step must be positive");
    if (x.min_coord() <= step) throw BoundaryError("grad_fd: point closer to the boundary than the step");
    Vec out = Vec::Zero(d);
    Vec xp = x.coords(), xm = x.coords();
    for (int i = 0; i < d - 1; ++i) {
        xp = x.coords();
        xm = x.coords();
        xp[i] += step;
        xp[d - 1] -= step;
        xm[i] -= step;
        xm[d - 1] += step;
        out[i] = (f(xp) - f(xm)) / (2.0 * step);
    }
    return TangentVector(std::move(out));
}

Mat hessian_fd(const ScalarField& f, const SimplexPoint& x, std::optional<double> h)
{
    const int d = x.dim();
    const int n = d - 1;
    const double step = h.value_or(1e-4 * x.min_coord());
    if (!(step > 0.0)) throw InvalidParameter("hessian_fd: step must be positive");
    if (x.min_coord() <= 2.0 * step) throw BoundaryError("hessian_fd: point closer to the boundary than the step");
    auto shifted = [&](int i, double si, int j, double sj) {
        Vec y = x.coords();
        y[i] += si;
        y[d - 1] -= si;
        y[j] += sj;
        y[d - 1] -= sj;
        return f(y);
    };
    const double f0 = f(x.coords());
    Mat H(n, n);
    for (int i = 0; i < n; ++i) {
        H(i, i) = (shifted(i, step, i, 0.0) - 2.0 * f0 + shifted(i, -step, i, 0.0)) / (step * step);
        for (int j = i + 1; j < n; ++j) {
            const double v = (shifted(i, step, j, step) - shifted(i, step, j, -step) - shifted(i, -step, j, step) +
                              shifted(i, -step, j, -step)) /
                             (4.0 * step * step);
            H(i, j) = v;
            H(j, i) = v;
        }
    }
    return H;
}

Mat ambient_to_chart_hessian(const Mat& h)
{
    const Eigen::Index d = h.rows();
    const Eigen::Index n = d - 1;
    // (e_i - e_d)^T H (e_j - e_d)
    Mat out = h.topLeftCorner(n, n);
    out.colwise() -= h.col(d - 1).head(n);
    out.rowwise() -= h.row(d - 1).head(n);
    out.array() += h(d - 1, d - 1);
    return out;
}

} // namespace spt
