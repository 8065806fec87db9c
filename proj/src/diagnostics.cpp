#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "spt/errors.hpp"
#include "spt/integrate.hpp"
#include "spt/model.hpp"
#include "spt/random.hpp"

namespace spt {

namespace {

std::string failing_indices(const std::vector<int>& idx)
{
    std::ostringstream os;
    for (std::size_t k = 0; k < idx.size(); ++k) os << (k ? ", " : "") << idx[k] + 1;
    return os.str();
}

template <class Pred>
void check_each(std::vector<std::string>& out, const Vec& v, Pred ok, const std::string& condition)
{
    std::vector<int> bad;
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!ok(v[i])) bad.push_back(static_cast<int>(i));
    if (!bad.empty()) out.push_back(condition + " violated for i = " + failing_indices(bad));
}

bool all_equal(const Vec& v) { return (v.array() == v[0]).all(); }

bool off_diagonal_equal(const Mat& a)
{
    const Eigen::Index d = a.rows();
    const double ref = a(0, 1);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            if (i != j && a(i, j) != ref) return false;
    return true;
}

Vec permute(const Vec& x, const std::vector<int>& perm)
{
    Vec y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = x[perm[i]];
    return y;
}

/// LR/R and L log R at x.
std::pair<double, double> generator_of_R(const ModelInputs& m, const SimplexPoint& x)
{
    const Mat c = covariance(m, x);
    const Vec l = ell(m, x).canonical();
    const double l_log_r = generator(c, hess_log_R_chart(m, x));
    return {l_log_r + 0.5 * l.dot(c * l), l_log_r};
}

} // namespace

std::vector<std::string> preset_condition_violations(const ModelInputs& m)
{
    std::vector<std::string> out;
    if (const auto* p = std::get_if<DirichletParams>(&m.preset)) {
        check_each(out, p->gamma(), [](double g) { return g > 1.0; }, "gamma^i > 1");
    } else if (const auto* p = std::get_if<GenVolStabParams>(&m.preset)) {
        const double bound = std::max(2.0 * (1.0 - p->beta), 1.0);
        check_each(out, p->gamma, [bound](double g) { return g > bound; }, "gamma^i > max{2(1-beta), 1}");
    } else if (const auto* p = std::get_if<LogitNormalParams>(&m.preset)) {
        check_each(out, p->a, [](double v) { return v > 2.0; }, "a^i > 2");
        check_each(out, p->b, [](double v) { return v > 2.0; }, "b^i > 2");
    }
    return out;
}

bool is_rank_based_spec(const ModelInputs& m, std::size_t n_checks, std::uint64_t seed)
{
    if (const auto* p = std::get_if<DirichletParams>(&m.preset))
        return all_equal(p->a) && all_equal(p->b) && off_diagonal_equal(p->alpha);
    if (const auto* p = std::get_if<LogitNormalParams>(&m.preset))
        return all_equal(p->a) && all_equal(p->b) && all_equal(p->mu) && off_diagonal_equal(p->alpha) &&
               all_equal(p->sigma.diagonal()) && off_diagonal_equal(p->sigma);
    if (const auto* p = std::get_if<GenVolStabParams>(&m.preset)) {
        if (!all_equal(p->gamma)) return false;
        if (!p->k_tilde) return true;
    }

    // numerical check: c(Px) = P c(x) P^T and p(Px) = p(x)
    const int d = m.dim;
    const auto pts = sample_dirichlet(Vec::Constant(d, 2.0), n_checks, seed);
    Rng rng(seed, 1);
    std::vector<int> perm(d);
    for (const auto& x : pts) {
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        const Vec y = permute(x.coords(), perm);
        const Mat cx = m.cov(x.coords()), cy = m.cov(y);
        const double scale = std::max(1e-300, cx.cwiseAbs().maxCoeff());
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                if (std::abs(cy(i, j) - cx(perm[i], perm[j])) > 1e-9 * scale) return false;
        const double lx = m.density.log_p(x.coords()), ly = m.density.log_p(y);
        if (std::abs(lx - ly) > 1e-9 * std::max(1.0, std::abs(lx))) return false;
    }
    return true;
}

DiagnosticsReport assumption_diagnostics(const ModelInputs& m, std::size_t n_samples, std::uint64_t seed)
{
    DiagnosticsReport r;
    const int d = m.dim;
    const std::size_t half = std::max<std::size_t>(n_samples / 2, 16);
    const SimplexPoint bary = SimplexPoint::barycenter(d);

    r.violated_conditions = preset_condition_violations(m);
    r.graph_connected = check_graph_connectivity(m, bary).connected;
    if (!r.graph_connected) r.violated_conditions.push_back("graph condition (connected covariance graph) violated at the barycenter");

    if (!m.has_gradient_drift()) {
        r.failures.push_back("no closed-form potential for c^{-1} div c; R is undefined");
        r.pass = false;
        return r;
    }

    // sampled lower bound of LR/R over uniform and density-matched points
    auto uniform = sample_dirichlet(Vec::Ones(d), half, seed);
    const WeightedSample matched = draw_weighted(m, half, seed + 1);
    std::vector<SimplexPoint> all = uniform;
    all.insert(all.end(), matched.points.begin(), matched.points.end());
    r.samples = all.size();
    r.sampled_min_coordinate = std::numeric_limits<double>::infinity();
    for (const auto& x : all) r.sampled_min_coordinate = std::min(r.sampled_min_coordinate, x.min_coord());

    const auto values = map_points<std::pair<double, double>>(all, [&](const SimplexPoint& x) {
        if (x.min_coord() < 1e-12) return std::make_pair(std::numeric_limits<double>::quiet_NaN(), 0.0);
        return generator_of_R(m, x);
    });
    r.min_LR_over_R = std::numeric_limits<double>::infinity();
    for (const auto& v : values) {
        if (std::isnan(v.first)) continue;
        if (!std::isfinite(v.first) || !std::isfinite(v.second)) r.nan_flag = true;
        r.min_LR_over_R = std::min(r.min_LR_over_R, v.first);
    }

    std::vector<double> abs_lrr(matched.points.size()), abs_llr(matched.points.size());
    for (std::size_t k = 0; k < matched.points.size(); ++k) {
        const auto& v = values[uniform.size() + k];
        abs_lrr[k] = std::isnan(v.first) ? 0.0 : std::abs(v.first);
        abs_llr[k] = std::isnan(v.first) ? 0.0 : std::abs(v.second);
    }
    r.abs_LR_over_R = weighted_mean(matched, abs_lrr);
    r.abs_L_log_R = weighted_mean(matched, abs_llr);

    // R along rays from the barycenter to each face centre and each vertex
    r.boundary_decay = true;
    r.max_boundary_ratio = 0.0;
    const double log_r0 = log_R(m, bary);
    std::vector<Vec> targets;
    for (int i = 0; i < d; ++i) {
        Vec face = Vec::Constant(d, 1.0 / (d - 1));
        face[i] = 0.0;
        targets.push_back(face);
        targets.push_back(Vec::Unit(d, i));
    }
    for (const Vec& target : targets) {
        double prev = log_r0;
        bool decreasing = true;
        double last = log_r0;
        for (int k = 1; k <= 8; ++k) {
            const double t = 1.0 - std::pow(10.0, -k);
            const Vec y = (1.0 - t) * bary.coords() + t * target;
            last = log_R(m, SimplexPoint::unchecked(y));
            if (k >= 5 && !(last < prev)) decreasing = false;
            prev = last;
        }
        if (!std::isfinite(last) && last > 0) r.nan_flag = true;
        const double ratio = std::exp(last - log_r0);
        r.max_boundary_ratio = std::max(r.max_boundary_ratio, ratio);
        if (!decreasing || !(ratio < 0.1)) r.boundary_decay = false;
    }

    // truncated integrals of |LR/R| p over {min x >= floor} under a boundary-heavy proposal
    const WeightedSample heavy = draw_weighted(m, Vec::Constant(d, 0.25), std::max<std::size_t>(n_samples, 1000), seed + 2);
    r.floors = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
    const auto heavy_vals = map_points<double>(heavy.points, [&](const SimplexPoint& x) {
        if (x.min_coord() < r.floors.back()) return 0.0;
        return std::abs(generator_of_R(m, x).first);
    });
    r.truncated_integral.assign(r.floors.size(), 0.0);
    for (std::size_t k = 0; k < heavy.points.size(); ++k) {
        const double mc = heavy.points[k].min_coord();
        if (!std::isfinite(heavy_vals[k])) {
            r.nan_flag = true;
            continue;
        }
        for (std::size_t f = 0; f < r.floors.size(); ++f)
            if (mc >= r.floors[f]) r.truncated_integral[f] += heavy.weights[k] * heavy_vals[k];
    }
    const std::size_t nf = r.floors.size();
    const double inc_last = r.truncated_integral[nf - 1] - r.truncated_integral[nf - 2];
    const double inc_prev = r.truncated_integral[nf - 2] - r.truncated_integral[nf - 3];
    const double inc_prev2 = r.truncated_integral[nf - 3] - r.truncated_integral[nf - 4];
    r.divergence_suspected = inc_last > 0.0 && inc_last >= 0.8 * inc_prev && inc_prev >= 0.8 * inc_prev2;

    for (const auto& v : r.violated_conditions) r.failures.push_back(v);
    if (!r.boundary_decay) r.failures.push_back("R does not decay to 0 along every ray to the boundary");
    if (!std::isfinite(r.min_LR_over_R)) r.failures.push_back("LR/R not bounded below on the sample");
    if (r.divergence_suspected)
        r.failures.push_back("truncated integral of |LR/R| p keeps growing as the boundary floor shrinks");
    if (!std::isfinite(r.abs_LR_over_R.mean) || !std::isfinite(r.abs_L_log_R.mean))
        r.failures.push_back("integral estimates are not finite");
    if (r.nan_flag) r.failures.push_back("non-finite evaluations encountered");
    r.pass = r.failures.empty();
    return r;
}

} // namespace spt
