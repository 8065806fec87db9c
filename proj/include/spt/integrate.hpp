#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "spt/model.hpp"
#include "spt/parallel.hpp"

namespace spt {

/// Points drawn from a Dirichlet proposal with self-normalized importance weights for p.
struct WeightedSample {
    std::vector<SimplexPoint> points;
    std::vector<double> weights;  ///< non-negative, sum to 1
    bool uniform = true;
    double effective_size() const;
};

WeightedSample draw_weighted(const ModelInputs& m, std::size_t n, std::uint64_t seed);
/// Draws from Dirichlet(proposal) and weights against the model density.
WeightedSample draw_weighted(const ModelInputs& m, const Vec& proposal, std::size_t n, std::uint64_t seed);

/// Self-normalized estimate of E_p[f] with delta-method standard error.
MeanEstimate weighted_mean(const WeightedSample& s, const std::vector<double>& f);

/// Evaluates fn at every point in deterministic chunk order.
template <class T, class Fn>
std::vector<T> map_points(const std::vector<SimplexPoint>& points, Fn&& fn)
{
    std::vector<T> out(points.size());
    constexpr std::size_t chunk = 512;
    const std::size_t n_chunks = (points.size() + chunk - 1) / chunk;
    parallel_chunks(n_chunks, [&](std::size_t c) {
        const std::size_t end = std::min(points.size(), (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) out[i] = fn(points[i]);
    });
    return out;
}

/// Adaptive Gauss-Kronrod on [a, b]; throws NumericalError when the error estimate exceeds tol.
double integrate_1d(const std::function<double(double)>& f, double a, double b, double tol = 1e-8);

/// Integrates over consecutive intervals between sorted breakpoints.
double integrate_1d_split(const std::function<double(double)>& f, std::vector<double> breaks, double tol = 1e-8);

} // namespace spt
