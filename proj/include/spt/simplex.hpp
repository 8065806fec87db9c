/**
 * @file simplex.hpp
 * @brief Points, ranks and tangent vectors on the open unit simplex.
 *
 * All states are stored in full ambient coordinates (d entries summing to 1).
 * Differentiation happens along the tangent directions e_i - e_d.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace spt {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ScalarField = std::function<double(const Vec&)>;

inline constexpr double kEpsFloor = 1e-10;

/**
 * @brief A point of the open simplex.
 *
 * Construction rejects non-positive or non-finite coordinates and inputs whose
 * sum is off by more than 1e-9, then renormalizes so the sum is 1 to rounding.
 */
class SimplexPoint {
public:
    explicit SimplexPoint(Vec coords);

    /// Wraps coordinates the caller already knows are interior and normalized.
    static SimplexPoint unchecked(Vec coords);
    static SimplexPoint barycenter(int d);

    const Vec& coords() const noexcept { return coords_; }
    int dim() const noexcept { return static_cast<int>(coords_.size()); }
    double operator[](int i) const { return coords_[i]; }
    double min_coord() const { return coords_.minCoeff(); }

private:
    struct Unchecked {};
    SimplexPoint(Vec coords, Unchecked) : coords_(std::move(coords)) {}
    Vec coords_;
};

struct RankVector {
    Vec sorted;              ///< descending
    std::vector<int> perm;   ///< perm[k] = original (0-based) index holding rank k
};

/// Element of R^d modulo the all-ones direction.
class TangentVector {
public:
    TangentVector() = default;
    explicit TangentVector(Vec comps) : comps_(std::move(comps)) {}

    const Vec& comps() const noexcept { return comps_; }
    /// Zero-mean representative.
    Vec canonical() const;
    bool equivalent(const TangentVector& other, double tol) const;
    bool is_zero(double tol) const;

private:
    Vec comps_;
};

/// Euclidean projection onto the closed simplex {w >= 0, sum w = 1}.
Vec project_to_closed_simplex(const Vec& y);

/// Closed-simplex projection followed by flooring at eps_floor and renormalizing.
SimplexPoint project_to_simplex(const Vec& y, double eps_floor = kEpsFloor);

RankVector rank(const SimplexPoint& x);

std::vector<SimplexPoint> sample_dirichlet(const Vec& alpha, std::size_t n, std::uint64_t seed);

double dirichlet_log_density(const Vec& alpha, const Vec& x);

/// Central differences along e_i - e_d; the d-th component of the result is 0.
/// Default step is 1e-6 times the smallest coordinate.
TangentVector grad_fd(const ScalarField& f, const SimplexPoint& x, std::optional<double> h = std::nullopt);

/// Chart Hessian ((d-1)x(d-1)) by central differences along e_i - e_d.
/// Default step is 1e-4 times the smallest coordinate.
Mat hessian_fd(const ScalarField& f, const SimplexPoint& x, std::optional<double> h = std::nullopt);

/// P^T H P for the chart basis P = [e_1 - e_d, ..., e_{d-1} - e_d].
Mat ambient_to_chart_hessian(const Mat& h);

} // namespace spt
