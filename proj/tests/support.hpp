#pragma once

#include <initializer_list>
#include <vector>

#include "spt/random.hpp"
#include "spt/simplex.hpp"

namespace spt::test {

inline Vec vec(std::initializer_list<double> v)
{
    Vec out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

inline SimplexPoint pt(std::initializer_list<double> v) { return SimplexPoint(vec(v)); }

/// Interior points bounded away from the faces by roughly `margin`.
inline std::vector<SimplexPoint> interior_points(int d, std::size_t n, std::uint64_t seed, double margin = 0.02)
{
    auto raw = sample_dirichlet(Vec::Constant(d, 2.0), n, seed);
    std::vector<SimplexPoint> out;
    out.reserve(n);
    for (auto& x : raw) {
        Vec y = (x.coords().array() + margin).matrix();
        out.push_back(SimplexPoint(y / y.sum()));
    }
    return out;
}

inline std::vector<int> random_permutation(int d, Rng& rng)
{
    std::vector<int> p(d);
    for (int i = 0; i < d; ++i) p[i] = i;
    for (int i = d - 1; i > 0; --i) {
        const int j = static_cast<int>(rng.uniform() * (i + 1)) % (i + 1);
        std::swap(p[i], p[j]);
    }
    return p;
}

inline Vec permute(const Vec& x, const std::vector<int>& p)
{
    Vec y(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) y[i] = x[p[i]];
    return y;
}

} // namespace spt::test
