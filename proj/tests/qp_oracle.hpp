#pragma once

#include <cmath>
#include <limits>

#include "spt/simplex.hpp"

namespace spt::test {

inline double qp_value(const Mat& Q, const Vec& r, const Vec& mu) { return 0.5 * mu.dot(Q * mu) - mu.dot(r); }

/// Minimum over the probability simplex by enumerating supports and solving each face's KKT system.
inline double qp_min_by_supports(const Mat& Q, const Vec& r)
{
    const int M = static_cast<int>(r.size());
    double best = std::numeric_limits<double>::infinity();
    for (int mask = 1; mask < (1 << M); ++mask) {
        std::vector<int> s;
        for (int i = 0; i < M; ++i)
            if (mask & (1 << i)) s.push_back(i);
        const int k = static_cast<int>(s.size());
        Mat A = Mat::Zero(k + 1, k + 1);
        Vec b(k + 1);
        for (int a = 0; a < k; ++a) {
            for (int c = 0; c < k; ++c) A(a, c) = Q(s[a], s[c]);
            A(a, k) = 1.0;
            A(k, a) = 1.0;
            b[a] = r[s[a]];
        }
        b[k] = 1.0;
        const Vec sol = A.completeOrthogonalDecomposition().solve(b);
        if ((A * sol - b).norm() > 1e-9 * (1.0 + b.norm())) continue;
        Vec mu = Vec::Zero(M);
        bool ok = true;
        for (int a = 0; a < k; ++a) {
            if (sol[a] < -1e-12) ok = false;
            mu[s[a]] = sol[a];
        }
        if (ok) best = std::min(best, qp_value(Q, r, mu));
    }
    return best;
}

/// Literal grid search over the simplex with the given step; M <= 3.
inline double qp_min_by_grid(const Mat& Q, const Vec& r, double step)
{
    const int M = static_cast<int>(r.size());
    const int n = static_cast<int>(std::lround(1.0 / step));
    double best = std::numeric_limits<double>::infinity();
    Vec mu(M);
    if (M == 1) return qp_value(Q, r, Vec::Ones(1));
    if (M == 2) {
        for (int i = 0; i <= n; ++i) {
            mu << i * step, 1.0 - i * step;
            best = std::min(best, qp_value(Q, r, mu));
        }
        return best;
    }
    for (int i = 0; i <= n; ++i)
        for (int j = 0; i + j <= n; ++j) {
            mu << i * step, j * step, 1.0 - (i + j) * step;
            best = std::min(best, qp_value(Q, r, mu));
        }
    return best;
}

} // namespace spt::test
