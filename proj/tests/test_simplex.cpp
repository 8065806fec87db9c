#include <doctest.h>

#include <cmath>
#include <limits>

#include <boost/math/distributions/beta.hpp>

#include "spt/errors.hpp"
#include "spt/simplex.hpp"
#include "support.hpp"

using namespace spt;
using spt::test::pt;
using spt::test::vec;

TEST_SUITE("simplex")
{
    TEST_CASE("simplex point validation")
    {
        CHECK_THROWS_AS(SimplexPoint(vec({0.5, 0.6})), InvalidInput);
        CHECK_THROWS_AS(SimplexPoint(vec({0.0, 1.0})), InvalidInput);
        CHECK_THROWS_AS(SimplexPoint(vec({std::nan(""), 1.0})), InvalidInput);
        const SimplexPoint x = pt({0.2, 0.5, 0.3});
        CHECK(std::abs(x.coords().sum() - 1.0) < 1e-12);
    }

    TEST_CASE("projection examples")
    {
        const auto a = project_to_simplex(vec({0.6, 0.6}));
        CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(a[1] == doctest::Approx(0.5).epsilon(1e-15));

        const auto b = project_to_simplex(vec({0.2, 0.5, 0.3}));
        CHECK((b.coords() - vec({0.2, 0.5, 0.3})).norm() < 1e-15);

        const auto c = project_to_simplex(vec({1.2, -0.2}));
        CHECK(c[1] == doctest::Approx(1e-10).epsilon(1e-6));
        CHECK(c[0] == doctest::Approx(1.0 - 1e-10).epsilon(1e-15));
        CHECK(c[1] > 0.0);

        CHECK_THROWS_AS(project_to_simplex(vec({std::numeric_limits<double>::infinity(), 0.0})), InvalidInput);
        CHECK_THROWS_AS(project_to_simplex(vec({std::nan(""), 0.5})), InvalidInput);
    }

    TEST_CASE("projection onto the closed simplex matches brute force over active sets")
    {
        Rng rng(99);
        for (int trial = 0; trial < 200; ++trial) {
            const int d = 2 + trial % 4;
            Vec y(d);
            for (int i = 0; i < d; ++i) y[i] = 2.0 * rng.normal();
            // Brute force: for every nonempty support S, x_S = y_S - t with t fixing the sum.
            double best = std::numeric_limits<double>::infinity();
            Vec best_x;
            for (int mask = 1; mask < (1 << d); ++mask) {
                double s = 0.0;
                int k = 0;
                for (int i = 0; i < d; ++i)
                    if (mask & (1 << i)) { s += y[i]; ++k; }
                const double t = (s - 1.0) / k;
                Vec x = Vec::Zero(d);
                bool ok = true;
                for (int i = 0; i < d; ++i)
                    if (mask & (1 << i)) {
                        x[i] = y[i] - t;
                        if (x[i] < 0.0) ok = false;
                    }
                if (ok && (x - y).squaredNorm() < best) {
                    best = (x - y).squaredNorm();
                    best_x = x;
                }
            }
            CHECK((project_to_closed_simplex(y) - best_x).norm() < 1e-12);
        }
    }

    TEST_CASE("rank examples")
    {
        auto r = rank(pt({0.2, 0.5, 0.3}));
        CHECK((r.sorted - vec({0.5, 0.3, 0.2})).norm() == 0.0);
        CHECK(r.perm == std::vector<int>{1, 2, 0});

        r = rank(SimplexPoint::barycenter(3));
        CHECK(r.perm == std::vector<int>{0, 1, 2});

        r = rank(pt({0.1, 0.1, 0.8}));
        CHECK((r.sorted - vec({0.8, 0.1, 0.1})).norm() < 1e-16);
        CHECK(r.perm == std::vector<int>{2, 0, 1});
    }

    TEST_CASE("dirichlet sampler moments")
    {
        const int d = 4;
        const std::size_t n = 100000;
        auto xs = sample_dirichlet(Vec::Ones(d), n, 3);
        REQUIRE(xs.size() == n);
        Vec mean = Vec::Zero(d);
        for (const auto& x : xs) mean += x.coords();
        mean /= static_cast<double>(n);
        // Var of a coordinate under Dirichlet(1,..,1) is (d-1)/(d^2(d+1)).
        const double se = std::sqrt((d - 1.0) / (d * d * (d + 1.0)) / n);
        for (int i = 0; i < d; ++i) CHECK(std::abs(mean[i] - 1.0 / d) < 3.0 * se);

        const double a = 2.5;
        auto ys = sample_dirichlet(Vec::Constant(d, a), n, 4);
        const double var_true = (d - 1.0) / (d * d * (a * d + 1.0));
        for (int i = 0; i < d; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (const auto& y : ys) {
                m1 += y[i];
                m2 += y[i] * y[i];
            }
            m1 /= n;
            m2 /= n;
            const double var = m2 - m1 * m1;
            // Fourth central moment bounded by E[x^4] gives a conservative standard error.
            double m4 = 0.0;
            for (const auto& y : ys) m4 += std::pow(y[i] - m1, 4);
            m4 /= n;
            const double se_var = std::sqrt((m4 - var * var) / n);
            CHECK(std::abs(var - var_true) < 3.0 * se_var);
        }
    }

    TEST_CASE("dirichlet sampler is deterministic and validates alpha")
    {
        auto a = sample_dirichlet(Vec::Constant(3, 0.7), 5000, 42);
        auto b = sample_dirichlet(Vec::Constant(3, 0.7), 5000, 42);
        for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].coords() == b[k].coords());
        CHECK_THROWS_AS(sample_dirichlet(vec({1.0, 0.0}), 10, 1), InvalidParameter);
        CHECK_THROWS_AS(sample_dirichlet(vec({1.0, -2.0}), 10, 1), InvalidParameter);
    }

    TEST_CASE("dirichlet first coordinate passes a KS test against its beta marginal")
    {
        const Vec alpha = vec({0.6, 1.5, 3.0});
        const std::size_t n = 10000;
        auto xs = sample_dirichlet(alpha, n, 17);
        std::vector<double> u(n);
        for (std::size_t k = 0; k < n; ++k) u[k] = xs[k][0];
        std::sort(u.begin(), u.end());
        boost::math::beta_distribution<double> beta(alpha[0], alpha.sum() - alpha[0]);
        double ks = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double F = boost::math::cdf(beta, u[k]);
            ks = std::max({ks, (k + 1.0) / n - F, F - static_cast<double>(k) / n});
        }
        CHECK(ks < 1.628 / std::sqrt(static_cast<double>(n)));
    }

    TEST_CASE("grad_fd examples")
    {
        const auto x = pt({0.2, 0.3, 0.5});
        CHECK(grad_fd([](const Vec&) { return 4.2; }, x).is_zero(1e-12));
        CHECK(grad_fd([](const Vec& y) { return y[0]; }, x).equivalent(TangentVector(vec({1.0, 0.0, 0.0})), 1e-8));

        const auto g = grad_fd([](const Vec& y) { return std::log(y[0]); }, pt({0.5, 0.5}));
        CHECK(g.equivalent(TangentVector(vec({2.0, 0.0})), 1e-6));
        CHECK(g.comps()[1] == 0.0);
    }

    TEST_CASE("grad_fd is second order in the step")
    {
        // A cubic has a nonzero third derivative, so the central difference error is visible.
        auto f = [](const Vec& y) { return y[0] * y[0] * y[0] + 2.0 * y[0] * y[1] * y[1] - y[2] * y[2] * y[2]; };
        const auto x = pt({0.3, 0.3, 0.4});
        // Analytic ambient gradient, reduced to the chart directions e_i - e_d.
        const Vec amb = vec({3 * 0.09 + 2 * 0.09, 4 * 0.3 * 0.3, -3 * 0.16});
        Vec exact(3);
        exact << amb[0] - amb[2], amb[1] - amb[2], 0.0;
        const double e1 = (grad_fd(f, x, 0.02).comps() - exact).norm();
        const double e2 = (grad_fd(f, x, 0.01).comps() - exact).norm();
        const double ratio = e1 / e2;
        CHECK(ratio >= 3.0);
        CHECK(ratio <= 5.0);
    }

    TEST_CASE("grad_fd near the boundary")
    {
        const auto x = pt({0.005, 0.995});
        CHECK_THROWS_AS(grad_fd([](const Vec& y) { return y[0]; }, x, 0.01), BoundaryError);
        CHECK_NOTHROW(grad_fd([](const Vec& y) { return y[0]; }, x));
    }

    TEST_CASE("tangent vector equivalence")
    {
        const TangentVector a(vec({1.0, 2.0, 3.0}));
        const TangentVector b(vec({11.0, 12.0, 13.0}));
        CHECK(a.equivalent(b, 1e-12));
        CHECK_FALSE(a.equivalent(TangentVector(vec({1.0, 2.0, 4.0})), 1e-6));
        CHECK(std::abs(a.canonical().sum()) < 1e-15);
    }

    TEST_CASE("chart hessian of an ambient quadratic")
    {
        Mat H(3, 3);
        H << 2, 1, 0, 1, 3, 1, 0, 1, 4;
        const Mat C = ambient_to_chart_hessian(H);
        Mat P(3, 2);
        P << 1, 0, 0, 1, -1, -1;
        CHECK((C - P.transpose() * H * P).norm() < 1e-14);
        auto f = [&](const Vec& y) { return 0.5 * y.dot(H * y); };
        CHECK((hessian_fd(f, pt({0.3, 0.3, 0.4})) - C).norm() < 1e-5);
    }
}
