#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/beta.hpp>

#include "model_fixtures.hpp"
#include "spt/errors.hpp"
#include "spt/portfolio.hpp"
#include "spt/qp_approx.hpp"
#include "spt/sde_sim.hpp"

using namespace spt;
using namespace spt::test;

namespace {

/// Batch-means mean and standard error of a sampled series.
std::pair<double, double> batch_mean(const std::vector<double>& v, int batches = 20)
{
    const std::size_t per = v.size() / batches;
    std::vector<double> means(batches, 0.0);
    for (int b = 0; b < batches; ++b) {
        for (std::size_t k = b * per; k < (b + 1) * per; ++k) means[b] += v[k];
        means[b] /= per;
    }
    double m = 0.0;
    for (double x : means) m += x;
    m /= batches;
    double ss = 0.0;
    for (double x : means) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / (batches - 1) / batches)};
}

/// Standard error of growth(a) - growth(b) from their common batch boundaries.
double diff_stderr(const WealthPath& a, const WealthPath& b)
{
    WealthPath d = a;
    for (std::size_t k = 0; k < d.batch_log_V.size(); ++k) d.batch_log_V[k] -= b.batch_log_V[k];
    d.log_V.back() -= b.log_V.back();
    return growth_rate(d).stderr_;
}

} // namespace

TEST_SUITE("sde")
{
    TEST_CASE("configuration validation")
    {
        SimConfig cfg;
        cfg.dt = 0.0;
        CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
        cfg.dt = 0.1;
        cfg.T = 0.05;
        CHECK_THROWS_AS(cfg.validate(), InvalidParameter);
        cfg.T = 1.0;
        CHECK_NOTHROW(cfg.validate());
        CHECK(cfg.steps() == 10);
    }

    TEST_CASE("zero-noise step of the volatility-stabilized model")
    {
        const auto m = vol_stab(2, 2.0, 0.1);
        Vec x = vec({0.8, 0.2});
        euler_step(m, x, 0.01, Vec());
        CHECK(x[0] == doctest::Approx(0.7994).epsilon(1e-13));
        CHECK(x.sum() == doctest::Approx(1.0).epsilon(1e-15));

        SimConfig cfg;
        cfg.dt = 0.01;
        cfg.T = 5.0;
        cfg.zero_noise = true;
        const auto path = simulate_weights(make_dirichlet(Vec::Constant(4, 3.0), 0.2), SimplexPoint::barycenter(4), cfg);
        for (const auto& s : path.states) CHECK((s - Vec::Constant(4, 0.25)).norm() < 1e-15);
    }

    TEST_CASE("zero-noise path follows the drift ODE")
    {
        // Linear drift: dx = k (m* - x) dt with k = sigma2 d a / 2 for the volatility-stabilized model.
        const double s2 = 0.1, a = 2.0;
        const auto m = vol_stab(2, a, s2);
        SimConfig cfg;
        cfg.dt = 1e-3;
        cfg.T = 3.0;
        cfg.zero_noise = true;
        const auto path = simulate_weights(m, pt({0.9, 0.1}), cfg);
        const double k = s2 * 2 * a / 2.0;
        CHECK(path.states.back()[0] == doctest::Approx(0.5 + 0.4 * std::exp(-k * 3.0)).epsilon(1e-3));
    }

    TEST_CASE("paths stay in the open simplex and are reproducible")
    {
        const auto m = make_dirichlet(vec({1.2, 2.0, 1.5}), 0.5);
        SimConfig cfg;
        cfg.dt = 0.01;
        cfg.T = 200.0;
        cfg.seed = 4;
        const auto a = simulate_weights(m, SimplexPoint::barycenter(3), cfg);
        const auto b = simulate_weights(m, SimplexPoint::barycenter(3), cfg);
        REQUIRE(a.states.size() == cfg.steps() + 1);
        for (std::size_t k = 0; k < a.states.size(); ++k) {
            CHECK(a.states[k].minCoeff() > 0.0);
            CHECK(std::abs(a.states[k].sum() - 1.0) < 1e-12);
            CHECK(a.states[k] == b.states[k]);
        }
        cfg.record_stride = 7;
        const auto c = simulate_weights(m, SimplexPoint::barycenter(3), cfg);
        CHECK(c.states[1] == a.states[7]);
        CHECK(c.states.back() == a.states.back());
    }

    TEST_CASE("non-finite state reports the step")
    {
        ModelInputs m = vol_stab(2, 3.0, 0.1);
        auto base = m.cov;
        m.cov = [base](const Vec& x) {
            Mat c = base(x);
            if (x[0] < 0.45) c(0, 0) = std::nan("");
            return c;
        };
        SimConfig cfg;
        cfg.dt = 0.1;
        cfg.T = 100.0;
        cfg.seed = 2;
        try {
            simulate_weights(m, pt({0.5, 0.5}), cfg);
            FAIL("expected a numerical error");
        } catch (const NumericalError& e) {
            CHECK(std::string(e.what()).find("at step") != std::string::npos);
        }
    }

    TEST_CASE("market and single-asset wealth")
    {
        const auto m = make_dirichlet(vec({2.0, 3.0, 4.0}), 0.3);
        SimConfig cfg;
        cfg.dt = 0.01;
        cfg.T = 50.0;
        cfg.seed = 8;
        const auto path = simulate_weights(m, SimplexPoint::barycenter(3), cfg);
        const auto mk = integrate_wealth(path, market_portfolio());
        for (double v : mk.log_V) CHECK(std::abs(v) < 1e-12);
        CHECK(std::abs(growth_rate(mk).rate) < 1e-12);
        CHECK(mk.log_V[0] == 0.0);

        const auto single = integrate_wealth(path, linear_portfolio(vec({1.0, 1e-300, 1e-300})));
        const double expected = std::log(path.states.back()[0] / path.states.front()[0]);
        CHECK(single.log_V.back() == doctest::Approx(expected).epsilon(1e-9));
        CHECK(single.guard_trips == 0);
        CHECK_FALSE(single.step_size_warning);
    }

    TEST_CASE("streaming simulation matches wealth integration on a stored path")
    {
        const auto m = make_dirichlet(Vec::Constant(2, 3.0), 0.1);
        SimConfig cfg;
        cfg.dt = 0.01;
        cfg.T = 100.0;
        cfg.seed = 12;
        const std::vector<GeneratedPortfolio> ps{market_portfolio(), unconstrained_optimum(m)};
        const auto res = simulate(m, pt({0.3, 0.7}), cfg, ps);
        const auto path = simulate_weights(m, pt({0.3, 0.7}), cfg);
        for (std::size_t p = 0; p < ps.size(); ++p) {
            const auto w = integrate_wealth(path, ps[p]);
            CHECK(res.wealth[p].log_V.back() == w.log_V.back());
            CHECK(res.wealth[p].batch_log_V == w.batch_log_V);
            CHECK(growth_rate(res.wealth[p]).rate == doctest::Approx(w.log_V.back() / cfg.T).epsilon(1e-14));
        }
        CHECK(res.wealth[0].batch_log_V.size() == 21);
    }

    TEST_CASE("wealth identity error shrinks linearly in the step")
    {
        // E[log V_T - (log G(X_T) - log G(X_0) + int -LG/G dt)] for G = prod x^c.
        const auto m = make_dirichlet(Vec::Constant(2, 3.0), 0.1);
        const Vec cexp = vec({0.4, 0.1});
        const auto gp = power_portfolio(cexp);
        auto log_g = [&](const Vec& x) { return (cexp.array() * x.array().log()).sum(); };
        auto hess_log_g = [&](const Vec& x) { return Mat(Vec(-cexp.array() / x.array().square()).asDiagonal()); };
        auto minus_lg_over_g = [&](const Vec& x) {
            const Vec g = cexp.array() / x.array();
            const Mat h = g * g.transpose() + hess_log_g(x);
            return -0.5 * (m.cov(x).cwiseProduct(h)).sum();
        };
        auto mean_discrepancy = [&](double dt) {
            const int paths = 10000;
            double total = 0.0;
            for (int p = 0; p < paths; ++p) {
                SimConfig cfg;
                cfg.dt = dt;
                cfg.T = 1.0;
                cfg.seed = 1000 + p;
                const auto path = simulate_weights(m, SimplexPoint::barycenter(2), cfg);
                const auto w = integrate_wealth(path, gp);
                double drift = 0.0, qv = 0.0;
                for (std::size_t k = 0; k + 1 < path.states.size(); ++k) {
                    const Vec& x = path.states[k];
                    drift += minus_lg_over_g(x) * dt;
                    // Zero-mean control variate: realized minus expected quadratic variation.
                    const Mat c = m.cov(x);
                    const Vec h = gp.weights(SimplexPoint::unchecked(x)).array() / x.array();
                    const Mat H = hess_log_g(x);
                    const Vec dw = path.states[k + 1] - x - c * ell(m, SimplexPoint::unchecked(x)).canonical() * dt;
                    qv += 0.5 * (std::pow(h.dot(dw), 2) - h.dot(c * h) * dt) + 0.5 * (dw.dot(H * dw) - (c * H).trace() * dt);
                }
                total += w.log_V.back() - (log_g(path.states.back()) - log_g(path.states.front()) + drift) + qv;
            }
            return total / paths;
        };
        const double e1 = mean_discrepancy(0.02), e2 = mean_discrepancy(0.01);
        MESSAGE("discrepancies " << e1 << " " << e2);
        const double ratio = e1 / e2;
        CHECK(ratio >= 1.5);
        CHECK(ratio <= 3.0);
    }

    TEST_CASE("terminal mean bias halves with the step")
    {
        // Volatility-stabilized, d = 2, gamma = 3, mean-reversion rate 0.2, horizon 10.
        const double s2 = 0.2 / 3.0;
        const auto m = vol_stab(2, 3.0, s2);
        const double k = s2 * 3.0, x0 = 0.9;
        const double exact = 0.5 + (x0 - 0.5) * std::exp(-k * 10.0);
        const int paths = 100000;
        double sum_coarse = 0.0, sum_fine = 0.0;
        Rng rng(2024);
        Vec z1(2), z2(2), zc(2);
        for (int p = 0; p < paths; ++p) {
            Vec xc = vec({x0, 1.0 - x0}), xf = xc;
            for (int s = 0; s < 10; ++s) {
                rng.fill_normal(z1);
                rng.fill_normal(z2);
                zc = (z1 + z2) / std::sqrt(2.0);
                euler_step(m, xf, 0.5, z1);
                euler_step(m, xf, 0.5, z2);
                euler_step(m, xc, 1.0, zc);
            }
            sum_coarse += xc[0];
            sum_fine += xf[0];
        }
        const double bc = sum_coarse / paths - exact, bf = sum_fine / paths - exact;
        MESSAGE("biases " << bc << " " << bf);
        CHECK(bc / bf >= 1.5);
        CHECK(bc / bf <= 3.0);
    }

    TEST_CASE("occupation measure matches the invariant density")
    {
        const auto m = make_dirichlet(vec({2.0, 4.0}), 0.2);
        SimConfig cfg;
        cfg.dt = 0.01;
        cfg.T = 1e4;
        cfg.seed = 31;
        cfg.record_stride = 10;
        const auto path = simulate_weights(m, SimplexPoint::barycenter(2), cfg);
        std::vector<double> x1, above;
        for (std::size_t k = 1; k < path.states.size(); ++k) {
            x1.push_back(path.states[k][0]);
            above.push_back(path.states[k][0] > 0.5 ? 1.0 : 0.0);
        }
        const auto [mean, se] = batch_mean(x1);
        CHECK(std::abs(mean - 1.0 / 3.0) < 3.0 * se);
        boost::math::beta_distribution<double> beta(2.0, 4.0);
        const double p_above = 1.0 - boost::math::cdf(beta, 0.5);
        const auto [frac, se2] = batch_mean(above);
        CHECK(std::abs(frac - p_above) < 3.0 * se2);
    }

    TEST_CASE("pathwise growth orderings and agreement with the integral formula")
    {
        const auto m = make_dirichlet(Vec::Constant(2, 3.0), 0.1);
        const auto two = solve_two_asset_long_only(m);
        const auto fam = generate_family(25, 100, 2, 1);
        const auto qp = qp_portfolio(fam, solve_qp(assemble_qp(m, fam, 100, 2)).mu);
        const auto power = power_portfolio(vec({0.3, 0.2}));
        SimConfig cfg;
        cfg.dt = 5e-3;
        cfg.T = 5000.0;
        cfg.seed = 77;
        const auto res = simulate(m, SimplexPoint::barycenter(2), cfg, {unconstrained_optimum(m), two.portfolio, qp, power});
        const auto gu = growth_rate(res.wealth[0]), gl = growth_rate(res.wealth[1]), gq = growth_rate(res.wealth[2]);
        MESSAGE("growth " << gu.rate << " " << gl.rate << " " << gq.rate);
        CHECK(gu.rate >= gl.rate - 3.0 * diff_stderr(res.wealth[0], res.wealth[1]));
        CHECK(gl.rate >= gq.rate - 3.0 * diff_stderr(res.wealth[1], res.wealth[2]));
        CHECK(std::abs(gu.rate - 0.1125) < 3.0 * gu.stderr_);

        const auto gp = growth_rate(res.wealth[3]);
        const auto mc = lambda_mc(m, power, 100000, 5);
        CHECK(std::abs(gp.rate - mc.lambda_mc) < 4.0 * std::hypot(gp.stderr_, mc.stderr_));
    }

    TEST_CASE("capital distribution curves")
    {
        const auto c = capital_distribution_curve(1.0, 500, 200, 1);
        for (int r = 1; r < 500; ++r) CHECK(c.mean[r] < c.mean[r - 1]);
        CHECK(c.mean.sum() == doctest::Approx(1.0).epsilon(1e-12));

        const auto one = capital_distribution_curve(0.5, 50, 1, 3);
        CHECK(one.mean.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(one.mean == one.median);

        const auto flat = capital_distribution_curve(2.0, 500, 1000, 4);
        const auto steep = capital_distribution_curve(0.5, 500, 1000, 4);
        CHECK(flat.mean[0] < steep.mean[0]);

        const auto again = capital_distribution_curve(2.0, 500, 1000, 4);
        CHECK(again.mean == flat.mean);
        CHECK(again.q95 == flat.q95);
        CHECK_THROWS_AS(capital_distribution_curve(0.0, 5, 10, 1), InvalidParameter);
    }
}
