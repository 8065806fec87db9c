#include "spt/sde_sim.hpp"

#include <algorithm>
#include <cmath>

#include "spt/errors.hpp"
#include "spt/random.hpp"

namespace spt {

void SimConfig::validate() const
{
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be positive");
    if (!(T >= dt) || !std::isfinite(T)) throw InvalidParameter("T must be at least dt");
    if (record_stride == 0) throw InvalidParameter("record_stride must be at least 1");
    if (batches < 2) throw InvalidParameter("need at least 2 batches");
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(T / dt)); }

bool euler_step(const ModelInputs& m, Vec& x, double dt, const Vec& z)
{
    const SimplexPoint p = SimplexPoint::unchecked(x);
    const Mat c = covariance(m, p);
    const Vec l = ell(m, p).canonical();
    Vec y = x + dt * (c * l);
    if (z.size() > 0) y.noalias() += std::sqrt(dt) * (sqrt_covariance(c) * z);
    if (!y.allFinite()) throw NumericalError("euler step produced a non-finite state");
    const bool active = (y.array() < kEpsFloor).any();
    x = project_to_simplex(y).coords();
    return active;
}

namespace {

struct Stepper {
    const ModelInputs& m;
    const SimConfig& cfg;
    Rng rng;
    Vec z;
    std::size_t hits = 0;

    Stepper(const ModelInputs& model, const SimConfig& c) : m(model), cfg(c), rng(c.seed, 0), z(Vec::Zero(model.dim)) {}

    void advance(Vec& x, std::size_t step)
    {
        if (!cfg.zero_noise) rng.fill_normal(z);
        try {
            if (euler_step(m, x, cfg.dt, cfg.zero_noise ? Vec() : z)) ++hits;
        } catch (const SptError& e) {
            throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step));
        }
    }
};

std::vector<std::size_t> batch_boundaries(std::size_t steps, int batches)
{
    std::vector<std::size_t> b(batches + 1);
    for (int k = 0; k <= batches; ++k) b[k] = static_cast<std::size_t>((static_cast<unsigned long long>(steps) * k) / batches);
    return b;
}

double log_return(const Vec& pi, const Vec& x_old, const Vec& x_new, std::size_t& trips)
{
    double r = 0.0;
    for (Eigen::Index i = 0; i < x_old.size(); ++i) r += pi[i] * ((x_new[i] - x_old[i]) / x_old[i]);
    if (r <= -1.0 + 1e-12) {
        ++trips;
        r = -1.0 + 1e-12;
    }
    return std::log1p(r);
}

} // namespace

Path simulate_weights(const ModelInputs& m, const SimplexPoint& x0, const SimConfig& cfg)
{
    cfg.validate();
    if (x0.dim() != m.dim) throw InvalidInput("initial point dimension does not match the model");
    Stepper st(m, cfg);
    Path path;
    path.steps = cfg.steps();
    Vec x = x0.coords();
    path.times.push_back(0.0);
    path.states.push_back(x);
    for (std::size_t s = 1; s <= path.steps; ++s) {
        st.advance(x, s);
        if (s % cfg.record_stride == 0 || s == path.steps) {
            path.times.push_back(s * cfg.dt);
            path.states.push_back(x);
        }
    }
    path.boundary_hits = st.hits;
    return path;
}

WealthPath integrate_wealth(const Path& path, const GeneratedPortfolio& gp, int batches)
{
    if (path.states.empty()) throw InvalidInput("empty path");
    WealthPath w;
    w.name = gp.name;
    const std::size_t n = path.states.size() - 1;
    w.steps = n;
    w.horizon = path.times.back();
    w.times = path.times;
    w.log_V.assign(path.states.size(), 0.0);
    const auto bounds = batch_boundaries(n, batches);
    w.batch_log_V.assign(bounds.size(), 0.0);
    std::size_t next_batch = 1;
    double lv = 0.0;
    for (std::size_t k = 1; k <= n; ++k) {
        const Vec& xo = path.states[k - 1];
        const Vec pi = gp.weights(SimplexPoint::unchecked(xo));
        lv += log_return(pi, xo, path.states[k], w.guard_trips);
        w.log_V[k] = lv;
        while (next_batch < bounds.size() && bounds[next_batch] == k) w.batch_log_V[next_batch++] = lv;
    }
    w.step_size_warning = w.guard_trips * 1000 > std::max<std::size_t>(n, 1);
    return w;
}

SimulationResult simulate(const ModelInputs& m, const SimplexPoint& x0, const SimConfig& cfg,
                          const std::vector<GeneratedPortfolio>& portfolios)
{
    cfg.validate();
    if (x0.dim() != m.dim) throw InvalidInput("initial point dimension does not match the model");
    Stepper st(m, cfg);
    SimulationResult res;
    const std::size_t n = cfg.steps();
    res.path.steps = n;
    const auto bounds = batch_boundaries(n, cfg.batches);

    res.wealth.resize(portfolios.size());
    for (std::size_t p = 0; p < portfolios.size(); ++p) {
        res.wealth[p].name = portfolios[p].name;
        res.wealth[p].horizon = n * cfg.dt;
        res.wealth[p].steps = n;
        res.wealth[p].batch_log_V.assign(bounds.size(), 0.0);
        res.wealth[p].times.push_back(0.0);
        res.wealth[p].log_V.push_back(0.0);
    }
    std::vector<double> lv(portfolios.size(), 0.0);
    Vec x = x0.coords();
    res.path.times.push_back(0.0);
    res.path.states.push_back(x);
    std::size_t next_batch = 1;
    Vec pi;
    for (std::size_t s = 1; s <= n; ++s) {
        const Vec xo = x;
        st.advance(x, s);
        const SimplexPoint po = SimplexPoint::unchecked(xo);
        for (std::size_t p = 0; p < portfolios.size(); ++p) {
            pi = portfolios[p].weights(po);
            lv[p] += log_return(pi, xo, x, res.wealth[p].guard_trips);
        }
        const bool record = s % cfg.record_stride == 0 || s == n;
        if (record) {
            res.path.times.push_back(s * cfg.dt);
            res.path.states.push_back(x);
        }
        for (std::size_t p = 0; p < portfolios.size(); ++p) {
            if (record) {
                res.wealth[p].times.push_back(s * cfg.dt);
                res.wealth[p].log_V.push_back(lv[p]);
            }
        }
        while (next_batch < bounds.size() && bounds[next_batch] == s) {
            for (std::size_t p = 0; p < portfolios.size(); ++p) res.wealth[p].batch_log_V[next_batch] = lv[p];
            ++next_batch;
        }
    }
    res.path.boundary_hits = st.hits;
    for (auto& w : res.wealth) w.step_size_warning = w.guard_trips * 1000 > std::max<std::size_t>(n, 1);
    return res;
}

GrowthEstimate growth_rate(const WealthPath& w)
{
    GrowthEstimate g;
    if (!(w.horizon > 0.0) || w.batch_log_V.size() < 3) return g;
    const std::size_t nb = w.batch_log_V.size() - 1;
    g.rate = w.log_V.back() / w.horizon;
    const double batch_len = w.horizon / static_cast<double>(nb);
    g.batch_rates.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) g.batch_rates[b] = (w.batch_log_V[b + 1] - w.batch_log_V[b]) / batch_len;
    double mean = 0.0;
    for (double v : g.batch_rates) mean += v;
    mean /= static_cast<double>(nb);
    double ss = 0.0;
    for (double v : g.batch_rates) ss += (v - mean) * (v - mean);
    g.stderr_ = std::sqrt(ss / static_cast<double>(nb - 1) / static_cast<double>(nb));
    return g;
}

CapitalCurve capital_distribution_curve(double a, int d, std::size_t n_draws, std::uint64_t seed)
{
    if (!(a > 0.0)) throw InvalidParameter("capital curve: a must be positive");
    if (d < 2) throw InvalidParameter("capital curve: d must be at least 2");
    const auto draws = sample_dirichlet(Vec::Constant(d, a), n_draws, seed);
    Mat ranked(static_cast<Eigen::Index>(n_draws), d);
    for (std::size_t k = 0; k < n_draws; ++k) ranked.row(static_cast<Eigen::Index>(k)) = rank(draws[k]).sorted.transpose();

    CapitalCurve cc;
    cc.a = a;
    cc.d = d;
    cc.draws = n_draws;
    cc.mean = ranked.colwise().mean().transpose();
    cc.q05.resize(d);
    cc.median.resize(d);
    cc.q95.resize(d);
    std::vector<double> col(n_draws);
    auto quantile = [&](double q) {
        const std::size_t idx = static_cast<std::size_t>(std::floor(q * static_cast<double>(n_draws - 1)));
        std::nth_element(col.begin(), col.begin() + static_cast<std::ptrdiff_t>(idx), col.end());
        return col[idx];
    };
    for (int r = 0; r < d; ++r) {
        for (std::size_t k = 0; k < n_draws; ++k) col[k] = ranked(static_cast<Eigen::Index>(k), r);
        cc.q05[r] = quantile(0.05);
        cc.median[r] = quantile(0.5);
        cc.q95[r] = quantile(0.95);
    }
    return cc;
}

} // namespace spt
