#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spt/model.hpp"
#include "spt/portfolio.hpp"

namespace spt {

struct SimConfig {
    double dt = 1e-3;
    double T = 1.0;
    std::uint64_t seed = 1;
    std::size_t record_stride = 1;
    bool zero_noise = false;
    int batches = 20;

    void validate() const;
    std::size_t steps() const;
};

struct Path {
    std::vector<double> times;
    std::vector<Vec> states;
    std::size_t steps = 0;
    std::size_t boundary_hits = 0;  ///< steps where the projection had to clip or floor
};

/// One projected Euler-Maruyama step x -> proj(x + c ell dt + sigma sqrt(dt) z).
/// Returns true when the projection was active. Throws NumericalError on a non-finite state.
bool euler_step(const ModelInputs& m, Vec& x, double dt, const Vec& z);

/// Stores the path every record_stride steps (and at the end).
Path simulate_weights(const ModelInputs& m, const SimplexPoint& x0, const SimConfig& cfg);

struct WealthPath {
    std::string name;
    std::vector<double> times;
    std::vector<double> log_V;
    std::vector<double> batch_log_V;  ///< log V at the batch boundaries, first entry 0
    double horizon = 0.0;
    std::size_t steps = 0;
    std::size_t guard_trips = 0;
    bool step_size_warning = false;  ///< guard trips on more than 0.1% of steps

    double terminal_growth() const { return horizon > 0.0 ? log_V.back() / horizon : 0.0; }
};

/// Wealth of a portfolio along a stored path, log(1 + sum_i pi^i dX^i / X^i) per step.
WealthPath integrate_wealth(const Path& path, const GeneratedPortfolio& gp, int batches = 20);

struct SimulationResult {
    Path path;
    std::vector<WealthPath> wealth;
};

/// Streams one market path and integrates every portfolio on it (common random numbers).
SimulationResult simulate(const ModelInputs& m, const SimplexPoint& x0, const SimConfig& cfg,
                          const std::vector<GeneratedPortfolio>& portfolios);

struct GrowthEstimate {
    double rate = 0.0;
    double stderr_ = 0.0;
    std::vector<double> batch_rates;
};

/// log V_T / T with a batch-means standard error.
GrowthEstimate growth_rate(const WealthPath& w);

struct CapitalCurve {
    double a = 1.0;
    int d = 0;
    std::size_t draws = 0;
    Vec mean;
    Vec q05;
    Vec median;
    Vec q95;
};

CapitalCurve capital_distribution_curve(double a, int d, std::size_t n_draws, std::uint64_t seed);

} // namespace spt
