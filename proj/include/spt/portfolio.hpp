#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spt/model.hpp"

namespace spt {

enum class Concavity { yes, no, unknown };

/// Portfolio generated by G = exp(phi). Gradients are ambient and only matter modulo constants.
struct GeneratedPortfolio {
    std::string name;
    ScalarField log_G;       ///< may be empty for feedback portfolios
    VectorField grad_log_G;
    MatrixField hess_log_G;  ///< ambient Hessian, optional
    bool smooth = true;
    Concavity concave = Concavity::unknown;

    Vec weights(const SimplexPoint& x) const;
};

/// pi^i = x^i (g_i + 1 - sum_j x^j g_j).
Vec master_formula_weights(const Vec& grad_log_G, const Vec& x);
Vec master_formula_weights(const GeneratedPortfolio& gp, const SimplexPoint& x);

GeneratedPortfolio market_portfolio();
GeneratedPortfolio equal_weight_portfolio(int d);
/// G = prod (x^i)^{c_i}.
GeneratedPortfolio power_portfolio(const Vec& c);
/// G = w^T x.
GeneratedPortfolio linear_portfolio(const Vec& w);

/// Generated by log R, normalized so that its value at the barycenter is 0.
GeneratedPortfolio unconstrained_optimum(const ModelInputs& m);

/// Closed-form growth rate of the unconstrained optimum for the Dirichlet family.
double lambda_dirichlet_closed_form(const DirichletParams& p);

struct TwoAssetSolution {
    double theta1 = 0.0;  ///< family-specific cutoff parameters (may be +inf)
    double theta2 = 1.0;
    double x_lower = 0.0;  ///< pi^1 = 1 below
    double x_upper = 1.0;  ///< pi^1 = 0 above
    std::vector<double> breakpoints;
    std::function<double(double)> ell_tilde;
    std::function<double(double)> clipped;  ///< phi' of the optimal generator
    std::function<double(double)> pi1;
    std::function<double(double)> density;  ///< normalized density of x^1
    double lambda_long = 0.0;
    double lambda_unconstrained = 0.0;
    double clipped_mass = 0.0;
    bool concave_generated = false;
    GeneratedPortfolio portfolio;
};

TwoAssetSolution solve_two_asset_long_only(const ModelInputs& m);

/// max of ell~^2 + ell~' over a grid of {x : -1/(1-x) < ell~(x) < 1/x} is <= 1e-9.
bool concavity_criterion(const ModelInputs& m, std::size_t grid = 20000);
/// Same question answered through second differences of sqrt(c~ p~) on the same region.
bool sqrt_cp_concave(const ModelInputs& m, std::size_t grid = 20000);

struct GrowthRateReport {
    std::optional<double> lambda_closed_form;
    double lambda_mc = 0.0;
    double stderr_ = 0.0;
    std::string method;
    std::optional<MeanEstimate> ibp;  ///< integral of -LG/G p
    double ibp_discrepancy = 0.0;
    bool divergent_variance = false;
    bool consistent = true;  ///< closed form within 4 standard errors, when present
    std::size_t samples = 0;
    double effective_samples = 0.0;
};

GrowthRateReport lambda_mc(const ModelInputs& m, const GeneratedPortfolio& gp, std::size_t n, std::uint64_t seed,
                           std::optional<double> closed_form = std::nullopt);

bool is_rank_based_portfolio(const GeneratedPortfolio& gp, int d, std::size_t n_checks, std::uint64_t seed);

} // namespace spt
