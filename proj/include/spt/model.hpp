/**
 * @file model.hpp
 * @brief Covariance/density pairs on the simplex and the drift field they induce.
 *
 * A model is a covariance field c(x) with c(x)1 = 0 together with an invariant
 * density p. For the product-form class
 *
 *     c_ij = -f_ij(x) f_i(x^i) f_j(x^j) g(x),   c_ii = -sum_{j != i} c_ij
 *
 * the vector c^{-1} div c is the gradient of log(g prod f_i), so the drift field
 * ell = (grad log p + c^{-1} div c) / 2 is the gradient of log R with
 * R = sqrt(p g prod f_i). Models outside the class may still supply a closed-form
 * potential for c^{-1} div c (the generalized volatility-stabilized family does).
 */
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spt/simplex.hpp"

namespace spt {

using VectorField = std::function<Vec(const Vec&)>;
using MatrixField = std::function<Mat(const Vec&)>;

/// Positive function on (0,1) with optional derivatives of its logarithm.
struct UnivariateFactor {
    std::function<double(double)> value;
    std::function<double(double)> dlog;   ///< (log f)'
    std::function<double(double)> d2log;  ///< (log f)''
};

struct TractableSpec {
    int dim = 0;
    ScalarField log_g;        ///< empty means g == 1
    VectorField grad_log_g;   ///< ambient gradient, optional
    MatrixField hess_log_g;   ///< ambient Hessian, optional
    std::vector<UnivariateFactor> f;
    /// f_ij evaluated at x. Must be symmetric; only i != j is queried.
    std::function<double(int, int, const Vec&)> f_pair;
    /// Set when every f_ij is a constant; then f_pair reads from this matrix.
    std::optional<Mat> pair_constants;

    double pair(int i, int j, const Vec& x) const;
    double log_g_at(const Vec& x) const { return log_g ? log_g(x) : 0.0; }
    /// Throws InvalidParameter on asymmetric f_ij, non-positive f_i, or f_i(0+) != 0.
    void validate() const;
};

struct InvariantDensity {
    ScalarField log_p;
    VectorField grad_log_p;   ///< optional
    bool normalized = false;  ///< log_p includes the normalizing constant
};

struct DirichletParams {
    Vec a;
    Vec b;
    Mat alpha;  ///< symmetric pair constants, diagonal ignored
    Vec gamma() const { return (a + b).array() - 1.0; }
};

struct GenVolStabParams {
    Vec gamma;
    double beta = 0.5;
    double sigma2 = 1.0;
    ScalarField k_tilde;  ///< empty means the constant 1
    double k_min = 1.0;
    double k_max = 1.0;
};

struct LogitNormalParams {
    Vec mu;
    Mat sigma;
    Vec a;
    Vec b;
    Mat alpha;
};

/// Two-asset model given directly by c11(x) and an (unnormalized) density of x = x^1.
struct TwoAssetParams {
    std::function<double(double)> c11;
    std::function<double(double)> log_density;
};

using Preset = std::variant<std::monostate, DirichletParams, GenVolStabParams, LogitNormalParams, TwoAssetParams>;

struct ModelInputs {
    int dim = 0;
    std::string name;
    MatrixField cov;
    InvariantDensity density;
    std::optional<TractableSpec> spec;

    /// Potential whose gradient represents c^{-1} div c, when known in closed form.
    ScalarField log_c_potential;
    VectorField grad_log_c_potential;
    /// Ambient Hessian of log R, optional.
    MatrixField hess_log_R;

    Preset preset;
    Vec proposal_alpha;           ///< Dirichlet proposal for integrals against p
    bool proposal_is_density = false;

    bool has_gradient_drift() const { return static_cast<bool>(log_c_potential); }
};

// Construction ------------------------------------------------------------

ModelInputs make_tractable(TractableSpec spec, InvariantDensity density, Vec proposal_alpha, std::string name = "custom");
ModelInputs make_dirichlet(const DirichletParams& params);
ModelInputs make_dirichlet(const Vec& a, double sigma2, std::optional<Vec> b = std::nullopt);
ModelInputs make_gen_vol_stab(const GenVolStabParams& params);
ModelInputs make_logit_normal(const LogitNormalParams& params, std::optional<Vec> proposal_alpha = std::nullopt);
ModelInputs make_two_asset(const TwoAssetParams& params);

// Evaluation --------------------------------------------------------------

Mat covariance(const ModelInputs& m, const SimplexPoint& x);
Mat sqrt_covariance(const Mat& c);
Mat sqrt_covariance(const ModelInputs& m, const SimplexPoint& x);

TangentVector c_inv_div_c(const ModelInputs& m, const SimplexPoint& x);
/// div c_i = sum_{j != i} (d_j - d_i) c_ij by central differences of the covariance field.
Vec div_c_fd(const ModelInputs& m, const SimplexPoint& x, std::optional<double> h = std::nullopt);
/// Least-squares solution of c y = div c with div c from finite differences.
TangentVector c_inv_div_c_fd(const ModelInputs& m, const SimplexPoint& x);

double log_density(const ModelInputs& m, const SimplexPoint& x);
TangentVector grad_log_density(const ModelInputs& m, const SimplexPoint& x);

TangentVector ell(const ModelInputs& m, const SimplexPoint& x);

/// log R = (log p + potential) / 2. Throws NotGradientError without a closed-form potential.
double log_R(const ModelInputs& m, const SimplexPoint& x);
/// Chart Hessian of log R (analytic when the model supplies it).
Mat hess_log_R_chart(const ModelInputs& m, const SimplexPoint& x);

/// Generator L f = tr(c Hess f) / 2 from a chart Hessian.
double generator(const Mat& c, const Mat& chart_hessian);

struct GraphReport {
    bool connected = false;
    bool matrix_power_positive = false;
    std::vector<int> component;                 ///< component label per asset
    std::vector<std::vector<int>> components;   ///< 0-based members of each component
};

GraphReport check_graph_connectivity(const ModelInputs& m, const SimplexPoint& x);

bool is_rank_based_spec(const ModelInputs& m, std::size_t n_checks = 200, std::uint64_t seed = 7);

/// Structural parameter conditions of the presets. Each entry names one violated condition.
std::vector<std::string> preset_condition_violations(const ModelInputs& m);

struct MeanEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

struct DiagnosticsReport {
    bool advisory = true;
    std::vector<std::string> violated_conditions;
    bool graph_connected = false;
    double min_LR_over_R = 0.0;
    double sampled_min_coordinate = 0.0;
    std::size_t samples = 0;
    bool boundary_decay = false;
    double max_boundary_ratio = 0.0;  ///< max over rays of R(near face) / R(barycenter)
    MeanEstimate abs_LR_over_R;
    MeanEstimate abs_L_log_R;
    std::vector<double> floors;
    std::vector<double> truncated_integral;  ///< int |LR/R| p over {min x >= floor}
    bool divergence_suspected = false;
    bool nan_flag = false;
    bool pass = false;
    std::vector<std::string> failures;
};

DiagnosticsReport assumption_diagnostics(const ModelInputs& m, std::size_t n_samples, std::uint64_t seed);

} // namespace spt
