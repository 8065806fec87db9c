/**
 * @file qp_approx.hpp
 * @brief Finite-dimensional approximation of the concave-generated optimum.
 *
 * Basis functions are phi_m(x) = min_k log(w_mk . x) with w_mk = d * Dirichlet(1).
 * Mixtures psi = sum_m mu_m phi_m over the probability simplex stay exponentially
 * concave, so they generate long-only portfolios. The weights mu minimize the
 * Monte Carlo estimate of ||grad psi - ell||^2 in the c,p-weighted norm:
 *
 *     1/2 mu^T Q mu - mu^T r + C,    Q_ij = 2 E[grad phi_i^T c grad phi_j],
 *                                    r_i  = 2 E[grad phi_i^T c ell],
 *                                    C    = E[ell^T c ell].
 *
 * At the optimum the growth rate estimate is lambda_E = -objective / 2.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "spt/model.hpp"
#include "spt/portfolio.hpp"

namespace spt {

class LogAffineFamily {
public:
    LogAffineFamily(int m, int k, int d);
    /// Takes an M-long list of K x d coefficient blocks. All entries must be positive.
    explicit LogAffineFamily(std::vector<Mat> blocks);

    int size() const { return static_cast<int>(blocks_.size()); }
    int pieces() const { return k_; }
    int dim() const { return d_; }
    const Mat& block(int m) const { return blocks_[m]; }
    Mat& block(int m) { return blocks_[m]; }

    double value(int m, const Vec& x) const;
    /// Index of the active hyperplane (lowest index on ties).
    int active(int m, const Vec& x) const;

    /// Appends the members of another family with the same K and d.
    void append(const LogAffineFamily& more);

private:
    int k_ = 0;
    int d_ = 0;
    std::vector<Mat> blocks_;
};

/// Member m is drawn from its own stream, so generate_family(M2, ...) extends generate_family(M1, ...).
LogAffineFamily generate_family(int m, int k, int d, std::uint64_t seed);

TangentVector supergradient(const LogAffineFamily& fam, int m, const SimplexPoint& x);

struct QpProblem {
    Mat Q;
    Vec r;
    double C = 0.0;         ///< E[ell^T c ell]
    double C_stderr = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
    double min_eigenvalue = 0.0;  ///< before flooring
};

/// Q and r from n draws of p (importance-weighted when p is not directly sampleable).
QpProblem assemble_qp(const ModelInputs& m, const LogAffineFamily& fam, std::size_t n, std::uint64_t seed);

/// Standard error of the objective at mu under the sampling that built Q and r.
double qp_objective_stderr(const ModelInputs& m, const LogAffineFamily& fam, const QpProblem& qp, const Vec& mu);

struct QpSolution {
    Vec mu;
    double objective = 0.0;
    double fw_gap = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> objective_trace;
    double lambda_from_objective() const { return -0.5 * objective; }
};

QpSolution solve_qp(const QpProblem& qp, double tol = 1e-8, int max_iter = 100000);
QpSolution solve_qp(const Mat& Q, const Vec& r, double tol = 1e-8, int max_iter = 100000);

GeneratedPortfolio qp_portfolio(const LogAffineFamily& fam, const Vec& mu);

struct LambdaEReport {
    double estimate = 0.0;
    double stderr_ = 0.0;
    double half_norm = 0.0;  ///< E[grad psi^T c grad psi] / 2
    double half_norm_stderr = 0.0;
    bool lower_bound_ok = true;  ///< estimate >= half_norm - 2 stderr
};

LambdaEReport lambda_E_estimate(const ModelInputs& m, const GeneratedPortfolio& gp, std::size_t n, std::uint64_t seed);

nlohmann::json qp_bundle(const LogAffineFamily& fam, const QpProblem& qp, const QpSolution& sol,
                         const LambdaEReport& lam, std::uint64_t family_seed);

} // namespace spt
