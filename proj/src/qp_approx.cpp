#include "spt/qp_approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>

#include "spt/errors.hpp"
#include "spt/integrate.hpp"
#include "spt/random.hpp"

namespace spt {

LogAffineFamily::LogAffineFamily(int m, int k, int d) : k_(k), d_(d), blocks_(m, Mat::Ones(k, d))
{
    if (m < 1 || k < 1 || d < 2) throw InvalidParameter("family needs M >= 1, K >= 1, d >= 2");
}

LogAffineFamily::LogAffineFamily(std::vector<Mat> blocks) : blocks_(std::move(blocks))
{
    if (blocks_.empty()) throw InvalidParameter("family needs at least one member");
    k_ = static_cast<int>(blocks_[0].rows());
    d_ = static_cast<int>(blocks_[0].cols());
    for (const Mat& b : blocks_) {
        if (b.rows() != k_ || b.cols() != d_) throw InvalidParameter("family blocks must share K and d");
        if (!(b.array() > 0.0).all() || !b.allFinite()) throw InvalidParameter("family coefficients must be positive");
    }
}

double LogAffineFamily::value(int m, const Vec& x) const { return std::log((blocks_[m] * x).minCoeff()); }

int LogAffineFamily::active(int m, const Vec& x) const
{
    const Vec v = blocks_[m] * x;
    int best = 0;
    for (int k = 1; k < k_; ++k)
        if (v[k] < v[best]) best = k;
    return best;
}

void LogAffineFamily::append(const LogAffineFamily& more)
{
    if (more.k_ != k_ || more.d_ != d_) throw InvalidParameter("appended family must share K and d");
    blocks_.insert(blocks_.end(), more.blocks_.begin(), more.blocks_.end());
}

LogAffineFamily generate_family(int m, int k, int d, std::uint64_t seed)
{
    if (m < 1 || k < 1) throw InvalidParameter("generate_family: M and K must be at least 1");
    if (d < 2) throw InvalidParameter("generate_family: d must be at least 2");
    std::vector<Mat> blocks(m, Mat(k, d));
    for (int i = 0; i < m; ++i) {
        Rng rng(seed, static_cast<std::uint64_t>(i));
        for (int r = 0; r < k; ++r) {
            double total = 0.0;
            for (int c = 0; c < d; ++c) {
                blocks[i](r, c) = std::max(rng.gamma(1.0), std::numeric_limits<double>::min());
                total += blocks[i](r, c);
            }
            blocks[i].row(r) *= d / total;
        }
    }
    return LogAffineFamily(std::move(blocks));
}

TangentVector supergradient(const LogAffineFamily& fam, int m, const SimplexPoint& x)
{
    const int k = fam.active(m, x.coords());
    const Vec w = fam.block(m).row(k).transpose();
    return TangentVector(w / w.dot(x.coords()));
}

namespace {

/// Zero-mean supergradients of every member at x, one per row.
Mat gradient_rows(const LogAffineFamily& fam, const Vec& x)
{
    const int M = fam.size();
    Mat g(M, fam.dim());
    for (int m = 0; m < M; ++m) {
        const int k = fam.active(m, x);
        const auto w = fam.block(m).row(k);
        g.row(m) = w / w.dot(x);
        g.row(m).array() -= g.row(m).mean();
    }
    return g;
}

struct Accumulator {
    Mat Q;
    Vec r;
    double C = 0.0;
    double C2 = 0.0;
};

} // namespace

QpProblem assemble_qp(const ModelInputs& m, const LogAffineFamily& fam, std::size_t n, std::uint64_t seed)
{
    if (fam.dim() != m.dim) throw InvalidInput("family dimension does not match the model");
    if (n == 0) throw InvalidParameter("assemble_qp: need at least one sample");
    const WeightedSample sample = draw_weighted(m, n, seed);
    const int M = fam.size();

    constexpr std::size_t chunk = 256;
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<Accumulator> parts(n_chunks);
    parallel_chunks(n_chunks, [&](std::size_t c) {
        Accumulator& acc = parts[c];
        acc.Q = Mat::Zero(M, M);
        acc.r = Vec::Zero(M);
        const std::size_t end = std::min(n, (c + 1) * chunk);
        for (std::size_t s = c * chunk; s < end; ++s) {
            const SimplexPoint& x = sample.points[s];
            const double w = sample.weights[s];
            const Mat cov = covariance(m, x);
            const Vec l = ell(m, x).canonical();
            const Mat g = gradient_rows(fam, x.coords());
            const Mat gc = g * cov;
            const Mat q = 2.0 * gc * g.transpose();
            const Vec rv = 2.0 * gc * l;
            const double cl = l.dot(cov * l);
            if (!q.allFinite() || !rv.allFinite() || !std::isfinite(cl))
                throw NumericalError("assemble_qp: non-finite contribution at sample " + std::to_string(s));
            acc.Q.noalias() += w * q;
            acc.r.noalias() += w * rv;
            acc.C += w * cl;
            acc.C2 += w * w * cl * cl;
        }
    });

    QpProblem qp;
    qp.Q = Mat::Zero(M, M);
    qp.r = Vec::Zero(M);
    double c2 = 0.0;
    for (const auto& a : parts) {
        qp.Q += a.Q;
        qp.r += a.r;
        qp.C += a.C;
        c2 += a.C2;
    }
    qp.C_stderr = std::sqrt(std::max(0.0, c2 - [&] {
        double s2 = 0.0;
        for (double w : sample.weights) s2 += w * w;
        return s2 * qp.C * qp.C;
    }()));
    qp.Q = 0.5 * (qp.Q + qp.Q.transpose()).eval();
    qp.n_samples = n;
    qp.seed = seed;

    Eigen::SelfAdjointEigenSolver<Mat> es(qp.Q);
    if (es.info() != Eigen::Success) throw NumericalError("assemble_qp: eigensolver failed");
    qp.min_eigenvalue = es.eigenvalues().minCoeff();
    if (qp.min_eigenvalue < 0.0) {
        const Vec ev = es.eigenvalues().cwiseMax(0.0);
        qp.Q = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
        qp.Q = 0.5 * (qp.Q + qp.Q.transpose()).eval();
    }
    return qp;
}

double qp_objective_stderr(const ModelInputs& m, const LogAffineFamily& fam, const QpProblem& qp, const Vec& mu)
{
    const WeightedSample sample = draw_weighted(m, qp.n_samples, qp.seed);
    const auto vals = map_points<double>(sample.points, [&](const SimplexPoint& x) {
        const Mat cov = covariance(m, x);
        const Vec l = ell(m, x).canonical();
        const Vec gpsi = gradient_rows(fam, x.coords()).transpose() * mu;
        return gpsi.dot(cov * gpsi) - 2.0 * gpsi.dot(cov * l);
    });
    return weighted_mean(sample, vals).stderr_;
}

namespace {

double objective(const Mat& Q, const Vec& r, const Vec& mu) { return 0.5 * mu.dot(Q * mu) - mu.dot(r); }

} // namespace

namespace {

// Minimizes over the affine hull of the current support, then walks toward that minimizer as far as feasibility allows.
std::optional<std::pair<Vec, double>> face_step(const Mat& Q, const Vec& r, const Vec& mu, double f)
{
    std::vector<Eigen::Index> S;
    for (Eigen::Index i = 0; i < mu.size(); ++i)
        if (mu[i] > 0.0) S.push_back(i);
    const Eigen::Index k = static_cast<Eigen::Index>(S.size());
    if (k < 2) return std::nullopt;
    Mat K = Mat::Zero(k + 1, k + 1);
    Vec rhs(k + 1);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = 0; b < k; ++b) K(a, b) = Q(S[a], S[b]);
        K(a, k) = K(k, a) = 1.0;
        rhs[a] = r[S[a]];
    }
    rhs[k] = 1.0;
    const Vec sol = K.completeOrthogonalDecomposition().solve(rhs);
    Vec target = Vec::Zero(mu.size());
    for (Eigen::Index a = 0; a < k; ++a) target[S[a]] = sol[a];
    if (!target.allFinite()) return std::nullopt;
    const Vec dir = target - mu;
    double alpha = 1.0;
    for (Eigen::Index a = 0; a < k; ++a)
        if (dir[S[a]] < 0.0) alpha = std::min(alpha, -mu[S[a]] / dir[S[a]]);
    Vec next = (mu + alpha * dir).cwiseMax(0.0);
    next /= next.sum();
    const double fn = objective(Q, r, next);
    if (!(fn < f)) return std::nullopt;
    return std::make_pair(std::move(next), fn);
}

} // namespace

QpSolution solve_qp(const Mat& Q, const Vec& r, double tol, int max_iter)
{
    const Eigen::Index M = r.size();
    if (Q.rows() != M || Q.cols() != M) throw InvalidInput("solve_qp: Q and r sizes differ");
    if (!(tol > 0.0)) throw InvalidParameter("solve_qp: tolerance must be positive");

    QpSolution sol;
    sol.mu = Vec::Constant(M, 1.0 / static_cast<double>(M));
    Vec grad = Q * sol.mu - r;
    double f = objective(Q, r, sol.mu);
    sol.objective_trace.push_back(f);
    const double lmax = std::max(Q.diagonal().maxCoeff(), 1e-12);
    double step = 1.0 / lmax;
    Vec prev_mu = sol.mu, prev_grad = grad;

    auto gap_of = [&](const Vec& mu, const Vec& g) { return mu.dot(g) - g.minCoeff(); };
    sol.fw_gap = gap_of(sol.mu, grad);

    int it = 0;
    for (; it < max_iter && sol.fw_gap > tol; ++it) {
        Vec candidate;
        double fc = 0.0;
        double t = step;
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            candidate = project_to_closed_simplex(sol.mu - t * grad);
            fc = objective(Q, r, candidate);
            const Vec diff = candidate - sol.mu;
            // sufficient decrease for the projected step
            if (fc <= f + grad.dot(diff) + 0.5 / t * diff.squaredNorm()) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted || fc > f) {
            // Line search exhausted: fall back to an exact Frank-Wolfe step, which cannot increase f.
            Eigen::Index j;
            grad.minCoeff(&j);
            Vec dir = -sol.mu;
            dir[j] += 1.0;
            const double curv = dir.dot(Q * dir);
            const double slope = grad.dot(dir);
            const double gamma = curv > 0.0 ? std::clamp(-slope / curv, 0.0, 1.0) : 1.0;
            candidate = sol.mu + gamma * dir;
            fc = objective(Q, r, candidate);
            if (fc > f) {
                candidate = sol.mu;
                fc = f;
            }
        }
        if (auto face = face_step(Q, r, candidate, fc)) {
            candidate = std::move(face->first);
            fc = face->second;
        }
        prev_mu = sol.mu;
        prev_grad = grad;
        sol.mu = candidate;
        grad = Q * sol.mu - r;
        f = fc;
        sol.objective_trace.push_back(f);
        sol.fw_gap = gap_of(sol.mu, grad);
        // Barzilai-Borwein initial step for the next line search
        const Vec s = sol.mu - prev_mu, y = grad - prev_grad;
        const double sy = s.dot(y);
        step = sy > 1e-300 ? s.squaredNorm() / sy : 1.0 / lmax;
        step = std::clamp(step, 1e-12 / lmax, 1e12 / lmax);
        if (s.squaredNorm() == 0.0 && sol.fw_gap > tol) step = 1.0 / lmax;
    }
    sol.iterations = it;
    sol.objective = f;
    sol.converged = sol.fw_gap <= tol;
    return sol;
}

QpSolution solve_qp(const QpProblem& qp, double tol, int max_iter) { return solve_qp(qp.Q, qp.r, tol, max_iter); }

GeneratedPortfolio qp_portfolio(const LogAffineFamily& fam, const Vec& mu)
{
    if (mu.size() != fam.size()) throw InvalidInput("qp_portfolio: mixture weights do not match the family size");
    if ((mu.array() < -1e-12).any() || std::abs(mu.sum() - 1.0) > 1e-9)
        throw InvalidInput("qp_portfolio: mixture weights must lie in the probability simplex");
    std::vector<int> support;
    for (int m = 0; m < fam.size(); ++m)
        if (mu[m] > 0.0) support.push_back(m);
    auto f = std::make_shared<const LogAffineFamily>(fam);
    GeneratedPortfolio gp;
    gp.name = "qp";
    gp.log_G = [f, mu, support](const Vec& x) {
        double v = 0.0;
        for (int m : support) v += mu[m] * f->value(m, x);
        return v;
    };
    gp.grad_log_G = [f, mu, support](const Vec& x) {
        Vec g = Vec::Zero(x.size());
        for (int m : support) {
            const auto w = f->block(m).row(f->active(m, x));
            g += (mu[m] / w.dot(x)) * w.transpose();
        }
        return g;
    };
    gp.smooth = false;
    gp.concave = Concavity::yes;
    return gp;
}

LambdaEReport lambda_E_estimate(const ModelInputs& m, const GeneratedPortfolio& gp, std::size_t n, std::uint64_t seed)
{
    const WeightedSample sample = draw_weighted(m, n, seed);
    struct Terms {
        double gain;
        double norm;
    };
    const auto vals = map_points<Terms>(sample.points, [&](const SimplexPoint& x) {
        const Mat c = covariance(m, x);
        const Vec l = ell(m, x).canonical();
        Vec g = gp.grad_log_G(x.coords());
        g.array() -= g.mean();
        const Vec res = l - g;
        return Terms{0.5 * (l.dot(c * l) - res.dot(c * res)), 0.5 * g.dot(c * g)};
    });
    std::vector<double> gain(vals.size()), norm(vals.size());
    for (std::size_t k = 0; k < vals.size(); ++k) {
        gain[k] = vals[k].gain;
        norm[k] = vals[k].norm;
    }
    const MeanEstimate e = weighted_mean(sample, gain), h = weighted_mean(sample, norm);
    LambdaEReport rep;
    rep.estimate = e.mean;
    rep.stderr_ = e.stderr_;
    rep.half_norm = h.mean;
    rep.half_norm_stderr = h.stderr_;
    rep.lower_bound_ok = rep.estimate >= rep.half_norm - 2.0 * rep.stderr_;
    return rep;
}

nlohmann::json qp_bundle(const LogAffineFamily& fam, const QpProblem& qp, const QpSolution& sol,
                         const LambdaEReport& lam, std::uint64_t family_seed)
{
    using nlohmann::json;
    auto vec = [](const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    json j;
    j["M"] = fam.size();
    j["K"] = fam.pieces();
    j["d"] = fam.dim();
    j["family_seed"] = family_seed;
    j["sample_seed"] = qp.seed;
    j["N"] = qp.n_samples;
    json q = json::array();
    for (Eigen::Index i = 0; i < qp.Q.rows(); ++i) q.push_back(vec(qp.Q.row(i).transpose()));
    j["Q"] = q;
    j["r"] = vec(qp.r);
    j["C"] = qp.C;
    j["C_stderr"] = qp.C_stderr;
    j["Q_min_eigenvalue_raw"] = qp.min_eigenvalue;
    j["mu"] = vec(sol.mu);
    j["objective"] = sol.objective;
    j["fw_gap"] = sol.fw_gap;
    j["iterations"] = sol.iterations;
    j["Converged"] = sol.converged;
    j["lambda_E"] = {{"estimate", lam.estimate},
                     {"stderr", lam.stderr_},
                     {"from_objective", sol.lambda_from_objective()},
                     {"half_norm", lam.half_norm},
                     {"lower_bound_ok", lam.lower_bound_ok}};
    json fam_j = json::array();
    for (int m = 0; m < fam.size(); ++m) {
        json rows = json::array();
        for (int k = 0; k < fam.pieces(); ++k) rows.push_back(vec(fam.block(m).row(k).transpose()));
        fam_j.push_back(rows);
    }
    j["family"] = fam_j;
    return j;
}

} // namespace spt
