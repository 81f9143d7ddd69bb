#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mvsk/kernels.hpp"
#include "mvsk/scalings.hpp"
#include "mvsk/types.hpp"

namespace mvsk {

/// N distinct scattered nodes in R^d, optionally tagged with region labels.
class NodeSet {
public:
    explicit NodeSet(PointSet points, std::optional<DomainBox> domain = std::nullopt, std::vector<int> labels = {})
        : points_(std::move(points)), domain_(std::move(domain)), labels_(std::move(labels)) {
        if (points_.rows() < 1) throw InvalidArgument("a node set needs at least one node");
        if (!labels_.empty() && static_cast<Eigen::Index>(labels_.size()) != points_.rows()) {
            throw ShapeError("region labels must have one entry per node");
        }
        if (!points_.allFinite()) throw InvalidArgument("node coordinates must be finite");
        if (domain_) {
            if (domain_->dim() != points_.cols()) throw ShapeError("node dimension does not match the domain box");
            for (Eigen::Index i = 0; i < points_.rows(); ++i) {
                if (!domain_->contains(points_.row(i).transpose())) {
                    throw InvalidArgument("node " + std::to_string(i) + " lies outside the domain box");
                }
            }
        }
        for (Eigen::Index i = 0; i < points_.rows(); ++i) {
            for (Eigen::Index j = i + 1; j < points_.rows(); ++j) {
                if (euclidean_distance(points_.row(i), points_.row(j)) == 0.0) {
                    throw InvalidArgument("duplicate nodes " + std::to_string(i) + " and " + std::to_string(j));
                }
            }
        }
    }

    [[nodiscard]] const PointSet& points() const noexcept { return points_; }
    [[nodiscard]] Eigen::Index size() const noexcept { return points_.rows(); }
    [[nodiscard]] Eigen::Index dim() const noexcept { return points_.cols(); }
    [[nodiscard]] const std::optional<DomainBox>& domain() const noexcept { return domain_; }
    [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
    [[nodiscard]] auto point(Eigen::Index i) const { return points_.row(i).transpose(); }

private:
    PointSet points_;
    std::optional<DomainBox> domain_;
    std::vector<int> labels_;
};

[[nodiscard]] inline Matrix pairwise_distances(const PointSet& a) {
    const auto n = a.rows();
    Matrix d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double r = euclidean_distance(a.row(i), a.row(j));
            d(i, j) = r;
            d(j, i) = r;
        }
    }
    return d;
}

/// Rows index `queries`, columns index `nodes`.
[[nodiscard]] inline Matrix cross_distances(const PointSet& queries, const PointSet& nodes) {
    if (queries.cols() != nodes.cols()) throw ShapeError("query and node dimensions differ");
    Matrix d(queries.rows(), nodes.rows());
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        for (Eigen::Index i = 0; i < nodes.rows(); ++i) d(q, i) = euclidean_distance(queries.row(q), nodes.row(i));
    }
    return d;
}

[[nodiscard]] inline Matrix kernel_from_distances(const RadialKernel& kernel, const Matrix& distances) {
    return distances.unaryExpr([&](double r) { return kernel.eval_profile(r); });
}

/// K_ij = kappa^S_psi(x_i, x_j), computed as the plain kernel on Lambda(X).
[[nodiscard]] inline Matrix assemble_gram(const RadialKernel& kernel, const AugmentedMap& map, const NodeSet& nodes) {
    return kernel_from_distances(kernel, pairwise_distances(map.apply_rows(nodes.points())));
}

// ---------------------------------------------------------------------------
// Conditioning
// ---------------------------------------------------------------------------

struct ConditionEstimate {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    double condition = std::numeric_limits<double>::infinity();
    bool exact = false;
};

[[nodiscard]] inline ConditionEstimate exact_condition(const Matrix& k) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(k, Eigen::EigenvaluesOnly);
    ConditionEstimate c;
    c.exact = true;
    if (es.info() != Eigen::Success) return c;
    c.lambda_min = es.eigenvalues()(0);
    c.lambda_max = es.eigenvalues()(es.eigenvalues().size() - 1);
    c.condition = c.lambda_min > 0.0 ? c.lambda_max / c.lambda_min : std::numeric_limits<double>::infinity();
    return c;
}

namespace detail {

inline Vector power_start(Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i) + 0.3);
    return v.normalized();
}

/// Rayleigh quotient of the dominant eigenpair of an SPD operator.
template <typename Apply>
double dominant_eigenvalue(Apply&& apply, Eigen::Index n, int max_iters = 100, double tol = 1e-8) {
    Vector v = power_start(n);
    double lambda = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Vector w = apply(v);
        const double next = v.dot(w);
        const double norm = w.norm();
        if (!std::isfinite(norm) || norm == 0.0) return std::isfinite(norm) ? 0.0 : std::numeric_limits<double>::infinity();
        v = w / norm;
        if (it > 0 && std::abs(next - lambda) <= tol * std::abs(next)) return next;
        lambda = next;
    }
    return lambda;
}

}  // namespace detail

/// Power iteration on K for lambda_max and on K^{-1} (through the factorization) for lambda_min.
[[nodiscard]] inline ConditionEstimate iterative_condition(const Matrix& k, const Eigen::LLT<Matrix>& llt) {
    ConditionEstimate c;
    const auto n = k.rows();
    c.lambda_max = detail::dominant_eigenvalue([&](const Vector& v) -> Vector { return k * v; }, n);
    const double inv_max = detail::dominant_eigenvalue([&](const Vector& v) -> Vector { return llt.solve(v); }, n);
    if (!(inv_max > 0.0) || !std::isfinite(inv_max)) return c;
    c.lambda_min = 1.0 / inv_max;
    c.condition = c.lambda_max / c.lambda_min;
    return c;
}

// ---------------------------------------------------------------------------
// Fitting and evaluation
// ---------------------------------------------------------------------------

struct FitOptions {
    double ridge = 0.0;
    double max_condition = 1e16;
    Eigen::Index exact_condition_limit = 500;
};

struct FitDiagnostics {
    double condition_estimate = std::numeric_limits<double>::quiet_NaN();
    double residual_at_nodes = std::numeric_limits<double>::quiet_NaN();
    std::string solver;
};

/// Fitted kernel interpolant R(x) = sum_i c_i kappa^S_psi(x, x_i).
class Interpolant {
public:
    /// `coefficient_tail` holds the low-order parts of the coefficients (empty means zero).
    Interpolant(NodeSet nodes, RadialKernel kernel, AugmentedMap map, Vector coefficients, FitDiagnostics diagnostics,
                Vector coefficient_tail = Vector())
        : nodes_(std::move(nodes)),
          kernel_(kernel),
          map_(std::move(map)),
          coefficients_(std::move(coefficients)),
          coefficient_tail_(std::move(coefficient_tail)),
          diagnostics_(std::move(diagnostics)),
          augmented_nodes_(map_.apply_rows(nodes_.points())) {
        if (coefficients_.size() != nodes_.size()) throw ShapeError("one coefficient per node required");
        if (coefficient_tail_.size() == 0) coefficient_tail_ = Vector::Zero(coefficients_.size());
        if (coefficient_tail_.size() != coefficients_.size()) throw ShapeError("one coefficient tail per node required");
    }

    [[nodiscard]] const NodeSet& nodes() const noexcept { return nodes_; }
    [[nodiscard]] const RadialKernel& kernel() const noexcept { return kernel_; }
    [[nodiscard]] const AugmentedMap& map() const noexcept { return map_; }
    [[nodiscard]] const Vector& coefficients() const noexcept { return coefficients_; }
    [[nodiscard]] const Vector& coefficient_tail() const noexcept { return coefficient_tail_; }
    [[nodiscard]] const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
    [[nodiscard]] const PointSet& augmented_nodes() const noexcept { return augmented_nodes_; }

    template <typename V>
    [[nodiscard]] double operator()(const Eigen::MatrixBase<V>& x) const {
        const Point a = map_(x);
        long double sum = 0.0L;
        for (Eigen::Index i = 0; i < augmented_nodes_.rows(); ++i) {
            const long double c = static_cast<long double>(coefficients_(i)) + coefficient_tail_(i);
            sum += c * kernel_.eval_profile(euclidean_distance(a, augmented_nodes_.row(i)));
        }
        return static_cast<double>(sum);
    }

    [[nodiscard]] Vector evaluate(const PointSet& queries) const {
        if (queries.cols() != nodes_.dim()) throw ShapeError("query dimension does not match the nodes");
        Vector out(queries.rows());
        for (Eigen::Index q = 0; q < queries.rows(); ++q) out(q) = (*this)(queries.row(q).transpose());
        return out;
    }

private:
    NodeSet nodes_;
    RadialKernel kernel_;
    AugmentedMap map_;
    Vector coefficients_;
    Vector coefficient_tail_;
    FitDiagnostics diagnostics_;
    PointSet augmented_nodes_;
};

namespace detail {

struct Solved {
    Vector coefficients;
    Vector tail;
    std::string solver;
};

/// f - K (c + tail) accumulated in extended precision.
inline Vector extended_residual(const Matrix& k, const Vector& c, const Vector& tail, const Vector& f) {
    Vector r(f.size());
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
        long double sum = f(i);
        for (Eigen::Index j = 0; j < k.cols(); ++j) {
            sum -= static_cast<long double>(k(i, j)) * (static_cast<long double>(c(j)) + tail(j));
        }
        r(i) = static_cast<double>(sum);
    }
    return r;
}

/// Mixed-precision iterative refinement with coefficients carried as head + tail;
/// keeps the iterate with the smallest residual.
template <typename Solve>
Solved refine(const Matrix& k, const Vector& f, Vector c, Solve&& solve, std::string solver, int steps = 4) {
    Vector tail = Vector::Zero(c.size());
    Vector r = extended_residual(k, c, tail, f);
    double best = r.lpNorm<Eigen::Infinity>();
    for (int s = 0; s < steps && best > 0.0; ++s) {
        const Vector dc = solve(r);
        if (!dc.allFinite()) break;
        Vector nc(c.size()), nt(c.size());
        for (Eigen::Index i = 0; i < c.size(); ++i) {
            const long double sum = static_cast<long double>(c(i)) + tail(i) + dc(i);
            nc(i) = static_cast<double>(sum);
            nt(i) = static_cast<double>(sum - nc(i));
        }
        const Vector rn = extended_residual(k, nc, nt, f);
        const double norm = rn.lpNorm<Eigen::Infinity>();
        if (!(norm < best)) break;
        c = std::move(nc);
        tail = std::move(nt);
        r = rn;
        best = norm;
    }
    return {std::move(c), std::move(tail), std::move(solver)};
}

inline Solved solve_symmetric(const Matrix& k, const Vector& f) {
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() == Eigen::Success) {
        auto solve = [&](const Vector& b) -> Vector { return llt.solve(b); };
        return refine(k, f, solve(f), solve, "cholesky");
    }
    Eigen::LDLT<Matrix> ldlt(k);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
        auto solve = [&](const Vector& b) -> Vector { return ldlt.solve(b); };
        Vector c = solve(f);
        if (c.allFinite()) return refine(k, f, std::move(c), solve, "ldlt");
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    if (es.info() != Eigen::Success || es.eigenvalues()(0) <= 0.0) {
        throw IllConditionedError("Gram matrix factorization failed",
                                  std::numeric_limits<double>::infinity());
    }
    auto solve = [&](const Vector& b) -> Vector {
        return es.eigenvectors() * (es.eigenvectors().transpose() * b).cwiseQuotient(es.eigenvalues());
    };
    return refine(k, f, solve(f), solve, "eigen");
}

}  // namespace detail

/// Solves K c = f for the (M)VSK Gram matrix.
///
/// Throws IllConditionedError when the factorization fails or cond(K) exceeds
/// `options.max_condition`; callers typically react by switching kernel, epsilon or map.
[[nodiscard]] inline Interpolant fit(const RadialKernel& kernel, const AugmentedMap& map, const NodeSet& nodes,
                                     const Vector& values, const FitOptions& options = {}) {
    if (values.size() != nodes.size()) throw ShapeError("one value per node required");
    if (!values.allFinite()) throw InvalidArgument("node values must be finite");
    if (options.ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
    Matrix k = assemble_gram(kernel, map, nodes);
    if (options.ridge > 0.0) k.diagonal().array() += options.ridge;

    ConditionEstimate cond;
    if (k.rows() <= options.exact_condition_limit) {
        cond = exact_condition(k);
    } else {
        Eigen::LLT<Matrix> llt(k);
        if (llt.info() == Eigen::Success) cond = iterative_condition(k, llt);
    }
    if (!(cond.condition <= options.max_condition)) {
        throw IllConditionedError("Gram matrix condition estimate " + std::to_string(cond.condition) +
                                      " exceeds " + std::to_string(options.max_condition),
                                  cond.condition);
    }
    auto solved = detail::solve_symmetric(k, values);
    FitDiagnostics diag;
    diag.condition_estimate = cond.condition;
    diag.residual_at_nodes = detail::extended_residual(k, solved.coefficients, solved.tail, values).lpNorm<Eigen::Infinity>();
    diag.solver = std::move(solved.solver);
    return {nodes, kernel, map, std::move(solved.coefficients), std::move(diag), std::move(solved.tail)};
}

[[nodiscard]] inline Vector evaluate(const Interpolant& interp, const PointSet& queries) {
    return interp.evaluate(queries);
}

/// P(x) = sqrt(kappa(x,x) - k(x)^T K^{-1} k(x)), the pointwise worst-case error factor.
[[nodiscard]] inline Vector power_function(const RadialKernel& kernel, const AugmentedMap& map, const NodeSet& nodes,
                                           const PointSet& queries) {
    if (queries.cols() != nodes.dim()) throw ShapeError("query dimension does not match the nodes");
    const PointSet aug_nodes = map.apply_rows(nodes.points());
    const Matrix k = kernel_from_distances(kernel, pairwise_distances(aug_nodes));
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) {
        throw IllConditionedError("Gram matrix is not numerically positive definite",
                                  std::numeric_limits<double>::infinity());
    }
    const PointSet aug_q = map.apply_rows(queries);
    const Matrix kq = kernel_from_distances(kernel, cross_distances(aug_q, aug_nodes));
    const Matrix w = llt.matrixL().solve(kq.transpose());
    const double diag = kernel.at_zero();
    const double floor = -1e-12 * std::max(1.0, diag);
    Vector out(queries.rows());
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        const double radicand = diag - w.col(q).squaredNorm();
        if (radicand < floor) {
            throw NumericalBreakdown("power function radicand " + std::to_string(radicand) + " is negative");
        }
        out(q) = std::sqrt(std::max(radicand, 0.0));
    }
    return out;
}

}  // namespace mvsk
