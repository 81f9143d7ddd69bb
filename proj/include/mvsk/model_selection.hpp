#pragma once

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mvsk/interpolation.hpp"
#include "mvsk/kernels.hpp"
#include "mvsk/scalings.hpp"

namespace mvsk {

[[nodiscard]] inline std::vector<double> linspace(double lo, double hi, int count) {
    if (count < 1) throw InvalidArgument("linspace needs a positive count");
    std::vector<double> out(static_cast<std::size_t>(count));
    if (count == 1) {
        out[0] = lo;
        return out;
    }
    for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
    return out;
}

struct LoocvConfig {
    /// 200 equispaced values in [0.01, 50].
    std::vector<double> epsilon_grid = linspace(0.01, 50.0, 200);
    /// An epsilon whose Gram matrix has a larger (estimated) condition number is scored +inf.
    double max_condition = 1e12;

    void validate() const {
        if (epsilon_grid.empty()) throw InvalidArgument("epsilon grid must not be empty");
        for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
            if (!(epsilon_grid[i] > 0.0)) throw InvalidArgument("epsilon grid values must be positive");
            if (i > 0 && !(epsilon_grid[i - 1] < epsilon_grid[i])) {
                throw InvalidArgument("epsilon grid must be strictly increasing");
            }
        }
        if (!(max_condition > 1.0)) throw InvalidArgument("max_condition must exceed 1");
    }
};

struct LoocvPoint {
    double epsilon = 0.0;
    double score = std::numeric_limits<double>::infinity();
    double condition = std::numeric_limits<double>::quiet_NaN();
    std::string failure;  ///< empty when the epsilon was scored
};

struct EpsilonSelection {
    double best_epsilon = 0.0;
    std::vector<LoocvPoint> score_curve;
};

namespace detail {

struct LooResult {
    Matrix errors;  ///< one column per right-hand side
    double condition = std::numeric_limits<double>::infinity();
    std::string failure;
};

/// Rippa's identity e_i = c_i / (K^{-1})_ii, one Cholesky per kernel matrix.
/// `refine_inverse` refines K^{-1} with extended-precision residuals (O(N^3) extra work).
inline LooResult rippa(const Matrix& k, const Matrix& values, double max_condition, bool refine_inverse = false) {
    LooResult out;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) {
        out.failure = "cholesky failed";
        return out;
    }
    const ConditionEstimate cond = iterative_condition(k, llt);
    out.condition = cond.condition;
    if (!(cond.condition <= max_condition)) {
        out.failure = "condition estimate " + std::to_string(cond.condition) + " above limit";
        return out;
    }
    const auto n = k.rows();
    const auto solve = [&](const Vector& b) -> Vector { return llt.solve(b); };
    Matrix c(n, values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
        const Vector f = values.col(j);
        const Solved s = refine(k, f, solve(f), solve, "cholesky");
        c.col(j) = s.coefficients + s.tail;
    }
    Vector kinv_diag;
    if (refine_inverse) {
        Matrix x = llt.solve(Matrix::Identity(n, n));
        for (int step = 0; step < 2; ++step) {
            Matrix r(n, n);
            for (Eigen::Index j = 0; j < n; ++j) {
                for (Eigen::Index i = 0; i < n; ++i) {
                    long double sum = i == j ? 1.0L : 0.0L;
                    for (Eigen::Index m = 0; m < n; ++m) sum -= static_cast<long double>(k(i, m)) * x(m, j);
                    r(i, j) = static_cast<double>(sum);
                }
            }
            x += llt.solve(r);
        }
        kinv_diag = x.diagonal();
    } else {
        Matrix linv = Matrix::Identity(n, n);
        llt.matrixL().solveInPlace(linv);
        kinv_diag = linv.colwise().squaredNorm().transpose();
    }
    out.errors = c.array().colwise() / kinv_diag.array();
    if (!out.errors.allFinite()) {
        out.failure = "non-finite leave-one-out errors";
        out.errors.resize(0, 0);
    }
    return out;
}

inline double loo_score(const Matrix& errors) {
    return std::sqrt(errors.squaredNorm() / static_cast<double>(errors.rows()));
}

}  // namespace detail

/// Leave-one-out residuals e_i = f(x_i) - R^{(-i)}(x_i) via Rippa's shortcut.
[[nodiscard]] inline Vector loo_errors(const RadialKernel& kernel, const AugmentedMap& map, const NodeSet& nodes,
                                       const Vector& values, double max_condition = 1e16) {
    if (nodes.size() < 2) throw InvalidArgument("leave-one-out needs at least two nodes");
    if (values.size() != nodes.size()) throw ShapeError("one value per node required");
    const auto res = detail::rippa(assemble_gram(kernel, map, nodes), values, max_condition, true);
    if (!res.failure.empty()) throw IllConditionedError("leave-one-out: " + res.failure, res.condition);
    return res.errors.col(0);
}

/// Grid search for the shape parameter minimizing the LOO score
/// sqrt((1/N) sum_i sum_c e_ic^2) over the value columns. Ties go to the smaller epsilon.
[[nodiscard]] inline EpsilonSelection select_epsilon(const LoocvConfig& config, Profile profile,
                                                     const AugmentedMap& map, const NodeSet& nodes,
                                                     const Matrix& values) {
    config.validate();
    if (nodes.size() < 2) throw InvalidArgument("leave-one-out needs at least two nodes");
    if (values.rows() != nodes.size() || values.cols() < 1) throw ShapeError("one value row per node required");
    const Matrix distances = pairwise_distances(map.apply_rows(nodes.points()));

    EpsilonSelection sel;
    double best = std::numeric_limits<double>::infinity();
    std::string log;
    for (double eps : config.epsilon_grid) {
        const RadialKernel kernel(profile, eps);
        LoocvPoint pt;
        pt.epsilon = eps;
        const auto res = detail::rippa(kernel_from_distances(kernel, distances), values, config.max_condition);
        pt.condition = res.condition;
        if (res.failure.empty()) {
            pt.score = detail::loo_score(res.errors);
            if (pt.score < best) {
                best = pt.score;
                sel.best_epsilon = eps;
            }
        } else {
            pt.failure = res.failure;
            log += "\n  eps=" + std::to_string(eps) + ": " + res.failure;
        }
        sel.score_curve.push_back(std::move(pt));
    }
    if (!std::isfinite(best)) throw SelectionError("every epsilon on the grid failed:" + log);
    return sel;
}

[[nodiscard]] inline EpsilonSelection select_epsilon(const LoocvConfig& config, Profile profile,
                                                     const AugmentedMap& map, const NodeSet& nodes,
                                                     const Vector& values) {
    return select_epsilon(config, profile, map, nodes, Matrix(values));
}

}  // namespace mvsk
