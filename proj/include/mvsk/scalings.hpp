#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mvsk/kernels.hpp"
#include "mvsk/types.hpp"

namespace mvsk {

/// Splits Omega into disjoint regions.
///
/// The threshold form cuts one coordinate axis at strictly increasing values
/// t_1 < ... < t_{m-1}; region k holds t_k <= x[axis] < t_{k+1} (half-open, so the
/// first matching branch of an inequality chain wins). Consecutive regions are
/// neighbours. The callback form classifies points with an arbitrary function and
/// may declare neighbouring region pairs explicitly.
class Partition {
public:
    using Classifier = std::function<int(const Point&)>;

    static Partition thresholds(int axis, std::vector<double> cuts, std::optional<DomainBox> bounds = std::nullopt) {
        if (axis < 0) throw InvalidArgument("partition axis must be nonnegative");
        for (std::size_t i = 1; i < cuts.size(); ++i) {
            if (!(cuts[i - 1] < cuts[i])) throw InvalidArgument("partition thresholds must be strictly increasing");
        }
        Partition p;
        p.axis_ = axis;
        p.cuts_ = std::move(cuts);
        p.regions_ = static_cast<int>(p.cuts_.size()) + 1;
        p.bounds_ = std::move(bounds);
        for (int k = 0; k + 1 < p.regions_; ++k) p.adjacent_.emplace_back(k, k + 1);
        return p;
    }

    static Partition callback(int regions, Classifier classify, std::vector<std::pair<int, int>> adjacent = {},
                              std::optional<DomainBox> bounds = std::nullopt) {
        if (regions < 1) throw InvalidArgument("partition needs at least one region");
        Partition p;
        p.regions_ = regions;
        p.classify_ = std::move(classify);
        p.adjacent_ = std::move(adjacent);
        p.bounds_ = std::move(bounds);
        return p;
    }

    /// A single region covering everything.
    static Partition whole(std::optional<DomainBox> bounds = std::nullopt) { return thresholds(0, {}, std::move(bounds)); }

    [[nodiscard]] int region_count() const noexcept { return regions_; }
    [[nodiscard]] bool is_threshold() const noexcept { return !classify_; }
    [[nodiscard]] int axis() const noexcept { return axis_; }
    [[nodiscard]] const std::vector<double>& cuts() const noexcept { return cuts_; }
    [[nodiscard]] const std::vector<std::pair<int, int>>& adjacent_pairs() const noexcept { return adjacent_; }
    [[nodiscard]] const std::optional<DomainBox>& bounds() const noexcept { return bounds_; }

    template <typename V>
    [[nodiscard]] int region_of(const Eigen::MatrixBase<V>& x) const {
        if (bounds_ && !bounds_->contains(x)) {
            throw PartitionCoverageError("point lies outside the partitioned domain");
        }
        if (classify_) {
            const int k = classify_(Point(x));
            if (k < 0 || k >= regions_) throw PartitionCoverageError("point is not covered by any partition region");
            return k;
        }
        if (axis_ >= x.size()) throw ShapeError("partition axis exceeds point dimension");
        const double c = x(axis_);
        if (std::isnan(c)) throw PartitionCoverageError("NaN coordinate is not covered by any partition region");
        return static_cast<int>(std::upper_bound(cuts_.begin(), cuts_.end(), c) - cuts_.begin());
    }

private:
    Partition() = default;

    int axis_ = 0;
    std::vector<double> cuts_;
    int regions_ = 1;
    Classifier classify_;
    std::vector<std::pair<int, int>> adjacent_;
    std::optional<DomainBox> bounds_;
};

// ---------------------------------------------------------------------------
// Scaling functions psi: Omega -> R
// ---------------------------------------------------------------------------

struct ConstantScaling {
    double value = 0.0;
};

struct PiecewiseConstantScaling {
    Partition partition;
    std::vector<double> values;
};

/// psi tabulated on a regular 2-D grid, bilinear in between, clamped to the grid edge outside.
struct SampledScaling {
    double x0 = -1.0, x1 = 1.0, y0 = -1.0, y1 = 1.0;
    Matrix values;  ///< values(i, j) at (x0 + i*dx, y0 + j*dy)
};

struct CallbackScaling {
    std::function<double(const Point&)> fn;
};

class ScalingFunction {
public:
    using Kind = std::variant<ConstantScaling, PiecewiseConstantScaling, SampledScaling, CallbackScaling>;

    static ScalingFunction constant(double alpha) { return ScalingFunction(ConstantScaling{alpha}); }

    static ScalingFunction piecewise(Partition partition, std::vector<double> values) {
        if (static_cast<int>(values.size()) != partition.region_count()) {
            throw ShapeError("piecewise scaling needs one value per region");
        }
        for (const auto& [i, j] : partition.adjacent_pairs()) {
            if (i < 0 || j < 0 || i >= partition.region_count() || j >= partition.region_count()) {
                throw InvalidArgument("adjacency refers to an unknown region");
            }
            if (values[static_cast<std::size_t>(i)] == values[static_cast<std::size_t>(j)]) {
                throw InvalidArgument("neighbouring regions " + std::to_string(i) + " and " + std::to_string(j) +
                                      " must carry distinct scaling values");
            }
        }
        return ScalingFunction(PiecewiseConstantScaling{std::move(partition), std::move(values)});
    }

    static ScalingFunction sampled(double x0, double x1, double y0, double y1, Matrix values) {
        if (values.rows() < 2 || values.cols() < 2) throw InvalidArgument("sampled scaling needs at least a 2x2 grid");
        if (!(x0 < x1) || !(y0 < y1)) throw InvalidArgument("sampled scaling extent must be increasing");
        return ScalingFunction(SampledScaling{x0, x1, y0, y1, std::move(values)});
    }

    static ScalingFunction callback(std::function<double(const Point&)> fn) {
        return ScalingFunction(CallbackScaling{std::move(fn)});
    }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

    template <typename V>
    [[nodiscard]] double operator()(const Eigen::MatrixBase<V>& x) const {
        return std::visit(
            [&](const auto& s) -> double {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, ConstantScaling>) {
                    return s.value;
                } else if constexpr (std::is_same_v<T, PiecewiseConstantScaling>) {
                    return s.values[static_cast<std::size_t>(s.partition.region_of(x))];
                } else if constexpr (std::is_same_v<T, SampledScaling>) {
                    if (x.size() != 2) throw ShapeError("sampled scaling is defined on 2-D points");
                    return bilinear(s, x(0), x(1));
                } else {
                    return s.fn(Point(x));
                }
            },
            kind_);
    }

private:
    explicit ScalingFunction(Kind k) : kind_(std::move(k)) {}

    static double bilinear(const SampledScaling& s, double x, double y) {
        const auto nx = s.values.rows();
        const auto ny = s.values.cols();
        const double fx = std::clamp((x - s.x0) / (s.x1 - s.x0), 0.0, 1.0) * static_cast<double>(nx - 1);
        const double fy = std::clamp((y - s.y0) / (s.y1 - s.y0), 0.0, 1.0) * static_cast<double>(ny - 1);
        const auto i = std::min<Eigen::Index>(static_cast<Eigen::Index>(fx), nx - 2);
        const auto j = std::min<Eigen::Index>(static_cast<Eigen::Index>(fy), ny - 2);
        const double tx = fx - static_cast<double>(i);
        const double ty = fy - static_cast<double>(j);
        return (1 - tx) * (1 - ty) * s.values(i, j) + tx * (1 - ty) * s.values(i + 1, j) +
               (1 - tx) * ty * s.values(i, j + 1) + tx * ty * s.values(i + 1, j + 1);
    }

    Kind kind_;
};

template <typename V>
[[nodiscard]] double apply_scaling(const ScalingFunction& psi, const Eigen::MatrixBase<V>& x) {
    return psi(x);
}

// ---------------------------------------------------------------------------
// Node maps S: Omega -> R^d
// ---------------------------------------------------------------------------

struct IdentityMap {};

/// S(x) = x + (k+1) * beta * (1, ..., 1) on region k (0-based).
struct SGibbsMap {
    Partition partition;
    double beta = 1.0;
};

/// Componentwise S(x)_k = erf((x_k - mean_k) / sqrt(2 variance_k)); uniformizes N(mean, diag(variance)) samples.
struct ErfUniformizeMap {
    Vector mean;
    Vector variance;
};

/// S(p) = scale * log(|p| / reference_radius) * p / |p| on R^2 \ {0}.
struct LogPolarMap {
    double scale = 1.0;
    double reference_radius = 1.0;
};

struct CallbackMap {
    std::function<Point(const Point&)> fn;
};

class NodeMap {
public:
    using Kind = std::variant<IdentityMap, SGibbsMap, ErfUniformizeMap, LogPolarMap, CallbackMap>;

    static NodeMap identity() { return NodeMap(IdentityMap{}); }
    static NodeMap sgibbs(Partition partition, double beta = 1.0) {
        return NodeMap(SGibbsMap{std::move(partition), beta});
    }
    static NodeMap erf_uniformize(Vector mean, Vector variance) {
        if (mean.size() != variance.size()) throw ShapeError("erf map mean/variance dimension mismatch");
        if ((variance.array() <= 0.0).any()) throw InvalidArgument("erf map variances must be positive");
        return NodeMap(ErfUniformizeMap{std::move(mean), std::move(variance)});
    }
    static NodeMap log_polar(double scale, double reference_radius = 1.0) {
        if (!(scale > 0.0) || !(reference_radius > 0.0)) {
            throw InvalidArgument("log-polar scale and reference radius must be positive");
        }
        return NodeMap(LogPolarMap{scale, reference_radius});
    }
    static NodeMap callback(std::function<Point(const Point&)> fn) { return NodeMap(CallbackMap{std::move(fn)}); }

    [[nodiscard]] const Kind& kind() const noexcept { return kind_; }

    template <typename V>
    [[nodiscard]] Point operator()(const Eigen::MatrixBase<V>& x) const {
        return std::visit(
            [&](const auto& m) -> Point {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, IdentityMap>) {
                    return Point(x);
                } else if constexpr (std::is_same_v<T, SGibbsMap>) {
                    const int k = m.partition.region_of(x);
                    return (x.array() + static_cast<double>(k + 1) * m.beta).matrix();
                } else if constexpr (std::is_same_v<T, ErfUniformizeMap>) {
                    if (x.size() != m.mean.size()) throw ShapeError("erf map dimension mismatch");
                    Point out(x.size());
                    for (Eigen::Index k = 0; k < x.size(); ++k) {
                        out(k) = std::erf((x(k) - m.mean(k)) / std::sqrt(2.0 * m.variance(k)));
                    }
                    return out;
                } else if constexpr (std::is_same_v<T, LogPolarMap>) {
                    if (x.size() != 2) throw ShapeError("log-polar map is defined on 2-D points");
                    const double r = std::hypot(x(0), x(1));
                    if (r == 0.0) throw SingularityError("log-polar map is singular at the origin");
                    const double theta = std::atan2(x(1), x(0));
                    const double rho = m.scale * std::log(r / m.reference_radius);
                    Point out(2);
                    out << rho * std::cos(theta), rho * std::sin(theta);
                    return out;
                } else {
                    return m.fn(Point(x));
                }
            },
            kind_);
    }

private:
    explicit NodeMap(Kind k) : kind_(std::move(k)) {}
    Kind kind_;
};

template <typename V>
[[nodiscard]] Point apply_map(const NodeMap& s, const Eigen::MatrixBase<V>& x) {
    return s(x);
}

// ---------------------------------------------------------------------------
// Augmented map Lambda(x) = (S(x), psi(x))
// ---------------------------------------------------------------------------

class AugmentedMap {
public:
    AugmentedMap(NodeMap node_map, ScalingFunction scaling)
        : node_map_(std::move(node_map)), scaling_(std::move(scaling)) {}

    /// Identity S with psi == 0: the classical kernel.
    static AugmentedMap classical() { return {NodeMap::identity(), ScalingFunction::constant(0.0)}; }
    /// Identity S: a variably scaled kernel.
    static AugmentedMap vsk(ScalingFunction psi) { return {NodeMap::identity(), std::move(psi)}; }
    /// Constant psi: a mapped (fake nodes) kernel.
    static AugmentedMap mapped(NodeMap s) { return {std::move(s), ScalingFunction::constant(0.0)}; }

    [[nodiscard]] const NodeMap& node_map() const noexcept { return node_map_; }
    [[nodiscard]] const ScalingFunction& scaling() const noexcept { return scaling_; }

    template <typename V>
    [[nodiscard]] Point operator()(const Eigen::MatrixBase<V>& x) const {
        const Point s = node_map_(x);
        Point out(s.size() + 1);
        out.head(s.size()) = s;
        out(s.size()) = scaling_(x);
        return out;
    }

    /// Lambda applied to every row.
    [[nodiscard]] PointSet apply_rows(const PointSet& pts) const {
        if (pts.rows() == 0) return PointSet(0, pts.cols() + 1);
        const Point first = (*this)(pts.row(0).transpose());
        PointSet out(pts.rows(), first.size());
        out.row(0) = first.transpose();
        for (Eigen::Index i = 1; i < pts.rows(); ++i) {
            const Point a = (*this)(pts.row(i).transpose());
            if (a.size() != first.size()) throw ShapeError("node map changed output dimension between points");
            out.row(i) = a.transpose();
        }
        return out;
    }

private:
    NodeMap node_map_;
    ScalingFunction scaling_;
};

template <typename V>
[[nodiscard]] Point augment(const AugmentedMap& map, const Eigen::MatrixBase<V>& x) {
    return map(x);
}

/// MVSK value kappa((S(x), psi(x)), (S(y), psi(y))).
template <typename A, typename B>
[[nodiscard]] double mvsk_eval(const RadialKernel& kernel, const AugmentedMap& map, const Eigen::MatrixBase<A>& x,
                               const Eigen::MatrixBase<B>& y) {
    return eval_kernel(kernel, map(x), map(y));
}

}  // namespace mvsk
