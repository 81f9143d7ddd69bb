#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "mvsk/error.hpp"

namespace mvsk {

using Point = Eigen::VectorXd;
/// One point per row.
using PointSet = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Euclidean distance, summed in index order so that every caller gets bit-identical results.
template <typename A, typename B>
[[nodiscard]] double euclidean_distance(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) {
    if (x.size() != y.size()) {
        throw ShapeError("point dimension mismatch: " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
    }
    double acc = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double diff = x(k) - y(k);
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

/// Axis-aligned box Omega plus the evaluation resolution used to approximate sups over it.
struct DomainBox {
    Vector lower;
    Vector upper;
    int resolution = 200;

    DomainBox() = default;
    DomainBox(Vector lo, Vector hi, int res = 200) : lower(std::move(lo)), upper(std::move(hi)), resolution(res) {
        validate();
    }

    static DomainBox square(int dim, double lo, double hi, int res = 200) {
        return {Vector::Constant(dim, lo), Vector::Constant(dim, hi), res};
    }

    [[nodiscard]] int dim() const noexcept { return static_cast<int>(lower.size()); }

    [[nodiscard]] bool contains(const Eigen::Ref<const Vector>& x) const {
        if (x.size() != lower.size()) return false;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            if (x(k) < lower(k) || x(k) > upper(k)) return false;
        }
        return true;
    }

    void validate() const {
        if (lower.size() != upper.size() || lower.size() == 0) {
            throw ShapeError("domain box bounds must have equal, nonzero dimension");
        }
        for (Eigen::Index k = 0; k < lower.size(); ++k) {
            if (!(lower(k) < upper(k))) throw InvalidArgument("domain box requires lower < upper componentwise");
        }
        if (resolution < 2) throw InvalidArgument("domain box resolution must be >= 2");
    }

    /// Tensor grid with `resolution` points per axis including the box corners.
    [[nodiscard]] PointSet grid() const {
        const int d = dim();
        Eigen::Index total = 1;
        for (int k = 0; k < d; ++k) total *= resolution;
        PointSet pts(total, d);
        for (Eigen::Index idx = 0; idx < total; ++idx) {
            Eigen::Index rem = idx;
            for (int k = d - 1; k >= 0; --k) {
                const auto i = rem % resolution;
                rem /= resolution;
                pts(idx, k) = lower(k) + (upper(k) - lower(k)) * static_cast<double>(i) / (resolution - 1);
            }
        }
        return pts;
    }
};

}  // namespace mvsk
