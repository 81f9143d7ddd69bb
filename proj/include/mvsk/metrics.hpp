#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mvsk/interpolation.hpp"
#include "mvsk/scalings.hpp"
#include "mvsk/types.hpp"

namespace mvsk {

namespace detail {

inline double nearest_squared(const PointSet& nodes, const Eigen::Ref<const Eigen::RowVectorXd>& x) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
        double acc = 0.0;
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const double diff = x(k) - nodes(i, k);
            acc += diff * diff;
        }
        if (acc < best) best = acc;
    }
    return best;
}

}  // namespace detail

/// Fill distance sup_{x in Omega} min_k |x - x_k|, with the sup taken over the domain's
/// evaluation grid. The grid value is a lower bound on the continuous one.
[[nodiscard]] inline double fill_distance(const PointSet& nodes, const DomainBox& domain) {
    if (nodes.rows() == 0) throw InvalidArgument("fill distance of an empty node set");
    if (nodes.cols() != domain.dim()) throw ShapeError("node dimension does not match the domain box");
    const PointSet grid = domain.grid();
    double worst = 0.0;
    for (Eigen::Index g = 0; g < grid.rows(); ++g) worst = std::max(worst, detail::nearest_squared(nodes, grid.row(g)));
    return std::sqrt(worst);
}

[[nodiscard]] inline double fill_distance(const NodeSet& nodes, const DomainBox& domain) {
    return fill_distance(nodes.points(), domain);
}

/// Half the minimum pairwise distance.
[[nodiscard]] inline double separation_distance(const PointSet& nodes) {
    if (nodes.rows() < 2) throw InvalidArgument("separation distance needs at least two nodes");
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < nodes.rows(); ++j) {
            best = std::min(best, euclidean_distance(nodes.row(i), nodes.row(j)));
        }
    }
    return 0.5 * best;
}

[[nodiscard]] inline double separation_distance(const NodeSet& nodes) { return separation_distance(nodes.points()); }

struct RegionDistances {
    int region = 0;
    Eigen::Index node_count = 0;
    double fill = std::numeric_limits<double>::infinity();        ///< infinite when the region has no node
    double separation = std::numeric_limits<double>::infinity();  ///< infinite when the region has < 2 nodes
};

struct RegionalReport {
    std::vector<RegionDistances> regions;
    double global_fill = 0.0;
    double global_separation = std::numeric_limits<double>::infinity();
    std::vector<std::string> warnings;
};

/// Per-region fill/separation distances on a partition of the domain; h = max_k h_k, q = min_k q_k.
[[nodiscard]] inline RegionalReport regional_distances(const PointSet& nodes, const DomainBox& domain,
                                                       const Partition& partition) {
    if (nodes.cols() != domain.dim()) throw ShapeError("node dimension does not match the domain box");
    const int m = partition.region_count();
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < nodes.rows(); ++i) {
        members[static_cast<std::size_t>(partition.region_of(nodes.row(i).transpose()))].push_back(i);
    }
    const PointSet grid = domain.grid();
    std::vector<double> worst(static_cast<std::size_t>(m), 0.0);
    std::vector<PointSet> region_nodes(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        const auto& idx = members[static_cast<std::size_t>(k)];
        PointSet pts(static_cast<Eigen::Index>(idx.size()), nodes.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) pts.row(static_cast<Eigen::Index>(r)) = nodes.row(idx[r]);
        region_nodes[static_cast<std::size_t>(k)] = std::move(pts);
    }
    for (Eigen::Index g = 0; g < grid.rows(); ++g) {
        const auto k = static_cast<std::size_t>(partition.region_of(grid.row(g).transpose()));
        worst[k] = std::max(worst[k], detail::nearest_squared(region_nodes[k], grid.row(g)));
    }

    RegionalReport report;
    for (int k = 0; k < m; ++k) {
        const auto uk = static_cast<std::size_t>(k);
        RegionDistances rd;
        rd.region = k;
        rd.node_count = region_nodes[uk].rows();
        if (rd.node_count == 0) {
            report.warnings.push_back("region " + std::to_string(k) + " contains no node; its fill distance is infinite");
        } else {
            rd.fill = std::sqrt(worst[uk]);
        }
        if (rd.node_count >= 2) {
            rd.separation = separation_distance(region_nodes[uk]);
            report.global_separation = std::min(report.global_separation, rd.separation);
        }
        report.global_fill = std::max(report.global_fill, rd.fill);
        report.regions.push_back(rd);
    }
    return report;
}

[[nodiscard]] inline RegionalReport regional_distances(const NodeSet& nodes, const DomainBox& domain,
                                                       const Partition& partition) {
    return regional_distances(nodes.points(), domain, partition);
}

[[nodiscard]] inline double rmse(const Vector& reference, const Vector& predicted) {
    if (reference.size() != predicted.size()) throw ShapeError("rmse operands differ in length");
    if (reference.size() == 0) throw InvalidArgument("rmse of empty vectors");
    return std::sqrt((reference - predicted).squaredNorm() / static_cast<double>(reference.size()));
}

}  // namespace mvsk
