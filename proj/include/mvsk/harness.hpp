#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvsk/interpolation.hpp"
#include "mvsk/kernels.hpp"
#include "mvsk/metrics.hpp"
#include "mvsk/model_selection.hpp"
#include "mvsk/scalings.hpp"

namespace mvsk {

/// SplitMix64 generator.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on (0, 1]: top 53 bits, shifted by one ulp so log() never sees zero.
    double uniform() noexcept { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

    /// Box-Muller: one call consumes two uniforms and yields two independent N(0,1) draws.
    std::pair<double, double> normal_pair() noexcept {
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

private:
    std::uint64_t state_;
};

/// Stream seed for node count n, so the sets G_N for different N are drawn independently.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t n) noexcept {
    SplitMix64 mix(seed ^ (n * 0xD1B54A32D192ED03ULL));
    return mix.next();
}

inline constexpr double kNodeVariance = 0.1;

[[nodiscard]] inline DomainBox unit_square_domain(int resolution = 200) { return DomainBox::square(2, -1.0, 1.0, resolution); }

/// Draws n points from N(0, variance * I_2) and keeps those inside [-1, 1]^2.
[[nodiscard]] inline NodeSet sample_gaussian_nodes(int n, std::uint64_t seed, double variance = kNodeVariance) {
    if (n < 1) throw InvalidArgument("node count must be positive");
    SplitMix64 rng(seed);
    const double sigma = std::sqrt(variance);
    std::vector<std::pair<double, double>> kept;
    kept.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto [z1, z2] = rng.normal_pair();
        const double x1 = sigma * z1;
        const double x2 = sigma * z2;
        if (std::abs(x1) <= 1.0 && std::abs(x2) <= 1.0) kept.emplace_back(x1, x2);
    }
    if (kept.empty()) throw InvalidArgument("every sampled node fell outside the domain");
    PointSet pts(static_cast<Eigen::Index>(kept.size()), 2);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        pts(static_cast<Eigen::Index>(i), 0) = kept[i].first;
        pts(static_cast<Eigen::Index>(i), 1) = kept[i].second;
    }
    return NodeSet(std::move(pts), unit_square_domain());
}

/// Discontinuity lines of the test function, all vertical (x1 = const).
inline constexpr double kJumpLines[] = {-0.3, 0.0, 0.5};

/// Piecewise test function with jumps across x1 = -0.3, 0 and 0.5.
template <typename V>
[[nodiscard]] double target_f(const Eigen::MatrixBase<V>& x) {
    const double x1 = x(0);
    const double x2 = x(1);
    if (x1 < -0.3) return x1 + x2;
    if (x1 >= 0.0 && x1 < 0.5) return std::sin(x1 - 2.0 * x2);
    return 0.0;
}

[[nodiscard]] inline Partition jump_partition() { return Partition::thresholds(0, {-0.3, 0.0, 0.5}); }

/// psi = 0, 1, 2, 3 on the four strips cut by the jump lines.
[[nodiscard]] inline ScalingFunction jump_shape_function() {
    return ScalingFunction::piecewise(jump_partition(), {0.0, 1.0, 2.0, 3.0});
}

/// S(x) = erf(x / sqrt(2 variance)) componentwise, uniformizing the Gaussian node sampler.
[[nodiscard]] inline NodeMap gaussian_erf_map(double variance = kNodeVariance) {
    return NodeMap::erf_uniformize(Vector::Zero(2), Vector::Constant(2, variance));
}

/// M x M equispaced grid on [-1,1]^2; points exactly on a jump line move by +1e-9 in x1.
[[nodiscard]] inline PointSet evaluation_grid(int m) {
    if (m < 2) throw InvalidArgument("evaluation grid needs M >= 2");
    PointSet g = DomainBox::square(2, -1.0, 1.0, m).grid();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        for (double c : kJumpLines) {
            if (g(i, 0) == c) g(i, 0) += 1e-9;
        }
    }
    return g;
}

/// max |f - R| over grid points within `half_width` of a jump line.
[[nodiscard]] inline double near_jump_max_error(const PointSet& grid, const Vector& reference, const Vector& predicted,
                                                double half_width = 0.025) {
    double worst = 0.0;
    bool any = false;
    for (Eigen::Index i = 0; i < grid.rows(); ++i) {
        const bool near = std::any_of(std::begin(kJumpLines), std::end(kJumpLines),
                                      [&](double c) { return std::abs(grid(i, 0) - c) <= half_width; });
        if (near) {
            any = true;
            worst = std::max(worst, std::abs(reference(i) - predicted(i)));
        }
    }
    if (!any) throw InvalidArgument("no evaluation point lies inside the near-jump band");
    return worst;
}

enum class Variant { Classical, Vsdk, Mvsdk };

[[nodiscard]] inline std::string_view variant_name(Variant v) {
    switch (v) {
        case Variant::Classical: return "classical";
        case Variant::Vsdk: return "vsdk";
        case Variant::Mvsdk: return "mvsdk";
    }
    return "unknown";
}

[[nodiscard]] inline std::optional<Variant> parse_variant(std::string_view s) {
    if (s == "classical") return Variant::Classical;
    if (s == "vsdk") return Variant::Vsdk;
    if (s == "mvsdk") return Variant::Mvsdk;
    return std::nullopt;
}

[[nodiscard]] inline AugmentedMap variant_map(Variant v, double variance = kNodeVariance) {
    switch (v) {
        case Variant::Classical: return AugmentedMap::classical();
        case Variant::Vsdk: return AugmentedMap::vsk(jump_shape_function());
        case Variant::Mvsdk: return {gaussian_erf_map(variance), jump_shape_function()};
    }
    throw InvalidArgument("unknown variant");
}

struct ExperimentConfig {
    std::vector<int> n_values = {10, 50, 100, 150, 200, 250, 300, 350, 400, 450, 500};
    int eval_grid = 80;
    std::uint64_t seed = 1;
    std::vector<Profile> profiles = {Profile::WendlandC0, Profile::MaternC6};
    std::vector<Variant> variants = {Variant::Classical, Variant::Vsdk, Variant::Mvsdk};
    LoocvConfig loocv;
    double band_half_width = 0.025;
    int fill_resolution = 200;
    double node_variance = kNodeVariance;
    std::string output_dir = "results";

    void validate() const {
        if (n_values.empty()) throw ConfigError("n_values must not be empty");
        for (std::size_t i = 0; i < n_values.size(); ++i) {
            if (n_values[i] < 1) throw ConfigError("n_values must be positive");
            if (i > 0 && n_values[i - 1] >= n_values[i]) throw ConfigError("n_values must be increasing");
        }
        if (eval_grid < 2) throw ConfigError("eval_grid must be >= 2");
        if (fill_resolution < 2) throw ConfigError("fill_resolution must be >= 2");
        if (profiles.empty() || variants.empty()) throw ConfigError("kernels and variants must not be empty");
        if (!(band_half_width > 0.0)) throw ConfigError("band_half_width must be positive");
        if (!(node_variance > 0.0)) throw ConfigError("node_variance must be positive");
        loocv.validate();
    }
};

struct ExperimentRow {
    Profile profile = Profile::MaternC6;
    int n_requested = 0;
    Variant variant = Variant::Classical;
    Eigen::Index n_nodes = 0;
    double epsilon = std::numeric_limits<double>::quiet_NaN();
    double rmse = std::numeric_limits<double>::quiet_NaN();
    double near_jump_error = std::numeric_limits<double>::quiet_NaN();
    double fill = std::numeric_limits<double>::quiet_NaN();
    double separation = std::numeric_limits<double>::quiet_NaN();
    double regional_fill = std::numeric_limits<double>::quiet_NaN();
    double regional_separation = std::numeric_limits<double>::quiet_NaN();
    double condition = std::numeric_limits<double>::quiet_NaN();
    bool failed = false;
    std::string message;
    std::vector<LoocvPoint> loocv_curve;
};

/// Nodes the distance metrics are reported on: S(G_N) for the mapped variant, G_N otherwise.
struct DistanceView {
    PointSet points;
    Partition partition;
};

[[nodiscard]] inline DistanceView distance_view(const NodeSet& nodes, Variant v, double variance = kNodeVariance) {
    if (v != Variant::Mvsdk) return {nodes.points(), jump_partition()};
    const NodeMap s = gaussian_erf_map(variance);
    PointSet mapped(nodes.size(), nodes.dim());
    for (Eigen::Index i = 0; i < nodes.size(); ++i) mapped.row(i) = s(nodes.point(i)).transpose();
    // S is monotone per axis, so S(Omega_k) is again a strip with mapped cuts.
    std::vector<double> cuts;
    for (double c : kJumpLines) cuts.push_back(std::erf(c / std::sqrt(2.0 * variance)));
    return {std::move(mapped), Partition::thresholds(0, std::move(cuts))};
}

/// One (kernel, N, variant) cell: LOOCV, fit, evaluation and diagnostics.
[[nodiscard]] inline ExperimentRow run_cell(const ExperimentConfig& cfg, Profile profile, int n, Variant variant,
                                            const NodeSet& nodes, const PointSet& grid, const Vector& truth) {
    ExperimentRow row;
    row.profile = profile;
    row.n_requested = n;
    row.variant = variant;
    row.n_nodes = nodes.size();
    try {
        const DomainBox domain = unit_square_domain(cfg.fill_resolution);
        const DistanceView view = distance_view(nodes, variant, cfg.node_variance);
        row.fill = fill_distance(view.points, domain);
        if (view.points.rows() >= 2) row.separation = separation_distance(view.points);
        const RegionalReport regional = regional_distances(view.points, domain, view.partition);
        row.regional_fill = regional.global_fill;
        row.regional_separation = regional.global_separation;

        Vector values(nodes.size());
        for (Eigen::Index i = 0; i < nodes.size(); ++i) values(i) = target_f(nodes.point(i));
        const AugmentedMap map = variant_map(variant, cfg.node_variance);
        const EpsilonSelection sel = select_epsilon(cfg.loocv, profile, map, nodes, values);
        row.loocv_curve = sel.score_curve;
        row.epsilon = sel.best_epsilon;
        const Interpolant interp = fit(RadialKernel(profile, sel.best_epsilon), map, nodes, values);
        row.condition = interp.diagnostics().condition_estimate;
        const Vector pred = interp.evaluate(grid);
        row.rmse = rmse(truth, pred);
        try {
            row.near_jump_error = near_jump_max_error(grid, truth, pred, cfg.band_half_width);
        } catch (const InvalidArgument& e) {
            row.message = e.what();
        }
    } catch (const Error& e) {
        row.failed = true;
        row.message = e.what();
    }
    return row;
}

/// Classical / VSDK / MVSDK comparison on the discontinuous test function across N.
/// Node sets G_N are not nested: each N draws from its own derived seed, shared by all
/// variants and kernels at that N.
[[nodiscard]] inline std::vector<ExperimentRow> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const PointSet grid = evaluation_grid(cfg.eval_grid);
    Vector truth(grid.rows());
    for (Eigen::Index i = 0; i < grid.rows(); ++i) truth(i) = target_f(grid.row(i).transpose());

    std::vector<ExperimentRow> rows;
    for (int n : cfg.n_values) {
        std::optional<NodeSet> nodes;
        std::string sample_error;
        try {
            nodes.emplace(sample_gaussian_nodes(n, derive_seed(cfg.seed, static_cast<std::uint64_t>(n)), cfg.node_variance));
        } catch (const Error& e) {
            sample_error = e.what();
        }
        for (Profile p : cfg.profiles) {
            for (Variant v : cfg.variants) {
                if (nodes) {
                    rows.push_back(run_cell(cfg, p, n, v, *nodes, grid, truth));
                } else {
                    ExperimentRow row;
                    row.profile = p;
                    row.n_requested = n;
                    row.variant = v;
                    row.failed = true;
                    row.message = sample_error;
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ExperimentRow& a, const ExperimentRow& b) {
        if (a.profile != b.profile) return a.profile < b.profile;
        if (a.n_requested != b.n_requested) return a.n_requested < b.n_requested;
        return a.variant < b.variant;
    });
    return rows;
}

}  // namespace mvsk
