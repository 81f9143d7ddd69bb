#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvsk/harness.hpp"
#include "mvsk/interpolation.hpp"
#include "mvsk/kernels.hpp"
#include "mvsk/model_selection.hpp"
#include "mvsk/scalings.hpp"

namespace mvsk::imaging {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

// ---------------------------------------------------------------------------
// Sampling geometry and data containers
// ---------------------------------------------------------------------------

/// Sampled spatial frequencies (arcsec^-1), one (u, v) per row.
struct UvGeometry {
    PointSet points;
    std::vector<double> radii;   ///< circle radii when the layout is circular, else empty
    int points_per_circle = 0;  ///< per circle, counting reflected points
    double l1 = 550.0;          ///< grid distances (mm) of the STIX subcollimator layout
    double l2 = 47.0;

    [[nodiscard]] Eigen::Index size() const noexcept { return points.rows(); }
    [[nodiscard]] double radius(Eigen::Index i) const { return std::hypot(points(i, 0), points(i, 1)); }
    [[nodiscard]] double max_radius() const {
        double r = 0.0;
        for (Eigen::Index i = 0; i < size(); ++i) r = std::max(r, radius(i));
        return r;
    }
    [[nodiscard]] double min_radius() const {
        double r = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < size(); ++i) r = std::min(r, radius(i));
        return r;
    }
};

inline constexpr double kStixMinRadius = 2.79e-3;
inline constexpr double kStixMaxRadius = 7.02e-2;

/// Ten circles, radii geometrically spaced over [2.79e-3, 7.02e-2] arcsec^-1, three
/// orientations (10, 70, 130 degrees) per circle plus their reflections through the origin.
[[nodiscard]] inline UvGeometry default_stix_geometry() {
    constexpr int circles = 10;
    constexpr double angles_deg[] = {10.0, 70.0, 130.0};
    UvGeometry g;
    g.points.resize(2 * circles * 3, 2);
    const double ratio = std::pow(kStixMaxRadius / kStixMinRadius, 1.0 / (circles - 1));
    Eigen::Index row = 0;
    for (int c = 0; c < circles; ++c) {
        const double r = c == circles - 1 ? kStixMaxRadius : kStixMinRadius * std::pow(ratio, c);
        g.radii.push_back(r);
        for (double a : angles_deg) {
            const double t = a * std::numbers::pi / 180.0;
            g.points(row, 0) = r * std::cos(t);
            g.points(row, 1) = r * std::sin(t);
            ++row;
        }
    }
    g.points.bottomRows(circles * 3) = -g.points.topRows(circles * 3);
    g.points_per_circle = 6;
    return g;
}

[[nodiscard]] inline UvGeometry geometry_from_points(PointSet pts) {
    if (pts.cols() != 2 || pts.rows() < 1) throw ShapeError("uv geometry needs a non-empty N x 2 array");
    UvGeometry g;
    g.points = std::move(pts);
    return g;
}

struct VisibilitySet {
    UvGeometry geometry;
    std::vector<Complex> values;
    std::optional<Vector> sigma;

    void validate() const {
        if (static_cast<Eigen::Index>(values.size()) != geometry.size()) {
            throw ShapeError("one visibility per (u, v) point required");
        }
        if (sigma && sigma->size() != geometry.size()) throw ShapeError("one sigma per visibility required");
    }
};

/// M x M pixel grid; pixel (i, j) is centred at (center_x + (i - (M-1)/2) p, center_y + (j - (M-1)/2) p).
struct ImageGridSpec {
    int size = 64;
    double pixel_size = 1.0;  ///< arcsec
    double center_x = 0.0;
    double center_y = 0.0;

    void validate() const {
        if (size < 2) throw InvalidArgument("image grid needs at least 2 pixels per side");
        if (!(pixel_size > 0.0)) throw InvalidArgument("pixel size must be positive");
    }
    [[nodiscard]] double x(int i) const { return center_x + (i - 0.5 * (size - 1)) * pixel_size; }
    [[nodiscard]] double y(int j) const { return center_y + (j - 0.5 * (size - 1)) * pixel_size; }
    [[nodiscard]] double pixel_area() const { return pixel_size * pixel_size; }
};

struct ImageGrid {
    Matrix flux;  ///< flux(i, j) at (x(i), y(j))
    ImageGridSpec spec;
};

/// Uniform (u, v) grid symmetric about the origin: coordinate(k) = (k - (n-1)/2) * spacing.
struct UvGridSpec {
    int size = 64;
    double spacing = 2.0 * kStixMaxRadius / 64;

    /// n points per axis spanning the square [-radius, radius]^2.
    static UvGridSpec covering(double radius, int n) { return {n, 2.0 * radius / n}; }
    /// Grid matching the image's DFT frequencies (spacing 1 / field of view).
    static UvGridSpec dft_for(const ImageGridSpec& img) { return {img.size, 1.0 / (img.size * img.pixel_size)}; }

    [[nodiscard]] double coordinate(int k) const { return (k - 0.5 * (size - 1)) * spacing; }
};

// ---------------------------------------------------------------------------
// Fourier operators
// ---------------------------------------------------------------------------

namespace detail {

/// E(k, i) = exp(-2 pi i * freq_k * pos_i).
inline ComplexMatrix phase_matrix(const std::vector<double>& freqs, const std::vector<double>& pos) {
    ComplexMatrix e(static_cast<Eigen::Index>(freqs.size()), static_cast<Eigen::Index>(pos.size()));
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        for (std::size_t i = 0; i < pos.size(); ++i) {
            const double ph = -2.0 * std::numbers::pi * freqs[k] * pos[i];
            e(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = Complex(std::cos(ph), std::sin(ph));
        }
    }
    return e;
}

inline std::vector<double> pixel_xs(const ImageGridSpec& s) {
    std::vector<double> v(static_cast<std::size_t>(s.size));
    for (int i = 0; i < s.size; ++i) v[static_cast<std::size_t>(i)] = s.x(i);
    return v;
}

inline std::vector<double> pixel_ys(const ImageGridSpec& s) {
    std::vector<double> v(static_cast<std::size_t>(s.size));
    for (int j = 0; j < s.size; ++j) v[static_cast<std::size_t>(j)] = s.y(j);
    return v;
}

inline std::vector<double> uv_coords(const UvGridSpec& g) {
    std::vector<double> v(static_cast<std::size_t>(g.size));
    for (int k = 0; k < g.size; ++k) v[static_cast<std::size_t>(k)] = g.coordinate(k);
    return v;
}

}  // namespace detail

/// V_k = sum_pixels f(x, y) exp(-2 pi i (u_k x + v_k y)) * pixel area.
[[nodiscard]] inline VisibilitySet forward_model(const ImageGrid& image, const UvGeometry& geometry) {
    image.spec.validate();
    const auto xs = detail::pixel_xs(image.spec);
    const auto ys = detail::pixel_ys(image.spec);
    VisibilitySet vis;
    vis.geometry = geometry;
    vis.values.reserve(static_cast<std::size_t>(geometry.size()));
    const double area = image.spec.pixel_area();
    for (Eigen::Index k = 0; k < geometry.size(); ++k) {
        const ComplexMatrix ex = detail::phase_matrix({geometry.points(k, 0)}, xs);
        const ComplexMatrix ey = detail::phase_matrix({geometry.points(k, 1)}, ys);
        const Complex v = (ex * image.flux.cast<Complex>() * ey.transpose())(0, 0);
        vis.values.push_back(v * area);
    }
    return vis;
}

/// B(x, y) = Re sum_k V_k exp(+2 pi i (u_k x + v_k y)); the adjoint of forward_model up to the pixel area.
[[nodiscard]] inline Matrix back_projection(const VisibilitySet& vis, const ImageGridSpec& spec) {
    vis.validate();
    spec.validate();
    if (vis.values.empty()) throw InvalidArgument("back-projection of an empty visibility set");
    const auto xs = detail::pixel_xs(spec);
    const auto ys = detail::pixel_ys(spec);
    Matrix b = Matrix::Zero(spec.size, spec.size);
    for (Eigen::Index k = 0; k < vis.geometry.size(); ++k) {
        // conj(exp(-i...)) gives the +i phase.
        const ComplexMatrix ex = detail::phase_matrix({vis.geometry.points(k, 0)}, xs).conjugate();
        const ComplexMatrix ey = detail::phase_matrix({vis.geometry.points(k, 1)}, ys).conjugate();
        b += (vis.values[static_cast<std::size_t>(k)] * (ex.transpose() * ey)).real();
    }
    return b;
}

/// Discretized Fourier transform between an image grid and a uniform (u, v) grid,
/// applied separably: F f = area * Eu f Ev^T.
class GridFourierOperator {
public:
    GridFourierOperator(const ImageGridSpec& image, const UvGridSpec& uv)
        : image_(image),
          uv_(uv),
          eu_(detail::phase_matrix(detail::uv_coords(uv), detail::pixel_xs(image))),
          ev_(detail::phase_matrix(detail::uv_coords(uv), detail::pixel_ys(image))) {
        image.validate();
    }

    [[nodiscard]] ComplexMatrix apply(const Matrix& f) const {
        return image_.pixel_area() * (eu_ * f.cast<Complex>() * ev_.transpose());
    }

    /// Adjoint with respect to the real inner product Re<a, b> on complex surfaces.
    [[nodiscard]] ComplexMatrix adjoint_complex(const ComplexMatrix& w) const {
        return image_.pixel_area() * (eu_.adjoint() * w * ev_.conjugate());
    }

    [[nodiscard]] Matrix adjoint(const ComplexMatrix& w) const { return adjoint_complex(w).real(); }

    [[nodiscard]] const ImageGridSpec& image_spec() const noexcept { return image_; }
    [[nodiscard]] const UvGridSpec& uv_spec() const noexcept { return uv_; }

    /// Largest singular value by power iteration on F* F.
    [[nodiscard]] double norm_estimate(int max_iters = 200, double tol = 1e-12) const {
        Matrix v = Matrix::Constant(image_.size, image_.size, 1.0);
        for (int i = 0; i < image_.size; ++i) v.row(i).array() += 0.1 * std::sin(0.7 * i);
        v /= v.norm();
        double lambda = 0.0;
        for (int it = 0; it < max_iters; ++it) {
            Matrix w = adjoint(apply(v));
            const double next = (v.array() * w.array()).sum();
            const double nrm = w.norm();
            if (nrm == 0.0) return 0.0;
            v = w / nrm;
            if (it > 0 && std::abs(next - lambda) <= tol * next) {
                lambda = next;
                break;
            }
            lambda = next;
        }
        return std::sqrt(lambda);
    }

private:
    ImageGridSpec image_;
    UvGridSpec uv_;
    ComplexMatrix eu_;
    ComplexMatrix ev_;
};

// ---------------------------------------------------------------------------
// Scaling function from the back-projected image
// ---------------------------------------------------------------------------

enum class PsiMode { Magnitude, Real };

struct PsiOptions {
    int fine_size = 129;
    PsiMode mode = PsiMode::Magnitude;
    /// Frequency unit: psi is tabulated over [-1, 1]^2 in coordinates (u, v) / frequency_scale.
    /// Zero means "largest sampled radius".
    double frequency_scale = 0.0;
};

struct PsiResult {
    ScalingFunction psi;
    std::optional<std::string> warning;
};

/// psi over the normalized (u, v) plane: back-project, clip negatives, Fourier transform onto a
/// fine grid over the disk of the largest sampled radius, take the magnitude (or real part) and
/// rescale to [0, 1].
[[nodiscard]] inline PsiResult build_psi_from_backprojection(const VisibilitySet& vis, const ImageGridSpec& spec,
                                                             const PsiOptions& opts = {}) {
    if (opts.fine_size < 2) throw InvalidArgument("psi grid needs at least 2 points per side");
    const double scale = opts.frequency_scale > 0.0 ? opts.frequency_scale : vis.geometry.max_radius();
    if (!(scale > 0.0)) throw InvalidArgument("frequency scale must be positive");
    const Matrix b = back_projection(vis, spec).cwiseMax(0.0);
    const int n = opts.fine_size;
    if (b.maxCoeff() <= 0.0) {
        return {ScalingFunction::sampled(-1.0, 1.0, -1.0, 1.0, Matrix::Zero(n, n)),
                "back-projected image is identically zero after clipping; psi is constant and the MVSK "
                "reduces to the mapped kernel"};
    }
    std::vector<double> freqs(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) freqs[static_cast<std::size_t>(k)] = scale * (-1.0 + 2.0 * k / (n - 1));
    const ComplexMatrix eu = detail::phase_matrix(freqs, detail::pixel_xs(spec));
    const ComplexMatrix ev = detail::phase_matrix(freqs, detail::pixel_ys(spec));
    const ComplexMatrix g = eu * b.cast<Complex>() * ev.transpose();
    Matrix table = opts.mode == PsiMode::Magnitude ? Matrix(g.cwiseAbs()) : Matrix(g.real());
    const double lo = opts.mode == PsiMode::Magnitude ? 0.0 : table.minCoeff();
    const double hi = table.maxCoeff();
    if (!(hi > lo)) {
        return {ScalingFunction::sampled(-1.0, 1.0, -1.0, 1.0, Matrix::Zero(n, n)),
                "transformed back-projection is flat; psi is constant"};
    }
    table = (table.array() - lo) / (hi - lo);
    return {ScalingFunction::sampled(-1.0, 1.0, -1.0, 1.0, std::move(table)), std::nullopt};
}

// ---------------------------------------------------------------------------
// Log-polar node map for the (u, v) plane
// ---------------------------------------------------------------------------

enum class LogPolarMode {
    /// radius -> C log(r / r0), r0 = r_min / e: every sampled radius lands on a positive radius >= C.
    Shifted,
    /// radius -> C log(r) with r in arcsec^-1: negative for every STIX radius, so the innermost
    /// circle lands on the outer rim of the crown (direction flipped through the origin).
    Signed,
};

/// Log-polar map in normalized frequency coordinates with C chosen so that the largest mapped
/// radius equals the largest original radius.
[[nodiscard]] inline NodeMap stix_log_polar(const UvGeometry& geometry, double frequency_scale,
                                           LogPolarMode mode = LogPolarMode::Shifted) {
    const double rmin = geometry.min_radius() / frequency_scale;
    const double rmax = geometry.max_radius() / frequency_scale;
    if (!(rmin > 0.0)) throw SingularityError("log-polar map needs every sampled point off the origin");
    if (mode == LogPolarMode::Shifted) {
        const double r0 = rmin / std::numbers::e;
        return NodeMap::log_polar(rmax / std::log(rmax / r0), r0);
    }
    const double r0 = 1.0 / frequency_scale;
    const double spread = std::max(std::abs(std::log(rmin / r0)), std::abs(std::log(rmax / r0)));
    if (!(spread > 0.0)) throw InvalidArgument("signed log-polar map degenerates when a radius equals 1");
    return NodeMap::log_polar(rmax / spread, r0);
}

// ---------------------------------------------------------------------------
// Visibility surface interpolation
// ---------------------------------------------------------------------------

/// Real and imaginary parts interpolated separately with the same kernel and map,
/// in coordinates (u, v) / frequency_scale.
class VisibilityInterpolant {
public:
    VisibilityInterpolant(const VisibilitySet& vis, const RadialKernel& kernel, const AugmentedMap& map,
                          double frequency_scale, const FitOptions& options = {})
        : scale_(frequency_scale),
          max_radius_(vis.geometry.max_radius()),
          real_(make_fit(vis, kernel, map, frequency_scale, options, true)),
          imag_(make_fit(vis, kernel, map, frequency_scale, options, false)) {
        const double rmin = vis.geometry.min_radius();
        Complex sum{0.0, 0.0};
        int count = 0;
        for (Eigen::Index i = 0; i < vis.geometry.size(); ++i) {
            if (vis.geometry.radius(i) <= rmin * (1.0 + 1e-9)) {
                sum += vis.values[static_cast<std::size_t>(i)];
                ++count;
            }
        }
        innermost_mean_ = sum / static_cast<double>(count);
    }

    /// Interpolated visibility at a physical (u, v); the singular point of the map (the origin
    /// for log-polar maps) receives the mean of the innermost-circle visibilities.
    [[nodiscard]] Complex operator()(double u, double v) const {
        Point p(2);
        p << u / scale_, v / scale_;
        try {
            return {real_(p), imag_(p)};
        } catch (const SingularityError&) {
            return innermost_mean_;
        }
    }

    [[nodiscard]] const Interpolant& real_part() const noexcept { return real_; }
    [[nodiscard]] const Interpolant& imag_part() const noexcept { return imag_; }
    [[nodiscard]] double frequency_scale() const noexcept { return scale_; }
    [[nodiscard]] double max_radius() const noexcept { return max_radius_; }

private:
    static Interpolant make_fit(const VisibilitySet& vis, const RadialKernel& kernel, const AugmentedMap& map,
                                double scale, const FitOptions& options, bool real) {
        vis.validate();
        Vector vals(vis.geometry.size());
        for (Eigen::Index i = 0; i < vals.size(); ++i) {
            const Complex c = vis.values[static_cast<std::size_t>(i)];
            vals(i) = real ? c.real() : c.imag();
        }
        return fit(kernel, map, NodeSet(vis.geometry.points / scale), vals, options);
    }

    double scale_;
    double max_radius_;
    Interpolant real_;
    Interpolant imag_;
    Complex innermost_mean_;
};

/// Surface V(k, l) at (coordinate(k), coordinate(l)); zero beyond the outermost sampled radius.
[[nodiscard]] inline ComplexMatrix interpolate_visibility_surface(const VisibilityInterpolant& interp,
                                                                  const UvGridSpec& grid) {
    ComplexMatrix s = ComplexMatrix::Zero(grid.size, grid.size);
    const double limit = interp.max_radius() * (1.0 + 1e-12);
    for (int k = 0; k < grid.size; ++k) {
        for (int l = 0; l < grid.size; ++l) {
            const double u = grid.coordinate(k);
            const double v = grid.coordinate(l);
            if (std::hypot(u, v) <= limit) s(k, l) = interp(u, v);
        }
    }
    return s;
}

[[nodiscard]] inline ComplexMatrix interpolate_visibility_surface(const VisibilitySet& vis, const RadialKernel& kernel,
                                                                  const AugmentedMap& map, const UvGridSpec& grid,
                                                                  double frequency_scale) {
    return interpolate_visibility_surface(VisibilityInterpolant(vis, kernel, map, frequency_scale), grid);
}

/// Shared epsilon for the real and imaginary surfaces by joint leave-one-out.
[[nodiscard]] inline EpsilonSelection select_visibility_epsilon(const LoocvConfig& config, Profile profile,
                                                                const AugmentedMap& map, const VisibilitySet& vis,
                                                                double frequency_scale) {
    vis.validate();
    Matrix vals(vis.geometry.size(), 2);
    for (Eigen::Index i = 0; i < vals.rows(); ++i) {
        vals(i, 0) = vis.values[static_cast<std::size_t>(i)].real();
        vals(i, 1) = vis.values[static_cast<std::size_t>(i)].imag();
    }
    return select_epsilon(config, profile, map, NodeSet(vis.geometry.points / frequency_scale), vals);
}

// ---------------------------------------------------------------------------
// Geometry diagnostics of the log-polar map
// ---------------------------------------------------------------------------

struct AnglePreservationReport {
    double max_angle_error = 0.0;  ///< radians, after accounting for sign flips of the radius
    double original_radius_ratio = 0.0;
    double mapped_radius_ratio = 0.0;
};

/// Checks that a log-polar map keeps every point on its own line through the origin and
/// declusters the radii (mapped max/min radius ratio below the original one).
[[nodiscard]] inline AnglePreservationReport angle_preservation_check(const NodeMap& map, const PointSet& points) {
    if (!std::holds_alternative<LogPolarMap>(map.kind())) throw InvalidArgument("angle check expects a log-polar map");
    AnglePreservationReport rep;
    double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
    double smin = std::numeric_limits<double>::infinity(), smax = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        const Point p = points.row(i).transpose();
        const Point s = map(p);
        const double r = p.norm();
        const double rho = s.norm();
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        smin = std::min(smin, rho);
        smax = std::max(smax, rho);
        const auto& lp = std::get<LogPolarMap>(map.kind());
        const double signed_rho = lp.scale * std::log(r / lp.reference_radius);
        double expected = std::atan2(p(1), p(0));
        if (signed_rho < 0.0) expected += std::numbers::pi;
        double diff = std::remainder(std::atan2(s(1), s(0)) - expected, 2.0 * std::numbers::pi);
        if (rho == 0.0) diff = 0.0;
        rep.max_angle_error = std::max(rep.max_angle_error, std::abs(diff));
    }
    rep.original_radius_ratio = rmax / rmin;
    rep.mapped_radius_ratio = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    return rep;
}

// ---------------------------------------------------------------------------
// Projected Landweber
// ---------------------------------------------------------------------------

struct LandweberConfig {
    int max_iters = 500;
    double tol = 1e-7;
    double relaxation = 0.9;  ///< tau = relaxation / sigma_max^2
    double max_imag_residue = 1e-6;
};

struct LandweberResult {
    ImageGrid image;
    std::vector<double> residuals;  ///< |V - F f^(k)| for k = 0 (f = 0), 1, 2, ...
    int iterations = 0;
    double tau = 0.0;
    double sigma_max = 0.0;
    bool converged = false;
};

/// f <- max(0, f + tau F*(V - F f)) from f = 0.
[[nodiscard]] inline LandweberResult projected_landweber(const ComplexMatrix& surface, const GridFourierOperator& op,
                                                         const LandweberConfig& cfg = {}) {
    if (surface.rows() != op.uv_spec().size || surface.cols() != op.uv_spec().size) {
        throw ShapeError("visibility surface does not match the operator's (u, v) grid");
    }
    if (cfg.max_iters < 1 || !(cfg.relaxation > 0.0) || !(cfg.relaxation < 2.0)) {
        throw InvalidArgument("Landweber needs max_iters >= 1 and relaxation in (0, 2)");
    }
    const ComplexMatrix back = op.adjoint_complex(surface);
    const double back_norm = back.norm();
    if (back_norm > 0.0 && back.imag().norm() > cfg.max_imag_residue * back_norm) {
        throw InvalidArgument("visibility surface is not conjugate-symmetric: F* V has a large imaginary part");
    }

    LandweberResult res;
    res.sigma_max = op.norm_estimate();
    const int m = op.image_spec().size;
    res.image = {Matrix::Zero(m, m), op.image_spec()};
    const double v_norm = surface.norm();
    res.residuals.push_back(v_norm);
    if (res.sigma_max == 0.0) throw NumericalBreakdown("Fourier operator has zero norm");
    res.tau = cfg.relaxation / (res.sigma_max * res.sigma_max);

    int increases = 0;
    Matrix& f = res.image.flux;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        const ComplexMatrix r = surface - op.apply(f);
        f = (f + res.tau * op.adjoint(r)).cwiseMax(0.0);
        const double rn = (surface - op.apply(f)).norm();
        const double prev = res.residuals.back();
        res.residuals.push_back(rn);
        res.iterations = it;
        increases = rn > prev ? increases + 1 : 0;
        if (increases >= 5) {
            throw NumericalBreakdown("Landweber residual increased for 5 consecutive iterations; reduce the relaxation");
        }
        if (rn <= 1e-14 * v_norm || (prev > 0.0 && std::abs(prev - rn) < cfg.tol * prev)) {
            res.converged = true;
            break;
        }
    }
    return res;
}

/// chi^2 = (1 / 2N) sum_i |V_obs,i - V_model,i|^2 / sigma_i^2, sigma_i = 1 when unset.
[[nodiscard]] inline double chi_square(const VisibilitySet& observed, const ImageGrid& image) {
    observed.validate();
    const VisibilitySet model = forward_model(image, observed.geometry);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < observed.geometry.size(); ++i) {
        const double s = observed.sigma ? (*observed.sigma)(i) : 1.0;
        if (s == 0.0) throw InvalidArgument("visibility sigma must be nonzero");
        const Complex d = observed.values[static_cast<std::size_t>(i)] - model.values[static_cast<std::size_t>(i)];
        sum += std::norm(d) / (s * s);
    }
    return sum / (2.0 * static_cast<double>(observed.geometry.size()));
}

// ---------------------------------------------------------------------------
// Synthetic sources and the end-to-end pipeline
// ---------------------------------------------------------------------------

struct GaussianSource {
    double x = 0.0;  ///< arcsec
    double y = 0.0;
    double sigma = 4.0;
    double peak = 1.0;
};

[[nodiscard]] inline ImageGrid render_sources(const std::vector<GaussianSource>& sources, const ImageGridSpec& spec) {
    spec.validate();
    ImageGrid img{Matrix::Zero(spec.size, spec.size), spec};
    for (int i = 0; i < spec.size; ++i) {
        for (int j = 0; j < spec.size; ++j) {
            double v = 0.0;
            for (const auto& s : sources) {
                const double dx = spec.x(i) - s.x;
                const double dy = spec.y(j) - s.y;
                v += s.peak * std::exp(-(dx * dx + dy * dy) / (2.0 * s.sigma * s.sigma));
            }
            img.flux(i, j) = v;
        }
    }
    return img;
}

/// Two Gaussian blobs with centres in [-6, 6]^2 arcsec, widths in [3, 5] arcsec and peaks in [0.5, 1].
[[nodiscard]] inline std::vector<GaussianSource> two_gaussian_sources(std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<GaussianSource> out;
    for (int k = 0; k < 2; ++k) {
        GaussianSource s;
        s.x = -6.0 + 12.0 * rng.uniform();
        s.y = -6.0 + 12.0 * rng.uniform();
        s.sigma = 3.0 + 2.0 * rng.uniform();
        s.peak = 0.5 + 0.5 * rng.uniform();
        out.push_back(s);
    }
    return out;
}

enum class ImagingVariant { Classical, Vsk, Mvsk };

[[nodiscard]] inline std::string_view imaging_variant_name(ImagingVariant v) {
    switch (v) {
        case ImagingVariant::Classical: return "classical";
        case ImagingVariant::Vsk: return "vsk";
        case ImagingVariant::Mvsk: return "mvsk";
    }
    return "unknown";
}

[[nodiscard]] inline std::optional<ImagingVariant> parse_imaging_variant(std::string_view s) {
    if (s == "classical") return ImagingVariant::Classical;
    if (s == "vsk") return ImagingVariant::Vsk;
    if (s == "mvsk") return ImagingVariant::Mvsk;
    return std::nullopt;
}

struct PipelineConfig {
    ImageGridSpec image;
    int uv_grid_size = 64;
    Profile profile = Profile::MaternC6;
    std::optional<double> epsilon;  ///< fixed shape parameter; LOOCV when unset
    LoocvConfig loocv;
    PsiOptions psi;
    LogPolarMode log_polar = LogPolarMode::Shifted;
    LandweberConfig landweber;
};

struct PipelineResult {
    ImagingVariant variant = ImagingVariant::Classical;
    double epsilon = 0.0;
    double frequency_scale = 0.0;
    ComplexMatrix surface;
    UvGridSpec uv_grid;
    LandweberResult landweber;
    VisibilitySet predicted;  ///< forward model of the reconstruction at the observed (u, v)
    double chi2 = 0.0;
    std::optional<std::string> psi_warning;
    std::vector<LoocvPoint> loocv_curve;
};

[[nodiscard]] inline AugmentedMap imaging_map(ImagingVariant variant, const VisibilitySet& vis, const PipelineConfig& cfg,
                                              double scale, std::optional<std::string>* warning = nullptr) {
    if (variant == ImagingVariant::Classical) return AugmentedMap::classical();
    PsiOptions po = cfg.psi;
    po.frequency_scale = scale;
    PsiResult psi = build_psi_from_backprojection(vis, cfg.image, po);
    if (warning) *warning = psi.warning;
    if (variant == ImagingVariant::Vsk) return AugmentedMap::vsk(std::move(psi.psi));
    return {stix_log_polar(vis.geometry, scale, cfg.log_polar), std::move(psi.psi)};
}

/// Visibilities -> interpolated surface -> projected Landweber image -> chi^2.
[[nodiscard]] inline PipelineResult reconstruct(const VisibilitySet& vis, ImagingVariant variant,
                                                const PipelineConfig& cfg = {}) {
    vis.validate();
    cfg.image.validate();
    PipelineResult out;
    out.variant = variant;
    out.frequency_scale = vis.geometry.max_radius();
    if (!(out.frequency_scale > 0.0)) throw InvalidArgument("visibilities need at least one nonzero frequency");
    const AugmentedMap map = imaging_map(variant, vis, cfg, out.frequency_scale, &out.psi_warning);
    if (cfg.epsilon) {
        out.epsilon = *cfg.epsilon;
    } else {
        const EpsilonSelection sel = select_visibility_epsilon(cfg.loocv, cfg.profile, map, vis, out.frequency_scale);
        out.epsilon = sel.best_epsilon;
        out.loocv_curve = sel.score_curve;
    }
    const VisibilityInterpolant interp(vis, RadialKernel(cfg.profile, out.epsilon), map, out.frequency_scale);
    out.uv_grid = UvGridSpec::covering(out.frequency_scale, cfg.uv_grid_size);
    out.surface = interpolate_visibility_surface(interp, out.uv_grid);
    const GridFourierOperator op(cfg.image, out.uv_grid);
    out.landweber = projected_landweber(out.surface, op, cfg.landweber);
    out.predicted = forward_model(out.landweber.image, vis.geometry);
    out.chi2 = chi_square(vis, out.landweber.image);
    return out;
}

[[nodiscard]] inline double relative_l2_error(const Matrix& estimate, const Matrix& truth) {
    if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) throw ShapeError("image sizes differ");
    const double tn = truth.norm();
    if (tn == 0.0) throw InvalidArgument("relative error against a zero image");
    return (estimate - truth).norm() / tn;
}

}  // namespace mvsk::imaging
