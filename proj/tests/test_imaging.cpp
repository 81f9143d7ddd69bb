#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mvsk/imaging.hpp"
#include "test_helpers.hpp"

using namespace mvsk;
using namespace mvsk::imaging;

namespace {

ImageGrid point_source(const ImageGridSpec& spec, int i, int j, double flux = 1.0) {
    ImageGrid img{Matrix::Zero(spec.size, spec.size), spec};
    img.flux(i, j) = flux;
    return img;
}

ComplexMatrix random_surface(SplitMix64& rng, int n) {
    ComplexMatrix w(n, n);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) w(k, l) = Complex(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
    return w;
}

}  // namespace

TEST(Geometry, DefaultLayout) {
    const UvGeometry g = default_stix_geometry();
    EXPECT_EQ(g.size(), 60);
    EXPECT_NEAR(g.min_radius(), 2.79e-3, 1e-15);
    EXPECT_NEAR(g.max_radius(), 7.02e-2, 1e-15);
    for (Eigen::Index i = 0; i < 30; ++i) EXPECT_EQ(g.points.row(i + 30), -g.points.row(i));
    EXPECT_EQ(g.radii.size(), 10u);
    for (std::size_t c = 1; c < g.radii.size(); ++c) EXPECT_GT(g.radii[c], g.radii[c - 1]);
}

TEST(Geometry, FromPointsValidates) {
    EXPECT_THROW((void)geometry_from_points(PointSet::Zero(3, 3)), ShapeError);
    EXPECT_THROW((void)geometry_from_points(PointSet(0, 2)), ShapeError);
}

TEST(ForwardModel, CentredUnitPixel) {
    ImageGridSpec spec;
    spec.size = 5;
    spec.pixel_size = 2.0;
    const VisibilitySet v = forward_model(point_source(spec, 2, 2), default_stix_geometry());
    for (const auto& c : v.values) {
        EXPECT_NEAR(c.real(), 4.0, 1e-13);
        EXPECT_NEAR(c.imag(), 0.0, 1e-13);
    }
}

TEST(ForwardModel, ShiftedPointSourcePhase) {
    ImageGridSpec spec;
    spec.size = 9;
    const ImageGrid img = point_source(spec, 6, 1, 2.0);
    const double x0 = spec.x(6), y0 = spec.y(1);
    const UvGeometry g = default_stix_geometry();
    const VisibilitySet v = forward_model(img, g);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double phase = -2.0 * std::numbers::pi * (g.points(i, 0) * x0 + g.points(i, 1) * y0);
        const Complex expect = 2.0 * std::polar(1.0, phase);
        EXPECT_NEAR(std::abs(v.values[static_cast<std::size_t>(i)] - expect), 0.0, 1e-12);
    }
}

TEST(ForwardModel, ConjugateSymmetryForRealImages) {
    SplitMix64 rng(3);
    ImageGridSpec spec;
    spec.size = 16;
    ImageGrid img{(testing_util::random_points(rng, 16, 16, 0, 1)), spec};
    const VisibilitySet v = forward_model(img, default_stix_geometry());
    for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(std::abs(v.values[i] - std::conj(v.values[i + 30])), 0.0, 1e-12);
}

TEST(BackProjection, ZeroAndPeak) {
    ImageGridSpec spec;
    spec.size = 33;
    VisibilitySet zero{default_stix_geometry(), std::vector<Complex>(60, Complex{}), std::nullopt};
    EXPECT_EQ(back_projection(zero, spec).norm(), 0.0);
    const VisibilitySet v = forward_model(point_source(spec, 16, 16), default_stix_geometry());
    const Matrix b = back_projection(v, spec);
    Eigen::Index i, j;
    b.maxCoeff(&i, &j);
    EXPECT_EQ(i, 16);
    EXPECT_EQ(j, 16);
}

TEST(BackProjection, AdjointOfForwardModel) {
    SplitMix64 rng(4);
    ImageGridSpec spec;
    spec.size = 12;
    spec.pixel_size = 1.5;
    const UvGeometry g = default_stix_geometry();
    const ImageGrid img{testing_util::random_points(rng, 12, 12), spec};
    VisibilitySet w{g, {}, std::nullopt};
    for (int i = 0; i < 60; ++i) w.values.emplace_back(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
    const VisibilitySet fv = forward_model(img, g);
    double lhs = 0.0;
    for (int i = 0; i < 60; ++i) lhs += (std::conj(fv.values[i]) * w.values[i]).real();
    const double rhs = spec.pixel_area() * (img.flux.array() * back_projection(w, spec).array()).sum();
    EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
}

TEST(GridOperator, Adjointness) {
    SplitMix64 rng(5);
    ImageGridSpec spec;
    const GridFourierOperator op(spec, UvGridSpec::covering(kStixMaxRadius, 64));
    for (int t = 0; t < 3; ++t) {
        const Matrix f = testing_util::random_points(rng, 64, 64);
        const ComplexMatrix w = random_surface(rng, 64);
        const double lhs = (op.apply(f).conjugate().array() * w.array()).sum().real();
        const double rhs = (f.array() * op.adjoint(w).array()).sum();
        EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(lhs));
    }
}

TEST(GridOperator, NormEstimateMatchesSvd) {
    ImageGridSpec spec;
    spec.size = 12;
    const GridFourierOperator op(spec, UvGridSpec::covering(kStixMaxRadius, 10));
    // Real-linear operator: stack real and imaginary parts.
    Matrix stacked(200, 144);
    for (int c = 0; c < 144; ++c) {
        Matrix e = Matrix::Zero(12, 12);
        e(c / 12, c % 12) = 1.0;
        const ComplexMatrix col = op.apply(e);
        stacked.col(c).head(100) = Eigen::Map<const Vector>(col.real().eval().data(), 100);
        stacked.col(c).tail(100) = Eigen::Map<const Vector>(col.imag().eval().data(), 100);
    }
    const double sigma = Eigen::JacobiSVD<Matrix>(stacked).singularValues()(0);
    EXPECT_NEAR(op.norm_estimate() / sigma, 1.0, 1e-6);
}

TEST(Psi, ZeroVisibilitiesGiveConstantWithWarning) {
    VisibilitySet zero{default_stix_geometry(), std::vector<Complex>(60, Complex{}), std::nullopt};
    const PsiResult r = build_psi_from_backprojection(zero, ImageGridSpec{});
    EXPECT_TRUE(r.warning.has_value());
    Point p(2);
    p << 0.3, -0.2;
    EXPECT_EQ(r.psi(p), 0.0);
}

TEST(Psi, SingleGaussianPeaksAtLowFrequencies) {
    ImageGridSpec spec;
    const VisibilitySet v = forward_model(render_sources({{0, 0, 4, 1}}, spec), default_stix_geometry());
    const PsiResult r = build_psi_from_backprojection(v, spec);
    EXPECT_FALSE(r.warning.has_value());
    Point p(2);
    p << 0.0, 0.0;
    EXPECT_NEAR(r.psi(p), 1.0, 1e-12);
    const double dirs[][2] = {{1.0, 0.0}, {0.0, 1.0}, {M_SQRT1_2, M_SQRT1_2}};
    for (const auto& d : dirs) {
        double prev = 1.0;
        for (int k = 1; k <= 5; ++k) {
            const double rad = 0.05 * k;
            p << rad * d[0], rad * d[1];
            const double val = r.psi(p);
            EXPECT_LT(val, prev) << "main lobe at radius " << rad;
            prev = val;
        }
        // 60 samples leave sidelobes beyond the main lobe; they stay well below the peak.
        for (int k = 6; k <= 19; ++k) {
            const double rad = 0.05 * k;
            p << rad * d[0], rad * d[1];
            const double val = r.psi(p);
            EXPECT_GE(val, 0.0);
            EXPECT_LE(val, 0.2) << "sidelobe at radius " << rad;
        }
    }
}

TEST(LogPolar, AxisAndDeclustering) {
    Point p(2);
    p << 0.5, 0.0;
    const Point s = NodeMap::log_polar(1.0)(p);
    EXPECT_NEAR(s(0), std::log(0.5), 1e-15);
    EXPECT_NEAR(s(1), 0.0, 1e-15);
    const UvGeometry g = default_stix_geometry();
    for (LogPolarMode mode : {LogPolarMode::Shifted, LogPolarMode::Signed}) {
        const NodeMap m = stix_log_polar(g, g.max_radius(), mode);
        const AnglePreservationReport rep = angle_preservation_check(m, g.points / g.max_radius());
        EXPECT_LT(rep.max_angle_error, 1e-12);
        EXPECT_NEAR(rep.original_radius_ratio, 7.02e-2 / 2.79e-3, 1e-9);
        EXPECT_LT(rep.mapped_radius_ratio, rep.original_radius_ratio);
    }
}

TEST(VisibilityInterpolation, ReproducesSamples) {
    ImageGridSpec spec;
    const UvGeometry g = default_stix_geometry();
    const VisibilitySet v = forward_model(render_sources(two_gaussian_sources(3), spec), g);
    PipelineConfig cfg;
    for (ImagingVariant var : {ImagingVariant::Classical, ImagingVariant::Vsk, ImagingVariant::Mvsk}) {
        const AugmentedMap map = imaging_map(var, v, cfg, g.max_radius());
        const VisibilityInterpolant it(v, RadialKernel(Profile::MaternC6, 3.0), map, g.max_radius());
        for (Eigen::Index i = 0; i < g.size(); ++i) {
            const Complex got = it(g.points(i, 0), g.points(i, 1));
            const Complex want = v.values[static_cast<std::size_t>(i)];
            EXPECT_LE(std::abs(got - want), 1e-6 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST(VisibilityInterpolation, ConstantDataMatchesDenseSolve) {
    const UvGeometry g = default_stix_geometry();
    VisibilitySet v{g, std::vector<Complex>(60, Complex(2.0, 0.0)), std::nullopt};
    const RadialKernel k(Profile::MaternC6, 2.0);
    const double scale = g.max_radius();
    const AugmentedMap map(stix_log_polar(g, scale), ScalingFunction::constant(0.0));
    const VisibilityInterpolant it(v, k, map, scale);
    const NodeSet nodes(g.points / scale);
    const Matrix gram = assemble_gram(k, map, nodes);
    const Vector c = gram.fullPivLu().solve(Vector::Constant(60, 2.0));
    Point q(2);
    q << 0.013 / scale, -0.021 / scale;
    double ref = 0.0;
    for (Eigen::Index i = 0; i < 60; ++i) ref += c(i) * mvsk_eval(k, map, q, nodes.point(i));
    EXPECT_NEAR(it(0.013, -0.021).real(), ref, 1e-8);
    EXPECT_NEAR(it(0.013, -0.021).imag(), 0.0, 1e-12);
}

TEST(VisibilityInterpolation, SurfaceIsConjugateSymmetric) {
    ImageGridSpec spec;
    const UvGeometry g = default_stix_geometry();
    const VisibilitySet v = forward_model(render_sources(two_gaussian_sources(9), spec), g);
    const UvGridSpec grid = UvGridSpec::covering(g.max_radius(), 32);
    const ComplexMatrix s = interpolate_visibility_surface(v, RadialKernel(Profile::MaternC6, 3.0),
                                                           AugmentedMap(stix_log_polar(g, g.max_radius()),
                                                                        ScalingFunction::constant(0.0)),
                                                           grid, g.max_radius());
    for (int k = 0; k < 32; ++k)
        for (int l = 0; l < 32; ++l) EXPECT_NEAR(std::abs(s(k, l) - std::conj(s(31 - k, 31 - l))), 0.0, 1e-8);
    EXPECT_EQ(s(0, 0), Complex(0.0, 0.0));
}

TEST(Landweber, ZeroDataStaysZero) {
    ImageGridSpec spec;
    spec.size = 16;
    const GridFourierOperator op(spec, UvGridSpec::dft_for(spec));
    const LandweberResult r = projected_landweber(ComplexMatrix::Zero(16, 16), op);
    EXPECT_EQ(r.image.flux.norm(), 0.0);
    EXPECT_EQ(r.iterations, 1);
}

TEST(Landweber, RecoversConsistentNonnegativeImage) {
    ImageGridSpec spec;
    spec.size = 16;
    spec.pixel_size = 2.0;
    const GridFourierOperator op(spec, UvGridSpec::dft_for(spec));
    const ImageGrid truth = render_sources({{-3, 2, 3, 1.0}, {5, -4, 2, 0.6}}, spec);
    LandweberConfig cfg;
    cfg.tol = 1e-14;
    const LandweberResult r = projected_landweber(op.apply(truth.flux), op, cfg);
    EXPECT_LT((r.image.flux - truth.flux).norm() / truth.flux.norm(), 1e-3);
    EXPECT_TRUE((r.image.flux.array() >= 0.0).all());
    for (std::size_t k = 1; k < r.residuals.size(); ++k) EXPECT_LE(r.residuals[k], r.residuals[k - 1] * (1 + 1e-12));
}

TEST(Landweber, RejectsBadInput) {
    ImageGridSpec spec;
    spec.size = 8;
    const GridFourierOperator op(spec, UvGridSpec::dft_for(spec));
    EXPECT_THROW((void)projected_landweber(ComplexMatrix::Zero(4, 4), op), ShapeError);
    LandweberConfig bad;
    bad.relaxation = 2.5;
    EXPECT_THROW((void)projected_landweber(ComplexMatrix::Zero(8, 8), op, bad), InvalidArgument);
    ComplexMatrix asym = ComplexMatrix::Zero(8, 8);
    asym(1, 2) = Complex(0, 1);
    EXPECT_THROW((void)projected_landweber(asym, op), InvalidArgument);
}

TEST(ChiSquare, Cases) {
    ImageGridSpec spec;
    spec.size = 10;
    const ImageGrid img = render_sources({{1, 1, 3, 1}}, spec);
    const UvGeometry g = default_stix_geometry();
    VisibilitySet obs = forward_model(img, g);
    EXPECT_NEAR(chi_square(obs, img), 0.0, 1e-25);
    Vector sigma(60);
    for (int i = 0; i < 60; ++i) {
        sigma(i) = 0.1 + 0.01 * i;
        obs.values[static_cast<std::size_t>(i)] += sigma(i) * Complex(1.0, 1.0);
    }
    obs.sigma = sigma;
    EXPECT_NEAR(chi_square(obs, img), 1.0, 1e-12);
    obs.sigma = Vector::Zero(60);
    EXPECT_THROW((void)chi_square(obs, img), InvalidArgument);
}

TEST(Pipeline, SmallEndToEnd) {
    PipelineConfig cfg;
    cfg.image.size = 24;
    cfg.image.pixel_size = 2.0;
    cfg.uv_grid_size = 24;
    cfg.epsilon = 3.0;
    cfg.landweber.max_iters = 50;
    const VisibilitySet v = forward_model(render_sources({{0, 0, 6, 1}}, cfg.image), default_stix_geometry());
    for (ImagingVariant var : {ImagingVariant::Classical, ImagingVariant::Vsk, ImagingVariant::Mvsk}) {
        const PipelineResult r = reconstruct(v, var, cfg);
        EXPECT_EQ(r.epsilon, 3.0);
        EXPECT_TRUE(std::isfinite(r.chi2));
        EXPECT_TRUE((r.landweber.image.flux.array() >= 0.0).all());
        EXPECT_EQ(r.predicted.values.size(), 60u);
    }
    EXPECT_EQ(parse_imaging_variant("mvsk"), ImagingVariant::Mvsk);
    EXPECT_FALSE(parse_imaging_variant("mvsdk"));
}
