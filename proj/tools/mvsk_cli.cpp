#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mvsk/harness.hpp"
#include "mvsk/imaging.hpp"
#include "mvsk/interpolation.hpp"
#include "mvsk/io.hpp"
#include "mvsk/metrics.hpp"
#include "mvsk/model_selection.hpp"

namespace fs = std::filesystem;
using namespace mvsk;
using io::Json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
    std::string config;
    std::string kernel;
    std::optional<double> epsilon;
    bool loocv = false;
    std::optional<double> ridge;
};

Json load_config(const std::string& path) {
    if (path.empty()) return Json::object();
    if (!fs::exists(path)) throw ConfigError("config: file '" + path + "' does not exist");
    return io::read_json(path);
}

void overlay_common(Json& j, const CommonFlags& f) {
    if (!f.kernel.empty()) j["kernel"] = f.kernel;
    if (f.epsilon) j["epsilon"] = *f.epsilon;
    if (f.loocv) j["loocv"] = true;
    if (f.ridge) j["ridge"] = *f.ridge;
}

void require_file(const std::string& path, const std::string& field) {
    if (!fs::exists(path)) throw ConfigError(field + ": file '" + path + "' does not exist");
}

int run_interp(const CommonFlags& f, const std::string& nodes, const std::string& queries, const std::string& out) {
    Json j = load_config(f.config);
    overlay_common(j, f);
    if (!nodes.empty()) j["nodes"] = nodes;
    if (!queries.empty()) j["queries"] = queries;
    if (!out.empty()) j["out"] = out;
    const io::RunConfig rc = io::parse_config(io::Subcommand::Interp, j);
    require_file(rc.paths.at("nodes"), "nodes");

    const io::NodeData data = io::read_nodes_csv(rc.paths.at("nodes"));
    const NodeSet set(data.points);
    const AugmentedMap map(rc.map, rc.scaling);
    const fs::path dir = rc.paths.count("out") ? fs::path(rc.paths.at("out")) : fs::path("interp_out");

    double eps = rc.kernel.epsilon.value_or(0.0);
    if (rc.loocv) {
        const EpsilonSelection sel = select_epsilon(rc.loocv_config, rc.kernel.profile, map, set, data.values);
        eps = sel.best_epsilon;
        io::write_results(io::loocv_table(sel.score_curve), dir / "loocv_curve.csv");
    }
    FitOptions opts;
    opts.ridge = rc.ridge;
    const Interpolant interp = fit(RadialKernel(rc.kernel.profile, eps), map, set, data.values, opts);
    io::write_json(dir / "interpolant.json", io::interpolant_to_json(interp));
    if (rc.paths.count("queries")) {
        require_file(rc.paths.at("queries"), "queries");
        const PointSet q = io::read_points_csv(rc.paths.at("queries"));
        io::write_nodes_csv(dir / "predictions.csv", q, interp.evaluate(q));
    }
    std::cout << "epsilon " << io::format_double(eps) << "\ncondition "
              << io::format_double(interp.diagnostics().condition_estimate) << "\nsolver " << interp.diagnostics().solver
              << "\nwrote " << dir.string() << "\n";
    return 0;
}

int run_metrics(const std::string& config, const std::string& nodes, std::optional<int> grid, const std::string& out) {
    Json j = load_config(config);
    if (!nodes.empty()) j["nodes"] = nodes;
    if (grid) j["grid"] = *grid;
    const io::RunConfig rc = io::parse_config(io::Subcommand::Metrics, j);
    require_file(rc.paths.at("nodes"), "nodes");
    // The trailing value column is dropped when the file carries one.
    const auto [header, raw] = io::read_numeric_csv(rc.paths.at("nodes"));
    if (raw.rows() < 1 || !raw.allFinite()) throw IoError(rc.paths.at("nodes") + ": empty or non-finite node CSV");
    PointSet coords = raw;
    if (!header.empty() && header.back() == "value") coords = PointSet(raw.leftCols(raw.cols() - 1));
    const auto d = coords.cols();
    const Vector lo = rc.domain_lower.value_or(Vector::Constant(d, -1.0));
    const Vector hi = rc.domain_upper.value_or(Vector::Constant(d, 1.0));
    const DomainBox box{lo, hi, rc.fill_resolution};
    box.validate();

    Json res{{"schema_version", io::kSchemaVersion},
             {"n", coords.rows()},
             {"h", fill_distance(coords, box)},
             {"q", coords.rows() >= 2 ? Json(separation_distance(coords)) : Json(nullptr)}};
    if (rc.partition) {
        const RegionalReport rep = regional_distances(coords, box, *rc.partition);
        Json regions = Json::array();
        for (const auto& r : rep.regions) {
            regions.push_back({{"region", r.region},
                               {"nodes", r.node_count},
                               {"h", std::isfinite(r.fill) ? Json(r.fill) : Json(nullptr)},
                               {"q", std::isfinite(r.separation) ? Json(r.separation) : Json(nullptr)}});
        }
        res["per_region"] = regions;
        res["regional_h"] = std::isfinite(rep.global_fill) ? Json(rep.global_fill) : Json(nullptr);
        res["regional_q"] = std::isfinite(rep.global_separation) ? Json(rep.global_separation) : Json(nullptr);
        res["warnings"] = rep.warnings;
    } else {
        res["per_region"] = Json::array();
    }
    if (out.empty()) {
        std::cout << res.dump(2) << "\n";
    } else {
        io::write_json(out, res);
    }
    return 0;
}

int run_bench(const std::string& config, const std::string& out, const std::string& kernel) {
    Json j = load_config(config);
    if (!out.empty()) j["output_dir"] = out;
    if (!kernel.empty()) j["kernels"] = Json::array({kernel});
    const io::RunConfig rc = io::parse_config(io::Subcommand::BenchDiscontinuous, j);
    const auto rows = run_experiment(rc.experiment);
    io::write_experiment(rows, rc.experiment.output_dir);
    int failed = 0;
    for (const auto& r : rows) {
        if (r.failed) {
            ++failed;
            std::cerr << "warning: " << profile_name(r.profile) << " N=" << r.n_requested << " "
                      << variant_name(r.variant) << ": " << r.message << "\n";
        }
    }
    std::cout << "wrote " << rows.size() << " rows to " << rc.experiment.output_dir << "\n";
    return failed == static_cast<int>(rows.size()) ? kExitRuntime : 0;
}

imaging::VisibilitySet load_source(const io::RunConfig& rc, const imaging::UvGeometry& geometry) {
    const std::string src = rc.paths.count("source") ? rc.paths.at("source") : std::string();
    std::vector<imaging::GaussianSource> sources = rc.sources;
    std::uint64_t seed = rc.seed;
    if (!src.empty()) {
        require_file(src, "source");
        if (fs::path(src).extension() != ".json") return io::read_visibility_csv(src);
        const Json sj = io::read_json(src);
        io::check_keys(sj, {"schema_version", "sources", "seed"}, "source");
        if (sj.contains("seed")) seed = sj.at("seed").get<std::uint64_t>();
        if (sj.contains("sources")) {
            Json wrapped{{"sources", sj.at("sources")}};
            sources = io::parse_config(io::Subcommand::ImageReconstruct, wrapped).sources;
        }
    }
    if (sources.empty()) sources = imaging::two_gaussian_sources(seed);
    return imaging::forward_model(imaging::render_sources(sources, rc.pipeline.image), geometry);
}

int run_image(const CommonFlags& f, const std::string& geometry, const std::string& source, const std::string& variant,
              const std::string& out) {
    Json j = load_config(f.config);
    if (!f.kernel.empty()) j["kernel"] = f.kernel;
    if (f.epsilon) j["epsilon"] = *f.epsilon;
    if (!geometry.empty()) j["geometry"] = geometry;
    if (!source.empty()) j["source"] = source;
    if (!variant.empty()) j["variant"] = variant;
    if (!out.empty()) j["out"] = out;
    const io::RunConfig rc = io::parse_config(io::Subcommand::ImageReconstruct, j);

    const std::string geo = rc.paths.count("geometry") ? rc.paths.at("geometry") : std::string("default");
    imaging::UvGeometry g;
    if (geo == "default") {
        g = imaging::default_stix_geometry();
    } else {
        require_file(geo, "geometry");
        g = io::read_geometry_csv(geo);
    }
    const imaging::VisibilitySet vis = load_source(rc, g);
    const auto v = *imaging::parse_imaging_variant(rc.variant);
    const imaging::PipelineResult res = imaging::reconstruct(vis, v, rc.pipeline);
    const fs::path dir = rc.paths.count("out") ? fs::path(rc.paths.at("out")) : fs::path("image_out");
    io::write_imaging(res, vis, dir);
    if (res.psi_warning) std::cerr << "warning: " << *res.psi_warning << "\n";
    std::cout << "variant " << rc.variant << "\nepsilon " << io::format_double(res.epsilon) << "\nchi2 "
              << io::format_double(res.chi2) << "\niterations " << res.landweber.iterations << "\nwrote "
              << dir.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kernel interpolation with mapped and variably scaled kernels"};
    app.require_subcommand(1);

    CommonFlags interp_flags;
    std::string interp_nodes, interp_queries, interp_out;
    auto* interp = app.add_subcommand("interp", "Fit an interpolant to a node CSV and evaluate it at query points");
    interp->add_option("--config", interp_flags.config, "JSON config (map, scaling, epsilon grid)");
    interp->add_option("--nodes", interp_nodes, "Node CSV: x1..xd,value per row");
    interp->add_option("--queries", interp_queries, "Query CSV: x1..xd per row");
    interp->add_option("--out", interp_out, "Output directory");
    interp->add_option("--kernel", interp_flags.kernel, "wendland0|matern6|gaussian");
    interp->add_option("--epsilon", interp_flags.epsilon, "Shape parameter");
    interp->add_flag("--loocv", interp_flags.loocv, "Select epsilon by leave-one-out cross validation");
    interp->add_option("--ridge", interp_flags.ridge, "Diagonal shift added to the Gram matrix (default 0)");

    std::string metrics_config, metrics_nodes, metrics_out;
    std::optional<int> metrics_grid;
    auto* metrics = app.add_subcommand("metrics", "Fill and separation distances of a node CSV");
    metrics->add_option("--config", metrics_config, "JSON config (domain, partition)");
    metrics->add_option("--nodes", metrics_nodes, "Node CSV");
    metrics->add_option("--grid", metrics_grid, "Fill-distance grid resolution per axis");
    metrics->add_option("--out", metrics_out, "Output JSON (stdout when omitted)");

    std::string bench_config, bench_out, bench_kernel;
    auto* bench = app.add_subcommand("bench-discontinuous", "Classical/VSDK/MVSDK comparison on the discontinuous test");
    bench->add_option("--config", bench_config, "JSON config");
    bench->add_option("--out", bench_out, "Output directory");
    bench->add_option("--kernel", bench_kernel, "Restrict to one kernel");

    CommonFlags image_flags;
    std::string image_geometry, image_source, image_variant, image_out;
    auto* image = app.add_subcommand("image-reconstruct", "Visibility interpolation and projected Landweber imaging");
    image->add_option("--config", image_flags.config, "JSON config");
    image->add_option("--geometry", image_geometry, "u,v CSV or 'default'");
    image->add_option("--source", image_source, "Source JSON spec or visibility CSV (u,v,re,im,sigma)");
    image->add_option("--variant", image_variant, "classical|vsk|mvsk");
    image->add_option("--out", image_out, "Output directory");
    image->add_option("--kernel", image_flags.kernel, "wendland0|matern6|gaussian");
    image->add_option("--epsilon", image_flags.epsilon, "Shape parameter (LOOCV when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*interp) return run_interp(interp_flags, interp_nodes, interp_queries, interp_out);
        if (*metrics) return run_metrics(metrics_config, metrics_nodes, metrics_grid, metrics_out);
        if (*bench) return run_bench(bench_config, bench_out, bench_kernel);
        if (*image) return run_image(image_flags, image_geometry, image_source, image_variant, image_out);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
