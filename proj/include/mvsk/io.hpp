#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mvsk/harness.hpp"
#include "mvsk/imaging.hpp"
#include "mvsk/interpolation.hpp"
#include "mvsk/kernels.hpp"
#include "mvsk/model_selection.hpp"
#include "mvsk/scalings.hpp"

namespace mvsk::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// 17 significant digits: parsing the text gives back the same double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[nodiscard]] inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

[[nodiscard]] inline std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// Rejects keys outside `allowed`, naming the closest valid key and listing all of them.
inline void check_keys(const Json& obj, const std::vector<std::string>& allowed, std::string_view context) {
    if (!obj.is_object()) throw ConfigError(std::string(context) + ": expected a JSON object");
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) != allowed.end()) continue;
        std::string nearest;
        std::size_t best = std::string::npos;
        for (const auto& a : allowed) {
            const auto d = edit_distance(key, a);
            if (d < best) {
                best = d;
                nearest = a;
            }
        }
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError(std::string(context) + ": unknown key '" + key + "' (did you mean '" + nearest +
                          "'?); valid keys: " + list);
    }
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

inline void ensure_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError(path.parent_path().string() + ": " + ec.message());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string() + ": cannot open for writing");
    out << text;
    if (!out) throw IoError(path.string() + ": write failed");
}

[[nodiscard]] inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path.string() + ": cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

[[nodiscard]] inline std::string to_csv(const Table& t) {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(t.columns);
    for (const auto& r : t.rows) {
        if (r.size() != t.columns.size()) throw ShapeError("CSV row width differs from the header");
        line(r);
    }
    return out;
}

inline void write_results(const Table& t, const std::filesystem::path& path) { write_text(path, to_csv(t)); }

[[nodiscard]] inline std::vector<std::vector<std::string>> parse_csv_cells(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line.front() == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(std::move(cells));
    }
    return rows;
}

/// Numeric CSV with an optional header row (detected when its first cell is not a number).
[[nodiscard]] inline std::pair<std::vector<std::string>, Matrix> read_numeric_csv(const std::filesystem::path& path) {
    auto cells = parse_csv_cells(read_text(path));
    std::vector<std::string> header;
    if (!cells.empty() && !cells.front().empty() && !parse_double(cells.front().front())) {
        header = cells.front();
        cells.erase(cells.begin());
    }
    if (cells.empty()) return {header, Matrix(0, static_cast<Eigen::Index>(header.size()))};
    const auto width = cells.front().size();
    Matrix m(static_cast<Eigen::Index>(cells.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < cells.size(); ++r) {
        if (cells[r].size() != width) {
            throw IoError(path.string() + ": row " + std::to_string(r + 1) + " has " + std::to_string(cells[r].size()) +
                          " cells, expected " + std::to_string(width));
        }
        for (std::size_t c = 0; c < width; ++c) {
            const auto v = parse_double(cells[r][c]);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                v ? *v : std::numeric_limits<double>::quiet_NaN();
            if (!v && !cells[r][c].empty()) {
                throw IoError(path.string() + ": row " + std::to_string(r + 1) + " column " + std::to_string(c + 1) +
                              ": '" + cells[r][c] + "' is not a number");
            }
        }
    }
    return {header, m};
}

struct NodeData {
    PointSet points;
    Vector values;
};

/// One row per node: d coordinates then the value.
inline void write_nodes_csv(const std::filesystem::path& path, const PointSet& points, const Vector& values) {
    if (points.rows() != values.size()) throw ShapeError("one value per node required");
    Table t;
    for (Eigen::Index k = 0; k < points.cols(); ++k) t.columns.push_back("x" + std::to_string(k + 1));
    t.columns.emplace_back("value");
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        std::vector<std::string> row;
        for (Eigen::Index k = 0; k < points.cols(); ++k) row.push_back(format_double(points(i, k)));
        row.push_back(format_double(values(i)));
        t.rows.push_back(std::move(row));
    }
    write_results(t, path);
}

[[nodiscard]] inline NodeData read_nodes_csv(const std::filesystem::path& path) {
    const auto [header, m] = read_numeric_csv(path);
    if (m.rows() < 1 || m.cols() < 2) throw IoError(path.string() + ": need at least one row of d coordinates and a value");
    if (!m.allFinite()) throw IoError(path.string() + ": node CSV contains empty or non-finite cells");
    return {PointSet(m.leftCols(m.cols() - 1)), m.col(m.cols() - 1)};
}

/// Query points: d coordinates per row.
[[nodiscard]] inline PointSet read_points_csv(const std::filesystem::path& path) {
    const auto [header, m] = read_numeric_csv(path);
    if (!m.allFinite()) throw IoError(path.string() + ": point CSV contains empty or non-finite cells");
    return PointSet(m);
}

/// Columns u, v, re, im, sigma (sigma left empty when unset).
inline void write_visibility_csv(const std::filesystem::path& path, const imaging::VisibilitySet& vis) {
    vis.validate();
    Table t{{"u", "v", "re", "im", "sigma"}, {}};
    for (Eigen::Index i = 0; i < vis.geometry.size(); ++i) {
        const auto c = vis.values[static_cast<std::size_t>(i)];
        t.rows.push_back({format_double(vis.geometry.points(i, 0)), format_double(vis.geometry.points(i, 1)),
                          format_double(c.real()), format_double(c.imag()),
                          vis.sigma ? format_double((*vis.sigma)(i)) : std::string()});
    }
    write_results(t, path);
}

[[nodiscard]] inline imaging::VisibilitySet read_visibility_csv(const std::filesystem::path& path) {
    const auto [header, m] = read_numeric_csv(path);
    if (m.cols() != 5 || m.rows() < 1) throw IoError(path.string() + ": expected columns u, v, re, im, sigma");
    imaging::VisibilitySet vis;
    vis.geometry = imaging::geometry_from_points(PointSet(m.leftCols(2)));
    for (Eigen::Index i = 0; i < m.rows(); ++i) vis.values.emplace_back(m(i, 2), m(i, 3));
    const Vector sigma = m.col(4);
    const bool any = sigma.unaryExpr([](double v) { return std::isfinite(v) ? 1.0 : 0.0; }).sum() > 0;
    if (any) {
        if (!sigma.allFinite()) throw IoError(path.string() + ": sigma must be given for every row or for none");
        vis.sigma = sigma;
    }
    if (!m.leftCols(4).allFinite()) throw IoError(path.string() + ": non-finite u, v, re or im");
    return vis;
}

/// Geometry CSV: columns u, v (any further columns are ignored).
[[nodiscard]] inline imaging::UvGeometry read_geometry_csv(const std::filesystem::path& path) {
    const auto [header, m] = read_numeric_csv(path);
    if (m.cols() < 2 || m.rows() < 1) throw IoError(path.string() + ": expected columns u, v");
    if (!m.leftCols(2).allFinite()) throw IoError(path.string() + ": non-finite u or v");
    return imaging::geometry_from_points(PointSet(m.leftCols(2)));
}

/// Image as flat text: one row per i, one column per j.
inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    write_text(path, out);
}

// ---------------------------------------------------------------------------
// JSON specs
// ---------------------------------------------------------------------------

[[nodiscard]] inline Json kernel_to_json(const RadialKernel& k) {
    return Json{{"profile", std::string(profile_name(k.profile()))}, {"epsilon", k.epsilon()}};
}

[[nodiscard]] inline Profile profile_from_json(const Json& j, std::string_view field = "kernel") {
    if (!j.is_string()) throw ConfigError(std::string(field) + ": expected one of wendland0, matern6, gaussian");
    const auto p = parse_profile(j.get<std::string>());
    if (!p) {
        throw ConfigError(std::string(field) + ": unknown kernel '" + j.get<std::string>() +
                          "' (valid: wendland0, matern6, gaussian)");
    }
    return *p;
}

[[nodiscard]] inline double positive_number(const Json& j, std::string_view field) {
    if (!j.is_number()) throw ConfigError(std::string(field) + ": expected a number");
    const double v = j.get<double>();
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(field) + ": must be > 0 (got " + format_double(v) + ")");
    return v;
}

[[nodiscard]] inline RadialKernel kernel_from_json(const Json& j) {
    check_keys(j, {"profile", "epsilon"}, "kernel");
    if (!j.contains("profile") || !j.contains("epsilon")) throw ConfigError("kernel: needs profile and epsilon");
    return {profile_from_json(j.at("profile"), "kernel.profile"), positive_number(j.at("epsilon"), "epsilon")};
}

[[nodiscard]] inline Json vector_to_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

[[nodiscard]] inline Vector vector_from_json(const Json& j, std::string_view field) {
    if (!j.is_array()) throw ConfigError(std::string(field) + ": expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(std::string(field) + ": expected an array of numbers");
        v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
    }
    return v;
}

[[nodiscard]] inline Json partition_to_json(const Partition& p) {
    if (!p.is_threshold()) throw ConfigError("callback partitions cannot be serialized");
    Json j{{"axis", p.axis()}, {"thresholds", p.cuts()}};
    return j;
}

[[nodiscard]] inline Partition partition_from_json(const Json& j) {
    check_keys(j, {"axis", "thresholds"}, "partition");
    const int axis = j.value("axis", 0);
    std::vector<double> cuts;
    if (j.contains("thresholds")) {
        const Vector v = vector_from_json(j.at("thresholds"), "partition.thresholds");
        cuts.assign(v.data(), v.data() + v.size());
    }
    try {
        return Partition::thresholds(axis, std::move(cuts));
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("partition: ") + e.what());
    }
}

[[nodiscard]] inline Json scaling_to_json(const ScalingFunction& s) {
    return std::visit(
        [](const auto& k) -> Json {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, ConstantScaling>) {
                return Json{{"kind", "constant"}, {"value", k.value}};
            } else if constexpr (std::is_same_v<T, PiecewiseConstantScaling>) {
                return Json{{"kind", "piecewise"}, {"partition", partition_to_json(k.partition)}, {"values", k.values}};
            } else if constexpr (std::is_same_v<T, SampledScaling>) {
                Json rows = Json::array();
                for (Eigen::Index i = 0; i < k.values.rows(); ++i) rows.push_back(vector_to_json(k.values.row(i).transpose()));
                return Json{{"kind", "sampled"}, {"x0", k.x0}, {"x1", k.x1}, {"y0", k.y0}, {"y1", k.y1}, {"values", rows}};
            } else {
                throw ConfigError("callback scaling functions cannot be serialized");
            }
        },
        s.kind());
}

[[nodiscard]] inline ScalingFunction scaling_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("scaling: needs a 'kind' (constant, piecewise, sampled)");
    const auto kind = j.at("kind").get<std::string>();
    try {
        if (kind == "constant") {
            check_keys(j, {"kind", "value"}, "scaling");
            return ScalingFunction::constant(j.value("value", 0.0));
        }
        if (kind == "piecewise") {
            check_keys(j, {"kind", "partition", "values"}, "scaling");
            const Vector v = vector_from_json(j.at("values"), "scaling.values");
            return ScalingFunction::piecewise(partition_from_json(j.at("partition")),
                                              std::vector<double>(v.data(), v.data() + v.size()));
        }
        if (kind == "sampled") {
            check_keys(j, {"kind", "x0", "x1", "y0", "y1", "values"}, "scaling");
            const Json& rows = j.at("values");
            if (!rows.is_array() || rows.empty()) throw ConfigError("scaling.values: expected a 2-D array");
            Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const Vector r = vector_from_json(rows[i], "scaling.values");
                if (r.size() != m.cols()) throw ConfigError("scaling.values: ragged rows");
                m.row(static_cast<Eigen::Index>(i)) = r.transpose();
            }
            return ScalingFunction::sampled(j.at("x0").get<double>(), j.at("x1").get<double>(), j.at("y0").get<double>(),
                                            j.at("y1").get<double>(), std::move(m));
        }
    } catch (const Error& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw;
        throw ConfigError(std::string("scaling: ") + e.what());
    }
    throw ConfigError("scaling: unknown kind '" + kind + "' (valid: constant, piecewise, sampled)");
}

[[nodiscard]] inline Json map_to_json(const NodeMap& m) {
    return std::visit(
        [](const auto& k) -> Json {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IdentityMap>) {
                return Json{{"kind", "identity"}};
            } else if constexpr (std::is_same_v<T, SGibbsMap>) {
                return Json{{"kind", "sgibbs"}, {"partition", partition_to_json(k.partition)}, {"beta", k.beta}};
            } else if constexpr (std::is_same_v<T, ErfUniformizeMap>) {
                return Json{{"kind", "erf"}, {"mean", vector_to_json(k.mean)}, {"variance", vector_to_json(k.variance)}};
            } else if constexpr (std::is_same_v<T, LogPolarMap>) {
                return Json{{"kind", "log_polar"}, {"scale", k.scale}, {"reference_radius", k.reference_radius}};
            } else {
                throw ConfigError("callback maps cannot be serialized");
            }
        },
        m.kind());
}

[[nodiscard]] inline NodeMap map_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("map: needs a 'kind' (identity, sgibbs, erf, log_polar)");
    const auto kind = j.at("kind").get<std::string>();
    try {
        if (kind == "identity") {
            check_keys(j, {"kind"}, "map");
            return NodeMap::identity();
        }
        if (kind == "sgibbs") {
            check_keys(j, {"kind", "partition", "beta"}, "map");
            return NodeMap::sgibbs(partition_from_json(j.at("partition")), j.value("beta", 1.0));
        }
        if (kind == "erf") {
            check_keys(j, {"kind", "mean", "variance"}, "map");
            const Vector var = j.contains("variance") ? vector_from_json(j.at("variance"), "map.variance")
                                                      : Vector::Constant(2, kNodeVariance);
            const Vector mean = j.contains("mean") ? vector_from_json(j.at("mean"), "map.mean") : Vector::Zero(var.size());
            return NodeMap::erf_uniformize(mean, var);
        }
        if (kind == "log_polar") {
            check_keys(j, {"kind", "scale", "reference_radius"}, "map");
            return NodeMap::log_polar(j.value("scale", 1.0), j.value("reference_radius", 1.0));
        }
    } catch (const Error& e) {
        if (dynamic_cast<const ConfigError*>(&e)) throw;
        throw ConfigError(std::string("map: ") + e.what());
    }
    throw ConfigError("map: unknown kind '" + kind + "' (valid: identity, sgibbs, erf, log_polar)");
}

[[nodiscard]] inline Json interpolant_to_json(const Interpolant& it) {
    Json nodes = Json::array();
    for (Eigen::Index i = 0; i < it.nodes().size(); ++i) nodes.push_back(vector_to_json(it.nodes().point(i)));
    return Json{{"schema_version", kSchemaVersion},
                {"kernel", kernel_to_json(it.kernel())},
                {"map", map_to_json(it.map().node_map())},
                {"scaling", scaling_to_json(it.map().scaling())},
                {"nodes", nodes},
                {"coefficients", vector_to_json(it.coefficients())},
                {"coefficient_tail", vector_to_json(it.coefficient_tail())},
                {"diagnostics",
                 {{"condition_estimate", it.diagnostics().condition_estimate},
                  {"residual_at_nodes", it.diagnostics().residual_at_nodes},
                  {"solver", it.diagnostics().solver}}}};
}

[[nodiscard]] inline Interpolant interpolant_from_json(const Json& j) {
    check_keys(j, {"schema_version", "kernel", "map", "scaling", "nodes", "coefficients", "coefficient_tail", "diagnostics"},
               "interpolant");
    if (j.value("schema_version", 0) != kSchemaVersion) throw ConfigError("interpolant: unsupported schema_version");
    const Json& nj = j.at("nodes");
    if (!nj.is_array() || nj.empty()) throw ConfigError("interpolant.nodes: expected a non-empty array");
    PointSet pts(static_cast<Eigen::Index>(nj.size()), static_cast<Eigen::Index>(nj[0].size()));
    for (std::size_t i = 0; i < nj.size(); ++i) pts.row(static_cast<Eigen::Index>(i)) = vector_from_json(nj[i], "nodes").transpose();
    FitDiagnostics d;
    if (j.contains("diagnostics")) {
        const Json& dj = j.at("diagnostics");
        d.condition_estimate = dj.value("condition_estimate", std::numeric_limits<double>::quiet_NaN());
        d.residual_at_nodes = dj.value("residual_at_nodes", std::numeric_limits<double>::quiet_NaN());
        d.solver = dj.value("solver", std::string());
    }
    return {NodeSet(std::move(pts)), kernel_from_json(j.at("kernel")),
            AugmentedMap(map_from_json(j.at("map")), scaling_from_json(j.at("scaling"))),
            vector_from_json(j.at("coefficients"), "coefficients"), std::move(d),
            j.contains("coefficient_tail") ? vector_from_json(j.at("coefficient_tail"), "coefficient_tail") : Vector()};
}

[[nodiscard]] inline Json parse_json_text(const std::string& text, std::string_view origin) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string(origin) + ": " + e.what());
    }
}

[[nodiscard]] inline Json read_json(const std::filesystem::path& path) { return parse_json_text(read_text(path), path.string()); }

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class Subcommand { Interp, Metrics, BenchDiscontinuous, ImageReconstruct };

[[nodiscard]] inline std::string_view subcommand_name(Subcommand s) {
    switch (s) {
        case Subcommand::Interp: return "interp";
        case Subcommand::Metrics: return "metrics";
        case Subcommand::BenchDiscontinuous: return "bench-discontinuous";
        case Subcommand::ImageReconstruct: return "image-reconstruct";
    }
    return "unknown";
}

struct KernelSpec {
    Profile profile = Profile::MaternC6;
    std::optional<double> epsilon;
};

struct RunConfig {
    Subcommand subcommand = Subcommand::Interp;
    KernelSpec kernel;
    NodeMap map = NodeMap::identity();
    ScalingFunction scaling = ScalingFunction::constant(0.0);
    std::uint64_t seed = 1;
    std::map<std::string, std::string> paths;

    // interp
    bool loocv = false;
    LoocvConfig loocv_config;
    double ridge = 0.0;

    // metrics
    std::optional<Vector> domain_lower;
    std::optional<Vector> domain_upper;
    int fill_resolution = 200;
    std::optional<Partition> partition;

    // bench-discontinuous
    ExperimentConfig experiment;

    // image-reconstruct
    std::string variant = "mvsk";
    imaging::PipelineConfig pipeline;
    std::vector<imaging::GaussianSource> sources;
};

namespace detail {

inline LoocvConfig loocv_from_json(const Json& j) {
    check_keys(j, {"min", "max", "count", "values", "max_condition"}, "epsilon_grid");
    LoocvConfig c;
    if (j.contains("values")) {
        const Vector v = vector_from_json(j.at("values"), "epsilon_grid.values");
        c.epsilon_grid.assign(v.data(), v.data() + v.size());
    } else {
        const double lo = j.contains("min") ? positive_number(j.at("min"), "epsilon_grid.min") : 0.01;
        const double hi = j.contains("max") ? positive_number(j.at("max"), "epsilon_grid.max") : 50.0;
        const int count = j.value("count", 200);
        if (count < 1) throw ConfigError("epsilon_grid.count: must be >= 1");
        c.epsilon_grid = linspace(lo, hi, count);
    }
    if (j.contains("max_condition")) c.max_condition = positive_number(j.at("max_condition"), "epsilon_grid.max_condition");
    try {
        c.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("epsilon_grid: ") + e.what());
    }
    return c;
}

inline std::vector<std::string> string_list(const Json& j, std::string_view field) {
    if (!j.is_array()) throw ConfigError(std::string(field) + ": expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : j) {
        if (!e.is_string()) throw ConfigError(std::string(field) + ": expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

inline void parse_kernel_fields(const Json& j, RunConfig& rc) {
    if (j.contains("kernel")) rc.kernel.profile = profile_from_json(j.at("kernel"), "kernel");
    if (j.contains("epsilon")) rc.kernel.epsilon = positive_number(j.at("epsilon"), "epsilon");
}

inline std::uint64_t parse_seed(const Json& j) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < 0) throw ConfigError("seed: expected a nonnegative integer");
    return j.get<std::uint64_t>();
}

inline void parse_paths(const Json& j, RunConfig& rc, const std::vector<std::string>& keys) {
    for (const auto& k : keys) {
        if (!j.contains(k)) continue;
        if (!j.at(k).is_string()) throw ConfigError(k + ": expected a path string");
        rc.paths[k] = j.at(k).get<std::string>();
    }
}

}  // namespace detail

/// Validated configuration for one subcommand. Unknown keys are rejected with the nearest
/// valid key; range errors name the offending field.
[[nodiscard]] inline RunConfig parse_config(Subcommand sub, const Json& j) {
    RunConfig rc;
    rc.subcommand = sub;
    const std::string ctx(subcommand_name(sub));
    switch (sub) {
        case Subcommand::Interp: {
            check_keys(j, {"nodes", "queries", "out", "kernel", "epsilon", "map", "scaling", "loocv", "epsilon_grid",
                           "ridge", "seed"},
                       ctx);
            detail::parse_kernel_fields(j, rc);
            if (j.contains("map")) rc.map = map_from_json(j.at("map"));
            if (j.contains("scaling")) rc.scaling = scaling_from_json(j.at("scaling"));
            rc.loocv = j.value("loocv", false);
            if (j.contains("epsilon_grid")) rc.loocv_config = detail::loocv_from_json(j.at("epsilon_grid"));
            if (j.contains("ridge")) {
                if (!j.at("ridge").is_number() || j.at("ridge").get<double>() < 0.0) throw ConfigError("ridge: must be >= 0");
                rc.ridge = j.at("ridge").get<double>();
            }
            if (j.contains("seed")) rc.seed = detail::parse_seed(j.at("seed"));
            detail::parse_paths(j, rc, {"nodes", "queries", "out"});
            if (!rc.paths.count("nodes")) throw ConfigError("nodes: a node CSV path is required");
            if (!rc.loocv && !rc.kernel.epsilon) throw ConfigError("epsilon: required unless loocv is enabled");
            break;
        }
        case Subcommand::Metrics: {
            check_keys(j, {"nodes", "domain_lower", "domain_upper", "grid", "partition"}, ctx);
            detail::parse_paths(j, rc, {"nodes"});
            if (!rc.paths.count("nodes")) throw ConfigError("nodes: a node CSV path is required");
            if (j.contains("domain_lower")) rc.domain_lower = vector_from_json(j.at("domain_lower"), "domain_lower");
            if (j.contains("domain_upper")) rc.domain_upper = vector_from_json(j.at("domain_upper"), "domain_upper");
            rc.fill_resolution = j.value("grid", 200);
            if (rc.fill_resolution < 2) throw ConfigError("grid: must be >= 2");
            if (j.contains("partition")) rc.partition = partition_from_json(j.at("partition"));
            break;
        }
        case Subcommand::BenchDiscontinuous: {
            check_keys(j, {"n_values", "eval_grid", "seed", "kernels", "variants", "epsilon_grid", "band_half_width",
                           "fill_resolution", "node_variance", "output_dir"},
                       ctx);
            ExperimentConfig& e = rc.experiment;
            if (j.contains("n_values")) {
                e.n_values.clear();
                for (const auto& v : j.at("n_values")) {
                    if (!v.is_number_integer() || v.get<int>() < 1) throw ConfigError("n_values: entries must be integers >= 1");
                    e.n_values.push_back(v.get<int>());
                }
            }
            if (j.contains("eval_grid")) {
                if (!j.at("eval_grid").is_number_integer() || j.at("eval_grid").get<int>() < 2) {
                    throw ConfigError("eval_grid: must be an integer >= 2");
                }
                e.eval_grid = j.at("eval_grid").get<int>();
            }
            if (j.contains("seed")) e.seed = detail::parse_seed(j.at("seed"));
            rc.seed = e.seed;
            if (j.contains("kernels")) {
                e.profiles.clear();
                for (const auto& s : detail::string_list(j.at("kernels"), "kernels")) e.profiles.push_back(profile_from_json(Json(s), "kernels"));
            }
            if (j.contains("variants")) {
                e.variants.clear();
                for (const auto& s : detail::string_list(j.at("variants"), "variants")) {
                    const auto v = parse_variant(s);
                    if (!v) throw ConfigError("variants: unknown variant '" + s + "' (valid: classical, vsdk, mvsdk)");
                    e.variants.push_back(*v);
                }
            }
            if (j.contains("epsilon_grid")) e.loocv = detail::loocv_from_json(j.at("epsilon_grid"));
            if (j.contains("band_half_width")) e.band_half_width = positive_number(j.at("band_half_width"), "band_half_width");
            if (j.contains("fill_resolution")) e.fill_resolution = j.at("fill_resolution").get<int>();
            if (j.contains("node_variance")) e.node_variance = positive_number(j.at("node_variance"), "node_variance");
            if (j.contains("output_dir")) e.output_dir = j.at("output_dir").get<std::string>();
            rc.paths["out"] = e.output_dir;
            e.validate();
            break;
        }
        case Subcommand::ImageReconstruct: {
            check_keys(j, {"geometry", "source", "variant", "out", "kernel", "epsilon", "epsilon_grid", "image_size",
                           "pixel_size", "uv_grid_size", "psi_mode", "log_polar", "max_iters", "tol", "relaxation",
                           "sources", "seed"},
                       ctx);
            detail::parse_kernel_fields(j, rc);
            rc.pipeline.profile = rc.kernel.profile;
            rc.pipeline.epsilon = rc.kernel.epsilon;
            if (j.contains("epsilon_grid")) rc.pipeline.loocv = detail::loocv_from_json(j.at("epsilon_grid"));
            detail::parse_paths(j, rc, {"geometry", "source", "out"});
            rc.variant = j.value("variant", std::string("mvsk"));
            if (!imaging::parse_imaging_variant(rc.variant)) {
                throw ConfigError("variant: unknown variant '" + rc.variant + "' (valid: classical, vsk, mvsk)");
            }
            if (j.contains("image_size")) {
                if (!j.at("image_size").is_number_integer() || j.at("image_size").get<int>() < 2) {
                    throw ConfigError("image_size: must be an integer >= 2");
                }
                rc.pipeline.image.size = j.at("image_size").get<int>();
            }
            if (j.contains("pixel_size")) rc.pipeline.image.pixel_size = positive_number(j.at("pixel_size"), "pixel_size");
            if (j.contains("uv_grid_size")) {
                if (!j.at("uv_grid_size").is_number_integer() || j.at("uv_grid_size").get<int>() < 2) {
                    throw ConfigError("uv_grid_size: must be an integer >= 2");
                }
                rc.pipeline.uv_grid_size = j.at("uv_grid_size").get<int>();
            }
            if (j.contains("psi_mode")) {
                const auto m = j.at("psi_mode").get<std::string>();
                if (m == "magnitude") rc.pipeline.psi.mode = imaging::PsiMode::Magnitude;
                else if (m == "real") rc.pipeline.psi.mode = imaging::PsiMode::Real;
                else throw ConfigError("psi_mode: expected magnitude or real");
            }
            if (j.contains("log_polar")) {
                const auto m = j.at("log_polar").get<std::string>();
                if (m == "shifted") rc.pipeline.log_polar = imaging::LogPolarMode::Shifted;
                else if (m == "signed") rc.pipeline.log_polar = imaging::LogPolarMode::Signed;
                else throw ConfigError("log_polar: expected shifted or signed");
            }
            if (j.contains("max_iters")) {
                if (!j.at("max_iters").is_number_integer() || j.at("max_iters").get<int>() < 1) {
                    throw ConfigError("max_iters: must be an integer >= 1");
                }
                rc.pipeline.landweber.max_iters = j.at("max_iters").get<int>();
            }
            if (j.contains("tol")) rc.pipeline.landweber.tol = positive_number(j.at("tol"), "tol");
            if (j.contains("relaxation")) {
                const double r = positive_number(j.at("relaxation"), "relaxation");
                if (r >= 2.0) throw ConfigError("relaxation: must be < 2");
                rc.pipeline.landweber.relaxation = r;
            }
            if (j.contains("seed")) rc.seed = detail::parse_seed(j.at("seed"));
            if (j.contains("sources")) {
                for (const auto& s : j.at("sources")) {
                    check_keys(s, {"x", "y", "sigma", "peak"}, "sources[]");
                    imaging::GaussianSource g;
                    g.x = s.value("x", 0.0);
                    g.y = s.value("y", 0.0);
                    g.sigma = positive_number(s.value("sigma", Json(4.0)), "sources[].sigma");
                    g.peak = positive_number(s.value("peak", Json(1.0)), "sources[].peak");
                    rc.sources.push_back(g);
                }
            }
            break;
        }
    }
    return rc;
}

// ---------------------------------------------------------------------------
// Experiment output
// ---------------------------------------------------------------------------

[[nodiscard]] inline Table rmse_table(const std::vector<ExperimentRow>& rows) {
    Table t{{"kernel", "n_requested", "n_nodes", "variant", "epsilon", "rmse", "near_jump_max_error", "condition",
             "failed", "message"},
            {}};
    for (const auto& r : rows) {
        std::string msg = r.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        t.rows.push_back({std::string(profile_name(r.profile)), std::to_string(r.n_requested), std::to_string(r.n_nodes),
                          std::string(variant_name(r.variant)), format_double(r.epsilon), format_double(r.rmse),
                          format_double(r.near_jump_error), format_double(r.condition), r.failed ? "1" : "0", msg});
    }
    return t;
}

/// Distances depend only on (N, variant); the first kernel's rows are used.
[[nodiscard]] inline Table distances_table(const std::vector<ExperimentRow>& rows) {
    Table t{{"n_requested", "n_nodes", "variant", "fill", "separation", "regional_fill", "regional_separation"}, {}};
    std::set<std::pair<int, int>> seen;
    for (const auto& r : rows) {
        if (!seen.insert({r.n_requested, static_cast<int>(r.variant)}).second) continue;
        t.rows.push_back({std::to_string(r.n_requested), std::to_string(r.n_nodes), std::string(variant_name(r.variant)),
                          format_double(r.fill), format_double(r.separation), format_double(r.regional_fill),
                          format_double(r.regional_separation)});
    }
    std::stable_sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) {
        const int na = std::stoi(a[0]), nb = std::stoi(b[0]);
        if (na != nb) return na < nb;
        return a[2] < b[2];
    });
    return t;
}

[[nodiscard]] inline Table loocv_table(const std::vector<LoocvPoint>& curve) {
    Table t{{"epsilon", "loo_rmse", "condition", "failure"}, {}};
    for (const auto& p : curve) {
        std::string f = p.failure;
        std::replace(f.begin(), f.end(), ',', ';');
        t.rows.push_back({format_double(p.epsilon), format_double(p.score), format_double(p.condition), f});
    }
    return t;
}

inline void write_experiment(const std::vector<ExperimentRow>& rows, const std::filesystem::path& dir) {
    write_results(rmse_table(rows), dir / "rmse.csv");
    write_results(distances_table(rows), dir / "distances.csv");
    for (const auto& r : rows) {
        if (r.loocv_curve.empty()) continue;
        const std::string name = std::string(profile_name(r.profile)) + "_" + std::string(variant_name(r.variant)) + "_N" +
                                 std::to_string(r.n_requested) + ".csv";
        write_results(loocv_table(r.loocv_curve), dir / "loocv_curves" / name);
    }
}

// ---------------------------------------------------------------------------
// Imaging output
// ---------------------------------------------------------------------------

[[nodiscard]] inline Table residual_table(const std::vector<double>& residuals) {
    Table t{{"iteration", "residual"}, {}};
    for (std::size_t k = 0; k < residuals.size(); ++k) t.rows.push_back({std::to_string(k), format_double(residuals[k])});
    return t;
}

[[nodiscard]] inline Table visibility_fit_table(const imaging::VisibilitySet& observed,
                                                const imaging::VisibilitySet& predicted) {
    if (observed.values.size() != predicted.values.size()) throw ShapeError("observed and predicted sizes differ");
    Table t{{"u", "v", "obs_re", "obs_im", "pred_re", "pred_im", "obs_amp", "pred_amp"}, {}};
    for (std::size_t i = 0; i < observed.values.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const auto o = observed.values[i], p = predicted.values[i];
        t.rows.push_back({format_double(observed.geometry.points(ii, 0)), format_double(observed.geometry.points(ii, 1)),
                          format_double(o.real()), format_double(o.imag()), format_double(p.real()),
                          format_double(p.imag()), format_double(std::abs(o)), format_double(std::abs(p))});
    }
    return t;
}

[[nodiscard]] inline Json imaging_summary(const imaging::PipelineResult& r) {
    Json j{{"schema_version", kSchemaVersion},
           {"variant", std::string(imaging::imaging_variant_name(r.variant))},
           {"epsilon", r.epsilon},
           {"frequency_scale", r.frequency_scale},
           {"chi2", r.chi2},
           {"iterations", r.landweber.iterations},
           {"converged", r.landweber.converged},
           {"tau", r.landweber.tau},
           {"sigma_max", r.landweber.sigma_max},
           {"uv_grid", {{"size", r.uv_grid.size}, {"spacing", r.uv_grid.spacing}}},
           {"image", {{"size", r.landweber.image.spec.size}, {"pixel_size", r.landweber.image.spec.pixel_size}}}};
    if (r.psi_warning) j["warning"] = *r.psi_warning;
    return j;
}

inline void write_imaging(const imaging::PipelineResult& r, const imaging::VisibilitySet& observed,
                          const std::filesystem::path& dir) {
    write_matrix_csv(dir / "image.csv", r.landweber.image.flux);
    write_results(residual_table(r.landweber.residuals), dir / "residuals.csv");
    write_results(visibility_fit_table(observed, r.predicted), dir / "visibility_fit.csv");
    if (!r.loocv_curve.empty()) write_results(loocv_table(r.loocv_curve), dir / "loocv_curve.csv");
    write_json(dir / "summary.json", imaging_summary(r));
}

}  // namespace mvsk::io
