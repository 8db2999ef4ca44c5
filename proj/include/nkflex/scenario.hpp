/// @file scenario.hpp
/// @brief Scenario files: chart, metric, initial map, exponents, schedule
/// overrides and skeleton, parsed from YAML with every problem reported at once.
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "nkflex/field_io.hpp"
#include "nkflex/induction.hpp"

namespace nkflex {

/// c + sum_k a_k cos(kx x + ky y + phase_k)
struct FourierSeries {
    struct Mode {
        double amplitude = 0.0, kx = 0.0, ky = 0.0, phase = 0.0;
    };
    double constant = 0.0;
    std::vector<Mode> modes;

    double operator()(double x, double y) const {
        double s = constant;
        for (const auto& m : modes) s += m.amplitude * std::cos(m.kx * x + m.ky * y + m.phase);
        return s;
    }
    bool is_constant() const { return modes.empty(); }
};

struct ChartSpec {
    Boundary mode = Boundary::periodic;
    double origin = 0.0;
    double length = 2.0 * std::numbers::pi;
    int resolution = 128;

    GridChart chart() const {
        return mode == Boundary::periodic ? GridChart::torus(length, resolution, origin)
                                          : GridChart::square(origin, length, resolution);
    }
};

struct MetricSpec {
    enum class Kind { constant, conformal, table };
    Kind kind = Kind::constant;
    Sym2 value = Sym2::identity();  ///< constant metric, or the base of a conformal one
    FourierSeries factor;           ///< conformal: g = factor * value
    std::string factor_file;        ///< conformal factor from a scalar field container
    FourierSeries xx, xy, yy;       ///< table

    MetricField build(const GridChart& c) const {
        switch (kind) {
            case Kind::constant: return constant_metric(c, value);
            case Kind::conformal: {
                ScalarField f = factor_file.empty() ? ScalarField::generate(c, factor) : read_field<double>(factor_file);
                require_same_chart(c, f.chart, "conformal factor file");
                MetricField g(c);
                for (std::size_t k = 0; k < g.size(); ++k) g[k] = value * f[k];
                return g;
            }
            case Kind::table:
                return MetricField::generate(c, [&](double x, double y) { return Sym2{xx(x, y), xy(x, y), yy(x, y)}; });
        }
        return {};
    }
};

inline const char* to_string(MetricSpec::Kind k) {
    switch (k) {
        case MetricSpec::Kind::constant: return "constant";
        case MetricSpec::Kind::conformal: return "conformal";
        default: return "table";
    }
}

struct MapSpec {
    enum class Kind { flat, scaled, explicit_samples };
    Kind kind = Kind::flat;
    double scale = 1.0;
    std::string file;
    /// seeded smooth perturbation of the normal component (0 = none)
    double jitter = 0.0;
    int jitter_modes = 4;

    ImmersionField build(const GridChart& c, std::uint64_t seed) const {
        ImmersionField u = kind == Kind::explicit_samples ? read_field<Vec3>(file)
                                                          : flat_map(c, kind == Kind::scaled ? scale : 1.0);
        require_same_chart(c, u.chart, "initial map file");
        if (jitter > 0.0) {
            std::mt19937_64 rng(seed);
            std::uniform_real_distribution<double> U(-1.0, 1.0);
            FourierSeries z;
            for (int k = 0; k < jitter_modes; ++k) {
                // integer wave numbers keep the perturbation periodic on the chart
                const double kx = std::round(2.0 * U(rng)) * 2.0 * std::numbers::pi / c.lx;
                const double ky = std::round(2.0 * U(rng)) * 2.0 * std::numbers::pi / c.ly;
                z.modes.push_back({U(rng) * jitter / jitter_modes, kx, ky, std::numbers::pi * U(rng)});
            }
            for (int j = 0; j < c.ny; ++j)
                for (int i = 0; i < c.nx; ++i) u(i, j).z += z(c.x(i), c.y(j));
        }
        return u;
    }
};

inline const char* to_string(MapSpec::Kind k) {
    switch (k) {
        case MapSpec::Kind::flat: return "flat";
        case MapSpec::Kind::scaled: return "scaled";
        default: return "explicit";
    }
}

struct SkeletonSpec {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 2>> edges;
    std::vector<std::array<int, 3>> triangles;

    bool empty() const { return vertices.empty(); }

    /// Edges listed explicitly plus those of the triangles, without repeats.
    std::vector<std::array<int, 2>> all_edges() const {
        std::set<std::array<int, 2>> seen;
        std::vector<std::array<int, 2>> out;
        auto add = [&](int a, int b) {
            const std::array<int, 2> e{std::min(a, b), std::max(a, b)};
            if (seen.insert(e).second) out.push_back(e);
        };
        for (const auto& e : edges) add(e[0], e[1]);
        for (const auto& t : triangles) {
            add(t[0], t[1]);
            add(t[1], t[2]);
            add(t[2], t[0]);
        }
        return out;
    }

    /// Sigma_1 (vertices), Sigma_2 (edges), Sigma_3 (whole chart); just the
    /// whole chart when no triangulation is given.
    std::vector<SkeletonSet> skeleta() const {
        if (empty()) return {SkeletonSet::whole()};
        std::vector<SkeletonSet> out{SkeletonSet::points(vertices)};
        std::vector<Segment> segs;
        for (const auto& e : all_edges()) segs.push_back({vertices[e[0]], vertices[e[1]]});
        if (!segs.empty()) out.push_back(SkeletonSet::edges(segs));
        out.push_back(SkeletonSet::whole());
        return out;
    }
};

struct Scenario {
    std::string name = "scenario";
    std::string source;
    ChartSpec chart;
    MetricSpec metric;
    MapSpec map;
    Rational theta{3, 20};
    Rational alpha{1, 10};
    std::optional<Rational> target_theta;
    SymbolicPower A{45000, 1};
    int depth = 4;
    double lambda_budget = 0.0;  ///< largest frequency the run may use; 0 = grid ceiling
    std::uint64_t seed = 0;
    InductionOptions pass;       ///< c0, c1, avoid, cbar, lambda_scale, amplitude_floor
    BootstrapParams bootstrap;
    double delta_cap = 1.0 / 16.0;
    SkeletonSpec skeleton;
    bool export_intermediate = true;

    double grid_ceiling() const {
        return 2.0 * std::numbers::pi / (pass.nodes_per_wavelength * chart.chart().h());
    }
    double effective_budget() const { return lambda_budget > 0.0 ? lambda_budget : grid_ceiling(); }

    GlobalConfig global_config() const {
        GlobalConfig cfg;
        cfg.A = A;
        cfg.theta = theta;
        cfg.alpha = alpha;
        cfg.target_theta = target_theta;
        cfg.skeleta = skeleton.skeleta();
        cfg.pass = pass;
        cfg.pass.depth = depth;
        cfg.pass.strict = false;
        cfg.bootstrap = bootstrap;
        cfg.delta_cap = delta_cap;
        return cfg;
    }
};

namespace detail {

class ProblemList {
public:
    void add(const std::string& where, const std::string& what) { items_.push_back(where + ": " + what); }
    bool empty() const { return items_.empty(); }
    std::string joined(const std::string& source) const {
        std::ostringstream s;
        s << "scenario " << source << " has " << items_.size() << " problem" << (items_.size() == 1 ? "" : "s") << ":";
        for (const auto& p : items_) s << "\n  - " << p;
        return s.str();
    }

private:
    std::vector<std::string> items_;
};

inline void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed,
                       ProblemList& problems) {
    if (!node.IsMap()) {
        problems.add(where, "expected a mapping");
        return;
    }
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            std::string list;
            for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
            problems.add(where, "unknown key '" + key + "' (expected one of: " + list + ")");
        }
    }
}

template <class T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where, ProblemList& problems) {
    if (!node[key]) return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception&) {
        problems.add(where + "." + key, "cannot read value '" + YAML::Dump(node[key]) + "'");
    }
}

inline std::optional<Rational> read_rational(const YAML::Node& node, const char* key, const std::string& where,
                                             ProblemList& problems) {
    if (!node[key]) return std::nullopt;
    try {
        return parse_rational(node[key].as<std::string>());
    } catch (const std::exception&) {
        problems.add(where + "." + key, "not a rational number: '" + YAML::Dump(node[key]) + "'");
        return std::nullopt;
    }
}

inline std::optional<Sym2> read_sym2(const YAML::Node& node, const std::string& where, ProblemList& problems) {
    try {
        if (node.IsSequence() && node.size() == 3) return Sym2{node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
        if (node.IsScalar()) return Sym2::identity(node.as<double>());
    } catch (const YAML::Exception&) {
    }
    problems.add(where, "expected [g11, g12, g22] or a multiple of the identity");
    return std::nullopt;
}

inline FourierSeries read_series(const YAML::Node& node, const std::string& where, ProblemList& problems) {
    FourierSeries s;
    if (node.IsScalar()) {
        try {
            s.constant = node.as<double>();
        } catch (const YAML::Exception&) {
            problems.add(where, "expected a number or {constant, modes}");
        }
        return s;
    }
    check_keys(node, where, {"constant", "modes"}, problems);
    if (!node.IsMap()) return s;
    read(node, "constant", s.constant, where, problems);
    if (node["modes"]) {
        if (!node["modes"].IsSequence()) {
            problems.add(where + ".modes", "expected a list");
            return s;
        }
        int idx = 0;
        for (const auto& m : node["modes"]) {
            const std::string w = where + ".modes[" + std::to_string(idx++) + "]";
            check_keys(m, w, {"amplitude", "k", "phase"}, problems);
            FourierSeries::Mode mode;
            read(m, "amplitude", mode.amplitude, w, problems);
            read(m, "phase", mode.phase, w, problems);
            if (m["k"]) {
                try {
                    mode.kx = m["k"][0].as<double>();
                    mode.ky = m["k"][1].as<double>();
                } catch (const YAML::Exception&) {
                    problems.add(w + ".k", "expected [kx, ky]");
                }
            }
            s.modes.push_back(mode);
        }
    }
    return s;
}

inline YAML::Node dump_series(const FourierSeries& s) {
    YAML::Node n;
    n["constant"] = s.constant;
    for (const auto& m : s.modes) {
        YAML::Node e;
        e["amplitude"] = m.amplitude;
        e["k"].push_back(m.kx);
        e["k"].push_back(m.ky);
        e["phase"] = m.phase;
        n["modes"].push_back(e);
    }
    return n;
}

inline YAML::Node dump_sym2(const Sym2& s) {
    YAML::Node n;
    n.push_back(s.xx);
    n.push_back(s.xy);
    n.push_back(s.yy);
    return n;
}

}  // namespace detail

/// Parse and validate a scenario from YAML text.  `source` names it in messages.
inline Scenario parse_scenario_text(const std::string& text, const std::string& source = "<text>") {
    using detail::check_keys;
    using detail::read;
    detail::ProblemList problems;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError("scenario " + source + " is not well-formed: " + e.what());
    }
    if (!root.IsMap()) throw ConfigError("scenario " + source + " must be a mapping at the top level");

    Scenario sc;
    sc.source = source;
    check_keys(root, "scenario", {"name", "chart", "metric", "map", "theta", "target_theta", "schedule", "skeleton", "run"},
               problems);
    read(root, "name", sc.name, "scenario", problems);

    if (const auto n = root["chart"]) {
        check_keys(n, "chart", {"boundary", "origin", "length", "resolution"}, problems);
        std::string mode = "periodic";
        read(n, "boundary", mode, "chart", problems);
        if (mode == "periodic" || mode == "torus") sc.chart.mode = Boundary::periodic;
        else if (mode == "clamped") sc.chart.mode = Boundary::clamped;
        else problems.add("chart.boundary", "expected periodic or clamped, got '" + mode + "'");
        if (sc.chart.mode == Boundary::clamped) sc.chart.length = 1.0;
        read(n, "origin", sc.chart.origin, "chart", problems);
        read(n, "length", sc.chart.length, "chart", problems);
        read(n, "resolution", sc.chart.resolution, "chart", problems);
    }
    if (!(sc.chart.length > 0.0)) problems.add("chart.length", "must be positive");
    if (sc.chart.resolution < 8) problems.add("chart.resolution", "must be at least 8");

    if (const auto n = root["metric"]) {
        check_keys(n, "metric", {"kind", "value", "factor", "factor_file", "xx", "xy", "yy"}, problems);
        std::string kind = "constant";
        read(n, "kind", kind, "metric", problems);
        if (kind == "constant") sc.metric.kind = MetricSpec::Kind::constant;
        else if (kind == "conformal") sc.metric.kind = MetricSpec::Kind::conformal;
        else if (kind == "table") sc.metric.kind = MetricSpec::Kind::table;
        else problems.add("metric.kind", "expected constant, conformal or table, got '" + kind + "'");
        if (n["value"])
            if (auto v = detail::read_sym2(n["value"], "metric.value", problems)) sc.metric.value = *v;
        if (n["factor"]) sc.metric.factor = detail::read_series(n["factor"], "metric.factor", problems);
        read(n, "factor_file", sc.metric.factor_file, "metric", problems);
        if (sc.metric.kind == MetricSpec::Kind::conformal && !n["factor"] && !n["factor_file"])
            problems.add("metric", "a conformal metric needs factor or factor_file");
        if (sc.metric.kind == MetricSpec::Kind::table) {
            for (const char* comp : {"xx", "xy", "yy"})
                if (!n[comp]) problems.add("metric", std::string("a table metric needs component ") + comp);
            if (n["xx"]) sc.metric.xx = detail::read_series(n["xx"], "metric.xx", problems);
            if (n["xy"]) sc.metric.xy = detail::read_series(n["xy"], "metric.xy", problems);
            if (n["yy"]) sc.metric.yy = detail::read_series(n["yy"], "metric.yy", problems);
        }
    } else {
        problems.add("scenario", "missing metric section");
    }

    if (const auto n = root["map"]) {
        check_keys(n, "map", {"kind", "scale", "file", "jitter", "jitter_modes"}, problems);
        std::string kind = "flat";
        read(n, "kind", kind, "map", problems);
        if (kind == "flat") sc.map.kind = MapSpec::Kind::flat;
        else if (kind == "scaled") sc.map.kind = MapSpec::Kind::scaled;
        else if (kind == "explicit") sc.map.kind = MapSpec::Kind::explicit_samples;
        else problems.add("map.kind", "expected flat, scaled or explicit, got '" + kind + "'");
        read(n, "scale", sc.map.scale, "map", problems);
        read(n, "file", sc.map.file, "map", problems);
        read(n, "jitter", sc.map.jitter, "map", problems);
        read(n, "jitter_modes", sc.map.jitter_modes, "map", problems);
        if (sc.map.kind == MapSpec::Kind::explicit_samples && sc.map.file.empty())
            problems.add("map", "an explicit map needs a file");
        if (sc.map.jitter < 0.0) problems.add("map.jitter", "must be non-negative");
    }

    if (auto t = detail::read_rational(root, "theta", "scenario", problems)) sc.theta = *t;
    sc.target_theta = detail::read_rational(root, "target_theta", "scenario", problems);
    const Rational top = theta_upper_bound(2);
    if (!(sc.theta > 0 && sc.theta < top))
        problems.add("theta", "theta = " + to_string(sc.theta) + " outside the admissible band 0 < theta < " + to_string(top) +
                                  " for surfaces (theta >= 1/5 is not reachable)");

    if (const auto n = root["schedule"]) {
        check_keys(n, "schedule", {"A", "A_exponent", "alpha", "depth", "delta_cap", "c0", "c1", "avoid", "cbar",
                                   "lambda_scale", "amplitude_floor", "radius_floor_cells"},
                   problems);
        if (auto a = detail::read_rational(n, "A", "schedule", problems)) sc.A.base = *a;
        if (auto e = detail::read_rational(n, "A_exponent", "schedule", problems)) sc.A.exponent = *e;
        if (auto a = detail::read_rational(n, "alpha", "schedule", problems)) sc.alpha = *a;
        read(n, "depth", sc.depth, "schedule", problems);
        read(n, "delta_cap", sc.delta_cap, "schedule", problems);
        read(n, "c0", sc.pass.c0, "schedule", problems);
        read(n, "c1", sc.pass.c1, "schedule", problems);
        read(n, "avoid", sc.pass.avoid, "schedule", problems);
        read(n, "cbar", sc.pass.cbar, "schedule", problems);
        read(n, "lambda_scale", sc.pass.lambda_scale, "schedule", problems);
        read(n, "amplitude_floor", sc.pass.amplitude_floor, "schedule", problems);
        read(n, "radius_floor_cells", sc.pass.radius_floor_cells, "schedule", problems);
    }
    if (!(sc.alpha > 0 && sc.alpha < 1)) problems.add("schedule.alpha", "alpha = " + to_string(sc.alpha) + " outside (0, 1)");
    if (sc.A.base < 1) problems.add("schedule.A", "A must be at least 1");
    if (sc.depth < 1) problems.add("schedule.depth", "depth must be at least 1");
    if (!(sc.delta_cap > 0.0 && sc.delta_cap <= 1.0 / 16.0)) problems.add("schedule.delta_cap", "must lie in (0, 1/16]");

    if (const auto n = root["skeleton"]) {
        check_keys(n, "skeleton", {"vertices", "edges", "triangles"}, problems);
        try {
            if (n["vertices"])
                for (const auto& v : n["vertices"]) sc.skeleton.vertices.push_back({v[0].as<double>(), v[1].as<double>()});
            if (n["edges"])
                for (const auto& e : n["edges"]) sc.skeleton.edges.push_back({e[0].as<int>(), e[1].as<int>()});
            if (n["triangles"])
                for (const auto& t : n["triangles"])
                    sc.skeleton.triangles.push_back({t[0].as<int>(), t[1].as<int>(), t[2].as<int>()});
        } catch (const YAML::Exception&) {
            problems.add("skeleton", "vertices must be [x, y] pairs, edges index pairs, triangles index triples");
        }
        const int nv = static_cast<int>(sc.skeleton.vertices.size());
        auto bad = [&](int i) { return i < 0 || i >= nv; };
        for (const auto& e : sc.skeleton.edges)
            if (bad(e[0]) || bad(e[1])) problems.add("skeleton.edges", "vertex index out of range");
        for (const auto& t : sc.skeleton.triangles)
            if (bad(t[0]) || bad(t[1]) || bad(t[2])) problems.add("skeleton.triangles", "vertex index out of range");
        if (nv > 0 && sc.chart.mode == Boundary::periodic)
            problems.add("skeleton", "triangulated skeleta need a clamped chart");
        const double lo = sc.chart.origin, hi = sc.chart.origin + sc.chart.length;
        for (const auto& v : sc.skeleton.vertices)
            if (v.x < lo || v.x > hi || v.y < lo || v.y > hi) problems.add("skeleton.vertices", "vertex outside the chart");
    }

    if (const auto n = root["run"]) {
        check_keys(n, "run", {"seed", "lambda_budget", "bootstrap_lambda", "bootstrap_K", "export_intermediate"}, problems);
        read(n, "seed", sc.seed, "run", problems);
        read(n, "lambda_budget", sc.lambda_budget, "run", problems);
        read(n, "bootstrap_lambda", sc.bootstrap.lambda, "run", problems);
        read(n, "bootstrap_K", sc.bootstrap.K, "run", problems);
        read(n, "export_intermediate", sc.export_intermediate, "run", problems);
    }
    if (sc.chart.resolution >= 8 && sc.chart.length > 0.0) {
        const double ceiling = sc.grid_ceiling();
        if (sc.lambda_budget < 0.0) problems.add("run.lambda_budget", "must be non-negative");
        if (sc.lambda_budget > ceiling * (1 + 1e-12)) {
            std::ostringstream s;
            s << "lambda budget " << sc.lambda_budget << " needs " << sc.pass.nodes_per_wavelength
              << " nodes per wavelength, i.e. a spacing of at most " << 2.0 * std::numbers::pi / (sc.pass.nodes_per_wavelength * sc.lambda_budget)
              << "; resolution " << sc.chart.resolution << " gives " << sc.chart.chart().h() << " (largest admissible budget "
              << ceiling << ")";
            problems.add("run.lambda_budget", s.str());
        }
    }
    if (!problems.empty()) throw ConfigError(problems.joined(source));
    return sc;
}

inline Scenario parse_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open scenario " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_scenario_text(buf.str(), path);
}

/// Fully resolved scenario, defaults included, as YAML.
inline std::string echo_scenario(const Scenario& sc) {
    YAML::Node n;
    n["name"] = sc.name;
    n["chart"]["boundary"] = to_string(sc.chart.mode);
    n["chart"]["origin"] = sc.chart.origin;
    n["chart"]["length"] = sc.chart.length;
    n["chart"]["resolution"] = sc.chart.resolution;
    n["metric"]["kind"] = to_string(sc.metric.kind);
    switch (sc.metric.kind) {
        case MetricSpec::Kind::constant: n["metric"]["value"] = detail::dump_sym2(sc.metric.value); break;
        case MetricSpec::Kind::conformal:
            n["metric"]["value"] = detail::dump_sym2(sc.metric.value);
            if (sc.metric.factor_file.empty()) n["metric"]["factor"] = detail::dump_series(sc.metric.factor);
            else n["metric"]["factor_file"] = sc.metric.factor_file;
            break;
        case MetricSpec::Kind::table:
            n["metric"]["xx"] = detail::dump_series(sc.metric.xx);
            n["metric"]["xy"] = detail::dump_series(sc.metric.xy);
            n["metric"]["yy"] = detail::dump_series(sc.metric.yy);
            break;
    }
    n["map"]["kind"] = to_string(sc.map.kind);
    if (sc.map.kind == MapSpec::Kind::scaled) n["map"]["scale"] = sc.map.scale;
    if (sc.map.kind == MapSpec::Kind::explicit_samples) n["map"]["file"] = sc.map.file;
    n["map"]["jitter"] = sc.map.jitter;
    n["map"]["jitter_modes"] = sc.map.jitter_modes;
    n["theta"] = to_string(sc.theta);
    if (sc.target_theta) n["target_theta"] = to_string(*sc.target_theta);
    n["schedule"]["A"] = to_string(sc.A.base);
    n["schedule"]["A_exponent"] = to_string(sc.A.exponent);
    n["schedule"]["alpha"] = to_string(sc.alpha);
    n["schedule"]["depth"] = sc.depth;
    n["schedule"]["delta_cap"] = sc.delta_cap;
    n["schedule"]["c0"] = sc.pass.c0;
    n["schedule"]["c1"] = sc.pass.c1;
    n["schedule"]["avoid"] = sc.pass.avoid;
    n["schedule"]["cbar"] = sc.pass.cbar;
    n["schedule"]["lambda_scale"] = sc.pass.lambda_scale;
    n["schedule"]["amplitude_floor"] = sc.pass.amplitude_floor;
    n["schedule"]["radius_floor_cells"] = sc.pass.radius_floor_cells;
    if (!sc.skeleton.empty()) {
        for (const auto& v : sc.skeleton.vertices) {
            YAML::Node p;
            p.push_back(v.x);
            p.push_back(v.y);
            p.SetStyle(YAML::EmitterStyle::Flow);
            n["skeleton"]["vertices"].push_back(p);
        }
        for (const auto& e : sc.skeleton.all_edges()) {
            YAML::Node p;
            p.push_back(e[0]);
            p.push_back(e[1]);
            p.SetStyle(YAML::EmitterStyle::Flow);
            n["skeleton"]["edges"].push_back(p);
        }
    }
    n["run"]["seed"] = sc.seed;
    n["run"]["lambda_budget"] = sc.effective_budget();
    n["run"]["bootstrap_lambda"] = sc.bootstrap.lambda;
    n["run"]["bootstrap_K"] = sc.bootstrap.K;
    n["run"]["export_intermediate"] = sc.export_intermediate;
    YAML::Emitter out;
    out << n;
    return out.c_str();
}

}  // namespace nkflex
