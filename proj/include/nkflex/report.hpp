/// @file report.hpp
/// @brief Scenario runs: pipeline orchestration, JSON-lines history, summary,
/// mesh exports, dry-run schedule preview and exit status.
///
/// Files written to the output directory:
///   history.jsonl   one record per bootstrap / level
///   summary.json    resolved scenario, final norms, assertion summary, meshes
///   timing.json     wall-clock and memory figures (kept apart so that the two
///                   files above are bit-identical across repeated runs)
///   mesh_*.obj      initial, bootstrapped, per-pass and final immersions
#pragma once

#include <sys/resource.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <thread>
#include <string>
#include <vector>

#include <json.hpp>

#include "nkflex/mesh_io.hpp"
#include "nkflex/scenario.hpp"

namespace nkflex {

using json = nlohmann::ordered_json;

enum ExitCode : int { exit_success = 0, exit_assertion = 2, exit_config = 3 };

struct RunOptions {
    std::string out_dir;
    std::optional<int> depth;
    std::optional<std::uint64_t> seed;
    int threads = 0;  ///< 0 = hardware concurrency
    bool dry_run = false;
    bool calibrate = true;     ///< sweep A after an ordering failure
    std::ostream* log = nullptr;
};

struct RunReport {
    int exit_code = exit_success;
    json summary;
    std::vector<json> history;
    json timing;
};

namespace detail {

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json describe(const EstimateFailure& f) {
    return {{"pass", f.pass}, {"q", f.q}, {"estimate", f.estimate}, {"i", f.i}, {"j", f.j},
            {"value", finite_or_null(f.value)}, {"bound", finite_or_null(f.bound)}, {"nodes", f.count},
            {"message", f.describe()}};
}

inline json level_record(const LevelRecord& L) {
    json fails = json::array();
    for (const auto& f : L.failures) fails.push_back(describe(f));
    return {{"stage", "level"},
            {"pass", L.pass},
            {"q", L.q},
            {"delta", L.delta},
            {"lambda", finite_or_null(std::exp(L.log_lambda))},
            {"log_lambda", L.log_lambda},
            {"lambda_used", L.lambda_used},
            {"first_frequency", L.first_frequency},
            {"growth", L.growth},
            {"frequency_capped", L.capped},
            {"radius", L.radius},
            {"radius_schedule", L.radius_schedule},
            {"components", L.components},
            {"support_nodes", L.support_nodes},
            {"grad_chi", L.grad_chi},
            {"grad_chi_wide", L.grad_chi_wide},
            {"grad_chi_scale", finite_or_null(L.grad_chi_scale)},
            {"admissible_avoid", finite_or_null(L.admissible_avoid)},
            {"sup_defect", finite_or_null(L.sup_defect)},
            {"sup_error", finite_or_null(L.sup_error)},
            {"rho_bands", {{"min", finite_or_null(L.rho_min)}, {"max", finite_or_null(L.rho_max)}, {"level", std::sqrt(L.delta)}}},
            {"h_sup", finite_or_null(L.h_sup)},
            {"min_margin", finite_or_null(L.min_margin)},
            {"residual", finite_or_null(L.residual)},
            {"displacement", finite_or_null(L.displacement)},
            {"displacement_c1", finite_or_null(L.displacement_c1)},
            {"cbar_measured", finite_or_null(L.cbar_measured)},
            {"holder_probe", finite_or_null(L.holder_probe)},
            {"assertions_passed", L.assertions_passed()},
            {"failures", fails},
            {"notes", L.notes}};
}

inline double relative_defect(const ImmersionField& u, const MetricField& g) {
    return sup_norm(g - pullback_metric(u)) / sup_norm(g);
}

inline double shortness_margin(const ImmersionField& u, const MetricField& g) {
    return check_short(u, g).min_margin;
}

inline long peak_rss_kb() {
    rusage r{};
    getrusage(RUSAGE_SELF, &r);
    return r.ru_maxrss;
}

}  // namespace detail

/// Threads actually available: the request (or the hardware count), capped by
/// NKFLEX_MAX_THREADS.  The compute kernels are sequential, so runs use one.
struct ThreadBudget {
    int requested = 0, cap = 0, used = 1;
};

inline ThreadBudget resolve_threads(int requested) {
    ThreadBudget t;
    t.requested = requested > 0 ? requested : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    t.cap = t.requested;
    if (const char* env = std::getenv("NKFLEX_MAX_THREADS")) {
        const int c = std::atoi(env);
        if (c > 0) t.cap = std::min(t.cap, c);
    }
    t.used = 1;
    return t;
}

/// Bytes held at the peak of a level: state, cut-offs, stage terms,
/// conformal solve and pullback buffers, about 64 doubles per node, plus the
/// doubled padding of the conformal solve on clamped charts.
inline double memory_estimate(const GridChart& c) {
    const double per_node = 64.0 + (c.periodic() ? 0.0 : 4.0 * 12.0);
    return static_cast<double>(c.size()) * per_node * sizeof(double);
}

/// Ladder of the first pass (delta_1 = delta_cap) and the exponent chain over
/// all passes.
inline json schedule_preview(const Scenario& sc, int depth) {
    json out;
    const auto skeleta = sc.skeleton.skeleta();
    Rational theta = sc.theta, alpha = sc.alpha;
    json chain = json::array();
    for (std::size_t j = 0; j < skeleta.size(); ++j) {
        const auto law = exponent_law(theta, alpha, 2);
        chain.push_back({{"pass", j + 1},
                         {"skeleton", to_string(skeleta[j].level)},
                         {"theta", to_string(theta)},
                         {"alpha", to_string(alpha)},
                         {"b", to_string(law.b)},
                         {"minimal_A", describe_log(minimal_log_A(law, sc.delta_cap))}});
        theta = law.theta_next;
        alpha = law.alpha_next;
    }
    out["passes"] = chain;
    out["theta_final"] = to_string(theta);
    out["theta_final_value"] = to_double(theta);
    try {
        const auto s = build_schedule(sc.A, sc.theta, sc.alpha, sc.delta_cap, 2, depth);
        json ladder = json::array();
        for (int q = 1; q <= s.levels(); ++q) {
            json row{{"q", q}, {"delta", s.delta_at(q)}, {"log_lambda", s.log_lambda[q]},
                     {"lambda", detail::finite_or_null(s.lambda(q))}};
            if (q < s.levels()) row["radius"] = s.radius(q);
            ladder.push_back(row);
        }
        out["ladder"] = ladder;
        out["kappa"] = s.kappa;
        out["ordered"] = true;
    } catch (const ScheduleOrderingError& e) {
        out["ordered"] = false;
        out["ordering_error"] = e.what();
    }
    out["lambda_budget"] = sc.effective_budget();
    out["amplitude_floor"] = sc.pass.amplitude_floor > 0.0 ? sc.pass.amplitude_floor
                                                           : default_amplitude_floor(sc.chart.chart(), sc.pass.nodes_per_wavelength);
    return out;
}

inline void write_json_file(const std::filesystem::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw Error("cannot open " + p.string() + " for writing");
    os << j.dump(2) << '\n';
}

/// Run a parsed scenario.  Every run writes a summary, failed ones included.
inline RunReport run_scenario(Scenario sc, const RunOptions& opt) {
    namespace fs = std::filesystem;
    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count(); };
    auto log = [&](const std::string& s) {
        if (opt.log) *opt.log << s << std::endl;
    };
    if (opt.depth) sc.depth = *opt.depth;
    if (opt.seed) sc.seed = *opt.seed;
    const ThreadBudget threads = resolve_threads(opt.threads);
    const GridChart chart = sc.chart.chart();

    RunReport rep;
    json& S = rep.summary;
    S["name"] = sc.name;
    S["scenario"] = echo_scenario(sc);
    S["seed"] = sc.seed;
    S["threads"] = {{"requested", threads.requested}, {"cap", threads.cap}, {"used", threads.used}};
    S["schedule"] = schedule_preview(sc, sc.depth);
    rep.timing["memory_estimate_bytes"] = memory_estimate(chart);

    const fs::path out = opt.out_dir.empty() ? fs::path(".") : fs::path(opt.out_dir);
    if (!opt.dry_run) fs::create_directories(out);

    if (opt.dry_run) {
        S["dry_run"] = true;
        S["memory_estimate_bytes"] = memory_estimate(chart);
        S["exit_code"] = exit_success;
        return rep;
    }

    std::ofstream hist(out / "history.jsonl");
    if (!hist) throw Error("cannot open " + (out / "history.jsonl").string());
    auto emit = [&](const json& rec) {
        rep.history.push_back(rec);
        hist << rec.dump() << '\n';
        hist.flush();
    };
    json timing_levels = json::array();
    json meshes = json::array();
    json failures = json::array(), mesh_failures = json::array();
    auto export_stage = [&](const ImmersionField& u, const MetricField& g, const std::string& stage) {
        const std::string file = "mesh_" + stage + ".obj";
        export_mesh(u, (out / file).string(), sc.name + " " + stage);
        const double margin = detail::shortness_margin(u, g);
        const bool is_short = margin > -shortness_tolerance;
        meshes.push_back({{"stage", stage}, {"file", file}, {"shortness_margin", margin}, {"short", is_short}});
        if (!is_short) {
            std::ostringstream msg;
            msg << "shortness audit of exported mesh '" << stage << "': min eigenvalue of g - u#e = " << margin;
            mesh_failures.push_back({{"estimate", "exported mesh is short"}, {"stage", stage}, {"value", margin},
                                     {"bound", 0.0}, {"message", msg.str()}});
        }
    };

    int code = exit_success;
    MetricField g;
    ImmersionField u0;
    try {
        g = sc.metric.build(chart);
        u0 = sc.map.build(chart, sc.seed);
        if (sc.export_intermediate) export_stage(u0, g, "initial");
        const GlobalConfig cfg = sc.global_config();
        const CorrugationTable table(1.0, 257, 512);
        log("run " + sc.name + ": " + std::to_string(chart.nx) + "x" + std::to_string(chart.ny) + ", depth " +
            std::to_string(sc.depth) + ", " + std::to_string(cfg.skeleta.size()) + " pass(es)");

        const auto on_level = [&](const LevelRecord& L) {
            emit(detail::level_record(L));
            timing_levels.push_back({{"pass", L.pass}, {"q", L.q}, {"seconds", L.wall_time}});
            std::ostringstream s;
            s << "  pass " << L.pass << " q=" << L.q << " defect=" << L.sup_defect << " margin=" << L.min_margin
              << " h=" << L.h_sup << (L.assertions_passed() ? "" : "  [" + std::to_string(L.failures.size()) + " failed]");
            log(s.str());
        };
        const GlobalResult r = run_global(u0, g, cfg, table, on_level);

        // the bootstrap record leads the history
        json boot{{"stage", "bootstrap"},
                  {"pass", 0},
                  {"q", 0},
                  {"delta", r.bootstrap.delta_star},
                  {"lambda", r.bootstrap.lambda},
                  {"growth", r.bootstrap.K},
                  {"sup_defect", detail::relative_defect(r.bootstrap.u, g)},
                  {"rho_bands", {{"min", std::sqrt(r.bootstrap.delta_star)}, {"max", std::sqrt(r.bootstrap.delta_star)},
                                 {"level", std::sqrt(r.bootstrap.delta_star)}}},
                  {"h_sup", r.bootstrap.h_sup},
                  {"min_margin", detail::shortness_margin(r.bootstrap.u, g)},
                  {"displacement", r.bootstrap.displacement},
                  {"holder_probe", detail::finite_or_null(r.holder_first)},
                  {"assertions_passed", r.bootstrap.strong},
                  {"failures", json::array()}};
        if (!r.bootstrap.strong) {
            EstimateFailure f;
            f.estimate = "bootstrap is strongly short";
            f.value = r.bootstrap.h_sup;
            f.bound = 0.5;
            boot["failures"].push_back(detail::describe(f));
            failures.push_back(detail::describe(f));
        }
        rep.history.insert(rep.history.begin(), boot);
        hist.close();
        {
            std::ofstream h2(out / "history.jsonl");
            for (const auto& rec : rep.history) h2 << rec.dump() << '\n';
        }

        if (sc.export_intermediate) {
            export_stage(r.bootstrap.u, g, "bootstrap");
            for (std::size_t j = 0; j < r.passes.size(); ++j) export_stage(r.passes[j].state.u, g, "pass" + std::to_string(j + 1));
        }
        export_stage(r.state.u, g, "final");

        json passes = json::array();
        for (std::size_t j = 0; j < r.passes.size(); ++j) {
            const auto& p = r.passes[j];
            passes.push_back({{"pass", j + 1},
                              {"skeleton", to_string(cfg.skeleta[j].level)},
                              {"levels_completed", p.levels_completed},
                              {"truncation", p.truncation},
                              {"A", describe_log(p.schedule.A.log_value())},
                              {"A_next", describe_log(p.state.A.log_value())},
                              {"theta_next", to_string(p.state.theta)},
                              {"alpha_next", to_string(p.state.alpha)},
                              {"separation", p.radii.separation},
                              {"admissible_avoid", detail::finite_or_null(p.admissible_avoid)},
                              {"displacement", p.displacement}});
        }
        S["bootstrap"] = {{"delta_star", r.bootstrap.delta_star}, {"h_sup", r.bootstrap.h_sup},
                          {"strong", r.bootstrap.strong}, {"K", r.bootstrap.K}, {"lambda", r.bootstrap.lambda},
                          {"displacement", r.bootstrap.displacement}};
        S["passes"] = passes;
        const double holder_ratio = std::isfinite(r.holder_first) && r.holder_first > 0.0 ? r.holder_max / r.holder_first
                                                                                          : std::numeric_limits<double>::quiet_NaN();
        S["final"] = {{"sup_defect", detail::relative_defect(r.state.u, g)},
                      {"min_margin", detail::shortness_margin(r.state.u, g)},
                      {"rho_max", sup_norm(r.state.rho)},
                      {"h_sup", detail::sup_relative_eigen(r.state.h, g)},
                      {"displacement", r.displacement},
                      {"displacement_from_input", r.displacement_raw},
                      {"displacement_bound", r.displacement_bound},
                      {"holder_exponent", 0.9 * to_double(r.theta_final)},
                      {"holder_first", detail::finite_or_null(r.holder_first)},
                      {"holder_max", r.holder_max},
                      {"holder_ratio", detail::finite_or_null(holder_ratio)},
                      {"theta_final", to_string(r.theta_final)}};
        for (const auto& f : r.failures) failures.push_back(detail::describe(f));
        if (!failures.empty()) code = exit_assertion;
    } catch (const ScheduleOrderingError& e) {
        code = exit_assertion;
        EstimateFailure f;
        f.estimate = "schedule ordering delta_{q+1} <= delta_q / 4, lambda_{q+1} >= 2 lambda_q";
        f.q = e.level;
        failures.push_back(detail::describe(f));
        failures.back()["message"] = e.what();
        json cal{{"ordering_minimum", describe_log(e.minimal_log_A)}};
        if (opt.calibrate) {
            log("calibrating A (depth 3 bisection) ...");
            const auto c = calibrate_A(u0, g, sc.global_config(), CorrugationTable(1.0, 257, 512));
            cal["runs"] = c.runs;
            if (c.smallest_passing) {
                cal["smallest_passing"] = *c.smallest_passing;
                cal["suggested_A"] = c.suggested;
                cal["basis"] = "twice the smallest A passing every estimate at depth 3";
            } else {
                cal["smallest_passing"] = nullptr;
                cal["suggested_A"] = 2.0 * std::exp(e.minimal_log_A);
                cal["basis"] = "no A up to 64x the ordering minimum passed every estimate at depth 3; "
                               "suggesting twice the ordering minimum";
            }
        } else {
            cal["suggested_A"] = 2.0 * std::exp(e.minimal_log_A);
            cal["basis"] = "twice the ordering minimum";
        }
        S["calibration"] = cal;
        S["error"] = {{"kind", "assertion"}, {"message", e.what()}};
    } catch (const ConfigError& e) {
        code = exit_config;
        S["error"] = {{"kind", "configuration"}, {"message", e.what()}};
    } catch (const PreconditionError& e) {
        code = exit_config;
        S["error"] = {{"kind", "precondition"}, {"message", e.what()}};
    } catch (const Error& e) {
        code = exit_assertion;
        S["error"] = {{"kind", "runtime"}, {"message", e.what()}};
    }
    for (auto& f : mesh_failures) failures.push_back(f);
    if (!failures.empty() && code == exit_success) code = exit_assertion;
    S["meshes"] = meshes;
    S["assertions"] = {{"passed", failures.empty() && code == exit_success},
                       {"failed", failures.size()},
                       {"first_failure", failures.empty() ? json(nullptr) : failures.front()["message"]},
                       {"failures", failures}};
    S["exit_code"] = code;
    rep.exit_code = code;

    rep.timing["wall_seconds"] = elapsed();
    rep.timing["levels"] = timing_levels;
    rep.timing["peak_rss_kb"] = detail::peak_rss_kb();
    write_json_file(out / "summary.json", S);
    write_json_file(out / "timing.json", rep.timing);
    return rep;
}

}  // namespace nkflex
