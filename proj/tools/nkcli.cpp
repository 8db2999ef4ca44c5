// nkcli: scenario runs and fixed benchmarks of the convex-integration engine.
//
//   nkcli run --scenario scenarios/torus_benchmark.yaml --out out/torus [--depth q] [--seed n] [--dry-run]
//   nkcli step-bench | stage-bench | conformal-check | corrugation-dump
//
// Exit status: 0 success, 2 assertion failure, 3 configuration error.
// NKFLEX_MAX_THREADS caps --threads.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "nkflex/benchmarks.hpp"
#include "nkflex/report.hpp"

using namespace nkflex;

namespace {

int print(const json& j, int code) {
    std::cout << j.dump(2) << std::endl;
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nash-Kuiper convex integration: scenario runs and benchmarks"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (capped by NKFLEX_MAX_THREADS)")->check(CLI::NonNegativeNumber);

    auto* run = app.add_subcommand("run", "run a scenario and write history, meshes and a summary");
    std::string scenario_path, out_dir;
    std::optional<int> depth;
    std::optional<std::uint64_t> seed;
    bool dry_run = false, no_calibrate = false;
    run->add_option("--scenario", scenario_path, "scenario YAML")->required();
    run->add_option("--out", out_dir, "output directory (default out/<scenario name>)");
    run->add_option("--depth", depth, "override the number of levels per pass")->check(CLI::PositiveNumber);
    run->add_option("--seed", seed, "seed of every random choice (recorded in the report)");
    run->add_option("--threads", threads, "worker threads (capped by NKFLEX_MAX_THREADS)")->check(CLI::NonNegativeNumber);
    run->add_flag("--dry-run", dry_run, "print the schedule and a memory estimate, compute nothing");
    run->add_flag("--no-calibrate", no_calibrate, "skip the A sweep after an ordering failure");

    auto* step_bench = app.add_subcommand("step-bench", "flat-strip step: sup defect against lambda");
    std::vector<double> lambdas{64, 128, 256};
    int step_n = 1025;
    step_bench->add_option("--lambda", lambdas, "frequencies")->expected(1, -1);
    step_bench->add_option("--resolution", step_n, "nodes per axis of the unit square");

    auto* stage_bench = app.add_subcommand("stage-bench", "torus conformal stage: sup E against K");
    std::vector<double> Ks{8, 16};
    int stage_n = 1024;
    stage_bench->add_option("--K", Ks, "frequency growth factors")->expected(1, -1);
    stage_bench->add_option("--resolution", stage_n, "nodes per axis of the torus");

    auto* conformal = app.add_subcommand("conformal-check", "Beltrami solver on analytic and random metrics");
    int conformal_n = 256;
    conformal->add_option("--resolution", conformal_n, "nodes per axis of the torus");

    auto* dump = app.add_subcommand("corrugation-dump", "CSV of the corrugation table");
    std::string dump_path = "corrugation.csv";
    int s_samples = 65, t_samples = 128;
    dump->add_option("--out", dump_path, "CSV path");
    dump->add_option("--s-samples", s_samples, "amplitude samples")->check(CLI::PositiveNumber);
    dump->add_option("--t-samples", t_samples, "phase samples")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    try {
        if (*run) {
            const Scenario sc = parse_scenario(scenario_path);
            RunOptions opt;
            opt.out_dir = out_dir.empty() ? "out/" + sc.name : out_dir;
            opt.depth = depth;
            opt.seed = seed;
            opt.threads = threads;
            opt.dry_run = dry_run;
            opt.calibrate = !no_calibrate;
            opt.log = &std::cerr;
            const auto rep = run_scenario(sc, opt);
            if (dry_run) {
                json j = rep.summary;
                j.erase("exit_code");
                return print(j, rep.exit_code);
            }
            const auto& a = rep.summary["assertions"];
            std::cerr << (rep.exit_code == exit_success ? "PASSED" : "FAILED") << ": " << a["failed"] << " failed assertion(s)";
            if (!a["first_failure"].is_null()) std::cerr << "; first: " << a["first_failure"].get<std::string>();
            if (rep.summary.contains("error")) std::cerr << "\nerror: " << rep.summary["error"]["message"].get<std::string>();
            if (rep.summary.contains("calibration"))
                std::cerr << "\nsuggested A = " << rep.summary["calibration"]["suggested_A"] << " ("
                          << rep.summary["calibration"]["basis"].get<std::string>() << ")";
            std::cerr << "\nreport written to " << opt.out_dir << std::endl;
            return rep.exit_code;
        }
        const CorrugationTable table(1.0, 257, 512);
        if (*step_bench) {
            const auto b = bench::step_bench(lambdas, table, step_n);
            json pts = json::array();
            for (const auto& p : b.points)
                pts.push_back({{"lambda", p.lambda}, {"sup_defect", p.sup_defect}, {"outside", p.outside},
                               {"support_ok", p.support_ok}, {"band_ok", p.band_ok}, {"seconds", p.seconds}});
            return print({{"points", pts}, {"slope", b.slope}}, exit_success);
        }
        if (*stage_bench) {
            const auto b = bench::stage_bench(Ks, table, stage_n);
            json pts = json::array();
            for (std::size_t k = 0; k < b.K.size(); ++k) pts.push_back({{"K", b.K[k]}, {"sup_error", b.sup_error[k]}});
            return print({{"terms", b.terms}, {"points", pts}}, exit_success);
        }
        if (*conformal) {
            const auto r = bench::conformal_check(conformal_n);
            return print({{"identity_residual", r.identity_residual},
                          {"mu", {r.mu_anisotropic.real(), r.mu_anisotropic.imag()}},
                          {"theta_squared", r.theta_sq_ratio},
                          {"anisotropic_residual", r.anisotropic_residual},
                          {"random_residual", r.random_residual},
                          {"mu_bound_gap", r.worst_mu_bound_gap},
                          {"seconds", r.seconds}},
                         exit_success);
        }
        if (*dump) {
            std::ofstream os(dump_path);
            if (!os) throw ConfigError("cannot open " + dump_path);
            bench::corrugation_dump(table, os, s_samples, t_samples);
            std::cerr << "wrote " << dump_path << " (table identity residual " << table.identity_residual() << ")" << std::endl;
            return exit_success;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << std::endl;
        return exit_config;
    } catch (const PreconditionError& e) {
        std::cerr << "configuration error: " << e.what() << std::endl;
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return exit_assertion;
    }
    return exit_success;
}
