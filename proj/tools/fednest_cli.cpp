// Command-line front end: configure, run, sweep, self-check, and budget
// inspection for the federated nested-optimization simulator.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fednest/config.hpp"
#include "fednest/engine.hpp"
#include "fednest/errors.hpp"
#include "fednest/kernels.hpp"
#include "fednest/trace_io.hpp"
#include "fednest/verify.hpp"

namespace {

namespace fs = std::filesystem;

void apply_kernels_choice(const std::string& choice) {
    using fednest::kernels::Backend;
    if (choice.empty() || choice == "auto") {
        fednest::kernels::reset_backend();
        return;
    }
    if (choice == "scalar")
        fednest::kernels::force_backend(Backend::scalar);
    else if (choice == "avx2")
        fednest::kernels::force_backend(Backend::avx2);
    else
        throw fednest::ValidationError("unknown --kernels choice \"" + choice +
                                       "\" (expected scalar, avx2, or auto)");
}

// "a..b" inclusive, or a single seed "a".
std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    const auto bad = [&]() -> std::pair<std::uint64_t, std::uint64_t> {
        throw fednest::ValidationError("bad --seeds \"" + text +
                                       "\" (expected a..b with a <= b, or a single seed)");
    };
    const auto parse_u64 = [&](const std::string& s) {
        if (s.empty()) bad();
        std::size_t used = 0;
        std::uint64_t v = 0;
        try {
            v = std::stoull(s, &used);
        } catch (const std::exception&) {
            bad();
        }
        if (used != s.size()) bad();
        return v;
    };
    const std::size_t dots = text.find("..");
    if (dots == std::string::npos) {
        const std::uint64_t s = parse_u64(text);
        return {s, s};
    }
    const std::uint64_t a = parse_u64(text.substr(0, dots));
    const std::uint64_t b = parse_u64(text.substr(dots + 2));
    if (a > b) bad();
    return {a, b};
}

// Fill in the output paths: an explicit --out directory wins, then paths from
// the config, then the working directory.
void resolve_outputs(fednest::RunConfig& cfg, const std::string& out_dir,
                     const std::string& suffix) {
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        cfg.out_csv = (fs::path(out_dir) / ("trace" + suffix + ".csv")).string();
        cfg.out_json = (fs::path(out_dir) / ("summary" + suffix + ".json")).string();
        return;
    }
    if (cfg.out_csv.empty() || !suffix.empty()) cfg.out_csv = "trace" + suffix + ".csv";
    if (cfg.out_json.empty() || !suffix.empty()) cfg.out_json = "summary" + suffix + ".json";
}

void run_one(fednest::RunConfig cfg) {
    fednest::ProblemPtr prob = fednest::make_problem(cfg);
    const fednest::RunTrace trace = fednest::run_variant(*prob, cfg.algorithm, cfg.schedule,
                                                         cfg.seed, cfg.metric_stride);
    fednest::write_trace(trace, cfg, cfg.out_csv, cfg.out_json);
    const fednest::TraceRow& last = trace.rows.back();
    std::cout << fednest::to_string(cfg.algorithm) << " on " << cfg.problem << ", seed "
              << cfg.seed << ": " << last.epoch << " epochs, " << last.rounds
              << " rounds, grad_norm_sq " << last.grad_norm_sq << ", x_err_sq "
              << last.x_err_sq << "\n  wrote " << cfg.out_csv << " and " << cfg.out_json
              << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated nested-optimization simulator"};
    app.require_subcommand(1);

    std::string config_path, out_dir, kernels_choice, seeds_text;
    std::uint64_t seed_override = 0;

    CLI::App* run_cmd = app.add_subcommand("run", "run one configured experiment");
    run_cmd->add_option("--config", config_path, "JSON run config")->required();
    CLI::Option* seed_opt =
        run_cmd->add_option("--seed", seed_override, "override the config's run seed");
    run_cmd->add_option("--out", out_dir, "output directory for trace.csv / summary.json");
    run_cmd->add_option("--kernels", kernels_choice, "compute backend: scalar, avx2, auto");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a range of seeds");
    sweep_cmd->add_option("--config", config_path, "JSON run config")->required();
    sweep_cmd->add_option("--seeds", seeds_text, "inclusive seed range a..b")->required();
    sweep_cmd->add_option("--out", out_dir, "output directory (default: working directory)");
    sweep_cmd->add_option("--kernels", kernels_choice, "compute backend: scalar, avx2, auto");

    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run the built-in numerical oracle suites");
    verify_cmd->add_option("--kernels", kernels_choice, "compute backend: scalar, avx2, auto");

    CLI::App* ledger_cmd = app.add_subcommand(
        "ledger", "print the exact per-epoch communication-round budget without running");
    ledger_cmd->add_option("--config", config_path, "JSON run config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        apply_kernels_choice(kernels_choice);

        if (run_cmd->parsed()) {
            fednest::RunConfig cfg = fednest::load_config(config_path);
            if (seed_opt->count() > 0) cfg.seed = seed_override;
            resolve_outputs(cfg, out_dir, "");
            run_one(std::move(cfg));
        } else if (sweep_cmd->parsed()) {
            const auto [first, last] = parse_seed_range(seeds_text);
            const fednest::RunConfig base = fednest::load_config(config_path);
            for (std::uint64_t s = first; s <= last; ++s) {
                fednest::RunConfig cfg = base;
                cfg.seed = s;
                resolve_outputs(cfg, out_dir, "_seed" + std::to_string(s));
                run_one(std::move(cfg));
            }
        } else if (verify_cmd->parsed()) {
            const std::vector<fednest::CheckResult> results = fednest::run_oracle_suite();
            for (const fednest::CheckResult& r : results)
                std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail
                          << "\n";
            if (!fednest::all_passed(results)) {
                std::cerr << "verify: FAILED\n";
                return 3;
            }
            std::cout << "verify: all checks passed\n";
        } else if (ledger_cmd->parsed()) {
            const fednest::RunConfig cfg = fednest::load_config(config_path);
            const fednest::ProblemPtr prob = fednest::make_problem(cfg);
            std::cout << fednest::epoch_round_budget(*prob, cfg.algorithm, cfg.schedule)
                      << "\n";
        }
    } catch (const fednest::DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fednest::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
