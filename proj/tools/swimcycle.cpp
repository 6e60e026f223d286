// swimcycle: simulate, find-cycle, reconstruct, validate-config.
//
// Exit codes: 0 ok, 2 config/usage error, 3 numerical failure. Failures
// print one JSON object on stderr.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "swimcycle/config.hpp"
#include "swimcycle/drivers.hpp"
#include "swimcycle/error.hpp"

namespace fs = std::filesystem;
using namespace swimcycle;

namespace {

constexpr int kConfigExit = 2;
constexpr int kNumericExit = 3;

int fail(int code, const std::string& kind, const std::string& message,
         std::optional<double> t = std::nullopt, std::optional<long> step = std::nullopt) {
    nlohmann::json j = {{"error", kind}, {"message", message}};
    if (t) j["t"] = *t;
    if (step) j["step"] = *step;
    std::cerr << j.dump() << '\n';
    return code;
}

bool is_config_kind(const std::string& code) {
    return code == "ConfigError" || code == "FormatError";
}

struct Options {
    std::string config;
    std::string out;
    int workers = 0;
    std::optional<std::uint64_t> seed;
};

RunConfig resolve(const Options& o) {
    RunConfig cfg = load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.workers > 0) cfg.cycle.workers = o.workers;
    validate(cfg);
    return cfg;
}

fs::path out_dir(const Options& o, const RunConfig& cfg) {
    if (!o.out.empty()) return o.out;
    fs::path p = cfg.output_dir;
    return p.is_relative() ? cfg.base_dir / p : p;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"2-D swimmer limit cycles: simulation, cycle search, reconstruction"};
    app.require_subcommand(1);

    Options opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config, "JSON run configuration")->required();
        sub->add_option("--out", opt.out, "output directory (overrides output.directory)");
        sub->add_option("--workers", opt.workers, "threads for Jacobian probes")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", opt.seed, "overrides output.seed");
    };
    CLI::App* sim = app.add_subcommand("simulate", "run the configured horizon");
    CLI::App* cyc = app.add_subcommand("find-cycle", "Poincare fixed-point search");
    CLI::App* rec = app.add_subcommand("reconstruct", "rebuild a trajectory from a cycle file");
    CLI::App* val = app.add_subcommand("validate-config", "check a config and print it resolved");
    for (CLI::App* s : {sim, cyc, rec, val}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::Error& e) {
        return fail(kConfigExit, "UsageError", e.what());
    }

    try {
        const RunConfig cfg = resolve(opt);
        if (val->parsed()) {
            nlohmann::json j = to_json(cfg);
            j["config_hash"] = hash_hex(config_hash(cfg));
            std::cout << j.dump(2) << '\n';
            return 0;
        }
        const fs::path out = out_dir(opt, cfg);
        if (sim->parsed()) {
            const SimulateSummary s = run_simulate(cfg, out);
            std::cout << "steps " << s.steps << "  E0 " << s.E0 << "  E_final " << s.E_final
                      << "  peak_speed " << s.peak_speed << "  final_speed " << s.final_speed
                      << "  shape_distance " << s.shape_distance << '\n';
        } else if (cyc->parsed()) {
            const CycleSearch r = run_find_cycle(cfg, out);
            const SE2& z = r.result.holonomy;
            std::cout << "converged in " << r.result.iterations << " iterations, residual "
                      << r.result.residual << ", contraction " << r.result.contraction
                      << "\nholonomy theta " << z.theta << "  tx " << z.tx << "  ty " << z.ty
                      << "\nstable " << (r.result.stable ? "yes" : "no") << '\n';
        } else if (rec->parsed()) {
            const ReconstructSummary r = run_reconstruct(cfg, out);
            if (r.compared) {
                std::cout << "max discrepancy " << r.max_discrepancy << " body-lengths ("
                          << (r.within_bound ? "within" : "exceeds") << " bound "
                          << cfg.reconstruct.bound << ")\n";
                if (!r.within_bound)
                    return fail(kNumericExit, "ReconstructionBound",
                                "reconstruction differs from direct simulation by " +
                                    std::to_string(r.max_discrepancy) + " body-lengths");
            }
        }
        return 0;
    } catch (const StepFailure& e) {
        return fail(kNumericExit, e.code(), e.what(), e.t(), e.step());
    } catch (const NoConvergence& e) {
        nlohmann::json j = {{"error", e.code()},
                            {"message", e.what()},
                            {"best_residual", e.best_residual()},
                            {"iterations", e.iterations()}};
        std::cerr << j.dump() << '\n';
        return kNumericExit;
    } catch (const Error& e) {
        return fail(is_config_kind(e.code()) ? kConfigExit : kNumericExit, e.code(), e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(kConfigExit, "IoError", e.what());
    } catch (const std::exception& e) {
        return fail(kNumericExit, "InternalError", e.what());
    }
}
