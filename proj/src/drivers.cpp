#include "swimcycle/drivers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "swimcycle/error.hpp"

namespace fs = std::filesystem;

namespace swimcycle {

namespace {

void ensure_dir(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw FormatError("cannot create output directory " + out.string() + ": " + ec.message());
}

std::ofstream open_out(const fs::path& p, bool binary = false) {
    std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
    if (!os) throw FormatError("cannot write " + p.string());
    return os;
}

std::vector<std::string> stamp(const RunConfig& cfg) {
    return {"config_hash=" + hash_hex(config_hash(cfg)), "seed=" + std::to_string(cfg.seed)};
}

const std::vector<std::string> kLedgerColumns = {"t",         "E_total",   "E_kin_body",
                                                 "E_kin_fluid", "U_elastic", "P_body",
                                                 "P_viscous", "P_actuation", "P_sponge"};

std::vector<double> ledger_row(const EnergyLedger& e) {
    return {e.t, e.E_total, e.E_kin_body, e.E_kin_fluid, e.U_elastic,
            e.P_body, e.P_viscous, e.P_actuation, e.P_sponge};
}

std::vector<std::string> trajectory_columns(std::size_t n) {
    std::vector<std::string> c{"t"};
    for (std::size_t i = 0; i < n; ++i) {
        c.push_back("x" + std::to_string(i));
        c.push_back("y" + std::to_string(i));
    }
    return c;
}

std::vector<double> trajectory_row(double t, const std::vector<Vec2>& x) {
    std::vector<double> r{t};
    for (const Vec2& p : x) {
        r.push_back(p.x);
        r.push_back(p.y);
    }
    return r;
}

void write_header(std::ostream& os, const std::vector<std::string>& comments,
                  const std::vector<std::string>& columns) {
    write_csv(os, {comments, columns, {}});
}

long steps_for(double duration, double dt) { return std::lround(duration / dt); }

}  // namespace

SystemState initial_state(const RunConfig& cfg, const Stepper& stepper) {
    SystemState s = stepper.rest_state();
    if (cfg.simulate.initial == InitialCondition::Perturbed && cfg.simulate.perturbation > 0.0) {
        std::mt19937_64 rng(cfg.seed);
        std::normal_distribution<double> n(0.0, cfg.simulate.perturbation * cfg.body.length);
        for (Vec2& p : s.body.positions) {
            p.x += n(rng);
            p.y += n(rng);
        }
    }
    return s;
}

SimulateSummary run_simulate(const RunConfig& cfg, const fs::path& out) {
    ensure_dir(out);
    write_json_file(out / "config.json", to_json(cfg));
    const SystemSpec spec = cfg.system();
    Stepper st(spec.grid, spec.mesh, spec.actuation, spec.stepper);
    SystemState s = initial_state(cfg, st);

    auto ledger = open_out(out / "ledger.csv");
    auto traj = open_out(out / "trajectory.csv");
    const auto comments = stamp(cfg);
    write_header(ledger, comments, kLedgerColumns);
    write_header(traj, comments, trajectory_columns(s.body.positions.size()));

    const nlohmann::json ckpt_header = {{"config_hash", hash_hex(config_hash(cfg))},
                                        {"seed", cfg.seed}};
    auto snapshot = [&](const fs::path& p) {
        auto os = open_out(p, true);
        write_checkpoint(os, ckpt_header, spec.grid, s);
    };

    SimulateSummary sum;
    const long n_steps = steps_for(cfg.simulate.periods * cfg.actuation.period, cfg.stepper.dt);
    EnergyLedger e = st.energy_ledger(s);
    sum.E0 = e.E_total;
    double E_prev = e.E_total;
    ledger << format_row(ledger_row(e)) << '\n';
    traj << format_row(trajectory_row(s.t, s.body.positions)) << '\n';
    for (long n = 1; n <= n_steps; ++n) {
        try {
            st.step(s);
        } catch (const Error& err) {
            throw StepFailure(err, s.t, n);
        }
        const double speed = st.solver().max_speed(s.fluid);
        sum.peak_speed = std::max(sum.peak_speed, speed);
        e = st.energy_ledger(s);
        sum.max_energy_increase = std::max(sum.max_energy_increase, e.E_total - E_prev);
        E_prev = e.E_total;
        if (n % cfg.simulate.ledger_every == 0) ledger << format_row(ledger_row(e)) << '\n';
        if (n % cfg.simulate.trajectory_every == 0)
            traj << format_row(trajectory_row(s.t, s.body.positions)) << '\n';
        if (cfg.simulate.snapshot_every > 0 && n % cfg.simulate.snapshot_every == 0) {
            char name[32];
            std::snprintf(name, sizeof name, "snap_%08ld.ckpt", n);
            snapshot(out / name);
        }
    }
    snapshot(out / "final.ckpt");

    sum.steps = n_steps;
    sum.E_final = e.E_total;
    sum.final_speed = st.solver().max_speed(s.fluid);
    const Alignment al = align(s.body.positions, s.body.velocities, spec.mesh.masses, spec.mesh.nodes);
    const Vec2 c = mass_centroid(spec.mesh.nodes, spec.mesh.masses);
    for (std::size_t i = 0; i < al.shape.size(); ++i)
        sum.shape_distance = std::max(sum.shape_distance, norm(al.shape[i] - (spec.mesh.nodes[i] - c)));
    sum.shape_distance /= cfg.body.length;

    write_json_file(out / "summary.json",
                    {{"config_hash", hash_hex(config_hash(cfg))},
                     {"seed", cfg.seed},
                     {"steps", sum.steps},
                     {"E0", sum.E0},
                     {"E_final", sum.E_final},
                     {"max_energy_increase", sum.max_energy_increase},
                     {"peak_speed", sum.peak_speed},
                     {"final_speed", sum.final_speed},
                     {"shape_distance", sum.shape_distance}});
    return sum;
}

CycleSearch run_find_cycle(const RunConfig& cfg, const fs::path& out) {
    ensure_dir(out);
    write_json_file(out / "config.json", to_json(cfg));
    const SystemSpec spec = cfg.system();
    SystemState x0;
    {
        Stepper st(spec.grid, spec.mesh, spec.actuation, spec.stepper);
        x0 = initial_state(cfg, st);
    }
    const std::string hash = hash_hex(config_hash(cfg));
    auto log = open_out(out / "iterations.csv");
    write_header(log, stamp(cfg), {"iter", "residual", "z.theta", "z.tx", "z.ty"});
    CycleSearch res = find_cycle(spec, x0, cfg.cycle, [&](const IterationRecord& r) {
        log << format_row({double(r.iter), r.residual, r.z.theta, r.z.tx, r.z.ty}) << '\n';
        log.flush();
    });

    {
        auto os = open_out(out / "cycle_loop.bin", true);
        write_loop_binary(os, res.result.loop, config_hash(cfg));
    }
    {
        auto os = open_out(out / "cycle_state.ckpt", true);
        write_checkpoint(os, {{"config_hash", hash}, {"seed", cfg.seed}}, spec.grid, res.state);
    }
    nlohmann::json j = cycle_to_json(res.result, "cycle_loop.bin");
    j["state"] = "cycle_state.ckpt";
    j["base_pose"] = res.base_pose;
    j["z_last_iterate"] = res.z_last_iterate;
    j["lift_error"] = res.lift_error;
    j["config_hash"] = hash;
    j["seed"] = cfg.seed;
    write_json_file(out / "cycle.json", j);
    return res;
}

LoadedCycle load_cycle(const fs::path& cycle_json) {
    const nlohmann::json j = read_json_file(cycle_json);
    LoadedCycle c;
    c.result = cycle_from_json(j);
    try {
        c.base_pose = j.at("base_pose").get<SE2>();
        c.config_hash = j.at("config_hash").get<std::string>();
        const fs::path dir = cycle_json.parent_path();
        std::ifstream loop(dir / j.at("loop").at("file").get<std::string>(), std::ios::binary);
        if (!loop) throw FormatError("cannot open loop sidecar for " + cycle_json.string());
        c.result.loop = read_loop_binary(loop);
        std::ifstream st(dir / j.at("state").get<std::string>(), std::ios::binary);
        if (!st) throw FormatError("cannot open cycle state for " + cycle_json.string());
        nlohmann::json header;
        c.state = read_checkpoint(st, header);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(cycle_json.string() + ": " + e.what());
    }
    if (c.result.loop.empty()) throw FormatError(cycle_json.string() + ": empty loop");
    return c;
}

ReconstructSummary run_reconstruct(const RunConfig& cfg, const fs::path& out) {
    if (cfg.reconstruct.cycle.empty()) throw ConfigError("reconstruct.cycle: required for reconstruct");
    fs::path cycle_path = cfg.reconstruct.cycle;
    if (cycle_path.is_relative()) cycle_path = cfg.base_dir / cycle_path;
    const LoadedCycle cyc = load_cycle(cycle_path);
    ensure_dir(out);
    write_json_file(out / "config.json", to_json(cfg));

    const int n = cfg.reconstruct.periods;
    const int K = static_cast<int>(cyc.result.loop.size());
    const double T = cyc.result.period;
    const auto comments = stamp(cfg);
    const std::size_t N = cyc.result.loop[0].state.shape.size();

    std::vector<std::vector<Vec2>> recon;
    std::vector<double> times;
    {
        auto os = open_out(out / "reconstructed.csv");
        write_header(os, comments, trajectory_columns(N));
        for (int k = 0; k < n * K; ++k) {
            const int p = k / K, q = k % K;
            const double t = p * T + q * T / K;
            BodyState b = reconstruct(cyc.result, cyc.base_pose, n, t);
            os << format_row(trajectory_row(t, b.positions)) << '\n';
            recon.push_back(std::move(b.positions));
            times.push_back(t);
        }
    }

    ReconstructSummary sum;
    if (!cfg.reconstruct.compare) return sum;
    const SystemSpec spec = cfg.system();
    if (spec.mesh.size() != N) throw ConfigError("body.n_nodes: does not match the cycle file");
    if (std::abs(spec.actuation.period - T) > 1e-12 * T)
        throw ConfigError("actuation.period: does not match the cycle file");
    Stepper st(spec.grid, spec.mesh, spec.actuation, spec.stepper);
    const long per = steps_for(T, cfg.stepper.dt);
    if (per % K != 0) throw ConfigError("stepper.dt: snapshot phases are not whole steps");
    const long stride = per / K;
    SystemState s = cyc.state;
    s.t = 0.0;

    auto os = open_out(out / "comparison.csv");
    write_header(os, comments, {"t", "discrepancy"});
    long step = 0;
    for (int k = 0; k < n * K; ++k) {
        for (; step < k * stride; ++step) {
            try {
                st.step(s);
            } catch (const Error& err) {
                throw StepFailure(err, s.t, step);
            }
        }
        double d = 0.0;
        for (std::size_t i = 0; i < N; ++i) d = std::max(d, norm(s.body.positions[i] - recon[k][i]));
        d /= cfg.body.length;
        sum.max_discrepancy = std::max(sum.max_discrepancy, d);
        os << format_row({times[k], d}) << '\n';
    }
    sum.compared = true;
    sum.within_bound = sum.max_discrepancy <= cfg.reconstruct.bound;
    write_json_file(out / "report.json", {{"config_hash", hash_hex(config_hash(cfg))},
                                          {"cycle_config_hash", cyc.config_hash},
                                          {"periods", n},
                                          {"max_discrepancy", sum.max_discrepancy},
                                          {"bound", cfg.reconstruct.bound},
                                          {"within_bound", sum.within_bound}});
    return sum;
}

}  // namespace swimcycle
