#pragma once

#include <filesystem>
#include <functional>
#include <random>

#include "swimcycle/config.hpp"
#include "swimcycle/error.hpp"

namespace swimcycle {

// A stepper failure annotated with where it happened.
class StepFailure : public Error {
public:
    StepFailure(const Error& cause, double t, long step)
        : Error(cause.code(), cause.what()), t_(t), step_(step) {}
    double t() const noexcept { return t_; }
    long step() const noexcept { return step_; }

private:
    double t_;
    long step_;
};

// Initial state per simulate.initial: rest, or rest with every node moved by
// N(0, perturbation^2) per component from one seeded generator.
SystemState initial_state(const RunConfig& cfg, const Stepper& stepper);

struct SimulateSummary {
    double E0 = 0.0;
    double E_final = 0.0;
    double peak_speed = 0.0;
    double final_speed = 0.0;
    double shape_distance = 0.0;  // max |aligned shape - template|, body-lengths
    double max_energy_increase = 0.0;
    long steps = 0;
};

// Writes config.json, ledger.csv, trajectory.csv, snapshots and summary.json.
SimulateSummary run_simulate(const RunConfig& cfg, const std::filesystem::path& out);

// Writes config.json, cycle.json, cycle_loop.bin, cycle_state.ckpt and
// iterations.csv.
CycleSearch run_find_cycle(const RunConfig& cfg, const std::filesystem::path& out);

struct ReconstructSummary {
    double max_discrepancy = 0.0;
    bool compared = false;
    bool within_bound = true;
};

// Writes reconstructed.csv and, when comparing, comparison.csv and report.json.
ReconstructSummary run_reconstruct(const RunConfig& cfg, const std::filesystem::path& out);

// Loads cycle.json with its loop sidecar and phase-0 state.
struct LoadedCycle {
    CycleResult result;
    SystemState state;
    SE2 base_pose;
    std::string config_hash;
};
LoadedCycle load_cycle(const std::filesystem::path& cycle_json);

}  // namespace swimcycle
