#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "swimcycle/coupling.hpp"

namespace swimcycle {

// Body-frame sample points: `rings` confocal-ish ellipses around the
// template, `per_ring` points each, the outermost `extent` beyond the body.
struct StencilSpec {
    int rings = 8;
    int per_ring = 32;
    double extent = 1.0;

    int size() const { return rings * per_ring; }
};

std::vector<Vec2> make_stencil(const BodyMesh& mesh, const StencilSpec& spec);

// A point of the doubly reduced space: shape and shape velocity in the
// aligned frame, fluid velocity at the body-frame stencil (rotated into the
// body frame), and the actuation phase.
struct ReducedState {
    std::vector<Vec2> shape;
    std::vector<Vec2> shape_vel;
    std::vector<Vec2> fluid_samples;
    double t_phase = 0.0;

    friend bool operator==(const ReducedState&, const ReducedState&) = default;
};

struct Reduction {
    ReducedState state;
    SE2 group;  // lab pose g with positions = g * shape
};

Reduction reduce(const SystemState& s, const BodyMesh& mesh, const FluidGrid& grid,
                 std::span<const Vec2> stencil, double period);

struct NormWeights {
    double length = 1.0;  // body length
    double period = 1.0;
    double w_shape = 1.0;
    double w_vel = 1.0;
    double w_fluid = 1.0;
};

// w_s rms(dshape)/L + w_v rms(dvel) T/L + w_f rms(dfluid) T/L
double reduced_distance(const ReducedState& a, const ReducedState& b, const NormWeights& w = {});

// z = end * start^{-1}
SE2 holonomy(const SE2& group_start, const SE2& group_end);

// One stored phase of a cycle: the reduced state and the pose relative to
// the phase-0 frame.
struct LoopSnapshot {
    ReducedState state;
    SE2 pose;
};

struct CycleResult {
    std::vector<LoopSnapshot> loop;  // K phases, loop[0].pose = identity
    SE2 holonomy;                    // per period, in the phase-0 frame
    double residual = 0.0;
    std::vector<double> floquet;
    double contraction = 0.0;  // empirical residual decay factor
    int iterations = 0;
    bool stable = false;
    double period = 1.0;
    std::vector<double> residual_history;
};

// body positions and velocities of the loop at time t, placed by
// base * z^floor(t/T); snapshots are interpolated linearly in phase.
BodyState reconstruct(const CycleResult& cycle, const SE2& base_pose, int n_periods, double t);

// Translation length and rotation per period.
struct StrideSummary {
    double translation = 0.0;
    double rotation = 0.0;
};
StrideSummary stride(const SE2& z);

// JSON carries everything but the loop, which goes to a binary sidecar:
// "CYL1", uint64 config hash, int32 K, N, M, then per snapshot float64
// t_phase, theta, tx, ty, shape, shape_vel, fluid_samples as (x, y) pairs.
nlohmann::json cycle_to_json(const CycleResult& c, const std::string& sidecar);
CycleResult cycle_from_json(const nlohmann::json& j);
void write_loop_binary(std::ostream& os, const std::vector<LoopSnapshot>& loop,
                       std::uint64_t config_hash = 0);
std::vector<LoopSnapshot> read_loop_binary(std::istream& is, std::uint64_t* config_hash = nullptr);

}  // namespace swimcycle
