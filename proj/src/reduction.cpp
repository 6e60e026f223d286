#include "swimcycle/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>

#include "swimcycle/error.hpp"

namespace swimcycle {

std::vector<Vec2> make_stencil(const BodyMesh& mesh, const StencilSpec& spec) {
    if (spec.rings < 1 || spec.per_ring < 1 || !(spec.extent > 0.0))
        throw InvalidState("stencil: rings, per_ring and extent must be positive");
    const Vec2 c = mass_centroid(mesh.nodes, mesh.masses);
    double a0 = 0.0, b0 = 0.0;
    for (const Vec2& p : mesh.nodes) {
        a0 = std::max(a0, std::abs(p.x - c.x));
        b0 = std::max(b0, std::abs(p.y - c.y));
    }
    std::vector<Vec2> pts;
    pts.reserve(spec.size());
    for (int r = 1; r <= spec.rings; ++r) {
        const double off = spec.extent * r / spec.rings;
        for (int q = 0; q < spec.per_ring; ++q) {
            const double phi = 2.0 * std::numbers::pi * q / spec.per_ring;
            pts.push_back({(a0 + off) * std::cos(phi), (b0 + off) * std::sin(phi)});
        }
    }
    return pts;
}

Reduction reduce(const SystemState& s, const BodyMesh& mesh, const FluidGrid& grid,
                 std::span<const Vec2> stencil, double period) {
    Alignment al = align(s.body.positions, s.body.velocities, mesh.masses, mesh.nodes);
    Reduction r;
    r.group = al.group;
    r.state.shape = std::move(al.shape);
    r.state.shape_vel = std::move(al.velocities);
    const std::vector<Vec2> lab = act_points(al.group, stencil);
    std::vector<Vec2> u = interpolate(grid, s.fluid, lab);
    const SE2 inv = al.group.inverse();
    for (Vec2& w : u) w = inv.act_vector(w);
    r.state.fluid_samples = std::move(u);
    r.state.t_phase = s.t - period * std::floor(s.t / period);
    return r;
}

namespace {

double rms_diff(const std::vector<Vec2>& a, const std::vector<Vec2>& b, const char* what) {
    if (a.size() != b.size())
        throw ShapeMismatch(std::string("reduced_distance: ") + what + " sizes differ (" +
                            std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        const Vec2 d = a[k] - b[k];
        acc += dot(d, d);
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

}  // namespace

double reduced_distance(const ReducedState& a, const ReducedState& b, const NormWeights& w) {
    const double vscale = w.period / w.length;
    return w.w_shape * rms_diff(a.shape, b.shape, "shape") / w.length +
           w.w_vel * rms_diff(a.shape_vel, b.shape_vel, "shape_vel") * vscale +
           w.w_fluid * rms_diff(a.fluid_samples, b.fluid_samples, "fluid_samples") * vscale;
}

SE2 holonomy(const SE2& group_start, const SE2& group_end) {
    return compose(group_end, group_start.inverse());
}

BodyState reconstruct(const CycleResult& cycle, const SE2& base_pose, int n_periods, double t) {
    const int K = static_cast<int>(cycle.loop.size());
    if (K == 0) throw InvalidState("reconstruct: empty loop");
    const double T = cycle.period;
    if (!std::isfinite(t) || t < 0.0 || t >= n_periods * T)
        throw PhaseOutOfRange("reconstruct: t = " + std::to_string(t) + " outside [0, " +
                              std::to_string(n_periods * T) + ")");
    const int n = static_cast<int>(std::floor(t / T));
    const double tau = t - n * T;
    const double q = tau / T * K;
    const int k = std::min(static_cast<int>(std::floor(q)), K - 1);
    const double a = q - k;

    const SE2 frame = compose(base_pose, power(cycle.holonomy, n));
    const LoopSnapshot& s0 = cycle.loop[k];
    const LoopSnapshot& s1 = cycle.loop[(k + 1) % K];
    const SE2 g0 = compose(frame, s0.pose);
    // The snapshot after the last one is the first, advanced by z.
    const SE2 g1 = k + 1 == K ? compose(frame, compose(cycle.holonomy, s1.pose))
                              : compose(frame, s1.pose);

    const std::size_t N = s0.state.shape.size();
    BodyState out;
    out.positions.resize(N);
    out.velocities.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        const Vec2 x0 = g0.act_point(s0.state.shape[i]);
        const Vec2 v0 = g0.act_vector(s0.state.shape_vel[i]);
        if (a == 0.0) {
            out.positions[i] = x0;
            out.velocities[i] = v0;
            continue;
        }
        const Vec2 x1 = g1.act_point(s1.state.shape[i]);
        const Vec2 v1 = g1.act_vector(s1.state.shape_vel[i]);
        out.positions[i] = (1.0 - a) * x0 + a * x1;
        out.velocities[i] = (1.0 - a) * v0 + a * v1;
    }
    return out;
}

StrideSummary stride(const SE2& z) { return {std::hypot(z.tx, z.ty), std::abs(z.theta)}; }

nlohmann::json cycle_to_json(const CycleResult& c, const std::string& sidecar) {
    const StrideSummary st = stride(c.holonomy);
    return {
        {"holonomy", c.holonomy},
        {"stride", {{"translation", st.translation}, {"rotation", st.rotation}}},
        {"residual", c.residual},
        {"floquet", c.floquet},
        {"contraction", c.contraction},
        {"iterations", c.iterations},
        {"stable", c.stable},
        {"period", c.period},
        {"residual_history", c.residual_history},
        {"loop", {{"file", sidecar}, {"snapshots", c.loop.size()}}},
    };
}

CycleResult cycle_from_json(const nlohmann::json& j) {
    CycleResult c;
    try {
        c.holonomy = j.at("holonomy").get<SE2>();
        c.residual = j.at("residual").get<double>();
        c.floquet = j.at("floquet").get<std::vector<double>>();
        c.contraction = j.at("contraction").get<double>();
        c.iterations = j.at("iterations").get<int>();
        c.stable = j.at("stable").get<bool>();
        c.period = j.at("period").get<double>();
        c.residual_history = j.at("residual_history").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("cycle json: ") + e.what());
    }
    return c;
}

namespace {

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw FormatError("loop file: truncated");
    return v;
}

void put_points(std::ostream& os, const std::vector<Vec2>& pts) {
    for (const Vec2& p : pts) {
        put(os, p.x);
        put(os, p.y);
    }
}

std::vector<Vec2> get_points(std::istream& is, std::int32_t n) {
    std::vector<Vec2> pts(n);
    for (Vec2& p : pts) {
        p.x = get<double>(is);
        p.y = get<double>(is);
    }
    return pts;
}

}  // namespace

void write_loop_binary(std::ostream& os, const std::vector<LoopSnapshot>& loop,
                       std::uint64_t config_hash) {
    os.write("CYL1", 4);
    put(os, config_hash);
    const std::int32_t K = static_cast<std::int32_t>(loop.size());
    const std::int32_t N = K ? static_cast<std::int32_t>(loop[0].state.shape.size()) : 0;
    const std::int32_t M = K ? static_cast<std::int32_t>(loop[0].state.fluid_samples.size()) : 0;
    put(os, K);
    put(os, N);
    put(os, M);
    for (const LoopSnapshot& s : loop) {
        if (static_cast<std::int32_t>(s.state.shape.size()) != N ||
            static_cast<std::int32_t>(s.state.shape_vel.size()) != N ||
            static_cast<std::int32_t>(s.state.fluid_samples.size()) != M)
            throw ShapeMismatch("loop file: snapshots differ in size");
        put(os, s.state.t_phase);
        put(os, s.pose.theta);
        put(os, s.pose.tx);
        put(os, s.pose.ty);
        put_points(os, s.state.shape);
        put_points(os, s.state.shape_vel);
        put_points(os, s.state.fluid_samples);
    }
}

std::vector<LoopSnapshot> read_loop_binary(std::istream& is, std::uint64_t* config_hash) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CYL1", 4) != 0) throw FormatError("loop file: bad magic");
    const auto hash = get<std::uint64_t>(is);
    if (config_hash) *config_hash = hash;
    const auto K = get<std::int32_t>(is);
    const auto N = get<std::int32_t>(is);
    const auto M = get<std::int32_t>(is);
    if (K < 0 || N < 0 || M < 0 || K > 100000 || N > 1000000 || M > 1000000)
        throw FormatError("loop file: bad dimensions");
    std::vector<LoopSnapshot> loop(K);
    for (LoopSnapshot& s : loop) {
        s.state.t_phase = get<double>(is);
        s.pose.theta = get<double>(is);
        s.pose.tx = get<double>(is);
        s.pose.ty = get<double>(is);
        s.state.shape = get_points(is, N);
        s.state.shape_vel = get_points(is, N);
        s.state.fluid_samples = get_points(is, M);
    }
    return loop;
}

}  // namespace swimcycle
