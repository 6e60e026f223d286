#include "swimcycle/body.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "swimcycle/error.hpp"

namespace swimcycle {

double BodyMesh::mean_mass() const {
    return std::accumulate(masses.begin(), masses.end(), 0.0) / static_cast<double>(masses.size());
}

double BodyMesh::min_mass() const { return *std::min_element(masses.begin(), masses.end()); }

double BodyMesh::max_stiffness() const {
    double k = 0.0;
    for (const auto& sp : stretch) k = std::max(k, sp.stiffness);
    for (const auto& bs : bend) {
        // Bending stiffness acts through 1/|edge|^2 lever arms.
        const double l1 = norm(nodes[bs.j] - nodes[bs.i]);
        const double l2 = norm(nodes[bs.k] - nodes[bs.j]);
        k = std::max(k, bs.stiffness / (std::min(l1, l2) * std::min(l1, l2)));
    }
    return k;
}

namespace {

int find_root(std::vector<int>& parent, int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
}

}  // namespace

void BodyMesh::validate() const {
    const int n = static_cast<int>(nodes.size());
    if (n < 3) throw InvalidState("body: need at least 3 nodes");
    if (masses.size() != nodes.size()) throw InvalidState("body: masses/nodes size mismatch");
    for (double m : masses)
        if (!(m > 0.0)) throw InvalidState("body: node masses must be > 0");
    if (!(damping >= 0.0)) throw InvalidState("body: damping must be >= 0");

    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto in_range = [n](int i) { return i >= 0 && i < n; };
    for (const auto& sp : stretch) {
        if (!in_range(sp.i) || !in_range(sp.j) || sp.i == sp.j)
            throw InvalidState("body: stretch spring has invalid node indices");
        if (!(sp.rest > 0.0)) throw InvalidState("body: stretch rest length must be > 0");
        if (!(sp.stiffness > 0.0)) throw InvalidState("body: stretch stiffness must be > 0");
        parent[find_root(parent, sp.i)] = find_root(parent, sp.j);
    }
    for (const auto& bs : bend) {
        if (!in_range(bs.i) || !in_range(bs.j) || !in_range(bs.k))
            throw InvalidState("body: bend spring has invalid node indices");
        if (!(bs.stiffness > 0.0)) throw InvalidState("body: bend stiffness must be > 0");
    }
    for (int i = 0; i < n; ++i)
        if (find_root(parent, i) != find_root(parent, 0))
            throw InvalidState("body: spring graph is not connected");

    double area2 = 0.0;
    for (int i = 2; i < n; ++i)
        area2 = std::max(area2, std::abs(cross(nodes[1] - nodes[0], nodes[i] - nodes[0])));
    if (!(area2 > 0.0)) throw InvalidState("body: reference nodes are collinear");

    double scale = 0.0;
    for (const auto& sp : stretch) scale += sp.stiffness * sp.rest * sp.rest;
    if (elastic_energy(*this, nodes, ActuationSpec::passive(), 0.0) > 1e-12 * scale)
        throw InvalidState("body: reference shape is not the zero of the passive energy");
}

BodyMesh make_fish_filament(const FishParams& p) {
    if (p.n_nodes < 6 || p.n_nodes % 2 != 0)
        throw InvalidState("fish_filament: n_nodes must be even and >= 6");
    const int per_row = p.n_nodes / 2;
    const double spacing = p.length / (per_row - 1);

    BodyMesh mesh;
    mesh.damping = p.damping;
    mesh.nodes.resize(p.n_nodes);
    mesh.masses.assign(p.n_nodes, p.node_mass);
    auto top = [](int k) { return k; };
    auto bottom = [per_row](int k) { return per_row + k; };
    for (int k = 0; k < per_row; ++k) {
        const double x = -0.5 * p.length + k * spacing;
        mesh.nodes[top(k)] = {x, 0.5 * p.width};
        mesh.nodes[bottom(k)] = {x, -0.5 * p.width};
    }

    auto add_stretch = [&](int i, int j, double s, double lateral) {
        mesh.stretch.push_back({i, j, norm(mesh.nodes[j] - mesh.nodes[i]), p.k_stretch, s, lateral});
    };
    for (int k = 0; k < per_row; ++k) {
        const double s = static_cast<double>(k) / (per_row - 1);
        add_stretch(top(k), bottom(k), s, 0.0);
        if (k + 1 == per_row) continue;
        const double s_mid = (k + 0.5) / (per_row - 1);
        add_stretch(top(k), top(k + 1), s_mid, 0.5 * p.width);
        add_stretch(bottom(k), bottom(k + 1), s_mid, -0.5 * p.width);
        add_stretch(top(k), bottom(k + 1), s_mid, 0.0);
        add_stretch(bottom(k), top(k + 1), s_mid, 0.0);
    }
    for (int k = 1; k + 1 < per_row; ++k) {
        const double s = static_cast<double>(k) / (per_row - 1);
        mesh.bend.push_back({top(k - 1), top(k), top(k + 1), 0.0, p.k_bend, s});
        mesh.bend.push_back({bottom(k - 1), bottom(k), bottom(k + 1), 0.0, p.k_bend, s});
    }
    mesh.validate();
    return mesh;
}

BodyState rest_state(const BodyMesh& mesh) {
    return {mesh.nodes, std::vector<Vec2>(mesh.size())};
}

std::string to_string(WavePattern p) {
    return p == WavePattern::Traveling ? "traveling" : "standing";
}

WavePattern wave_pattern_from_string(const std::string& name) {
    if (name == "traveling") return WavePattern::Traveling;
    if (name == "standing") return WavePattern::Standing;
    throw InvalidState("unknown actuation pattern '" + name + "'");
}

double ActuationSpec::modulation(double s, double t) const {
    if (amplitude == 0.0) return 0.0;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    // Phase reduced modulo one period so that f(t + T) == f(t) bitwise.
    const double phase = t / period - std::floor(t / period);
    if (pattern == WavePattern::Traveling)
        return amplitude * std::sin(two_pi * (phase - wavenumber * s));
    return amplitude * std::cos(two_pi * phase) * std::sin(two_pi * wavenumber * s);
}

namespace {

double turning_angle(const Vec2& e1, const Vec2& e2) { return std::atan2(cross(e1, e2), dot(e1, e2)); }

void check_edge(double length) {
    if (!(length > 0.0) || !std::isfinite(length))
        throw InvalidState("body: spring length is zero or non-finite");
}

}  // namespace

double elastic_energy(const BodyMesh& mesh, std::span<const Vec2> x, const ActuationSpec& act,
                      double t) {
    double e = 0.0;
    for (const auto& sp : mesh.stretch) {
        const double len = norm(x[sp.j] - x[sp.i]);
        check_edge(len);
        const double rest = sp.rest - sp.lateral * act.modulation(sp.s, t);
        e += 0.5 * sp.stiffness * (len - rest) * (len - rest);
    }
    for (const auto& bs : mesh.bend) {
        const Vec2 e1 = x[bs.j] - x[bs.i];
        const Vec2 e2 = x[bs.k] - x[bs.j];
        check_edge(norm(e1));
        check_edge(norm(e2));
        const double d = wrap_angle(turning_angle(e1, e2) - bs.rest_angle - act.modulation(bs.s, t));
        e += 0.5 * bs.stiffness * d * d;
    }
    return e;
}

void elastic_force_into(const BodyMesh& mesh, std::span<const Vec2> x, const ActuationSpec& act,
                        double t, std::vector<Vec2>& f) {
    f.assign(mesh.size(), Vec2{});
    for (const auto& sp : mesh.stretch) {
        const Vec2 d = x[sp.j] - x[sp.i];
        const double len = norm(d);
        check_edge(len);
        const double rest = sp.rest - sp.lateral * act.modulation(sp.s, t);
        const Vec2 g = (sp.stiffness * (len - rest) / len) * d;
        f[sp.i] += g;
        f[sp.j] -= g;
    }
    for (const auto& bs : mesh.bend) {
        const Vec2 e1 = x[bs.j] - x[bs.i];
        const Vec2 e2 = x[bs.k] - x[bs.j];
        const double l1 = dot(e1, e1), l2 = dot(e2, e2);
        check_edge(l1);
        check_edge(l2);
        const double d = wrap_angle(turning_angle(e1, e2) - bs.rest_angle - act.modulation(bs.s, t));
        const double torque = bs.stiffness * d;
        const Vec2 gi = (1.0 / l1) * perp(e1);
        const Vec2 gk = (1.0 / l2) * perp(e2);
        f[bs.i] -= torque * gi;
        f[bs.k] -= torque * gk;
        f[bs.j] += torque * (gi + gk);
    }
}

std::vector<Vec2> elastic_force(const BodyMesh& mesh, std::span<const Vec2> x,
                                const ActuationSpec& act, double t) {
    std::vector<Vec2> f;
    elastic_force_into(mesh, x, act, t, f);
    return f;
}

RigidFit rigid_fit(std::span<const Vec2> x, std::span<const Vec2> v, std::span<const double> m) {
    RigidFit fit;
    fit.centroid = mass_centroid(x, m);
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        fit.velocity += m[i] * v[i];
        total += m[i];
    }
    fit.velocity *= 1.0 / total;
    double ang = 0.0, inertia = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const Vec2 r = x[i] - fit.centroid;
        ang += m[i] * cross(r, v[i] - fit.velocity);
        inertia += m[i] * dot(r, r);
    }
    fit.omega = inertia > 0.0 ? ang / inertia : 0.0;
    return fit;
}

std::vector<Vec2> shape_projection(std::span<const Vec2> x, std::span<const Vec2> v,
                                   std::span<const double> m) {
    const RigidFit fit = rigid_fit(x, v, m);
    std::vector<Vec2> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = v[i] - fit.at(x[i]);
    return out;
}

std::vector<Vec2> shape_dissipation_force(const BodyMesh& mesh, const BodyState& state) {
    std::vector<Vec2> f = shape_projection(state.positions, state.velocities, mesh.masses);
    const double m_mean = mesh.mean_mass();
    for (std::size_t i = 0; i < f.size(); ++i) f[i] *= -mesh.damping * mesh.masses[i] / m_mean;
    return f;
}

void apply_implicit_shape_damping(const BodyMesh& mesh, std::span<const Vec2> x,
                                  std::span<Vec2> v, double dt) {
    if (mesh.damping == 0.0) return;
    // (I + a P)^{-1} = I - a/(1+a) P since P is an M-orthogonal projector.
    const double a = dt * mesh.damping / mesh.mean_mass();
    const double shrink = a / (1.0 + a);
    const RigidFit fit = rigid_fit(x, v, mesh.masses);
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2 rigid = fit.at(x[i]);
        v[i] -= shrink * (v[i] - rigid);
    }
}

double body_kinetic_energy(const BodyMesh& mesh, std::span<const Vec2> v) {
    double e = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) e += 0.5 * mesh.masses[i] * dot(v[i], v[i]);
    return e;
}

}  // namespace swimcycle
