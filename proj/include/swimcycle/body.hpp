#pragma once

#include <span>
#include <string>
#include <vector>

#include "swimcycle/se2.hpp"

namespace swimcycle {

// Stretch spring between nodes i and j. `s` is the arclength fraction of the
// spring midpoint and `lateral` the signed offset of the spring's row from
// the body centreline (0 for rungs and diagonals); both only matter when the
// spring is driven by the muscle pattern.
struct StretchSpring {
    int i = 0;
    int j = 0;
    double rest = 1.0;
    double stiffness = 1.0;
    double s = 0.0;
    double lateral = 0.0;
};

// Turning angle at j along i -> j -> k.
struct BendSpring {
    int i = 0;
    int j = 0;
    int k = 0;
    double rest_angle = 0.0;
    double stiffness = 1.0;
    double s = 0.0;
};

struct BodyMesh {
    std::vector<Vec2> nodes;      // reference shape, the isolated energy minimum
    std::vector<double> masses;
    std::vector<StretchSpring> stretch;
    std::vector<BendSpring> bend;
    double damping = 0.0;

    std::size_t size() const { return nodes.size(); }
    double mean_mass() const;
    double min_mass() const;
    double max_stiffness() const;

    // Throws InvalidState naming the first violated invariant.
    void validate() const;
};

struct FishParams {
    int n_nodes = 40;
    double length = 1.0;
    double width = 0.06;
    double k_stretch = 500.0;
    double k_bend = 4.0;
    double damping = 0.2;
    double node_mass = 0.0025;
};

// Double-row strip centred on the origin along the x axis. Row nodes carry
// arclength fraction s = 0 at x = -length/2.
BodyMesh make_fish_filament(const FishParams& params);

struct BodyState {
    std::vector<Vec2> positions;
    std::vector<Vec2> velocities;
};

BodyState rest_state(const BodyMesh& mesh);

enum class WavePattern { Traveling, Standing };

std::string to_string(WavePattern p);
WavePattern wave_pattern_from_string(const std::string& name);

// Periodic muscle pattern. f(s, t) is the modulation of the turning angle
// at arclength fraction s; rows shorten or lengthen consistently with it.
struct ActuationSpec {
    double amplitude = 0.0;
    double period = 1.0;
    int wavenumber = 1;
    WavePattern pattern = WavePattern::Traveling;

    static ActuationSpec passive() { return {}; }
    bool is_passive() const { return amplitude == 0.0; }
    double modulation(double s, double t) const;
};

// U(b) + U~(t, [b]); zero at the reference shape when passive.
double elastic_energy(const BodyMesh& mesh, std::span<const Vec2> positions,
                      const ActuationSpec& act, double t);

// -grad(U + U~) with respect to node positions.
std::vector<Vec2> elastic_force(const BodyMesh& mesh, std::span<const Vec2> positions,
                                const ActuationSpec& act, double t);

// Writes into `out` (resized) to avoid allocation in the stepper.
void elastic_force_into(const BodyMesh& mesh, std::span<const Vec2> positions,
                        const ActuationSpec& act, double t, std::vector<Vec2>& out);

struct RigidFit {
    Vec2 centroid;
    Vec2 velocity;
    double omega = 0.0;

    Vec2 at(const Vec2& x) const { return velocity + omega * perp(x - centroid); }
};

// Mass-weighted least-squares rigid velocity field.
RigidFit rigid_fit(std::span<const Vec2> positions, std::span<const Vec2> velocities,
                   std::span<const double> masses);

// v - v_rigid: the mass-orthogonal projection onto the shape complement.
std::vector<Vec2> shape_projection(std::span<const Vec2> positions,
                                   std::span<const Vec2> velocities,
                                   std::span<const double> masses);

// F_B = -c (m_i / m_mean) (P v)_i. Kernel is exactly the rigid velocities.
std::vector<Vec2> shape_dissipation_force(const BodyMesh& mesh, const BodyState& state);

// Solves m v_new = m v + dt F_B(v_new) in closed form.
void apply_implicit_shape_damping(const BodyMesh& mesh, std::span<const Vec2> positions,
                                  std::span<Vec2> velocities, double dt);

double body_kinetic_energy(const BodyMesh& mesh, std::span<const Vec2> velocities);

}  // namespace swimcycle
