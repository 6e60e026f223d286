#pragma once

#include <array>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "swimcycle/body.hpp"
#include "swimcycle/fluid.hpp"

namespace swimcycle {

// Peskin four-point cosine kernel, 1/4 (1 + cos(pi r / 2)) on |r| <= 2.
double peskin_cosine(double r);

// Separable 4x4 kernel footprint of one Lagrangian point on one of the two
// staggered face lattices.
struct KernelFootprint {
    int i0 = 0;  // first lattice index (unwrapped)
    int j0 = 0;
    std::array<double, 4> wx{};
    std::array<double, 4> wy{};
};

enum class FaceLattice { U, V };

KernelFootprint kernel_footprint(const FluidGrid& g, FaceLattice lattice, const Vec2& x);

// Fluid velocity at Lagrangian points, sum_g u_g delta_h(x_g - X) dA.
std::vector<Vec2> interpolate(const FluidGrid& g, const FluidState& fluid,
                              std::span<const Vec2> points);

// Force density on the faces (returned in the u/v slots; p is empty):
// f_g = sum_k F_k delta_h(x_g - X_k). Adjoint of `interpolate`.
FluidState spread(const FluidGrid& g, std::span<const Vec2> points, std::span<const Vec2> forces);

// <f, u>_grid = sum_g (f_u u + f_v v) dA.
double grid_inner(const FluidGrid& g, const FluidState& f, const FluidState& u);

struct SystemState {
    BodyState body;
    FluidState fluid;
    double t = 0.0;
};

struct StepperParams {
    double dt = 2.5e-4;
    double coupling_stiffness = 60.0;  // K_p
};

struct EnergyLedger {
    double t = 0.0;
    double E_total = 0.0;
    double E_kin_body = 0.0;
    double E_kin_fluid = 0.0;
    double U_elastic = 0.0;
    double P_body = 0.0;  // shape damping plus tether drag, <= 0
    double P_viscous = 0.0;
    double P_actuation = 0.0;
    double P_sponge = 0.0;

    // Power the ledger predicts for dE_total/dt.
    double predicted_power() const { return P_body + P_viscous + P_actuation + P_sponge; }
};

// Per-step momentum handed from fluid to body (sum of tether impulses) and
// the matching fluid-side total; equal and opposite up to rounding.
struct ExchangeRecord {
    Vec2 body_impulse;
    Vec2 fluid_impulse;
};

// Fractional-step integrator for the coupled body/fluid system.
class Stepper {
public:
    Stepper(const FluidGrid& grid, BodyMesh mesh, ActuationSpec actuation, StepperParams params);

    const FluidGrid& grid() const { return solver_->grid(); }
    const BodyMesh& mesh() const { return mesh_; }
    const ActuationSpec& actuation() const { return actuation_; }
    const StepperParams& params() const { return params_; }
    FluidSolver& solver() { return *solver_; }
    const FluidSolver& solver() const { return *solver_; }

    SystemState rest_state() const;

    // One step of length params().dt.
    void step(SystemState& s);
    void step(SystemState& s, int n) {
        for (int k = 0; k < n; ++k) step(s);
    }

    EnergyLedger energy_ledger(const SystemState& s) const;

    // max_i |interp(u)(X_i) - V_i|
    double no_slip_residual(const SystemState& s) const;

    const ExchangeRecord& last_exchange() const { return exchange_; }

    // Throws OutOfDomain if any body node has left the sponge-free interior.
    void check_domain(const BodyState& body) const;

private:
    void exchange(SystemState& s, FaceLattice lattice);

    std::unique_ptr<FluidSolver> solver_;
    BodyMesh mesh_;
    ActuationSpec actuation_;
    StepperParams params_;
    ExchangeRecord exchange_;
    std::vector<Vec2> force_;
    std::vector<KernelFootprint> fp_;
};

// Whole-cell translation of an entire system state.
SystemState translate_cells(const SystemState& s, const FluidGrid& g, int di, int dj);

// Checkpoint: one JSON header line, the CYF1 fluid block, then "CYB1",
// int32 node count, positions and velocities as float64 pairs.
void write_checkpoint(std::ostream& os, const nlohmann::json& header, const FluidGrid& g,
                      const SystemState& s);
SystemState read_checkpoint(std::istream& is, nlohmann::json& header);

}  // namespace swimcycle
