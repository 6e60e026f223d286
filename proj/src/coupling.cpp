#include "swimcycle/coupling.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "swimcycle/error.hpp"

namespace swimcycle {

double peskin_cosine(double r) {
    const double a = std::abs(r);
    if (a >= 2.0) return 0.0;
    return 0.25 * (1.0 + std::cos(0.5 * std::numbers::pi * a));
}

KernelFootprint kernel_footprint(const FluidGrid& g, FaceLattice lattice, const Vec2& x) {
    // Lattice coordinates of the point; U faces sit at (i, j + 1/2), V faces at (i + 1/2, j).
    const double a = x.x / g.dx() - (lattice == FaceLattice::V ? 0.5 : 0.0);
    const double b = x.y / g.dy() - (lattice == FaceLattice::U ? 0.5 : 0.0);
    KernelFootprint fp;
    fp.i0 = static_cast<int>(std::floor(a)) - 1;
    fp.j0 = static_cast<int>(std::floor(b)) - 1;
    for (int q = 0; q < 4; ++q) {
        fp.wx[q] = peskin_cosine(a - (fp.i0 + q));
        fp.wy[q] = peskin_cosine(b - (fp.j0 + q));
    }
    return fp;
}

namespace {

inline int wrap_index(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

double gather(const FluidGrid& g, const std::vector<double>& f, const KernelFootprint& fp) {
    double acc = 0.0;
    for (int qj = 0; qj < 4; ++qj) {
        const int j = wrap_index(fp.j0 + qj, g.ny);
        double row = 0.0;
        for (int qi = 0; qi < 4; ++qi) row += fp.wx[qi] * f[j * g.nx + wrap_index(fp.i0 + qi, g.nx)];
        acc += fp.wy[qj] * row;
    }
    return acc;
}

// Returns the total amount deposited.
double scatter(const FluidGrid& g, std::vector<double>& f, const KernelFootprint& fp,
               double amount) {
    double total = 0.0;
    for (int qj = 0; qj < 4; ++qj) {
        const int j = wrap_index(fp.j0 + qj, g.ny);
        for (int qi = 0; qi < 4; ++qi) {
            const double d = amount * fp.wx[qi] * fp.wy[qj];
            f[j * g.nx + wrap_index(fp.i0 + qi, g.nx)] += d;
            total += d;
        }
    }
    return total;
}

// Sum over the common support of two 1-D kernel rows on a periodic lattice.
double overlap_1d(int a0, const std::array<double, 4>& wa, int b0, const std::array<double, 4>& wb,
                  int n) {
    int shift = wrap_index(b0 - a0, n);
    if (shift > n / 2) shift -= n;
    if (shift <= -4 || shift >= 4) return 0.0;
    double acc = 0.0;
    for (int q = 0; q < 4; ++q) {
        const int r = q - shift;
        if (r >= 0 && r < 4) acc += wa[q] * wb[r];
    }
    return acc;
}

}  // namespace

std::vector<Vec2> interpolate(const FluidGrid& g, const FluidState& fluid,
                              std::span<const Vec2> points) {
    std::vector<Vec2> out(points.size());
    for (std::size_t k = 0; k < points.size(); ++k) {
        out[k].x = gather(g, fluid.u, kernel_footprint(g, FaceLattice::U, points[k]));
        out[k].y = gather(g, fluid.v, kernel_footprint(g, FaceLattice::V, points[k]));
    }
    return out;
}

FluidState spread(const FluidGrid& g, std::span<const Vec2> points, std::span<const Vec2> forces) {
    FluidState f = FluidState::zeros(g);
    f.p.clear();
    const double inv_area = 1.0 / g.cell_area();
    for (std::size_t k = 0; k < points.size(); ++k) {
        scatter(g, f.u, kernel_footprint(g, FaceLattice::U, points[k]), forces[k].x * inv_area);
        scatter(g, f.v, kernel_footprint(g, FaceLattice::V, points[k]), forces[k].y * inv_area);
    }
    return f;
}

double grid_inner(const FluidGrid& g, const FluidState& f, const FluidState& u) {
    double acc = 0.0;
    for (std::size_t k = 0; k < f.u.size(); ++k) acc += f.u[k] * u.u[k] + f.v[k] * u.v[k];
    return acc * g.cell_area();
}

Stepper::Stepper(const FluidGrid& grid, BodyMesh mesh, ActuationSpec actuation,
                 StepperParams params)
    : solver_(std::make_unique<FluidSolver>(grid)),
      mesh_(std::move(mesh)),
      actuation_(actuation),
      params_(params) {
    mesh_.validate();
    if (!(params_.dt > 0.0)) throw InvalidState("stepper: dt must be > 0");
    if (!(params_.coupling_stiffness >= 0.0))
        throw InvalidState("stepper: coupling stiffness must be >= 0");
    if (!(actuation_.period > 0.0)) throw InvalidState("actuation: period must be > 0");
    if (!(actuation_.amplitude >= 0.0)) throw InvalidState("actuation: amplitude must be >= 0");
    const double bound = 0.5 * std::sqrt(mesh_.min_mass() / mesh_.max_stiffness());
    if (params_.dt > bound)
        throw InvalidState("stepper: dt " + std::to_string(params_.dt) +
                           " exceeds elastic stability bound " + std::to_string(bound));
}

SystemState Stepper::rest_state() const {
    SystemState s;
    s.body = swimcycle::rest_state(mesh_);
    const Vec2 centre{0.5 * grid().Lx, 0.5 * grid().Ly};
    for (auto& x : s.body.positions) x += centre;
    s.fluid = FluidState::zeros(grid());
    return s;
}

void Stepper::check_domain(const BodyState& body) const {
    for (std::size_t i = 0; i < body.positions.size(); ++i)
        if (!solver_->in_interior(body.positions[i]))
            throw OutOfDomain("body node " + std::to_string(i) + " left the sponge-free interior");
}

void Stepper::exchange(SystemState& s, FaceLattice lattice) {
    const FluidGrid& g = grid();
    const std::size_t n = mesh_.size();
    auto& field = lattice == FaceLattice::U ? s.fluid.u : s.fluid.v;
    auto comp = [lattice](Vec2& w) -> double& { return lattice == FaceLattice::U ? w.x : w.y; };

    fp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) fp_[k] = kernel_footprint(g, lattice, s.body.positions[k]);

    const double dtk = params_.dt * params_.coupling_stiffness;
    const double inv_area_rho = 1.0 / (g.cell_area() * g.rho);
    Eigen::MatrixXd sys(n, n);
    Eigen::VectorXd slip(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = 0; l <= k; ++l) {
            const double a = overlap_1d(fp_[k].i0, fp_[k].wx, fp_[l].i0, fp_[l].wx, g.nx) *
                             overlap_1d(fp_[k].j0, fp_[k].wy, fp_[l].j0, fp_[l].wy, g.ny) *
                             inv_area_rho;
            sys(k, l) = sys(l, k) = dtk * a;
        }
        sys(k, k) += 1.0 + dtk / mesh_.masses[k];
        slip(k) = gather(g, field, fp_[k]) - comp(s.body.velocities[k]);
    }
    const Eigen::VectorXd slip_new = sys.llt().solve(slip);

    for (std::size_t k = 0; k < n; ++k) {
        const double impulse = dtk * slip_new(k);
        comp(s.body.velocities[k]) += impulse / mesh_.masses[k];
        comp(exchange_.body_impulse) += impulse;
        comp(exchange_.fluid_impulse) +=
            scatter(g, field, fp_[k], -impulse * inv_area_rho) * g.rho * g.cell_area();
    }
}

void Stepper::step(SystemState& s) {
    const double dt = params_.dt;
    const std::size_t n = mesh_.size();
    check_domain(s.body);

    elastic_force_into(mesh_, s.body.positions, actuation_, s.t, force_);
    for (std::size_t i = 0; i < n; ++i) s.body.velocities[i] += (dt / mesh_.masses[i]) * force_[i];
    apply_implicit_shape_damping(mesh_, s.body.positions, s.body.velocities, dt);

    solver_->advect(s.fluid, dt);

    exchange_ = {};
    if (params_.coupling_stiffness > 0.0) {
        exchange(s, FaceLattice::U);
        exchange(s, FaceLattice::V);
    }

    solver_->apply_sponge(s.fluid, dt);
    solver_->diffuse_project(s.fluid, dt);

    for (std::size_t i = 0; i < n; ++i) s.body.positions[i] += dt * s.body.velocities[i];
    s.t += dt;
    check_domain(s.body);
}

EnergyLedger Stepper::energy_ledger(const SystemState& s) const {
    EnergyLedger L;
    L.t = s.t;
    L.E_kin_body = body_kinetic_energy(mesh_, s.body.velocities);
    L.E_kin_fluid = solver_->kinetic_energy(s.fluid);
    L.U_elastic = elastic_energy(mesh_, s.body.positions, ActuationSpec::passive(), s.t);
    L.E_total = L.E_kin_body + L.E_kin_fluid + L.U_elastic;

    const auto fb = shape_dissipation_force(mesh_, s.body);
    double p_body = 0.0;
    for (std::size_t i = 0; i < fb.size(); ++i) p_body += dot(fb[i], s.body.velocities[i]);
    if (params_.coupling_stiffness > 0.0) {
        const auto U = interpolate(grid(), s.fluid, s.body.positions);
        for (std::size_t i = 0; i < U.size(); ++i) {
            const Vec2 d = U[i] - s.body.velocities[i];
            p_body -= params_.coupling_stiffness * dot(d, d);
        }
    }
    L.P_body = p_body;
    L.P_viscous = solver_->viscous_power(s.fluid);
    L.P_sponge = solver_->sponge_power(s.fluid);

    if (!actuation_.is_passive()) {
        const auto f_all = elastic_force(mesh_, s.body.positions, actuation_, s.t);
        const auto f_pas = elastic_force(mesh_, s.body.positions, ActuationSpec::passive(), s.t);
        double p = 0.0;
        for (std::size_t i = 0; i < f_all.size(); ++i)
            p += dot(f_all[i] - f_pas[i], s.body.velocities[i]);
        L.P_actuation = p;
    }
    return L;
}

double Stepper::no_slip_residual(const SystemState& s) const {
    const auto U = interpolate(grid(), s.fluid, s.body.positions);
    double r = 0.0;
    for (std::size_t i = 0; i < U.size(); ++i) r = std::max(r, norm(U[i] - s.body.velocities[i]));
    return r;
}

SystemState translate_cells(const SystemState& s, const FluidGrid& g, int di, int dj) {
    SystemState out;
    out.t = s.t;
    out.fluid = shift_cells(s.fluid, g, di, dj);
    out.body = s.body;
    const Vec2 d{di * g.dx(), dj * g.dy()};
    for (auto& x : out.body.positions) x += d;
    return out;
}

namespace {

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

void write_checkpoint(std::ostream& os, const nlohmann::json& header, const FluidGrid& g,
                      const SystemState& s) {
    os << header.dump() << '\n';
    write_fluid_binary(os, g, s.fluid, s.t);
    os.write("CYB1", 4);
    put<std::int32_t>(os, static_cast<std::int32_t>(s.body.positions.size()));
    for (const auto* arr : {&s.body.positions, &s.body.velocities})
        for (const Vec2& p : *arr) {
            put<double>(os, p.x);
            put<double>(os, p.y);
        }
}

SystemState read_checkpoint(std::istream& is, nlohmann::json& header) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("checkpoint: missing header line");
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: header is not JSON: ") + e.what());
    }
    SystemState s;
    FluidGrid g;
    s.fluid = read_fluid_binary(is, g, s.t);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CYB1", 4) != 0) throw FormatError("checkpoint: bad body magic");
    std::int32_t n = 0;
    is.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!is || n <= 0 || n > 1'000'000) throw FormatError("checkpoint: bad node count");
    for (auto* arr : {&s.body.positions, &s.body.velocities}) {
        arr->resize(n);
        for (Vec2& p : *arr) {
            is.read(reinterpret_cast<char*>(&p.x), sizeof(double));
            is.read(reinterpret_cast<char*>(&p.y), sizeof(double));
        }
    }
    if (!is) throw FormatError("checkpoint: truncated body data");
    return s;
}

}  // namespace swimcycle
