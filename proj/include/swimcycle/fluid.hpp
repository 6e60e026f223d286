#pragma once

#include <complex>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "swimcycle/se2.hpp"

namespace swimcycle {

struct FluidGrid {
    int nx = 128;
    int ny = 128;
    double Lx = 4.0;
    double Ly = 4.0;
    double mu = 0.02;
    double rho = 1.0;
    int sponge_width = 12;     // cells
    double sponge_rate = 20.0;  // 1 / time

    double dx() const { return Lx / nx; }
    double dy() const { return Ly / ny; }
    double cell_area() const { return dx() * dy(); }
    double nu() const { return mu / rho; }

    // Throws InvalidState on violated invariants.
    void validate() const;
};

// Periodic MAC grid, row-major (index j * nx + i):
//   u(i, j) at (i dx, (j + 1/2) dy), v(i, j) at ((i + 1/2) dx, j dy),
//   p(i, j) at the cell centre.
struct FluidState {
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> p;

    static FluidState zeros(const FluidGrid& g);
    friend bool operator==(const FluidState&, const FluidState&) = default;
};

// Owns FFT plans and scratch buffers; one solver per simulation.
class FluidSolver {
public:
    explicit FluidSolver(const FluidGrid& grid);
    ~FluidSolver();
    FluidSolver(const FluidSolver&) = delete;
    FluidSolver& operator=(const FluidSolver&) = delete;

    const FluidGrid& grid() const { return grid_; }

    // Backward-Euler viscous step (I - dt nu Lap_h) u_new = u_old per component.
    void diffuse(FluidState& s, double dt);
    // Semi-Lagrangian transport of both components along the current field.
    void advect(FluidState& s, double dt);
    // Discrete Helmholtz projection; p receives the potential (divided by
    // `dt` when one is supplied).
    void project(FluidState& s, double dt = 1.0);
    // diffuse followed by project in one spectral pass (the two commute on
    // the periodic grid).
    void diffuse_project(FluidState& s, double dt);
    void apply_sponge(FluidState& s, double dt);
    // Band-limited (Fourier) translation of all fields by a physical offset;
    // commutes with the discrete divergence, so projected fields stay
    // projected. Whole-cell offsets agree with shift_cells up to rounding.
    void translate(FluidState& s, double dx, double dy);
    // Rigid rotation of the flow about the domain centre: the streamfunction
    // is resampled (periodic cubic convolution) and differentiated back, so
    // the result is exactly discretely divergence-free; the mean flow turns
    // as a vector.
    void rotate(FluidState& s, double angle);

    // Cell-centred scalar carried by the velocity in `s`.
    void advect_scalar(std::vector<double>& scalar, const FluidState& s, double dt) const;

    double kinetic_energy(const FluidState& s) const;
    // mu <Lap_h u, u>_h, the viscous power (<= 0).
    double viscous_power(const FluidState& s) const;
    // d/dt of the kinetic energy under the sponge alone (<= 0).
    double sponge_power(const FluidState& s) const;

    std::vector<double> divergence(const FluidState& s) const;
    double max_divergence(const FluidState& s) const;
    double max_speed(const FluidState& s) const;
    // Largest courant number max|vel| dt / dx.
    double courant(const FluidState& s, double dt) const;

    // Sponge weight in [0, 1] at a physical point.
    double sponge_weight(double x, double y) const;
    // True when x lies strictly inside the sponge-free region, including the
    // interpolation kernel support.
    bool in_interior(const Vec2& x) const;

    const std::vector<double>& u_sponge_weights() const { return wu_; }
    const std::vector<double>& v_sponge_weights() const { return wv_; }

private:
    void forward(const double* in, std::complex<double>* out);
    void backward(std::complex<double>* in, double* out);
    void check_finite(const std::vector<double>& f, const char* what) const;

    FluidGrid grid_;
    int nxc_;
    std::vector<double> lap_eig_;  // spectral eigenvalues of the 5-point Laplacian
    std::vector<std::complex<double>> shift_x_, shift_y_;  // (e^{i theta} - 1) / h
    std::vector<double> wu_, wv_;
    std::vector<std::size_t> sponge_idx_;
    std::vector<double> sponge_mu_, sponge_mv_;
    double sponge_dt_ = -1.0;
    std::vector<double> tmp_u_, tmp_v_;
    double* real_buf_ = nullptr;
    std::complex<double>* spec_[3] = {nullptr, nullptr, nullptr};
    // Row r2c / c2r and column c2c passes (batched 1-D transforms).
    void* row_fwd_ = nullptr;
    void* row_bwd_ = nullptr;
    void* col_fwd_ = nullptr;
    void* col_bwd_ = nullptr;
};

// Rolls all fields by whole cells (periodic): entry (i, j) moves to (i+di, j+dj).
FluidState shift_cells(const FluidState& s, const FluidGrid& g, int di, int dj);

// Flat snapshot: magic "CYF1", int32 nx, ny, float64 Lx, Ly, t, then u, v, p
// row-major float64, all little-endian.
void write_fluid_binary(std::ostream& os, const FluidGrid& g, const FluidState& s, double t);
FluidState read_fluid_binary(std::istream& is, FluidGrid& g, double& t);

// Small-grid CSV export: columns i, j, u, v, p.
void write_fluid_csv(std::ostream& os, const FluidGrid& g, const FluidState& s);

}  // namespace swimcycle
