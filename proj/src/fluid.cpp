#include "swimcycle/fluid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>

#include "swimcycle/error.hpp"

namespace swimcycle {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

inline int wrap_index(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

}  // namespace

void FluidGrid::validate() const {
    if (nx < 16 || ny < 16 || nx % 2 != 0 || ny % 2 != 0)
        throw InvalidState("grid: nx, ny must be even and >= 16");
    if (!(Lx > 0.0) || !(Ly > 0.0)) throw InvalidState("grid: Lx, Ly must be > 0");
    if (std::abs(Lx / nx - Ly / ny) > 1e-12 * (Lx / nx))
        throw InvalidState("grid: cells must be square (Lx/nx == Ly/ny)");
    if (!(mu >= 0.0)) throw InvalidState("grid: mu must be >= 0");
    if (!(rho > 0.0)) throw InvalidState("grid: rho must be > 0");
    if (sponge_width < 0 || 2 * sponge_width >= std::min(nx, ny))
        throw InvalidState("grid: sponge_width out of range");
    if (!(sponge_rate >= 0.0)) throw InvalidState("grid: sponge_rate must be >= 0");
}

FluidState FluidState::zeros(const FluidGrid& g) {
    const std::size_t n = static_cast<std::size_t>(g.nx) * g.ny;
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
}

FluidSolver::FluidSolver(const FluidGrid& grid) : grid_(grid), nxc_(grid.nx / 2 + 1) {
    grid_.validate();
    const int nx = grid_.nx, ny = grid_.ny;
    const double dx = grid_.dx(), dy = grid_.dy();

    lap_eig_.resize(static_cast<std::size_t>(ny) * nxc_);
    for (int l = 0; l < ny; ++l)
        for (int k = 0; k < nxc_; ++k) {
            const double ax = 2.0 * (1.0 - std::cos(2.0 * std::numbers::pi * k / nx)) / (dx * dx);
            const double ay = 2.0 * (1.0 - std::cos(2.0 * std::numbers::pi * l / ny)) / (dy * dy);
            lap_eig_[static_cast<std::size_t>(l) * nxc_ + k] = -(ax + ay);
        }
    shift_x_.resize(nxc_);
    shift_y_.resize(ny);
    for (int k = 0; k < nxc_; ++k)
        shift_x_[k] = (std::polar(1.0, 2.0 * std::numbers::pi * k / nx) - 1.0) / dx;
    for (int l = 0; l < ny; ++l)
        shift_y_[l] = (std::polar(1.0, 2.0 * std::numbers::pi * l / ny) - 1.0) / dy;

    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    wu_.resize(n);
    wv_.resize(n);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            wu_[j * nx + i] = sponge_weight(i * dx, (j + 0.5) * dy);
            wv_[j * nx + i] = sponge_weight((i + 0.5) * dx, j * dy);
        }
    for (std::size_t k = 0; k < n; ++k)
        if (wu_[k] > 0.0 || wv_[k] > 0.0) sponge_idx_.push_back(k);
    tmp_u_.resize(n);
    tmp_v_.resize(n);

    real_buf_ = fftw_alloc_real(n);
    for (auto& b : spec_)
        b = reinterpret_cast<std::complex<double>*>(
            fftw_alloc_complex(static_cast<std::size_t>(ny) * nxc_));
    auto* c = reinterpret_cast<fftw_complex*>(spec_[0]);
    const int len_x[1] = {nx};
    const int len_y[1] = {ny};
    std::lock_guard lock(plan_mutex());
    row_fwd_ = fftw_plan_many_dft_r2c(1, len_x, ny, real_buf_, nullptr, 1, nx, c, nullptr, 1, nxc_,
                                      FFTW_ESTIMATE);
    row_bwd_ = fftw_plan_many_dft_c2r(1, len_x, ny, c, nullptr, 1, nxc_, real_buf_, nullptr, 1, nx,
                                      FFTW_ESTIMATE);
    col_fwd_ = fftw_plan_many_dft(1, len_y, nxc_, c, nullptr, nxc_, 1, c, nullptr, nxc_, 1,
                                  FFTW_FORWARD, FFTW_ESTIMATE);
    col_bwd_ = fftw_plan_many_dft(1, len_y, nxc_, c, nullptr, nxc_, 1, c, nullptr, nxc_, 1,
                                  FFTW_BACKWARD, FFTW_ESTIMATE);
}

FluidSolver::~FluidSolver() {
    std::lock_guard lock(plan_mutex());
    for (void* p : {row_fwd_, row_bwd_, col_fwd_, col_bwd_}) fftw_destroy_plan(static_cast<fftw_plan>(p));
    fftw_free(real_buf_);
    for (auto* b : spec_) fftw_free(b);
}

void FluidSolver::forward(const double* in, std::complex<double>* out) {
    std::copy(in, in + static_cast<std::size_t>(grid_.nx) * grid_.ny, real_buf_);
    auto* c = reinterpret_cast<fftw_complex*>(out);
    fftw_execute_dft_r2c(static_cast<fftw_plan>(row_fwd_), real_buf_, c);
    fftw_execute_dft(static_cast<fftw_plan>(col_fwd_), c, c);
}

void FluidSolver::backward(std::complex<double>* in, double* out) {
    // Destroys `in`.
    auto* c = reinterpret_cast<fftw_complex*>(in);
    fftw_execute_dft(static_cast<fftw_plan>(col_bwd_), c, c);
    fftw_execute_dft_c2r(static_cast<fftw_plan>(row_bwd_), c, real_buf_);
    const std::size_t n = static_cast<std::size_t>(grid_.nx) * grid_.ny;
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = real_buf_[k] * scale;
}

void FluidSolver::check_finite(const std::vector<double>& f, const char* what) const {
    double acc = 0.0;
    for (double x : f) acc += x * 0.0;  // NaN/inf propagate
    if (acc != 0.0 || std::isnan(acc))
        throw SolverDiverged(std::string(what) + ": non-finite velocity after solve");
}

void FluidSolver::diffuse(FluidState& s, double dt) {
    if (!(dt > 0.0)) throw InvalidState("diffuse: dt must be > 0");
    const double a = dt * grid_.nu();
    const std::size_t ns = lap_eig_.size();
    for (std::vector<double>* f : {&s.u, &s.v}) {
        forward(f->data(), spec_[0]);
        for (std::size_t k = 0; k < ns; ++k) spec_[0][k] /= (1.0 - a * lap_eig_[k]);
        backward(spec_[0], f->data());
        check_finite(*f, "diffuse");
    }
}

void FluidSolver::diffuse_project(FluidState& s, double dt) {
    if (!(dt > 0.0)) throw InvalidState("diffuse_project: dt must be > 0");
    const double a = dt * grid_.nu();
    std::complex<double>* U = spec_[0];
    std::complex<double>* V = spec_[1];
    std::complex<double>* P = spec_[2];
    forward(s.u.data(), U);
    forward(s.v.data(), V);
    const double inv_dt = 1.0 / dt;
    for (int l = 0; l < grid_.ny; ++l)
        for (int k = 0; k < nxc_; ++k) {
            const std::size_t q = static_cast<std::size_t>(l) * nxc_ + k;
            const double m = 1.0 / (1.0 - a * lap_eig_[q]);
            U[q] *= m;
            V[q] *= m;
            if (q == 0) {
                P[q] = 0.0;
                continue;
            }
            const std::complex<double> ax = shift_x_[k], ay = shift_y_[l];
            const std::complex<double> phi = (ax * U[q] + ay * V[q]) / lap_eig_[q];
            U[q] += std::conj(ax) * phi;
            V[q] += std::conj(ay) * phi;
            P[q] = phi * inv_dt;
        }
    backward(U, s.u.data());
    backward(V, s.v.data());
    s.p.resize(s.u.size());
    backward(P, s.p.data());
    check_finite(s.u, "diffuse_project");
    check_finite(s.v, "diffuse_project");
}

double FluidSolver::max_speed(const FluidState& s) const {
    double m = 0.0;
    for (double x : s.u) m = std::max(m, std::abs(x));
    for (double x : s.v) m = std::max(m, std::abs(x));
    return m;
}

double FluidSolver::courant(const FluidState& s, double dt) const {
    return max_speed(s) * dt / std::min(grid_.dx(), grid_.dy());
}

namespace {

// Bilinear sample of a periodic lattice field at lattice coordinates
// (i + di, j + dj), with (di, dj) a displacement in cell units.
inline double sample(const std::vector<double>& f, int nx, int ny, int i, int j, double di,
                     double dj) {
    const double fi = std::floor(di), fj = std::floor(dj);
    const double ax = di - fi, ay = dj - fj;
    // |displacement| is below one cell under the CFL bound; wrap cheaply.
    int i0 = i + static_cast<int>(fi);
    int j0 = j + static_cast<int>(fj);
    if (i0 < 0 || i0 >= nx) i0 = wrap_index(i0, nx);
    if (j0 < 0 || j0 >= ny) j0 = wrap_index(j0, ny);
    const int i1 = i0 + 1 == nx ? 0 : i0 + 1;
    const int j1 = j0 + 1 == ny ? 0 : j0 + 1;
    const double f00 = f[j0 * nx + i0], f10 = f[j0 * nx + i1];
    const double f01 = f[j1 * nx + i0], f11 = f[j1 * nx + i1];
    return (1.0 - ay) * ((1.0 - ax) * f00 + ax * f10) + ay * ((1.0 - ax) * f01 + ax * f11);
}

}  // namespace

namespace {

// Bilinear sample for a displacement of less than one cell in each direction
// (guaranteed by the CFL check); `rows` are the wrapped row offsets.
inline double sample_near(const double* f, int nx, int i, int j, int ny, double di, double dj) {
    const int oi = di < 0.0 ? -1 : 0;
    const int oj = dj < 0.0 ? -1 : 0;
    const double ax = di - oi, ay = dj - oj;
    int i0 = i + oi, j0 = j + oj;
    if (i0 < 0) i0 += nx;
    if (j0 < 0) j0 += ny;
    const int i1 = i0 + 1 == nx ? 0 : i0 + 1;
    const int j1 = j0 + 1 == ny ? 0 : j0 + 1;
    const double* r0 = f + static_cast<std::size_t>(j0) * nx;
    const double* r1 = f + static_cast<std::size_t>(j1) * nx;
    return (1.0 - ay) * ((1.0 - ax) * r0[i0] + ax * r0[i1]) + ay * ((1.0 - ax) * r1[i0] + ax * r1[i1]);
}

}  // namespace

void FluidSolver::translate(FluidState& s, double dx, double dy) {
    const int nx = grid_.nx, ny = grid_.ny;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    // Nyquist modes are real on the grid; a cosine factor keeps them real.
    std::vector<std::complex<double>> fx(nxc_), fy(ny);
    for (int k = 0; k < nxc_; ++k) {
        const double w = two_pi * k / grid_.Lx * dx;
        fx[k] = 2 * k == nx ? std::complex<double>(std::cos(w), 0.0) : std::polar(1.0, -w);
    }
    for (int l = 0; l < ny; ++l) {
        const int ls = l <= ny / 2 ? l : l - ny;
        const double w = two_pi * ls / grid_.Ly * dy;
        fy[l] = 2 * l == ny ? std::complex<double>(std::cos(w), 0.0) : std::polar(1.0, -w);
    }
    for (std::vector<double>* f : {&s.u, &s.v, &s.p}) {
        if (f->empty()) continue;
        forward(f->data(), spec_[0]);
        for (int l = 0; l < ny; ++l)
            for (int k = 0; k < nxc_; ++k) spec_[0][static_cast<std::size_t>(l) * nxc_ + k] *= fx[k] * fy[l];
        backward(spec_[0], f->data());
    }
}

namespace {

// Keys cubic convolution weights (a = -1/2) for fractional offset t.
inline void cubic_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = -0.5 * t3 + t2 - 0.5 * t;
    w[1] = 1.5 * t3 - 2.5 * t2 + 1.0;
    w[2] = -1.5 * t3 + 2.0 * t2 + 0.5 * t;
    w[3] = 0.5 * t3 - 0.5 * t2;
}

// Periodic cubic sample of a field given at (i + ox) dx, (j + oy) dy.
double cubic_sample(const std::vector<double>& f, int nx, int ny, double a, double b) {
    const double fa = std::floor(a), fb = std::floor(b);
    double wx[4], wy[4];
    cubic_weights(a - fa, wx);
    cubic_weights(b - fb, wy);
    const int i0 = static_cast<int>(fa) - 1, j0 = static_cast<int>(fb) - 1;
    double acc = 0.0;
    for (int q = 0; q < 4; ++q) {
        const int j = wrap_index(j0 + q, ny);
        double row = 0.0;
        for (int r = 0; r < 4; ++r) row += wx[r] * f[j * nx + wrap_index(i0 + r, nx)];
        acc += wy[q] * row;
    }
    return acc;
}

}  // namespace

void FluidSolver::rotate(FluidState& s, double angle) {
    if (angle == 0.0) return;
    const int nx = grid_.nx, ny = grid_.ny;
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    const double dx = grid_.dx(), dy = grid_.dy();
    double ubar = 0.0, vbar = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        ubar += s.u[k];
        vbar += s.v[k];
    }
    ubar /= static_cast<double>(n);
    vbar /= static_cast<double>(n);

    // Vorticity at cell corners, then -Lap psi = omega.
    std::vector<double> w(n);
    for (int j = 0; j < ny; ++j) {
        const int jm = j == 0 ? ny - 1 : j - 1;
        for (int i = 0; i < nx; ++i) {
            const int im = i == 0 ? nx - 1 : i - 1;
            w[j * nx + i] = (s.v[j * nx + i] - s.v[j * nx + im]) / dx -
                            (s.u[j * nx + i] - s.u[jm * nx + i]) / dy;
        }
    }
    forward(w.data(), spec_[0]);
    spec_[0][0] = 0.0;
    for (std::size_t k = 1; k < lap_eig_.size(); ++k) spec_[0][k] /= -lap_eig_[k];
    std::vector<double> psi(n);
    backward(spec_[0], psi.data());

    // psi'(x) = psi(R^{-1}(x - c) + c), sampled at the corners.
    const double c = std::cos(angle), sn = std::sin(angle);
    const double xc = 0.5 * grid_.Lx, yc = 0.5 * grid_.Ly;
    auto resample = [&](const std::vector<double>& f, double ox, double oy) {
        std::vector<double> out(n);
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const double x = (i + ox) * dx - xc, y = (j + oy) * dy - yc;
                const double xs = c * x + sn * y + xc, ys = -sn * x + c * y + yc;
                out[j * nx + i] = cubic_sample(f, nx, ny, xs / dx - ox, ys / dy - oy);
            }
        return out;
    };
    const std::vector<double> rp = resample(psi, 0.0, 0.0);
    if (!s.p.empty()) s.p = resample(s.p, 0.5, 0.5);

    const double ub = c * ubar - sn * vbar, vb = sn * ubar + c * vbar;
    for (int j = 0; j < ny; ++j) {
        const int jp = j + 1 == ny ? 0 : j + 1;
        for (int i = 0; i < nx; ++i) {
            const int ip = i + 1 == nx ? 0 : i + 1;
            s.u[j * nx + i] = (rp[jp * nx + i] - rp[j * nx + i]) / dy + ub;
            s.v[j * nx + i] = -(rp[j * nx + ip] - rp[j * nx + i]) / dx + vb;
        }
    }
}

void FluidSolver::advect(FluidState& s, double dt) {
    const double c = courant(s, dt);
    if (c > 0.8)
        throw CflViolation("advect: courant number " + std::to_string(c) + " exceeds 0.8");
    const int nx = grid_.nx, ny = grid_.ny;
    const double cx = dt / grid_.dx(), cy = dt / grid_.dy();
    const double* U = s.u.data();
    const double* V = s.v.data();
    for (int j = 0; j < ny; ++j) {
        const double* u_m = U + static_cast<std::size_t>(j == 0 ? ny - 1 : j - 1) * nx;
        const double* u_0 = U + static_cast<std::size_t>(j) * nx;
        const double* v_0 = V + static_cast<std::size_t>(j) * nx;
        const double* v_p = V + static_cast<std::size_t>(j + 1 == ny ? 0 : j + 1) * nx;
        for (int i = 0; i < nx; ++i) {
            const int im = i == 0 ? nx - 1 : i - 1;
            const int ip = i + 1 == nx ? 0 : i + 1;
            // u-face: own u, v averaged from the four neighbouring v-faces.
            const double uu = u_0[i];
            const double vu = 0.25 * (v_0[im] + v_0[i] + v_p[im] + v_p[i]);
            tmp_u_[j * nx + i] = sample_near(U, nx, i, j, ny, -cx * uu, -cy * vu);
            // v-face: own v, u averaged from the four neighbouring u-faces.
            const double vv = v_0[i];
            const double uv = 0.25 * (u_m[i] + u_m[ip] + u_0[i] + u_0[ip]);
            tmp_v_[j * nx + i] = sample_near(V, nx, i, j, ny, -cx * uv, -cy * vv);
        }
    }
    s.u.swap(tmp_u_);
    s.v.swap(tmp_v_);
}

void FluidSolver::advect_scalar(std::vector<double>& q, const FluidState& s, double dt) const {
    const double c = courant(s, dt);
    if (c > 0.8)
        throw CflViolation("advect_scalar: courant number " + std::to_string(c) + " exceeds 0.8");
    const int nx = grid_.nx, ny = grid_.ny;
    const double cx = dt / grid_.dx(), cy = dt / grid_.dy();
    std::vector<double> out(q.size());
    for (int j = 0; j < ny; ++j) {
        const int jp = j + 1 == ny ? 0 : j + 1;
        for (int i = 0; i < nx; ++i) {
            const int ip = i + 1 == nx ? 0 : i + 1;
            const double uc = 0.5 * (s.u[j * nx + i] + s.u[j * nx + ip]);
            const double vc = 0.5 * (s.v[j * nx + i] + s.v[jp * nx + i]);
            out[j * nx + i] = sample(q, nx, ny, i, j, -cx * uc, -cy * vc);
        }
    }
    q.swap(out);
}

std::vector<double> FluidSolver::divergence(const FluidState& s) const {
    const int nx = grid_.nx, ny = grid_.ny;
    const double idx = 1.0 / grid_.dx(), idy = 1.0 / grid_.dy();
    std::vector<double> d(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        const int jp = j + 1 == ny ? 0 : j + 1;
        for (int i = 0; i < nx; ++i) {
            const int ip = i + 1 == nx ? 0 : i + 1;
            d[j * nx + i] = (s.u[j * nx + ip] - s.u[j * nx + i]) * idx +
                            (s.v[jp * nx + i] - s.v[j * nx + i]) * idy;
        }
    }
    return d;
}

double FluidSolver::max_divergence(const FluidState& s) const {
    double m = 0.0;
    for (double x : divergence(s)) m = std::max(m, std::abs(x));
    return m;
}

void FluidSolver::project(FluidState& s, double dt) {
    const int nx = grid_.nx, ny = grid_.ny;
    const std::vector<double> div = divergence(s);
    forward(div.data(), spec_[0]);
    const std::size_t ns = lap_eig_.size();
    spec_[0][0] = 0.0;
    for (std::size_t k = 1; k < ns; ++k) spec_[0][k] /= lap_eig_[k];
    s.p.resize(div.size());
    backward(spec_[0], s.p.data());

    const double idx = 1.0 / grid_.dx(), idy = 1.0 / grid_.dy();
    for (int j = 0; j < ny; ++j) {
        const int jm = j == 0 ? ny - 1 : j - 1;
        for (int i = 0; i < nx; ++i) {
            const int im = i == 0 ? nx - 1 : i - 1;
            s.u[j * nx + i] -= (s.p[j * nx + i] - s.p[j * nx + im]) * idx;
            s.v[j * nx + i] -= (s.p[j * nx + i] - s.p[jm * nx + i]) * idy;
        }
    }
    const double inv_dt = 1.0 / dt;
    for (double& x : s.p) x *= inv_dt;

    const double scale = max_speed(s) * std::max(idx, idy);
    if (!std::isfinite(scale) || max_divergence(s) > 1e-10 * std::max(scale, 1.0))
        throw SolverDiverged("project: divergence not removed");
}

double FluidSolver::sponge_weight(double x, double y) const {
    if (grid_.sponge_width == 0) return 0.0;
    const double h = grid_.dx();
    const double band = grid_.sponge_width * h;
    const double xw = x - grid_.Lx * std::floor(x / grid_.Lx);
    const double yw = y - grid_.Ly * std::floor(y / grid_.Ly);
    const double d = std::min({xw, grid_.Lx - xw, yw, grid_.Ly - yw});
    // Full strength on the outermost half cell, linear ramp to zero at `band`.
    if (d <= 0.5 * h) return 1.0;
    if (d >= band) return 0.0;
    return (band - d) / (band - 0.5 * h);
}

bool FluidSolver::in_interior(const Vec2& x) const {
    if (!std::isfinite(x.x) || !std::isfinite(x.y)) return false;
    if (grid_.sponge_width == 0) return true;
    const double margin = (grid_.sponge_width + 2) * grid_.dx();
    return x.x >= margin && x.x <= grid_.Lx - margin && x.y >= margin && x.y <= grid_.Ly - margin;
}

void FluidSolver::apply_sponge(FluidState& s, double dt) {
    if (grid_.sponge_width == 0 || grid_.sponge_rate == 0.0) return;
    if (dt != sponge_dt_) {
        const double a = dt * grid_.sponge_rate;
        sponge_mu_.resize(sponge_idx_.size());
        sponge_mv_.resize(sponge_idx_.size());
        for (std::size_t q = 0; q < sponge_idx_.size(); ++q) {
            sponge_mu_[q] = std::exp(-a * wu_[sponge_idx_[q]]);
            sponge_mv_[q] = std::exp(-a * wv_[sponge_idx_[q]]);
        }
        sponge_dt_ = dt;
    }
    for (std::size_t q = 0; q < sponge_idx_.size(); ++q) {
        s.u[sponge_idx_[q]] *= sponge_mu_[q];
        s.v[sponge_idx_[q]] *= sponge_mv_[q];
    }
}

double FluidSolver::kinetic_energy(const FluidState& s) const {
    double e = 0.0;
    for (std::size_t k = 0; k < s.u.size(); ++k) e += s.u[k] * s.u[k] + s.v[k] * s.v[k];
    return 0.5 * grid_.rho * e * grid_.cell_area();
}

double FluidSolver::viscous_power(const FluidState& s) const {
    const int nx = grid_.nx, ny = grid_.ny;
    const double idx2 = 1.0 / (grid_.dx() * grid_.dx()), idy2 = 1.0 / (grid_.dy() * grid_.dy());
    double acc = 0.0;
    for (const std::vector<double>* f : {&s.u, &s.v}) {
        const std::vector<double>& q = *f;
        for (int j = 0; j < ny; ++j) {
            const int jm = j == 0 ? ny - 1 : j - 1;
            const int jp = j + 1 == ny ? 0 : j + 1;
            for (int i = 0; i < nx; ++i) {
                const int im = i == 0 ? nx - 1 : i - 1;
                const int ip = i + 1 == nx ? 0 : i + 1;
                const double c = q[j * nx + i];
                const double lap = (q[j * nx + ip] - 2.0 * c + q[j * nx + im]) * idx2 +
                                   (q[jp * nx + i] - 2.0 * c + q[jm * nx + i]) * idy2;
                acc += lap * c;
            }
        }
    }
    return grid_.mu * acc * grid_.cell_area();
}

double FluidSolver::sponge_power(const FluidState& s) const {
    if (grid_.sponge_width == 0 || grid_.sponge_rate == 0.0) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < s.u.size(); ++k)
        acc += wu_[k] * s.u[k] * s.u[k] + wv_[k] * s.v[k] * s.v[k];
    return -grid_.rho * grid_.sponge_rate * acc * grid_.cell_area();
}

FluidState shift_cells(const FluidState& s, const FluidGrid& g, int di, int dj) {
    FluidState out = s;
    const int nx = g.nx, ny = g.ny;
    auto roll = [&](const std::vector<double>& in, std::vector<double>& o) {
        if (in.empty()) return;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                o[wrap_index(j + dj, ny) * nx + wrap_index(i + di, nx)] = in[j * nx + i];
    };
    roll(s.u, out.u);
    roll(s.v, out.v);
    roll(s.p, out.p);
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "binary formats assume little-endian");

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError("fluid binary: truncated stream");
    return v;
}

}  // namespace

void write_fluid_binary(std::ostream& os, const FluidGrid& g, const FluidState& s, double t) {
    os.write("CYF1", 4);
    put<std::int32_t>(os, g.nx);
    put<std::int32_t>(os, g.ny);
    put<double>(os, g.Lx);
    put<double>(os, g.Ly);
    put<double>(os, t);
    for (const std::vector<double>* f : {&s.u, &s.v, &s.p})
        os.write(reinterpret_cast<const char*>(f->data()),
                 static_cast<std::streamsize>(f->size() * sizeof(double)));
}

FluidState read_fluid_binary(std::istream& is, FluidGrid& g, double& t) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "CYF1", 4) != 0) throw FormatError("fluid binary: bad magic");
    g.nx = get<std::int32_t>(is);
    g.ny = get<std::int32_t>(is);
    g.Lx = get<double>(is);
    g.Ly = get<double>(is);
    t = get<double>(is);
    if (g.nx <= 0 || g.ny <= 0 || g.nx > (1 << 16) || g.ny > (1 << 16))
        throw FormatError("fluid binary: implausible grid size");
    FluidState s = FluidState::zeros(g);
    for (std::vector<double>* f : {&s.u, &s.v, &s.p}) {
        is.read(reinterpret_cast<char*>(f->data()),
                static_cast<std::streamsize>(f->size() * sizeof(double)));
        if (!is) throw FormatError("fluid binary: truncated field data");
    }
    return s;
}

void write_fluid_csv(std::ostream& os, const FluidGrid& g, const FluidState& s) {
    os << "i,j,u,v,p\n";
    char buf[128];
    for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
            const std::size_t k = static_cast<std::size_t>(j) * g.nx + i;
            std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g\n", i, j, s.u[k], s.v[k],
                          s.p.empty() ? 0.0 : s.p[k]);
            os << buf;
        }
}

}  // namespace swimcycle
