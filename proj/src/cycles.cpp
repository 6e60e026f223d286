#include "swimcycle/cycles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

#include "swimcycle/error.hpp"

namespace swimcycle {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

void PoincareConfig::validate(double period) const {
    if (!(tol > 0.0)) throw InvalidState("cycle: tol must be > 0");
    if (!(period > 0.0)) throw InvalidState("cycle: period must be > 0");
    if (max_iters < 1) throw InvalidState("cycle: max_iters must be >= 1");
    if (anderson_depth < 1) throw InvalidState("cycle: anderson depth must be >= 1");
    if (!(probe_step > 0.0)) throw InvalidState("cycle: probe step must be > 0");
    if (probe_dim < 0) throw InvalidState("cycle: probe_dim must be >= 0");
    if (snapshots < 1) throw InvalidState("cycle: snapshots must be >= 1");
    if (workers < 1) throw InvalidState("cycle: workers must be >= 1");
}

PoincareMap::PoincareMap(SystemSpec spec, PoincareConfig cfg)
    : spec_(std::move(spec)), cfg_(std::move(cfg)) {
    const double T = spec_.actuation.period;
    cfg_.validate(T);
    stepper_ = std::make_unique<Stepper>(spec_.grid, spec_.mesh, spec_.actuation, spec_.stepper);
    const double dt = spec_.stepper.dt;
    n_steps_ = static_cast<int>(std::llround(T / dt));
    if (n_steps_ < 1 || std::abs(n_steps_ * dt - T) > 1e-9 * T)
        throw InvalidState("cycle: period is not a whole number of time steps");
    if (n_steps_ % cfg_.snapshots != 0)
        throw InvalidState("cycle: steps per period (" + std::to_string(n_steps_) +
                           ") not divisible by the snapshot count");
    stencil_ = make_stencil(spec_.mesh, cfg_.stencil);
}

Reduction PoincareMap::reduce(const SystemState& s) const {
    return swimcycle::reduce(s, spec_.mesh, spec_.grid, stencil_, period());
}

SE2 PoincareMap::canonical_pose() const {
    return SE2::translation(0.5 * spec_.grid.Lx, 0.5 * spec_.grid.Ly);
}

void PoincareMap::repose(SystemState& s) {
    const Vec2 centre = canonical_pose().translation_part();
    const Vec2 d = centre - mass_centroid(s.body.positions, spec_.mesh.masses);
    if (d.x != 0.0 || d.y != 0.0) {
        for (Vec2& p : s.body.positions) p += d;
        stepper_->solver().translate(s.fluid, d.x, d.y);
    }
    const double theta = reduce(s).group.theta;
    if (theta != 0.0) {
        const SE2 r = SE2::rotation(-theta);
        for (Vec2& p : s.body.positions) p = centre + r.act_vector(p - centre);
        for (Vec2& v : s.body.velocities) v = r.act_vector(v);
        stepper_->solver().rotate(s.fluid, -theta);
    }
}

MapOutput PoincareMap::apply(const SystemState& x, bool record_loop) {
    SystemState s = x;
    s.t = 0.0;
    const Reduction r0 = reduce(s);
    const SE2 g0inv = r0.group.inverse();
    MapOutput out;
    const int stride = n_steps_ / cfg_.snapshots;
    if (record_loop) out.loop.push_back({r0.state, SE2::identity()});
    for (int n = 1; n <= n_steps_; ++n) {
        stepper_->step(s);
        if (record_loop && n % stride == 0 && n < n_steps_) {
            const Reduction r = reduce(s);
            out.loop.push_back({r.state, compose(g0inv, r.group)});
        }
    }
    out.z = compose(g0inv, reduce(s).group);
    repose(s);
    s.t = 0.0;
    out.reduced = reduce(s);
    out.state = std::move(s);
    return out;
}

SystemState PoincareMap::lift(const ReducedState& x, const SE2& pose, double* lift_error) {
    const BodyMesh& mesh = spec_.mesh;
    if (x.shape.size() != mesh.size() || x.shape_vel.size() != mesh.size())
        throw ShapeMismatch("lift: body size does not match the mesh");
    if (x.fluid_samples.size() != stencil_.size())
        throw ShapeMismatch("lift: sample count does not match the stencil");
    const FluidGrid& g = spec_.grid;
    SystemState s;
    s.t = x.t_phase;
    s.body.positions = act_points(pose, x.shape);
    s.body.velocities = act_vectors(pose, x.shape_vel);

    // Constraints at the stencil only. The samples are interpolants of a
    // projected field, so the system is consistent; body velocities are not
    // (the tether slips) and the two body rows share kernel support, which
    // makes a system that includes them inconsistent.
    const std::vector<Vec2> pts = act_points(pose, stencil_);
    const std::vector<Vec2> b = act_vectors(pose, x.fluid_samples);
    const std::size_t P = pts.size();

    FluidSolver& solver = stepper_->solver();
    auto field = [&](const std::vector<Vec2>& lam) {
        FluidState f = spread(g, pts, lam);
        f.p.assign(f.u.size(), 0.0);
        solver.project(f);
        return f;
    };
    auto dotv = [](const std::vector<Vec2>& a, const std::vector<Vec2>& c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) acc += dot(a[k], c[k]);
        return acc;
    };

    const double bnorm = std::sqrt(dotv(b, b));
    std::vector<Vec2> lam(P);
    if (bnorm == 0.0) {
        s.fluid = FluidState::zeros(g);
        if (lift_error) *lift_error = 0.0;
        return s;
    }
    // CG on (J P S) lam = b; the operator is symmetric positive semidefinite.
    std::vector<Vec2> r = b, p = b, Ap;
    double rr = dotv(r, r);
    const int max_it = 4 * static_cast<int>(P);
    for (int it = 0; it < max_it && std::sqrt(rr) > 1e-12 * bnorm; ++it) {
        Ap = interpolate(g, field(p), pts);
        const double pAp = dotv(p, Ap);
        if (!(pAp > 0.0)) break;
        const double alpha = rr / pAp;
        for (std::size_t k = 0; k < P; ++k) {
            lam[k] += alpha * p[k];
            r[k] -= alpha * Ap[k];
        }
        const double rr_new = dotv(r, r);
        const double beta = rr_new / rr;
        rr = rr_new;
        for (std::size_t k = 0; k < P; ++k) p[k] = r[k] + beta * p[k];
    }
    s.fluid = field(lam);
    std::fill(s.fluid.p.begin(), s.fluid.p.end(), 0.0);
    const std::vector<Vec2> back = interpolate(g, s.fluid, pts);
    double err = 0.0;
    for (std::size_t k = 0; k < P; ++k) {
        const Vec2 d = back[k] - b[k];
        err += dot(d, d);
    }
    err = std::sqrt(err) / bnorm;
    if (lift_error) *lift_error = err;
    if (err > 1e-7)
        throw ReconstitutionResidual("lift: samples reproduced with relative error " +
                                     num(err));
    return s;
}

std::pair<ReducedState, SE2> poincare_map(PoincareMap& map, const ReducedState& x,
                                          const SE2& base_pose) {
    const SystemState s = map.lift(x, base_pose);
    MapOutput out = map.apply(s);
    return {std::move(out.reduced.state), out.z};
}

// ---------------------------------------------------------------------------

void Anderson::reset() {
    dF_.clear();
    dG_.clear();
    has_prev_ = false;
}

Eigen::VectorXd Anderson::next(const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
    const Eigen::VectorXd f = g - x;
    if (has_prev_) {
        dF_.push_back(f - f_prev_);
        dG_.push_back(g - g_prev_);
        if (static_cast<int>(dF_.size()) > depth_) {
            dF_.erase(dF_.begin());
            dG_.erase(dG_.begin());
        }
    }
    f_prev_ = f;
    g_prev_ = g;
    has_prev_ = true;
    const int m = static_cast<int>(dF_.size());
    if (m == 0) return g;

    Eigen::MatrixXd F(f.size(), m);
    for (int k = 0; k < m; ++k) F.col(k) = dF_[k];
    Eigen::MatrixXd A = F.transpose() * F;
    A.diagonal().array() += reg_ * std::max(A.diagonal().maxCoeff(), 1e-300);
    const Eigen::VectorXd gamma = A.ldlt().solve(F.transpose() * f);
    if (!gamma.allFinite()) {
        reset();
        return g;
    }
    Eigen::VectorXd out = g;
    for (int k = 0; k < m; ++k) out -= gamma(k) * dG_[k];
    return out;
}

namespace {

// Flat views used for mixing.
Eigen::VectorXd flatten(const SystemState& s) {
    const std::size_t N = s.body.positions.size(), G = s.fluid.u.size();
    Eigen::VectorXd v(4 * N + 2 * G);
    std::size_t k = 0;
    for (const Vec2& p : s.body.positions) { v(k++) = p.x; v(k++) = p.y; }
    for (const Vec2& p : s.body.velocities) { v(k++) = p.x; v(k++) = p.y; }
    for (double a : s.fluid.u) v(k++) = a;
    for (double a : s.fluid.v) v(k++) = a;
    return v;
}

void unflatten(const Eigen::VectorXd& v, SystemState& s) {
    std::size_t k = 0;
    for (Vec2& p : s.body.positions) { p.x = v(k++); p.y = v(k++); }
    for (Vec2& p : s.body.velocities) { p.x = v(k++); p.y = v(k++); }
    for (double& a : s.fluid.u) a = v(k++);
    for (double& a : s.fluid.v) a = v(k++);
}

Eigen::VectorXd flatten(const ReducedState& s) {
    Eigen::VectorXd v(2 * (2 * s.shape.size() + s.fluid_samples.size()));
    std::size_t k = 0;
    for (const auto* arr : {&s.shape, &s.shape_vel, &s.fluid_samples})
        for (const Vec2& p : *arr) { v(k++) = p.x; v(k++) = p.y; }
    return v;
}

void unflatten(const Eigen::VectorXd& v, ReducedState& s) {
    std::size_t k = 0;
    for (auto* arr : {&s.shape, &s.shape_vel, &s.fluid_samples})
        for (Vec2& p : *arr) { p.x = v(k++); p.y = v(k++); }
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Median successive residual ratio over the whole search.
double contraction_factor(const std::vector<double>& h) {
    std::vector<double> ratios;
    for (std::size_t k = 1; k < h.size(); ++k)
        if (h[k - 1] > 0.0) ratios.push_back(h[k] / h[k - 1]);
    return median(ratios);
}

CycleSearch finish(PoincareMap& map, const SystemSpec& spec, const PoincareConfig& cfg,
                   SystemState x, std::vector<double> history, const SE2& z_last,
                   double lift_error) {
    CycleSearch out;
    out.z_last_iterate = z_last;
    out.lift_error = lift_error;
    out.base_pose = map.reduce(x).group;
    MapOutput fin = map.apply(x, true);
    CycleResult& c = out.result;
    c.loop = std::move(fin.loop);
    c.holonomy = fin.z;
    c.residual = history.back();
    c.iterations = static_cast<int>(history.size());
    c.period = map.period();
    c.contraction = contraction_factor(history);
    c.residual_history = std::move(history);
    if (cfg.floquet) {
        c.floquet = floquet_spectrum(spec, x, cfg);
        c.stable = std::all_of(c.floquet.begin(), c.floquet.end(),
                               [&](double m) { return m < 1.0 - 10.0 * cfg.probe_step; });
    }
    out.state = std::move(x);
    return out;
}

}  // namespace

CycleSearch find_cycle(const SystemSpec& spec, const SystemState& x0, const PoincareConfig& cfg,
                       const IterationCallback& on_iter) {
    if (cfg.mode == CycleMode::Stencil) {
        PoincareMap map(spec, cfg);
        SystemState s = x0;
        s.t = 0.0;
        return find_cycle(spec, map.reduce(s).state, cfg, on_iter);
    }
    PoincareMap map(spec, cfg);
    SystemState x = x0;
    x.t = 0.0;
    map.repose(x);
    Reduction rx = map.reduce(x);
    Anderson mix(cfg.anderson_depth);
    std::vector<double> history;
    double best = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= cfg.max_iters; ++it) {
        MapOutput out = map.apply(x);
        const double res = reduced_distance(out.reduced.state, rx.state, cfg.weights);
        if (!std::isfinite(res))
            throw SolverDiverged("find_cycle: non-finite residual at iteration " + std::to_string(it));
        history.push_back(res);
        best = std::min(best, res);
        if (on_iter) on_iter({it, res, out.z});
        if (res <= cfg.tol)
            return finish(map, spec, cfg, std::move(out.state), std::move(history), out.z, 0.0);
        if (cfg.accel == Acceleration::Anderson) {
            SystemState next = out.state;
            unflatten(mix.next(flatten(x), flatten(out.state)), next);
            x = std::move(next);
        } else {
            x = std::move(out.state);
        }
        rx = map.reduce(x);
    }
    throw NoConvergence("find_cycle: residual " + num(history.back()) +
                            " above tol " + num(cfg.tol) + " after " +
                            std::to_string(cfg.max_iters) + " iterations",
                        best, cfg.max_iters);
}

CycleSearch find_cycle(const SystemSpec& spec, const ReducedState& x0, const PoincareConfig& cfg,
                       const IterationCallback& on_iter) {
    PoincareMap map(spec, cfg);
    const SE2 base = map.canonical_pose();
    if (cfg.mode == CycleMode::Exact) return find_cycle(spec, map.lift(x0, base), cfg, on_iter);

    ReducedState x = x0;
    x.t_phase = 0.0;
    Anderson mix(cfg.anderson_depth);
    std::vector<double> history;
    double best = std::numeric_limits<double>::infinity();
    double worst_lift = 0.0;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        double lift_error = 0.0;
        const SystemState s = map.lift(x, base, &lift_error);
        worst_lift = std::max(worst_lift, lift_error);
        // The lift defect enters every application; a tolerance below it
        // cannot be met honestly.
        if (cfg.tol < 10.0 * lift_error)
            throw NoConvergence("find_cycle: tol " + num(cfg.tol) +
                                    " is below the stencil lift error " +
                                    num(lift_error) +
                                    "; loosen tol or use exact mode",
                                best, it - 1);
        MapOutput out = map.apply(s);
        const double res = reduced_distance(out.reduced.state, x, cfg.weights);
        if (!std::isfinite(res))
            throw SolverDiverged("find_cycle: non-finite residual at iteration " + std::to_string(it));
        history.push_back(res);
        best = std::min(best, res);
        if (on_iter) on_iter({it, res, out.z});
        if (res <= cfg.tol) {
            const SystemState xs = map.lift(out.reduced.state, base);
            return finish(map, spec, cfg, xs, std::move(history), out.z, worst_lift);
        }
        if (cfg.accel == Acceleration::Anderson) {
            ReducedState next = out.reduced.state;
            unflatten(mix.next(flatten(x), flatten(out.reduced.state)), next);
            x = std::move(next);
        } else {
            x = std::move(out.reduced.state);
        }
        x.t_phase = 0.0;
    }
    throw NoConvergence("find_cycle: residual " + num(history.back()) +
                            " above tol " + num(cfg.tol) + " after " +
                            std::to_string(cfg.max_iters) + " iterations",
                        best, cfg.max_iters);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd body_coords(const ReducedState& r, double L, double T) {
    const std::size_t N = r.shape.size();
    Eigen::VectorXd y(4 * N);
    for (std::size_t i = 0; i < N; ++i) {
        y(2 * i) = r.shape[i].x / L;
        y(2 * i + 1) = r.shape[i].y / L;
        y(2 * N + 2 * i) = r.shape_vel[i].x * T / L;
        y(2 * N + 2 * i + 1) = r.shape_vel[i].y * T / L;
    }
    return y;
}

}  // namespace

std::vector<double> floquet_spectrum(const SystemSpec& spec, const SystemState& x_star,
                                     const PoincareConfig& cfg, const Eigen::MatrixXd& basis) {
    const int N = static_cast<int>(spec.mesh.size());
    const int D = 4 * N;
    Eigen::MatrixXd B = basis;
    if (B.size() == 0) {
        const int k = cfg.probe_dim > 0 ? std::min(cfg.probe_dim, D) : D;
        B = Eigen::MatrixXd::Identity(D, k);
    }
    if (B.rows() != D) throw ShapeMismatch("floquet: basis rows must equal 4 N_b");
    const int k = static_cast<int>(B.cols());
    const double L = cfg.weights.length, T = spec.actuation.period, h = cfg.probe_step;

    PoincareMap base_map(spec, cfg);
    SystemState x0 = x_star;
    x0.t = 0.0;
    const SE2 g = base_map.reduce(x0).group;
    const Eigen::VectorXd y0 = body_coords(base_map.apply(x0).reduced.state, L, T);

    Eigen::MatrixXd Y(D, k);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex fail_mu;
    auto worker = [&](PoincareMap* shared) {
        std::unique_ptr<PoincareMap> own;
        PoincareMap* map = shared;
        try {
            if (!map) {
                own = std::make_unique<PoincareMap>(spec, cfg);
                map = own.get();
            }
            for (int c = next++; c < k; c = next++) {
                {
                    std::lock_guard lock(fail_mu);
                    if (failure) return;
                }
                SystemState x = x0;
                for (int i = 0; i < N; ++i) {
                    const Vec2 dp{B(2 * i, c) * h * L, B(2 * i + 1, c) * h * L};
                    const Vec2 dv{B(2 * N + 2 * i, c) * h * L / T, B(2 * N + 2 * i + 1, c) * h * L / T};
                    x.body.positions[i] += g.act_vector(dp);
                    x.body.velocities[i] += g.act_vector(dv);
                }
                const Eigen::VectorXd y = body_coords(map->apply(x).reduced.state, L, T);
                const double change = (y - y0).norm();
                const double noise = std::numeric_limits<double>::epsilon() * std::max(y0.norm(), 1.0);
                if (change < 10.0 * noise)
                    throw IllConditioned("floquet: probe " + std::to_string(c) +
                                         " changed the state by " + num(change) +
                                         ", within arithmetic noise; increase the probe step");
                Y.col(c) = (y - y0) / h;
            }
        } catch (...) {
            std::lock_guard lock(fail_mu);
            if (!failure) failure = std::current_exception();
        }
    };
    const int workers = std::min(cfg.workers, k);
    if (workers <= 1) {
        worker(&base_map);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker, nullptr);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    const Eigen::MatrixXd J = B.transpose() * Y;
    Eigen::EigenSolver<Eigen::MatrixXd> es(J, false);
    std::vector<double> moduli(k);
    for (int i = 0; i < k; ++i) moduli[i] = std::abs(es.eigenvalues()(i));
    std::sort(moduli.begin(), moduli.end(), std::greater<>());
    return moduli;
}

}  // namespace swimcycle
