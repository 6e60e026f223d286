#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "swimcycle/reduction.hpp"

namespace swimcycle {

// Everything needed to build a stepper.
struct SystemSpec {
    FluidGrid grid;
    BodyMesh mesh;
    ActuationSpec actuation;
    StepperParams stepper;
};

enum class CycleMode { Exact, Stencil };
enum class Acceleration { None, Anderson };

struct PoincareConfig {
    double tol = 1e-6;
    int max_iters = 200;
    Acceleration accel = Acceleration::Anderson;
    int anderson_depth = 3;
    CycleMode mode = CycleMode::Exact;
    double probe_step = 1e-5;
    int probe_dim = 0;  // 0: all 4 N_b body directions
    bool floquet = true;
    int snapshots = 32;
    int workers = 1;
    NormWeights weights;
    StencilSpec stencil;

    void validate(double period) const;
};

struct MapOutput {
    SystemState state;  // re-posed, t reset to 0
    Reduction reduced;  // of `state`
    SE2 z;              // this period's holonomy in the input's phase-0 frame
    std::vector<LoopSnapshot> loop;  // only when recorded
};

// Time-T flow of the coupled system, acting on states at phase 0.
class PoincareMap {
public:
    PoincareMap(SystemSpec spec, PoincareConfig cfg);

    const SystemSpec& spec() const { return spec_; }
    const PoincareConfig& config() const { return cfg_; }
    const std::vector<Vec2>& stencil() const { return stencil_; }
    Stepper& stepper() { return *stepper_; }
    int steps_per_period() const { return n_steps_; }
    double period() const { return spec_.actuation.period; }

    Reduction reduce(const SystemState& s) const;

    // Integrates one period from phase 0, then re-poses the whole state to
    // the canonical frame.
    MapOutput apply(const SystemState& x, bool record_loop = false);

    // Full state from a reduced one: body placed by `pose`, fluid the
    // smallest divergence-free field reproducing the stencil samples.
    // `lift_error` receives the relative sample mismatch.
    SystemState lift(const ReducedState& x, const SE2& pose, double* lift_error = nullptr);

    // Body mass centroid at the domain centre, heading zero.
    SE2 canonical_pose() const;
    // Moves body and fluid rigidly into the canonical pose: a band-limited
    // translation followed by a rotation about the centre.
    void repose(SystemState& s);

private:
    SystemSpec spec_;
    PoincareConfig cfg_;
    std::unique_ptr<Stepper> stepper_;
    std::vector<Vec2> stencil_;
    int n_steps_ = 0;
};

// Reduced-space form: lift at `base_pose`, one period, reduce.
std::pair<ReducedState, SE2> poincare_map(PoincareMap& map, const ReducedState& x,
                                          const SE2& base_pose);

// Type-II Anderson mixing on flat vectors.
class Anderson {
public:
    explicit Anderson(int depth, double regularization = 1e-12)
        : depth_(depth), reg_(regularization) {}

    // x: current iterate, g: its image. Returns the next iterate.
    Eigen::VectorXd next(const Eigen::VectorXd& x, const Eigen::VectorXd& g);
    void reset();

private:
    int depth_;
    double reg_;
    std::vector<Eigen::VectorXd> dF_, dG_;
    Eigen::VectorXd f_prev_, g_prev_;
    bool has_prev_ = false;
};

struct CycleSearch {
    CycleResult result;
    SystemState state;    // phase-0 full state of the returned loop
    SE2 base_pose;        // lab pose of `state`'s body
    SE2 z_last_iterate;   // holonomy of the final search iteration
    double lift_error = 0.0;
};

struct IterationRecord {
    int iter = 0;
    double residual = 0.0;
    SE2 z;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

CycleSearch find_cycle(const SystemSpec& spec, const SystemState& x0, const PoincareConfig& cfg,
                       const IterationCallback& on_iter = {});
// Starts from a reduced state lifted at the canonical pose.
CycleSearch find_cycle(const SystemSpec& spec, const ReducedState& x0, const PoincareConfig& cfg,
                       const IterationCallback& on_iter = {});

// Moduli of the Poincare map Jacobian restricted to body directions in the
// aligned frame (columns of `basis`, 4 N_b rows ordered x0, y0, x1, ..., then
// velocities; identity when empty), sorted descending.
std::vector<double> floquet_spectrum(const SystemSpec& spec, const SystemState& x_star,
                                     const PoincareConfig& cfg,
                                     const Eigen::MatrixXd& basis = Eigen::MatrixXd());

}  // namespace swimcycle
