#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "swimcycle/cycles.hpp"
#include "swimcycle/error.hpp"

using namespace swimcycle;

namespace {

// Coarse grid and a short period keep every map application cheap.
SystemSpec small_spec(double amplitude) {
    SystemSpec s;
    s.grid.nx = s.grid.ny = 32;
    s.grid.Lx = s.grid.Ly = 4.0;
    s.grid.sponge_width = 4;
    s.mesh = make_fish_filament({});
    s.actuation = {amplitude, 0.1, 1, WavePattern::Traveling};
    return s;
}

PoincareConfig small_cfg() {
    PoincareConfig c;
    c.snapshots = 8;
    c.floquet = false;
    c.weights.period = 0.1;
    return c;
}

SystemState perturbed_rest(PoincareMap& map, double amp, unsigned seed) {
    SystemState s = map.stepper().rest_state();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, amp);
    for (Vec2& p : s.body.positions) p += Vec2{n(rng), n(rng)};
    return s;
}

}  // namespace

TEST_CASE("map configuration checks") {
    SystemSpec s = small_spec(0.0);
    PoincareConfig c = small_cfg();
    c.snapshots = 7;
    CHECK_THROWS_AS(PoincareMap(s, c), InvalidState);
    s.actuation.period = 0.10001;
    CHECK_THROWS_AS(PoincareMap(s, small_cfg()), InvalidState);
    c = small_cfg();
    c.tol = 0.0;
    CHECK_THROWS_AS(PoincareMap(small_spec(0.0), c), InvalidState);
}

TEST_CASE("rest is a fixed point of the passive map") {
    PoincareMap map(small_spec(0.0), small_cfg());
    SystemState rest = map.stepper().rest_state();
    const Reduction r0 = map.reduce(rest);
    const MapOutput out = map.apply(rest, true);
    CHECK(reduced_distance(out.reduced.state, r0.state, map.config().weights) < 1e-12);
    CHECK(std::abs(out.z.theta) < 1e-12);
    CHECK(std::abs(out.z.tx) < 1e-12);
    CHECK(std::abs(out.z.ty) < 1e-12);
    CHECK(out.loop.size() == 8);

    const auto [x1, dz] = poincare_map(map, r0.state, map.canonical_pose());
    CHECK(reduced_distance(x1, r0.state, map.config().weights) < 1e-12);
    CHECK(std::abs(dz.tx) < 1e-12);
}

TEST_CASE("passive map contracts towards rest") {
    // A full relaxation time: over short periods energy first moves from
    // shape into velocity.
    SystemSpec spec = small_spec(0.0);
    spec.actuation.period = 1.0;
    PoincareConfig c = small_cfg();
    c.weights.period = 1.0;
    PoincareMap map(spec, c);
    SystemState rest = map.stepper().rest_state();
    const Reduction r0 = map.reduce(rest);
    SystemState x = perturbed_rest(map, 0.005, 1);
    const double d0 = reduced_distance(map.reduce(x).state, r0.state, map.config().weights);
    const MapOutput out = map.apply(x);
    CHECK(reduced_distance(out.reduced.state, r0.state, map.config().weights) < d0);
}

TEST_CASE("two applications agree with one double-length integration") {
    // Re-posing moves the body by a fraction of a cell, and the discrete flow
    // is only translation invariant for whole cells. The oracle for the
    // defect is therefore the flow's own sub-cell variance over the same
    // horizon.
    const SystemSpec spec = small_spec(0.15);
    PoincareMap map(spec, small_cfg());
    SystemState x = perturbed_rest(map, 0.002, 2);
    map.repose(x);
    const MapOutput a = map.apply(x);
    const MapOutput b = map.apply(a.state);

    const int n2 = 2 * map.steps_per_period();
    SystemState s = x;
    map.stepper().step(s, n2);
    const Reduction direct = map.reduce(s);
    const double defect = reduced_distance(b.reduced.state, direct.state, map.config().weights);
    // Holonomies compose in the body frame: g(2T) = g(0) z1 z2.
    const SE2 z2 = compose(a.z, b.z);
    const SE2 zd = compose(map.reduce(x).group.inverse(), direct.group);
    const double heading = std::abs(wrap_angle(z2.theta - zd.theta));

    double variance = 0.0, heading_variance = 0.0;
    for (double frac : {0.25, 0.5}) {
        SystemState y = x;
        const double d = frac * spec.grid.dx();
        for (Vec2& p : y.body.positions) p.x += d;
        map.stepper().solver().translate(y.fluid, d, 0.0);
        map.stepper().step(y, n2);
        const Reduction ry = map.reduce(y);
        variance = std::max(variance, reduced_distance(ry.state, direct.state, map.config().weights));
        heading_variance = std::max(heading_variance, std::abs(wrap_angle(ry.group.theta - direct.group.theta)));
    }
    MESSAGE("semigroup defect " << defect << " (sub-cell variance " << variance << "), heading "
                                << heading << " (" << heading_variance << ")");
    CHECK(defect <= variance);
    CHECK(heading <= heading_variance);
}

TEST_CASE("repose puts the body in the canonical frame") {
    PoincareMap map(small_spec(0.15), small_cfg());
    SystemState x = map.stepper().rest_state();
    const SE2 z{0.2, 0.05, -0.03};
    const Vec2 c{2.0, 2.0};
    for (Vec2& p : x.body.positions) p = c + z.act_vector(p - c) + z.translation_part();
    map.repose(x);
    const SE2 g = map.reduce(x).group;
    CHECK(std::abs(g.theta) <= 1e-12);
    const Vec2 centre = mass_centroid(x.body.positions, map.spec().mesh.masses);
    CHECK(centre.x == doctest::Approx(2.0));
    CHECK(centre.y == doctest::Approx(2.0));
}

TEST_CASE("Anderson mixing on a linear contraction") {
    // x -> A x + b with spectral radius 0.95.
    const int n = 6;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) A(i, i) = 0.95 - 0.1 * i;
    A(0, 1) = 0.05;
    Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0);
    const Eigen::VectorXd xs = (Eigen::MatrixXd::Identity(n, n) - A).lu().solve(b);
    auto iterations = [&](bool accel) {
        Anderson mix(3);
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (int k = 1; k <= 1000; ++k) {
            const Eigen::VectorXd g = A * x + b;
            if ((g - x).norm() < 1e-10) return k;
            x = accel ? mix.next(x, g) : g;
        }
        return 1000;
    };
    const int plain = iterations(false), mixed = iterations(true);
    MESSAGE("picard " << plain << " anderson " << mixed);
    CHECK(mixed < plain);
    CHECK(mixed < 60);
}

TEST_CASE("passive search from rest") {
    PoincareConfig c = small_cfg();
    c.floquet = true;
    const CycleSearch r = find_cycle(small_spec(0.0), PoincareMap(small_spec(0.0), c).stepper().rest_state(), c);
    CHECK(r.result.iterations == 1);
    CHECK(r.result.residual < 1e-12);
    CHECK(std::abs(r.result.holonomy.tx) < 1e-12);
    CHECK(std::abs(r.result.holonomy.theta) < 1e-12);
    REQUIRE(r.result.floquet.size() == 4 * 40);
    CHECK(r.result.floquet.front() < 1.0);
    CHECK(r.result.stable);
    CHECK(r.result.loop.size() == 8);
}

TEST_CASE("passive search from a perturbation decays geometrically") {
    SystemSpec spec = small_spec(0.0);
    spec.actuation.period = 1.0;
    PoincareConfig c = small_cfg();
    c.weights.period = 1.0;
    c.accel = Acceleration::None;
    c.tol = 1e-7;
    PoincareMap map(spec, c);
    const CycleSearch r = find_cycle(spec, perturbed_rest(map, 0.003, 3), c);
    CHECK(r.result.residual <= 1e-7);
    CHECK(r.result.iterations > 1);
    CHECK(r.result.contraction < 1.0);
    CHECK(std::abs(r.result.holonomy.tx) < 1e-5);
}

TEST_CASE("actuated search converges on the small system") {
    const SystemSpec spec = small_spec(0.15);
    PoincareConfig c = small_cfg();
    c.tol = 1e-7;
    const CycleSearch r = find_cycle(spec, PoincareMap(spec, c).stepper().rest_state(), c);
    CHECK(r.result.residual <= 1e-7);
    CHECK(r.result.contraction < 0.9);
    // The recorded loop closes up under the holonomy.
    PoincareMap map(spec, c);
    const MapOutput again = map.apply(r.state);
    CHECK(reduced_distance(again.reduced.state, r.result.loop[0].state, c.weights) < 1e-6);
    CHECK(std::abs(wrap_angle(again.z.theta - r.result.holonomy.theta)) < 1e-6);
}

// The default stencil needs the default resolution: on coarse grids its
// inner rings carry more constraints than the grid has freedom.
SystemSpec stencil_spec() {
    SystemSpec s = small_spec(0.15);
    s.grid.nx = s.grid.ny = 128;
    s.grid.sponge_width = 12;
    return s;
}

PoincareConfig stencil_cfg() {
    PoincareConfig c = small_cfg();
    c.mode = CycleMode::Stencil;
    return c;
}

TEST_CASE("stencil lift reproduces the samples") {
    const SystemSpec spec = stencil_spec();
    PoincareMap map(spec, stencil_cfg());
    SystemState x = map.stepper().rest_state();
    map.stepper().step(x, 200);
    const Reduction r = map.reduce(x);
    for (const SE2& pose : {r.group, map.canonical_pose()}) {
        double err = 1.0;
        const SystemState lifted = map.lift(r.state, pose, &err);
        CHECK(err < 1e-7);
        CHECK(map.stepper().solver().max_divergence(lifted.fluid) < 1e-10);
        const Reduction back = map.reduce(lifted);
        CHECK(reduced_distance(back.state, r.state, map.config().weights) < 1e-6);
    }
}

TEST_CASE("an over-dense stencil cannot be lifted") {
    const SystemSpec spec = small_spec(0.15);
    PoincareMap map(spec, stencil_cfg());
    SystemState x = map.stepper().rest_state();
    map.stepper().step(x, 200);
    const Reduction r = map.reduce(x);
    CHECK_THROWS_AS(map.lift(r.state, map.canonical_pose()), ReconstitutionResidual);
}

TEST_CASE("stencil mode refuses a tolerance below its lift error") {
    const SystemSpec spec = stencil_spec();
    PoincareConfig c = stencil_cfg();
    c.tol = 1e-14;
    PoincareMap map(spec, c);
    SystemState x = map.stepper().rest_state();
    map.stepper().step(x, 200);
    x.t = 0.0;
    try {
        find_cycle(spec, x, c);
        FAIL("expected NoConvergence");
    } catch (const NoConvergence& e) {
        MESSAGE(std::string(e.what()));
        CHECK(std::string(e.what()).find("lift error") != std::string::npos);
    }
}

TEST_CASE("stencil search converges with a tolerance above the lift error") {
    const SystemSpec spec = stencil_spec();
    PoincareConfig c = stencil_cfg();
    c.tol = 1e-5;
    const CycleSearch r = find_cycle(spec, PoincareMap(spec, c).stepper().rest_state(), c);
    CHECK(r.result.residual <= 1e-5);
    CHECK(r.lift_error < 1e-6);
    CHECK(r.result.loop.size() == 8);
}

TEST_CASE("Floquet spectrum") {
    SUBCASE("probe step robustness at rest") {
        const SystemSpec spec = small_spec(0.0);
        PoincareConfig c = small_cfg();
        c.probe_dim = 24;
        PoincareMap map(spec, c);
        const SystemState rest = map.stepper().rest_state();
        const auto a = floquet_spectrum(spec, rest, c);
        c.probe_step = 2e-5;
        const auto b = floquet_spectrum(spec, rest, c);
        REQUIRE(a.size() == 24);
        CHECK(a.front() < 1.0);
        for (int k = 0; k < 3; ++k) CHECK(b[k] == doctest::Approx(a[k]).epsilon(1e-2));
    }
    SUBCASE("conservative limit has a neutral direction") {
        SystemSpec spec = small_spec(0.0);
        spec.grid.mu = 0.0;
        spec.grid.sponge_rate = 0.0;
        spec.mesh.damping = 0.0;
        spec.stepper.coupling_stiffness = 0.0;
        PoincareConfig c = small_cfg();
        PoincareMap map(spec, c);
        const auto m = floquet_spectrum(spec, map.stepper().rest_state(), c);
        MESSAGE("conservative leading modulus " << m.front());
        CHECK(m.front() == doctest::Approx(1.0).epsilon(1e-2));
    }
    SUBCASE("worker threads give the same spectrum") {
        const SystemSpec spec = small_spec(0.0);
        PoincareConfig c = small_cfg();
        c.probe_dim = 8;
        PoincareMap map(spec, c);
        const SystemState rest = map.stepper().rest_state();
        const auto a = floquet_spectrum(spec, rest, c);
        c.workers = 3;
        const auto b = floquet_spectrum(spec, rest, c);
        CHECK(a == b);
    }
    SUBCASE("vanishing probe is ill conditioned") {
        const SystemSpec spec = small_spec(0.0);
        PoincareConfig c = small_cfg();
        c.probe_dim = 2;
        c.probe_step = 1e-300;
        PoincareMap map(spec, c);
        CHECK_THROWS_AS(floquet_spectrum(spec, map.stepper().rest_state(), c), IllConditioned);
    }
}
