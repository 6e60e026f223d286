#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "swimcycle/coupling.hpp"
#include "swimcycle/error.hpp"

using namespace swimcycle;

namespace {

FluidGrid small_grid(int n = 64) {
    FluidGrid g;
    g.nx = g.ny = n;
    g.Lx = g.Ly = 4.0;
    g.sponge_width = n / 16;
    return g;
}

FluidState random_fluid(const FluidGrid& g, unsigned seed, double amp = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, amp);
    FluidState s = FluidState::zeros(g);
    for (double& x : s.u) x = n(rng);
    for (double& x : s.v) x = n(rng);
    return s;
}

void perturb(BodyState& b, double amp, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, amp);
    for (Vec2& p : b.positions) p += Vec2{n(rng), n(rng)};
}

double max_node_diff(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, norm(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("cosine kernel") {
    CHECK(peskin_cosine(0.0) == doctest::Approx(0.5));
    CHECK(peskin_cosine(2.0) == doctest::Approx(0.0));
    CHECK(peskin_cosine(2.5) == 0.0);
    for (double r : {0.0, 0.13, 0.5, 0.77}) {
        double sum = 0.0;
        for (int k = -3; k <= 3; ++k) sum += peskin_cosine(r + k);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("interpolation of a uniform field is exact") {
    const FluidGrid g = small_grid();
    FluidState s = FluidState::zeros(g);
    std::fill(s.u.begin(), s.u.end(), 0.3);
    std::fill(s.v.begin(), s.v.end(), -1.1);
    const std::vector<Vec2> pts{{2.0, 2.0}, {1.234, 2.71}, {0.01, 3.99}};
    for (const Vec2& u : interpolate(g, s, pts)) {
        CHECK(u.x == doctest::Approx(0.3).epsilon(1e-14));
        CHECK(u.y == doctest::Approx(-1.1).epsilon(1e-14));
    }
}

TEST_CASE("spread is the adjoint of interpolate") {
    const FluidGrid g = small_grid();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> pos(0.5, 3.5);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Vec2> X(30), F(30);
    for (auto& x : X) x = {pos(rng), pos(rng)};
    for (auto& f : F) f = {n(rng), n(rng)};
    const FluidState u = random_fluid(g, 2);
    const double lhs = grid_inner(g, spread(g, X, F), u);
    double rhs = 0.0;
    const auto U = interpolate(g, u, X);
    for (std::size_t k = 0; k < X.size(); ++k) rhs += dot(F[k], U[k]);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));

    const FluidState z = spread(g, X, std::vector<Vec2>(X.size()));
    for (double x : z.u) CHECK(x == 0.0);
}

TEST_CASE("spread conserves total force") {
    const FluidGrid g = small_grid();
    const std::vector<Vec2> X{{1.7, 2.2}}, F{{0.4, -0.9}};
    const FluidState f = spread(g, X, F);
    double sx = 0.0, sy = 0.0;
    for (double x : f.u) sx += x * g.cell_area();
    for (double y : f.v) sy += y * g.cell_area();
    CHECK(sx == doctest::Approx(0.4).epsilon(1e-13));
    CHECK(sy == doctest::Approx(-0.9).epsilon(1e-13));
}

TEST_CASE("rest state is a fixed point of the passive step") {
    const FluidGrid g = small_grid();
    Stepper st(g, make_fish_filament({}), ActuationSpec::passive(), {});
    SystemState s = st.rest_state();
    const SystemState s0 = s;
    st.step(s, 20);
    CHECK(s.t == doctest::Approx(20 * st.params().dt));
    CHECK(max_node_diff(s.body.positions, s0.body.positions) <= 1e-12);
    double um = 0.0;
    for (double x : s.fluid.u) um = std::max(um, std::abs(x));
    CHECK(um <= 1e-12);

    const EnergyLedger e = st.energy_ledger(s0);
    CHECK(e.E_total == doctest::Approx(0.0));
    CHECK(e.P_body == 0.0);
    CHECK(e.P_viscous == 0.0);
    CHECK(e.P_actuation == 0.0);
    CHECK(e.P_sponge == 0.0);
}

TEST_CASE("free body in the uncoupled inviscid limit") {
    FluidGrid g = small_grid();
    g.mu = 0.0;
    g.sponge_rate = 0.0;
    StepperParams p;
    p.coupling_stiffness = 0.0;
    Stepper st(g, make_fish_filament({}), ActuationSpec::passive(), p);
    SystemState s = st.rest_state();
    for (Vec2& v : s.body.velocities) v = {0.5, 0.25};
    const SystemState s0 = s;
    const double E0 = st.energy_ledger(s).E_total;
    const int n = 400;
    st.step(s, n);
    for (std::size_t i = 0; i < s.body.positions.size(); ++i) {
        const Vec2 expect = s0.body.positions[i] + n * p.dt * Vec2{0.5, 0.25};
        CHECK(norm(s.body.positions[i] - expect) <= 1e-10);
    }
    CHECK(std::abs(st.energy_ledger(s).E_total - E0) <= 1e-10 * E0);
}

TEST_CASE("momentum exchange balances") {
    const FluidGrid g = small_grid();
    Stepper st(g, make_fish_filament({}), {0.15, 1.0, 1, WavePattern::Traveling}, {});
    SystemState s = st.rest_state();
    s.fluid = random_fluid(g, 3, 0.05);
    st.solver().project(s.fluid);
    for (int k = 0; k < 5; ++k) {
        st.step(s);
        const ExchangeRecord& r = st.last_exchange();
        const Vec2 sum = r.body_impulse + r.fluid_impulse;
        CHECK(norm(sum) <= 1e-12 * std::max(1e-12, norm(r.body_impulse)) + 1e-16);
    }
}

TEST_CASE("ledger powers") {
    const FluidGrid g = small_grid(32);
    FluidGrid gv = g;
    gv.mu = 0.1;
    Stepper st(gv, make_fish_filament({}), ActuationSpec::passive(), {});
    SystemState s = st.rest_state();
    s.fluid = random_fluid(gv, 4);

    // mu <Lap_h u, u>_h with the five-point stencil, evaluated directly.
    const int n = gv.nx;
    const double h = gv.dx();
    auto at = [&](const std::vector<double>& f, int i, int j) {
        return f[((j + n) % n) * n + (i + n) % n];
    };
    double p = 0.0;
    for (const auto* f : {&s.fluid.u, &s.fluid.v})
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i) {
                const double lap = (at(*f, i + 1, j) + at(*f, i - 1, j) + at(*f, i, j + 1) +
                                    at(*f, i, j - 1) - 4 * at(*f, i, j)) / (h * h);
                p += gv.mu * lap * at(*f, i, j) * h * h;
            }
    const EnergyLedger e = st.energy_ledger(s);
    CHECK(e.P_viscous == doctest::Approx(p).epsilon(1e-12));
    CHECK(e.P_viscous < 0.0);
    CHECK(e.P_sponge <= 0.0);

    // Rigid rotation of the body in vacuum: no body dissipation.
    StepperParams free;
    free.coupling_stiffness = 0.0;
    Stepper vac(g, make_fish_filament({}), ActuationSpec::passive(), free);
    SystemState r = vac.rest_state();
    const Vec2 c{2.0, 2.0};
    for (std::size_t i = 0; i < r.body.positions.size(); ++i)
        r.body.velocities[i] = 0.8 * perp(r.body.positions[i] - c);
    CHECK(std::abs(vac.energy_ledger(r).P_body) <= 1e-12);
}

TEST_CASE("passive energy never increases") {
    const FluidGrid g = small_grid();
    Stepper st(g, make_fish_filament({}), ActuationSpec::passive(), {});
    SystemState s = st.rest_state();
    perturb(s.body, 0.005, 5);
    double E = st.energy_ledger(s).E_total;
    const double E0 = E;
    for (int k = 0; k < 400; ++k) {
        st.step(s);
        const double En = st.energy_ledger(s).E_total;
        CHECK(En <= E + 1e-9 * E0);
        E = En;
    }
    CHECK(E < E0);
}

TEST_CASE("whole-cell translation commutes with stepping") {
    // The sponge is pinned to the domain and breaks the symmetry on purpose.
    FluidGrid g = small_grid();
    g.sponge_rate = 0.0;
    Stepper st(g, make_fish_filament({}), {0.15, 1.0, 1, WavePattern::Traveling}, {});
    SystemState a = st.rest_state();
    perturb(a.body, 0.005, 6);
    SystemState b = translate_cells(a, g, 3, -2);
    st.step(a, 100);
    st.step(b, 100);
    const SystemState a2 = translate_cells(a, g, 3, -2);
    CHECK(max_node_diff(a2.body.positions, b.body.positions) <= 1e-10);
    CHECK(max_node_diff(a2.body.velocities, b.body.velocities) <= 1e-10);
    double m = 0.0;
    for (std::size_t k = 0; k < a2.fluid.u.size(); ++k)
        m = std::max({m, std::abs(a2.fluid.u[k] - b.fluid.u[k]), std::abs(a2.fluid.v[k] - b.fluid.v[k])});
    CHECK(m <= 1e-10);
}

TEST_CASE("body in the sponge is out of domain") {
    const FluidGrid g = small_grid();
    Stepper st(g, make_fish_filament({}), ActuationSpec::passive(), {});
    SystemState s = st.rest_state();
    for (Vec2& p : s.body.positions) p.x -= 1.8;
    CHECK_THROWS_AS(st.step(s), OutOfDomain);
}

TEST_CASE("deterministic stepping") {
    const FluidGrid g = small_grid();
    auto run = [&] {
        Stepper st(g, make_fish_filament({}), {0.15, 1.0, 1, WavePattern::Traveling}, {});
        SystemState s = st.rest_state();
        st.step(s, 50);
        return s;
    };
    const SystemState a = run(), b = run();
    CHECK(a.fluid == b.fluid);
    CHECK(a.body.positions == b.body.positions);
}

TEST_CASE("checkpoint round trip") {
    const FluidGrid g = small_grid(32);
    Stepper st(g, make_fish_filament({}), ActuationSpec::passive(), {});
    SystemState s = st.rest_state();
    s.fluid = random_fluid(g, 9);
    s.t = 0.75;
    std::stringstream a;
    write_checkpoint(a, {{"config_hash", "abc"}}, g, s);
    const std::string bytes = a.str();
    nlohmann::json header;
    const SystemState back = read_checkpoint(a, header);
    CHECK(header["config_hash"] == "abc");
    CHECK(back.fluid == s.fluid);
    CHECK(back.body.positions == s.body.positions);
    CHECK(back.t == s.t);
    std::stringstream b;
    write_checkpoint(b, header, g, back);
    CHECK(b.str() == bytes);
}
