#include <catch_amalgamated.hpp>

#include <cmath>

#include "bsdelab/backward_solver.hpp"
#include "bsdelab/parallel.hpp"

using namespace bsdelab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

const auto kBM = ForwardModel::brownian(1, 1.0, Vector::Zero(1));

DomainFlow unit_interval() {
    return DomainFlow::interval(BoundaryCurve::constant(-1.0), BoundaryCurve::constant(1.0), 1.0);
}

TerminalDescriptor xi1(std::vector<double> ladder) {
    TerminalDescriptor t;
    t.kind = TerminalKind::Xi1;
    t.domain = unit_interval();
    t.ladder = std::move(ladder);
    return t;
}

TerminalDescriptor constant_terminal(double c) {
    TerminalDescriptor t;
    t.payoff = Payoff::constant(c);
    return t;
}

DriverDescriptor zero_driver() {
    auto d = DriverDescriptor::power(2.0, 3.0);
    d.eta = PiecewiseConstant::constant(kInf);
    return d;
}

PathBundle bm_with_exits(std::size_t n, int N, std::uint64_t seed, double gamma = 2.0) {
    auto b = simulate_paths(kBM, TimeGrid(1.0, N, gamma), n, {seed});
    detect_exit(b, unit_interval(), true);
    return b;
}

}  // namespace

TEST_CASE("truncated terminal values") {
    auto b = simulate_paths(kBM, TimeGrid(1.0, 10), 3, {1});
    b.exit_time = {0.3, kInf, 1.0};
    const auto a = truncated_terminal(b, xi1({1}), 5.0);
    CHECK(a == std::vector<double>{5.0, 0.0, 5.0});
    auto t2 = xi1({1});
    t2.kind = TerminalKind::Xi2;
    CHECK(truncated_terminal(b, t2, 5.0) == std::vector<double>{0.0, 5.0, 0.0});
    CHECK(truncated_terminal(b, constant_terminal(7.0), 5.0) == std::vector<double>{5.0, 5.0, 5.0});
    CHECK(truncated_terminal(b, constant_terminal(2.0), 5.0) == std::vector<double>{2.0, 2.0, 2.0});
    CHECK_THROWS_AS(truncated_terminal(b, xi1({1}), 0.0), ConfigError);
    b.exit_time.clear();
    CHECK_THROWS_AS(truncated_terminal(b, xi1({1}), 5.0), ConfigError);
}

TEST_CASE("implicit step solves its equation") {
    const auto d = DriverDescriptor::power(3.0, 10.0);
    for (double e : {0.0, 0.5, 3.0, 60.0, 1e4})
        for (double dt : {1e-4, 1e-2, 0.2}) {
            const auto r = implicit_solve(d, 0.0, dt, e, 0.0, 0.0, kInf);
            CHECK_THAT(r.y - dt * d.truncated(0.0, r.y, 0.0, 0.0, kInf), WithinAbs(e, 1e-13 * (1 + e)));
            CHECK(r.derivative > 0);
            CHECK(r.iterations <= kMaxImplicitIterations);
            CHECK(r.y <= e);
        }
    // f0 enters through min(f0, k)
    auto g = d;
    g.f0 = PiecewiseConstant::constant(10.0);
    const auto r = implicit_solve(g, 0.0, 0.1, 0.0, 0.0, 0.0, 2.0);
    CHECK_THAT(r.y + 0.1 * r.y * r.y * r.y - 0.1 * 2.0, WithinAbs(0.0, 1e-14));
}

TEST_CASE("state-independent terminal reproduces the ODE") {
    const auto b = simulate_paths(kBM, TimeGrid(1.0, 200, 1.0), 10000, {2});
    const auto sol = solve_truncated(b, DriverDescriptor::power(2.0, 3.0), constant_terminal(1.0), 1.0, RegressionSpec{});
    const double exact = y_truncated_ode(2.0, 1.0, 1.0);
    CHECK(std::abs(sol.Y0() - exact) / exact <= 2e-3);
    for (int i = 0; i <= 200; i += 20) CHECK_THAT(sol.y(i, 17), WithinRel(sol.mean_at(i), 1e-12));
}

TEST_CASE("zero driver gives the martingale of the terminal value") {
    const auto b = simulate_paths(kBM, TimeGrid(1.0, 50), 20000, {3});
    TerminalDescriptor t;
    t.payoff.a = Vector::Ones(1);  // g(x) = x
    t.ladder = {1e9};
    const auto sol = solve_truncated(b, zero_driver(), t, 1e9, RegressionSpec{1, 1});
    CHECK(std::abs(sol.Y0()) <= 3 * sol.Y0_stderr());
    CHECK(sol.Y0_stderr() > 0);
    // Y at the last step is exactly the projection of the terminal value
    const auto term = truncated_terminal(b, t, 1e9);
    const auto ce = conditional_expectation(b, 49, term, RegressionSpec{1, 1});
    for (std::size_t p = 0; p < b.n_paths; ++p) REQUIRE_THAT(sol.y(49, p), WithinAbs(ce[p], 1e-12));
}

TEST_CASE("terminal node carries the terminal value and Y stays nonnegative") {
    const auto b = bm_with_exits(5000, 60, 4);
    const auto t = xi1({1, 8});
    for (double k : t.ladder) {
        const auto sol = solve_truncated(b, DriverDescriptor::power(2.0, 3.0), t, k, RegressionSpec{1, 8});
        const auto term = truncated_terminal(b, t, k);
        for (std::size_t p = 0; p < b.n_paths; ++p) REQUIRE(sol.y(60, p) == term[p]);
        CHECK(*std::min_element(sol.Y.begin(), sol.Y.end()) >= 0.0);
        CHECK(sol.diag.min_step_derivative > 0.0);
        for (int it : sol.diag.max_iterations) CHECK(it <= kMaxImplicitIterations);
    }
}

TEST_CASE("comparison: a larger truncation gives a larger solution") {
    const auto b = bm_with_exits(10000, 80, 5);
    const auto d = DriverDescriptor::power(2.0, 3.0);
    const auto s4 = solve_truncated(b, d, xi1({4}), 4.0, RegressionSpec{1, 8});
    const auto s8 = solve_truncated(b, d, xi1({8}), 8.0, RegressionSpec{1, 8});
    const double se = std::hypot(s4.Y0_stderr(), s8.Y0_stderr());
    CHECK(s8.Y0() >= s4.Y0() - 2 * se);
    CHECK(s8.Y0() > s4.Y0());
}

TEST_CASE("the ladder is nondecreasing and stays below the blow-up solution") {
    const auto b = bm_with_exits(10000, 100, 6);
    const auto d = DriverDescriptor::power(3.0, 10.0);
    const auto lad = minimal_supersolution_ladder(b, d, xi1({1, 2, 4, 8, 16}), RegressionSpec{1, 16});
    REQUIRE(lad.levels.size() == 5);
    for (std::size_t j = 1; j < lad.levels.size(); ++j) {
        const auto& a = *lad.levels[j - 1].solution;
        const auto& c = *lad.levels[j].solution;
        CHECK(c.Y0() >= a.Y0() - 2 * std::hypot(a.Y0_stderr(), c.Y0_stderr()));
    }
    REQUIRE(lad.increments.size() == 4);
    CHECK(lad.extrapolated_Y0 >= lad.largest()->Y0());
    const auto& top = *lad.largest();
    for (int i = 0; i < 100; ++i)
        CHECK(*std::max_element(top.row(i), top.row(i) + b.n_paths) <= 1.05 * y_infinity(3.0, 1.0 - b.grid.t(i)));
}

TEST_CASE("every path stays below the implicit Euler solution of the ODE with the same level") {
    const auto b = bm_with_exits(10000, 100, 26);
    const auto d = DriverDescriptor::power(3.0, 10.0);
    for (double k : {4.0, 64.0}) {
        const auto sol = solve_truncated(b, d, xi1({k}), k, RegressionSpec{1, 16});
        double ode = k;
        for (int i = 99; i >= 0; --i) {
            ode = implicit_solve(d, b.grid.t(i), b.grid.dt(i), ode, 0.0, 0.0, k).y;
            const double mx = *std::max_element(sol.row(i), sol.row(i) + b.n_paths);
            CHECK(mx <= ode * (1 + 1e-12));
        }
    }
}

TEST_CASE("levels above a bounded terminal give identical solutions") {
    const auto b = simulate_paths(kBM, TimeGrid(1.0, 40), 3000, {7});
    auto t = constant_terminal(0.7);
    t.ladder = {1, 2, 4};
    const auto lad = minimal_supersolution_ladder(b, DriverDescriptor::power(2.0, 3.0), t, RegressionSpec{1, 4});
    CHECK(lad.levels[0].solution->Y == lad.levels[1].solution->Y);
    CHECK(lad.levels[1].solution->Y == lad.levels[2].solution->Y);
}

TEST_CASE("extrapolation recovers the blow-up limit of the ODE ladder") {
    std::vector<double> ks, y0;
    for (double k = 1; k <= 64; k *= 2) {
        ks.push_back(k);
        y0.push_back(y_truncated_ode(3.0, k, 1.0));
    }
    LadderResult r;
    extrapolate_ladder(ks, y0, r);
    CHECK(r.extrapolated);
    CHECK(std::abs(r.extrapolated_Y0 - y_infinity(3.0, 1.0)) < std::abs(y0.back() - y_infinity(3.0, 1.0)));
    CHECK_THAT(r.extrapolated_Y0, WithinRel(y_infinity(3.0, 1.0), 1e-3));
}

TEST_CASE("the solution does not depend on the worker count") {
    const auto b = bm_with_exits(4001, 40, 8);
    const auto d = DriverDescriptor::power(2.0, 3.0);
    set_worker_count(1);
    const auto a = solve_truncated(b, d, xi1({4}), 4.0, RegressionSpec{1, 8});
    set_worker_count(8);
    const auto c = solve_truncated(b, d, xi1({4}), 4.0, RegressionSpec{1, 8});
    set_worker_count(1);
    CHECK(a.Y == c.Y);
    CHECK(a.Z == c.Z);
    CHECK(a.pathwise == c.pathwise);
}

TEST_CASE("jump-driven solves") {
    auto model = kBM;
    JumpSpec j;
    j.intensity = 2.0;
    j.law = MarkLaw::UniformBox;
    j.mark_a = Vector::Constant(1, -0.3);
    j.mark_b = Vector::Constant(1, 0.3);
    model.jump = j;
    auto b = simulate_paths(model, TimeGrid(1.0, 50), 5000, {9});
    detect_exit(b, unit_interval(), false);
    auto d = DriverDescriptor::power(2.0, 3.0);
    const auto plain = solve_truncated(b, d, xi1({4}), 4.0, RegressionSpec{1, 8});
    d.psi_dep = true;
    // with theta = 0 the jump integral vanishes
    const auto zero = solve_truncated(b, d, xi1({4}), 4.0, RegressionSpec{1, 8});
    CHECK(plain.Y == zero.Y);
    b.model.jump->theta = 0.5;
    const auto with = solve_truncated(b, d, xi1({4}), 4.0, RegressionSpec{1, 8});
    for (double v : with.Y) REQUIRE(std::isfinite(v));
    CHECK(with.Y != plain.Y);
}

TEST_CASE("ill-posed implicit steps are reported") {
    const auto b = simulate_paths(kBM, TimeGrid(1.0, 10), 200, {10});
    auto d = DriverDescriptor::power(2.0, 3.0);
    d.chi = 50.0;
    CHECK_THROWS_AS(solve_truncated(b, d, constant_terminal(1.0), 1.0, RegressionSpec{}), NumericalError);
    d.chi = 0.0;
    d.psi_dep = true;
    CHECK_THROWS_AS(solve_truncated(b, d, constant_terminal(1.0), 1.0, RegressionSpec{}), ConfigError);
}
