#include <catch_amalgamated.hpp>

#include <cmath>

#include "bsdelab/core_model.hpp"

using namespace bsdelab;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

TerminalDescriptor bounded(double c) {
    TerminalDescriptor t;
    t.payoff = Payoff::constant(c);
    return t;
}

// classical RK4 for y' = y^q backward in t, i.e. dy/ds = -y^q in time-to-horizon s
double rk4_backward(double q, double k, double s) {
    double y = k, left = s;
    auto f = [q](double v) { return -std::pow(v, q); };
    while (left > 0) {
        // step shrinks with the local stiffness q y^(q-1)
        const double h = std::min(left, 1e-3 / (q * std::pow(y, q - 1.0)));
        const double k1 = f(y), k2 = f(y + 0.5 * h * k1), k3 = f(y + 0.5 * h * k2), k4 = f(y + h * k3);
        y += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        left -= h;
    }
    return y;
}

}  // namespace

TEST_CASE("brownian model with power driver validates") {
    const auto r = validate_model(ForwardModel::brownian(1, 1.0, Vector::Zero(1)), DriverDescriptor::power(2.0, 3.0),
                                  bounded(1.0), TimeGrid(1.0, 50));
    CHECK(r.passed());
    for (const auto& c : r.checks) CHECK(std::isfinite(c.witness));
    REQUIRE(r.find("ellipticity"));
    CHECK_THAT(r.find("ellipticity")->witness, WithinAbs(1.0, 1e-12));
    CHECK_THAT(r.find("eta.inverse_integrable")->witness, WithinAbs(1.0, 1e-12));
}

TEST_CASE("q = 1 fails the power condition") {
    auto d = DriverDescriptor::power(2.0, 3.0);
    d.q = 1.0;
    const auto r = validate_model(ForwardModel::brownian(1, 1.0, Vector::Zero(1)), d, bounded(1.0), TimeGrid(1.0, 10));
    CHECK_FALSE(r.passed());
    REQUIRE(r.find("C1.q_gt_1"));
    CHECK_FALSE(r.find("C1.q_gt_1")->passed);
    CHECK(r.find("C1.q_gt_1")->note == "q > 1 required");
}

TEST_CASE("degenerate diffusion fails ellipticity with witness 0") {
    const auto r = validate_model(ForwardModel::brownian(1, 0.0, Vector::Zero(1)), DriverDescriptor::power(2.0, 3.0),
                                  bounded(1.0), TimeGrid(1.0, 10));
    CHECK_FALSE(r.passed());
    CHECK_FALSE(r.find("ellipticity")->passed);
    CHECK(r.find("ellipticity")->witness == 0.0);
}

TEST_CASE("validation catches bad descriptors") {
    const auto bm = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    const TimeGrid g(1.0, 10);
    SECTION("p not conjugate") {
        auto d = DriverDescriptor::power(3.0, 3.0);
        d.p = 2.0;
        CHECK_FALSE(validate_model(bm, d, bounded(1), g).find("C1.hoelder_conjugate")->passed);
    }
    SECTION("ell <= 1") {
        CHECK_FALSE(validate_model(bm, DriverDescriptor::power(2, 1.0), bounded(1), g).find("C2.ell_gt_1")->passed);
    }
    SECTION("negative f0") {
        auto d = DriverDescriptor::power(2, 3);
        d.f0 = PiecewiseConstant::constant(-1.0);
        CHECK_FALSE(validate_model(bm, d, bounded(1), g).find("C4.f0_nonneg_integrable")->passed);
    }
    SECTION("eta not bounded below") {
        auto d = DriverDescriptor::power(2, 3);
        d.eta = PiecewiseConstant{{0.5}, {1.0, 0.0}};
        CHECK_FALSE(validate_model(bm, d, bounded(1), g).find("eta.positive")->passed);
    }
    SECTION("ladder not increasing") {
        auto t = bounded(1);
        t.ladder = {1, 4, 2};
        CHECK_FALSE(validate_model(bm, DriverDescriptor::power(2, 3), t, g).find("terminal.ladder")->passed);
    }
    SECTION("singular terminal without domain") {
        TerminalDescriptor t;
        t.kind = TerminalKind::Xi1;
        CHECK_FALSE(validate_model(bm, DriverDescriptor::power(2, 3), t, g).find("terminal.domain")->passed);
    }
    SECTION("x0 outside the domain") {
        TerminalDescriptor t;
        t.kind = TerminalKind::Xi1;
        t.domain = DomainFlow::interval(BoundaryCurve::constant(0.5), BoundaryCurve::constant(1.0), 1.0);
        CHECK_FALSE(validate_model(bm, DriverDescriptor::power(2, 3), t, g).find("domain.x0_interior")->passed);
    }
    SECTION("dimension mismatch") {
        auto m = bm;
        m.x0 = Vector::Zero(2);
        CHECK_FALSE(validate_model(m, DriverDescriptor::power(2, 3), bounded(1), g).find("model.dimensions")->passed);
    }
    SECTION("psi dependence without jumps") {
        auto d = DriverDescriptor::power(2, 3);
        d.psi_dep = true;
        CHECK_FALSE(validate_model(bm, d, bounded(1), g).passed());
    }
}

TEST_CASE("GBM is flagged as only locally Hoelder; xi2 records left continuity") {
    Matrix s(1, 1);
    s << 0.2;
    TerminalDescriptor t;
    t.kind = TerminalKind::Xi2;
    t.domain = DomainFlow::interval(BoundaryCurve::constant(0.5), BoundaryCurve::constant(2.0), 1.0);
    const auto r = validate_model(ForwardModel::geometric(Vector::Constant(1, 0.05), s, Vector::Ones(1)),
                                  DriverDescriptor::power(2, 3), t, TimeGrid(1.0, 10));
    CHECK(r.passed());
    CHECK(r.find("hoelder_coefficients")->note.find("locally") != std::string::npos);
    CHECK(r.find("H1.left_continuity"));
}

TEST_CASE("validation is deterministic") {
    const auto bm = ForwardModel::brownian(2, 0.7, Vector::Zero(2));
    const auto a = validate_model(bm, DriverDescriptor::power(3, 10), bounded(1), TimeGrid(1, 40));
    const auto b = validate_model(bm, DriverDescriptor::power(3, 10), bounded(1), TimeGrid(1, 40));
    REQUIRE(a.checks.size() == b.checks.size());
    for (std::size_t i = 0; i < a.checks.size(); ++i) {
        CHECK(a.checks[i].name == b.checks[i].name);
        CHECK(a.checks[i].passed == b.checks[i].passed);
        CHECK(a.checks[i].witness == b.checks[i].witness);
    }
}

TEST_CASE("y_infinity closed form") {
    CHECK_THAT(y_infinity(2.0, 0.5), WithinRel(2.0, 1e-15));
    CHECK_THAT(y_infinity(3.0, 0.5), WithinRel(1.0, 1e-15));
    CHECK_THAT(y_infinity(2.0, 1e-6), WithinRel(1e6, 1e-12));
    CHECK_THROWS_AS(y_infinity(2.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(y_infinity(2.0, -1.0), std::domain_error);
    auto d = DriverDescriptor::power(2, 3);
    CHECK_THAT(y_infinity(d, 0.5), WithinRel(2.0, 1e-15));
    d.f0 = PiecewiseConstant::constant(1.0);
    CHECK_THROWS_AS(y_infinity(d, 0.5), ConfigError);
}

TEST_CASE("y_truncated_ode agrees with fourth-order integration") {
    CHECK_THAT(rk4_backward(2.0, 1.0, 1.0), WithinAbs(0.5, 1e-12));
    CHECK_THAT(y_truncated_ode(2.0, 1.0, 1.0), WithinAbs(0.5, 1e-15));
    for (double q : {1.5, 2.0, 3.0, 4.5})
        for (double k : {0.3, 1.0, 5.0, 40.0})
            for (double s : {0.01, 0.3, 1.0, 2.0})
                CHECK_THAT(y_truncated_ode(q, k, s), WithinRel(rk4_backward(q, k, s), 1e-9));
}

TEST_CASE("y_truncated_ode edge cases") {
    CHECK(y_truncated_ode(2.0, 7.0, 0.0) == 7.0);
    CHECK(y_truncated_ode(3.3, 0.2, 0.0) == 0.2);
    CHECK_THAT(y_truncated_ode(2.0, kInf, 0.5), WithinRel(2.0, 1e-15));
    CHECK_THAT(y_truncated_ode(2.0, 1e12, 0.5), WithinRel(2.0, 1e-9));
    CHECK_THROWS(y_truncated_ode(2.0, 0.0, 1.0));
    CHECK_THROWS(y_truncated_ode(2.0, -1.0, 1.0));
}

TEST_CASE("y_truncated_ode is nondecreasing in k and converges to y_infinity") {
    for (double q : {1.5, 2.0, 3.0})
        for (double s : {0.05, 0.5, 1.0}) {
            double prev = 0.0;
            for (double k = 0.125; k < 1e14; k *= 2) {
                const double y = y_truncated_ode(q, k, s);
                CHECK(y >= prev);
                CHECK(y <= y_infinity(q, s));
                prev = y;
            }
            CHECK_THAT(prev, WithinRel(y_infinity(q, s), 1e-3));
        }
}

TEST_CASE("y_infinity solves y' = y^q") {
    // residual of a central difference with step 1e-5, relative to y^q
    const double h = 1e-5;
    for (double q : {2.0, 3.0})
        for (int j = 0; j <= 90; ++j) {
            const double s = 0.1 + 0.01 * j;
            const double dy = -(y_infinity(q, s + h) - y_infinity(q, s - h)) / (2 * h);  // d/dt = -d/ds
            const double yq = std::pow(y_infinity(q, s), q);
            CHECK(std::abs(dy - yq) / yq <= 1e-8);
        }
}

TEST_CASE("Hoelder conjugate is exact") {
    for (double q : {1.5, 2.0, 3.0}) {
        const auto d = DriverDescriptor::power(q, 3.0);
        CHECK(d.p * (d.q - 1.0) == d.q);
    }
}

TEST_CASE("time grid invariants") {
    for (double gamma : {1.0, 2.0, 3.5}) {
        const TimeGrid g(2.0, 37, gamma);
        CHECK(g.t(0) == 0.0);
        CHECK(g.t(g.N()) == 2.0);
        CHECK(g.max_step() <= g.T());
        for (int i = 0; i < g.N(); ++i) CHECK(g.t(i) < g.t(i + 1));
        if (gamma > 1) CHECK(g.dt(g.N() - 1) < g.dt(0));
    }
    CHECK_THROWS_AS(TimeGrid(1.0, 0), ConfigError);
    CHECK_THROWS_AS(TimeGrid(0.0, 10), ConfigError);
    CHECK_THROWS_AS(TimeGrid(1.0, 10, 0.5), ConfigError);
    const TimeGrid u(1.0, 4, 1.0);
    CHECK(u.nearest(0.3) == 1);
    CHECK(u.nearest(0.4) == 2);
    CHECK(u.first_at_or_after(0.25) == 1);
    CHECK(u.first_at_or_after(0.26) == 2);
}

TEST_CASE("piecewise constant functions integrate exactly") {
    const PiecewiseConstant pc{{0.25, 0.5}, {1.0, 2.0, 4.0}};
    CHECK(pc(0.1) == 1.0);
    CHECK(pc(0.25) == 2.0);
    CHECK(pc(0.9) == 4.0);
    CHECK_THAT(pc.integral(0.0, 1.0, [](double v) { return v; }), WithinAbs(0.25 + 0.5 + 2.0, 1e-15));
    CHECK(pc.min_on(0.3, 1.0) == 2.0);
    CHECK_THAT(integrate([](double x) { return x * x; }, 0.0, 3.0), WithinRel(9.0, 1e-13));
}

TEST_CASE("boundary curves and domains") {
    const auto lin = BoundaryCurve::linear(1.0, -0.5);
    CHECK(lin.value(1.0) == 0.5);
    CHECK(lin.velocity(0.3) == -0.5);
    const auto sn = BoundaryCurve::sinusoidal(1.0, 0.2, 2.0);
    CHECK_THAT(sn.max_speed(), WithinRel(0.2 * 2.0 * 2.0 * M_PI, 1e-12));
    const auto dom = DomainFlow::interval(BoundaryCurve::constant(-1.0), lin, 1.0);
    CHECK_THAT(dom.min_gap(), WithinAbs(1.5, 1e-12));
    const double x = 0.7;
    CHECK(dom.contains(&x, 0.0));
    CHECK_FALSE(dom.contains(&x, 0.8));
}
