#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "bsdelab/exit_density.hpp"
#include "bsdelab/forward_sim.hpp"
#include "bsdelab/parallel.hpp"

using namespace bsdelab;
using Catch::Matchers::WithinAbs;

namespace {

struct Moments {
    double mean, var, se;
};

Moments moments(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    s /= n - 1;
    return {m, s, std::sqrt(s / n)};
}

std::vector<double> terminal(const PathBundle& b) {
    std::vector<double> out(b.n_paths);
    for (std::size_t p = 0; p < b.n_paths; ++p) out[p] = b.x1(b.grid.N(), p);
    return out;
}

DomainFlow unit_interval(double T = 1.0) {
    return DomainFlow::interval(BoundaryCurve::constant(-1.0), BoundaryCurve::constant(1.0), T);
}

double fraction_exited(const std::vector<double>& tau, double s) {
    double k = 0;
    for (double t : tau) k += t <= s;
    return k / static_cast<double>(tau.size());
}

}  // namespace

TEST_CASE("Brownian motion has the right terminal moments") {
    const auto b = simulate_paths(ForwardModel::brownian(1, 1.0, Vector::Zero(1)), TimeGrid(1.0, 100), 100000, {11});
    const auto m = moments(terminal(b));
    CHECK(std::abs(m.mean) <= 3 * m.se);
    // var of the sample variance of N(0,1) is 2/(n-1)
    CHECK(std::abs(m.var - 1.0) <= 3 * std::sqrt(2.0 / 99999.0));
}

TEST_CASE("geometric Brownian motion has mean exp(mu T)") {
    Matrix s(1, 1);
    s << 0.2;
    const auto b = simulate_paths(ForwardModel::geometric(Vector::Constant(1, 0.05), s, Vector::Ones(1)),
                                  TimeGrid(1.0, 200, 1.0), 100000, {12});
    const auto m = moments(terminal(b));
    // Euler bias (1 + mu dt)^N vs exp(mu) is about 6e-6
    CHECK(std::abs(m.mean - std::exp(0.05)) <= 3 * m.se);
}

TEST_CASE("compound Poisson jumps have mean count lambda T") {
    auto model = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    JumpSpec j;
    j.intensity = 2.0;
    j.law = MarkLaw::PointMass;
    j.mark_a = Vector::Constant(1, 0.1);
    model.jump = j;
    const TimeGrid g(1.0, 50);
    const auto b = simulate_paths(model, g, 100000, {13});
    std::vector<double> counts(b.n_paths, 0.0);
    for (std::size_t p = 0; p < b.n_paths; ++p)
        for (int i = 0; i < g.N(); ++i) counts[p] += b.jumps_in_step(i, p);
    const auto m = moments(counts);
    CHECK(std::abs(m.mean - 2.0) <= 3 * std::sqrt(2.0 / 1e5));
    // jumps shift the terminal mean by lambda T * mark
    const auto t = moments(terminal(b));
    CHECK(std::abs(t.mean - 0.2) <= 3 * t.se);
}

TEST_CASE("jump times never coincide with grid nodes") {
    auto model = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    JumpSpec j;
    j.intensity = 5.0;
    j.law = MarkLaw::UniformBox;
    j.mark_a = Vector::Constant(1, -0.3);
    j.mark_b = Vector::Constant(1, 0.3);
    model.jump = j;
    const TimeGrid g(1.0, 40);
    auto b = simulate_paths(model, g, 2000, {14});
    detect_exit(b, unit_interval(), true);
    std::size_t total = 0;
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        for (const auto& e : b.jumps[p]) {
            ++total;
            CHECK(e.time > g.t(e.step));
            CHECK(e.time < g.t(e.step + 1));
            CHECK(e.time != b.exit_time[p]);
            CHECK(e.mark[0] >= -0.3);
            CHECK(e.mark[0] <= 0.3);
        }
    }
    CHECK(total > 0);
}

TEST_CASE("paths start at x0 and increments have variance dt") {
    Vector x0(2);
    x0 << 0.3, -0.2;
    const TimeGrid g(1.0, 20);
    const auto b = simulate_paths(ForwardModel::brownian(2, 1.0, x0), g, 100000, {15});
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        REQUIRE(b.x(0, p)[0] == 0.3);
        REQUIRE(b.x(0, p)[1] == -0.2);
    }
    for (int i = 0; i < g.N(); ++i)
        for (int c = 0; c < 2; ++c) {
            std::vector<double> sq(b.n_paths);
            for (std::size_t p = 0; p < b.n_paths; ++p) sq[p] = b.dw(i, p)[c] * b.dw(i, p)[c];
            const auto m = moments(sq);
            CHECK(std::abs(m.mean - g.dt(i)) <= 5 * m.se);
        }
}

TEST_CASE("simulation is bit-identical for any worker count") {
    const auto model = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    const TimeGrid g(1.0, 64);
    set_worker_count(1);
    auto a = simulate_paths(model, g, 3001, {16});
    detect_exit(a, unit_interval(), true);
    set_worker_count(8);
    auto b = simulate_paths(model, g, 3001, {16});
    detect_exit(b, unit_interval(), true);
    const auto c = simulate_exit_times(model, g, 3001, {16}, unit_interval(), true);
    set_worker_count(1);
    CHECK(a.states == b.states);
    CHECK(a.dW == b.dW);
    CHECK(a.exit_time == b.exit_time);
    CHECK(a.exit_time == c);
    auto d = simulate_paths(model, g, 3001, {17});
    CHECK(a.states != d.states);
}

TEST_CASE("a domain that is never reached gives the sentinel") {
    auto b = simulate_paths(ForwardModel::brownian(1, 1.0, Vector::Zero(1)), TimeGrid(1.0, 50), 5000, {18});
    const auto huge = DomainFlow::interval(BoundaryCurve::constant(-1e6), BoundaryCurve::constant(1e6), 1.0);
    for (bool bridge : {false, true}) {
        detect_exit(b, huge, bridge);
        for (double t : b.exit_time) REQUIRE(t == kInf);
    }
}

TEST_CASE("a moving lower boundary stops a constant path at the first node after the crossing") {
    const auto still = ForwardModel::brownian(1, 0.0, Vector::Zero(1));
    const auto dom = DomainFlow::interval(BoundaryCurve::linear(-1.0, 4.0), BoundaryCurve::constant(10.0), 1.0);
    for (int N : {4, 30, 100}) {
        const TimeGrid g(1.0, N, 1.0);
        auto b = simulate_paths(still, g, 3, {19});
        detect_exit(b, dom, false);
        const double expect = g.t(g.first_at_or_after(0.25));
        for (double t : b.exit_time) CHECK(t == expect);
    }
}

TEST_CASE("bridge correction exits earlier and matches the exact survival") {
    const auto model = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    const TimeGrid g(1.0, 50, 1.0);
    auto b = simulate_paths(model, g, 100000, {20});
    detect_exit(b, unit_interval(), false);
    const auto plain = b.exit_time;
    detect_exit(b, unit_interval(), true);
    for (std::size_t p = 0; p < b.n_paths; ++p) REQUIRE(b.exit_time[p] <= plain[p]);
    const double exact = 1.0 - bm_survival_series(-1, 1, 0, 1.0, 50).value;
    const double pb = fraction_exited(b.exit_time, 1.0), pn = fraction_exited(plain, 1.0);
    const double se = std::sqrt(exact * (1 - exact) / 1e5);
    CHECK(pb > pn);
    CHECK(std::abs(pb - exact) < std::abs(pn - exact));
    CHECK(std::abs(pb - exact) <= 3 * se);
}

TEST_CASE("exit times are monotone in the domain") {
    const auto model = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    const TimeGrid g(1.0, 60);
    auto b = simulate_paths(model, g, 20000, {21});
    const auto big = DomainFlow::interval(BoundaryCurve::constant(-1.3), BoundaryCurve::linear(1.2, 0.1), 1.0);
    for (bool bridge : {false, true}) {
        detect_exit(b, unit_interval(), bridge);
        const auto small = b.exit_time;
        detect_exit(b, big, bridge);
        for (std::size_t p = 0; p < b.n_paths; ++p) REQUIRE(b.exit_time[p] >= small[p]);
    }
}

TEST_CASE("exit probability is consistent under grid refinement") {
    const auto model = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    const auto a = simulate_exit_times(model, TimeGrid(1.0, 100), 100000, {22}, unit_interval(), true);
    const auto b = simulate_exit_times(model, TimeGrid(1.0, 200), 100000, {23}, unit_interval(), true);
    const double pa = fraction_exited(a, 1.0), pb = fraction_exited(b, 1.0);
    const double se = std::sqrt(pa * (1 - pa) / 1e5 + pb * (1 - pb) / 1e5);
    CHECK(std::abs(pa - pb) <= 3 * se);
}

TEST_CASE("empirical exit CDF is a distribution function") {
    const auto tau = simulate_exit_times(ForwardModel::brownian(1, 1.0, Vector::Zero(1)), TimeGrid(1.0, 100), 20000,
                                         {24}, unit_interval(), true);
    std::vector<double> s;
    for (int i = 0; i <= 50; ++i) s.push_back(0.02 * i);
    const auto cdf = empirical_exit_cdf(tau, s);
    CHECK(cdf.prob.front() == 0.0);
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(cdf.prob[i] >= cdf.prob[i - 1]);
    CHECK(cdf.prob.back() <= 1.0);
    CHECK(cdf.prob.back() == fraction_exited(tau, 1.0));
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK_THAT(cdf.stderr_[i], WithinAbs(std::sqrt(cdf.prob[i] * (1 - cdf.prob[i]) / 20000), 1e-15));
}

TEST_CASE("input errors") {
    const auto model = ForwardModel::brownian(1, 1.0, Vector::Zero(1));
    SECTION("domain dimension") {
        auto b = simulate_paths(model, TimeGrid(1.0, 10), 10, {1});
        const auto box = DomainFlow::fixed_box(Vector::Constant(2, -1), Vector::Constant(2, 1), 1.0);
        CHECK_THROWS_AS(detect_exit(b, box, false), ConfigError);
    }
    SECTION("horizon") {
        auto b = simulate_paths(model, TimeGrid(1.0, 10), 10, {1});
        CHECK_THROWS_AS(detect_exit(b, unit_interval(2.0), false), ConfigError);
    }
    SECTION("memory budget") {
        SimOptions o;
        o.memory_budget_bytes = 1 << 20;
        CHECK_THROWS_AS(simulate_paths(model, TimeGrid(1.0, 1000), 100000, {1}, o), ResourceError);
    }
    SECTION("inconsistent model") {
        auto m = model;
        m.x0 = Vector::Zero(3);
        CHECK_THROWS_AS(simulate_paths(m, TimeGrid(1.0, 10), 10, {1}), ConfigError);
    }
    SECTION("CDF before exit detection") {
        const auto b = simulate_paths(model, TimeGrid(1.0, 10), 10, {1});
        CHECK_THROWS_AS(empirical_exit_cdf(b, {0.5}), ConfigError);
    }
}
