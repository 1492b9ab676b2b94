#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsdelab/core_model.hpp"
#include "bsdelab/csv.hpp"
#include "bsdelab/forward_sim.hpp"

namespace bsdelab {

struct PdeGrid {
    int M = 400;       // spatial intervals on the mapped unit interval
    int N_pde = 2000;  // time steps on [t, T]

    void validate() const {
        if (M < 16) throw ConfigError("PdeGrid: M >= 16 required");
        if (N_pde < 4) throw ConfigError("PdeGrid: N_pde >= 4 required");
    }
};

enum class DensityMethod { PDE, MC };

inline const char* method_name(DensityMethod m) { return m == DensityMethod::PDE ? "PDE" : "MC"; }

struct DensityEstimate {
    DensityMethod method = DensityMethod::PDE;
    double t0 = 0.0;
    std::vector<double> s, density, survival, error;
    double min_density = 0.0;
    double max_cfl = 0.0;  // a dt / dx^2, recorded for the accuracy flag
    bool accuracy_flag = false;

    /// max_s |S(s) + int_t0^s f - 1| with the trapezoid rule.
    double mass_balance_error() const {
        double acc = 0.0, worst = std::abs(survival.front() - 1.0);
        for (std::size_t j = 1; j < s.size(); ++j) {
            acc += 0.5 * (density[j] + density[j - 1]) * (s[j] - s[j - 1]);
            worst = std::max(worst, std::abs(survival[j] + acc - 1.0));
        }
        return worst;
    }

    double interpolate_density(double x) const { return interp(density, x); }
    double interpolate_survival(double x) const { return interp(survival, x); }

private:
    double interp(const std::vector<double>& v, double x) const {
        if (x <= s.front()) return v.front();
        if (x >= s.back()) return v.back();
        const auto j = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin());
        const double w = (x - s[j - 1]) / (s[j] - s[j - 1]);
        return (1.0 - w) * v[j - 1] + w * v[j];
    }
};

// ---------------------------------------------------------------------------
// Forward equation on the mapped domain
// ---------------------------------------------------------------------------

/// Sub-probability density of the killed 1-d diffusion on a moving interval,
/// in mapped coordinates xi = (x - alpha(s)) / w(s), q = w p. With
/// v = alpha' + xi w' the conservative form is
///   q_s = -d_xi[(b - v) q / w] + d_xi^2[a q] / (2 w^2),
/// absorbing (q = 0) at xi = 0, 1.
class KilledDensity {
public:
    KilledDensity(const ForwardModel& model, const DomainFlow& dom, int M) : m_(model), dom_(dom), M_(M) {
        h_ = 1.0 / M;
        q_.assign(M + 1, 0.0);
        lo_.resize(M + 1);
        di_.resize(M + 1);
        up_.resize(M + 1);
    }

    /// Gaussian of sd 2 dx centred at x, normalised to unit mass.
    void start(double x, double t) {
        s_ = t;
        const double a = dom_.lower[0].value(t), w = dom_.upper[0].value(t) - a;
        const double sd = 2.0 * w * h_;
        for (int j = 1; j < M_; ++j) {
            const double y = a + j * h_ * w;
            q_[j] = w * std::exp(-0.5 * (y - x) * (y - x) / (sd * sd));
        }
        q_[0] = q_[M_] = 0.0;
        const double mass = survival();
        if (!(mass > 0)) throw ConfigError("survival_pde: start point too close to the boundary");
        for (auto& v : q_) v /= mass;
    }

    double survival() const {
        double acc = 0.0;
        for (int j = 1; j < M_; ++j) acc += q_[j];
        return acc * h_;
    }

    /// Minimum of p = q / w.
    double min_density() const {
        const double w = width(s_);
        return *std::min_element(q_.begin(), q_.end()) / w;
    }

    double time() const { return s_; }
    const std::vector<double>& state() const { return q_; }
    void set_state(const std::vector<double>& q, double s) {
        q_ = q;
        s_ = s;
    }

    /// One theta-step of size ds. With `frozen`, the domain is held at the
    /// current time (no boundary motion) for the step.
    void step(double ds, double theta, bool frozen = false) {
        const double s0 = s_, s1 = s_ + ds;
        const double sf = frozen ? s0 : s1;
        std::vector<double> rhs(M_ + 1, 0.0);
        // explicit part at s0
        coefficients(s0, frozen);
        for (int j = 1; j < M_; ++j) {
            const double lq = lo_[j] * q_[j - 1] + di_[j] * q_[j] + up_[j] * q_[j + 1];
            rhs[j] = q_[j] + (1.0 - theta) * ds * lq;
        }
        coefficients(frozen ? s0 : sf, frozen);
        // (I - theta ds L) q = rhs, Thomas algorithm
        std::vector<double> c(M_ + 1, 0.0), d(M_ + 1, 0.0);
        double prev_c = 0.0, prev_d = 0.0;
        for (int j = 1; j < M_; ++j) {
            const double aj = -theta * ds * lo_[j];
            const double bj = 1.0 - theta * ds * di_[j];
            const double cj = -theta * ds * up_[j];
            const double den = bj - aj * prev_c;
            c[j] = cj / den;
            d[j] = (rhs[j] - aj * prev_d) / den;
            prev_c = c[j];
            prev_d = d[j];
        }
        q_[M_] = 0.0;
        for (int j = M_ - 1; j >= 1; --j) q_[j] = d[j] - c[j] * q_[j + 1];
        q_[0] = 0.0;
        s_ = s1;
    }

    double width(double s) const { return dom_.upper[0].value(s) - dom_.lower[0].value(s); }

    /// a dt / dx^2 in physical units at time s.
    double cfl(double s, double ds) const {
        const double w = width(s);
        double amax = 0.0;
        for (int j = 0; j <= M_; ++j) {
            const double x = dom_.lower[0].value(s) + j * h_ * w;
            const double sig = m_.S0(0, 0) + x * m_.S1(0, 0);
            amax = std::max(amax, sig * sig);
        }
        return amax * ds / (w * h_ * w * h_);
    }

private:
    void coefficients(double s, bool frozen) {
        const double a0 = dom_.lower[0].value(s);
        const double w = width(s);
        const double da = frozen ? 0.0 : dom_.lower[0].velocity(s);
        const double dw = frozen ? 0.0 : dom_.upper[0].velocity(s) - dom_.lower[0].velocity(s);
        auto cA = [&](int j, double& c, double& A) {
            const double xi = j * h_;
            const double x = a0 + xi * w;
            const double b = m_.b0[0] + m_.B(0, 0) * x;
            const double sig = m_.S0(0, 0) + x * m_.S1(0, 0);
            c = (b - (da + xi * dw)) / w;
            A = sig * sig / (2.0 * w * w);
        };
        std::vector<double> c(M_ + 1), A(M_ + 1);
        for (int j = 0; j <= M_; ++j) cA(j, c[j], A[j]);
        const double h2 = h_ * h_;
        for (int j = 1; j < M_; ++j) {
            lo_[j] = c[j - 1] / (2.0 * h_) + A[j - 1] / h2;
            di_[j] = -2.0 * A[j] / h2;
            up_[j] = -c[j + 1] / (2.0 * h_) + A[j + 1] / h2;
        }
    }

    const ForwardModel& m_;
    const DomainFlow& dom_;
    int M_;
    double h_;
    double s_ = 0.0;
    std::vector<double> q_, lo_, di_, up_;
};

namespace detail {

inline void check_pde_inputs(const ForwardModel& model, const DomainFlow& domain, double x, double t) {
    if (model.dim != 1 || domain.dim() != 1) throw ConfigError("survival_pde: the PDE route is one-dimensional");
    if (!(t < domain.T)) throw ConfigError("survival_pde: start time must be < T");
    const double xx[1] = {x};
    if (!domain.contains(xx, t)) throw ConfigError("survival_pde: start point must be interior");
    if (!(domain.min_gap() > 0)) throw ConfigError("survival_pde: domain gap must be positive");
}

/// Survival on the uniform s-grid t = s_0 < ... < s_N = T.
inline DensityEstimate pde_run(const ForwardModel& model, const DomainFlow& domain, double x, double t, int M, int Nt) {
    KilledDensity kd(model, domain, M);
    kd.start(x, t);
    const double ds = (domain.T - t) / Nt;
    DensityEstimate est;
    est.method = DensityMethod::PDE;
    est.t0 = t;
    est.s.push_back(t);
    est.survival.push_back(kd.survival());
    double pmin = 0.0;
    for (int n = 0; n < Nt; ++n) {
        const double s_next = (n + 1 == Nt) ? domain.T : t + (n + 1) * ds;
        const double step = s_next - kd.time();
        est.max_cfl = std::max(est.max_cfl, kd.cfl(kd.time(), step));
        if (n == 0) {
            // Rannacher start: two implicit Euler half-steps
            kd.step(0.5 * step, 1.0);
            kd.step(0.5 * step, 1.0);
        } else {
            kd.step(step, 0.5);
        }
        pmin = std::min(pmin, kd.min_density());
        est.s.push_back(s_next);
        est.survival.push_back(kd.survival());
    }
    est.min_density = pmin;
    est.accuracy_flag = est.max_cfl > 1e3;
    const std::size_t K = est.s.size();
    est.density.resize(K);
    for (std::size_t j = 0; j < K; ++j) {
        if (j == 0) est.density[j] = -(est.survival[1] - est.survival[0]) / (est.s[1] - est.s[0]);
        else if (j + 1 == K) est.density[j] = -(est.survival[j] - est.survival[j - 1]) / (est.s[j] - est.s[j - 1]);
        else est.density[j] = -(est.survival[j + 1] - est.survival[j - 1]) / (est.s[j + 1] - est.s[j - 1]);
    }
    est.error.assign(K, 0.0);
    return est;
}

}  // namespace detail

/// Survival S(s) = P(tau > s) and exit density f = -S' of the 1-d diffusion
/// started at (x, t), from the forward equation with absorbing boundaries.
/// Error bars: difference to a run at half resolution in space and time.
inline DensityEstimate survival_pde(const ForwardModel& model, const DomainFlow& domain, double x, double t,
                                    const PdeGrid& grid) {
    grid.validate();
    detail::check_pde_inputs(model, domain, x, t);
    auto fine = detail::pde_run(model, domain, x, t, grid.M, grid.N_pde);
    if (fine.min_density < -1e-6)
        throw NumericalError("survival_pde: negative density " + format_number(fine.min_density) +
                             " (scheme unstable at this resolution)");
    const auto coarse = detail::pde_run(model, domain, x, t, grid.M / 2, grid.N_pde / 2);
    for (std::size_t j = 0; j < fine.s.size(); ++j)
        fine.error[j] = std::abs(fine.density[j] - coarse.interpolate_density(fine.s[j]));
    return fine;
}

/// -d/ds of the survival with the domain frozen at each requested s, i.e.
/// -int G_s dy without boundary motion. Richardson-combined small steps.
inline std::vector<double> frozen_domain_density(const ForwardModel& model, const DomainFlow& domain, double x,
                                                 double t, const PdeGrid& grid, const std::vector<double>& s_points) {
    grid.validate();
    detail::check_pde_inputs(model, domain, x, t);
    std::vector<double> targets = s_points;
    std::sort(targets.begin(), targets.end());
    KilledDensity kd(model, domain, grid.M);
    kd.start(x, t);
    const double ds = (domain.T - t) / grid.N_pde;
    std::vector<double> out;
    int n = 0;
    for (double sp : targets) {
        if (!(sp > t && sp < domain.T)) throw ConfigError("frozen_domain_density: s must lie in (t, T)");
        while (kd.time() + ds <= sp + 1e-14) {
            if (n == 0) {
                kd.step(0.5 * ds, 1.0);
                kd.step(0.5 * ds, 1.0);
            } else {
                kd.step(ds, 0.5);
            }
            ++n;
        }
        if (sp > kd.time()) kd.step(sp - kd.time(), 0.5);
        const auto q = kd.state();
        const double s0 = kd.time(), S0 = kd.survival();
        auto rate = [&](double hstep) {
            kd.set_state(q, s0);
            kd.step(hstep, 0.5, true);
            const double r = -(kd.survival() - S0) / hstep;
            return r;
        };
        const double h1 = 0.25 * ds;
        const double f1 = rate(h1), f2 = rate(0.5 * h1);
        out.push_back(2.0 * f2 - f1);
        kd.set_state(q, s0);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Image series for Brownian motion on a fixed interval
// ---------------------------------------------------------------------------

struct SeriesValue {
    double value = 0.0;
    double truncation_bound = 0.0;
};

/// Exit density at elapsed time s of sigma W started at x in (a, b):
/// sum_k (d + 2kw) / sqrt(2 pi s^3) exp(-(d + 2kw)^2 / (2s)) for d = b - x and
/// d = x - a, with w = b - a and s scaled by sigma^2. Terms |k| <= n_terms.
inline SeriesValue bm_exit_density_series(double a, double b, double x, double s, int n_terms, double sigma = 1.0) {
    if (!(a < x && x < b)) throw ConfigError("bm_exit_density_series: need a < x < b");
    if (!(s > 0)) throw ConfigError("bm_exit_density_series: s must be > 0");
    if (n_terms < 0) throw ConfigError("bm_exit_density_series: n_terms must be >= 0");
    const double w = b - a, tau = sigma * sigma * s;
    auto term = [&](double d, int k) {
        const double y = d + 2.0 * k * w;
        return y / std::sqrt(2.0 * M_PI * tau * tau * tau) * std::exp(-y * y / (2.0 * tau));
    };
    SeriesValue r;
    for (int k = -n_terms; k <= n_terms; ++k) r.value += term(b - x, k) + term(x - a, k);
    // tail: terms decay faster than geometrically once 2|k|w exceeds sqrt(tau)
    for (int k = n_terms + 1; k <= n_terms + 50; ++k) {
        const double t = std::abs(term(b - x, k)) + std::abs(term(b - x, -k)) + std::abs(term(x - a, k)) +
                         std::abs(term(x - a, -k));
        r.truncation_bound += t;
        if (t < 1e-300) break;
    }
    r.value *= sigma * sigma;
    r.truncation_bound *= sigma * sigma;
    if (r.truncation_bound > 1e-6)
        throw NumericalError("bm_exit_density_series: truncation bound " + format_number(r.truncation_bound) +
                             " exceeds 1e-6; raise n_terms");
    return r;
}

/// P(tau > s) for sigma W from x in (a, b), integrated image series.
inline SeriesValue bm_survival_series(double a, double b, double x, double s, int n_terms, double sigma = 1.0) {
    if (!(a < x && x < b)) throw ConfigError("bm_survival_series: need a < x < b");
    if (!(s > 0)) throw ConfigError("bm_survival_series: s must be > 0");
    const double w = b - a, sd = sigma * std::sqrt(s);
    auto Phi = [](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
    auto term = [&](int k) {
        const double c1 = x + 2.0 * k * w, c2 = 2.0 * b - x + 2.0 * k * w;
        return (Phi((b - c1) / sd) - Phi((a - c1) / sd)) - (Phi((b - c2) / sd) - Phi((a - c2) / sd));
    };
    SeriesValue r;
    for (int k = -n_terms; k <= n_terms; ++k) r.value += term(k);
    for (int k = n_terms + 1; k <= n_terms + 50; ++k) {
        const double t = std::abs(term(k)) + std::abs(term(-k));
        r.truncation_bound += t;
        if (t < 1e-300) break;
    }
    if (r.truncation_bound > 1e-6)
        throw NumericalError("bm_survival_series: truncation bound " + format_number(r.truncation_bound) +
                             " exceeds 1e-6; raise n_terms");
    return r;
}

// ---------------------------------------------------------------------------
// Monte Carlo density
// ---------------------------------------------------------------------------

inline double triangular_kernel(double u, double h) {
    const double a = std::abs(u) / h;
    return a < 1.0 ? (1.0 - a) / h : 0.0;
}

/// Mass of the triangular kernel centred at s that falls inside [lo, hi].
inline double triangular_mass_inside(double s, double h, double lo, double hi) {
    auto cdf = [h](double u) {  // integral of K over (-inf, u]
        const double a = std::clamp(u / h, -1.0, 1.0);
        return a <= 0 ? 0.5 * (1.0 + a) * (1.0 + a) : 1.0 - 0.5 * (1.0 - a) * (1.0 - a);
    };
    return cdf(hi - s) - cdf(lo - s);
}

/// Triangular-kernel density of the exit times in (t0, T], renormalised at
/// the interval edges; survival from the empirical distribution.
inline DensityEstimate density_mc(const std::vector<double>& exit_times, double t0, double T, double bandwidth,
                                  const std::vector<double>& s_grid) {
    if (!(bandwidth > 0)) throw ConfigError("density_mc: bandwidth must be > 0");
    std::vector<double> ex;
    for (double tau : exit_times)
        if (tau > t0 && tau <= T) ex.push_back(tau);
    if (ex.size() < 1000)
        throw NumericalError("density_mc: fewer than 10^3 exit events (" + std::to_string(ex.size()) + ")");
    std::sort(ex.begin(), ex.end());
    const double n = static_cast<double>(exit_times.size());
    DensityEstimate est;
    est.method = DensityMethod::MC;
    est.t0 = t0;
    est.s = s_grid;
    const auto cdf = empirical_exit_cdf(exit_times, s_grid);
    for (std::size_t j = 0; j < s_grid.size(); ++j) {
        const double s = s_grid[j];
        const double mass = std::max(triangular_mass_inside(s, bandwidth, t0, T), 1e-12);
        double sum = 0.0, sum2 = 0.0;
        auto lo = std::lower_bound(ex.begin(), ex.end(), s - bandwidth);
        auto hi = std::upper_bound(ex.begin(), ex.end(), s + bandwidth);
        for (auto it = lo; it != hi; ++it) {
            const double k = triangular_kernel(s - *it, bandwidth);
            sum += k;
            sum2 += k * k;
        }
        const double f = sum / n / mass;
        const double var = (sum2 / n - (sum / n) * (sum / n)) / n;
        est.density.push_back(f);
        est.error.push_back(std::sqrt(std::max(var, 0.0)) / mass);
        est.survival.push_back(1.0 - cdf.prob[j]);
    }
    return est;
}

inline DensityEstimate density_mc(const PathBundle& paths, double bandwidth, const std::vector<double>& s_grid) {
    if (!paths.has_exit_times()) throw ConfigError("density_mc: run detect_exit first");
    return density_mc(paths.exit_time, 0.0, paths.grid.T(), bandwidth, s_grid);
}

struct DensityBound {
    double value = 0.0;  // sup of the density on the window
    double error = 0.0;  // error estimate at the maximiser
    double at = 0.0;
};

/// Supremum of the density on [T - window, T] and its error bar.
inline DensityBound density_bound_near_T(const DensityEstimate& est, double window) {
    DensityBound b;
    const double T = est.s.back();
    bool any = false;
    for (std::size_t j = 0; j < est.s.size(); ++j) {
        if (est.s[j] < T - window - 1e-12) continue;
        if (!any || est.density[j] > b.value) {
            b.value = est.density[j];
            b.error = est.error.empty() ? 0.0 : est.error[j];
            b.at = est.s[j];
            any = true;
        }
    }
    b.value = std::max(b.value, 0.0);
    return b;
}

inline const std::vector<std::string>& density_header() {
    static const std::vector<std::string> h{"method", "s", "survival", "density", "error_estimate"};
    return h;
}

inline void append_density(CsvWriter& w, const DensityEstimate& e) {
    for (std::size_t j = 0; j < e.s.size(); ++j)
        w.row(method_name(e.method), e.s[j], e.survival[j], e.density[j], e.error[j]);
}

inline nlohmann::json curve_json(const BoundaryCurve& c) {
    switch (c.kind) {
        case BoundaryCurve::Kind::Constant: return {{"type", "constant"}, {"c", c.c0}};
        case BoundaryCurve::Kind::Linear: return {{"type", "linear"}, {"c0", c.c0}, {"slope", c.c1}};
        case BoundaryCurve::Kind::Sinusoidal:
            return {{"type", "sinusoidal"}, {"c0", c.c0}, {"amp", c.amp}, {"freq", c.freq}, {"phase", c.phase}};
    }
    return {};
}

/// Echo of the domain and the adjoint coefficients at the start point,
/// b* = -b + 2 da/dx, c* = -db/dx + d2a/dx2 with a = sigma^2 / 2 the
/// second-order coefficient of the generator.
inline nlohmann::json density_scenario_json(const ForwardModel& model, const DomainFlow& dom, double x, double t) {
    nlohmann::json lower = nlohmann::json::array(), upper = nlohmann::json::array();
    for (const auto& c : dom.lower) lower.push_back(curve_json(c));
    for (const auto& c : dom.upper) upper.push_back(curve_json(c));
    nlohmann::json j = {{"domain", {{"lower", lower}, {"upper", upper}, {"T", dom.T}}}, {"start", {{"x", x}, {"t", t}}}};
    if (model.dim == 1) {
        const double s0 = model.S0(0, 0), s1 = model.S1(0, 0);
        const double b = model.b0[0] + model.B(0, 0) * x;
        const double a1 = 2.0 * s1 * (s0 + s1 * x), a2 = 2.0 * s1 * s1;
        j["adjoint"] = {{"b_star_at_start", -b + a1},
                        {"c_star_at_start", 0.5 * a2 - model.B(0, 0)},
                        {"a_convention", "a = sigma^2/2 (generator coefficient)"},
                        {"hoelder", "coefficients are affine/analytic; hypothesis holds trivially"}};
    }
    return j;
}

}  // namespace bsdelab
