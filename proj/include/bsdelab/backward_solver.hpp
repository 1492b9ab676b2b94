#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "bsdelab/core_model.hpp"
#include "bsdelab/csv.hpp"
#include "bsdelab/forward_sim.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/regression.hpp"

namespace bsdelab {

inline constexpr int kMaxImplicitIterations = 100;

struct BackwardDiagnostics {
    std::vector<double> condition;   // per node 0..last-1
    std::vector<int> max_iterations;  // per node
    double min_step_derivative = kInf;  // min over roots of d/dy [y - dt f^k]
    std::vector<std::string> warnings;
};

/// Value, control and jump-integral estimates on the grid. Arrays are
/// node-major: Y[i * n + p].
struct BackwardSolution {
    TimeGrid grid;
    std::size_t n_paths = 0;
    int dim = 1;
    double k = kInf;
    int last_node = 0;  // horizon node of this solve (N unless solved on [0, t_n])
    std::vector<double> Y;  // (last_node + 1) * n
    std::vector<double> Z;  // last_node * n * d
    std::vector<double> I;  // last_node * n
    std::vector<NodeFit> fits;  // fit of E[Y_{i+1} | F_i] per node
    // (last_node + 1) * n: realized end value plus the driver sum from the node
    // on; equals Y on stopped paths. Its path mean estimates the same quantity
    // as the mean of Y, with the Monte Carlo noise visible in its spread.
    std::vector<double> pathwise;
    BackwardDiagnostics diag;

    double y(int node, std::size_t p) const { return Y[static_cast<std::size_t>(node) * n_paths + p]; }
    const double* row(int node) const { return Y.data() + static_cast<std::size_t>(node) * n_paths; }
    const double* pathwise_row(int node) const { return pathwise.data() + static_cast<std::size_t>(node) * n_paths; }

    double Y0() const { return mean_at(0); }
    /// Standard error of Y0 from the spread of the pathwise estimator.
    double Y0_stderr() const {
        const double n = static_cast<double>(n_paths);
        if (n < 2 || pathwise.empty()) return 0.0;
        const double* r = pathwise_row(0);
        const double m = std::accumulate(r, r + n_paths, 0.0) / n;
        double ss = 0.0;
        for (std::size_t p = 0; p < n_paths; ++p) ss += (r[p] - m) * (r[p] - m);
        return std::sqrt(ss / (n - 1) / n);
    }
    double mean_at(int node) const {
        const double* r = row(node);
        return std::accumulate(r, r + n_paths, 0.0) / static_cast<double>(n_paths);
    }
};

/// Mean and standard error of v over the paths with mask[p] set.
struct MaskedMean {
    double mean = std::nan("");
    double stderr_ = std::nan("");
    double sd = std::nan("");
    std::size_t count = 0;
};

template <class Pred>
MaskedMean masked_mean(const double* v, std::size_t n, Pred&& take) {
    MaskedMean r;
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        if (take(p)) {
            s += v[p];
            ++r.count;
        }
    if (r.count == 0) return r;
    r.mean = s / static_cast<double>(r.count);
    double ss = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        if (take(p)) ss += (v[p] - r.mean) * (v[p] - r.mean);
    r.sd = r.count > 1 ? std::sqrt(ss / static_cast<double>(r.count - 1)) : 0.0;
    r.stderr_ = r.sd / std::sqrt(static_cast<double>(r.count));
    return r;
}

// ---------------------------------------------------------------------------
// Terminal values
// ---------------------------------------------------------------------------

/// XI1 -> k 1{tau <= T}; XI2 -> k 1{tau > T}; BOUNDED -> min(g(X_T), k).
inline std::vector<double> truncated_terminal(const PathBundle& paths, const TerminalDescriptor& terminal, double k) {
    if (!(k > 0.0)) throw ConfigError("truncated_terminal: level k must be > 0");
    std::vector<double> out(paths.n_paths);
    const double T = paths.grid.T();
    const int N = paths.grid.N();
    if (terminal.singular() && !paths.has_exit_times())
        throw ConfigError("truncated_terminal: singular terminal needs exit times (run detect_exit)");
    for (std::size_t p = 0; p < paths.n_paths; ++p) {
        switch (terminal.kind) {
            case TerminalKind::Xi1: out[p] = paths.exit_time[p] <= T ? k : 0.0; break;
            case TerminalKind::Xi2: out[p] = paths.exit_time[p] > T ? k : 0.0; break;
            case TerminalKind::Bounded: out[p] = std::min(terminal.payoff(paths.x(N, p), paths.dim), k); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Implicit step
// ---------------------------------------------------------------------------

struct ImplicitRoot {
    double y;
    int iterations;
    double derivative;  // d/dy [y - dt f]
};

/// Solves y - dt * f^k(t, y, z, I) = e for y by safeguarded Newton. The map is
/// strictly increasing when dt * chi < 1, so the root is unique.
inline ImplicitRoot implicit_solve(const DriverDescriptor& drv, double t, double dt, double e, double z_term,
                                   double jump_term, double k) {
    auto F = [&](double y) { return y - dt * drv.truncated(t, y, z_term, jump_term, k) - e; };
    auto dF = [&](double y) { return 1.0 - dt * drv.dy(t, y); };
    const double tol = 1e-14 * (1.0 + std::abs(e));
    double y = e;
    double fy = F(y);
    if (std::abs(fy) <= tol) return {y, 0, dF(y)};

    // bracket [lo, hi] with F(lo) < 0 < F(hi)
    double lo = y, hi = y, step = std::max(1.0, std::abs(e));
    if (fy < 0) {
        for (int j = 0; F(hi) < 0; ++j) {
            lo = hi;
            hi = y + step;
            step *= 2.0;
            if (j > 200) throw NumericalError("implicit step: cannot bracket root");
        }
    } else {
        for (int j = 0; F(lo) > 0; ++j) {
            hi = lo;
            lo = y - step;
            step *= 2.0;
            if (j > 200) throw NumericalError("implicit step: cannot bracket root");
        }
    }
    y = std::clamp(y, lo, hi);
    for (int it = 1; it <= kMaxImplicitIterations; ++it) {
        fy = F(y);
        if (std::abs(fy) <= tol || hi - lo <= 1e-15 * (1.0 + std::abs(y))) return {y, it, dF(y)};
        if (fy < 0) lo = y;
        else hi = y;
        const double d = dF(y);
        double yn = d > 0 ? y - fy / d : 0.5 * (lo + hi);
        if (!(yn > lo && yn < hi)) yn = 0.5 * (lo + hi);
        y = yn;
    }
    throw NumericalError("implicit step: no convergence within " + std::to_string(kMaxImplicitIterations) +
                         " iterations");
}

// ---------------------------------------------------------------------------
// Backward sweep
// ---------------------------------------------------------------------------

/// What a sweep solves. Without `stop`, every path is carried to last_node
/// with terminal values `terminal`. With `stop`, paths are stopped at tau:
/// a path with tau <= t_{i+1} enters the step i regression with the value
/// stop(p), and its grid values from the first node >= tau on are after(p, i).
struct SweepProblem {
    int last_node = -1;  // -1 means N
    std::vector<double> terminal;  // per path, at last_node
    double k = kInf;
    bool clamp_nonnegative = true;
    std::function<double(std::size_t)> stop;
    std::function<double(std::size_t, int)> after;
};

inline BackwardSolution backward_sweep(const PathBundle& paths, const DriverDescriptor& driver,
                                       const SweepProblem& prob, const RegressionSpec& reg) {
    reg.validate();
    const std::size_t n = paths.n_paths;
    const int d = paths.dim;
    const int last = prob.last_node < 0 ? paths.grid.N() : prob.last_node;
    if (last < 1 || last > paths.grid.N()) throw ConfigError("backward sweep: horizon node out of range");
    if (prob.terminal.size() != n) throw ConfigError("backward sweep: one terminal value per path required");
    if (driver.psi_dep && !paths.model.jump) throw ConfigError("backward sweep: psi dependence needs jumps");
    const bool stopped = static_cast<bool>(prob.stop);
    if (stopped && !paths.has_exit_times()) throw ConfigError("backward sweep: stopped problem needs exit times");

    BackwardSolution sol;
    sol.grid = paths.grid;
    sol.n_paths = n;
    sol.dim = d;
    sol.k = prob.k;
    sol.last_node = last;
    sol.Y.assign(static_cast<std::size_t>(last + 1) * n, 0.0);
    sol.Z.assign(static_cast<std::size_t>(last) * n * d, 0.0);
    sol.I.assign(static_cast<std::size_t>(last) * n, 0.0);
    sol.fits.resize(last);
    sol.diag.condition.assign(last, 1.0);
    sol.diag.max_iterations.assign(last, 0);

    const bool jumps = static_cast<bool>(paths.model.jump);
    const double lambda = jumps ? paths.model.jump->intensity : 0.0;
    const double theta = jumps ? paths.model.jump->theta : 0.0;
    const Eigen::Index m = 1 + d + (jumps ? 1 : 0);

    // node values that enter the regression (stop value inside the step)
    std::vector<double> next(prob.terminal);
    std::vector<double> driver_sum(n, 0.0);
    std::copy(prob.terminal.begin(), prob.terminal.end(), sol.Y.begin() + static_cast<std::size_t>(last) * n);
    if (stopped) {
        for (std::size_t p = 0; p < n; ++p)
            if (paths.exited(p, last)) {
                next[p] = prob.stop(p);
                sol.Y[static_cast<std::size_t>(last) * n + p] = prob.after(p, last);
            }
    }
    for (std::size_t p = 0; p < n; ++p)
        if (!std::isfinite(next[p]) && !(stopped && paths.exited(p, last)))
            throw NumericalError("backward sweep: non-finite terminal value on path " + std::to_string(p));

    std::vector<double> end(prob.terminal);
    if (stopped)
        for (std::size_t p = 0; p < n; ++p)
            if (paths.exited(p, last)) end[p] = prob.stop(p);
    sol.pathwise.assign(static_cast<std::size_t>(last + 1) * n, 0.0);
    std::copy(sol.Y.begin() + static_cast<std::size_t>(last) * n, sol.Y.end(),
              sol.pathwise.begin() + static_cast<std::size_t>(last) * n);

    std::vector<char> active(n, 1);
    Matrix targets(n, m);
    for (int i = last - 1; i >= 0; --i) {
        const double t = paths.grid.t(i), dt = paths.grid.dt(i);
        if (driver.chi * dt >= 1.0) throw NumericalError("backward sweep: chi * dt >= 1, implicit step ill-posed");
        if (stopped)
            for (std::size_t p = 0; p < n; ++p) active[p] = !paths.exited(p, i);
        for (std::size_t p = 0; p < n; ++p) {
            const double v = active[p] ? next[p] : 0.0;
            targets(p, 0) = v;
            const double* w = paths.dw(i, p);
            for (int c = 0; c < d; ++c) targets(p, 1 + c) = v * w[c];
            if (jumps) targets(p, 1 + d) = v * (paths.jumps_in_step(i, p) - lambda * dt);
        }
        NodeFit fit;
        const Matrix fitted = regress_node(paths, i, targets, reg, &fit, stopped ? &active : nullptr);
        sol.diag.condition[i] = fit.condition;
        if (fit.condition > kConditionWarning)
            sol.diag.warnings.push_back("regression condition number " + format_number(fit.condition) +
                                        " exceeds 1e12 at node " + std::to_string(i));
        sol.fits[i] = std::move(fit);

        std::vector<int> iters(n, 0);
        std::vector<double> deriv(n, kInf);
        double* Yi = sol.Y.data() + static_cast<std::size_t>(i) * n;
        double* Zi = sol.Z.data() + static_cast<std::size_t>(i) * n * d;
        double* Ii = sol.I.data() + static_cast<std::size_t>(i) * n;
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
                if (!active[p]) {
                    Yi[p] = prob.after(p, i);
                    continue;
                }
                double zsum = 0.0;
                for (int c = 0; c < d; ++c) {
                    Zi[p * d + c] = fitted(p, 1 + c) / dt;
                    zsum += Zi[p * d + c];
                }
                Ii[p] = jumps ? theta * fitted(p, 1 + d) / dt : 0.0;
                const double zt = driver.L * zsum / std::sqrt(static_cast<double>(d));
                const auto r = implicit_solve(driver, t, dt, fitted(p, 0), zt, Ii[p], prob.k);
                iters[p] = r.iterations;
                deriv[p] = r.derivative;
                Yi[p] = prob.clamp_nonnegative ? std::max(r.y, 0.0) : r.y;
                driver_sum[p] += dt * driver.truncated(t, Yi[p], zt, Ii[p], prob.k);
            }
        });
        sol.diag.max_iterations[i] = *std::max_element(iters.begin(), iters.end());
        sol.diag.min_step_derivative =
            std::min(sol.diag.min_step_derivative, *std::min_element(deriv.begin(), deriv.end()));

        double* Pi = sol.pathwise.data() + static_cast<std::size_t>(i) * n;
        for (std::size_t p = 0; p < n; ++p) Pi[p] = active[p] ? end[p] + driver_sum[p] : Yi[p];

        // a path stopped at tau in (t_{i-1}, t_i] enters step i-1 with its stop value
        for (std::size_t p = 0; p < n; ++p) next[p] = active[p] ? Yi[p] : prob.stop(p);
    }
    return sol;
}

/// Y^(k): driver f^k, terminal xi ^ k, on the whole bundle.
inline BackwardSolution solve_truncated(const PathBundle& paths, const DriverDescriptor& driver,
                                        const TerminalDescriptor& terminal, double k, const RegressionSpec& reg) {
    SweepProblem prob;
    prob.terminal = truncated_terminal(paths, terminal, k);
    prob.k = k;
    // nonnegativity holds for nonnegative terminals (f0 >= 0); signed payoffs are left alone
    prob.clamp_nonnegative = std::all_of(prob.terminal.begin(), prob.terminal.end(), [](double v) { return v >= 0; });
    auto sol = backward_sweep(paths, driver, prob, reg);
    sol.k = k;
    return sol;
}

// ---------------------------------------------------------------------------
// Ladder
// ---------------------------------------------------------------------------

struct LadderLevel {
    double k = 0.0;
    std::optional<BackwardSolution> solution;
    std::string error;
};

struct LadderResult {
    std::vector<LadderLevel> levels;
    std::vector<std::vector<double>> increments;  // mean_Y(k_{j+1}) - mean_Y(k_j) per node
    double extrapolated_Y0 = std::nan("");
    double decay_ratio = std::nan("");  // fitted increment ratio per ladder step
    bool extrapolated = false;

    const BackwardSolution* largest() const {
        for (auto it = levels.rbegin(); it != levels.rend(); ++it)
            if (it->solution) return &*it->solution;
        return nullptr;
    }
};

/// Heuristic tail sum of a ladder of Y0 values: fits log(increment) against
/// log(level) and sums the implied geometric tail of further ladder steps.
inline void extrapolate_ladder(const std::vector<double>& ks, const std::vector<double>& y0, LadderResult& out) {
    out.extrapolated = false;
    if (y0.empty()) return;
    out.extrapolated_Y0 = y0.back();
    if (y0.size() < 3) return;
    // log-log slope through the last two increments only; earlier ones are
    // not yet in the power-law regime and pull the ratio up (Aitken for a
    // doubling ladder)
    const std::size_t n = y0.size();
    const double d1 = y0[n - 2] - y0[n - 3], d2 = y0[n - 1] - y0[n - 2];
    if (!(d1 > 0 && d2 > 0)) return;
    const double slope = std::log(d2 / d1) / std::log(ks[n - 1] / ks[n - 2]);
    const double r = std::pow(ks[n - 1] / ks[n - 2], slope);
    out.decay_ratio = r;
    if (!(r > 0 && r < 1)) return;
    out.extrapolated_Y0 = y0.back() + d2 * r / (1.0 - r);
    out.extrapolated = true;
}

/// One truncated solution per ladder level on the shared bundle. A failing
/// level is recorded and the remaining levels still run.
inline LadderResult minimal_supersolution_ladder(const PathBundle& paths, const DriverDescriptor& driver,
                                                 const TerminalDescriptor& terminal, const RegressionSpec& reg) {
    if (terminal.ladder.empty()) throw ConfigError("ladder: truncation ladder is empty");
    for (std::size_t j = 0; j < terminal.ladder.size(); ++j)
        if (!(terminal.ladder[j] > 0) || (j && !(terminal.ladder[j] > terminal.ladder[j - 1])))
            throw ConfigError("ladder: levels must be positive and strictly increasing");
    LadderResult res;
    for (double k : terminal.ladder) {
        LadderLevel lv;
        lv.k = k;
        try {
            lv.solution = solve_truncated(paths, driver, terminal, k, reg);
        } catch (const NumericalError& e) {
            lv.error = e.what();
        }
        res.levels.push_back(std::move(lv));
    }
    std::vector<double> ks, y0;
    const BackwardSolution* prev = nullptr;
    for (const auto& lv : res.levels) {
        if (!lv.solution) continue;
        if (prev) {
            std::vector<double> inc(lv.solution->last_node + 1);
            for (int i = 0; i <= lv.solution->last_node; ++i) inc[i] = lv.solution->mean_at(i) - prev->mean_at(i);
            res.increments.push_back(std::move(inc));
        }
        prev = &*lv.solution;
        ks.push_back(lv.k);
        y0.push_back(lv.solution->Y0());
    }
    extrapolate_ladder(ks, y0, res);
    return res;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& solution_summary_header() {
    static const std::vector<std::string> h{"node_index", "t", "k", "mean_Y", "sd_Y", "mean_Y_on_exit_event",
                                            "mean_Y_on_survival_event", "max_Y", "regression_condition_number"};
    return h;
}

/// One row per node; the exit event is {tau <= T}.
inline void append_solution_summary(CsvWriter& w, const BackwardSolution& sol, const PathBundle& paths) {
    const std::size_t n = sol.n_paths;
    const double T = sol.grid.T();
    const bool ev = paths.has_exit_times();
    for (int i = 0; i <= sol.last_node; ++i) {
        const double* r = sol.row(i);
        const auto all = masked_mean(r, n, [](std::size_t) { return true; });
        const auto ex = masked_mean(r, n, [&](std::size_t p) { return ev && paths.exit_time[p] <= T; });
        const auto sv = masked_mean(r, n, [&](std::size_t p) { return !ev || paths.exit_time[p] > T; });
        const double mx = *std::max_element(r, r + n);
        const double cond = i < sol.last_node ? sol.diag.condition[i] : 1.0;
        w.row(i, sol.grid.t(i), sol.k, all.mean, all.sd, ex.mean, sv.mean, mx, cond);
    }
}

}  // namespace bsdelab
