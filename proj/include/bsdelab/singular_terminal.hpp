#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsdelab/backward_solver.hpp"
#include "bsdelab/core_model.hpp"
#include "bsdelab/csv.hpp"
#include "bsdelab/forward_sim.hpp"
#include "bsdelab/regression.hpp"

namespace bsdelab {

// ---------------------------------------------------------------------------
// A priori bound
// ---------------------------------------------------------------------------

struct AprioriBoundParams {
    double ell = 2.0;
    double ell_prime = 2.0;  // in (1, ell]
    double K = 1.0;

    double p_hat(double p) const { return p - (ell - ell_prime) / (ell * ell_prime); }

    void validate(double p) const {
        if (!(ell > 1.0)) throw ConfigError("AprioriBoundParams: ell > 1 required");
        if (!(ell_prime > 1.0 && ell_prime <= ell)) throw ConfigError("AprioriBoundParams: 1 < ell' <= ell required");
        if (!(p_hat(p) > 0.0)) throw ConfigError("AprioriBoundParams: p-hat must be > 0");
        if (!(K > 0.0)) throw ConfigError("AprioriBoundParams: K must be > 0");
    }
};

/// K e^{chi+ (T-t)} (T-t)^{-p_hat} (int_t^T (((p-1) eta)^{p-1} + (T-s)^p f0)^ell ds)^{1/ell}.
/// Pieces with f0 = 0 integrate exactly; others by Gauss-Kronrod.
inline double apriori_bound(const DriverDescriptor& driver, const AprioriBoundParams& prm, double t, double T) {
    if (!(t < T)) throw std::domain_error("apriori_bound: t must be < T");
    const double p = driver.p;
    prm.validate(p);
    double integral = 0.0;
    for (const auto& pc : driver.eta.pieces(t, T)) {
        const double a = std::pow((p - 1.0) * pc.value, p - 1.0);
        for (const auto& fc : driver.f0.pieces(pc.lo, pc.hi)) {
            if (fc.value == 0.0) {
                integral += (fc.hi - fc.lo) * std::pow(a, prm.ell);
            } else {
                integral += integrate(
                    [&](double s) { return std::pow(a + std::pow(T - s, p) * std::max(fc.value, 0.0), prm.ell); },
                    fc.lo, fc.hi);
            }
        }
    }
    const double growth = driver.chi > 0 ? std::exp(driver.chi * (T - t)) : 1.0;
    return prm.K * growth * std::pow(T - t, -prm.p_hat(p)) * std::pow(integral, 1.0 / prm.ell);
}

// ---------------------------------------------------------------------------
// Integrability check for xi1
// ---------------------------------------------------------------------------

struct IntegrabilityReport {
    double q = 0, p = 0, ell = 0;
    bool ell_gt_2 = false;
    // the sufficient q-threshold exists in two forms that differ in sign; both reported
    double threshold_minus = 0;  // q > 2 - 2/(ell-2)
    double threshold_plus = 0;   // q > 2 + 2/(ell-2)
    bool q_above_minus = false;
    bool q_above_plus = false;
    double kappa_min = kInf;
    double rho_at_min = 0, ell_prime_at_min = 0;
    bool kappa_attainable = false;
    double density_bound = 0;
    bool density_finite = false;
    bool pass = false;
    std::string reason;
    // the search grid, kept for the monotonicity property
    std::vector<double> rho_grid, ell_prime_grid;
    std::vector<double> kappa;  // rho-major
};

inline double kappa_exponent(double p, double ell, double rho, double ell_prime) {
    const double p_hat = p - (ell - ell_prime) / (ell * ell_prime);
    return p_hat * rho * ell / (ell - rho);
}

/// Grid search of kappa = p_hat rho ell / (ell - rho) over rho in (1, ell) and
/// ell' in (1, ell]; integrability of xi1^(tau) needs kappa < 1 and a finite
/// exit density near T.
inline IntegrabilityReport integrability_check_xi1(const DriverDescriptor& driver, double density_bound,
                                                   int grid_points = 200) {
    IntegrabilityReport r;
    r.q = driver.q;
    r.p = driver.p;
    r.ell = driver.ell;
    r.density_bound = density_bound;
    r.density_finite = std::isfinite(density_bound) && density_bound >= 0;
    r.ell_gt_2 = driver.ell > 2.0;
    if (r.ell_gt_2) {
        r.threshold_minus = 2.0 - 2.0 / (driver.ell - 2.0);
        r.threshold_plus = 2.0 + 2.0 / (driver.ell - 2.0);
    } else {
        r.threshold_minus = r.threshold_plus = kInf;
    }
    r.q_above_minus = driver.q > r.threshold_minus;
    r.q_above_plus = driver.q > r.threshold_plus;

    const double ell = driver.ell;
    if (ell > 1.0) {
        for (int a = 1; a <= grid_points; ++a) r.rho_grid.push_back(1.0 + (ell - 1.0) * a / (grid_points + 1.0));
        for (int b = 1; b <= grid_points; ++b) r.ell_prime_grid.push_back(1.0 + (ell - 1.0) * b / grid_points);
        for (double rho : r.rho_grid)
            for (double lp : r.ell_prime_grid) {
                const double k = kappa_exponent(driver.p, ell, rho, lp);
                r.kappa.push_back(k);
                if (k < r.kappa_min) {
                    r.kappa_min = k;
                    r.rho_at_min = rho;
                    r.ell_prime_at_min = lp;
                }
            }
    }
    r.kappa_attainable = r.kappa_min < 1.0;
    if (!r.ell_gt_2) r.reason = "ell > 2 required";
    else if (!r.kappa_attainable) r.reason = "kappa >= 1 on the whole (rho, ell') grid";
    else if (!r.density_finite) r.reason = "exit density near T is not bounded";
    r.pass = r.ell_gt_2 && r.kappa_attainable && r.density_finite;
    return r;
}

inline nlohmann::json to_json(const IntegrabilityReport& r) {
    return {{"q", r.q},
            {"p", r.p},
            {"ell", r.ell},
            {"ell_gt_2", r.ell_gt_2},
            {"q_threshold_minus", r.threshold_minus},
            {"q_threshold_plus", r.threshold_plus},
            {"q_above_threshold_minus", r.q_above_minus},
            {"q_above_threshold_plus", r.q_above_plus},
            {"kappa_min", r.kappa_min},
            {"rho_at_min", r.rho_at_min},
            {"ell_prime_at_min", r.ell_prime_at_min},
            {"kappa_lt_1_attainable", r.kappa_attainable},
            {"density_bound", r.density_bound},
            {"pass", r.pass},
            {"reason", r.reason}};
}

// ---------------------------------------------------------------------------
// Y-infinity along paths
// ---------------------------------------------------------------------------

/// Solution with infinite terminal value for the y-part of the driver, at
/// time-to-horizon s. Pure power: the closed form. Constant eta, any chi:
/// the Bernoulli solution.
inline double y_inf_value(const DriverDescriptor& drv, double s) {
    if (drv.eta.is_constant(1.0) && drv.chi == 0.0) return y_infinity(drv.q, s);
    const auto& v = drv.eta.values;
    if (!std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); }))
        throw ConfigError("y-infinity: eta must be constant");
    if (!(s > 0.0)) throw std::domain_error("y-infinity: time to horizon must be > 0");
    const double eta = v.front(), q = drv.q;
    const double u = drv.chi == 0.0 ? (q - 1.0) * s / eta : (1.0 - std::exp(-(q - 1.0) * drv.chi * s)) / (eta * drv.chi);
    return std::pow(u, -1.0 / (q - 1.0));
}

inline void require_f0_zero_y_only(const DriverDescriptor& drv, const char* who) {
    if (!drv.f0.is_constant(0.0)) throw ConfigError(std::string(who) + ": requires f0 == 0");
    if (drv.z_dep || drv.psi_dep) throw ConfigError(std::string(who) + ": requires a driver without z/psi dependence");
}

// ---------------------------------------------------------------------------
// Upper-bound process for xi1
// ---------------------------------------------------------------------------

/// Y^{inf,u}_t = E[e^{chi (tau - t)} Y^inf_tau 1{tau < T} | F_t], by regression
/// on the not-yet-exited paths at every node; exited paths keep their value at
/// tau. Refuses to run when the integrability check fails.
inline BackwardSolution upper_bound_process_xi1(const PathBundle& paths, const DriverDescriptor& driver,
                                                const RegressionSpec& reg, double density_bound) {
    require_f0_zero_y_only(driver, "upper_bound_process_xi1");
    if (!paths.has_exit_times()) throw ConfigError("upper_bound_process_xi1: run detect_exit first");
    const auto check = integrability_check_xi1(driver, density_bound);
    if (!check.pass)
        throw ConfigError("upper_bound_process_xi1: integrability check failed (" + check.reason +
                          "); the upper bound may be infinite");
    const std::size_t n = paths.n_paths;
    const int N = paths.grid.N();
    const double T = paths.grid.T();
    BackwardSolution sol;
    sol.grid = paths.grid;
    sol.n_paths = n;
    sol.dim = paths.dim;
    sol.last_node = N;
    sol.Y.assign(static_cast<std::size_t>(N + 1) * n, 0.0);
    sol.fits.resize(N);
    sol.diag.condition.assign(N, 1.0);
    sol.diag.max_iterations.assign(N, 0);

    std::vector<double> at_tau(n, 0.0);
    for (std::size_t p = 0; p < n; ++p)
        if (paths.exit_time[p] < T) at_tau[p] = y_inf_value(driver, T - paths.exit_time[p]);
    sol.pathwise.assign(sol.Y.size(), 0.0);

    std::vector<char> active(n);
    Matrix target(n, 1);
    for (int i = 0; i <= N; ++i) {
        const double t = paths.grid.t(i);
        double* Yi = sol.Y.data() + static_cast<std::size_t>(i) * n;
        bool any = false;
        for (std::size_t p = 0; p < n; ++p) {
            active[p] = !paths.exited(p, i);
            any |= active[p] != 0;
            const double w = driver.chi != 0.0 ? std::exp(driver.chi * (paths.exit_time[p] - t)) : 1.0;
            target(p, 0) = active[p] && paths.exit_time[p] < T ? w * at_tau[p] : 0.0;
        }
        if (i < N && any) {
            NodeFit fit;
            const Matrix f = regress_node(paths, i, target, reg, &fit, &active);
            sol.diag.condition[i] = fit.condition;
            sol.fits[i] = std::move(fit);
            for (std::size_t p = 0; p < n; ++p) Yi[p] = active[p] ? std::max(f(p, 0), 0.0) : at_tau[p];
        } else {
            for (std::size_t p = 0; p < n; ++p) Yi[p] = active[p] ? 0.0 : at_tau[p];
        }
        double* Pi = sol.pathwise.data() + static_cast<std::size_t>(i) * n;
        for (std::size_t p = 0; p < n; ++p) Pi[p] = active[p] ? target(p, 0) : at_tau[p];
    }
    return sol;
}

// ---------------------------------------------------------------------------
// Sandwich reports
// ---------------------------------------------------------------------------

struct SandwichNode {
    int node = 0;
    std::size_t population = 0;
    double mean_diff = 0;  // mean(lower - upper)
    double stderr_ = 0;
    std::size_t pathwise_violations = 0;  // lower > upper on a path
    double worst_margin = -kInf;  // max(lower - upper)
    double min_lower = kInf;
    bool violated = false;  // mean_diff > 2 stderr or lower < 0
};

struct SandwichLevel {
    double k = 0;
    std::vector<SandwichNode> nodes;
    std::size_t violations = 0;
};

struct SandwichReport {
    std::string name;
    std::vector<SandwichLevel> levels;
    bool pass = true;
    nlohmann::json extra = nlohmann::json::object();
};

/// Paired comparison lower <= upper + 2 SE on the paths selected by `take`
/// at nodes 0..last. Mean and SE come from the pathwise estimators, so the
/// Monte Carlo noise of both fits is in the error bar; per-path counts use
/// the fitted values.
template <class Take>
SandwichLevel compare_paired(const BackwardSolution& lower, const BackwardSolution& upper, int last, Take&& take,
                             double se_mult = 2.0) {
    SandwichLevel lv;
    lv.k = lower.k;
    const std::size_t n = lower.n_paths;
    std::vector<double> diff(n), pdiff(n);
    for (int i = 0; i <= last; ++i) {
        SandwichNode sn;
        sn.node = i;
        const double* a = lower.row(i);
        const double* b = upper.row(i);
        const double* pa = lower.pathwise_row(i);
        const double* pb = upper.pathwise_row(i);
        for (std::size_t p = 0; p < n; ++p) {
            diff[p] = a[p] - b[p];
            pdiff[p] = pa[p] - pb[p];
        }
        auto sel = [&](std::size_t p) {
            return take(p, i) && std::isfinite(a[p]) && std::isfinite(b[p]) && std::isfinite(pdiff[p]);
        };
        const auto mm = masked_mean(pdiff.data(), n, sel);
        sn.population = mm.count;
        if (mm.count == 0) {
            lv.nodes.push_back(sn);
            continue;
        }
        sn.mean_diff = mm.mean;
        sn.stderr_ = mm.stderr_;
        for (std::size_t p = 0; p < n; ++p) {
            if (!sel(p)) continue;
            sn.min_lower = std::min(sn.min_lower, a[p]);
            sn.worst_margin = std::max(sn.worst_margin, diff[p]);
            if (diff[p] > 0) ++sn.pathwise_violations;
        }
        sn.violated = mm.mean > se_mult * mm.stderr_ || sn.min_lower < 0.0;
        if (sn.violated) ++lv.violations;
        lv.nodes.push_back(sn);
    }
    return lv;
}

/// 0 <= Y^(k) <= Y^{inf,u} + 2 SE on the surviving population at every node,
/// for every solved ladder level.
inline SandwichReport sandwich_xi1(const LadderResult& ladder, const BackwardSolution& upper, const PathBundle& paths) {
    SandwichReport rep;
    rep.name = "xi1";
    for (const auto& lv : ladder.levels) {
        if (!lv.solution) continue;
        auto cmp = compare_paired(*lv.solution, upper, std::min(lv.solution->last_node, upper.last_node),
                                  [&](std::size_t p, int i) { return !paths.exited(p, i); });
        rep.pass &= cmp.violations == 0;
        rep.levels.push_back(std::move(cmp));
    }
    return rep;
}

inline nlohmann::json to_json(const SandwichReport& r) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& lv : r.levels) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : lv.nodes)
            nodes.push_back({{"node", n.node},
                             {"population", n.population},
                             {"mean_diff", n.mean_diff},
                             {"stderr", n.stderr_},
                             {"violated", n.violated},
                             {"pathwise_violations", n.pathwise_violations},
                             {"worst_margin", std::isfinite(n.worst_margin) ? nlohmann::json(n.worst_margin) : nullptr}});
        levels.push_back({{"k", lv.k}, {"violations", lv.violations}, {"nodes", nodes}});
    }
    return {{"name", r.name}, {"pass", r.pass}, {"levels", levels}, {"extra", r.extra}};
}

// ---------------------------------------------------------------------------
// Continuity profile
// ---------------------------------------------------------------------------

/// Named event: "tau>T", "tau<=T", or "tau<=T-h" for a number h.
struct EventSpec {
    std::string name = "tau>T";
    bool exit = false;
    double before = 0.0;  // exit event means tau <= T - before

    static EventSpec parse(const std::string& s) {
        EventSpec e;
        e.name = s;
        if (s == "tau>T") return e;
        if (s == "tau<=T") {
            e.exit = true;
            return e;
        }
        const std::string pre = "tau<=T-";
        if (s.rfind(pre, 0) == 0) {
            e.exit = true;
            try {
                e.before = std::stod(s.substr(pre.size()));
            } catch (...) {
                throw ConfigError("event: cannot parse '" + s + "'");
            }
            if (!(e.before >= 0)) throw ConfigError("event: negative offset in '" + s + "'");
            return e;
        }
        throw ConfigError("event: unknown event '" + s + "' (use tau>T, tau<=T or tau<=T-h)");
    }

    bool contains(double tau, double T) const { return exit ? tau <= T - before : tau > T; }
};

struct ContinuityProfile {
    std::string event;
    double k_level = 0;
    std::vector<double> deltas;
    std::vector<int> nodes;
    std::vector<double> means, stderrs;
    std::vector<std::size_t> counts;
    double trend_slope = 0;  // least-squares slope of mean vs delta
    bool decreasing_within_2se = true;  // mean_{j+1} <= mean_j + 2 combined SE
    bool increasing_within_2se = true;
};

inline std::vector<double> default_delta_grid() {
    std::vector<double> d;
    for (int j = 0; j <= 6; ++j) d.push_back(0.2 * std::ldexp(1.0, -j));
    return d;
}

/// Conditional means of `sol` on the event at the node nearest T - delta.
inline ContinuityProfile continuity_profile(const BackwardSolution& sol, const PathBundle& paths,
                                            const std::string& event, const std::vector<double>& deltas) {
    if (!paths.has_exit_times()) throw ConfigError("continuity_profile: run detect_exit first");
    for (std::size_t j = 1; j < deltas.size(); ++j)
        if (!(deltas[j] < deltas[j - 1])) throw ConfigError("continuity_profile: delta grid must decrease");
    const auto ev = EventSpec::parse(event);
    const double T = sol.grid.T();
    ContinuityProfile cp;
    cp.event = event;
    cp.k_level = sol.k;
    cp.deltas = deltas;
    auto take = [&](std::size_t p) { return ev.contains(paths.exit_time[p], T); };
    std::size_t count = 0;
    for (std::size_t p = 0; p < sol.n_paths; ++p) count += take(p);
    if (count < 100)
        throw NumericalError("continuity_profile: event " + event + " has only " + std::to_string(count) +
                             " paths (< 100)");
    for (double d : deltas) {
        const int node = sol.grid.nearest(T - d);
        if (node > sol.last_node) throw ConfigError("continuity_profile: delta beyond the solved horizon");
        const auto mm = masked_mean(sol.row(node), sol.n_paths, take);
        cp.nodes.push_back(node);
        cp.means.push_back(mm.mean);
        cp.stderrs.push_back(mm.stderr_);
        cp.counts.push_back(mm.count);
    }
    for (std::size_t j = 1; j < cp.means.size(); ++j) {
        const double tol = 2.0 * std::hypot(cp.stderrs[j], cp.stderrs[j - 1]);
        cp.decreasing_within_2se &= cp.means[j] <= cp.means[j - 1] + tol;
        cp.increasing_within_2se &= cp.means[j] >= cp.means[j - 1] - tol;
    }
    const double n = static_cast<double>(deltas.size());
    double mx = 0, my = 0;
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        mx += deltas[j] / n;
        my += cp.means[j] / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t j = 0; j < deltas.size(); ++j) {
        sxy += (deltas[j] - mx) * (cp.means[j] - my);
        sxx += (deltas[j] - mx) * (deltas[j] - mx);
    }
    cp.trend_slope = sxx > 0 ? sxy / sxx : 0.0;
    return cp;
}

inline const std::vector<std::string>& continuity_header() {
    static const std::vector<std::string> h{"event", "delta", "mean_Y", "stderr", "n_event_paths", "k_level"};
    return h;
}

inline void append_continuity(CsvWriter& w, const ContinuityProfile& cp) {
    for (std::size_t j = 0; j < cp.deltas.size(); ++j)
        w.row(cp.event, cp.deltas[j], cp.means[j], cp.stderrs[j], cp.counts[j], cp.k_level);
}

// ---------------------------------------------------------------------------
// Pasting for xi1
// ---------------------------------------------------------------------------

/// Solves with the full driver on [0, tau ^ T] with terminal 1{tau < T} Y^inf_tau
/// and pastes Y^inf(T - t) after tau (+inf at T on exited paths).
inline BackwardSolution pasted_solution_xi1(const PathBundle& paths, const DriverDescriptor& driver,
                                            const RegressionSpec& reg) {
    require_f0_zero_y_only(driver, "pasted_solution_xi1");
    if (!paths.has_exit_times()) throw ConfigError("pasted_solution_xi1: run detect_exit first");
    const double T = paths.grid.T();
    const int N = paths.grid.N();
    SweepProblem prob;
    prob.terminal.assign(paths.n_paths, 0.0);
    prob.k = kInf;
    prob.stop = [&](std::size_t p) {
        const double tau = paths.exit_time[p];
        return tau < T ? y_inf_value(driver, T - tau) : 0.0;
    };
    prob.after = [&](std::size_t, int i) { return i == N ? kInf : y_inf_value(driver, T - paths.grid.t(i)); };
    auto sol = backward_sweep(paths, driver, prob, reg);
    sol.k = kInf;
    return sol;
}

// ---------------------------------------------------------------------------
// xi2 upper sequence
// ---------------------------------------------------------------------------

struct Xi2Level {
    double t_n_requested = 0;
    int node = 0;
    double t_n = 0;
    BackwardSolution upper;
    double mean_exited_at_tn = 0;  // mean of the upper process at t_n on {tau <= t_n}
    std::size_t n_exited_at_tn = 0;
};

struct Xi2Report {
    std::vector<Xi2Level> levels;
    SandwichReport dominance;   // Y^(k) <= Y^{inf,u,n}
    SandwichReport decreasing;  // Y^{inf,u,n+1} <= Y^{inf,u,n}
    bool pass = true;
};

/// For each t_n (snapped to the nearest node): the BSDE on [0, t_n] with
/// terminal 1{tau > t_n} Y^inf(T - t_n). Checks dominance over every ladder
/// level and monotonicity in n, on shared noise.
inline Xi2Report xi2_sandwich(const PathBundle& paths, const DriverDescriptor& driver,
                              const std::vector<double>& t_n_grid, const RegressionSpec& reg,
                              const LadderResult& ladder) {
    if (!driver.f0.is_constant(0.0)) throw ConfigError("xi2_sandwich: f0 != 0 is not supported");
    if (!paths.has_exit_times()) throw ConfigError("xi2_sandwich: run detect_exit first");
    const double T = paths.grid.T();
    Xi2Report rep;
    rep.dominance.name = "xi2_dominance";
    rep.decreasing.name = "xi2_decreasing_in_n";
    double prev = -kInf;
    for (double tn : t_n_grid) {
        if (!(tn > prev) || !(tn < T)) throw ConfigError("xi2_sandwich: t_n must increase and stay below T");
        prev = tn;
        Xi2Level lv;
        lv.t_n_requested = tn;
        lv.node = std::clamp(paths.grid.nearest(tn), 1, paths.grid.N() - 1);
        lv.t_n = paths.grid.t(lv.node);
        SweepProblem prob;
        prob.last_node = lv.node;
        prob.k = kInf;
        const double cap = y_inf_value(driver, T - lv.t_n);
        prob.terminal.resize(paths.n_paths);
        for (std::size_t p = 0; p < paths.n_paths; ++p) prob.terminal[p] = paths.exited(p, lv.node) ? 0.0 : cap;
        lv.upper = backward_sweep(paths, driver, prob, reg);
        const auto mm = masked_mean(lv.upper.row(lv.node), paths.n_paths,
                                    [&](std::size_t p) { return paths.exited(p, lv.node); });
        lv.mean_exited_at_tn = mm.count ? mm.mean : 0.0;
        lv.n_exited_at_tn = mm.count;
        rep.levels.push_back(std::move(lv));
    }
    auto all = [](std::size_t, int) { return true; };
    for (const auto& lv : rep.levels) {
        for (const auto& ll : ladder.levels) {
            if (!ll.solution) continue;
            auto cmp = compare_paired(*ll.solution, lv.upper, lv.node, all);
            cmp.k = ll.k;
            rep.dominance.pass &= cmp.violations == 0;
            rep.dominance.levels.push_back(std::move(cmp));
        }
    }
    for (std::size_t j = 1; j < rep.levels.size(); ++j) {
        auto cmp = compare_paired(rep.levels[j].upper, rep.levels[j - 1].upper, rep.levels[j - 1].node, all);
        cmp.k = rep.levels[j].t_n;
        rep.decreasing.pass &= cmp.violations == 0;
        rep.decreasing.levels.push_back(std::move(cmp));
    }
    rep.pass = rep.dominance.pass && rep.decreasing.pass;
    return rep;
}

}  // namespace bsdelab
