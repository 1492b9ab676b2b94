#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bsdelab/core_model.hpp"
#include "bsdelab/forward_sim.hpp"

namespace bsdelab {

inline constexpr double kConditionWarning = 1e12;

/// Polynomial basis of total degree `degree` in the state, fitted locally on
/// `cells` equal slices of the population's bounding box (cells = 1 is a
/// single global polynomial). With per_event, exited and surviving paths are
/// fitted separately; otherwise the exit indicator is an extra basis column.
struct RegressionSpec {
    int degree = 1;
    int cells = 1;
    bool per_event = true;
    double ridge = 0.0;

    void validate() const {
        if (degree < 0) throw ConfigError("RegressionSpec: degree must be >= 0");
        if (cells < 1) throw ConfigError("RegressionSpec: cells must be >= 1");
        if (!(ridge >= 0.0)) throw ConfigError("RegressionSpec: ridge must be >= 0");
    }
};

/// Multi-indices of total degree <= deg in d variables; the first is constant.
inline std::vector<std::vector<int>> monomial_exponents(int d, int deg) {
    std::vector<std::vector<int>> out;
    std::vector<int> e(d, 0);
    for (int total = 0; total <= deg; ++total) {
        // all compositions of `total` into d parts
        std::fill(e.begin(), e.end(), 0);
        std::function<void(int, int)> rec = [&](int pos, int left) {
            if (pos == d - 1) {
                e[pos] = left;
                out.push_back(e);
                return;
            }
            for (int k = left; k >= 0; --k) {
                e[pos] = k;
                rec(pos + 1, left - k);
            }
        };
        rec(0, total);
    }
    return out;
}

struct CellFit {
    std::vector<double> center, half;
    int degree = 0;
    bool indicator = false;  // extra column for the exit flag
    Matrix coef;             // basis x targets
    std::vector<double> tmin, tmax;  // per target, over the cell's members
    std::size_t count = 0;
};

/// Local polynomial fits over one population.
struct PopulationFit {
    int dim = 1;
    int per_dim = 1;
    std::vector<double> lo, hi;
    std::vector<CellFit> cells;
    double condition = 1.0;
    bool empty = true;

    int cell_of(const double* x) const {
        int idx = 0;
        for (int c = dim - 1; c >= 0; --c) {
            const double w = hi[c] - lo[c];
            int k = w > 0 ? static_cast<int>(std::floor((x[c] - lo[c]) / w * per_dim)) : 0;
            idx = idx * per_dim + std::clamp(k, 0, per_dim - 1);
        }
        return idx;
    }
};

namespace detail {

inline void basis_row(const CellFit& cf, const std::vector<std::vector<int>>& exps, const double* x, double flag,
                      double* out) {
    const int d = static_cast<int>(cf.center.size());
    thread_local std::vector<double> zbuf;
    zbuf.resize(d);
    double* z = zbuf.data();
    for (int c = 0; c < d; ++c) z[c] = cf.half[c] > 0 ? (x[c] - cf.center[c]) / cf.half[c] : 0.0;
    std::size_t j = 0;
    for (const auto& e : exps) {
        double v = 1.0;
        for (int c = 0; c < d; ++c)
            for (int k = 0; k < e[c]; ++k) v *= z[c];
        out[j++] = v;
    }
    if (cf.indicator) out[j] = flag;
}

inline std::size_t basis_size(const CellFit& cf, std::size_t n_exps) { return n_exps + (cf.indicator ? 1 : 0); }

}  // namespace detail

/// Fit `targets` (rows indexed by path) over `members`; x(p) gives the state,
/// flag(p) the exit indicator (used only when `with_indicator`).
template <class XFn, class FlagFn>
PopulationFit fit_population(const std::vector<std::size_t>& members, int dim, XFn&& x, FlagFn&& flag,
                             const Matrix& targets, const RegressionSpec& spec, bool with_indicator) {
    PopulationFit pf;
    pf.dim = dim;
    if (members.empty()) return pf;
    pf.empty = false;
    pf.per_dim = std::max(1, static_cast<int>(std::floor(std::pow(spec.cells, 1.0 / dim) + 1e-9)));
    pf.lo.assign(dim, kInf);
    pf.hi.assign(dim, -kInf);
    for (auto p : members) {
        const double* xp = x(p);
        for (int c = 0; c < dim; ++c) {
            pf.lo[c] = std::min(pf.lo[c], xp[c]);
            pf.hi[c] = std::max(pf.hi[c], xp[c]);
        }
    }
    int n_cells = 1;
    for (int c = 0; c < dim; ++c) n_cells *= pf.per_dim;
    std::vector<std::vector<std::size_t>> bins(n_cells);
    for (auto p : members) bins[pf.cell_of(x(p))].push_back(p);

    const auto full_exps = monomial_exponents(dim, spec.degree);
    const auto const_exps = monomial_exponents(dim, 0);
    const Eigen::Index m = targets.cols();
    pf.cells.resize(n_cells);
    for (int ci = 0; ci < n_cells; ++ci) {
        auto& cf = pf.cells[ci];
        const auto& mem = bins[ci];
        cf.count = mem.size();
        cf.center.assign(dim, 0.0);
        cf.half.assign(dim, 0.0);
        if (mem.empty()) {
            cf.coef = Matrix::Zero(1, m);
            continue;
        }
        cf.tmin.assign(m, kInf);
        cf.tmax.assign(m, -kInf);
        for (auto p : mem)
            for (Eigen::Index t = 0; t < m; ++t) {
                cf.tmin[t] = std::min(cf.tmin[t], targets(p, t));
                cf.tmax[t] = std::max(cf.tmax[t], targets(p, t));
            }
        std::vector<double> clo(dim, kInf), chi(dim, -kInf);
        double f0 = flag(mem.front());
        bool mixed = false;
        for (auto p : mem) {
            const double* xp = x(p);
            for (int c = 0; c < dim; ++c) {
                clo[c] = std::min(clo[c], xp[c]);
                chi[c] = std::max(chi[c], xp[c]);
            }
            mixed |= flag(p) != f0;
        }
        for (int c = 0; c < dim; ++c) {
            cf.center[c] = 0.5 * (clo[c] + chi[c]);
            cf.half[c] = 0.5 * (chi[c] - clo[c]);
        }
        const bool degenerate = std::all_of(cf.half.begin(), cf.half.end(), [](double h) { return h == 0.0; });
        cf.indicator = with_indicator && mixed;
        const std::size_t nb_full = full_exps.size() + (cf.indicator ? 1 : 0);
        // thin or single-point cells fall back to the cell mean
        cf.degree = !degenerate && mem.size() >= std::max<std::size_t>(2 * nb_full, nb_full + 8) ? spec.degree : 0;
        const auto& exps = cf.degree == spec.degree ? full_exps : const_exps;
        if (cf.degree == 0) cf.indicator = false;
        const std::size_t nb = detail::basis_size(cf, exps.size());

        Matrix G = Matrix::Zero(nb, nb), R = Matrix::Zero(nb, m);
        std::vector<double> row(nb);
        for (auto p : mem) {
            detail::basis_row(cf, exps, x(p), flag(p), row.data());
            for (std::size_t a = 0; a < nb; ++a) {
                for (std::size_t b = a; b < nb; ++b) G(a, b) += row[a] * row[b];
                for (Eigen::Index t = 0; t < m; ++t) R(a, t) += row[a] * targets(p, t);
            }
        }
        G = G.selfadjointView<Eigen::Upper>();
        const double inv = 1.0 / static_cast<double>(mem.size());
        G *= inv;
        R *= inv;
        for (std::size_t a = 1; a < nb; ++a) G(a, a) += spec.ridge;
        Eigen::SelfAdjointEigenSolver<Matrix> es(G, Eigen::EigenvaluesOnly);
        const double emax = es.eigenvalues().maxCoeff(), emin = es.eigenvalues().minCoeff();
        const double cond = emin > 0 ? emax / emin : kInf;
        pf.condition = std::max(pf.condition, cond);
        if (cond < kConditionWarning) {
            cf.coef = G.ldlt().solve(R);
        } else {
            cf.coef = G.completeOrthogonalDecomposition().solve(R);
        }
    }
    return pf;
}

/// Evaluate a population fit at state x with exit flag `flag`. The value is
/// kept inside the range of the cell's targets: a conditional expectation
/// cannot leave it, while a polynomial fit of a steep convex profile
/// overshoots at the cell edges.
inline void evaluate_fit(const PopulationFit& pf, const double* x, double flag, double* out, Eigen::Index m) {
    const auto& cf = pf.cells[pf.cell_of(x)];
    if (cf.count == 0) {
        for (Eigen::Index t = 0; t < m; ++t) out[t] = 0.0;
        return;
    }
    static thread_local std::vector<std::vector<int>> exps_cache;
    static thread_local int cache_dim = -1, cache_deg = -1;
    if (cache_dim != pf.dim || cache_deg != cf.degree) {
        exps_cache = monomial_exponents(pf.dim, cf.degree);
        cache_dim = pf.dim;
        cache_deg = cf.degree;
    }
    const std::size_t nb = detail::basis_size(cf, exps_cache.size());
    thread_local std::vector<double> row;
    row.resize(nb);
    detail::basis_row(cf, exps_cache, x, flag, row.data());
    for (Eigen::Index t = 0; t < m; ++t) {
        double v = 0.0;
        for (std::size_t a = 0; a < nb; ++a) v += row[a] * cf.coef(a, t);
        out[t] = std::clamp(v, cf.tmin[t], cf.tmax[t]);
    }
}

/// Fits of one node: either one population with an indicator column, or
/// separate surviving / exited populations.
struct NodeFit {
    bool split = false;
    PopulationFit survive;  // or the whole population when !split
    PopulationFit exited;
    double condition = 1.0;
};

/// Least-squares projection of each target column on the basis at `node`.
/// `active` (optional) restricts the population; others get zero rows.
/// Returns fitted values (n x m) and the fit itself.
inline Matrix regress_node(const PathBundle& paths, int node, const Matrix& targets, const RegressionSpec& spec,
                           NodeFit* fit_out = nullptr, const std::vector<char>* active = nullptr) {
    spec.validate();
    const std::size_t n = paths.n_paths;
    if (static_cast<std::size_t>(targets.rows()) != n) throw ConfigError("regression: one target row per path required");
    if (!targets.allFinite()) throw NumericalError("regression: non-finite targets at node " + std::to_string(node));
    const bool events = paths.has_exit_times();
    auto x = [&](std::size_t p) { return paths.x(node, p); };
    auto flag = [&](std::size_t p) { return events && paths.exited(p, node) ? 1.0 : 0.0; };

    NodeFit nf;
    nf.split = events && spec.per_event;
    std::vector<std::size_t> s_mem, e_mem;
    for (std::size_t p = 0; p < n; ++p) {
        if (active && !(*active)[p]) continue;
        if (nf.split && flag(p) > 0) e_mem.push_back(p);
        else s_mem.push_back(p);
    }
    nf.survive = fit_population(s_mem, paths.dim, x, flag, targets, spec, events && !spec.per_event);
    if (nf.split) nf.exited = fit_population(e_mem, paths.dim, x, flag, targets, spec, false);
    nf.condition = std::max(nf.survive.condition, nf.exited.condition);

    Matrix fitted = Matrix::Zero(n, targets.cols());
    std::vector<double> buf(targets.cols());
    auto eval = [&](const PopulationFit& pf, const std::vector<std::size_t>& mem) {
        for (auto p : mem) {
            evaluate_fit(pf, x(p), flag(p), buf.data(), targets.cols());
            for (Eigen::Index t = 0; t < targets.cols(); ++t) fitted(p, t) = buf[t];
        }
    };
    eval(nf.survive, s_mem);
    if (nf.split) eval(nf.exited, e_mem);
    if (fit_out) *fit_out = std::move(nf);
    return fitted;
}

/// Single-target convenience form.
inline std::vector<double> conditional_expectation(const PathBundle& paths, int node, const std::vector<double>& targets,
                                                   const RegressionSpec& spec, double* condition = nullptr) {
    Matrix t = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
    NodeFit nf;
    Matrix f = regress_node(paths, node, t, spec, &nf);
    if (condition) *condition = nf.condition;
    return std::vector<double>(f.data(), f.data() + f.rows());
}

}  // namespace bsdelab
