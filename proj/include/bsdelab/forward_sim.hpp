#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bsdelab/core_model.hpp"
#include "bsdelab/csv.hpp"
#include "bsdelab/parallel.hpp"

namespace bsdelab {

struct SeedRecord {
    std::uint64_t seed = 0;
    std::string discipline = "mt19937_64 seeded by splitmix64(seed, path, stream)";
};

struct JumpEvent {
    double time;
    int step;
    std::vector<double> mark;
};

struct SimOptions {
    std::size_t memory_budget_bytes = std::size_t{2} << 30;
};

/// Discretized forward paths. States and increments are stored node-major
/// (all paths of node i are contiguous) because the backward sweep reads them
/// one node at a time.
struct PathBundle {
    std::size_t n_paths = 0;
    int dim = 1;
    TimeGrid grid;
    ForwardModel model;
    SeedRecord seed;
    std::vector<double> states;             // (N+1) * n * d
    std::vector<double> dW;                 // N * n * d
    std::vector<std::uint16_t> jump_count;  // N * n, empty without jumps
    std::vector<std::vector<JumpEvent>> jumps;
    std::vector<double> exit_time;  // kInf = no exit on [0, T]; empty before detect_exit
    bool bridge = false;

    const double* x(int node, std::size_t p) const {
        return states.data() + (static_cast<std::size_t>(node) * n_paths + p) * dim;
    }
    double x1(int node, std::size_t p) const { return states[static_cast<std::size_t>(node) * n_paths + p]; }
    const double* dw(int step, std::size_t p) const {
        return dW.data() + (static_cast<std::size_t>(step) * n_paths + p) * dim;
    }
    int jumps_in_step(int step, std::size_t p) const {
        return jump_count.empty() ? 0 : jump_count[static_cast<std::size_t>(step) * n_paths + p];
    }
    bool has_exit_times() const { return exit_time.size() == n_paths; }
    /// 1{tau <= t_i}
    bool exited(std::size_t p, int node) const { return exit_time[p] <= grid.t(node); }
};

namespace detail {

/// One Euler-Maruyama path. x[i * stride + c] receives node i.
inline void simulate_one(const ForwardModel& m, const TimeGrid& grid, std::uint64_t seed, std::size_t path,
                         double* x, std::size_t xstride, double* dw, std::size_t dwstride, std::uint16_t* jcount,
                         std::size_t jstride, std::vector<JumpEvent>* events) {
    const int d = m.dim;
    auto gd = substream(seed, path, StreamTag::Diffusion);
    std::normal_distribution<double> normal;
    std::mt19937_64 gj;
    if (m.jump) gj = substream(seed, path, StreamTag::Jumps);
    std::normal_distribution<double> mark_normal;
    std::uniform_real_distribution<double> mark_unif;
    std::vector<double> z(d), mark(d);

    for (int c = 0; c < d; ++c) x[c] = m.x0[c];
    for (int i = 0; i < grid.N(); ++i) {
        const double dt = grid.dt(i), sq = std::sqrt(dt);
        const double* xi = x + static_cast<std::size_t>(i) * xstride;
        double* xn = x + static_cast<std::size_t>(i + 1) * xstride;
        double* w = dw ? dw + static_cast<std::size_t>(i) * dwstride : z.data();
        for (int c = 0; c < d; ++c) w[c] = sq * normal(gd);
        for (int r = 0; r < d; ++r) {
            double drift = m.b0[r], diff = 0.0;
            for (int c = 0; c < d; ++c) {
                drift += m.B(r, c) * xi[c];
                diff += (m.S0(r, c) + xi[r] * m.S1(r, c)) * w[c];
            }
            xn[r] = xi[r] + drift * dt + diff;
        }
        if (m.jump && m.jump->intensity > 0.0) {
            std::poisson_distribution<int> pois(m.jump->intensity * dt);
            const int k = pois(gj);
            if (jcount) jcount[static_cast<std::size_t>(i) * jstride] = static_cast<std::uint16_t>(std::min(k, 65535));
            std::vector<double> times(k);
            for (auto& t : times) t = grid.t(i) + open_uniform(gj) * dt;
            std::sort(times.begin(), times.end());
            for (int e = 0; e < k; ++e) {
                m.jump->sample_mark(gj, mark_normal, mark_unif, mark.data());
                for (int r = 0; r < d; ++r) xn[r] += mark[r];
                if (events) events->push_back({times[e], i, mark});
            }
        } else if (jcount) {
            jcount[static_cast<std::size_t>(i) * jstride] = 0;
        }
    }
}

/// Exit time of one path from its node states.
inline double exit_one(const ForwardModel& m, const TimeGrid& grid, const DomainFlow& dom, std::uint64_t seed,
                       std::size_t path, const double* x, std::size_t xstride, bool bridge) {
    if (!dom.contains(x, 0.0)) return 0.0;
    auto g = substream(seed, path, StreamTag::Exit);
    for (int i = 0; i < grid.N(); ++i) {
        const double t0 = grid.t(i), t1 = grid.t(i + 1), dt = t1 - t0;
        const double* xi = x + static_cast<std::size_t>(i) * xstride;
        const double* xn = x + static_cast<std::size_t>(i + 1) * xstride;
        double u = 1.0, v = 1.0;
        if (bridge) {
            u = open_uniform(g);
            v = open_uniform(g);
        }
        if (!dom.contains(xn, t1)) return bridge ? t0 + v * dt : t1;
        if (bridge) {
            // 1-d only; checked by the caller
            double s = m.S0(0, 0) + xi[0] * m.S1(0, 0);
            const double var = s * s * dt;
            const double up = std::exp(-2.0 * (dom.upper[0].value(t0) - xi[0]) * (dom.upper[0].value(t1) - xn[0]) / var);
            const double lo = std::exp(-2.0 * (xi[0] - dom.lower[0].value(t0)) * (xn[0] - dom.lower[0].value(t1)) / var);
            const double hit = 1.0 - (1.0 - up) * (1.0 - lo);
            if (u < hit) return t0 + v * dt;
        }
    }
    return kInf;
}

inline void check_exit_inputs(const ForwardModel& m, const TimeGrid& grid, const DomainFlow& dom, bool bridge) {
    if (dom.dim() != m.dim || dom.upper.size() != dom.lower.size())
        throw ConfigError("detect_exit: domain dimension " + std::to_string(dom.dim()) +
                          " does not match path dimension " + std::to_string(m.dim));
    if (dom.T != grid.T()) throw ConfigError("detect_exit: domain and paths have different horizons");
    if (bridge && m.dim != 1) throw ConfigError("detect_exit: bridge correction is one-dimensional only");
}

}  // namespace detail

inline std::size_t bundle_bytes(const ForwardModel& m, const TimeGrid& g, std::size_t n) {
    std::size_t per_path = (2 * static_cast<std::size_t>(g.N()) + 1) * m.dim * sizeof(double) + sizeof(double);
    if (m.jump) per_path += g.N() * sizeof(std::uint16_t);
    return per_path * n;
}

/// Euler-Maruyama paths with compound Poisson jumps added at their simulated
/// times inside each step. Bit-identical for any worker count.
inline PathBundle simulate_paths(const ForwardModel& model, const TimeGrid& grid, std::size_t n_paths,
                                 const SeedRecord& seed, const SimOptions& opt = {}) {
    if (n_paths < 1) throw ConfigError("simulate_paths: n_paths must be >= 1");
    if (!model.shapes_consistent()) throw ConfigError("simulate_paths: inconsistent model dimensions");
    const std::size_t need = bundle_bytes(model, grid, n_paths);
    if (need > opt.memory_budget_bytes)
        throw ResourceError("simulate_paths: bundle needs " + std::to_string(need >> 20) + " MiB, budget is " +
                            std::to_string(opt.memory_budget_bytes >> 20) + " MiB");
    PathBundle b;
    b.n_paths = n_paths;
    b.dim = model.dim;
    b.grid = grid;
    b.model = model;
    b.seed = seed;
    const std::size_t d = model.dim, N = grid.N();
    b.states.resize((N + 1) * n_paths * d);
    b.dW.resize(N * n_paths * d);
    if (model.jump) {
        b.jump_count.resize(N * n_paths);
        b.jumps.resize(n_paths);
    }
    parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p)
            detail::simulate_one(model, grid, seed.seed, p, b.states.data() + p * d, n_paths * d, b.dW.data() + p * d,
                                 n_paths * d, model.jump ? b.jump_count.data() + p : nullptr, n_paths,
                                 model.jump ? &b.jumps[p] : nullptr);
    });
    return b;
}

/// Fills exit_time in place. With bridge correction (1-d), a crossing between
/// two inside nodes is drawn with the Brownian-bridge hitting probability per
/// boundary; a triggered exit is placed uniformly inside the step.
inline PathBundle& detect_exit(PathBundle& paths, const DomainFlow& domain, bool bridge_correction) {
    detail::check_exit_inputs(paths.model, paths.grid, domain, bridge_correction);
    paths.exit_time.assign(paths.n_paths, kInf);
    paths.bridge = bridge_correction;
    const std::size_t stride = paths.n_paths * paths.dim;
    parallel_for(paths.n_paths, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p)
            paths.exit_time[p] = detail::exit_one(paths.model, paths.grid, domain, paths.seed.seed, p,
                                                  paths.states.data() + p * paths.dim, stride, bridge_correction);
    });
    return paths;
}

/// Exit times only, without storing paths. Same streams as
/// simulate_paths + detect_exit, hence the same values.
inline std::vector<double> simulate_exit_times(const ForwardModel& model, const TimeGrid& grid, std::size_t n_paths,
                                               const SeedRecord& seed, const DomainFlow& domain, bool bridge) {
    if (n_paths < 1) throw ConfigError("simulate_exit_times: n_paths must be >= 1");
    detail::check_exit_inputs(model, grid, domain, bridge);
    std::vector<double> out(n_paths, kInf);
    const std::size_t d = model.dim, N = grid.N();
    parallel_for(n_paths, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> x((N + 1) * d);
        std::vector<double> w(N * d);
        for (std::size_t p = lo; p < hi; ++p) {
            detail::simulate_one(model, grid, seed.seed, p, x.data(), d, w.data(), d, nullptr, 0, nullptr);
            out[p] = detail::exit_one(model, grid, domain, seed.seed, p, x.data(), d, bridge);
        }
    });
    return out;
}

struct ExitCdf {
    std::vector<double> s;
    std::vector<double> prob;
    std::vector<double> stderr_;
};

inline ExitCdf empirical_exit_cdf(const std::vector<double>& exit_times, const std::vector<double>& s_grid) {
    ExitCdf r{s_grid, {}, {}};
    std::vector<double> sorted = exit_times;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    for (double s : s_grid) {
        const double k = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), s) - sorted.begin());
        const double p = n > 0 ? k / n : 0.0;
        r.prob.push_back(p);
        r.stderr_.push_back(n > 0 ? std::sqrt(p * (1.0 - p) / n) : 0.0);
    }
    return r;
}

inline ExitCdf empirical_exit_cdf(const PathBundle& paths, const std::vector<double>& s_grid) {
    if (!paths.has_exit_times()) throw ConfigError("empirical_exit_cdf: run detect_exit first");
    return empirical_exit_cdf(paths.exit_time, s_grid);
}

/// path_id, node_index, t, x_1..x_d, exited_flag, exit_time, exit_sentinel_flag.
/// A missing exit is written as T + 1 with the sentinel flag set.
inline void write_paths_csv(const PathBundle& b, const std::string& path) {
    std::vector<std::string> header{"path_id", "node_index", "t"};
    for (int c = 0; c < b.dim; ++c) header.push_back("x_" + std::to_string(c + 1));
    header.insert(header.end(), {"exited_flag", "exit_time", "exit_sentinel_flag"});
    CsvWriter w(path, header);
    const double T = b.grid.T();
    for (std::size_t p = 0; p < b.n_paths; ++p) {
        const double tau = b.has_exit_times() ? b.exit_time[p] : kInf;
        const bool sentinel = !(tau <= T);
        for (int i = 0; i <= b.grid.N(); ++i) {
            std::vector<std::string> cells{std::to_string(p), std::to_string(i), format_number(b.grid.t(i))};
            const double* x = b.x(i, p);
            for (int c = 0; c < b.dim; ++c) cells.push_back(format_number(x[c]));
            cells.push_back(tau <= b.grid.t(i) ? "1" : "0");
            cells.push_back(format_number(sentinel ? T + 1.0 : tau));
            cells.push_back(sentinel ? "1" : "0");
            w.row_strings(cells);
        }
    }
}

}  // namespace bsdelab
