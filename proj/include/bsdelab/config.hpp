#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bsdelab/core_model.hpp"
#include "bsdelab/exit_density.hpp"
#include "bsdelab/regression.hpp"
#include "bsdelab/singular_terminal.hpp"

namespace bsdelab {

using nlohmann::json;

inline const std::vector<std::string>& pipeline_names() {
    static const std::vector<std::string> p{"simulate", "solve", "continuity", "density", "bound-check", "verify-all"};
    return p;
}

struct McConfig {
    std::size_t n_paths = 20000;
    std::uint64_t seed = 20240601;
    bool bridge = true;
    std::size_t memory_budget_mb = 2048;
};

struct DensityConfig {
    double x = 0.0;
    double t = 0.0;
    PdeGrid pde;
    double bandwidth = 0.08;
    std::size_t mc_paths = 100000;
    int mc_N = 200;
    double window = 0.2;
    int s_points = 101;
    double compare_from = 0.5;  // MC vs PDE compared on [compare_from, T]
};

struct ExperimentConfig {
    std::string name = "custom";
    std::string pipeline = "verify-all";
    std::string output_dir = "out";
    ForwardModel model;
    DriverDescriptor driver;
    TerminalDescriptor terminal;
    TimeGrid grid;
    McConfig mc;
    RegressionSpec regression;
    std::optional<DensityConfig> density;
    AprioriBoundParams bound;
    std::vector<double> deltas = default_delta_grid();
    std::vector<std::string> events;
    std::vector<double> xi2_t_n;
};

// ---------------------------------------------------------------------------
// JSON -> config
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
T get(const json& j, const char* key, const T& fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

inline Vector vec(const json& j, const std::string& where) {
    if (!j.is_array()) throw ConfigError(where + ": expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(where + ": expected numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline Matrix mat(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw ConfigError(where + ": expected an array of rows");
    Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (j[r].size() != j[0].size()) throw ConfigError(where + ": ragged matrix");
        for (std::size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

inline json vec_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json mat_json(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        a.push_back(row);
    }
    return a;
}

inline PiecewiseConstant piecewise(const json& j, const std::string& where) {
    if (j.is_number()) return PiecewiseConstant::constant(j.get<double>());
    if (j.is_string() && j.get<std::string>() == "inf") return PiecewiseConstant::constant(kInf);
    check_keys(j, {"breaks", "values"}, where);
    PiecewiseConstant pc;
    pc.breaks = get<std::vector<double>>(j, "breaks", {}, where);
    pc.values.clear();
    for (const auto& v : j.at("values")) pc.values.push_back(v.is_string() && v == "inf" ? kInf : v.get<double>());
    return pc;
}

inline json piecewise_json(const PiecewiseConstant& pc) {
    auto num = [](double v) { return std::isinf(v) ? json("inf") : json(v); };
    if (pc.breaks.empty()) return num(pc.values.front());
    json vals = json::array();
    for (double v : pc.values) vals.push_back(num(v));
    return {{"breaks", pc.breaks}, {"values", vals}};
}

inline BoundaryCurve curve(const json& j, const std::string& where) {
    if (j.is_number()) return BoundaryCurve::constant(j.get<double>());
    const auto type = get<std::string>(j, "type", "constant", where);
    if (type == "constant") {
        check_keys(j, {"type", "c"}, where);
        return BoundaryCurve::constant(get<double>(j, "c", 0.0, where));
    }
    if (type == "linear") {
        check_keys(j, {"type", "c0", "slope"}, where);
        return BoundaryCurve::linear(get<double>(j, "c0", 0.0, where), get<double>(j, "slope", 0.0, where));
    }
    if (type == "sinusoidal") {
        check_keys(j, {"type", "c0", "amp", "freq", "phase"}, where);
        return BoundaryCurve::sinusoidal(get<double>(j, "c0", 0.0, where), get<double>(j, "amp", 0.0, where),
                                         get<double>(j, "freq", 0.0, where), get<double>(j, "phase", 0.0, where));
    }
    throw ConfigError(where + ": unknown curve type '" + type + "'");
}

inline ModelPreset model_preset(const std::string& s, const std::string& where) {
    if (s == "BM") return ModelPreset::BM;
    if (s == "GBM") return ModelPreset::GBM;
    if (s == "OU") return ModelPreset::OU;
    if (s == "AFFINE") return ModelPreset::AFFINE;
    throw ConfigError(where + ": unknown preset '" + s + "'");
}

inline const char* model_preset_name(ModelPreset p) {
    switch (p) {
        case ModelPreset::BM: return "BM";
        case ModelPreset::GBM: return "GBM";
        case ModelPreset::OU: return "OU";
        case ModelPreset::AFFINE: return "AFFINE";
    }
    return "AFFINE";
}

inline ForwardModel model(const json& j) {
    const std::string w = "model";
    check_keys(j, {"preset", "dim", "x0", "sigma", "b0", "B", "S0", "S1", "jump"}, w);
    ForwardModel m;
    m.preset = model_preset(get<std::string>(j, "preset", "BM", w), w);
    m.dim = get<int>(j, "dim", 1, w);
    if (m.dim < 1) throw ConfigError("model.dim must be >= 1");
    const auto d = static_cast<Eigen::Index>(m.dim);
    m.x0 = j.contains("x0") ? vec(j.at("x0"), "model.x0") : Vector::Zero(d);
    m.b0 = j.contains("b0") ? vec(j.at("b0"), "model.b0") : Vector::Zero(d);
    m.B = j.contains("B") ? mat(j.at("B"), "model.B") : Matrix::Zero(d, d);
    m.S0 = j.contains("S0") ? mat(j.at("S0"), "model.S0") : Matrix::Identity(d, d);
    m.S1 = j.contains("S1") ? mat(j.at("S1"), "model.S1") : Matrix::Zero(d, d);
    if (j.contains("sigma")) {
        if (j.contains("S0")) throw ConfigError("model: give either sigma or S0");
        m.S0 = get<double>(j, "sigma", 1.0, w) * Matrix::Identity(d, d);
    }
    if (j.contains("jump")) {
        const auto& jj = j.at("jump");
        check_keys(jj, {"intensity", "mark_law", "a", "b", "theta"}, "model.jump");
        JumpSpec js;
        js.intensity = get<double>(jj, "intensity", 0.0, "model.jump");
        const auto law = get<std::string>(jj, "mark_law", "point", "model.jump");
        if (law == "point") js.law = MarkLaw::PointMass;
        else if (law == "uniform") js.law = MarkLaw::UniformBox;
        else if (law == "gaussian") js.law = MarkLaw::Gaussian;
        else throw ConfigError("model.jump.mark_law: unknown law '" + law + "'");
        js.mark_a = jj.contains("a") ? vec(jj.at("a"), "model.jump.a") : Vector::Zero(d);
        js.mark_b = jj.contains("b") ? vec(jj.at("b"), "model.jump.b") : Vector::Zero(d);
        js.theta = get<double>(jj, "theta", 0.0, "model.jump");
        m.jump = js;
    }
    return m;
}

inline json model_json(const ForwardModel& m) {
    json j = {{"preset", model_preset_name(m.preset)}, {"dim", m.dim},      {"x0", vec_json(m.x0)},
              {"b0", vec_json(m.b0)},                  {"B", mat_json(m.B)}, {"S0", mat_json(m.S0)},
              {"S1", mat_json(m.S1)}};
    if (m.jump) {
        const char* law = m.jump->law == MarkLaw::PointMass ? "point"
                          : m.jump->law == MarkLaw::UniformBox ? "uniform"
                                                               : "gaussian";
        j["jump"] = {{"intensity", m.jump->intensity},
                     {"mark_law", law},
                     {"a", vec_json(m.jump->mark_a)},
                     {"b", vec_json(m.jump->mark_b)},
                     {"theta", m.jump->theta}};
    }
    return j;
}

inline DriverDescriptor driver(const json& j) {
    const std::string w = "driver";
    check_keys(j, {"q", "p", "eta", "f0", "chi", "L", "ell", "z_dep", "psi_dep"}, w);
    DriverDescriptor d;
    d.q = get<double>(j, "q", 2.0, w);
    d.p = j.contains("p") ? get<double>(j, "p", 0.0, w) : DriverDescriptor::conjugate(d.q);
    if (j.contains("eta")) d.eta = piecewise(j.at("eta"), "driver.eta");
    if (j.contains("f0")) d.f0 = piecewise(j.at("f0"), "driver.f0");
    d.chi = get<double>(j, "chi", 0.0, w);
    d.L = get<double>(j, "L", 0.0, w);
    d.ell = get<double>(j, "ell", 2.0, w);
    d.z_dep = get<bool>(j, "z_dep", false, w);
    d.psi_dep = get<bool>(j, "psi_dep", false, w);
    return d;
}

inline json driver_json(const DriverDescriptor& d) {
    return {{"q", d.q},     {"p", d.p},     {"eta", piecewise_json(d.eta)}, {"f0", piecewise_json(d.f0)},
            {"chi", d.chi}, {"L", d.L},     {"ell", d.ell},                 {"z_dep", d.z_dep},
            {"psi_dep", d.psi_dep}};
}

inline TerminalDescriptor terminal(const json& j, double T) {
    const std::string w = "terminal";
    check_keys(j, {"kind", "ladder", "domain", "payoff"}, w);
    TerminalDescriptor t;
    const auto kind = get<std::string>(j, "kind", "bounded", w);
    if (kind == "bounded") t.kind = TerminalKind::Bounded;
    else if (kind == "xi1") t.kind = TerminalKind::Xi1;
    else if (kind == "xi2") t.kind = TerminalKind::Xi2;
    else throw ConfigError("terminal.kind: unknown kind '" + kind + "' (bounded, xi1, xi2)");
    t.ladder = get<std::vector<double>>(j, "ladder", {1.0}, w);
    if (j.contains("payoff")) {
        const auto& pj = j.at("payoff");
        check_keys(pj, {"c", "a", "b"}, "terminal.payoff");
        t.payoff.c = get<double>(pj, "c", 0.0, "terminal.payoff");
        if (pj.contains("a")) t.payoff.a = vec(pj.at("a"), "terminal.payoff.a");
        t.payoff.b = get<double>(pj, "b", 0.0, "terminal.payoff");
    }
    if (j.contains("domain")) {
        const auto& dj = j.at("domain");
        check_keys(dj, {"lower", "upper"}, "terminal.domain");
        DomainFlow dom;
        dom.T = T;
        if (!dj.contains("lower") || !dj.contains("upper")) throw ConfigError("terminal.domain: lower and upper required");
        for (const auto& c : dj.at("lower")) dom.lower.push_back(curve(c, "terminal.domain.lower"));
        for (const auto& c : dj.at("upper")) dom.upper.push_back(curve(c, "terminal.domain.upper"));
        t.domain = dom;
    }
    return t;
}

inline json terminal_json(const TerminalDescriptor& t) {
    const char* kind = t.kind == TerminalKind::Bounded ? "bounded" : t.kind == TerminalKind::Xi1 ? "xi1" : "xi2";
    json j = {{"kind", kind}, {"ladder", t.ladder}};
    j["payoff"] = {{"c", t.payoff.c}, {"b", t.payoff.b}};
    if (t.payoff.a.size()) j["payoff"]["a"] = vec_json(t.payoff.a);
    if (t.domain) {
        json lo = json::array(), up = json::array();
        for (const auto& c : t.domain->lower) lo.push_back(curve_json(c));
        for (const auto& c : t.domain->upper) up.push_back(curve_json(c));
        j["domain"] = {{"lower", lo}, {"upper", up}};
    }
    return j;
}

}  // namespace detail

/// Parses a config object; every problem becomes a ConfigError naming the key.
inline ExperimentConfig config_from_json(const json& j) {
    detail::check_keys(j,
                       {"name", "pipeline", "output_dir", "model", "driver", "terminal", "grid", "mc", "regression",
                        "density", "bound", "continuity", "xi2"},
                       "config");
    using detail::get;
    ExperimentConfig c;
    c.name = get<std::string>(j, "name", "custom", "config");
    c.pipeline = get<std::string>(j, "pipeline", "verify-all", "config");
    if (std::find(pipeline_names().begin(), pipeline_names().end(), c.pipeline) == pipeline_names().end())
        throw ConfigError("config.pipeline: unknown pipeline '" + c.pipeline + "'");
    c.output_dir = get<std::string>(j, "output_dir", "out", "config");
    if (!j.contains("model")) throw ConfigError("config: 'model' is required");
    c.model = detail::model(j.at("model"));
    c.driver = detail::driver(j.contains("driver") ? j.at("driver") : json::object());
    const json g = j.contains("grid") ? j.at("grid") : json::object();
    detail::check_keys(g, {"T", "N", "gamma"}, "grid");
    c.grid = TimeGrid(get<double>(g, "T", 1.0, "grid"), get<int>(g, "N", 200, "grid"), get<double>(g, "gamma", 2.0, "grid"));
    c.terminal = detail::terminal(j.contains("terminal") ? j.at("terminal") : json::object(), c.grid.T());
    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        detail::check_keys(m, {"n_paths", "seed", "bridge", "memory_budget_mb"}, "mc");
        c.mc.n_paths = get<std::size_t>(m, "n_paths", c.mc.n_paths, "mc");
        c.mc.seed = get<std::uint64_t>(m, "seed", c.mc.seed, "mc");
        c.mc.bridge = get<bool>(m, "bridge", c.mc.bridge, "mc");
        c.mc.memory_budget_mb = get<std::size_t>(m, "memory_budget_mb", c.mc.memory_budget_mb, "mc");
    }
    if (j.contains("regression")) {
        const auto& r = j.at("regression");
        detail::check_keys(r, {"degree", "cells", "per_event", "ridge"}, "regression");
        c.regression.degree = get<int>(r, "degree", c.regression.degree, "regression");
        c.regression.cells = get<int>(r, "cells", c.regression.cells, "regression");
        c.regression.per_event = get<bool>(r, "per_event", c.regression.per_event, "regression");
        c.regression.ridge = get<double>(r, "ridge", c.regression.ridge, "regression");
        c.regression.validate();
    }
    if (j.contains("density")) {
        const auto& dj = j.at("density");
        detail::check_keys(dj, {"x", "t", "M", "N_pde", "bandwidth", "mc_paths", "mc_N", "window", "s_points",
                                "compare_from"},
                           "density");
        DensityConfig d;
        d.x = get<double>(dj, "x", c.model.x0.size() ? c.model.x0[0] : 0.0, "density");
        d.t = get<double>(dj, "t", 0.0, "density");
        d.pde.M = get<int>(dj, "M", d.pde.M, "density");
        d.pde.N_pde = get<int>(dj, "N_pde", d.pde.N_pde, "density");
        d.bandwidth = get<double>(dj, "bandwidth", d.bandwidth, "density");
        d.mc_paths = get<std::size_t>(dj, "mc_paths", d.mc_paths, "density");
        d.mc_N = get<int>(dj, "mc_N", d.mc_N, "density");
        d.window = get<double>(dj, "window", d.window, "density");
        d.s_points = get<int>(dj, "s_points", d.s_points, "density");
        d.compare_from = get<double>(dj, "compare_from", d.compare_from, "density");
        d.pde.validate();
        c.density = d;
    }
    c.bound.ell = c.driver.ell;
    c.bound.ell_prime = c.driver.ell;
    if (j.contains("bound")) {
        const auto& bj = j.at("bound");
        detail::check_keys(bj, {"ell_prime", "K"}, "bound");
        c.bound.ell_prime = get<double>(bj, "ell_prime", c.bound.ell_prime, "bound");
        c.bound.K = get<double>(bj, "K", c.bound.K, "bound");
    }
    if (j.contains("continuity")) {
        const auto& cj = j.at("continuity");
        detail::check_keys(cj, {"deltas", "events"}, "continuity");
        c.deltas = get<std::vector<double>>(cj, "deltas", c.deltas, "continuity");
        c.events = get<std::vector<std::string>>(cj, "events", {}, "continuity");
        for (const auto& e : c.events) EventSpec::parse(e);
    }
    if (j.contains("xi2")) {
        const auto& xj = j.at("xi2");
        detail::check_keys(xj, {"t_n"}, "xi2");
        c.xi2_t_n = get<std::vector<double>>(xj, "t_n", {}, "xi2");
    }
    return c;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j = {{"name", c.name},
              {"pipeline", c.pipeline},
              {"output_dir", c.output_dir},
              {"model", detail::model_json(c.model)},
              {"driver", detail::driver_json(c.driver)},
              {"terminal", detail::terminal_json(c.terminal)},
              {"grid", {{"T", c.grid.T()}, {"N", c.grid.N()}, {"gamma", c.grid.gamma()}}},
              {"mc",
               {{"n_paths", c.mc.n_paths},
                {"seed", c.mc.seed},
                {"bridge", c.mc.bridge},
                {"memory_budget_mb", c.mc.memory_budget_mb}}},
              {"regression",
               {{"degree", c.regression.degree},
                {"cells", c.regression.cells},
                {"per_event", c.regression.per_event},
                {"ridge", c.regression.ridge}}},
              {"bound", {{"ell_prime", c.bound.ell_prime}, {"K", c.bound.K}}},
              {"continuity", {{"deltas", c.deltas}, {"events", c.events}}}};
    if (c.density) {
        const auto& d = *c.density;
        j["density"] = {{"x", d.x},
                        {"t", d.t},
                        {"M", d.pde.M},
                        {"N_pde", d.pde.N_pde},
                        {"bandwidth", d.bandwidth},
                        {"mc_paths", d.mc_paths},
                        {"mc_N", d.mc_N},
                        {"window", d.window},
                        {"s_points", d.s_points},
                        {"compare_from", d.compare_from}};
    }
    if (!c.xi2_t_n.empty()) j["xi2"] = {{"t_n", c.xi2_t_n}};
    return j;
}

/// Parses JSON text; syntax errors carry the byte position.
inline ExperimentConfig config_from_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
    }
    return config_from_json(j);
}

inline ExperimentConfig config_from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_text(ss.str());
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace detail {

inline json interval_domain(json lower, json upper) { return {{"lower", {lower}}, {"upper", {upper}}}; }

inline json bm_model() { return {{"preset", "BM"}, {"dim", 1}, {"x0", {0.0}}, {"sigma", 1.0}}; }

inline std::map<std::string, json> preset_registry() {
    std::map<std::string, json> r;
    const json ladder = {1, 2, 4, 8, 16, 32, 64};
    const json fixed = interval_domain(-1.0, 1.0);
    const json reg = {{"degree", 1}, {"cells", 32}, {"per_event", true}, {"ridge", 0.0}};
    const json dens = {{"x", 0.0},         {"t", 0.0},        {"M", 400},      {"N_pde", 2000},
                       {"bandwidth", 0.08}, {"mc_paths", 100000}, {"mc_N", 200}, {"window", 0.2},
                       {"s_points", 101},   {"compare_from", 0.5}};

    r["paper-xi1-q3"] = {{"name", "paper-xi1-q3"},
                         {"pipeline", "verify-all"},
                         {"model", bm_model()},
                         {"driver", {{"q", 3.0}, {"ell", 10.0}}},
                         {"terminal", {{"kind", "xi1"}, {"ladder", ladder}, {"domain", fixed}}},
                         {"grid", {{"T", 1.0}, {"N", 200}, {"gamma", 2.0}}},
                         {"mc", {{"n_paths", 20000}, {"seed", 20240601}, {"bridge", true}}},
                         {"regression", reg},
                         {"density", dens},
                         {"continuity", {{"events", {"tau>T", "tau<=T"}}}}};

    r["paper-xi2-q2"] = {{"name", "paper-xi2-q2"},
                         {"pipeline", "verify-all"},
                         {"model", bm_model()},
                         {"driver", {{"q", 2.0}, {"ell", 3.0}}},
                         {"terminal", {{"kind", "xi2"}, {"ladder", ladder}, {"domain", fixed}}},
                         {"grid", {{"T", 1.0}, {"N", 200}, {"gamma", 2.0}}},
                         {"mc", {{"n_paths", 20000}, {"seed", 20240602}, {"bridge", true}}},
                         {"regression", reg},
                         {"density", dens},
                         {"continuity", {{"events", {"tau<=T-0.1"}}}},
                         {"xi2", {{"t_n", {0.5, 0.75, 0.875, 0.9375, 0.96875}}}}};

    r["moving-domain-density"] = {
        {"name", "moving-domain-density"},
        {"pipeline", "density"},
        {"model", bm_model()},
        {"driver", {{"q", 3.0}, {"ell", 10.0}}},
        {"terminal",
         {{"kind", "xi1"},
          {"ladder", ladder},
          {"domain", interval_domain(-1.0, {{"type", "linear"}, {"c0", 1.0}, {"slope", -0.5}})}}},
        {"grid", {{"T", 1.0}, {"N", 200}, {"gamma", 1.0}}},
        {"mc", {{"n_paths", 20000}, {"seed", 20240603}, {"bridge", true}}},
        {"regression", reg},
        {"density", dens}};

    r["jump-poisson-xi1"] = {
        {"name", "jump-poisson-xi1"},
        {"pipeline", "solve"},
        {"model",
         {{"preset", "BM"},
          {"dim", 1},
          {"x0", {0.0}},
          {"sigma", 1.0},
          {"jump", {{"intensity", 2.0}, {"mark_law", "uniform"}, {"a", {-0.3}}, {"b", {0.3}}, {"theta", 0.5}}}}},
        {"driver", {{"q", 3.0}, {"ell", 10.0}, {"psi_dep", true}}},
        {"terminal", {{"kind", "xi1"}, {"ladder", {1, 2, 4, 8, 16}}, {"domain", fixed}}},
        {"grid", {{"T", 1.0}, {"N", 200}, {"gamma", 2.0}}},
        {"mc", {{"n_paths", 20000}, {"seed", 20240604}, {"bridge", false}}},
        {"regression", reg}};

    r["bm-simulate"] = {{"name", "bm-simulate"},
                        {"pipeline", "simulate"},
                        {"model", bm_model()},
                        {"driver", {{"q", 2.0}, {"ell", 3.0}}},
                        {"terminal", {{"kind", "xi1"}, {"ladder", {1}}, {"domain", fixed}}},
                        {"grid", {{"T", 1.0}, {"N", 100}, {"gamma", 1.0}}},
                        {"mc", {{"n_paths", 200}, {"seed", 7}, {"bridge", true}}}};
    return r;
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
    std::vector<std::string> n;
    for (const auto& [k, v] : detail::preset_registry()) n.push_back(k);
    return n;
}

inline ExperimentConfig preset(const std::string& name) {
    const auto reg = detail::preset_registry();
    const auto it = reg.find(name);
    if (it == reg.end()) {
        std::string names;
        for (const auto& [k, v] : reg) names += (names.empty() ? "" : ", ") + k;
        throw ConfigError("unknown preset '" + name + "'; available: " + names);
    }
    return config_from_json(it->second);
}

}  // namespace bsdelab
