#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "bsdelab/errors.hpp"

namespace bsdelab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Piecewise-constant functions of time
// ---------------------------------------------------------------------------

/// Right-continuous step function: values[j] on [breaks[j-1], breaks[j]),
/// with breaks[-1] = -inf and breaks[size] = +inf.
struct PiecewiseConstant {
    std::vector<double> breaks;
    std::vector<double> values{0.0};

    static PiecewiseConstant constant(double v) { return PiecewiseConstant{{}, {v}}; }

    bool well_formed() const {
        if (values.size() != breaks.size() + 1) return false;
        for (std::size_t j = 1; j < breaks.size(); ++j)
            if (!(breaks[j - 1] < breaks[j])) return false;
        return std::none_of(values.begin(), values.end(), [](double v) { return std::isnan(v); });
    }

    double operator()(double t) const {
        auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
        return values[static_cast<std::size_t>(it - breaks.begin())];
    }

    bool is_constant(double v) const {
        return std::all_of(values.begin(), values.end(), [v](double x) { return x == v; });
    }

    struct Piece {
        double lo, hi, value;
    };

    /// Constant pieces covering [a, b].
    std::vector<Piece> pieces(double a, double b) const {
        std::vector<Piece> out;
        if (!(a < b)) return out;
        double lo = a;
        for (std::size_t j = 0; j <= breaks.size(); ++j) {
            const double hi = j < breaks.size() ? std::min(breaks[j], b) : b;
            if (hi > lo) {
                out.push_back({lo, hi, values[j]});
                lo = hi;
            }
            if (lo >= b) break;
        }
        return out;
    }

    double min_on(double a, double b) const {
        double m = kInf;
        for (const auto& p : pieces(a, b)) m = std::min(m, p.value);
        return m;
    }

    /// Exact integral of g(value) over [a, b].
    template <class G>
    double integral(double a, double b, G&& g) const {
        double acc = 0.0;
        for (const auto& p : pieces(a, b)) acc += (p.hi - p.lo) * g(p.value);
        return acc;
    }
};

// ---------------------------------------------------------------------------
// Forward dynamics
// ---------------------------------------------------------------------------

enum class ModelPreset { BM, GBM, OU, AFFINE };
enum class MarkLaw { PointMass, UniformBox, Gaussian };

/// Finite-activity compound Poisson jumps; marks in R^d are added to X.
struct JumpSpec {
    double intensity = 0.0;  // events per unit time
    MarkLaw law = MarkLaw::PointMass;
    Vector mark_a;  // point: location; uniform: lower corner; gaussian: mean
    Vector mark_b;  // uniform: upper corner; gaussian: per-coordinate sd
    double theta = 0.0;  // bound on the jump-kernel weight

    template <class Rng, class Normal, class Uniform>
    void sample_mark(Rng& rng, Normal& normal, Uniform& unif, double* out) const {
        const auto m = mark_a.size();
        for (Eigen::Index i = 0; i < m; ++i) {
            switch (law) {
                case MarkLaw::PointMass: out[i] = mark_a[i]; break;
                case MarkLaw::UniformBox: out[i] = mark_a[i] + (mark_b[i] - mark_a[i]) * unif(rng); break;
                case MarkLaw::Gaussian: out[i] = mark_a[i] + mark_b[i] * normal(rng); break;
            }
        }
    }
};

/// dX = (b0 + B x) dt + (S0 + diag(x) S1) dW, plus optional jumps.
/// BM: B = 0, S1 = 0. GBM: b0 = 0, B diagonal, S0 = 0. OU: S1 = 0.
struct ForwardModel {
    int dim = 1;
    ModelPreset preset = ModelPreset::BM;
    Vector x0 = Vector::Zero(1);
    Vector b0 = Vector::Zero(1);
    Matrix B = Matrix::Zero(1, 1);
    Matrix S0 = Matrix::Identity(1, 1);
    Matrix S1 = Matrix::Zero(1, 1);
    std::optional<JumpSpec> jump;

    static ForwardModel brownian(int d, double sigma, Vector x0, Vector drift = {}) {
        ForwardModel m;
        m.dim = d;
        m.preset = ModelPreset::BM;
        m.x0 = std::move(x0);
        m.b0 = drift.size() == d ? std::move(drift) : Vector::Zero(d);
        m.B = Matrix::Zero(d, d);
        m.S0 = sigma * Matrix::Identity(d, d);
        m.S1 = Matrix::Zero(d, d);
        return m;
    }

    static ForwardModel geometric(Vector mu, Matrix sigma, Vector x0) {
        ForwardModel m;
        m.dim = static_cast<int>(mu.size());
        m.preset = ModelPreset::GBM;
        m.x0 = std::move(x0);
        m.b0 = Vector::Zero(m.dim);
        m.B = mu.asDiagonal();
        m.S0 = Matrix::Zero(m.dim, m.dim);
        m.S1 = std::move(sigma);
        return m;
    }

    static ForwardModel ornstein_uhlenbeck(Matrix mean_reversion, Vector level, Matrix sigma, Vector x0) {
        ForwardModel m;
        m.dim = static_cast<int>(level.size());
        m.preset = ModelPreset::OU;
        m.x0 = std::move(x0);
        m.B = -mean_reversion;
        m.b0 = mean_reversion * level;
        m.S0 = std::move(sigma);
        m.S1 = Matrix::Zero(m.dim, m.dim);
        return m;
    }

    bool shapes_consistent() const {
        const auto d = static_cast<Eigen::Index>(dim);
        if (dim < 1 || x0.size() != d || b0.size() != d) return false;
        if (B.rows() != d || B.cols() != d) return false;
        if (S0.rows() != d || S0.cols() != d || S1.rows() != d || S1.cols() != d) return false;
        if (jump) {
            if (jump->mark_a.size() != d) return false;
            if (jump->law != MarkLaw::PointMass && jump->mark_b.size() != d) return false;
        }
        return true;
    }

    Vector drift(const Vector& x) const { return b0 + B * x; }
    Matrix diffusion(const Vector& x) const { return S0 + x.asDiagonal() * S1; }
    Matrix covariance(const Vector& x) const {
        const Matrix s = diffusion(x);
        return s * s.transpose();
    }
};

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

/// f(t,y,z,I) = -y|y|^{q-1}/eta(t) + chi*y + f0(t) + [z_dep] L*sum(z)/sqrt(d) + [psi_dep] I
/// where I = int psi*theta dmu is the jump-integral functional.
struct DriverDescriptor {
    double q = 2.0;
    double p = 2.0;  // Hoelder conjugate, must equal q/(q-1)
    PiecewiseConstant eta = PiecewiseConstant::constant(1.0);
    PiecewiseConstant f0 = PiecewiseConstant::constant(0.0);
    double chi = 0.0;
    double L = 0.0;
    double ell = 2.0;
    bool z_dep = false;
    bool psi_dep = false;

    static double conjugate(double q) { return q / (q - 1.0); }

    static DriverDescriptor power(double q, double ell) {
        DriverDescriptor d;
        d.q = q;
        d.p = conjugate(q);
        d.ell = ell;
        return d;
    }

    bool is_pure_power() const {
        return eta.is_constant(1.0) && f0.is_constant(0.0) && chi == 0.0 && !z_dep && !psi_dep;
    }

    double power_term(double t, double y) const { return -y * std::pow(std::abs(y), q - 1.0) / eta(t); }

    /// Truncated driver f^k = (f - f0) + min(f0, k). `z_term` is the already
    /// contracted L*sum(z)/sqrt(d) value.
    double truncated(double t, double y, double z_term, double jump_term, double k) const {
        double v = power_term(t, y) + chi * y + std::min(f0(t), k);
        if (z_dep) v += z_term;
        if (psi_dep) v += jump_term;
        return v;
    }

    /// d f / d y (independent of z, I and the truncation).
    double dy(double t, double y) const { return -q * std::pow(std::abs(y), q - 1.0) / eta(t) + chi; }
};

// ---------------------------------------------------------------------------
// Time-varying domains and terminal conditions
// ---------------------------------------------------------------------------

struct BoundaryCurve {
    enum class Kind { Constant, Linear, Sinusoidal };
    Kind kind = Kind::Constant;
    double c0 = 0.0;     // level
    double c1 = 0.0;     // slope (linear)
    double amp = 0.0;    // sinusoidal amplitude
    double freq = 0.0;   // cycles per unit time
    double phase = 0.0;

    static BoundaryCurve constant(double c) { return {Kind::Constant, c}; }
    static BoundaryCurve linear(double c0, double slope) { return {Kind::Linear, c0, slope}; }
    static BoundaryCurve sinusoidal(double c0, double amp, double freq, double phase = 0.0) {
        return {Kind::Sinusoidal, c0, 0.0, amp, freq, phase};
    }

    double value(double t) const {
        switch (kind) {
            case Kind::Constant: return c0;
            case Kind::Linear: return c0 + c1 * t;
            case Kind::Sinusoidal: return c0 + amp * std::sin(2.0 * M_PI * freq * t + phase);
        }
        return c0;
    }
    double velocity(double t) const {
        switch (kind) {
            case Kind::Constant: return 0.0;
            case Kind::Linear: return c1;
            case Kind::Sinusoidal: return amp * 2.0 * M_PI * freq * std::cos(2.0 * M_PI * freq * t + phase);
        }
        return 0.0;
    }
    double max_speed() const {
        switch (kind) {
            case Kind::Constant: return 0.0;
            case Kind::Linear: return std::abs(c1);
            case Kind::Sinusoidal: return std::abs(amp * 2.0 * M_PI * freq);
        }
        return 0.0;
    }
};

/// Moving box D_t = prod_i (lower_i(t), upper_i(t)) on [0, T].
struct DomainFlow {
    std::vector<BoundaryCurve> lower;
    std::vector<BoundaryCurve> upper;
    double T = 1.0;

    static DomainFlow interval(BoundaryCurve lo, BoundaryCurve hi, double T) { return {{lo}, {hi}, T}; }
    static DomainFlow fixed_box(const Vector& lo, const Vector& hi, double T) {
        DomainFlow d;
        d.T = T;
        for (Eigen::Index i = 0; i < lo.size(); ++i) {
            d.lower.push_back(BoundaryCurve::constant(lo[i]));
            d.upper.push_back(BoundaryCurve::constant(hi[i]));
        }
        return d;
    }

    int dim() const { return static_cast<int>(lower.size()); }

    bool contains(const double* x, double t) const {
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (!(x[i] > lower[i].value(t) && x[i] < upper[i].value(t))) return false;
        return true;
    }

    /// Smallest gap upper - lower over a dense sample of [0, T].
    double min_gap(int samples = 2001) const {
        double g = kInf;
        for (int s = 0; s < samples; ++s) {
            const double t = T * s / (samples - 1);
            for (std::size_t i = 0; i < lower.size(); ++i) g = std::min(g, upper[i].value(t) - lower[i].value(t));
        }
        return g;
    }

    double max_speed() const {
        double v = 0.0;
        for (std::size_t i = 0; i < lower.size(); ++i) v = std::max({v, lower[i].max_speed(), upper[i].max_speed()});
        return v;
    }
};

/// Bounded terminal payoff g(x) = c + a.x + b*|x|^2.
struct Payoff {
    double c = 0.0;
    Vector a;
    double b = 0.0;

    static Payoff constant(double c) { return {c, {}, 0.0}; }

    double operator()(const double* x, int dim) const {
        double v = c;
        for (int i = 0; i < dim; ++i) {
            if (i < a.size()) v += a[i] * x[i];
            v += b * x[i] * x[i];
        }
        return v;
    }
};

enum class TerminalKind { Bounded, Xi1, Xi2 };

/// XI1: infinity on {tau <= T}. XI2: infinity on A_T with A_t = {tau > t}.
struct TerminalDescriptor {
    TerminalKind kind = TerminalKind::Bounded;
    Payoff payoff;
    std::optional<DomainFlow> domain;
    std::vector<double> ladder{1.0};

    bool singular() const { return kind != TerminalKind::Bounded; }
};

// ---------------------------------------------------------------------------
// Time grid
// ---------------------------------------------------------------------------

/// Nodes t_i = T (1 - (1 - i/N)^gamma); gamma = 1 is uniform, larger gamma
/// concentrates nodes near T.
class TimeGrid {
public:
    TimeGrid() : TimeGrid(1.0, 1, 1.0) {}
    TimeGrid(double T, int N, double gamma = 2.0) : T_(T), N_(N), gamma_(gamma) {
        if (!(T > 0.0) || N < 1 || !(gamma >= 1.0))
            throw ConfigError("TimeGrid requires T > 0, N >= 1, gamma >= 1");
        nodes_.resize(static_cast<std::size_t>(N) + 1);
        for (int i = 0; i <= N; ++i) nodes_[i] = T * (1.0 - std::pow(1.0 - static_cast<double>(i) / N, gamma));
        nodes_.front() = 0.0;
        nodes_.back() = T;
    }

    double T() const { return T_; }
    int N() const { return N_; }
    double gamma() const { return gamma_; }
    double t(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    double dt(int i) const { return nodes_[static_cast<std::size_t>(i) + 1] - nodes_[static_cast<std::size_t>(i)]; }
    const std::vector<double>& nodes() const { return nodes_; }

    /// Index of the node nearest to time s.
    int nearest(double s) const {
        auto it = std::lower_bound(nodes_.begin(), nodes_.end(), s);
        if (it == nodes_.end()) return N_;
        const int j = static_cast<int>(it - nodes_.begin());
        if (j > 0 && s - nodes_[j - 1] <= nodes_[j] - s) return j - 1;
        return j;
    }

    /// First node index with t_i >= s (N+1 if none).
    int first_at_or_after(double s) const {
        return static_cast<int>(std::lower_bound(nodes_.begin(), nodes_.end(), s) - nodes_.begin());
    }

    double max_step() const {
        double m = 0.0;
        for (int i = 0; i < N_; ++i) m = std::max(m, dt(i));
        return m;
    }

    bool operator==(const TimeGrid& o) const { return T_ == o.T_ && N_ == o.N_ && gamma_ == o.gamma_; }

private:
    double T_;
    int N_;
    double gamma_;
    std::vector<double> nodes_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

struct AssumptionCheck {
    std::string name;
    bool passed = true;
    double witness = 0.0;
    std::string note;
};

struct ValidationReport {
    std::vector<AssumptionCheck> checks;

    bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    const AssumptionCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
    std::string failures() const {
        std::string s;
        for (const auto& c : checks)
            if (!c.passed) s += (s.empty() ? "" : "; ") + c.name + (c.note.empty() ? "" : " (" + c.note + ")");
        return s;
    }
};

inline constexpr double kEllipticityFloor = 1e-8;

inline double min_covariance_eigenvalue(const ForwardModel& m, const std::vector<Vector>& points) {
    double lo = kInf;
    for (const auto& x : points) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(m.covariance(x), Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues().minCoeff());
    }
    return lo;
}

/// x0 plus per-coordinate offsets +-0.5*max(1,|x0_i|) (clipped into the
/// domain at t = 0 when one is given).
inline std::vector<Vector> ellipticity_probe_points(const ForwardModel& m, const DomainFlow* dom) {
    std::vector<Vector> pts{m.x0};
    for (int i = 0; i < m.dim; ++i) {
        for (double sgn : {-1.0, 1.0}) {
            Vector x = m.x0;
            x[i] += sgn * 0.5 * std::max(1.0, std::abs(m.x0[i]));
            if (dom && static_cast<int>(dom->lower.size()) == m.dim) {
                const double lo = dom->lower[i].value(0.0), hi = dom->upper[i].value(0.0);
                x[i] = std::clamp(x[i], lo + 0.25 * (m.x0[i] - lo), hi - 0.25 * (hi - m.x0[i]));
            }
            pts.push_back(x);
        }
    }
    return pts;
}

/// Checks (A1)-(A4), (C1)-(C4), the 1/eta integrability, ellipticity, grid and
/// terminal consistency. Never throws on bad input: every problem is a failed
/// entry of the report.
inline ValidationReport validate_model(const ForwardModel& model, const DriverDescriptor& driver,
                                       const TerminalDescriptor& terminal, const TimeGrid& grid) {
    ValidationReport r;
    auto add = [&](std::string name, bool ok, double witness, std::string note = {}) {
        r.checks.push_back({std::move(name), ok, witness, std::move(note)});
    };
    const double T = grid.T();

    const bool shapes = model.shapes_consistent();
    add("model.dimensions", shapes, model.dim, shapes ? "" : "coefficient arrays do not match dim");
    if (shapes) {
        bool preset_ok = true;
        switch (model.preset) {
            case ModelPreset::BM: preset_ok = model.B.isZero(0.0) && model.S1.isZero(0.0); break;
            case ModelPreset::GBM:
                preset_ok = model.S0.isZero(0.0) && model.b0.isZero(0.0) && model.B.isDiagonal(0.0);
                break;
            case ModelPreset::OU: preset_ok = model.S1.isZero(0.0); break;
            case ModelPreset::AFFINE: break;
        }
        add("model.preset_form", preset_ok, 0.0, preset_ok ? "" : "coefficients outside preset family");
        const DomainFlow* dom = terminal.domain ? &*terminal.domain : nullptr;
        const double lam = min_covariance_eigenvalue(model, ellipticity_probe_points(model, dom));
        add("ellipticity", lam >= kEllipticityFloor, lam,
            lam >= kEllipticityFloor ? "" : "smallest eigenvalue of sigma sigma^T below floor");
    } else {
        add("ellipticity", false, 0.0, "skipped: inconsistent dimensions");
    }
    add("hoelder_coefficients", true, 0.0,
        model.preset == ModelPreset::GBM ? "assumed by construction; GBM preset is only locally Hoelder"
                                         : "assumed by construction (affine coefficients)");

    if (model.jump) {
        const auto& j = *model.jump;
        const bool finite = std::isfinite(j.intensity) && j.intensity >= 0.0;
        add("jump.finite_activity", finite, j.intensity, finite ? "" : "intensity must be finite and >= 0");
        const bool theta_ok = std::isfinite(j.theta) && j.theta >= 0.0;
        add("C3.theta_moments", theta_ok, j.theta, theta_ok ? "" : "theta must be bounded and >= 0");
        bool law_ok = true;
        if (j.law == MarkLaw::UniformBox && shapes) law_ok = (j.mark_b.array() >= j.mark_a.array()).all();
        if (j.law == MarkLaw::Gaussian && shapes) law_ok = (j.mark_b.array() >= 0.0).all();
        add("jump.mark_law", law_ok, 0.0, law_ok ? "" : "mark law parameters invalid");
        add("A3.kernel_bound", theta_ok, j.theta, "kappa = theta in [-1, theta]");
    } else {
        add("C3.theta_moments", true, 0.0, "no jumps");
    }

    const bool q_ok = driver.q > 1.0 && std::isfinite(driver.q);
    add("C1.q_gt_1", q_ok, driver.q, q_ok ? "" : "q > 1 required");
    const bool p_ok = q_ok && driver.p * (driver.q - 1.0) == driver.q;
    add("C1.hoelder_conjugate", p_ok, driver.p, p_ok ? "" : "p must equal q/(q-1)");
    const bool ell_ok = driver.ell > 1.0;
    add("C2.ell_gt_1", ell_ok, driver.ell, ell_ok ? "" : "ell > 1 required");

    const bool eta_ok = driver.eta.well_formed() && driver.f0.well_formed();
    add("driver.piecewise_form", eta_ok, 0.0, eta_ok ? "" : "eta/f0 breakpoints or values malformed");
    if (eta_ok) {
        const double eta_min = driver.eta.min_on(0.0, T);
        add("A1.monotone", std::isfinite(driver.chi), driver.chi, "power part non-increasing in y");
        const bool pos = eta_min > 0.0;
        const double inv_int = pos ? driver.eta.integral(0.0, T, [](double v) { return 1.0 / v; }) : kInf;
        add("eta.positive", pos, eta_min, pos ? "" : "eta must be bounded below by a positive constant");
        add("A2.integrable_growth", pos && std::isfinite(inv_int), inv_int);
        add("eta.inverse_integrable", pos && std::isfinite(inv_int), inv_int);
        const double c2 = pos && q_ok ? driver.eta.integral(0.0, T, [&](double v) {
            return std::pow(v, driver.ell * (driver.p - 1.0));
        })
                                      : kInf;
        add("C2.eta_moment", std::isfinite(c2), c2);
        const double f0_min = driver.f0.min_on(0.0, T);
        const double c4 = driver.f0.integral(0.0, T, [&](double v) { return std::pow(std::abs(v), driver.ell); });
        const bool c4_ok = f0_min >= 0.0 && std::isfinite(c4);
        add("C4.f0_nonneg_integrable", c4_ok, c4, f0_min >= 0.0 ? "" : "f0 must be >= 0");
    }
    const bool l_ok = driver.L >= 0.0 && std::isfinite(driver.L);
    add("A4.lipschitz_z", l_ok, driver.L, l_ok ? "" : "L must be finite and >= 0");
    if (driver.psi_dep && !model.jump)
        add("driver.psi_without_jumps", false, 0.0, "psi dependence requires a jump specification");

    bool grid_ok = grid.N() >= 1 && grid.nodes().back() == grid.T() && grid.max_step() <= grid.T();
    for (int i = 0; i < grid.N() && grid_ok; ++i) grid_ok = grid.t(i) < grid.t(i + 1);
    add("grid.nodes", grid_ok, grid.max_step());

    bool ladder_ok = !terminal.ladder.empty() && terminal.ladder.front() > 0.0;
    for (std::size_t j = 1; j < terminal.ladder.size() && ladder_ok; ++j)
        ladder_ok = terminal.ladder[j - 1] < terminal.ladder[j];
    add("terminal.ladder", ladder_ok, terminal.ladder.empty() ? 0.0 : terminal.ladder.back(),
        ladder_ok ? "" : "truncation ladder must be positive and strictly increasing");

    if (terminal.singular()) {
        if (!terminal.domain) {
            add("terminal.domain", false, 0.0, "XI1/XI2 require a DomainFlow");
        } else {
            const auto& dom = *terminal.domain;
            const bool dim_ok = dom.dim() == model.dim && dom.upper.size() == dom.lower.size();
            add("domain.dimension", dim_ok, dom.dim());
            const double gap = dom.min_gap();
            add("domain.positive_gap", gap > 0.0, gap, gap > 0.0 ? "" : "lower(t) < upper(t) violated");
            const double v = dom.max_speed();
            add("domain.bounded_velocity", std::isfinite(v), v);
            add("domain.horizon", dom.T == grid.T(), dom.T);
            if (dim_ok && shapes) {
                const bool inside = dom.contains(model.x0.data(), 0.0);
                add("domain.x0_interior", inside, 0.0, inside ? "" : "x0 must lie inside D_0");
            }
            if (terminal.kind == TerminalKind::Xi2)
                add("H1.left_continuity", true, 0.0,
                    "P(tau = T) = 0 for diffusion exit times (continuous density); assumed by construction");
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Closed forms for the power driver
// ---------------------------------------------------------------------------

/// Solution with terminal value +infinity for f(y) = -y|y|^{q-1}:
/// ((q-1)(T-t))^{-1/(q-1)}.
inline double y_infinity(double q, double time_to_horizon) {
    if (!(time_to_horizon > 0.0)) throw std::domain_error("y_infinity: time to horizon must be > 0");
    return std::pow((q - 1.0) * time_to_horizon, -1.0 / (q - 1.0));
}

inline double y_infinity(const DriverDescriptor& driver, double time_to_horizon) {
    if (!driver.is_pure_power()) throw ConfigError("y_infinity: driver is not the pure power driver");
    return y_infinity(driver.q, time_to_horizon);
}

/// Backward ODE y' = y^q with y(T) = k: ((q-1)(T-t) + k^{1-q})^{-1/(q-1)}.
inline double y_truncated_ode(double q, double k, double time_to_horizon) {
    if (!(k > 0.0)) throw std::domain_error("y_truncated_ode: level k must be > 0");
    if (time_to_horizon < 0.0) throw std::domain_error("y_truncated_ode: negative time to horizon");
    if (time_to_horizon == 0.0) return k;
    if (std::isinf(k)) return y_infinity(q, time_to_horizon);
    return std::pow((q - 1.0) * time_to_horizon + std::pow(k, 1.0 - q), -1.0 / (q - 1.0));
}

inline double y_truncated_ode(const DriverDescriptor& driver, double k, double time_to_horizon) {
    if (!driver.is_pure_power()) throw ConfigError("y_truncated_ode: driver is not the pure power driver");
    return y_truncated_ode(driver.q, k, time_to_horizon);
}

/// Adaptive Gauss-Kronrod integral of a smooth integrand on [a, b].
template <class F>
double integrate(F&& f, double a, double b) {
    if (!(b > a)) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
}

}  // namespace bsdelab
