#pragma once

// Time-domain view of a Fourier solution: synthesis, real coordinates,
// Hamilton-equation residuals and an RK4 reference integrator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qpt/lattice.hpp"
#include "qpt/model.hpp"
#include "qpt/polynomial.hpp"

namespace qpt {

using cvec = std::vector<std::complex<double>>;

struct Trajectory {
    std::vector<double> times;
    std::vector<cvec> states;
    // coords[t][j] = (x_j, y_j); empty until to_real_coords.
    std::vector<std::vector<std::pair<double, double>>> coords;
};

inline std::vector<double> linspace(double a, double b, int count) {
    if (count < 2) throw std::invalid_argument("linspace: need at least two points");
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) t[static_cast<std::size_t>(i)] = a + (b - a) * i / (count - 1);
    return t;
}

namespace detail {
inline void check_times(const std::vector<double>& times) {
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw std::invalid_argument("times must be strictly increasing");
}
}  // namespace detail

/// z(t) and ż(t) at one time by direct summation.
inline void synthesize_at(const FourierVector& zhat, const std::vector<double>& omega_prime, double t, cvec& z, cvec* zdot = nullptr) {
    const Box sup = zhat.support();
    z.assign(static_cast<std::size_t>(zhat.modes()), 0.0);
    if (zdot) zdot->assign(static_cast<std::size_t>(zhat.modes()), 0.0);
    for (std::size_t i = 0; i < sup.size(); ++i) {
        const MultiIndex k = sup.at(i);
        const double freq = k.dot(omega_prime);
        const std::complex<double> ph = std::polar(1.0, freq * t);
        for (int j = 0; j < zhat.modes(); ++j) {
            const double c = zhat.mode(j).values()[i];
            if (c == 0.0) continue;
            z[static_cast<std::size_t>(j)] += c * ph;
            if (zdot) (*zdot)[static_cast<std::size_t>(j)] += std::complex<double>(0.0, freq) * c * ph;
        }
    }
}

/// z_j(t) = Σ_k ẑ_j(k) e^{i⟨k,ω'⟩t}.
inline Trajectory synthesize(const FourierVector& zhat, const std::vector<double>& omega_prime, const std::vector<double>& times) {
    if (static_cast<int>(omega_prime.size()) != zhat.dim()) throw std::invalid_argument("synthesize: frequency length mismatch");
    detail::check_times(times);
    Trajectory tr;
    tr.times = times;
    for (double t : times) {
        cvec z;
        synthesize_at(zhat, omega_prime, t, z);
        tr.states.push_back(std::move(z));
    }
    return tr;
}

/// y = (z + z̄)/√2, x = i(z − z̄)/√2, from z = (y − ix)/√2.
inline std::pair<double, double> to_xy(std::complex<double> z) {
    return {-std::numbers::sqrt2 * z.imag(), std::numbers::sqrt2 * z.real()};
}
inline std::complex<double> from_xy(double x, double y) {
    return std::complex<double>(y, -x) / std::numbers::sqrt2;
}

inline Trajectory to_real_coords(Trajectory tr) {
    tr.coords.clear();
    for (const auto& z : tr.states) {
        std::vector<std::pair<double, double>> row;
        for (const auto& zj : z) row.push_back(to_xy(zj));
        tr.coords.push_back(std::move(row));
    }
    return tr;
}

/// Hamilton vector field ż = iω⊙z + iε(∂H₁/∂z̄)(z, z̄).
class HamiltonField {
public:
    explicit HamiltonField(const ModelSpec& model) : model_(model) {
        for (int j = 0; j < model.n; ++j) dX_.push_back(model.H1.differentiate_zbar(j));
    }
    cvec operator()(const cvec& z) const {
        cvec w(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) w[i] = std::conj(z[i]);
        cvec out(z.size());
        const std::complex<double> I(0.0, 1.0);
        for (int j = 0; j < model_.n; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            out[jj] = I * model_.omega[jj] * z[jj] + I * model_.epsilon * dX_[jj].evaluate(z, w);
        }
        return out;
    }

private:
    const ModelSpec& model_;
    std::vector<Polynomial> dX_;
};

inline double cnorm(const cvec& v) {
    double s = 0.0;
    for (const auto& x : v) s += std::norm(x);
    return std::sqrt(s);
}

struct ResidualReport {
    double max = 0.0;
    double mean = 0.0;
    std::vector<double> per_time;
};

/// ‖ż − iω⊙z − iε∂H₁/∂z̄‖ along the synthesized solution, ż taken term-wise.
inline ResidualReport ode_residual(const ModelSpec& model, const FourierVector& zhat, const std::vector<double>& omega_prime,
                                   const std::vector<double>& times) {
    detail::check_times(times);
    const HamiltonField field(model);
    ResidualReport rep;
    for (double t : times) {
        cvec z, zdot;
        synthesize_at(zhat, omega_prime, t, z, &zdot);
        const cvec f = field(z);
        double s = 0.0;
        for (std::size_t j = 0; j < z.size(); ++j) s += std::norm(zdot[j] - f[j]);
        const double r = std::sqrt(s);
        rep.per_time.push_back(r);
        rep.max = std::max(rep.max, r);
        rep.mean += r;
    }
    if (!times.empty()) rep.mean /= static_cast<double>(times.size());
    return rep;
}

struct IntegrationResult {
    Trajectory trajectory;
    double energy_drift = 0.0;  // max relative |H(t) − H(0)|
    bool stable = true;         // energy drift ≤ 1e-3
};

/// Classical fixed-step RK4 from z0 over [0, t_end]; dt < 0 integrates backwards.
/// Every `stride`-th step is stored.
inline IntegrationResult reference_integrate(const ModelSpec& model, const cvec& z0, double t_end, double dt, int stride = 1) {
    if (dt == 0.0 || !std::isfinite(dt)) throw std::invalid_argument("reference_integrate: dt must be nonzero");
    if (t_end * dt < 0.0) throw std::invalid_argument("reference_integrate: dt sign must match t_end");
    if (stride < 1) throw std::invalid_argument("reference_integrate: stride must be positive");
    const HamiltonField f(model);
    const long steps = std::lround(std::abs(t_end / dt));
    const double h = t_end / static_cast<double>(std::max(steps, 1L));
    IntegrationResult res;
    cvec z = z0;
    const double H0 = evaluate_H(model, z0);
    auto axpy = [](const cvec& a, double s, const cvec& b) {
        cvec r(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
        return r;
    };
    res.trajectory.times.push_back(0.0);
    res.trajectory.states.push_back(z);
    for (long s = 1; s <= steps; ++s) {
        const cvec k1 = f(z);
        const cvec k2 = f(axpy(z, h / 2, k1));
        const cvec k3 = f(axpy(z, h / 2, k2));
        const cvec k4 = f(axpy(z, h, k3));
        for (std::size_t i = 0; i < z.size(); ++i) z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        const double drift = std::abs(evaluate_H(model, z) - H0) / std::max(std::abs(H0), 1e-300);
        res.energy_drift = std::max(res.energy_drift, drift);
        if (s % stride == 0 || s == steps) {
            res.trajectory.times.push_back(h * static_cast<double>(s));
            res.trajectory.states.push_back(z);
        }
    }
    res.stable = res.energy_drift <= 1e-3;
    return res;
}

/// Pointwise ‖z_a(t) − z_b(t)‖ on matching time grids.
inline std::vector<double> compare_trajectory(const Trajectory& a, const Trajectory& b) {
    if (a.times.size() != b.times.size()) throw std::invalid_argument("compare_trajectory: grid length mismatch");
    std::vector<double> err;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        if (std::abs(a.times[i] - b.times[i]) > 1e-9 * std::max(1.0, std::abs(a.times[i])))
            throw std::invalid_argument("compare_trajectory: time grids differ");
        cvec d(a.states[i].size());
        for (std::size_t j = 0; j < d.size(); ++j) d[j] = a.states[i][j] - b.states[i][j];
        err.push_back(cnorm(d));
    }
    return err;
}

}  // namespace qpt
