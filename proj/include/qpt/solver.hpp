#pragma once

// Alternating frequency (Q) / coefficient (P) Newton scheme on a growing
// box schedule, with per-step diagnostics of the linearized operator.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpt/evaluate.hpp"
#include "qpt/lattice.hpp"
#include "qpt/model.hpp"
#include "qpt/vectorfield.hpp"

namespace qpt {

struct SingularOperatorError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& what, std::string dump) : std::runtime_error(what), dump(std::move(dump)) {}
    std::string dump;
};

struct TheoryScales {
    double M = 0.0;
    double M0 = 0.0;
    double log_eps_N = 0.0;  // log ε_N = −(log N)^15
    double N_prime = 0.0;
};

inline TheoryScales theory_scales(double epsilon, int N) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ConfigError("theory_scales: epsilon must lie in (0,1)");
    if (N < 2) throw ConfigError("theory_scales: N must be at least 2");
    TheoryScales s;
    s.M = std::exp(std::pow(std::log(1.0 / epsilon), 0.05));
    s.M0 = std::exp(std::pow(std::log(s.M), 0.05));
    s.log_eps_N = -std::pow(std::log(static_cast<double>(N)), 15.0);
    s.N_prime = std::exp(std::pow(std::log(static_cast<double>(N)), 0.1));
    return s;
}

enum class ScheduleMode { practical, theoretical };

/// Practical: N0·growth^r for r = 0..r_max. Theoretical: ceil(M^r), r = 0..r_max,
/// dropping radii below 2 and repeats.
inline std::vector<int> default_schedule(double epsilon, int r_max, ScheduleMode mode = ScheduleMode::practical,
                                         int N0 = 4, int growth = 2) {
    if (r_max < 1) throw ConfigError("schedule: r_max must be positive");
    std::vector<int> out;
    if (mode == ScheduleMode::theoretical) {
        const double M = theory_scales(epsilon, 2).M;
        for (int r = 0; r <= r_max; ++r) {
            const int N = static_cast<int>(std::ceil(std::pow(M, r) - 1e-12));
            if (N < 2 || (!out.empty() && out.back() == N)) continue;
            out.push_back(N);
        }
    } else {
        if (N0 < 1 || growth < 2) throw ConfigError("schedule: need N0 >= 1 and growth >= 2");
        long N = N0;
        for (int r = 0; r <= r_max; ++r, N *= growth) out.push_back(static_cast<int>(N));
    }
    return out;
}

enum class LinearSolver { dense_lu, dense_qr };

struct SolverConfig {
    int r_max = 8;
    std::vector<int> schedule{4, 8, 16, 32, 64};  // the last radius is reused once exhausted
    int max_radius = 0;                           // > 0 caps every radius
    double tol_F = 1e-12;
    double tol_step = 1e-13;
    BVariant b_variant = BVariant::chain_rule;
    bool check_conditions = false;
    LinearSolver linear_solver = LinearSolver::dense_lu;
    double t_star = 10.0;

    int radius_at(int r) const {
        if (schedule.empty()) throw ConfigError("solver: empty schedule");
        int N = schedule[static_cast<std::size_t>(std::min<int>(r, static_cast<int>(schedule.size()) - 1))];
        return max_radius > 0 ? std::min(N, max_radius) : N;
    }
    void validate() const {
        if (r_max < 1) throw ConfigError("solver: r_max must be positive");
        if (schedule.empty()) throw ConfigError("solver: empty schedule");
        for (std::size_t i = 0; i < schedule.size(); ++i) {
            if (schedule[i] < 1) throw ConfigError("solver: radii must be positive");
            if (i && schedule[i] <= schedule[i - 1]) throw ConfigError("solver: schedule must be strictly increasing");
        }
        if (!(tol_F > 0.0 && tol_step > 0.0)) throw ConfigError("solver: tolerances must be positive");
    }
};

struct ConditionReport {
    double inverse_norm = 0.0;
    double log_inverse_norm = 0.0;
    double log_eps_N = 0.0;
    bool inverse_bound_ok = false;  // log‖L⁻¹‖ ≤ −log ε_N
    double s = 0.0;
    bool localization_ok = true;
    double worst_margin = -std::numeric_limits<double>::infinity();  // max of log|L⁻¹| + d^s/2 over tested pairs
    SiteIndex worst_row, worst_col;
    // Same test with the distance min(|k−k'|, |k+k'|).
    bool folded_localization_ok = true;
    double folded_worst_margin = -std::numeric_limits<double>::infinity();
};

struct ConvergenceRecord {
    int r = 0;
    int N = 0;
    std::vector<double> omega;  // ω^{(r+1)}
    double norm_F = 0.0;        // ‖F(ẑ^{(r+1)}, q(ẑ^{(r+1)}))‖ over the full support
    double norm_F_box = 0.0;    // the same restricted to Λ_N
    double step_norm = 0.0;
    double freq_step = 0.0;
    double state_step_at_t = 0.0;
    double gevrey_s = 0.0;
    double drift = 0.0;          // |ω^{(r+1)} − ω_T|
    double drift_bound = 0.0;    // ε‖X̂_q‖ max 1/a
    double rcond = 0.0;
    std::optional<ConditionReport> conditions;
    double seconds = 0.0;
};

struct SolverState {
    int r = 0;
    std::vector<double> omega;  // ω^{(r)}
    FourierVector zp;           // ẑ_p^{(r)}: resonant sites zero
    std::vector<ConvergenceRecord> history;
};

struct SolveResult {
    std::vector<double> omega_star;  // q(ẑ*)
    FourierVector zhat_star;         // pins included
    std::vector<ConvergenceRecord> history;
    bool converged = false;
    double final_norm_F = 0.0;
    double q_residual = 0.0;  // |(ω_T − ω*)⊙a + εX̂_q(ẑ*)|
};

/// ω_T + εX̂_q ⊙ a⁻¹ at the given full state.
inline std::vector<double> q_update_from(const ModelSpec& model, const std::vector<double>& Xq) {
    std::vector<double> w = model.omega_T();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += model.epsilon * Xq[i] / model.amplitudes[i];
    return w;
}

inline std::vector<double> q_update(const ModelSpec& model, const SolverState& state) {
    const FourierVector X = eval_X(model, with_pins(model, state.zp));
    return q_update_from(model, split_qp(X, model).first);
}

inline double vec_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

/// ‖A‖₂ by power iteration on AᵀA.
inline double spectral_norm(const Eigen::MatrixXd& A, int max_iter = 500, double rtol = 1e-12) {
    if (A.size() == 0) return 0.0;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols()) / std::sqrt(static_cast<double>(A.cols()));
    double sigma = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = A.transpose() * (A * v);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        v = w / nw;
        const double next = std::sqrt(nw);
        if (std::abs(next - sigma) <= rtol * next) return next;
        sigma = next;
    }
    return sigma;
}

/// Inversion and localization checks on an explicit inverse over a layout.
inline ConditionReport check_implementation_conditions(const Eigen::MatrixXd& Linv, const SiteLayout& layout, int N, double s) {
    ConditionReport rep;
    rep.s = s;
    rep.inverse_norm = spectral_norm(Linv);
    rep.log_inverse_norm = std::log(rep.inverse_norm);
    rep.log_eps_N = -std::pow(std::log(static_cast<double>(std::max(N, 2))), 15.0);
    rep.inverse_bound_ok = std::isfinite(rep.inverse_norm) && rep.log_inverse_norm <= -rep.log_eps_N;
    const int m = layout.dim();
    const double dmin = std::sqrt(static_cast<double>(N));
    const int maxd = 2 * m * (layout.box().radius + 1) + 1;
    std::vector<double> half_pow(static_cast<std::size_t>(maxd + 1));
    for (int d = 0; d <= maxd; ++d) half_pow[static_cast<std::size_t>(d)] = 0.5 * std::pow(static_cast<double>(d), s);
    for (std::size_t c = 0; c < layout.size(); ++c) {
        const int* kc = layout.coords(c);
        for (std::size_t r = 0; r < layout.size(); ++r) {
            const int* kr = layout.coords(r);
            int dm = 0, dp = 0;
            for (int i = 0; i < m; ++i) {
                dm += std::abs(kr[i] - kc[i]);
                dp += std::abs(kr[i] + kc[i]);
            }
            const double a = std::abs(Linv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
            const double la = a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
            if (dm >= dmin) {
                const double margin = la + half_pow[static_cast<std::size_t>(dm)];
                if (margin > rep.worst_margin) {
                    rep.worst_margin = margin;
                    rep.worst_row = layout.site(r);
                    rep.worst_col = layout.site(c);
                }
            }
            const int df = std::min(dm, dp);
            if (df >= dmin) rep.folded_worst_margin = std::max(rep.folded_worst_margin, la + half_pow[static_cast<std::size_t>(df)]);
        }
    }
    rep.localization_ok = rep.worst_margin <= 0.0;
    rep.folded_localization_ok = rep.folded_worst_margin <= 0.0;
    return rep;
}

namespace detail {
struct Factorization {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    LinearSolver kind = LinearSolver::dense_lu;
    double rcond = 0.0;

    Factorization(const Eigen::MatrixXd& A, LinearSolver k) : kind(k) {
        if (kind == LinearSolver::dense_lu) {
            lu.compute(A);
            // The estimator misbehaves on exactly zero pivots; the pivot ratio catches those.
            const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
            const double ratio = piv.maxCoeff() > 0.0 ? piv.minCoeff() / piv.maxCoeff() : 0.0;
            const double est = lu.rcond();
            rcond = std::isfinite(est) ? std::min(est, ratio) : 0.0;
        } else {
            qr.compute(A);
            const auto& R = qr.matrixR();
            const double d0 = std::abs(R(0, 0));
            double dn = std::abs(R(A.rows() - 1, A.rows() - 1));
            rcond = d0 > 0.0 ? dn / d0 : 0.0;
        }
    }
    Eigen::VectorXd solve(const Eigen::VectorXd& b) const {
        if (kind == LinearSolver::dense_lu) return lu.solve(b);
        return qr.solve(b);
    }
    Eigen::MatrixXd inverse() const {
        if (kind == LinearSolver::dense_lu) return lu.inverse();
        return qr.inverse();
    }
};
}  // namespace detail

struct PUpdate {
    FourierVector zp_next;
    double rcond = 0.0;
    std::optional<ConditionReport> conditions;
    double norm_F_box = 0.0;
};

/// One P-step: solve L Δ = F(ẑ_p, ω') on Λ_N and return P_N(ẑ_p) − Δ.
inline PUpdate p_update(const ModelSpec& model, const FourierVector& zp, const FieldData& fd, const std::vector<double>& omega_next,
                        int N, const SolverConfig& cfg) {
    const FourierVector full = with_pins(model, zp);
    const Box box = Box::centered(model.m(), N);
    AssembleOptions opt;
    opt.b_variant = cfg.b_variant;
    const LatticeOperator L = assemble_L(model, fd, full, omega_next, box, opt);
    const FourierVector F = eval_F(model, zp, omega_next, &fd.X);
    const Eigen::VectorXd rhs = gather(F, L.rows);
    PUpdate out;
    out.norm_F_box = rhs.norm();
    const detail::Factorization fac(L.M, cfg.linear_solver);
    out.rcond = fac.rcond;
    if (!(fac.rcond > 1e-14)) {
        std::ostringstream os;
        os << "linearized operator on box radius " << N << " is numerically singular (rcond " << fac.rcond
           << "); the frequency may be resonant or the strip constant too small";
        throw SingularOperatorError(os.str());
    }
    const Eigen::VectorXd delta = fac.solve(rhs);
    if (!delta.allFinite()) throw SingularOperatorError("linear solve produced non-finite values");
    out.zp_next = zp.resized(N);
    out.zp_next -= scatter(delta, L.rows, model.n, N);
    out.zp_next = without_pins(model, out.zp_next);
    if (cfg.check_conditions) {
        const Eigen::MatrixXd Linv = fac.inverse();
        out.conditions = check_implementation_conditions(Linv, L.rows, N, gevrey_fit(zp));
    }
    return out;
}

inline PUpdate p_update(const ModelSpec& model, const SolverState& state, int N, const SolverConfig& cfg) {
    const FieldData fd = field_data(model, with_pins(model, state.zp));
    const std::vector<double> w = q_update_from(model, split_qp(fd.X, model).first);
    return p_update(model, state.zp, fd, w, N, cfg);
}

inline std::string format_history(const std::vector<ConvergenceRecord>& h) {
    std::ostringstream os;
    os.precision(6);
    for (const auto& rec : h)
        os << "r=" << rec.r << " N=" << rec.N << " |F|=" << rec.norm_F << " step=" << rec.step_norm << " dω=" << rec.freq_step << "\n";
    return os.str();
}

/// Run the alternating scheme from ẑ_p = 0, ω = ω_T.
inline SolveResult iterate(const ModelSpec& model, const SolverConfig& cfg) {
    model.validate();
    cfg.validate();
    SolverState st;
    st.omega = model.omega_T();
    st.zp = zero_state(model, 1);
    FieldData fd = field_data(model, with_pins(model, st.zp));
    SolveResult res;
    cvec z_prev;
    synthesize_at(with_pins(model, st.zp), st.omega, cfg.t_star, z_prev);
    int growth_streak = 0;
    for (int r = 0; r < cfg.r_max; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const int N = cfg.radius_at(r);
        const auto [Xq, Xp] = split_qp(fd.X, model);
        const std::vector<double> w_next = q_update_from(model, Xq);

        ConvergenceRecord rec;
        rec.r = r;
        rec.N = N;
        rec.omega = w_next;
        rec.freq_step = vec_dist(w_next, st.omega);
        rec.drift = vec_dist(w_next, model.omega_T());
        double amax = 0.0;
        for (double a : model.amplitudes) amax = std::max(amax, 1.0 / a);
        double xqn = 0.0;
        for (double x : Xq) xqn += x * x;
        rec.drift_bound = model.epsilon * std::sqrt(xqn) * amax;

        PUpdate pu = p_update(model, st.zp, fd, w_next, N, cfg);
        rec.rcond = pu.rcond;
        rec.conditions = pu.conditions;
        rec.norm_F_box = pu.norm_F_box;
        rec.step_norm = (pu.zp_next - st.zp).norm2();

        const FourierVector full_next = with_pins(model, pu.zp_next);
        cvec z_next;
        synthesize_at(full_next, w_next, cfg.t_star, z_next);
        cvec dz(z_next.size());
        for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = z_next[j] - z_prev[j];
        rec.state_step_at_t = cnorm(dz);
        rec.gevrey_s = gevrey_fit(pu.zp_next);

        fd = field_data(model, full_next);
        const std::vector<double> w_after = q_update_from(model, split_qp(fd.X, model).first);
        rec.norm_F = eval_F(model, pu.zp_next, w_after, &fd.X).norm2();
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (!res.history.empty() && rec.norm_F > 10.0 * res.history.back().norm_F)
            ++growth_streak;
        else
            growth_streak = 0;
        st.zp = std::move(pu.zp_next);
        st.omega = w_next;
        st.r = r + 1;
        z_prev = z_next;
        res.history.push_back(rec);
        if (!std::isfinite(rec.norm_F) || growth_streak >= 2)
            throw DivergenceError("iteration diverged: residual grew by more than 10x twice in a row", format_history(res.history));
        if (rec.norm_F < cfg.tol_F || rec.step_norm < cfg.tol_step) break;
    }
    res.zhat_star = with_pins(model, st.zp);
    const auto Xq = split_qp(fd.X, model).first;
    res.omega_star = q_update_from(model, Xq);
    res.final_norm_F = res.history.empty() ? 0.0 : res.history.back().norm_F;
    res.converged = res.final_norm_F < cfg.tol_F;
    double q2 = 0.0;
    const auto wT = model.omega_T();
    for (std::size_t i = 0; i < wT.size(); ++i) {
        const double qi = (wT[i] - res.omega_star[i]) * model.amplitudes[i] + model.epsilon * Xq[i];
        q2 += qi * qi;
    }
    res.q_residual = std::sqrt(q2);
    return res;
}

struct MetricsRow {
    int r = 0;
    double coeff_step = 0.0;
    double freq_step = 0.0;
    double state_step = 0.0;
    double norm_F = 0.0;
};

/// Per-iteration (‖Δẑ‖₂, |Δω|, ‖Δz(t*)‖, ‖F‖).
inline std::vector<MetricsRow> convergence_metrics(const std::vector<ConvergenceRecord>& history) {
    std::vector<MetricsRow> rows;
    for (const auto& h : history) rows.push_back({h.r, h.step_norm, h.freq_step, h.state_step_at_t, h.norm_F});
    return rows;
}

struct InverseDerivativeReport {
    double norm = 0.0;
    bool localization_ok = true;
    double worst_margin = -std::numeric_limits<double>::infinity();
    double log_bound = 0.0;  // log(4√m·N/ε_N²)
};

/// ∂_ω L_N⁻¹ = −L⁻¹(∂_ω L)L⁻¹ with ∂_ω L by central differences in each
/// tangent direction; the largest norm over directions is reported.
inline InverseDerivativeReport inverse_derivative_check(const ModelSpec& model, const FourierVector& zhat,
                                                        const std::vector<double>& omega_prime, int N, double h = 1e-6,
                                                        BVariant variant = BVariant::chain_rule, double s = -1.0) {
    const Box box = Box::centered(model.m(), N);
    AssembleOptions opt;
    opt.b_variant = variant;
    const FieldData fd = field_data(model, zhat);
    const LatticeOperator L = assemble_L(model, fd, zhat, omega_prime, box, opt);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(L.M);
    const Eigen::MatrixXd Linv = lu.inverse();
    if (s < 0.0) s = gevrey_fit(without_pins(model, zhat));
    InverseDerivativeReport rep;
    const int m = model.m();
    rep.log_bound = std::log(4.0 * std::sqrt(static_cast<double>(m)) * N) + 2.0 * std::pow(std::log(static_cast<double>(std::max(N, 2))), 15.0);
    const double dmin = std::pow(static_cast<double>(N), 0.75);
    for (int i = 0; i < m; ++i) {
        std::vector<double> wp = omega_prime, wm = omega_prime;
        wp[static_cast<std::size_t>(i)] += h;
        wm[static_cast<std::size_t>(i)] -= h;
        const Eigen::MatrixXd dL = (assemble_L(model, fd, zhat, wp, box, opt).M - assemble_L(model, fd, zhat, wm, box, opt).M) / (2.0 * h);
        const Eigen::MatrixXd dInv = -Linv * dL * Linv;
        rep.norm = std::max(rep.norm, spectral_norm(dInv));
        for (std::size_t c = 0; c < L.cols.size(); ++c)
            for (std::size_t r = 0; r < L.rows.size(); ++r) {
                int d = 0;
                for (int q = 0; q < m; ++q) d += std::abs(L.rows.coords(r)[q] - L.cols.coords(c)[q]);
                if (d < dmin) continue;
                const double a = std::abs(dInv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
                if (a == 0.0) continue;
                rep.worst_margin = std::max(rep.worst_margin, std::log(a) + 0.25 * std::pow(static_cast<double>(d), s));
            }
    }
    rep.localization_ok = rep.worst_margin <= 0.0;
    return rep;
}

}  // namespace qpt
