#pragma once

// Small-divisor tests on the tangent frequency and Monte Carlo estimates of
// the excluded measure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpt/lattice.hpp"
#include "qpt/model.hpp"

namespace qpt {

struct ResonanceConfig {
    double tau = 2.0;
    double gamma = 0.05;
    int M = 10;

    void validate(int m) const {
        if (!(tau > m - 1)) throw ConfigError("resonance: tau must exceed m - 1");
        if (!(gamma > 0.0)) throw ConfigError("resonance: gamma must be positive");
        if (M < 1) throw ConfigError("resonance: M must be positive");
    }
};

enum class ResonantSet { none, tangent, melnikov1, melnikov2 };

inline const char* to_string(ResonantSet s) {
    switch (s) {
        case ResonantSet::tangent: return "tangent";
        case ResonantSet::melnikov1: return "melnikov1";
        case ResonantSet::melnikov2: return "melnikov2";
        default: return "none";
    }
}

struct ResonanceOffender {
    ResonantSet set = ResonantSet::none;
    MultiIndex k;
    int j1 = -1;  // normal mode indices as positions in ω_N
    int j2 = -1;
    double margin = std::numeric_limits<double>::infinity();  // |value|·denominator/γ − 1
};

struct ResonanceReport {
    bool admissible = true;
    ResonanceOffender worst;
};

namespace detail {
inline void consider(ResonanceReport& rep, ResonantSet set, const MultiIndex& k, int j1, int j2, double value, double denom,
                     double gamma) {
    const double margin = std::abs(value) * denom / gamma - 1.0;
    if (margin < rep.worst.margin) rep.worst = {set, k, j1, j2, margin};
    if (margin < 0.0) rep.admissible = false;
}
}  // namespace detail

/// Flags ω_T when |⟨k,ω_T⟩| < γ/|k|₁^τ for some 0 ≠ k ∈ Λ_{2M}.
inline ResonanceReport tangent_resonant(const std::vector<double>& omega_T, const ResonanceConfig& cfg) {
    const int m = static_cast<int>(omega_T.size());
    cfg.validate(m);
    ResonanceReport rep;
    const Box box = Box::centered(m, 2 * cfg.M);
    for (std::size_t i = 0; i < box.size(); ++i) {
        const MultiIndex k = box.at(i);
        if (k.is_zero()) continue;
        detail::consider(rep, ResonantSet::tangent, k, -1, -1, k.dot(omega_T), std::pow(k.l1(), cfg.tau), cfg.gamma);
    }
    return rep;
}

/// Flags ω_T when |⟨k,ω_T⟩ − ω_j| < γ/(|k|₁+1)^τ for some k ∈ Λ_{2M} and normal j.
inline ResonanceReport melnikov1(const std::vector<double>& omega_T, const std::vector<double>& omega_N, const ResonanceConfig& cfg) {
    const int m = static_cast<int>(omega_T.size());
    cfg.validate(m);
    ResonanceReport rep;
    const Box box = Box::centered(m, 2 * cfg.M);
    for (std::size_t i = 0; i < box.size(); ++i) {
        const MultiIndex k = box.at(i);
        const double kw = k.dot(omega_T);
        const double denom = std::pow(k.l1() + 1.0, cfg.tau);
        for (std::size_t j = 0; j < omega_N.size(); ++j)
            detail::consider(rep, ResonantSet::melnikov1, k, static_cast<int>(j), -1, kw - omega_N[j], denom, cfg.gamma);
    }
    return rep;
}

/// Flags ω_T when |⟨k,ω_T⟩ − ω_{j1} + ω_{j2}| < γ/(|k|₁+2)^τ for distinct normal j1, j2.
inline ResonanceReport melnikov2(const std::vector<double>& omega_T, const std::vector<double>& omega_N, const ResonanceConfig& cfg) {
    const int m = static_cast<int>(omega_T.size());
    cfg.validate(m);
    ResonanceReport rep;
    if (omega_N.size() < 2) return rep;
    const Box box = Box::centered(m, 2 * cfg.M);
    for (std::size_t i = 0; i < box.size(); ++i) {
        const MultiIndex k = box.at(i);
        const double kw = k.dot(omega_T);
        const double denom = std::pow(k.l1() + 2.0, cfg.tau);
        for (std::size_t a = 0; a < omega_N.size(); ++a)
            for (std::size_t b = 0; b < omega_N.size(); ++b) {
                if (a == b) continue;
                detail::consider(rep, ResonantSet::melnikov2, k, static_cast<int>(a), static_cast<int>(b), kw - omega_N[a] + omega_N[b],
                                 denom, cfg.gamma);
            }
    }
    return rep;
}

inline ResonanceReport combine(const std::vector<ResonanceReport>& parts) {
    ResonanceReport rep;
    for (const auto& p : parts) {
        rep.admissible = rep.admissible && p.admissible;
        if (p.worst.margin < rep.worst.margin) rep.worst = p.worst;
    }
    return rep;
}

inline ResonanceReport admissible(const std::vector<double>& omega_T, const std::vector<double>& omega_N, const ResonanceConfig& cfg) {
    return combine({tangent_resonant(omega_T, cfg), melnikov1(omega_T, omega_N, cfg), melnikov2(omega_T, omega_N, cfg)});
}

inline ResonanceReport admissible(const ModelSpec& model, const ResonanceConfig& cfg) {
    return admissible(model.omega_T(), model.omega_N(), cfg);
}

struct MeasureEstimate {
    double fraction = 0.0;
    double ci95 = 0.0;
    long samples = 0;
    long failures = 0;
};

using NormalProvider = std::function<std::vector<double>(const std::vector<double>&)>;

/// Share of uniform samples of ω_T in [lo, hi] that fail the admissibility test.
/// Sample i draws from its own generator seeded by (seed, i).
inline MeasureEstimate measure_estimate(const std::vector<double>& lo, const std::vector<double>& hi, const NormalProvider& omega_N,
                                        const ResonanceConfig& cfg, long samples, std::uint64_t seed) {
    if (lo.size() != hi.size() || lo.empty()) throw ConfigError("measure: domain bounds must match and be nonempty");
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(hi[i] > lo[i])) throw ConfigError("measure: empty domain");
    if (samples < 1000) throw ConfigError("measure: need at least 1000 samples");
    MeasureEstimate est;
    est.samples = samples;
    std::vector<double> w(lo.size());
    for (long s = 0; s < samples; ++s) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(s),
                          static_cast<std::uint32_t>(static_cast<std::uint64_t>(s) >> 32)};
        std::mt19937_64 gen(seq);
        for (std::size_t i = 0; i < lo.size(); ++i) w[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(gen);
        if (!admissible(w, omega_N(w), cfg).admissible) ++est.failures;
    }
    est.fraction = static_cast<double>(est.failures) / static_cast<double>(samples);
    est.ci95 = 1.96 * std::sqrt(est.fraction * (1.0 - est.fraction) / static_cast<double>(samples));
    return est;
}

namespace detail {
// Length of {x ∈ [lo, hi] : |k x − c| < h} for scalar k ≠ 0.
inline double strip_length_1d(int k, double c, double h, double lo, double hi) {
    double a = (c - h) / k, b = (c + h) / k;
    if (a > b) std::swap(a, b);
    return std::max(0.0, std::min(b, hi) - std::max(a, lo));
}
}  // namespace detail

/// Union bound on the excluded fraction of the box [lo, hi] for fixed ω_N:
/// each condition excludes a slab {|⟨k,ω⟩ − c| < h} of width 2h/‖k‖₂, whose volume
/// inside the box is computed exactly for m = 1 and bounded by width·diam^{m−1} otherwise.
inline double analytic_measure_bound(const std::vector<double>& lo, const std::vector<double>& hi, const std::vector<double>& omega_N,
                                     const ResonanceConfig& cfg) {
    const int m = static_cast<int>(lo.size());
    cfg.validate(m);
    double vol = 1.0, diam2 = 0.0;
    for (int i = 0; i < m; ++i) {
        vol *= hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
        diam2 += std::pow(hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)], 2);
    }
    const double cross = std::pow(std::sqrt(diam2), m - 1);
    auto slab = [&](const MultiIndex& k, double c, double h) {
        if (k.is_zero()) return std::abs(c) < h ? vol : 0.0;
        if (m == 1) return detail::strip_length_1d(k[0], c, h, lo[0], hi[0]);
        double kn = 0.0;
        for (int i = 0; i < m; ++i) kn += static_cast<double>(k[i]) * k[i];
        return std::min(vol, 2.0 * h / std::sqrt(kn) * cross);
    };
    double total = 0.0;
    const Box box = Box::centered(m, 2 * cfg.M);
    for (std::size_t i = 0; i < box.size(); ++i) {
        const MultiIndex k = box.at(i);
        const double l1 = k.l1();
        if (!k.is_zero()) total += slab(k, 0.0, cfg.gamma / std::pow(l1, cfg.tau));
        for (double wn : omega_N) total += slab(k, wn, cfg.gamma / std::pow(l1 + 1.0, cfg.tau));
        for (std::size_t a = 0; a < omega_N.size(); ++a)
            for (std::size_t b = 0; b < omega_N.size(); ++b)
                if (a != b) total += slab(k, omega_N[a] - omega_N[b], cfg.gamma / std::pow(l1 + 2.0, cfg.tau));
    }
    return total / vol;
}

}  // namespace qpt
