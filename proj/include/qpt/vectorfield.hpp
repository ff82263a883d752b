#pragma once

// Fourier-space vector field X̂ = (∂H₁/∂z̄)^, the residual F, the exact
// Jacobian S, the frequency gradient ∂X̂_q/∂ẑ_p and the operators B and L.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qpt/lattice.hpp"
#include "qpt/model.hpp"
#include "qpt/polynomial.hpp"

namespace qpt {

enum class BVariant { literal, chain_rule };

inline const char* to_string(BVariant v) { return v == BVariant::literal ? "literal" : "chain_rule"; }
inline BVariant parse_b_variant(const std::string& s) {
    if (s == "literal") return BVariant::literal;
    if (s == "chain_rule" || s == "chain-rule") return BVariant::chain_rule;
    throw ConfigError("unknown B variant '" + s + "' (expected literal or chain_rule)");
}

/// The resonant sites (j_i, e_i).
inline std::vector<SiteIndex> resonant_sites(const ModelSpec& model) {
    std::vector<SiteIndex> out;
    const int m = model.m();
    for (int i = 0; i < m; ++i) out.push_back({model.tangent_mode(i), MultiIndex::unit(m, i)});
    return out;
}

inline bool is_resonant(const ModelSpec& model, int mode, const MultiIndex& k) {
    const int m = model.m();
    for (int i = 0; i < m; ++i) {
        if (mode != model.tangent_mode(i)) continue;
        bool unit = true;
        for (int d = 0; d < m; ++d) unit = unit && k[d] == (d == i ? 1 : 0);
        if (unit) return true;
    }
    return false;
}

/// zp with the pins ẑ_{j_i}(e_i) = a_i written in (radius raised to 1 if needed).
inline FourierVector with_pins(const ModelSpec& model, const FourierVector& zp) {
    FourierVector full = zp.radius() >= 1 ? zp : zp.resized(1);
    const auto sites = resonant_sites(model);
    for (std::size_t i = 0; i < sites.size(); ++i) full.set(sites[i].mode, sites[i].index, model.amplitudes[i]);
    return full;
}

/// zhat with resonant sites zeroed.
inline FourierVector without_pins(const ModelSpec& model, const FourierVector& zhat) {
    FourierVector zp = zhat;
    for (const auto& s : resonant_sites(model))
        if (zp.support().contains(s.index)) zp.set(s.mode, s.index, 0.0);
    return zp;
}

inline FourierVector zero_state(const ModelSpec& model, int radius) {
    return FourierVector(model.n, model.m(), radius);
}

/// Derivatives of H₁ needed by the scheme, computed once per model.
struct ModelDerivatives {
    std::vector<Polynomial> X;                  // ∂H₁/∂z̄_j
    std::vector<std::vector<Polynomial>> G;     // ∂²H₁/∂z̄_j∂z_{j'}
    std::vector<std::vector<Polynomial>> Gbar;  // ∂²H₁/∂z̄_j∂z̄_{j'}

    explicit ModelDerivatives(const ModelSpec& model) {
        for (int j = 0; j < model.n; ++j) {
            X.push_back(model.H1.differentiate_zbar(j));
            G.emplace_back();
            Gbar.emplace_back();
            for (int jp = 0; jp < model.n; ++jp) {
                G.back().push_back(X.back().differentiate_z(jp));
                Gbar.back().push_back(X.back().differentiate_zbar(jp));
            }
        }
    }
};

/// Series of X̂ and of the second-derivative kernels at a fixed state.
struct FieldData {
    FourierVector X;
    std::vector<std::vector<LatticeSeries>> G;
    std::vector<std::vector<LatticeSeries>> Gbar;
};

inline FourierVector collect_modes(const std::vector<LatticeSeries>& parts, int dim) {
    int r = 0;
    for (const auto& s : parts) r = std::max(r, s.radius());
    FourierVector out(static_cast<int>(parts.size()), dim, r);
    for (std::size_t j = 0; j < parts.size(); ++j) out.mode(static_cast<int>(j)) = parts[j].resized(r);
    return out;
}

inline FieldData field_data(const ModelSpec& model, const FourierVector& zhat, bool kernels = true) {
    const ModelDerivatives der(model);
    SeriesEvaluator ev(zhat);
    FieldData fd;
    std::vector<LatticeSeries> xs;
    for (const auto& p : der.X) xs.push_back(ev.evaluate(p));
    fd.X = collect_modes(xs, zhat.dim());
    if (kernels) {
        for (int j = 0; j < model.n; ++j) {
            fd.G.emplace_back();
            fd.Gbar.emplace_back();
            for (int jp = 0; jp < model.n; ++jp) {
                fd.G.back().push_back(ev.evaluate(der.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)]));
                fd.Gbar.back().push_back(ev.evaluate(der.Gbar[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)]));
            }
        }
    }
    return fd;
}

/// X̂ at the full state zhat; out_radius < 0 keeps the whole support.
inline FourierVector eval_X(const ModelSpec& model, const FourierVector& zhat, int out_radius = -1) {
    if (zhat.modes() != model.n) throw std::invalid_argument("eval_X: mode count mismatch");
    FourierVector X = field_data(model, zhat, false).X;
    return out_radius < 0 ? X : X.resized(out_radius);
}

/// (X̂_{j_1}(e_1), …, X̂_{j_m}(e_m)) and X with those entries zeroed.
inline std::pair<std::vector<double>, FourierVector> split_qp(const FourierVector& X, const ModelSpec& model) {
    std::vector<double> xq;
    for (const auto& s : resonant_sites(model)) xq.push_back(X.at(s.mode, s.index));
    return {xq, without_pins(model, X)};
}

/// F(j,k) = (−⟨k,ω'⟩ + ω_j)ẑ_j(k) + εX̂_j(k) on non-resonant sites, 0 on resonant ones.
/// zp must vanish on resonant sites; the pins are inserted here.
inline FourierVector eval_F(const ModelSpec& model, const FourierVector& zp, const std::vector<double>& omega_prime,
                            const FourierVector* X_precomputed = nullptr) {
    if (static_cast<int>(omega_prime.size()) != model.m()) throw std::invalid_argument("eval_F: frequency length mismatch");
    const FourierVector full = with_pins(model, zp);
    FourierVector F = X_precomputed ? *X_precomputed : eval_X(model, full);
    F *= model.epsilon;
    if (F.radius() < full.radius()) F = F.resized(full.radius());
    const Box sup = full.support();
    for (int j = 0; j < model.n; ++j) {
        const double wj = model.omega[static_cast<std::size_t>(j)];
        for (std::size_t i = 0; i < sup.size(); ++i) {
            const double z = full.mode(j).values()[i];
            if (z == 0.0) continue;
            const MultiIndex k = sup.at(i);
            F.mode(j).ref(k) += (-k.dot(omega_prime) + wj) * z;
        }
    }
    for (const auto& s : resonant_sites(model)) F.set(s.mode, s.index, 0.0);
    return F;
}

/// Row/column index set: all (j, k) with k in the box, mode-major then
/// lexicographic, optionally skipping the resonant sites.
class SiteLayout {
public:
    SiteLayout() = default;
    SiteLayout(const ModelSpec& model, Box box, bool exclude_resonant = true) : n_(model.n), box_(std::move(box)) {
        const std::size_t per = box_.size();
        pos_.assign(static_cast<std::size_t>(n_) * per, -1);
        const int m = box_.dim();
        for (int j = 0; j < n_; ++j)
            for (std::size_t i = 0; i < per; ++i) {
                MultiIndex k = box_.at(i);
                if (exclude_resonant && is_resonant(model, j, k)) {
                    excluded_.push_back({j, k});
                    continue;
                }
                pos_[static_cast<std::size_t>(j) * per + i] = static_cast<std::ptrdiff_t>(modes_.size());
                modes_.push_back(j);
                for (int d = 0; d < m; ++d) coords_.push_back(k[d]);
            }
    }

    const Box& box() const { return box_; }
    int dim() const { return box_.dim(); }
    std::size_t size() const { return modes_.size(); }
    const std::vector<SiteIndex>& excluded() const { return excluded_; }

    int mode(std::size_t r) const { return modes_[r]; }
    const int* coords(std::size_t r) const { return coords_.data() + r * static_cast<std::size_t>(dim()); }
    MultiIndex index(std::size_t r) const {
        const int* c = coords(r);
        return MultiIndex(std::vector<int>(c, c + dim()));
    }
    SiteIndex site(std::size_t r) const { return {mode(r), index(r)}; }

    std::optional<std::size_t> position(int j, const MultiIndex& k) const {
        if (j < 0 || j >= n_ || !box_.contains(k)) return std::nullopt;
        const std::ptrdiff_t p = pos_[static_cast<std::size_t>(j) * box_.size() + box_.index_of(k)];
        if (p < 0) return std::nullopt;
        return static_cast<std::size_t>(p);
    }

private:
    int n_ = 0;
    Box box_;
    std::vector<int> modes_;
    std::vector<int> coords_;
    std::vector<std::ptrdiff_t> pos_;
    std::vector<SiteIndex> excluded_;
};

struct LatticeOperator {
    SiteLayout rows;
    SiteLayout cols;
    Eigen::MatrixXd M;
};

namespace detail {
// Value of a centered series at (sign_a·a + sign_b·b) for small integer arrays.
inline double series_at(const LatticeSeries& s, const int* a, int sign_a, const int* b, int sign_b, int m) {
    const int R = s.radius();
    const int side = 2 * R + 1;
    std::size_t idx = 0;
    for (int d = 0; d < m; ++d) {
        const int v = sign_a * a[d] + sign_b * b[d];
        if (v > R || v < -R) return 0.0;
        idx = idx * static_cast<std::size_t>(side) + static_cast<std::size_t>(v + R);
    }
    return s.values()[idx];
}
}  // namespace detail

/// Entries of ∂X̂_j(k)/∂ẑ_{j'}(k') = Ĝ_{jj'}(k − k') + Ĝbar_{jj'}(k + k') for all row/column pairs.
inline Eigen::MatrixXd kernel_block(const FieldData& fd, const SiteLayout& rows, const SiteLayout& cols) {
    const int m = rows.dim();
    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const int jp = cols.mode(c);
        const int* kc = cols.coords(c);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const int j = rows.mode(r);
            const int* kr = rows.coords(r);
            const auto& G = fd.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)];
            const auto& Gb = fd.Gbar[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)];
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                detail::series_at(G, kr, 1, kc, -1, m) + detail::series_at(Gb, kr, 1, kc, 1, m);
        }
    }
    return M;
}

/// S = ∂X̂_p/∂ẑ_p restricted to the box.
inline LatticeOperator jacobian_S(const ModelSpec& model, const FourierVector& zhat, const Box& box,
                                  bool exclude_resonant = true) {
    const FieldData fd = field_data(model, zhat);
    LatticeOperator op{SiteLayout(model, box, exclude_resonant), SiteLayout(model, box, exclude_resonant), {}};
    op.M = kernel_block(fd, op.rows, op.cols);
    return op;
}

/// Rows ∂X̂_{j_i}(e_i)/∂ẑ_{j'}(k') for i < m over the columns of a layout.
inline Eigen::MatrixXd grad_Xq_block(const ModelSpec& model, const FieldData& fd, const SiteLayout& cols) {
    const int m = model.m();
    Eigen::MatrixXd M(m, static_cast<Eigen::Index>(cols.size()));
    std::vector<int> e(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        std::fill(e.begin(), e.end(), 0);
        e[static_cast<std::size_t>(i)] = 1;
        const int j = model.tangent_mode(i);
        for (std::size_t c = 0; c < cols.size(); ++c) {
            const int jp = cols.mode(c);
            const int* kc = cols.coords(c);
            M(i, static_cast<Eigen::Index>(c)) =
                detail::series_at(fd.G[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)], e.data(), 1, kc, -1, m) +
                detail::series_at(fd.Gbar[static_cast<std::size_t>(j)][static_cast<std::size_t>(jp)], e.data(), 1, kc, 1, m);
        }
    }
    return M;
}

/// ∂X̂_q/∂ẑ_p: m rows, one column per non-resonant site of the box.
inline LatticeOperator grad_Xq(const ModelSpec& model, const FourierVector& zhat, const Box& box) {
    const FieldData fd = field_data(model, zhat);
    LatticeOperator op;
    op.cols = SiteLayout(model, box, true);
    op.M = grad_Xq_block(model, fd, op.cols);
    return op;
}

/// Weights w_i in B((j,k),·) = −ẑ_j(k) Σ_i w_i k_i ∂X̂_{j_i}(e_i)/∂ẑ_p.
inline std::vector<double> b_weights(const ModelSpec& model, BVariant variant) {
    std::vector<double> w;
    for (double a : model.amplitudes) w.push_back(variant == BVariant::literal ? 1.0 / std::numbers::e : 1.0 / a);
    return w;
}

inline Eigen::MatrixXd b_block(const ModelSpec& model, const FieldData& fd, const FourierVector& zhat,
                               const SiteLayout& rows, const SiteLayout& cols, BVariant variant) {
    const int m = model.m();
    const Eigen::MatrixXd grad = grad_Xq_block(model, fd, cols);
    const auto w = b_weights(model, variant);
    // B = u·Vᵀ with u_{(j,k), i} = −ẑ_j(k) w_i k_i.
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), m);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const MultiIndex k = rows.index(r);
        const double z = zhat.at(rows.mode(r), k);
        if (z == 0.0) continue;
        for (int i = 0; i < m; ++i) u(static_cast<Eigen::Index>(r), i) = -z * w[static_cast<std::size_t>(i)] * k[i];
    }
    return u * grad;
}

inline LatticeOperator assemble_B(const ModelSpec& model, const FourierVector& zhat, const Box& box, BVariant variant) {
    const FieldData fd = field_data(model, zhat);
    LatticeOperator op{SiteLayout(model, box, true), SiteLayout(model, box, true), {}};
    op.M = b_block(model, fd, zhat, op.rows, op.cols, variant);
    return op;
}

/// Diagonal D((j,k)) = −⟨k,ω'⟩ + ω_j over a layout.
inline Eigen::VectorXd diagonal_D(const ModelSpec& model, const SiteLayout& layout, const std::vector<double>& omega_prime) {
    Eigen::VectorXd d(static_cast<Eigen::Index>(layout.size()));
    const int m = layout.dim();
    for (std::size_t r = 0; r < layout.size(); ++r) {
        const int* k = layout.coords(r);
        double s = 0.0;
        for (int i = 0; i < m; ++i) s += k[i] * omega_prime[static_cast<std::size_t>(i)];
        d(static_cast<Eigen::Index>(r)) = -s + model.omega[static_cast<std::size_t>(layout.mode(r))];
    }
    return d;
}

struct AssembleOptions {
    BVariant b_variant = BVariant::chain_rule;
    bool include_B = true;
    bool exclude_resonant = true;
};

/// L = D + ε(S + B) on the box, from precomputed field data.
inline LatticeOperator assemble_L(const ModelSpec& model, const FieldData& fd, const FourierVector& zhat,
                                  const std::vector<double>& omega_prime, const Box& box, const AssembleOptions& opt = {}) {
    if (static_cast<int>(omega_prime.size()) != model.m()) throw std::invalid_argument("assemble_L: frequency length mismatch");
    LatticeOperator op{SiteLayout(model, box, opt.exclude_resonant), {}, {}};
    op.cols = op.rows;
    if (model.epsilon != 0.0) {
        op.M = kernel_block(fd, op.rows, op.cols);
        if (opt.include_B) op.M += b_block(model, fd, zhat, op.rows, op.cols, opt.b_variant);
        op.M *= model.epsilon;
    } else {
        op.M = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(op.rows.size()), static_cast<Eigen::Index>(op.cols.size()));
    }
    op.M.diagonal() += diagonal_D(model, op.rows, omega_prime);
    return op;
}

inline LatticeOperator assemble_L(const ModelSpec& model, const FourierVector& zhat, const std::vector<double>& omega_prime,
                                  const Box& box, const AssembleOptions& opt = {}) {
    return assemble_L(model, field_data(model, zhat), zhat, omega_prime, box, opt);
}

/// Pack a Fourier vector into a layout's ordering (zero outside its support).
inline Eigen::VectorXd gather(const FourierVector& v, const SiteLayout& layout) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t r = 0; r < layout.size(); ++r) x(static_cast<Eigen::Index>(r)) = v.at(layout.mode(r), layout.index(r));
    return x;
}

/// Unpack a layout-ordered vector into a Fourier vector of the given radius.
inline FourierVector scatter(const Eigen::VectorXd& x, const SiteLayout& layout, int modes, int radius) {
    FourierVector v(modes, layout.dim(), radius);
    for (std::size_t r = 0; r < layout.size(); ++r) v.set(layout.mode(r), layout.index(r), x(static_cast<Eigen::Index>(r)));
    return v;
}

}  // namespace qpt
