#pragma once

// Multi-scale diagnostics: restrictions to translated boxes, one-level
// resolvent gluing, singular-site scans, Schur complements and eigenvalue
// shifts of restricted tangent operators.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpt/lattice.hpp"
#include "qpt/model.hpp"
#include "qpt/solver.hpp"
#include "qpt/vectorfield.hpp"

namespace qpt {

struct OuterRestriction {
    LatticeOperator L;
    bool near_origin = false;  // k0 ∈ Λ_{2N}
};

/// L = D + ε(S + B) on k0 + Λ_N.
inline OuterRestriction restrict_outer(const ModelSpec& model, const FourierVector& zhat, const std::vector<double>& omega_prime,
                                       const MultiIndex& k0, int N, const AssembleOptions& opt = {}) {
    OuterRestriction out;
    out.near_origin = k0.linf() <= 2 * N;
    out.L = assemble_L(model, zhat, omega_prime, Box(k0, N), opt);
    return out;
}

struct GlueConfig {
    int K = 2;
    int center_factor = 10;
    int inner_factor = 9;

    static GlueConfig for_radius(int N) {
        GlueConfig c;
        c.K = std::max(2, static_cast<int>(std::lround(std::pow(static_cast<double>(N), 0.1))));
        return c;
    }
};

struct GlueResult {
    Eigen::MatrixXd inverse;  // (E + εΦ)⁻¹Ψ
    Eigen::MatrixXd psi;
    Eigen::MatrixXd phi;      // Φ, so that the coupling term is εΦ
    Eigen::MatrixXd eps_phi;  // εΦ
    double residual = 0.0;    // ‖X·L_N − E‖_max
    double seconds = 0.0;
    SiteLayout layout;
};

namespace detail {
// Local box of row index k: Λ_{10K} for k ∈ Λ_{9K}, otherwise k + Λ_K.
inline Box local_box(const MultiIndex& k, int K, const GlueConfig& cfg) {
    if (k.linf() <= cfg.inner_factor * K) return Box::centered(k.dim(), cfg.center_factor * K);
    return Box(k, K);
}
}  // namespace detail

/// Reconstruct L_N⁻¹ from local inverses through L_N⁻¹ = (E + εΦ)⁻¹Ψ, where the
/// row (j,k) of Ψ is the (j,k) row of the local inverse on its box B_k and the
/// row of εΦ is that local inverse applied to the coupling block L_{B_k, Λ_N∖B_k}.
inline GlueResult glue_inverse(const LatticeOperator& L, const GlueConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const SiteLayout& lay = L.rows;
    const int N = lay.box().radius;
    if (cfg.K < 1) throw ConfigError("glue: K must be positive");
    if (cfg.center_factor * cfg.K > N) throw ConfigError("glue: center box radius must not exceed N");
    const auto n = static_cast<Eigen::Index>(lay.size());
    GlueResult g;
    g.layout = lay;
    g.psi = Eigen::MatrixXd::Zero(n, n);
    g.eps_phi = Eigen::MatrixXd::Zero(n, n);

    // Group rows by local box so each local factorization is done once.
    std::map<std::pair<std::vector<int>, int>, std::vector<Eigen::Index>> groups;
    for (Eigen::Index r = 0; r < n; ++r) {
        const Box b = detail::local_box(lay.index(static_cast<std::size_t>(r)), cfg.K, cfg);
        groups[{b.center.components(), b.radius}].push_back(r);
    }
    for (const auto& [key, rows] : groups) {
        const Box b(MultiIndex(key.first), key.second);
        std::vector<Eigen::Index> in, out;
        for (Eigen::Index c = 0; c < n; ++c) (b.contains(lay.index(static_cast<std::size_t>(c))) ? in : out).push_back(c);
        const auto ni = static_cast<Eigen::Index>(in.size());
        Eigen::MatrixXd Lbb(ni, ni);
        for (Eigen::Index a = 0; a < ni; ++a)
            for (Eigen::Index c = 0; c < ni; ++c) Lbb(a, c) = L.M(in[static_cast<std::size_t>(a)], in[static_cast<std::size_t>(c)]);
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(Lbb);
        if (!(lu.rcond() > 1e-14)) throw SingularOperatorError("glue: local operator is numerically singular");
        const Eigen::MatrixXd local_inv = lu.inverse();
        Eigen::MatrixXd Lbo(ni, static_cast<Eigen::Index>(out.size()));
        for (Eigen::Index a = 0; a < ni; ++a)
            for (std::size_t c = 0; c < out.size(); ++c) Lbo(a, static_cast<Eigen::Index>(c)) = L.M(in[static_cast<std::size_t>(a)], out[c]);
        const Eigen::MatrixXd coupling = local_inv * Lbo;
        for (Eigen::Index r : rows) {
            const auto pos = static_cast<Eigen::Index>(std::find(in.begin(), in.end(), r) - in.begin());
            for (Eigen::Index c = 0; c < ni; ++c) g.psi(r, in[static_cast<std::size_t>(c)]) = local_inv(pos, c);
            for (std::size_t c = 0; c < out.size(); ++c) g.eps_phi(r, out[c]) = coupling(pos, static_cast<Eigen::Index>(c));
        }
    }
    const Eigen::MatrixXd EpP = Eigen::MatrixXd::Identity(n, n) + g.eps_phi;
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(EpP);
    if (!(lu.rcond() > 1e-14)) throw SingularOperatorError("glue: E + εΦ is numerically singular");
    g.inverse = lu.solve(g.psi);
    g.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    g.residual = (g.inverse * L.M - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    return g;
}

inline GlueResult glue_inverse(const ModelSpec& model, const FourierVector& zhat, const std::vector<double>& omega_prime, int N,
                               const GlueConfig& cfg, const AssembleOptions& opt = {}) {
    GlueResult g = glue_inverse(assemble_L(model, zhat, omega_prime, Box::centered(model.m(), N), opt), cfg);
    g.phi = model.epsilon > 0.0 ? Eigen::MatrixXd(g.eps_phi / model.epsilon) : Eigen::MatrixXd::Zero(g.eps_phi.rows(), g.eps_phi.cols());
    return g;
}

/// Tangent operator T = D + εS on an arbitrary box.
inline LatticeOperator assemble_T(const ModelSpec& model, const FieldData& fd, const FourierVector& zhat,
                                  const std::vector<double>& omega_prime, const Box& box, bool exclude_resonant) {
    AssembleOptions opt;
    opt.include_B = false;
    opt.exclude_resonant = exclude_resonant;
    return assemble_L(model, fd, zhat, omega_prime, box, opt);
}

inline double smallest_singular_value(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return std::numeric_limits<double>::infinity();
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

struct SingularScan {
    int N = 0;
    int N_prime = 0;
    double N_prime_exact = 0.0;
    double threshold = 0.0;      // practical θ
    double threshold_log = 0.0;  // log(1/ε_{N'}), theoretical
    std::vector<MultiIndex> sites;
    std::vector<double> sigma_min;  // at each scanned center, in scan order
    std::vector<MultiIndex> centers;
    bool clustered = true;
};

/// Centers k on the stride-N' grid of Λ_N whose T_{k,N'} has smallest singular value
/// below θ = theta_factor·min|D| over the non-resonant sites of Λ_N. With
/// exclude_resonant = false the resonant sites stay in T.
inline SingularScan singular_scan(const ModelSpec& model, const FourierVector& zhat, const std::vector<double>& omega_prime, int N,
                                  int N_prime = 0, double theta_factor = 1e-3, bool exclude_resonant = true) {
    if (N < 2) throw ConfigError("singular_scan: N must be at least 2");
    SingularScan sc;
    sc.N = N;
    sc.N_prime_exact = std::exp(std::pow(std::log(static_cast<double>(N)), 0.1));
    sc.N_prime = N_prime > 0 ? N_prime : std::max(1, static_cast<int>(std::lround(sc.N_prime_exact)));
    if (sc.N_prime >= N) throw ConfigError("singular_scan: N' must be below N");
    sc.threshold_log = std::pow(std::log(std::max(2.0, static_cast<double>(sc.N_prime))), 15.0);
    const SiteLayout big(model, Box::centered(model.m(), N), true);
    sc.threshold = theta_factor * diagonal_D(model, big, omega_prime).cwiseAbs().minCoeff();
    const FieldData fd = field_data(model, zhat);
    const int m = model.m();
    const Box grid = Box::centered(m, N / sc.N_prime);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        MultiIndex k = grid.at(i);
        for (int d = 0; d < m; ++d) k[d] *= sc.N_prime;
        const LatticeOperator T = assemble_T(model, fd, zhat, omega_prime, Box(k, sc.N_prime), exclude_resonant);
        const double smin = smallest_singular_value(T.M);
        sc.centers.push_back(k);
        sc.sigma_min.push_back(smin);
        if (smin < sc.threshold) sc.sites.push_back(k);
    }
    for (std::size_t a = 0; a < sc.sites.size(); ++a)
        for (std::size_t b = a + 1; b < sc.sites.size(); ++b)
            if ((sc.sites[a] - sc.sites[b]).linf() > 4 * sc.N_prime) sc.clustered = false;
    return sc;
}

struct SchurResult {
    Eigen::MatrixXd U;
    double norm_inverse = 0.0;    // ‖L⁻¹‖₂
    double norm_A_inverse = 0.0;  // ‖L_{Γ∖Π}⁻¹‖₂
    double norm_U_inverse = 0.0;
    double norm_coupling = 0.0;   // ‖L_{Π,Γ∖Π}‖₂
    double bound = 0.0;           // 4‖A⁻¹‖²‖U⁻¹‖ + ‖A⁻¹‖
    bool bound_holds = false;
    bool hypotheses_hold = false;  // coupling norm ≤ 1 and ‖A⁻¹‖ ≥ 1
};

/// U = L_ΠΠ − L_{Π,Γ∖Π} L_{Γ∖Π}⁻¹ L_{Γ∖Π,Π} and the inverse-norm chain.
inline SchurResult schur_reduce(const LatticeOperator& L, const std::vector<SiteIndex>& pi_sites) {
    const SiteLayout& lay = L.rows;
    std::vector<char> in_pi(lay.size(), 0);
    for (const auto& s : pi_sites) {
        const auto p = lay.position(s.mode, s.index);
        if (!p) throw ConfigError("schur: site " + s.index.str() + " is not an unknown of the box");
        in_pi[*p] = 1;
    }
    std::vector<Eigen::Index> P, Q;
    for (std::size_t i = 0; i < lay.size(); ++i) (in_pi[i] ? P : Q).push_back(static_cast<Eigen::Index>(i));
    if (P.empty()) throw ConfigError("schur: Π must be nonempty");
    if (Q.empty()) throw ConfigError("schur: Π must not cover the whole box");
    auto block = [&](const std::vector<Eigen::Index>& R, const std::vector<Eigen::Index>& C) {
        Eigen::MatrixXd B(static_cast<Eigen::Index>(R.size()), static_cast<Eigen::Index>(C.size()));
        for (std::size_t a = 0; a < R.size(); ++a)
            for (std::size_t b = 0; b < C.size(); ++b) B(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = L.M(R[a], C[b]);
        return B;
    };
    const Eigen::MatrixXd A = block(Q, Q);
    const Eigen::MatrixXd Pq = block(P, Q);
    const Eigen::MatrixXd Qp = block(Q, P);
    const Eigen::PartialPivLU<Eigen::MatrixXd> luA(A);
    SchurResult res;
    res.U = block(P, P) - Pq * luA.solve(Qp);
    auto opnorm = [](const Eigen::MatrixXd& M) { return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0); };
    res.norm_inverse = opnorm(Eigen::MatrixXd(L.M.inverse()));
    res.norm_A_inverse = opnorm(Eigen::MatrixXd(luA.inverse()));
    res.norm_U_inverse = opnorm(Eigen::MatrixXd(res.U.inverse()));
    res.norm_coupling = std::max(opnorm(Pq), opnorm(Qp));
    res.bound = 4.0 * res.norm_A_inverse * res.norm_A_inverse * res.norm_U_inverse + res.norm_A_inverse;
    res.bound_holds = res.norm_inverse <= res.bound * (1.0 + 1e-12);
    res.hypotheses_hold = res.norm_coupling <= 1.0 && res.norm_A_inverse >= 1.0;
    return res;
}

struct EigenShift {
    MultiIndex k0;
    int N = 0;
    SiteIndex site;       // diagonal entry the eigenvalue was matched to
    double diagonal = 0.0;
    double eigenvalue = 0.0;
    double mu = 0.0;
    bool ambiguous = false;
};

struct EigenShiftReport {
    std::vector<EigenShift> shifts;
    double max_abs_mu = 0.0;
    double bound_S = 0.0;   // max over boxes of ε‖S‖₂ (Weyl bound for T = D + εS)
    double bound_SB = 0.0;  // max over boxes of ε‖S + B‖₂
    bool bound_holds = true;
    int ambiguous_count = 0;
};

/// Eigenvalues of the symmetric T = D + εS on each box, matched greedily
/// (closest pair first) to the diagonal entries −⟨k,ω'⟩ + ω_j; μ = λ − diagonal.
inline EigenShiftReport eigen_shift_report(const ModelSpec& model, const FourierVector& zhat, const std::vector<double>& omega_prime,
                                           const std::vector<std::pair<MultiIndex, int>>& boxes, BVariant variant = BVariant::chain_rule) {
    const FieldData fd = field_data(model, zhat);
    EigenShiftReport rep;
    for (const auto& [k0, N] : boxes) {
        const Box box(k0, N);
        const LatticeOperator T = assemble_T(model, fd, zhat, omega_prime, box, true);
        const Eigen::VectorXd d = diagonal_D(model, T.rows, omega_prime);
        const Eigen::MatrixXd S = T.M - Eigen::MatrixXd(d.asDiagonal());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(0.5 * (T.M + T.M.transpose())), Eigen::EigenvaluesOnly);
        const Eigen::VectorXd lam = es.eigenvalues();
        const double bS = Eigen::JacobiSVD<Eigen::MatrixXd>(S).singularValues()(0);
        AssembleOptions opt;
        opt.b_variant = variant;
        const LatticeOperator L = assemble_L(model, fd, zhat, omega_prime, box, opt);
        const double bSB = Eigen::JacobiSVD<Eigen::MatrixXd>(Eigen::MatrixXd(L.M - Eigen::MatrixXd(d.asDiagonal()))).singularValues()(0);
        rep.bound_S = std::max(rep.bound_S, bS);
        rep.bound_SB = std::max(rep.bound_SB, bSB);

        const auto n = lam.size();
        struct Pair {
            double dist;
            Eigen::Index e, g;
        };
        std::vector<Pair> pairs;
        pairs.reserve(static_cast<std::size_t>(n * n));
        for (Eigen::Index e = 0; e < n; ++e)
            for (Eigen::Index g = 0; g < n; ++g) pairs.push_back({std::abs(lam(e) - d(g)), e, g});
        std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
        std::vector<char> used_e(static_cast<std::size_t>(n), 0), used_g(static_cast<std::size_t>(n), 0);
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto& pr = pairs[p];
            if (used_e[static_cast<std::size_t>(pr.e)] || used_g[static_cast<std::size_t>(pr.g)]) continue;
            used_e[static_cast<std::size_t>(pr.e)] = used_g[static_cast<std::size_t>(pr.g)] = 1;
            EigenShift s;
            s.k0 = k0;
            s.N = N;
            s.site = T.rows.site(static_cast<std::size_t>(pr.g));
            s.diagonal = d(pr.g);
            s.eigenvalue = lam(pr.e);
            s.mu = s.eigenvalue - s.diagonal;
            // Another free diagonal entry equally close makes the label ambiguous.
            for (Eigen::Index g = 0; g < n; ++g)
                if (g != pr.g && !used_g[static_cast<std::size_t>(g)] && std::abs(std::abs(lam(pr.e) - d(g)) - pr.dist) < 1e-12) s.ambiguous = true;
            rep.ambiguous_count += s.ambiguous ? 1 : 0;
            rep.max_abs_mu = std::max(rep.max_abs_mu, std::abs(s.mu));
            rep.shifts.push_back(s);
        }
    }
    rep.bound_S *= model.epsilon;
    rep.bound_SB *= model.epsilon;
    rep.bound_holds = rep.max_abs_mu <= rep.bound_S * (1.0 + 1e-10) + 1e-13;
    return rep;
}

struct SecondMelnikovReport {
    bool applicable = false;  // at least two normal modes
    bool ok = true;
    double threshold = 0.0;
    double min_value = std::numeric_limits<double>::infinity();
    MultiIndex worst_k;
    int worst_j1 = -1, worst_j2 = -1;
};

/// |−⟨k,ω'⟩ + ω_{j1} − ω_{j2} + μ_{j1} − μ_{j2}| over k ∈ Λ_{2N}∖Λ_{2N'} and distinct
/// normal modes, with μ_j the eigen-shift of site (j, 0) on the central box.
inline SecondMelnikovReport second_melnikov_check(const ModelSpec& model, const FourierVector& zhat, const std::vector<double>& omega_prime,
                                                  int N, int N_prime, int central_radius = 4, double theta_factor = 1e-3) {
    SecondMelnikovReport rep;
    const auto normals = model.normal_modes();
    if (normals.size() < 2) return rep;
    rep.applicable = true;
    const int m = model.m();
    const auto es = eigen_shift_report(model, zhat, omega_prime, {{MultiIndex(m), central_radius}});
    std::vector<double> mu(static_cast<std::size_t>(model.n), 0.0);
    for (const auto& s : es.shifts)
        if (s.site.index.is_zero()) mu[static_cast<std::size_t>(s.site.mode)] = s.mu;
    const SiteLayout big(model, Box::centered(m, N), true);
    rep.threshold = theta_factor * diagonal_D(model, big, omega_prime).cwiseAbs().minCoeff();
    const Box outer = Box::centered(m, 2 * N);
    for (std::size_t i = 0; i < outer.size(); ++i) {
        const MultiIndex k = outer.at(i);
        if (k.linf() <= 2 * N_prime) continue;
        for (int j1 : normals)
            for (int j2 : normals) {
                if (j1 == j2) continue;
                const double v = std::abs(-k.dot(omega_prime) + model.omega[static_cast<std::size_t>(j1)] - model.omega[static_cast<std::size_t>(j2)] +
                                          mu[static_cast<std::size_t>(j1)] - mu[static_cast<std::size_t>(j2)]);
                if (v < rep.min_value) {
                    rep.min_value = v;
                    rep.worst_k = k;
                    rep.worst_j1 = j1;
                    rep.worst_j2 = j2;
                }
            }
    }
    rep.ok = rep.min_value > rep.threshold;
    return rep;
}

}  // namespace qpt
