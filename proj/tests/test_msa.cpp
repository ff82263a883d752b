#include <catch_amalgamated.hpp>

#include <cmath>
#include <iostream>
#include <numbers>

#include "qpt/msa.hpp"

using namespace qpt;
using Catch::Approx;

namespace {

ModelSpec hh_with(std::vector<double> amp, double eps = 0.5) {
    ModelSpec m = henon_heiles();
    m.set_excitation(amp);
    m.epsilon = eps;
    return m;
}

const SolveResult& hh_solution() {
    static const SolveResult res = iterate(hh_with({1, 0}), SolverConfig{});
    return res;
}

const SolveResult& fpu_solution() {
    static const SolveResult res = [] {
        ModelSpec f = fpu_beta(3, 1.0);
        f.set_excitation({1, 0, 0});
        return iterate(f, SolverConfig{});
    }();
    return res;
}

ModelSpec fpu_100() {
    ModelSpec f = fpu_beta(3, 1.0);
    f.set_excitation({1, 0, 0});
    return f;
}

double rel_max(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("restrict_outer") {
    const auto hh = hh_with({1, 0});
    const auto& sol = hh_solution();
    SECTION("k0 = 0 is the central restriction") {
        const auto R = restrict_outer(hh, sol.zhat_star, sol.omega_star, MultiIndex{0}, 6);
        const auto L = assemble_L(hh, sol.zhat_star, sol.omega_star, Box::centered(1, 6));
        CHECK(R.near_origin);
        CHECK(R.L.M == L.M);
    }
    SECTION("ε = 0 spectrum is the diagonal") {
        const auto hh0 = hh_with({1, 0}, 0.0);
        const auto z = with_pins(hh0, zero_state(hh0, 1));
        const auto R = restrict_outer(hh0, z, {1.0}, MultiIndex{20}, 3);
        CHECK_FALSE(R.near_origin);
        CHECK(R.L.rows.excluded().empty());
        Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(R.L.M).eigenvalues();
        Eigen::VectorXd d = diagonal_D(hh0, R.L.rows, {1.0});
        std::sort(d.data(), d.data() + d.size());
        CHECK((ev - d).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("B block is small away from the origin") {
        const int N = 4;
        for (int k0 : {9, 12, -15}) {
            const auto R = restrict_outer(hh, sol.zhat_star, sol.omega_star, MultiIndex{k0}, N);
            const auto B = assemble_B(hh, sol.zhat_star, Box(MultiIndex{k0}, N), BVariant::literal);
            const double nb = Eigen::JacobiSVD<Eigen::MatrixXd>(B.M).singularValues()(0);
            const double s = gevrey_fit(without_pins(hh, sol.zhat_star));
            INFO("k0 = " << k0 << ", ‖B‖ = " << nb << ", s = " << s);
            CHECK(nb <= (2 * N + 1) * std::exp(-std::pow(N, s)));
        }
    }
}

TEST_CASE("glue_inverse") {
    SECTION("ε = 0 reproduces D⁻¹") {
        const auto hh0 = hh_with({1, 0}, 0.0);
        const auto z = with_pins(hh0, zero_state(hh0, 1));
        GlueConfig gc;
        gc.K = 2;
        const auto g = glue_inverse(hh0, z, {1.0}, 24, gc);
        const SiteLayout lay(hh0, Box::centered(1, 24));
        const Eigen::MatrixXd dense = Eigen::MatrixXd(diagonal_D(hh0, lay, {1.0}).cwiseInverse().asDiagonal());
        CHECK(g.phi.isZero(0.0));
        CHECK(rel_max(g.inverse, dense) < 1e-14);
        CHECK(g.residual < 1e-14);
    }
    SECTION("converged Hénon-Heiles state") {
        const auto hh = hh_with({1, 0});
        const auto& sol = hh_solution();
        for (auto [N, K] : {std::pair{40, 4}, std::pair{64, 6}}) {
            GlueConfig gc;
            gc.K = K;
            const auto L = assemble_L(hh, sol.zhat_star, sol.omega_star, Box::centered(1, N));
            const Eigen::MatrixXd dense = L.M.partialPivLu().inverse();
            const auto g = glue_inverse(hh, sol.zhat_star, sol.omega_star, N, gc);
            INFO("N = " << N << " K = " << K);
            CHECK(rel_max(g.inverse, dense) < 1e-8);
            CHECK(g.residual < 1e-8);
            CHECK(g.phi.diagonal().isZero(0.0));
        }
    }
    SECTION("Φ entries decay") {
        const auto hh = hh_with({1, 0});
        const auto& sol = hh_solution();
        GlueConfig gc;
        gc.K = 4;
        const auto g = glue_inverse(hh, sol.zhat_star, sol.omega_star, 40, gc);
        const double s = gevrey_fit(without_pins(hh, sol.zhat_star));
        double worst = -INFINITY;
        for (Eigen::Index r = 0; r < g.phi.rows(); ++r)
            for (Eigen::Index c = 0; c < g.phi.cols(); ++c) {
                const int d = (g.layout.index(static_cast<std::size_t>(r)) - g.layout.index(static_cast<std::size_t>(c))).l1();
                if (d == 0 || d >= 100 * gc.K || g.phi(r, c) == 0.0) continue;
                worst = std::max(worst, std::log(std::abs(g.phi(r, c))) + 0.5 * std::pow(d, s));
            }
        INFO("s = " << s << ", worst log margin " << worst);
        CHECK(worst <= 0.0);
    }
    SECTION("center box larger than N is rejected") {
        const auto hh = hh_with({1, 0});
        GlueConfig gc;
        gc.K = 5;
        CHECK_THROWS_AS(glue_inverse(hh, with_pins(hh, zero_state(hh, 1)), {1.0}, 40, gc), ConfigError);
    }
    SECTION("default K") {
        CHECK(GlueConfig::for_radius(40).K == 2);
        CHECK(GlueConfig::for_radius(1 << 20).K == 4);
    }
}

TEST_CASE("singular_scan") {
    SECTION("ε = 0 with admissible frequency") {
        const auto hh0 = hh_with({1, 0}, 0.0);
        const auto z = with_pins(hh0, zero_state(hh0, 1));
        const auto sc = singular_scan(hh0, z, {1.0}, 16);
        CHECK(sc.N_prime == 3);
        CHECK(sc.threshold > 0.0);
        CHECK(sc.sites.empty());
        CHECK(sc.clustered);
        // Keeping the resonant site k = 1 (zero diagonal) flags the two boxes that contain it.
        const auto kept = singular_scan(hh0, z, {1.0}, 16, 0, 1e-3, false);
        CHECK(kept.sites == std::vector<MultiIndex>{MultiIndex{0}, MultiIndex{3}});
        CHECK(kept.clustered);
    }
    SECTION("converged Hénon-Heiles state flags the central cluster") {
        const auto hh = hh_with({1, 0});
        const auto& sol = hh_solution();
        const auto sc = singular_scan(hh, sol.zhat_star, sol.omega_star, 16, 0, 1e-3, false);
        double central = INFINITY;
        for (std::size_t i = 0; i < sc.centers.size(); ++i)
            if (sc.centers[i].linf() <= sc.N_prime) central = std::min(central, sc.sigma_min[i]);
        INFO("θ = " << sc.threshold << ", smallest central σ_min = " << central << ", flagged " << sc.sites.size());
        CHECK(sc.clustered);
        REQUIRE_FALSE(sc.sites.empty());
        for (const auto& k : sc.sites) CHECK(k.linf() <= sc.N_prime);
    }
    SECTION("clustered on the converged FPU state") {
        const auto& sol = fpu_solution();
        CHECK(singular_scan(fpu_100(), sol.zhat_star, sol.omega_star, 16).clustered);
    }
}

TEST_CASE("schur_reduce") {
    SECTION("2×2 toy") {
        const auto hh = hh_with({1, 0});
        LatticeOperator L;
        L.rows = SiteLayout(hh, Box::centered(1, 0), false);
        L.cols = L.rows;
        const double delta = 1e-3, eps = 0.1, p = 0.5;
        L.M.resize(2, 2);
        L.M << delta, eps * p, eps * p, 1.0;
        const auto res = schur_reduce(L, {{0, MultiIndex{0}}});
        CHECK(res.U(0, 0) == Approx(delta - eps * eps * p * p).epsilon(1e-14));
        CHECK(res.norm_A_inverse == Approx(1.0));
        CHECK(res.norm_U_inverse == Approx(1.0 / std::abs(delta - eps * eps * p * p)).epsilon(1e-12));
        CHECK(res.bound_holds);
        CHECK_THROWS_AS(schur_reduce(L, {{0, MultiIndex{0}}, {1, MultiIndex{0}}}), ConfigError);
        CHECK_THROWS_AS(schur_reduce(L, {}), ConfigError);
    }
    SECTION("ε = 0") {
        const auto hh0 = hh_with({1, 0}, 0.0);
        const auto z = with_pins(hh0, zero_state(hh0, 1));
        const auto T = assemble_T(hh0, field_data(hh0, z), z, {1.0}, Box::centered(1, 4), true);
        const auto res = schur_reduce(T, {{1, MultiIndex{1}}});
        CHECK(res.U(0, 0) == Approx(std::numbers::sqrt2 - 1.0).epsilon(1e-15));
    }
    SECTION("resonant site of the converged Hénon-Heiles state") {
        const auto hh = hh_with({1, 0});
        const auto& sol = hh_solution();
        const auto T = assemble_T(hh, field_data(hh, sol.zhat_star), sol.zhat_star, sol.omega_star, Box::centered(1, 16), false);
        const auto res = schur_reduce(T, {{0, MultiIndex{1}}});
        std::cout << "Schur: ‖T⁻¹‖ = " << res.norm_inverse << ", bound = " << res.bound << ", coupling norm = " << res.norm_coupling << "\n";
        CHECK(res.bound_holds);
    }
}

TEST_CASE("eigen_shift_report") {
    SECTION("ε = 0") {
        const auto hh0 = hh_with({1, 0}, 0.0);
        const auto z = with_pins(hh0, zero_state(hh0, 1));
        const auto rep = eigen_shift_report(hh0, z, {1.0}, {{MultiIndex{0}, 4}, {MultiIndex{10}, 4}});
        CHECK(rep.max_abs_mu <= 4.0 * std::numeric_limits<double>::epsilon() * 6.0);
    }
    SECTION("converged Hénon-Heiles state, boxes of radius 4") {
        const auto hh = hh_with({1, 0});
        const auto& sol = hh_solution();
        const auto rep = eigen_shift_report(hh, sol.zhat_star, sol.omega_star, {{MultiIndex{0}, 4}, {MultiIndex{9}, 4}, {MultiIndex{-20}, 4}});
        INFO("max |μ| = " << rep.max_abs_mu << ", ε‖S‖ = " << rep.bound_S << ", ε‖S+B‖ = " << rep.bound_SB);
        CHECK(rep.bound_holds);
        CHECK(rep.max_abs_mu <= rep.bound_SB);
    }
    SECTION("second Melnikov runtime check on the converged FPU state") {
        const auto& sol = fpu_solution();
        const auto rep = second_melnikov_check(fpu_100(), sol.zhat_star, sol.omega_star, 16, 2);
        INFO("min value " << rep.min_value << " at k = " << rep.worst_k.str() << ", threshold " << rep.threshold);
        CHECK(rep.applicable);
        CHECK(rep.ok);
        CHECK_FALSE(second_melnikov_check(hh_with({1, 0}), hh_solution().zhat_star, hh_solution().omega_star, 16, 2).applicable);
    }
}
