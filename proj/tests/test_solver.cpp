#include <catch_amalgamated.hpp>

#include <cmath>
#include <iostream>
#include <numbers>

#include "qpt/solver.hpp"

using namespace qpt;
using Catch::Approx;

namespace {

ModelSpec hh_with(std::vector<double> amp) {
    ModelSpec m = henon_heiles();
    m.set_excitation(amp);
    return m;
}

ModelSpec fpu_with(std::vector<double> amp, double eps) {
    ModelSpec f = fpu_beta(3, eps);
    f.set_excitation(amp);
    return f;
}

const SolveResult& hh_solution() {
    static const SolveResult res = [] {
        SolverConfig cfg;
        cfg.schedule = {4, 8, 16, 32};
        return iterate(hh_with({1, 0}), cfg);
    }();
    return res;
}

}  // namespace

TEST_CASE("theory_scales") {
    const auto t = theory_scales(0.5, 10);
    CHECK(t.M == Approx(std::exp(std::pow(std::log(2.0), 0.05))).epsilon(1e-15));
    CHECK(t.M == Approx(2.6695).epsilon(1e-4));
    CHECK(t.log_eps_N == Approx(-std::pow(std::log(10.0), 15.0)).epsilon(1e-15));
    CHECK(t.log_eps_N < -2.7e5);
    CHECK(t.M0 == Approx(std::exp(std::pow(std::log(t.M), 0.05))).epsilon(1e-15));
    CHECK(t.N_prime == Approx(std::exp(std::pow(std::log(10.0), 0.1))).epsilon(1e-15));
    CHECK(std::exp(t.log_eps_N) == 0.0);

    double prev = INFINITY;
    for (double eps : {0.5, 0.9, 0.99, 0.999999, 1.0 - 1e-15}) {
        const double M = theory_scales(eps, 2).M;
        CHECK(M > 1.0);
        CHECK(M < prev);
        prev = M;
    }
    CHECK_THROWS_AS(theory_scales(1.0, 10), ConfigError);
    CHECK_THROWS_AS(theory_scales(0.5, 1), ConfigError);
}

TEST_CASE("default_schedule") {
    CHECK(default_schedule(0.5, 4, ScheduleMode::theoretical) == std::vector<int>{3, 8, 20, 51});
    CHECK(default_schedule(0.5, 3) == std::vector<int>{4, 8, 16, 32});
    CHECK(default_schedule(0.5, 2, ScheduleMode::practical, 2, 3) == std::vector<int>{2, 6, 18});
}

TEST_CASE("q_update") {
    const auto hh = hh_with({1, 0});
    SolverState st;
    st.zp = zero_state(hh, 1);
    CHECK(q_update(hh, st) == std::vector<double>{1.0});

    auto hh0 = hh;
    hh0.epsilon = 0.0;
    st.zp.set(1, MultiIndex{0}, 0.3);
    CHECK(q_update(hh0, st) == hh0.omega_T());
}

TEST_CASE("p_update") {
    SolverConfig cfg;
    SECTION("first step against an independent dense solve") {
        const auto hh = hh_with({1, 0});
        SolverState st;
        st.zp = zero_state(hh, 1);
        const auto pu = p_update(hh, st, 5, cfg);
        const double delta = -pu.zp_next.at(1, MultiIndex{0});

        const auto z0 = with_pins(hh, st.zp);
        const auto S = jacobian_S(hh, z0, Box::centered(1, 5));
        Eigen::MatrixXd L = hh.epsilon * S.M;
        L.diagonal() += diagonal_D(hh, S.rows, {1.0});
        const Eigen::VectorXd rhs = gather(eval_F(hh, st.zp, {1.0}), S.rows);
        const Eigen::VectorXd x = L.colPivHouseholderQr().solve(rhs);
        CHECK(delta == Approx(x(static_cast<Eigen::Index>(*S.rows.position(1, MultiIndex{0})))).epsilon(1e-12));
        CHECK(pu.zp_next.radius() == 5);
        CHECK(pu.zp_next.at(0, MultiIndex{1}) == 0.0);
    }
    SECTION("leading order F/D") {
        auto hh = hh_with({1, 0});
        hh.epsilon = 1e-4;
        SolverState st;
        st.zp = zero_state(hh, 1);
        const double delta = -p_update(hh, st, 5, cfg).zp_next.at(1, MultiIndex{0});
        CHECK(delta / hh.epsilon == Approx(0.5).epsilon(1e-3));
    }
    SECTION("ε = 0 leaves the iterate fixed") {
        auto hh = hh_with({1, 0});
        hh.epsilon = 0.0;
        SolverState st;
        st.zp = zero_state(hh, 1);
        CHECK(p_update(hh, st, 5, cfg).zp_next.is_zero());
    }
    SECTION("singular operator is reported") {
        auto model = hh_with({1, 0});
        model.omega[1] = 2.0;
        model.epsilon = 0.0;
        SolverState st;
        st.zp = zero_state(model, 1);
        CHECK_THROWS_AS(p_update(model, st, 4, cfg), SingularOperatorError);
    }
}

TEST_CASE("iterate on Hénon-Heiles") {
    const auto& res = hh_solution();
    const auto& h = res.history;
    REQUIRE(res.converged);
    CHECK(res.final_norm_F < 1e-12);
    CHECK(h.size() <= 6);
    for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i].norm_F < h[i - 1].norm_F);
    CHECK(res.zhat_star.at(0, MultiIndex{1}) == 1.0);
    CHECK(res.q_residual <= 10.0 * 1e-12);

    double C = 0.0;
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h[i - 1].norm_F < 1e-2) C = std::max(C, h[i].norm_F / std::pow(h[i - 1].norm_F, 1.5));
    std::cout << "measured contraction constant C = " << C << "\n";
    CHECK(std::isfinite(C));

    for (const auto& rec : h) CHECK(rec.drift <= rec.drift_bound * (1.0 + 1e-12) + 1e-15);
}

TEST_CASE("iterate invariants along a run") {
    const auto hh = hh_with({1, 0});
    SolverConfig cfg;
    SolverState st;
    st.omega = hh.omega_T();
    st.zp = zero_state(hh, 1);
    for (int r = 0; r < 4; ++r) {
        const int N = cfg.radius_at(r);
        const auto pu = p_update(hh, st, N, cfg);
        CHECK(with_pins(hh, pu.zp_next).at(0, MultiIndex{1}) == 1.0);
        CHECK(pu.zp_next.radius() <= N);
        st.zp = pu.zp_next;
    }
}

TEST_CASE("tail coefficients shrink across scales") {
    const auto& res = hh_solution();
    const std::vector<int> radii{1, 4, 8, 16, 32};
    const auto zp = without_pins(henon_heiles(), res.zhat_star);
    double prev = INFINITY;
    for (std::size_t i = 1; i < radii.size(); ++i) {
        double mx = 0.0;
        for (int k = -radii[i]; k <= radii[i]; ++k)
            if (std::abs(k) > radii[i - 1]) mx = std::max(mx, zp.block_norm(MultiIndex{k}));
        CHECK(mx <= prev);
        prev = mx;
    }
}

TEST_CASE("iterate edge cases") {
    SECTION("ε = 0 converges immediately to the pins") {
        auto hh = hh_with({1, 0});
        hh.epsilon = 0.0;
        const auto res = iterate(hh, SolverConfig{});
        CHECK(res.converged);
        CHECK(res.history.size() == 1);
        CHECK(res.history[0].r == 0);
        CHECK(without_pins(hh, res.zhat_star).is_zero());
        CHECK(res.omega_star == hh.omega_T());
    }
    SECTION("FPU single excitation of mode 2") {
        const auto res = iterate(fpu_with({0, 1, 0}, 1.0), SolverConfig{});
        CHECK(res.final_norm_F < 1e-10);
    }
    SECTION("config validation") {
        SolverConfig cfg;
        cfg.schedule = {8, 4};
        CHECK_THROWS_AS(iterate(henon_heiles(), cfg), ConfigError);
    }
}

TEST_CASE("check_implementation_conditions") {
    SECTION("ε = 0 diagonal case") {
        auto hh = hh_with({1, 0});
        hh.epsilon = 0.0;
        const auto z = with_pins(hh, zero_state(hh, 1));
        const int N = 8;
        const auto L = assemble_L(hh, z, {1.0}, Box::centered(1, N));
        const Eigen::MatrixXd inv = L.M.inverse();
        const auto rep = check_implementation_conditions(inv, L.rows, N, 0.5);
        CHECK(rep.localization_ok);
        CHECK(rep.inverse_norm == Approx(1.0 / L.M.diagonal().cwiseAbs().minCoeff()).epsilon(1e-10));
        CHECK(rep.inverse_bound_ok);
    }
    SECTION("log-space threshold is vacuous at desk scale") {
        const auto rep = check_implementation_conditions(Eigen::MatrixXd::Identity(6, 6) * 1e6, SiteLayout(henon_heiles(), Box::centered(1, 1), false), 10, 0.5);
        CHECK(rep.log_eps_N < -1e5);
        CHECK(rep.inverse_bound_ok);
    }
    SECTION("converged Hénon-Heiles state at N = 16") {
        const auto& res = hh_solution();
        const auto hh = hh_with({1, 0});
        const int N = 16;
        const auto L = assemble_L(hh, res.zhat_star, res.omega_star, Box::centered(1, N));
        const Eigen::MatrixXd inv = L.M.inverse();
        const double s = gevrey_fit(without_pins(hh, res.zhat_star));
        const auto rep = check_implementation_conditions(inv, L.rows, N, s);
        INFO("s = " << s << ", worst margin " << rep.worst_margin << " at rows " << rep.worst_row.index.str() << " cols "
                    << rep.worst_col.index.str() << ", folded margin " << rep.folded_worst_margin);
        CHECK(std::isfinite(rep.inverse_norm));
        CHECK(rep.localization_ok);
    }
}

TEST_CASE("inverse_derivative_check") {
    SECTION("ε = 0: derivative of 1/D is k/D²") {
        auto hh = hh_with({1, 0});
        hh.epsilon = 0.0;
        const auto z = with_pins(hh, zero_state(hh, 1));
        const int N = 6;
        const auto rep = inverse_derivative_check(hh, z, {1.0}, N, 1e-6, BVariant::chain_rule, 0.5);
        const SiteLayout lay(hh, Box::centered(1, N));
        const auto D = diagonal_D(hh, lay, {1.0});
        double expected = 0.0;
        for (std::size_t r = 0; r < lay.size(); ++r) {
            const double d = D(static_cast<Eigen::Index>(r));
            expected = std::max(expected, std::abs(lay.index(r)[0]) / (d * d));
        }
        CHECK(rep.norm == Approx(expected).epsilon(1e-6));
        CHECK(rep.localization_ok);
        CHECK(rep.log_bound == Approx(std::log(4.0 * N) + 2.0 * std::pow(std::log(6.0), 15.0)).epsilon(1e-14));
    }
    SECTION("converged Hénon-Heiles state at N = 16") {
        const auto& res = hh_solution();
        const auto rep = inverse_derivative_check(hh_with({1, 0}), res.zhat_star, res.omega_star, 16);
        INFO("norm " << rep.norm << ", worst margin " << rep.worst_margin);
        CHECK(std::isfinite(rep.norm));
        CHECK(std::log(rep.norm) <= rep.log_bound);
        CHECK(rep.localization_ok);
    }
}

TEST_CASE("convergence_metrics") {
    CHECK(convergence_metrics({}).empty());
    const auto& res = hh_solution();
    const auto rows = convergence_metrics(res.history);
    REQUIRE(rows.size() == res.history.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].coeff_step == res.history[i].step_norm);
        CHECK(rows[i].freq_step == res.history[i].freq_step);
        CHECK(rows[i].state_step == res.history[i].state_step_at_t);
        CHECK(rows[i].norm_F == res.history[i].norm_F);
    }
    for (std::size_t i = 2; i < rows.size(); ++i) {
        CHECK(rows[i].coeff_step < rows[i - 1].coeff_step);
        CHECK(rows[i].norm_F < rows[i - 1].norm_F);
    }
}
