#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "qpt/evaluate.hpp"
#include "qpt/solver.hpp"

using namespace qpt;
using Catch::Approx;
using cd = std::complex<double>;

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

}  // namespace

TEST_CASE("synthesize") {
    SECTION("real coefficients start on the x = 0 axis") {
        const auto& sol = hh_solution();
        const auto tr = to_real_coords(synthesize(sol.zhat_star, sol.omega_star, {0.0, 1.0}));
        for (const auto& [x, y] : tr.coords[0]) CHECK(x == 0.0);
    }
    SECTION("ε = 0 pins only") {
        const auto hh = hh_with({0, 2}, 0.0);
        const auto z = with_pins(hh, zero_state(hh, 1));
        const auto tr = synthesize(z, hh.omega_T(), linspace(0.0, 5.0, 11));
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            CHECK(tr.states[i][0] == cd(0.0));
            CHECK(std::abs(tr.states[i][1] - 2.0 * std::polar(1.0, std::numbers::sqrt2 * tr.times[i])) < 1e-14);
        }
    }
    SECTION("single coefficient has period π/ω'") {
        FourierVector z(2, 1, 2);
        z.set(0, MultiIndex{2}, 0.7);
        const double w = 1.3;
        const double T = std::numbers::pi / w;
        const auto tr = synthesize(z, {w}, {0.0, 0.4, T, T + 0.4});
        CHECK(std::abs(tr.states[0][0] - cd(0.7)) < 1e-15);
        CHECK(std::abs(tr.states[1][0] - 0.7 * std::polar(1.0, 2.0 * w * 0.4)) < 1e-15);
        CHECK(std::abs(tr.states[2][0] - tr.states[0][0]) < 1e-14);
        CHECK(std::abs(tr.states[3][0] - tr.states[1][0]) < 1e-14);
    }
    SECTION("times must increase") {
        FourierVector z(2, 1, 1);
        CHECK_THROWS_AS(synthesize(z, {1.0}, {0.0, 0.0}), std::invalid_argument);
    }
}

TEST_CASE("to_real_coords") {
    const auto a = to_xy(cd(1.0, 0.0));
    CHECK(a.first == 0.0);
    CHECK(a.second == Approx(std::numbers::sqrt2).epsilon(1e-15));
    const auto b = to_xy(cd(0.0, 1.0));
    CHECK(b.first == Approx(-std::numbers::sqrt2).epsilon(1e-15));
    CHECK(b.second == 0.0);

    std::mt19937_64 gen(5);
    std::normal_distribution<double> nd;
    for (int t = 0; t < 1000; ++t) {
        const cd z(nd(gen), nd(gen));
        const auto [x, y] = to_xy(z);
        CHECK(std::abs(from_xy(x, y) - z) <= 1e-15 * std::max(1.0, std::abs(z)));
    }
}

TEST_CASE("ode_residual") {
    SECTION("ε = 0 pins only") {
        const auto hh = hh_with({1, 0}, 0.0);
        const auto z = with_pins(hh, zero_state(hh, 1));
        CHECK(ode_residual(hh, z, hh.omega_T(), linspace(0.0, 20.0, 201)).max == 0.0);
        const auto shifted = ode_residual(hh, z, {1.1}, linspace(0.0, 20.0, 201));
        CHECK(shifted.max == Approx(0.1).epsilon(1e-12));
    }
    SECTION("converged Hénon-Heiles solution") {
        const auto& sol = hh_solution();
        const auto rep = ode_residual(hh_with({1, 0}), sol.zhat_star, sol.omega_star, linspace(0.0, 20.0, 2001));
        INFO("max residual " << rep.max);
        CHECK(rep.max < 1e-8);
        CHECK(rep.per_time.size() == 2001);
    }
    SECTION("later iterates have smaller residual") {
        const auto hh = hh_with({1, 0});
        SolverConfig c1, c3;
        c1.r_max = 2;
        c3.r_max = 4;
        c1.tol_F = c3.tol_F = 1e-300;
        c1.tol_step = c3.tol_step = 1e-300;
        const auto s1 = iterate(hh, c1);
        const auto s3 = iterate(hh, c3);
        const auto times = linspace(0.0, 20.0, 2001);
        const double r1 = ode_residual(hh, s1.zhat_star, s1.omega_star, times).max;
        const double r3 = ode_residual(hh, s3.zhat_star, s3.omega_star, times).max;
        INFO("r=1: " << r1 << "  r=3: " << r3);
        CHECK(r3 < r1);
    }
}

TEST_CASE("reference_integrate") {
    SECTION("ε = 0 rotation") {
        const auto hh = hh_with({1, 0}, 0.0);
        const auto res = reference_integrate(hh, {cd(1.0), cd(0.5)}, 10.0, 1e-3);
        const auto& z = res.trajectory.states.back();
        CHECK(res.trajectory.times.back() == Approx(10.0).epsilon(1e-14));
        CHECK(std::abs(z[0] - std::polar(1.0, 10.0)) < 1e-10);
        CHECK(std::abs(z[1] - 0.5 * std::polar(1.0, 10.0 * std::numbers::sqrt2)) < 1e-10);
    }
    SECTION("energy is conserved for Hénon-Heiles") {
        const auto hh = hh_with({1, 0});
        const auto res = reference_integrate(hh, {cd(0.6, 0.1), cd(0.2, -0.3)}, 10.0, 1e-4, 1000);
        INFO("drift " << res.energy_drift);
        CHECK(res.energy_drift < 1e-8);
        CHECK(res.stable);
    }
    SECTION("time reversal") {
        const auto hh = hh_with({1, 0});
        const cvec z0{cd(0.6, 0.1), cd(0.2, -0.3)};
        const auto fwd = reference_integrate(hh, z0, 5.0, 1e-3, 5000);
        const auto back = reference_integrate(hh, fwd.trajectory.states.back(), -5.0, -1e-3, 5000);
        cvec d(2);
        for (std::size_t j = 0; j < 2; ++j) d[j] = back.trajectory.states.back()[j] - z0[j];
        CHECK(cnorm(d) < 1e-9);
    }
    SECTION("bad steps") {
        const auto hh = hh_with({1, 0});
        CHECK_THROWS_AS(reference_integrate(hh, {cd(1.0), cd(0.0)}, 1.0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(reference_integrate(hh, {cd(1.0), cd(0.0)}, 1.0, -0.1), std::invalid_argument);
    }
}

TEST_CASE("compare_trajectory") {
    SECTION("identical inputs") {
        const auto& sol = hh_solution();
        const auto tr = synthesize(sol.zhat_star, sol.omega_star, linspace(0.0, 1.0, 5));
        for (double e : compare_trajectory(tr, tr)) CHECK(e == 0.0);
    }
    SECTION("ε = 0 against the integrator") {
        const auto hh = hh_with({1, 0}, 0.0);
        const auto z = with_pins(hh, zero_state(hh, 1));
        const auto ref = reference_integrate(hh, {cd(1.0), cd(0.0)}, 10.0, 1e-3, 100);
        const auto syn = synthesize(z, hh.omega_T(), ref.trajectory.times);
        for (double e : compare_trajectory(syn, ref.trajectory)) CHECK(e < 1e-10);
    }
    SECTION("converged Hénon-Heiles against RK4") {
        const auto hh = hh_with({1, 0});
        const auto& sol = hh_solution();
        cvec z0;
        synthesize_at(sol.zhat_star, sol.omega_star, 0.0, z0);
        const auto ref = reference_integrate(hh, z0, 10.0, 1e-4, 100);
        const auto syn = synthesize(sol.zhat_star, sol.omega_star, ref.trajectory.times);
        double mx = 0.0;
        for (double e : compare_trajectory(syn, ref.trajectory)) mx = std::max(mx, e);
        INFO("max deviation " << mx);
        CHECK(mx < 1e-6);
    }
    SECTION("grid mismatch") {
        FourierVector z(2, 1, 1);
        CHECK_THROWS_AS(compare_trajectory(synthesize(z, {1.0}, {0.0, 1.0}), synthesize(z, {1.0}, {0.0, 2.0})), std::invalid_argument);
    }
}

TEST_CASE("energy along synthesized solutions") {
    const auto hh = hh_with({1, 0});
    const auto& sol = hh_solution();
    const auto times = linspace(0.0, 20.0, 2001);
    const auto tr = synthesize(sol.zhat_star, sol.omega_star, times);
    const double res = ode_residual(hh, sol.zhat_star, sol.omega_star, times).max;
    const double H0 = evaluate_H(hh, tr.states[0]);
    double drift = 0.0;
    for (const auto& z : tr.states) drift = std::max(drift, std::abs(evaluate_H(hh, z) - H0) / std::abs(H0));
    INFO("drift " << drift << ", residual " << res);
    CHECK(drift <= 10.0 * res * times.back());
}

TEST_CASE("phase markers are reproducible") {
    const auto& sol = hh_solution();
    const auto a = to_real_coords(synthesize(sol.zhat_star, sol.omega_star, {0.0, 10.0, 20.0}));
    const auto b = to_real_coords(synthesize(sol.zhat_star, sol.omega_star, {0.0, 10.0, 20.0}));
    CHECK(a.coords == b.coords);
}
