#pragma once

// Model definitions: H = ⟨ω⊙z, z̄⟩ + εH₁(z, z̄) with polynomial H₁.

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpt/polynomial.hpp"

namespace qpt {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class ModelSpec {
public:
    std::string name = "custom";
    int n = 0;
    std::vector<bool> excited;       // length n, m entries true
    std::vector<double> omega;       // length n
    std::vector<double> amplitudes;  // length m, in increasing mode order
    double epsilon = 0.0;
    Polynomial H1;

    int m() const {
        int c = 0;
        for (bool b : excited) c += b ? 1 : 0;
        return c;
    }

    /// Mode carrying tangent direction i (0-based), i.e. j_i.
    int tangent_mode(int i) const {
        int c = 0;
        for (int j = 0; j < n; ++j)
            if (excited[static_cast<std::size_t>(j)] && c++ == i) return j;
        throw std::out_of_range("tangent_mode: index out of range");
    }
    std::vector<int> tangent_modes() const {
        std::vector<int> out;
        for (int j = 0; j < n; ++j)
            if (excited[static_cast<std::size_t>(j)]) out.push_back(j);
        return out;
    }
    std::vector<int> normal_modes() const {
        std::vector<int> out;
        for (int j = 0; j < n; ++j)
            if (!excited[static_cast<std::size_t>(j)]) out.push_back(j);
        return out;
    }
    std::vector<double> omega_T() const {
        std::vector<double> w;
        for (int j : tangent_modes()) w.push_back(omega[static_cast<std::size_t>(j)]);
        return w;
    }
    std::vector<double> omega_N() const {
        std::vector<double> w;
        for (int j : normal_modes()) w.push_back(omega[static_cast<std::size_t>(j)]);
        return w;
    }

    void validate() const {
        if (n < 1) throw ConfigError("model: n must be positive");
        if (static_cast<int>(excited.size()) != n || static_cast<int>(omega.size()) != n)
            throw ConfigError("model: excited/omega length must equal n");
        if (m() < 1) throw ConfigError("model: at least one mode must be excited");
        if (static_cast<int>(amplitudes.size()) != m())
            throw ConfigError("model: amplitude count must equal the number of excited modes");
        for (double w : omega)
            if (!(std::isfinite(w) && w != 0.0)) throw ConfigError("model: frequencies must be finite and nonzero");
        for (double a : amplitudes)
            if (!(std::isfinite(a) && a > 0.0)) throw ConfigError("model: amplitudes must be positive");
        if (!(std::isfinite(epsilon) && epsilon >= 0.0)) throw ConfigError("model: epsilon must be nonnegative");
        if (H1.n() != n) throw ConfigError("model: H1 variable count must equal n");
        for (const auto& t : H1.terms())
            if (t.degree() < 2) throw ConfigError("model: H1 must have no constant or linear terms");
    }

    /// Replace the excitation with the nonzero entries of a length-n vector.
    void set_excitation(const std::vector<double>& amp_full) {
        if (static_cast<int>(amp_full.size()) != n)
            throw ConfigError("model: amplitude vector must have one entry per mode");
        excited.assign(static_cast<std::size_t>(n), false);
        amplitudes.clear();
        for (int j = 0; j < n; ++j) {
            const double a = amp_full[static_cast<std::size_t>(j)];
            if (a < 0.0) throw ConfigError("model: amplitudes must be nonnegative");
            if (a > 0.0) {
                excited[static_cast<std::size_t>(j)] = true;
                amplitudes.push_back(a);
            }
        }
        if (amplitudes.empty()) throw ConfigError("model: no mode is excited");
    }
};

/// Hénon-Heiles: H₁ = (z₁+z̄₁)²(z₂+z̄₂)/(2√2) − (z₂+z̄₂)³/(6√2).
inline ModelSpec henon_heiles() {
    const int n = 2;
    const double r2 = std::numbers::sqrt2;
    Polynomial y1 = Polynomial::variable(n, 0, false);
    y1 += Polynomial::variable(n, 0, true);
    Polynomial y2 = Polynomial::variable(n, 1, false);
    y2 += Polynomial::variable(n, 1, true);
    Polynomial h = y1.pow(2) * y2;
    h *= 1.0 / (2.0 * r2);
    Polynomial c = y2.pow(3);
    c *= -1.0 / (6.0 * r2);
    h += c;

    ModelSpec spec;
    spec.name = "henon";
    spec.n = n;
    spec.excited = {true, false};
    spec.omega = {1.0, r2};
    spec.amplitudes = {1.0};
    spec.epsilon = 0.5;
    spec.H1 = std::move(h);
    return spec;
}

/// Normal-mode matrix V_{k,j} = √(2/(n+1)) sin(jkπ/(n+1)), 1-based k, j.
inline std::vector<std::vector<double>> fpu_modes(int n) {
    if (n < 1) throw ConfigError("fpu: n must be positive");
    std::vector<std::vector<double>> V(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(n)));
    const double f = std::sqrt(2.0 / (n + 1));
    for (int k = 1; k <= n; ++k)
        for (int j = 1; j <= n; ++j)
            V[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(j - 1)] =
                f * std::sin(j * k * std::numbers::pi / (n + 1));
    return V;
}

inline std::vector<double> fpu_frequencies(int n) {
    if (n < 1) throw ConfigError("fpu: n must be positive");
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) w[static_cast<std::size_t>(k - 1)] = 2.0 * std::sin(k * std::numbers::pi / (2.0 * (n + 1)));
    return w;
}

/// FPU-β chain with fixed ends in normal-mode complex coordinates:
/// H₁ = ¼ Σ_{j=0}^{n} (Σ_k c_{j,k}(z_k+z̄_k))⁴, c_{j,k} = (V_{j+1,k} − V_{j,k})/√(2ω_k).
inline ModelSpec fpu_beta(int n, double epsilon) {
    if (n < 1) throw ConfigError("fpu: n must be positive");
    if (!(epsilon > 0.0)) throw ConfigError("fpu: epsilon must be positive");
    const auto V = fpu_modes(n);
    const auto w = fpu_frequencies(n);
    auto Vat = [&](int row, int k) {  // row 0 and n+1 are the fixed ends
        if (row == 0 || row == n + 1) return 0.0;
        return V[static_cast<std::size_t>(row - 1)][static_cast<std::size_t>(k)];
    };
    Polynomial h(n);
    for (int j = 0; j <= n; ++j) {
        Polynomial lin(n);
        for (int k = 0; k < n; ++k) {
            const double c = (Vat(j + 1, k) - Vat(j, k)) / std::sqrt(2.0 * w[static_cast<std::size_t>(k)]);
            lin += Polynomial::variable(n, k, false, c);
            lin += Polynomial::variable(n, k, true, c);
        }
        h += lin.pow(4);
    }
    h *= 0.25;

    ModelSpec spec;
    spec.name = "fpu";
    spec.n = n;
    spec.excited.assign(static_cast<std::size_t>(n), false);
    spec.excited[0] = true;
    spec.omega = w;
    spec.amplitudes = {1.0};
    spec.epsilon = epsilon;
    spec.H1 = std::move(h);
    return spec;
}

/// Σ ω_j|z_j|² + εH₁(z, z̄); throws if H₁ returns a non-real value.
inline double evaluate_H(const ModelSpec& model, const std::vector<std::complex<double>>& z) {
    if (static_cast<int>(z.size()) != model.n) throw std::invalid_argument("evaluate_H: length mismatch");
    double quad = 0.0;
    for (int j = 0; j < model.n; ++j) quad += model.omega[static_cast<std::size_t>(j)] * std::norm(z[static_cast<std::size_t>(j)]);
    const std::complex<double> h1 = model.H1.evaluate(z);
    const double value = quad + model.epsilon * h1.real();
    double scale = std::abs(quad);
    for (const auto& t : model.H1.terms()) {
        double mag = std::abs(t.coeff);
        for (std::size_t i = 0; i < t.p.size(); ++i) mag *= std::pow(std::abs(z[i]), t.p[i] + t.q[i]);
        scale += model.epsilon * mag;
    }
    if (std::abs(model.epsilon * h1.imag()) > 1e-9 * std::max(scale, 1e-300))
        throw std::logic_error("evaluate_H: H1 is not real on conjugate arguments");
    return value;
}

inline nlohmann::json model_to_json(const ModelSpec& model) {
    nlohmann::json j;
    j["name"] = model.name;
    j["n"] = model.n;
    j["m"] = model.m();
    j["excited"] = model.excited;
    j["omega"] = model.omega;
    j["amplitudes"] = model.amplitudes;
    j["epsilon"] = model.epsilon;
    nlohmann::json mons = nlohmann::json::array();
    for (const auto& t : model.H1.terms()) mons.push_back({{"coeff", t.coeff}, {"p", t.p}, {"q", t.q}});
    j["monomials"] = mons;
    return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
    try {
        ModelSpec model;
        model.name = j.value("name", std::string("custom"));
        model.n = j.at("n").get<int>();
        model.excited = j.at("excited").get<std::vector<bool>>();
        model.omega = j.at("omega").get<std::vector<double>>();
        model.amplitudes = j.at("amplitudes").get<std::vector<double>>();
        model.epsilon = j.at("epsilon").get<double>();
        if (model.n < 1) throw ConfigError("model: n must be positive");
        std::vector<Monomial> terms;
        for (const auto& mj : j.at("monomials"))
            terms.push_back({mj.at("coeff").get<double>(), mj.at("p").get<std::vector<int>>(), mj.at("q").get<std::vector<int>>()});
        model.H1 = Polynomial(model.n, std::move(terms));
        if (j.contains("m") && j.at("m").get<int>() != model.m()) throw ConfigError("model: m disagrees with excited mask");
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("model file: ") + e.what());
    }
}

inline ModelSpec load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("model file " + path + ": " + e.what());
    }
    return model_from_json(j);
}

}  // namespace qpt
