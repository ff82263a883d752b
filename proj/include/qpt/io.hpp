#pragma once

// File formats: Fourier tables (JSON/CSV), solution files and CSV outputs
// carrying a commented header block.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpt/lattice.hpp"
#include "qpt/model.hpp"
#include "qpt/solver.hpp"

namespace qpt {

inline constexpr const char* kVersion = "0.1.0";

/// binary64 in 17 significant digits, which round-trips exactly.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x == 0.0 ? 0.0 : x);
    return buf;
}

/// Nonzero coefficients as rows {mode (1-based), k[], value}.
inline nlohmann::json fourier_to_json(const FourierVector& v) {
    nlohmann::json j;
    j["n"] = v.modes();
    j["m"] = v.dim();
    j["radius"] = v.radius();
    nlohmann::json rows = nlohmann::json::array();
    const Box sup = v.support();
    for (int mode = 0; mode < v.modes(); ++mode)
        for (std::size_t i = 0; i < sup.size(); ++i) {
            const double x = v.mode(mode).values()[i];
            if (x != 0.0) rows.push_back({{"mode", mode + 1}, {"k", sup.at(i).components()}, {"value", x}});
        }
    j["coefficients"] = rows;
    return j;
}

inline FourierVector fourier_from_json(const nlohmann::json& j) {
    try {
        FourierVector v(j.at("n").get<int>(), j.at("m").get<int>(), j.at("radius").get<int>());
        for (const auto& row : j.at("coefficients")) {
            const int mode = row.at("mode").get<int>();
            if (mode < 1 || mode > v.modes()) throw ConfigError("fourier table: mode out of range");
            const MultiIndex k(row.at("k").get<std::vector<int>>());
            if (k.dim() != v.dim() || !v.support().contains(k)) throw ConfigError("fourier table: index outside support");
            v.set(mode - 1, k, row.at("value").get<double>());
        }
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("fourier table: ") + e.what());
    }
}

inline std::string fourier_to_csv(const FourierVector& v) {
    std::ostringstream os;
    os << "mode";
    for (int i = 1; i <= v.dim(); ++i) os << ",k" << i;
    os << ",value\n";
    const Box sup = v.support();
    for (int mode = 0; mode < v.modes(); ++mode)
        for (std::size_t i = 0; i < sup.size(); ++i) {
            const double x = v.mode(mode).values()[i];
            if (x == 0.0) continue;
            os << mode + 1;
            const MultiIndex k = sup.at(i);
            for (int d = 0; d < v.dim(); ++d) os << "," << k[d];
            os << "," << fmt17(x) << "\n";
        }
    return os.str();
}

/// Parses the CSV table; lines starting with '#' are skipped. modes/dim/radius size the result.
inline FourierVector fourier_from_csv(const std::string& text, int modes, int dim, int radius) {
    FourierVector v(modes, dim, radius);
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (static_cast<int>(cells.size()) != dim + 2) throw ConfigError("fourier csv: wrong column count");
        std::vector<int> k;
        for (int d = 0; d < dim; ++d) k.push_back(std::stoi(cells[static_cast<std::size_t>(d + 1)]));
        v.set(std::stoi(cells[0]) - 1, MultiIndex(k), std::stod(cells.back()));
    }
    return v;
}

struct Solution {
    ModelSpec model;
    std::vector<double> omega_star;
    FourierVector zhat;  // pins included
    nlohmann::json meta = nlohmann::json::object();
};

inline nlohmann::json solution_to_json(const Solution& s) {
    nlohmann::json j;
    j["version"] = kVersion;
    j["model"] = model_to_json(s.model);
    j["omega_star"] = s.omega_star;
    j["zhat"] = fourier_to_json(s.zhat);
    j["meta"] = s.meta;
    return j;
}

inline Solution solution_from_json(const nlohmann::json& j) {
    try {
        Solution s;
        s.model = model_from_json(j.at("model"));
        s.omega_star = j.at("omega_star").get<std::vector<double>>();
        s.zhat = fourier_from_json(j.at("zhat"));
        if (j.contains("meta")) s.meta = j.at("meta");
        if (static_cast<int>(s.omega_star.size()) != s.model.m() || s.zhat.dim() != s.model.m() || s.zhat.modes() != s.model.n)
            throw ConfigError("solution: shapes disagree with the model");
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("solution: ") + e.what());
    }
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline Solution load_solution(const std::string& path) {
    try {
        return solution_from_json(nlohmann::json::parse(read_text(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

/// Comment lines with the library version and the resolved config as JSON.
inline std::string csv_header(const nlohmann::json& config) {
    std::ostringstream os;
    os << "# qpt " << kVersion << "\n";
    os << "# config: " << config.dump() << "\n";
    return os.str();
}

inline std::string convergence_csv(const std::vector<ConvergenceRecord>& history, const nlohmann::json& config) {
    std::ostringstream os;
    os << csv_header(config);
    os << "r,N,norm_F,norm_F_box,coeff_step,freq_step,state_step_t,gevrey_s,drift,drift_bound,rcond";
    const int m = history.empty() ? 0 : static_cast<int>(history.front().omega.size());
    for (int i = 1; i <= m; ++i) os << ",omega" << i;
    os << "\n";
    for (const auto& h : history) {
        os << h.r << "," << h.N << "," << fmt17(h.norm_F) << "," << fmt17(h.norm_F_box) << "," << fmt17(h.step_norm) << ","
           << fmt17(h.freq_step) << "," << fmt17(h.state_step_at_t) << "," << fmt17(h.gevrey_s) << "," << fmt17(h.drift) << ","
           << fmt17(h.drift_bound) << "," << fmt17(h.rcond);
        for (double w : h.omega) os << "," << fmt17(w);
        os << "\n";
    }
    return os.str();
}

inline std::string conditions_csv(const std::vector<ConvergenceRecord>& history, const nlohmann::json& config) {
    std::ostringstream os;
    os << csv_header(config);
    os << "r,N,s,inverse_norm,log_inverse_norm,log_eps_N,inverse_bound_ok,localization_ok,worst_margin,worst_row_mode,worst_row_k,"
          "worst_col_mode,worst_col_k,folded_localization_ok,folded_worst_margin\n";
    for (const auto& h : history) {
        if (!h.conditions) continue;
        const auto& c = *h.conditions;
        os << h.r << "," << h.N << "," << fmt17(c.s) << "," << fmt17(c.inverse_norm) << "," << fmt17(c.log_inverse_norm) << ","
           << fmt17(c.log_eps_N) << "," << c.inverse_bound_ok << "," << c.localization_ok << "," << fmt17(c.worst_margin) << ","
           << c.worst_row.mode + 1 << ",\"" << c.worst_row.index.str() << "\"," << c.worst_col.mode + 1 << ",\"" << c.worst_col.index.str()
           << "\"," << c.folded_localization_ok << "," << fmt17(c.folded_worst_margin) << "\n";
    }
    return os.str();
}

}  // namespace qpt
