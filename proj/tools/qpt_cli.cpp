#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "qpt/qpt.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qpt;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 2;
constexpr int kConfig = 3;

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string cell; std::getline(ss, cell, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw ConfigError(std::string("cannot parse ") + what + " entry '" + cell + "'");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + " is empty");
    return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    for (double x : parse_list(text, what)) {
        if (x != std::floor(x)) throw ConfigError(std::string(what) + " entries must be integers");
        out.push_back(static_cast<int>(x));
    }
    return out;
}

void apply_thread_cap() {
    if (const char* env = std::getenv("TORUS_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1) throw ConfigError("TORUS_THREADS must be a positive integer");
        Eigen::setNbThreads(static_cast<int>(n));
    }
}

struct ModelArgs {
    std::string model = "henon";
    int n = 3;
    double epsilon = -1.0;
    std::string amplitudes;

    void add(CLI::App* app) {
        app->add_option("--model", model, "henon, fpu, or a model JSON file")->capture_default_str();
        app->add_option("--n", n, "FPU chain length")->capture_default_str();
        app->add_option("--epsilon", epsilon, "perturbation strength (model default if omitted)");
        app->add_option("--amplitudes", amplitudes, "comma-separated amplitude per mode; nonzero entries are excited");
    }

    ModelSpec build() const {
        ModelSpec m;
        if (model == "henon") {
            m = henon_heiles();
        } else if (model == "fpu") {
            m = fpu_beta(n, 1.0);
        } else {
            m = load_model(model);
        }
        if (epsilon >= 0.0) m.epsilon = epsilon;
        if (!amplitudes.empty()) m.set_excitation(parse_list(amplitudes, "--amplitudes"));
        m.validate();
        return m;
    }
};

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

void emit(const std::string& out, const std::string& text) {
    if (out.empty() || out == "-")
        std::cout << text;
    else
        write_text(out, text);
}

// ---- solve ----

struct SolveArgs {
    ModelArgs model;
    std::string schedule;
    int rmax = 8;
    int max_radius = -1;
    double tol = -1.0;
    std::string b_variant = "chain_rule";
    bool no_conditions = false;
    double tau = 2.0, gamma = 0.05;
    int M = 10;
    std::string out = ".";
};

int cmd_solve(const SolveArgs& a) {
    const ModelSpec model = a.model.build();
    SolverConfig cfg;
    cfg.r_max = a.rmax;
    if (!a.schedule.empty()) cfg.schedule = parse_int_list(a.schedule, "--schedule");
    cfg.max_radius = a.max_radius >= 0 ? a.max_radius : (model.m() >= 2 ? 16 : 0);
    cfg.tol_F = a.tol > 0.0 ? a.tol : (model.m() >= 2 ? 1e-10 : 1e-12);
    cfg.b_variant = parse_b_variant(a.b_variant);
    cfg.check_conditions = !a.no_conditions;
    cfg.validate();
    ResonanceConfig rc;
    rc.tau = a.tau;
    rc.gamma = a.gamma;
    rc.M = a.M;
    rc.validate(model.m());

    const json config = {{"command", "solve"},
                         {"model", model_to_json(model)},
                         {"solver",
                          {{"r_max", cfg.r_max},
                           {"schedule", cfg.schedule},
                           {"max_radius", cfg.max_radius},
                           {"tol_F", cfg.tol_F},
                           {"tol_step", cfg.tol_step},
                           {"b_variant", to_string(cfg.b_variant)},
                           {"check_conditions", cfg.check_conditions}}},
                         {"resonance", {{"tau", rc.tau}, {"gamma", rc.gamma}, {"M", rc.M}}}};

    const auto res_rep = admissible(model, rc);
    if (!res_rep.admissible)
        std::cerr << "warning: frequencies fail the " << to_string(res_rep.worst.set) << " test at k = " << res_rep.worst.k.str()
                  << " (margin " << res_rep.worst.margin << ")\n";

    fs::create_directories(a.out);
    SolveResult res;
    try {
        res = iterate(model, cfg);
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << "\n" << e.dump;
        return kFailed;
    } catch (const SingularOperatorError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailed;
    }

    json meta = {{"config", config},
                 {"converged", res.converged},
                 {"iterations", res.history.size()},
                 {"final_norm_F", res.final_norm_F},
                 {"q_residual", res.q_residual},
                 {"resonance_admissible", res_rep.admissible}};
    write_json((fs::path(a.out) / "solution.json").string(), solution_to_json({model, res.omega_star, res.zhat_star, meta}));
    write_text((fs::path(a.out) / "convergence.csv").string(), convergence_csv(res.history, config));
    write_text((fs::path(a.out) / "conditions.csv").string(), conditions_csv(res.history, config));

    std::cout << format_history(res.history);
    std::cout << (res.converged ? "converged" : "not converged") << ": ||F|| = " << fmt17(res.final_norm_F) << " after "
              << res.history.size() << " iterations\n";
    return res.converged ? kOk : kFailed;
}

// ---- trajectory ----

struct TrajectoryArgs {
    std::string solution;
    double t0 = 0.0, t1 = 20.0;
    int points = 2001;
    std::string times;
    std::string out = "trajectory.csv";
    std::string markers_out;
};

std::string trajectory_csv(const Solution& sol, const std::vector<double>& times, const json& config) {
    const auto tr = to_real_coords(synthesize(sol.zhat, sol.omega_star, times));
    const auto res = ode_residual(sol.model, sol.zhat, sol.omega_star, times);
    std::ostringstream os;
    os << csv_header(config) << "t";
    for (int j = 1; j <= sol.model.n; ++j) os << ",x" << j << ",y" << j;
    os << ",residual\n";
    for (std::size_t i = 0; i < times.size(); ++i) {
        os << fmt17(times[i]);
        for (const auto& [x, y] : tr.coords[i]) os << "," << fmt17(x) << "," << fmt17(y);
        os << "," << fmt17(res.per_time[i]) << "\n";
    }
    return os.str();
}

int cmd_trajectory(const TrajectoryArgs& a) {
    const Solution sol = load_solution(a.solution);
    const std::vector<double> times = a.times.empty() ? linspace(a.t0, a.t1, a.points) : parse_list(a.times, "--times");
    const json config = {{"command", "trajectory"},
                         {"solution", a.solution},
                         {"t0", a.t0},
                         {"t1", a.t1},
                         {"points", a.points},
                         {"times", a.times}};
    emit(a.out, trajectory_csv(sol, times, config));
    if (!a.markers_out.empty()) {
        json mc = config;
        mc["markers"] = {0.0, 10.0, 20.0};
        write_text(a.markers_out, trajectory_csv(sol, {0.0, 10.0, 20.0}, mc));
    }
    return kOk;
}

// ---- resonance ----

struct ResonanceArgs {
    ModelArgs model;
    double tau = 2.0, gamma = 0.05;
    int M = 10;
    bool measure = false;
    std::string lo, hi;
    long samples = 100000;
    std::uint64_t seed = 1;
    std::string out;
};

json offender_json(const ResonanceOffender& o) {
    json j = {{"set", to_string(o.set)}, {"k", o.k.components()}, {"margin", o.margin}};
    if (o.j1 >= 0) j["j1"] = o.j1 + 1;
    if (o.j2 >= 0) j["j2"] = o.j2 + 1;
    return j;
}

int cmd_resonance(const ResonanceArgs& a) {
    const ModelSpec model = a.model.build();
    ResonanceConfig rc;
    rc.tau = a.tau;
    rc.gamma = a.gamma;
    rc.M = a.M;
    rc.validate(model.m());
    json j = {{"version", kVersion},
              {"config", {{"command", "resonance"}, {"model", model_to_json(model)}, {"tau", rc.tau}, {"gamma", rc.gamma}, {"M", rc.M}}}};
    const auto wT = model.omega_T(), wN = model.omega_N();
    j["tangent"] = offender_json(tangent_resonant(wT, rc).worst);
    j["melnikov1"] = offender_json(melnikov1(wT, wN, rc).worst);
    j["melnikov2"] = offender_json(melnikov2(wT, wN, rc).worst);
    const auto all = admissible(wT, wN, rc);
    j["admissible"] = all.admissible;
    if (a.measure) {
        std::vector<double> lo = a.lo.empty() ? std::vector<double>(wT.size(), 0.5) : parse_list(a.lo, "--lo");
        std::vector<double> hi = a.hi.empty() ? std::vector<double>(wT.size(), 1.5) : parse_list(a.hi, "--hi");
        if (lo.size() != wT.size() || hi.size() != wT.size()) throw ConfigError("--lo/--hi need one entry per excited mode");
        const NormalProvider normal = [&](const std::vector<double>&) { return wN; };
        const auto est = measure_estimate(lo, hi, normal, rc, a.samples, a.seed);
        j["config"]["measure"] = {{"lo", lo}, {"hi", hi}, {"samples", a.samples}, {"seed", a.seed}};
        j["measure"] = {{"fraction", est.fraction},
                        {"ci95", est.ci95},
                        {"failures", est.failures},
                        {"samples", est.samples},
                        {"analytic_bound", analytic_measure_bound(lo, hi, wN, rc)}};
    }
    emit(a.out, j.dump(1) + "\n");
    return kOk;
}

// ---- glue-check ----

struct GlueArgs {
    std::string solution;
    int N = 40;
    int K = 4;
    std::string out;
};

int cmd_glue_check(const GlueArgs& a) {
    const Solution sol = load_solution(a.solution);
    GlueConfig gc;
    gc.K = a.K;
    const auto L = assemble_L(sol.model, sol.zhat, sol.omega_star, Box::centered(sol.model.m(), a.N));
    const auto t0 = std::chrono::steady_clock::now();
    const Eigen::MatrixXd dense = L.M.partialPivLu().inverse();
    const double dense_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto g = glue_inverse(L, gc);
    const double rel = (g.inverse - dense).cwiseAbs().maxCoeff() / dense.cwiseAbs().maxCoeff();
    const json j = {{"version", kVersion},
                    {"config", {{"command", "glue-check"}, {"solution", a.solution}, {"N", a.N}, {"K", a.K}}},
                    {"sites", L.rows.size()},
                    {"residual", g.residual},
                    {"relative_error", rel},
                    {"glue_seconds", g.seconds},
                    {"dense_seconds", dense_seconds}};
    emit(a.out, j.dump(1) + "\n");
    return kOk;
}

// ---- verify ----

struct VerifyArgs {
    std::string solution;
    double t1 = 20.0;
    int points = 2001;
    double rk4_t = 10.0;
    double dt = 1e-4;
    bool rk4 = false;
    std::string out;
};

int cmd_verify(const VerifyArgs& a) {
    const Solution sol = load_solution(a.solution);
    const auto res = ode_residual(sol.model, sol.zhat, sol.omega_star, linspace(0.0, a.t1, a.points));
    json j = {{"version", kVersion},
              {"config", {{"command", "verify"}, {"solution", a.solution}, {"t1", a.t1}, {"points", a.points}}},
              {"max_residual", res.max},
              {"mean_residual", res.mean}};
    if (a.rk4) {
        cvec z0;
        synthesize_at(sol.zhat, sol.omega_star, 0.0, z0);
        const int stride = std::max(1, static_cast<int>(std::lround(0.01 / a.dt)));
        const auto ref = reference_integrate(sol.model, z0, a.rk4_t, a.dt, stride);
        const auto syn = synthesize(sol.zhat, sol.omega_star, ref.trajectory.times);
        double mx = 0.0;
        for (double e : compare_trajectory(syn, ref.trajectory)) mx = std::max(mx, e);
        j["config"]["rk4"] = {{"t_end", a.rk4_t}, {"dt", a.dt}};
        j["rk4_max_deviation"] = mx;
        j["rk4_energy_drift"] = ref.energy_drift;
    }
    emit(a.out, j.dump(1) + "\n");
    std::cerr << "max ODE residual " << fmt17(res.max) << "\n";
    return kOk;
}

// ---- models ----

int cmd_models(int n) {
    json j = {{"version", kVersion}, {"models", json::array()}};
    j["models"].push_back(model_to_json(henon_heiles()));
    j["models"].push_back(model_to_json(fpu_beta(n, 1.0)));
    std::cout << j.dump(1) << "\n";
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasi-periodic torus solver"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    SolveArgs solve;
    auto* s = app.add_subcommand("solve", "run the Newton scheme and write solution.json, convergence.csv, conditions.csv");
    solve.model.add(s);
    s->add_option("--schedule", solve.schedule, "comma-separated box radii");
    s->add_option("--rmax", solve.rmax, "maximum number of iterations")->capture_default_str();
    s->add_option("--max-radius", solve.max_radius, "cap on every radius (default 16 when two or more modes are excited, else none)");
    s->add_option("--tol", solve.tol, "stop when ||F|| falls below this (default 1e-12, or 1e-10 with two or more excited modes)");
    s->add_option("--b-variant", solve.b_variant, "chain_rule or literal")->capture_default_str();
    s->add_flag("--no-conditions", solve.no_conditions, "skip the per-step implementation-condition diagnostics");
    s->add_option("--tau", solve.tau)->capture_default_str();
    s->add_option("--gamma", solve.gamma)->capture_default_str();
    s->add_option("--M", solve.M)->capture_default_str();
    s->add_option("--out", solve.out, "output directory")->capture_default_str();

    TrajectoryArgs traj;
    auto* t = app.add_subcommand("trajectory", "sample a solution on a time grid (CSV: t, x_j, y_j, residual)");
    t->add_option("--solution", traj.solution)->required();
    t->add_option("--t0", traj.t0)->capture_default_str();
    t->add_option("--t1", traj.t1)->capture_default_str();
    t->add_option("--points", traj.points)->capture_default_str();
    t->add_option("--times", traj.times, "explicit comma-separated times (overrides the grid)");
    t->add_option("--out", traj.out, "CSV path, or - for stdout")->capture_default_str();
    t->add_option("--markers-out", traj.markers_out, "also write the points t = 0, 10, 20 here");

    ResonanceArgs reso;
    auto* r = app.add_subcommand("resonance", "non-resonance report and optional Monte Carlo measure estimate");
    reso.model.add(r);
    r->add_option("--tau", reso.tau)->capture_default_str();
    r->add_option("--gamma", reso.gamma)->capture_default_str();
    r->add_option("--M", reso.M)->capture_default_str();
    r->add_flag("--measure", reso.measure);
    r->add_option("--lo", reso.lo);
    r->add_option("--hi", reso.hi);
    r->add_option("--samples", reso.samples)->capture_default_str();
    r->add_option("--seed", reso.seed)->capture_default_str();
    r->add_option("--out", reso.out);

    GlueArgs glue;
    auto* g = app.add_subcommand("glue-check", "compare the glued inverse with a dense inverse");
    g->add_option("--solution,--model-state", glue.solution)->required();
    g->add_option("--N", glue.N)->capture_default_str();
    g->add_option("--K", glue.K)->capture_default_str();
    g->add_option("--out", glue.out);

    VerifyArgs ver;
    auto* v = app.add_subcommand("verify", "Hamilton-equation residual of a solution");
    v->add_option("--solution", ver.solution)->required();
    v->add_option("--t1", ver.t1)->capture_default_str();
    v->add_option("--points", ver.points)->capture_default_str();
    v->add_flag("--rk4", ver.rk4, "also compare against an RK4 reference");
    v->add_option("--rk4-t", ver.rk4_t)->capture_default_str();
    v->add_option("--dt", ver.dt)->capture_default_str();
    v->add_option("--out", ver.out);

    int models_n = 3;
    auto* mo = app.add_subcommand("models", "print the built-in models");
    mo->add_option("--n", models_n)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        apply_thread_cap();
        if (*s) return cmd_solve(solve);
        if (*t) return cmd_trajectory(traj);
        if (*r) return cmd_resonance(reso);
        if (*g) return cmd_glue_check(glue);
        if (*v) return cmd_verify(ver);
        if (*mo) return cmd_models(models_n);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailed;
    }
    return kConfig;
}
