// Command-line front end: equilibrium solves, continuation, linearization,
// master-equation residuals, parameter sweeps, the decay experiment, and the
// acceptance suite. Configuration comes from a key=value file plus --set
// overrides; outputs are CSV tables and a JSON summary per run.

#include "CLI11.hpp"
#include "json.hpp"

#include "mmfg/acceptance.hpp"
#include "mmfg/config.hpp"
#include "mmfg/continuation.hpp"
#include "mmfg/coupled_solver.hpp"
#include "mmfg/experiments.hpp"
#include "mmfg/serialize.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace mmfg;
namespace fs = std::filesystem;
using nlohmann::json;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "key=value configuration file");
    cmd->add_option("--set", args.sets, "inline override key=value (repeatable)");
    cmd->add_option("--out", args.out_dir, "output directory");
}

ExperimentConfig load_config(const CommonArgs& args,
                             const std::string& default_model = "monotone-conv") {
    ExperimentConfig cfg;
    cfg.model_name = default_model;
    std::map<std::string, std::string> kv;
    if (!args.config_path.empty()) kv = parse_key_value_file(args.config_path);
    for (const auto& s : args.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got: " + s);
        kv[s.substr(0, eq)] = s.substr(eq + 1);
    }
    cfg.out_dir = args.out_dir;
    cfg.apply(kv);
    fs::create_directories(cfg.out_dir);
    return cfg;
}

const char* status_name(SolveStatus s) {
    switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::NoContraction: return "no-contraction";
    case SolveStatus::TruncationViolated: return "truncation-violated";
    }
    return "unknown";
}

json solver_summary(const ExperimentConfig& cfg, const ModelSpec& model) {
    json j;
    j["model"] = model.name;
    j["sigma0"] = model.sigma0;
    j["T"] = model.T;
    j["grid_n"] = cfg.grid_n;
    j["tree_K"] = cfg.tree_depth;
    j["substeps"] = cfg.solver.substeps;
    j["inner_tol"] = cfg.solver.inner_tol;
    j["outer_tol"] = cfg.solver.outer_tol;
    return j;
}

void dump_tree_csv(const std::string& path, const NoiseTree& tree, const MajorTriple& major) {
    std::ofstream os(path);
    os << "level,path_bits,B0,X0,Y0,Z0\n" << std::setprecision(17);
    for (int level = 0; level <= tree.depth; ++level) {
        for (NodeId p = 0; p < tree.level_count(level); ++p) {
            NodeId id = tree.id(level, p);
            os << level << ',' << p << ',' << tree.brownian_at(id) << ',' << major.X0[id]
               << ',' << major.Y0[id] << ','
               << (tree.is_leaf(id) ? 0.0 : major.Z0[id]) << '\n';
        }
    }
}

void dump_node_fields(const std::string& dir, const NoiseTree& tree,
                      const MinorSolution& minor) {
    fs::create_directories(dir);
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        write_field_csv(dir + "/mu_" + std::to_string(id) + ".csv", minor.mu[id]);
        write_field_binary(dir + "/mu_" + std::to_string(id) + ".mmfg", minor.mu[id]);
        write_field_csv(dir + "/u_" + std::to_string(id) + ".csv", minor.u[id]);
    }
}

/// Loads a per-node density dump (mu_<id>.mmfg files) as a tree process.
TreeProcess<DensityField> load_mu_tree(const std::string& dir, const NoiseTree& tree,
                                       const PeriodicGrid& grid) {
    TreeProcess<DensityField> mu(tree, DensityField::uniform(grid));
    for (NodeId id = 0; id < tree.node_count(); ++id) {
        ScalarField f = read_field_binary(dir + "/mu_" + std::to_string(id) + ".mmfg");
        mu[id] = DensityField::from_masses(f.grid, f.values);
    }
    return mu;
}

int cmd_solve(const CommonArgs& args, bool dump_fields) {
    ExperimentConfig cfg = load_config(args);
    ModelSpec model = cfg.make();
    PeriodicGrid grid(cfg.grid_n);
    NoiseTree tree(cfg.tree_depth, model.T);
    EquilibriumSolution sol =
        solve_equilibrium(model, cfg.x0, DensityField::uniform(grid), tree, cfg.solver);

    json j = solver_summary(cfg, model);
    j["status"] = status_name(sol.status);
    j["outer_iterations"] = sol.outer_iterations;
    j["outer_residuals"] = sol.outer_residuals;
    j["contraction_ratios"] = sol.contraction_ratios;
    j["Y0_root"] = sol.major.Y0[0];
    j["trunc_radius"] = sol.trunc_radius_used;
    auto gd = gradient_diagnostic(sol.minor);
    j["sup_grad_u"] = gd.sup_grad_u;
    j["sup_higher_differences"] = gd.sup_higher;
    j["v0_bmo"] = v0_bmo_diagnostic(sol.minor, tree, model.sigma0);

    dump_tree_csv(cfg.out_dir + "/major_tree.csv", tree, sol.major);
    if (dump_fields) dump_node_fields(cfg.out_dir + "/fields", tree, sol.minor);
    std::ofstream(cfg.out_dir + "/solve_summary.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return sol.converged() ? 0 : 1;
}

int cmd_minor_solve(const CommonArgs& args, bool dump_fields) {
    ExperimentConfig cfg = load_config(args);
    ModelSpec model = cfg.make();
    PeriodicGrid grid(cfg.grid_n);
    NoiseTree tree(cfg.tree_depth, model.T);
    TreeProcess<double> X0 = simulate_major_forward(
        cfg.x0, TreeProcess<double>(tree, 0.0), model.sigma0, tree);
    MinorSolution minor =
        solve_minor(X0, DensityField::uniform(grid), model, tree, cfg.solver);

    json j = solver_summary(cfg, model);
    j["status"] = status_name(minor.status);
    j["inner_iterations"] = minor.inner_iterations;
    j["inner_residuals"] = minor.inner_residuals;
    auto gd = gradient_diagnostic(minor);
    j["sup_grad_u"] = gd.sup_grad_u;
    j["sup_higher_differences"] = gd.sup_higher;
    j["v0_bmo"] = v0_bmo_diagnostic(minor, tree, model.sigma0);
    if (dump_fields) dump_node_fields(cfg.out_dir + "/fields", tree, minor);
    std::ofstream(cfg.out_dir + "/minor_summary.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return minor.converged() ? 0 : 1;
}

int cmd_major_solve(const CommonArgs& args, const std::string& mu_tree_dir) {
    ExperimentConfig cfg = load_config(args);
    ModelSpec model = cfg.make();
    PeriodicGrid grid(cfg.grid_n);
    NoiseTree tree(cfg.tree_depth, model.T);
    TreeProcess<DensityField> mu(tree, DensityField::uniform(grid));
    if (!mu_tree_dir.empty()) {
        mu = load_mu_tree(mu_tree_dir, tree, grid);
    } else {
        // no serialized population given: run the minor solver first
        // against a driftless major trajectory
        TreeProcess<double> X0 = simulate_major_forward(
            cfg.x0, TreeProcess<double>(tree, 0.0), model.sigma0, tree);
        MinorSolution minor =
            solve_minor(X0, DensityField::uniform(grid), model, tree, cfg.solver);
        mu = minor.mu;
    }
    MajorTriple major = solve_major_fbsde(
        [&mu](NodeId id) -> const DensityField& { return mu[id]; }, model, tree,
        cfg.x0, cfg.solver);

    json j = solver_summary(cfg, model);
    j["status"] = status_name(major.status);
    j["picard_residuals"] = major.picard_residuals;
    j["Y0_root"] = major.Y0[0];
    j["Z0_root"] = major.Z0[0];
    dump_tree_csv(cfg.out_dir + "/major_tree.csv", tree, major);
    std::ofstream(cfg.out_dir + "/major_summary.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return major.converged() ? 0 : 1;
}

int cmd_continue(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    ModelSpec model = cfg.make();
    PeriodicGrid grid(cfg.grid_n);
    ContinuationResult res = solve_by_continuation(model, cfg.x0, DensityField::uniform(grid),
                                                   cfg.solver, cfg.continuation);
    json j = solver_summary(cfg, model);
    j["status"] = status_name(res.status);
    j["windows"] = res.windows;
    j["window_length"] = res.delta;
    j["halvings"] = res.halvings;
    j["Y0_root"] = res.Y0_root;
    j["sup_grad_u"] = res.sup_grad_u;
    j["v0_bmo_total"] = res.v0_bmo_total;
    j["major_bmo_total"] = res.major_bmo_total;
    std::ofstream(cfg.out_dir + "/continuation_summary.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return res.converged() ? 0 : 1;
}

int cmd_linearize(const CommonArgs& args, double dx0) {
    ExperimentConfig cfg = load_config(args);
    ModelSpec model = cfg.make();
    PeriodicGrid grid(cfg.grid_n);
    NoiseTree tree(cfg.tree_depth, model.T);
    EquilibriumSolution base =
        solve_equilibrium(model, cfg.x0, DensityField::uniform(grid), tree, cfg.solver);
    if (!base.converged()) {
        std::cerr << "base equilibrium: " << status_name(base.status) << '\n';
        return 1;
    }
    LinearDirection dir;
    dir.dx0 = dx0;
    dir.dmu = SignedMeasure(grid);
    LinearizedSolution lin = solve_linearized(base, dir, model, tree, cfg.solver);

    json j = solver_summary(cfg, model);
    j["status"] = status_name(lin.status);
    j["iterations"] = lin.iterations;
    j["direction_dx0"] = dir.dx0;
    j["dY0_root"] = lin.dY0[0];
    j["dZ0_root"] = lin.dZ0[0];
    std::ofstream(cfg.out_dir + "/linearize_summary.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return lin.converged() ? 0 : 1;
}

int cmd_residual(const CommonArgs& args, double eps_mu, double h_x0) {
    ExperimentConfig cfg = load_config(args);
    ModelSpec model = cfg.make();
    PeriodicGrid grid(cfg.grid_n);
    MasterField mf(model, grid, cfg.solver, cfg.tree_depth);
    ResidualConfig rc;
    rc.eps_mu = eps_mu;
    rc.h_x0 = h_x0;
    auto res = master_equation_residual(mf, 0.5 * model.T, cfg.x0,
                                        DensityField::uniform(grid), rc);
    json j = solver_summary(cfg, model);
    j["res_major"] = res.res_major;
    j["res_minor_sup"] = res.res_minor_sup;
    j["eps_mu"] = rc.eps_mu;
    j["h_x0"] = rc.h_x0;
    write_field_csv(cfg.out_dir + "/res_minor.csv", res.res_minor);
    std::ofstream(cfg.out_dir + "/residual_summary.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_sweep_sigma(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    SigmaSweepReport rep = run_sigma_sweep(cfg);
    write_csv(rep, cfg.out_dir + "/sigma_sweep.csv");
    json j;
    j["rows"] = json::array();
    for (const auto& r : rep.rows)
        j["rows"].push_back({{"sigma0", r.sigma0},
                             {"max_ratio", r.max_ratio},
                             {"spread", r.spread},
                             {"iterations", r.iterations},
                             {"error", r.error}});
    j["spread_weakly_decreasing"] = rep.spread_weakly_decreasing();
    std::ofstream(cfg.out_dir + "/sigma_sweep.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_sweep_t(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args, "assumption-b");
    TUniformityReport rep = run_t_uniformity(cfg);
    write_csv(rep, cfg.out_dir + "/t_uniformity.csv");
    json j;
    j["rows"] = json::array();
    for (const auto& r : rep.rows)
        j["rows"].push_back({{"T", r.T},
                             {"sup_grad_u", r.sup_grad_u},
                             {"v0_bmo", r.v0_bmo},
                             {"major_bmo", r.major_bmo},
                             {"w0_sup_grad", r.w0_sup_grad},
                             {"lipschitz_U0", r.lipschitz_U0},
                             {"error", r.error}});
    j["band_sup_grad_u"] = rep.band(&TUniformityRow::sup_grad_u);
    std::ofstream(cfg.out_dir + "/t_uniformity.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return 0;
}

int cmd_decay(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args);
    PeriodicGrid grid(std::max(cfg.grid_n, 64));
    ScalarField b(grid);
    DecayReport rep = run_decay_test(grid, b);
    json j;
    j["gamma_transport"] = rep.gamma_transport;
    j["gamma_conservation"] = rep.gamma_conservation;
    j["r2_transport"] = rep.r2_transport;
    j["r2_conservation"] = rep.r2_conservation;
    j["fit_ok"] = rep.fit_ok();
    std::ofstream(cfg.out_dir + "/decay_summary.json") << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Major-minor mean field game solver on the 1-D torus"};
    app.require_subcommand(1);

    CommonArgs a_solve, a_minor, a_major, a_cont, a_lin, a_res, a_ssig, a_st, a_decay, a_acc;
    bool dump_fields_solve = false, dump_fields_minor = false;
    double lin_dx0 = 1.0, res_eps = 2e-2, res_h0 = 2e-2;

    auto* c_solve = app.add_subcommand("solve", "coupled equilibrium on [0, T]");
    add_common(c_solve, a_solve);
    c_solve->add_flag("--dump-fields", dump_fields_solve, "write per-node field CSVs");

    auto* c_minor = app.add_subcommand("minor-solve", "minor system for a driftless major");
    add_common(c_minor, a_minor);
    c_minor->add_flag("--dump-fields", dump_fields_minor, "write per-node field CSVs");

    std::string mu_tree_dir;
    auto* c_major = app.add_subcommand(
        "major-solve", "major FBSDE from a serialized mu-tree or a fresh minor solve");
    add_common(c_major, a_major);
    c_major->add_option("--mu-tree", mu_tree_dir,
                        "directory with per-node mu_<id>.mmfg density dumps");

    auto* c_cont = app.add_subcommand("continue", "time continuation over windows");
    add_common(c_cont, a_cont);

    auto* c_lin = app.add_subcommand("linearize", "linearized system around an equilibrium");
    add_common(c_lin, a_lin);
    c_lin->add_option("--dx0", lin_dx0, "x0 component of the direction");

    auto* c_res = app.add_subcommand("residual", "master-equation residual at (T/2, x0, uniform)");
    add_common(c_res, a_res);
    c_res->add_option("--eps-mu", res_eps, "flat-derivative bump size");
    c_res->add_option("--h-x0", res_h0, "x0 finite-difference step");

    auto* c_ssig = app.add_subcommand("sweep-sigma", "multi-start stability across sigma0");
    add_common(c_ssig, a_ssig);

    auto* c_st = app.add_subcommand("sweep-T", "T-uniform diagnostics (Assumption B)");
    add_common(c_st, a_st);

    auto* c_dec = app.add_subcommand("decay", "transport-diffusion decay rates");
    add_common(c_dec, a_decay);

    auto* c_acc = app.add_subcommand("accept", "run the acceptance suite");
    add_common(c_acc, a_acc);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_solve->parsed()) return cmd_solve(a_solve, dump_fields_solve);
        if (c_minor->parsed()) return cmd_minor_solve(a_minor, dump_fields_minor);
        if (c_major->parsed()) return cmd_major_solve(a_major, mu_tree_dir);
        if (c_cont->parsed()) return cmd_continue(a_cont);
        if (c_lin->parsed()) return cmd_linearize(a_lin, lin_dx0);
        if (c_res->parsed()) return cmd_residual(a_res, res_eps, res_h0);
        if (c_ssig->parsed()) return cmd_sweep_sigma(a_ssig);
        if (c_st->parsed()) return cmd_sweep_t(a_st);
        if (c_dec->parsed()) return cmd_decay(a_decay);
        if (c_acc->parsed()) {
            std::filesystem::create_directories(a_acc.out_dir);
            return mmfg::run_all(a_acc.out_dir, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
