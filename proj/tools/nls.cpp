#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nls/io.hpp"

using nls::io::RunConfig;

namespace {

// A config file is applied before flag parsing so explicit flags override it.
// The file mirrors the flag names: one key=value per line, '#' comments.
bool preload_config(int argc, char** argv, RunConfig& cfg) {
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        std::string path;
        if (arg == "--config" && i + 1 < argc)
            path = argv[i + 1];
        else if (arg.rfind("--config=", 0) == 0)
            path = arg.substr(9);
        if (path.empty()) continue;
        try {
            cfg = nls::io::load_config(path);
        } catch (const nls::io::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return false;
        }
    }
    return true;
}

void add_common(CLI::App* c, RunConfig& cfg, std::string& config_file) {
    c->add_option("--config", config_file, "flat key=value config file");
    c->add_option("--outdir", cfg.outdir, "output directory");
    c->add_option("--cache-dir", cfg.cache_dir, "profile cache ($NLS_CACHE_DIR, .nls-cache)");
}

void add_problem(CLI::App* c, RunConfig& cfg) {
    c->add_option("--N", cfg.N, "dimension (>= 3)");
    c->add_option("--q", cfg.q, "subcritical exponent, 2 < q < 2N/(N-2)");
    c->add_option("--lambda", cfg.lambda, "frequency");
    c->add_flag_callback(
        "--no-crit", [&cfg] { cfg.crit = false; }, "drop the critical term");
}

void add_heights(CLI::App* c, RunConfig& cfg) {
    c->add_option("--d-min", cfg.d_min, "lowest shooting height (0: derived)");
    c->add_option("--d-max", cfg.d_max, "highest shooting height (0: derived)");
    c->add_option("--n-scan", cfg.n_scan, "heights in the classification scan");
    c->add_option("--ctol", cfg.ctol, "certificate acceptance tolerance");
}

} // namespace

int main(int argc, char** argv) {
    RunConfig cfg;
    if (!preload_config(argc, argv, cfg)) return 2;

    CLI::App app{"radial and partially confined Schrodinger ground states"};
    app.require_subcommand(0, 1);
    std::string config_file;
    add_common(&app, cfg, config_file);

    CLI::App* ground = app.add_subcommand(
        "ground-state", "least-energy radial solution at one coupling, with profile");
    add_common(ground, cfg, config_file);
    add_problem(ground, cfg);
    add_heights(ground, cfg);
    ground->add_option("--t", cfg.t, "subcritical coupling");
    ground->callback([&] { cfg.command = "ground-state"; });

    CLI::App* scan = app.add_subcommand(
        "scan", "all certified positive radial solutions at one coupling");
    add_common(scan, cfg, config_file);
    add_problem(scan, cfg);
    add_heights(scan, cfg);
    scan->add_option("--t", cfg.t, "subcritical coupling");
    scan->callback([&] { cfg.command = "scan"; });

    CLI::App* sweep = app.add_subcommand(
        "sweep", "ground level m(t) and solution branches over a coupling grid");
    add_common(sweep, cfg, config_file);
    add_problem(sweep, cfg);
    add_heights(sweep, cfg);
    sweep->add_option("--t-min", cfg.t_min, "smallest coupling");
    sweep->add_option("--t-max", cfg.t_max, "largest coupling");
    sweep->add_option("--points", cfg.points, "grid size");
    sweep->add_option("--workers", cfg.workers, "solver threads");
    sweep->callback([&] { cfg.command = "sweep"; });

    CLI::App* reduce = app.add_subcommand(
        "reduce", "normalized solutions of prescribed mass via the mu_t curve");
    add_common(reduce, cfg, config_file);
    add_problem(reduce, cfg);
    add_heights(reduce, cfg);
    reduce->add_option("--a", cfg.a, "prescribed mass, ||u||_2^2 = a^2");
    reduce->add_option("--mu", cfg.mu, "requested coupling (0: curve only)");
    reduce->add_option("--t-min", cfg.t_min, "curve window start");
    reduce->add_option("--t-max", cfg.t_max, "curve window end");
    reduce->add_option("--points", cfg.points, "curve samples");
    reduce->add_option("--workers", cfg.workers, "solver threads");
    reduce->callback([&] { cfg.command = "reduce"; });

    CLI::App* confine = app.add_subcommand(
        "confine", "ground states under the two-direction quadratic trap");
    add_common(confine, cfg, config_file);
    confine->add_option("--p", cfg.p, "nonlinearity exponent, 2 < p < 6");
    confine->add_option("--t", cfg.t, "trap scale (single solve)");
    confine->add_option("--t-min", cfg.t_min, "sweep start");
    confine->add_option("--t-max", cfg.t_max, "sweep end");
    confine->add_option("--points", cfg.points, "sweep grid size");
    confine->add_option("--ns", cfg.ns, "radial cells (0: default)");
    confine->add_option("--nz", cfg.nz, "axial cells, even (0: default)");
    confine->add_option("--S", cfg.S, "radial box size (0: default)");
    confine->add_option("--Z", cfg.Z, "axial half-width (0: default)");
    confine->add_option("--tol", cfg.tol, "Euler-Lagrange residual tolerance");
    confine->add_flag_callback(
        "--cold-check", [&cfg] { cfg.cold_check = true; },
        "compare warm-started and cold solves at every grid point");
    confine->callback([&] { cfg.command = "confine"; });

    CLI::App* verify =
        app.add_subcommand("verify", "built-in certificate suite, PASS/FAIL per check");
    add_common(verify, cfg, config_file);
    verify->callback([&] { cfg.command = "verify"; });

    CLI11_PARSE(app, argc, argv);

    if (cfg.command.empty()) {
        std::cerr << "no command: give a subcommand or a config file with command=...\n";
        std::cerr << app.help();
        return 2;
    }
    return nls::io::run(cfg);
}
