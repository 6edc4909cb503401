#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qlt/config.hpp"
#include "qlt/errors.hpp"
#include "qlt/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{
        "Density-matrix propagation of a damped harmonic oscillator:\n"
        "Lagrangian quantum trajectories with an Eulerian cross-check."};

    std::string config_path;
    std::vector<std::string> overrides;
    std::string mode;
    std::string out_dir;
    long seed = 0;
    bool quiet = false;
    int threads = 0;

    app.add_option("--config", config_path, "Key-value config file");
    app.add_option("--set", overrides,
                   "Override one key, e.g. --set physical.gamma_over_omega=0.25"
                   " (repeatable)");
    app.add_option("--mode", mode, "trajectory, oracle, or both")
        ->check(CLI::IsMember({"trajectory", "oracle", "both"}));
    app.add_option("--out-dir", out_dir, "Output directory");
    app.add_option("--seed", seed,
                   "Reserved; the dynamics is deterministic and ignores it");
    app.add_option("--threads", threads, "Worker thread count (0 = hardware)");
    app.add_flag("--quiet", quiet, "Suppress progress output");

    CLI11_PARSE(app, argc, argv);

    try {
        qlt::RunConfig cfg;
        if (!config_path.empty()) cfg = qlt::parse_config(config_path);
        for (const std::string& kv : overrides) qlt::apply_override(cfg, kv);
        if (!mode.empty()) qlt::apply_override(cfg, "run.mode=" + mode);
        if (!out_dir.empty()) cfg.output.out_dir = out_dir;
        if (threads > 0) cfg.run.threads = threads;
        qlt::validate(cfg);
        qlt::run(cfg, quiet);
        return 0;
    } catch (const qlt::NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const qlt::ParseError& e) {
        if (e.line > 0)
            std::fprintf(stderr, "config error: %s (line %d, column %d)\n",
                         e.what(), e.line, e.column);
        else
            std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const qlt::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
