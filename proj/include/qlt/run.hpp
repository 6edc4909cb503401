#pragma once

#include <string>
#include <vector>

#include "qlt/config.hpp"
#include "qlt/observables.hpp"

namespace qlt {

// What a run measured, kept in memory for callers that want the numbers
// without re-reading the CSV files.
struct RunSummary {
    RunMode mode = RunMode::trajectory;
    std::vector<MomentRecord> trajectory_series;
    std::vector<MomentRecord> oracle_series;
    std::vector<DiagonalRow> diagonal;  // trajectory legs only
    // per-time relative differences, filled when both legs ran
    double max_rel_xi_peak = 0.0;
    double max_rel_sigma_xi = 0.0;
    double max_rel_sigma_eta = 0.0;
    double hermiticity = 0.0;  // oracle legs only
    long remesh_count = 0;
    double wall_seconds = 0.0;
};

// Executes the configured mode(s) and writes timeseries.csv,
// trajectories.csv, snapshot_<n>.csv, run_manifest.txt (and, when both legs
// run, oracle_timeseries.csv and comparison.csv) under cfg.output.out_dir.
// All file quantities are in reduced units: t/tau, lengths/sigma0,
// velocities*tau/sigma0, A/hbar, q_pot/(hbar*omega). Throws ConfigError or
// NumericError; the CLI maps these to exit codes 1 and 2.
RunSummary run(const RunConfig& cfg, bool quiet = false);

}  // namespace qlt
