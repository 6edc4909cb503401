#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qlt/dynamics.hpp"
#include "qlt/params.hpp"

namespace qlt {

enum class RunMode { trajectory, oracle, both };

// Flat dotted-key configuration. Every field has a default; parse_config only
// overrides what the file mentions and rejects keys it does not know.
struct RunConfig {
    struct {
        RunMode mode = RunMode::trajectory;
        par::Mode parallel = par::Mode::openmp;
        int threads = 0;  // 0 keeps the hardware default
    } run;

    struct {
        double mass = 1.0;
        double omega = 1.0;
        double gamma_over_omega = 1.0;
        double kT_over_hbar_omega = 2.5;
        double hbar = 1.0;
        bool renormalize = true;
    } physical;

    struct {
        double xi0_over_sigma0 = 2.0;
        double sigma_init_over_sigma0 = 1.0;
    } initial;

    struct {
        int n_xi = 41;
        int n_eta = 41;
        double half_width_xi_over_sigma0 = 5.0;
        double half_width_eta_over_sigma0 = 5.0;
    } grid;

    struct {
        double dt_over_tau = 1.0 / 1000.0;
        double t_end_over_tau = 3.0;
        Scheme scheme = Scheme::RK4_FROZEN_FIELDS;
        bool semiclassical = false;
    } stepping;

    struct {
        int quantum_force_sign = 1;
    } dynamics;

    struct {
        int degree_g = 2;
        int degree_v = 3;
        int stencil_min = 12;
        double bandwidth_factor = 1.5;
        double cond_threshold = 1e10;
        bool single_stage_grad_q = false;
    } mwls;

    struct {
        bool enabled = true;
        int interval_steps = 20;
        double distortion_threshold = 2.0;
        bool economy_mode = true;
        bool adapt_domain = true;
        double smooth_bandwidth = 3.0;  // resampling kernel, in node spacings
    } remesh;

    struct {
        bool enabled = true;
        int nx = 161;
        int ny = 161;
        double box_over_sigma0 = 10.0;  // half-width of the square (x, y) box
        double mask_rate_over_omega = 5.0;
        double dt_safety = 0.85;  // fraction of the RK4 stability bound
    } oracle;

    struct {
        std::string out_dir = "out";
        int snapshot_every_steps = 250;  // 0 writes only the final snapshot
        int record_every_steps = 1;
    } output;
};

// Parses `key = value` lines (# comments, blank lines allowed). Unknown keys
// raise UnknownKey, malformed lines ParseError, bad values RangeError.
RunConfig parse_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, RunConfig base = {});

// Applies one `key=value` override (the --set flag grammar).
void apply_override(RunConfig& cfg, const std::string& assignment);

// Cross-field checks run after parsing and after overrides.
void validate(const RunConfig& cfg);

// Every key with its current value, in canonical order; doubles round-trip.
std::vector<std::pair<std::string, std::string>> to_key_values(const RunConfig& cfg);

const char* to_string(RunMode m);

// Physical parameter block in simulation units (sigma0, tau derived inside).
PhysicalParams make_params(const RunConfig& cfg);

}  // namespace qlt
