#include "qlt/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "qlt/csv.hpp"
#include "qlt/errors.hpp"

namespace qlt {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    char* end = nullptr;
    const double x = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw RangeError(key + ": cannot parse '" + v + "' as a number");
    return x;
}

int parse_int(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    char* end = nullptr;
    const long x = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw RangeError(key + ": cannot parse '" + v + "' as an integer");
    return static_cast<int>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    const std::string t = trim(v);
    if (t == "true" || t == "1") return true;
    if (t == "false" || t == "0") return false;
    throw RangeError(key + ": expected true/false, got '" + v + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct Entry {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define NUM_ENTRY(key, field)                                              \
    Entry{key,                                                             \
          [](RunConfig& c, const std::string& v) {                         \
              c.field = parse_double(key, v);                              \
          },                                                               \
          [](const RunConfig& c) { return fmt_double(c.field); }}
#define INT_ENTRY(key, field)                                              \
    Entry{key,                                                             \
          [](RunConfig& c, const std::string& v) {                         \
              c.field = parse_int(key, v);                                 \
          },                                                               \
          [](const RunConfig& c) { return std::to_string(c.field); }}
#define BOOL_ENTRY(key, field)                                             \
    Entry{key,                                                             \
          [](RunConfig& c, const std::string& v) {                         \
              c.field = parse_bool(key, v);                                \
          },                                                               \
          [](const RunConfig& c) { return bool_str(c.field); }}

const std::vector<Entry>& table() {
    static const std::vector<Entry> entries = {
        Entry{"run.mode",
              [](RunConfig& c, const std::string& v) {
                  const std::string t = trim(v);
                  if (t == "trajectory") c.run.mode = RunMode::trajectory;
                  else if (t == "oracle") c.run.mode = RunMode::oracle;
                  else if (t == "both") c.run.mode = RunMode::both;
                  else
                      throw RangeError(
                          "run.mode: expected trajectory/oracle/both, got '" +
                          v + "'");
              },
              [](const RunConfig& c) {
                  return std::string(to_string(c.run.mode));
              }},
        Entry{"run.parallel",
              [](RunConfig& c, const std::string& v) {
                  const std::string t = trim(v);
                  if (t == "serial") c.run.parallel = par::Mode::serial;
                  else if (t == "openmp") c.run.parallel = par::Mode::openmp;
                  else
                      throw RangeError(
                          "run.parallel: expected serial/openmp, got '" + v +
                          "'");
              },
              [](const RunConfig& c) {
                  return std::string(c.run.parallel == par::Mode::serial
                                         ? "serial"
                                         : "openmp");
              }},
        INT_ENTRY("run.threads", run.threads),
        NUM_ENTRY("physical.mass", physical.mass),
        NUM_ENTRY("physical.omega", physical.omega),
        NUM_ENTRY("physical.gamma_over_omega", physical.gamma_over_omega),
        NUM_ENTRY("physical.kT_over_hbar_omega", physical.kT_over_hbar_omega),
        NUM_ENTRY("physical.hbar", physical.hbar),
        BOOL_ENTRY("physical.renormalize", physical.renormalize),
        NUM_ENTRY("initial.xi0_over_sigma0", initial.xi0_over_sigma0),
        NUM_ENTRY("initial.sigma_init_over_sigma0",
                  initial.sigma_init_over_sigma0),
        INT_ENTRY("grid.n_xi", grid.n_xi),
        INT_ENTRY("grid.n_eta", grid.n_eta),
        NUM_ENTRY("grid.half_width_xi_over_sigma0",
                  grid.half_width_xi_over_sigma0),
        NUM_ENTRY("grid.half_width_eta_over_sigma0",
                  grid.half_width_eta_over_sigma0),
        NUM_ENTRY("stepping.dt_over_tau", stepping.dt_over_tau),
        NUM_ENTRY("stepping.t_end_over_tau", stepping.t_end_over_tau),
        Entry{"stepping.scheme",
              [](RunConfig& c, const std::string& v) {
                  const std::string t = trim(v);
                  if (t == "rk4") c.stepping.scheme = Scheme::RK4_FROZEN_FIELDS;
                  else if (t == "heun") c.stepping.scheme = Scheme::HEUN;
                  else
                      throw RangeError(
                          "stepping.scheme: expected rk4/heun, got '" + v +
                          "'");
              },
              [](const RunConfig& c) {
                  return std::string(c.stepping.scheme == Scheme::HEUN
                                         ? "heun"
                                         : "rk4");
              }},
        BOOL_ENTRY("stepping.semiclassical", stepping.semiclassical),
        INT_ENTRY("dynamics.quantum_force_sign", dynamics.quantum_force_sign),
        INT_ENTRY("mwls.degree_g", mwls.degree_g),
        INT_ENTRY("mwls.degree_v", mwls.degree_v),
        INT_ENTRY("mwls.stencil_min", mwls.stencil_min),
        NUM_ENTRY("mwls.bandwidth_factor", mwls.bandwidth_factor),
        NUM_ENTRY("mwls.cond_threshold", mwls.cond_threshold),
        BOOL_ENTRY("mwls.single_stage_grad_q", mwls.single_stage_grad_q),
        BOOL_ENTRY("remesh.enabled", remesh.enabled),
        INT_ENTRY("remesh.interval_steps", remesh.interval_steps),
        NUM_ENTRY("remesh.distortion_threshold", remesh.distortion_threshold),
        BOOL_ENTRY("remesh.economy_mode", remesh.economy_mode),
        BOOL_ENTRY("remesh.adapt_domain", remesh.adapt_domain),
        NUM_ENTRY("remesh.smooth_bandwidth", remesh.smooth_bandwidth),
        BOOL_ENTRY("oracle.enabled", oracle.enabled),
        INT_ENTRY("oracle.nx", oracle.nx),
        INT_ENTRY("oracle.ny", oracle.ny),
        NUM_ENTRY("oracle.box_over_sigma0", oracle.box_over_sigma0),
        NUM_ENTRY("oracle.mask_rate_over_omega", oracle.mask_rate_over_omega),
        NUM_ENTRY("oracle.dt_safety", oracle.dt_safety),
        Entry{"output.out_dir",
              [](RunConfig& c, const std::string& v) {
                  c.output.out_dir = trim(v);
              },
              [](const RunConfig& c) { return c.output.out_dir; }},
        INT_ENTRY("output.snapshot_every_steps", output.snapshot_every_steps),
        INT_ENTRY("output.record_every_steps", output.record_every_steps),
    };
    return entries;
}

#undef NUM_ENTRY
#undef INT_ENTRY
#undef BOOL_ENTRY

const Entry* find_entry(const std::string& key) {
    for (const Entry& e : table())
        if (key == e.key) return &e;
    return nullptr;
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value,
            int line) {
    const Entry* e = find_entry(key);
    if (!e)
        throw UnknownKey("unknown config key '" + key + "'" +
                         (line > 0 ? " at line " + std::to_string(line) : ""));
    e->set(cfg, value);
}

}  // namespace

const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::trajectory: return "trajectory";
        case RunMode::oracle: return "oracle";
        case RunMode::both: return "both";
    }
    return "trajectory";
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::size_t hash = raw.find('#');
        std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        if (trim(line).empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            int col = 1;
            while (col <= static_cast<int>(line.size()) &&
                   std::isspace(static_cast<unsigned char>(line[col - 1])))
                ++col;
            throw ParseError("expected 'key = value'", line_no, col);
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ParseError("missing key before '='", line_no, 1);
        assign(base, key, line.substr(eq + 1), line_no);
    }
    validate(base);
    return base;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open config file '" + path + "'", 0, 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ParseError("override must look like key=value, got '" +
                             assignment + "'",
                         0, 0);
    const std::string key = trim(assignment.substr(0, eq));
    if (key.empty())
        throw ParseError("override is missing the key: '" + assignment + "'",
                         0, 0);
    assign(cfg, key, assignment.substr(eq + 1), 0);
}

void validate(const RunConfig& cfg) {
    auto fail = [](const std::string& msg) { throw RangeError(msg); };

    if (cfg.run.threads < 0) fail("run.threads must be >= 0");
    if (!(cfg.physical.mass > 0.0)) fail("physical.mass must be positive");
    if (!(cfg.physical.omega > 0.0)) fail("physical.omega must be positive");
    if (cfg.physical.gamma_over_omega < 0.0)
        fail("physical.gamma_over_omega must be >= 0");
    if (!(cfg.physical.kT_over_hbar_omega > 0.0))
        fail("physical.kT_over_hbar_omega must be positive");
    if (!(cfg.physical.hbar > 0.0)) fail("physical.hbar must be positive");
    if (!(cfg.initial.sigma_init_over_sigma0 > 0.0))
        fail("initial.sigma_init_over_sigma0 must be positive");
    if (cfg.grid.n_xi < 5 || cfg.grid.n_xi % 2 == 0)
        fail("grid.n_xi must be an odd number >= 5");
    if (cfg.grid.n_eta < 5 || cfg.grid.n_eta % 2 == 0)
        fail("grid.n_eta must be an odd number >= 5");
    if (!(cfg.grid.half_width_xi_over_sigma0 > 0.0))
        fail("grid.half_width_xi_over_sigma0 must be positive");
    if (!(cfg.grid.half_width_eta_over_sigma0 > 0.0))
        fail("grid.half_width_eta_over_sigma0 must be positive");
    if (!(cfg.stepping.dt_over_tau > 0.0))
        fail("stepping.dt_over_tau must be positive");
    if (cfg.stepping.dt_over_tau > 1.0 / 200.0 + 1e-15)
        fail("stepping.dt_over_tau must be <= 1/200");
    if (cfg.stepping.t_end_over_tau < 0.0)
        fail("stepping.t_end_over_tau must be >= 0");
    if (cfg.dynamics.quantum_force_sign != 1 &&
        cfg.dynamics.quantum_force_sign != -1)
        fail("dynamics.quantum_force_sign must be 1 or -1");
    if (cfg.mwls.degree_g < 1 || cfg.mwls.degree_g > 7)
        fail("mwls.degree_g must be in [1, 7]");
    if (cfg.mwls.degree_v < 1 || cfg.mwls.degree_v > 7)
        fail("mwls.degree_v must be in [1, 7]");
    if (cfg.mwls.single_stage_grad_q && cfg.mwls.degree_g < 3)
        fail("mwls.single_stage_grad_q needs mwls.degree_g >= 3");
    if (cfg.mwls.stencil_min < 6) fail("mwls.stencil_min must be >= 6");
    if (!(cfg.mwls.bandwidth_factor > 0.0))
        fail("mwls.bandwidth_factor must be positive");
    if (!(cfg.mwls.cond_threshold > 1.0))
        fail("mwls.cond_threshold must be > 1");
    if (cfg.remesh.interval_steps < 1)
        fail("remesh.interval_steps must be >= 1");
    if (!(cfg.remesh.distortion_threshold > 0.0))
        fail("remesh.distortion_threshold must be positive");
    if (!(cfg.remesh.smooth_bandwidth > 0.0))
        fail("remesh.smooth_bandwidth must be positive");
    if (cfg.oracle.nx != cfg.oracle.ny)
        fail("oracle.nx and oracle.ny must match (square grid)");
    if (cfg.oracle.nx < 9) fail("oracle.nx must be >= 9");
    if (!(cfg.oracle.box_over_sigma0 > 0.0))
        fail("oracle.box_over_sigma0 must be positive");
    if (cfg.oracle.mask_rate_over_omega < 0.0)
        fail("oracle.mask_rate_over_omega must be >= 0");
    if (!(cfg.oracle.dt_safety > 0.0) || cfg.oracle.dt_safety > 1.0)
        fail("oracle.dt_safety must be in (0, 1]");
    if (cfg.output.out_dir.empty()) fail("output.out_dir must not be empty");
    if (cfg.output.snapshot_every_steps < 0)
        fail("output.snapshot_every_steps must be >= 0");
    if (cfg.output.record_every_steps < 1)
        fail("output.record_every_steps must be >= 1");
    if (cfg.run.mode == RunMode::oracle && !cfg.oracle.enabled)
        fail("run.mode = oracle conflicts with oracle.enabled = false");

    RawParams raw;
    raw.m = cfg.physical.mass;
    raw.omega = cfg.physical.omega;
    raw.gamma = cfg.physical.gamma_over_omega * cfg.physical.omega;
    raw.kT = cfg.physical.kT_over_hbar_omega * cfg.physical.hbar *
             cfg.physical.omega;
    raw.hbar = cfg.physical.hbar;
    raw.renormalize = cfg.physical.renormalize;
    derived_params(raw);  // throws RangeError if the frequency shift is too big
}

std::vector<std::pair<std::string, std::string>> to_key_values(
    const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    out.reserve(table().size());
    for (const Entry& e : table()) out.emplace_back(e.key, e.get(cfg));
    return out;
}

PhysicalParams make_params(const RunConfig& cfg) {
    RawParams raw;
    raw.m = cfg.physical.mass;
    raw.omega = cfg.physical.omega;
    raw.gamma = cfg.physical.gamma_over_omega * cfg.physical.omega;
    raw.kT = cfg.physical.kT_over_hbar_omega * cfg.physical.hbar *
             cfg.physical.omega;
    raw.hbar = cfg.physical.hbar;
    raw.renormalize = cfg.physical.renormalize;
    return derived_params(raw);
}

}  // namespace qlt
