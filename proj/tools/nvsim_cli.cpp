// nvsim: command-line front end for the NV spin simulator and the design
// calculators. Each subcommand composes a protocol generator (or a design
// module) with the executor and an optional fit, prints a JSON summary on
// stdout and, with --output, writes the full data set atomically.
//
// Exit codes: 0 success, 1 usage error, 2 physics / validation / IO error.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nvsim/nvsim.hpp"

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

/// Malformed flag or flag value; mapped to exit code 1 like CLI11's own
/// parse errors (library exceptions map to 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_full(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Number with an optional SI unit suffix, e.g. "2.87GHz", "40us", "1mT",
/// "3nH". Plain numbers pass through unscaled.
double parse_quantity(const std::string& text) {
  static const std::map<std::string, double> units = {
      {"", 1.0},     {"s", 1.0},    {"ms", 1e-3},  {"us", 1e-6},  {"ns", 1e-9},
      {"Hz", 1.0},   {"kHz", 1e3},  {"MHz", 1e6},  {"GHz", 1e9},  {"T", 1.0},
      {"mT", 1e-3},  {"uT", 1e-6},  {"nT", 1e-9},  {"G", 1e-4},   {"m", 1.0},
      {"mm", 1e-3},  {"um", 1e-6},  {"nm", 1e-9},  {"H", 1.0},    {"mH", 1e-3},
      {"uH", 1e-6},  {"nH", 1e-9},  {"pH", 1e-12}, {"F", 1.0},    {"mF", 1e-3},
      {"uF", 1e-6},  {"nF", 1e-9},  {"pF", 1e-12}, {"W", 1.0},    {"mW", 1e-3},
      {"Ohm", 1.0},  {"kOhm", 1e3},
  };
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin) throw UsageError("expected a number, got '" + text + "'");
  const auto it = units.find(std::string(end));
  if (it == units.end()) throw UsageError("unknown unit suffix in '" + text + "'");
  return v * it->second;
}

nvsim::Vector3d parse_vec3(const std::string& text) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  parts.push_back(cur);
  if (parts.size() != 3) throw UsageError("expected 'x,y,z', got '" + text + "'");
  return {parse_quantity(parts[0]), parse_quantity(parts[1]), parse_quantity(parts[2])};
}

int parse_int(const std::string& text, const char* what) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(text, &used);
  } catch (const std::exception&) {
    throw UsageError(std::string("bad ") + what + " '" + text + "'");
  }
  if (used != text.size()) throw UsageError(std::string("bad ") + what + " '" + text + "'");
  return v;
}

/// Registry of (option, config key, bound variable): values from the flat
/// JSON config file fill in exactly the options the command line left at
/// their defaults, so flags always override the file.
class OptionBindings {
 public:
  CLI::Option* add(CLI::App& cmd, const std::string& flag, std::string& var,
                   const std::string& desc) {
    CLI::Option* opt = cmd.add_option(flag, var, desc)->capture_default_str();
    strings_.push_back({opt, key_of(flag), &var});
    return opt;
  }
  CLI::Option* add(CLI::App& cmd, const std::string& flag, int& var, const std::string& desc) {
    CLI::Option* opt = cmd.add_option(flag, var, desc)->capture_default_str();
    ints_.push_back({opt, key_of(flag), &var});
    return opt;
  }
  CLI::Option* add(CLI::App& cmd, const std::string& flag, double& var,
                   const std::string& desc) {
    CLI::Option* opt = cmd.add_option(flag, var, desc)->capture_default_str();
    doubles_.push_back({opt, key_of(flag), &var});
    return opt;
  }

  void apply_config(const json& cfg) const {
    for (const auto& b : strings_)
      if (b.opt->count() == 0 && cfg.contains(b.key))
        *b.var = cfg.at(b.key).is_string() ? cfg.at(b.key).get<std::string>()
                                           : format_full(cfg.at(b.key).get<double>());
    for (const auto& b : ints_)
      if (b.opt->count() == 0 && cfg.contains(b.key)) *b.var = cfg.at(b.key).get<int>();
    for (const auto& b : doubles_)
      if (b.opt->count() == 0 && cfg.contains(b.key)) *b.var = cfg.at(b.key).get<double>();
  }

 private:
  template <class T>
  struct Binding {
    CLI::Option* opt;
    std::string key;
    T* var;
  };

  /// Config key for a flag: the long name without the leading dashes.
  static std::string key_of(const std::string& flag) {
    const auto pos = flag.rfind("--");
    return pos == std::string::npos ? flag : flag.substr(pos + 2);
  }

  std::vector<Binding<std::string>> strings_;
  std::vector<Binding<int>> ints_;
  std::vector<Binding<double>> doubles_;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  const json cfg = json::parse(nvsim::read_file(path));
  if (!cfg.is_object())
    throw std::invalid_argument("cli: config file must hold a flat JSON object");
  return cfg;
}

/// Seed precedence: explicit flag, then config key, then NVSIM_SEED, then 0.
std::uint64_t resolve_seed(const CLI::Option* opt, std::uint64_t flag_value, const json& cfg) {
  if (opt != nullptr && opt->count() > 0) return flag_value;
  if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("NVSIM_SEED")) {
    char* end = nullptr;
    const std::uint64_t v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw std::invalid_argument("cli: NVSIM_SEED must be an unsigned integer");
    return v;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Shared option blocks

struct PhysicsOpts {
  std::string b_field = "0,0,0";
  std::string axis = "0,0,1";
  std::string d_gs = "2.87GHz";
  std::string e_strain = "0";
  std::string p_quad = "-4.95MHz";
  std::string a_par = "2.16MHz";
  std::string a_perp = "-2.7MHz";
  bool no_hyperfine = false;

  void attach(CLI::App& cmd, OptionBindings& reg) {
    reg.add(cmd, "--b-field", b_field, "magnetic field vector, tesla (components accept units)");
    reg.add(cmd, "--axis", axis, "NV symmetry axis (normalized; ignored by bulk4 / powder)");
    reg.add(cmd, "--d-gs", d_gs, "zero-field splitting");
    reg.add(cmd, "--e-strain", e_strain, "transverse strain splitting E");
    reg.add(cmd, "--p-quad", p_quad, "nuclear quadrupole constant");
    reg.add(cmd, "--a-par", a_par, "axial hyperfine constant");
    reg.add(cmd, "--a-perp", a_perp, "transverse hyperfine constant");
    cmd.add_flag("--no-hyperfine", no_hyperfine,
                 "zero the nuclear terms (bare electron spectrum)");
  }

  nvsim::NVParameters params() const {
    nvsim::NVParameters p;
    p.d_gs = parse_quantity(d_gs);
    p.e_strain = parse_quantity(e_strain);
    p.p_quad = parse_quantity(p_quad);
    p.a_par = parse_quantity(a_par);
    p.a_perp = parse_quantity(a_perp);
    if (no_hyperfine) p.p_quad = p.a_par = p.a_perp = 0.0;
    p.b_field = parse_vec3(b_field);
    const nvsim::Vector3d ax = parse_vec3(axis);
    if (!(ax.norm() > 0.0)) throw UsageError("--axis must not be the zero vector");
    p.nv_axis = ax.normalized();
    p.validate();
    return p;
  }
};

struct RunOpts {
  std::string t1 = "5ms";
  std::string t2_star = "1us";
  std::string t2_echo = "79us";
  double echo_exponent = 1.0;
  int shots = 1000;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string window = "300ns";
  std::string pump = "3us";
  std::string wait = "1us";
  std::string readout = "2us";
  std::string rabi_amp = "1MHz";

  void attach(CLI::App& cmd, OptionBindings& reg) {
    reg.add(cmd, "--t1", t1, "longitudinal relaxation time");
    reg.add(cmd, "--t2-star", t2_star, "free-precession dephasing time");
    reg.add(cmd, "--t2-echo", t2_echo, "echo envelope time constant");
    reg.add(cmd, "--echo-exponent", echo_exponent, "echo envelope stretching exponent");
    reg.add(cmd, "--shots", shots, "photon-counting shots per sweep point (>= 1)");
    seed_opt = cmd.add_option("--seed", seed, "RNG seed (overrides config and NVSIM_SEED)");
    reg.add(cmd, "--window", window, "counting window at the head of the readout");
    reg.add(cmd, "--pump", pump, "polarizing laser pulse length");
    reg.add(cmd, "--wait", wait, "dark settling time after the pump");
    reg.add(cmd, "--readout", readout, "readout laser pulse length");
    reg.add(cmd, "--rabi-amp", rabi_amp, "microwave drive amplitude (Rabi frequency)");
  }

  nvsim::RelaxationParams relax() const {
    nvsim::RelaxationParams r;
    r.t1_s = parse_quantity(t1);
    r.t2_star_s = parse_quantity(t2_star);
    r.t2_echo_s = parse_quantity(t2_echo);
    r.echo_exponent = echo_exponent;
    r.validate();
    return r;
  }

  nvsim::RunOptions options(const json& cfg) const {
    if (shots < 1) throw std::invalid_argument("cli: --shots must be >= 1");
    nvsim::RunOptions o;
    o.shots = shots;
    o.seed = resolve_seed(seed_opt, seed, cfg);
    o.counts_window_s = parse_quantity(window);
    o.compile.default_rabi_hz = parse_quantity(rabi_amp);
    return o;
  }

  nvsim::ProtocolConfig protocol() const {
    nvsim::ProtocolConfig c;
    c.pump_s = parse_quantity(pump);
    c.relax_wait_s = parse_quantity(wait);
    c.readout_s = parse_quantity(readout);
    c.rabi_hz = parse_quantity(rabi_amp);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Small shared steps

/// Frequency of the |0,0> -> |-1,0> electron line for the given parameters;
/// the natural carrier default for the pulsed protocols.
double auto_carrier(const nvsim::NVParameters& p) {
  const auto table = nvsim::transition_frequencies(nvsim::eigensolve(nvsim::build_hamiltonian(p)));
  const std::pair<int, int> zero{0, 0}, minus{-1, 0};
  for (const auto& t : table)
    if ((t.lower == zero && t.upper == minus) || (t.lower == minus && t.upper == zero))
      return t.frequency_hz;
  throw std::runtime_error("cli: no m_s 0 <-> -1 transition at m_I = 0 found");
}

double resolve_carrier(const std::string& freq, const std::string& detune,
                       const nvsim::NVParameters& p) {
  const double base = freq == "auto" ? auto_carrier(p) : parse_quantity(freq);
  return base - parse_quantity(detune);
}

void write_sweep_csv(const std::string& path, const nvsim::SweepRunResult& r) {
  nvsim::CsvTable t;
  t.headers = {r.variable == "f" ? "frequency_hz" : "tau_s", "mean_counts", "sampled_counts"};
  t.columns = {r.x, r.mean_counts, r.sampled_counts};
  nvsim::write_file_atomic(path, nvsim::csv_format(t));
}

json sweep_summary(const char* subcommand, const nvsim::SweepRunResult& r, int shots) {
  return {{"schema_version", kSchemaVersion}, {"subcommand", subcommand},
          {"variable", r.variable},           {"points", r.x.size()},
          {"x_start", r.x.front()},           {"x_stop", r.x.back()},
          {"shots", shots},                   {"seed", r.seed}};
}

nvsim::FitModel parse_model(const std::string& name) {
  if (name == "damped_sin") return nvsim::FitModel::damped_sin();
  if (name == "exp_decay") return nvsim::FitModel::exp_decay();
  if (name == "ramsey_3cos") return nvsim::FitModel::ramsey_3cos();
  if (name == "lorentzian_multi") return nvsim::FitModel::lorentzian_multi(6);
  const std::string prefix = "lorentzian_multi:";
  if (name.rfind(prefix, 0) == 0) {
    const int n = parse_int(name.substr(prefix.size()), "dip count");
    if (n < 1) throw UsageError("lorentzian_multi needs at least one dip");
    return nvsim::FitModel::lorentzian_multi(n);
  }
  throw UsageError("unknown model '" + name +
                   "' (damped_sin | exp_decay | ramsey_3cos | lorentzian_multi[:n])");
}

json parameter_names(const nvsim::FitModel& model) {
  json names = json::array();
  switch (model.id) {
    case nvsim::FitModelId::lorentzian_multi:
      names.push_back("baseline");
      for (int i = 1; i <= model.dips; ++i) {
        names.push_back("center_" + std::to_string(i) + "_hz");
        names.push_back("fwhm_" + std::to_string(i) + "_hz");
        names.push_back("depth_" + std::to_string(i));
      }
      break;
    case nvsim::FitModelId::ramsey_3cos:
      names = {"offset", "amplitude", "t2_star_s", "f1_hz",    "f2_hz",
               "f3_hz",  "phi1_rad",  "phi2_rad",  "phi3_rad"};
      break;
    case nvsim::FitModelId::exp_decay:
      names = {"amplitude", "tau_s", "offset"};
      break;
    case nvsim::FitModelId::damped_sin:
      names = {"amplitude", "tau_s", "f_hz", "phi_rad", "offset"};
      break;
  }
  return names;
}

/// Fit `y(x)` with the model (automatic initial guess) and report it under
/// summary["fit"].
const nvsim::FitResult& attach_fit(json& summary, const nvsim::FitModel& model,
                                   const std::vector<double>& x, const std::vector<double>& y) {
  static nvsim::FitResult result;  // returned by reference for derived values
  const std::vector<double> init = nvsim::initial_guess(model, x, y);
  result = nvsim::fit(model, x, y, init);
  json report = nvsim::fit_report_json(model, result);
  report["parameter_names"] = parameter_names(model);
  summary["fit"] = std::move(report);
  return result;
}

void emit(const json& summary, const std::string& output, const std::string& data) {
  if (!output.empty()) nvsim::write_file_atomic(output, data);
  std::cout << summary.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Subcommand: odmr

struct OdmrCmd {
  CLI::App* cmd = nullptr;
  OptionBindings reg;
  PhysicsOpts physics;
  std::string config_path, output;
  bool schema = false;
  std::string from = "2.80GHz", to = "2.94GHz";
  int points = 701;
  std::string linewidth = "3MHz";
  double contrast = 0.15;
  std::string orientations = "single";
  int powder_samples = 1000;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App& app) {
    cmd = app.add_subcommand("odmr", "CW ODMR spectrum (closed-form line model)");
    cmd->add_option("--config", config_path, "flat JSON config file (flags override)");
    cmd->add_flag("--schema", schema, "print the output schema and exit");
    reg.add(*cmd, "--output", output, "write the spectrum CSV here");
    physics.attach(*cmd, reg);
    reg.add(*cmd, "--from", from, "grid start frequency");
    reg.add(*cmd, "--to", to, "grid stop frequency");
    reg.add(*cmd, "--points", points, "grid points");
    reg.add(*cmd, "--linewidth", linewidth, "Lorentzian FWHM per line");
    reg.add(*cmd, "--contrast", contrast, "dip depth at unit amplitude, in (0, 1)");
    reg.add(*cmd, "--orientations", orientations, "single | bulk4 | powder");
    reg.add(*cmd, "--powder-samples", powder_samples, "orientation samples for powder");
    seed_opt = cmd->add_option("--seed", seed, "RNG seed for the powder average");
  }

  static json schema_json() {
    return {{"schema_version", kSchemaVersion},
            {"subcommand", "odmr"},
            {"summary",
             {{"schema_version", "integer"},
              {"subcommand", "constant 'odmr'"},
              {"points", "grid size"},
              {"linewidth_hz", "configured FWHM"},
              {"contrast", "configured dip depth"},
              {"orientations", "single | bulk4 | powder"},
              {"n_dips", "dip clusters resolved at 2x linewidth separation"},
              {"dip_centers_hz", "parabolic-refined centers, ascending"}}},
            {"data_file", {{"format", "csv"}, {"columns", {"frequency_hz", "pl"}}}}};
  }

  int run(const json& cfg) {
    const nvsim::NVParameters params = physics.params();
    const double lw = parse_quantity(linewidth);
    const auto grid = nvsim::frequency_grid(parse_quantity(from), parse_quantity(to), points);

    nvsim::Spectrum spec;
    if (orientations == "single") {
      spec = nvsim::odmr_spectrum({params}, lw, contrast, grid);
    } else if (orientations == "bulk4") {
      spec = nvsim::odmr_spectrum(nvsim::bulk_orientations(params), lw, contrast, grid);
    } else if (orientations == "powder") {
      spec = nvsim::powder_spectrum(params, powder_samples, resolve_seed(seed_opt, seed, cfg),
                                    lw, contrast, grid);
    } else {
      throw UsageError("--orientations must be single, bulk4 or powder");
    }

    const auto dips = nvsim::find_dips(spec.frequencies, spec.values);
    const auto [lo, hi] = std::minmax_element(spec.values.begin(), spec.values.end());
    const double floor = 0.02 * (*hi - *lo);
    std::vector<double> centers;
    for (const auto& d : dips)
      if (d.prominence >= floor)
        centers.push_back(nvsim::parabolic_minimum(spec.frequencies, spec.values, d.index));
    std::sort(centers.begin(), centers.end());

    json summary = {{"schema_version", kSchemaVersion},
                    {"subcommand", "odmr"},
                    {"points", grid.size()},
                    {"linewidth_hz", lw},
                    {"contrast", contrast},
                    {"orientations", orientations},
                    {"n_dips", nvsim::resolved_dip_count(spec.frequencies, spec.values, 2.0 * lw)},
                    {"dip_centers_hz", centers}};

    nvsim::CsvTable t;
    t.headers = {"frequency_hz", "pl"};
    t.columns = {spec.frequencies, spec.values};
    emit(summary, output, nvsim::csv_format(t));
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Pulsed protocol subcommands (shared shape)

struct ProtocolCmd {
  const char* name;
  const char* blurb;
  CLI::App* cmd = nullptr;
  OptionBindings reg;
  PhysicsOpts physics;
  RunOpts run_opts;
  std::string config_path, output;
  bool schema = false;
  bool do_fit = false;
  std::string from, to;
  int points;
  std::string freq = "auto";
  std::string detune = "0";
  std::string tau = "1us";  // ramsey-freq only

  ProtocolCmd(const char* name_, const char* blurb_, const char* from_, const char* to_,
              int points_)
      : name(name_), blurb(blurb_), from(from_), to(to_), points(points_) {}

  bool is(const char* n) const { return std::string(name) == n; }

  void attach(CLI::App& app) {
    cmd = app.add_subcommand(name, blurb);
    cmd->add_option("--config", config_path, "flat JSON config file (flags override)");
    cmd->add_flag("--schema", schema, "print the output schema and exit");
    reg.add(*cmd, "--output", output, "write the sweep CSV here");
    physics.attach(*cmd, reg);
    run_opts.attach(*cmd, reg);
    reg.add(*cmd, "--from", from, "sweep start");
    reg.add(*cmd, "--to", to, "sweep stop");
    reg.add(*cmd, "--points", points, "sweep points");
    if (!is("t1")) {
      reg.add(*cmd, "--freq", freq, "carrier frequency, or 'auto' for the m_I=0 line");
      reg.add(*cmd, "--detune", detune, "subtracted from the carrier");
    }
    if (is("ramsey-freq")) reg.add(*cmd, "--tau", tau, "fixed free-evolution time");
    if (!is("ramsey-freq"))
      cmd->add_flag("--fit", do_fit, std::string("fit the sampled counts with ") + fit_model());
  }

  const char* fit_model() const {
    if (is("rabi")) return "damped_sin";
    if (is("ramsey-time")) return "ramsey_3cos";
    return "exp_decay";  // t1, echo
  }

  json schema_json() const {
    json summary = {{"schema_version", "integer"},
                    {"subcommand", std::string("constant '") + name + "'"},
                    {"variable", "swept variable (f or tau)"},
                    {"points", "sweep points"},
                    {"x_start", "first sweep value"},
                    {"x_stop", "last sweep value"},
                    {"shots", "shots per point"},
                    {"seed", "RNG seed used"}};
    if (!is("t1")) summary["carrier_hz"] = "microwave carrier after detuning";
    if (!is("ramsey-freq"))
      summary["fit"] = std::string("with --fit: ") + fit_model() +
                       " report (parameters, uncertainties, derived values)";
    return {{"schema_version", kSchemaVersion},
            {"subcommand", name},
            {"summary", summary},
            {"data_file",
             {{"format", "csv"},
              {"columns", {is("ramsey-freq") ? "frequency_hz" : "tau_s", "mean_counts",
                           "sampled_counts"}}}}};
  }

  int run(const json& cfg) {
    const nvsim::NVParameters params = physics.params();
    const nvsim::RelaxationParams relax = run_opts.relax();
    const nvsim::RunOptions options = run_opts.options(cfg);
    const nvsim::ProtocolConfig proto = run_opts.protocol();

    double carrier = 0.0;
    nvsim::SweepRunResult result;
    if (is("ramsey-freq")) {
      // Default window: +-10 MHz around the automatic carrier.
      const double center = resolve_carrier(freq, detune, params);
      const double a = from == "auto" ? center - 10e6 : parse_quantity(from);
      const double b = to == "auto" ? center + 10e6 : parse_quantity(to);
      result = nvsim::run_swept(nvsim::ramsey_vs_freq({a, b, points}, parse_quantity(tau), proto),
                                params, relax, options);
    } else if (is("t1")) {
      result = nvsim::run_swept(
          nvsim::t1({parse_quantity(from), parse_quantity(to), points}, proto), params, relax,
          options);
    } else {
      carrier = resolve_carrier(freq, detune, params);
      const nvsim::SweepRange range{parse_quantity(from), parse_quantity(to), points};
      if (is("rabi"))
        result = nvsim::run_swept(nvsim::rabi(range, carrier, proto), params, relax, options);
      else if (is("ramsey-time"))
        result = nvsim::run_swept(nvsim::ramsey_vs_time(range, carrier, proto), params, relax,
                                  options);
      else
        result = nvsim::run_hahn_echo(range, carrier, params, relax, options, proto);
    }

    json summary = sweep_summary(name, result, options.shots);
    if (!is("t1") && !is("ramsey-freq")) summary["carrier_hz"] = carrier;
    if (do_fit) {
      const auto& fitres =
          attach_fit(summary, parse_model(fit_model()), result.x, result.sampled_counts);
      const auto& p = fitres.parameters;
      if (is("rabi"))
        summary["fit"]["derived"] = {{"rabi_hz", p[2]},
                                     {"pi_pulse_s", 1.0 / (2.0 * p[2])},
                                     {"decay_s", p[1]}};
      else if (is("ramsey-time"))
        summary["fit"]["derived"] = {{"tone_frequencies_hz", {p[3], p[4], p[5]}},
                                     {"tone_spacings_hz", {p[4] - p[3], p[5] - p[4]}},
                                     {"t2_star_s", p[2]}};
      else if (is("t1"))
        summary["fit"]["derived"] = {{"t1_s", p[1]}};
      else  // echo decays in 2 tau while the sweep axis is tau
        summary["fit"]["derived"] = {{"t2_echo_s", 2.0 * p[1]}};
    }

    std::string csv;
    {
      nvsim::CsvTable t;
      t.headers = {result.variable == "f" ? "frequency_hz" : "tau_s", "mean_counts",
                   "sampled_counts"};
      t.columns = {result.x, result.mean_counts, result.sampled_counts};
      csv = nvsim::csv_format(t);
    }
    emit(summary, output, csv);
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Subcommand: run <file>

struct RunCmd {
  CLI::App* cmd = nullptr;
  OptionBindings reg;
  PhysicsOpts physics;
  RunOpts run_opts;
  std::string config_path, output;
  bool schema = false;
  std::string file;
  std::string sweep_override;
  std::string fit_model;

  void attach(CLI::App& app) {
    cmd = app.add_subcommand("run", "execute a sequence file and sweep it");
    cmd->add_option("file", file, "sequence program (.seq)");
    cmd->add_option("--config", config_path, "flat JSON config file (flags override)");
    cmd->add_flag("--schema", schema, "print the output schema and exit");
    reg.add(*cmd, "--output", output, "write the sweep CSV here");
    physics.attach(*cmd, reg);
    run_opts.attach(*cmd, reg);
    reg.add(*cmd, "--sweep", sweep_override,
            "replace the file's sweep range: var=start:stop:points");
    reg.add(*cmd, "--fit", fit_model,
            "fit the sampled counts (damped_sin | exp_decay | ramsey_3cos | "
            "lorentzian_multi[:n])");
  }

  static json schema_json() {
    return {{"schema_version", kSchemaVersion},
            {"subcommand", "run"},
            {"summary",
             {{"schema_version", "integer"},
              {"subcommand", "constant 'run'"},
              {"file", "sequence file executed"},
              {"variable", "swept variable"},
              {"points", "sweep points"},
              {"x_start", "first sweep value"},
              {"x_stop", "last sweep value"},
              {"shots", "shots per point"},
              {"seed", "RNG seed used"},
              {"fit", "with --fit: model report (parameters, uncertainties)"}}},
            {"data_file",
             {{"format", "csv"}, {"columns", {"frequency_hz or tau_s", "mean_counts",
                                              "sampled_counts"}}}}};
  }

  int run(const json& cfg) {
    if (file.empty()) throw UsageError("run needs a sequence file argument");
    nvsim::SequenceProgram program = nvsim::parse(nvsim::read_file(file));

    if (!sweep_override.empty()) {
      const auto eq = sweep_override.find('=');
      if (eq == std::string::npos)
        throw UsageError("--sweep must look like var=start:stop:points");
      const std::string var = sweep_override.substr(0, eq);
      const std::string range = sweep_override.substr(eq + 1);
      const auto c1 = range.find(':');
      const auto c2 = c1 == std::string::npos ? std::string::npos : range.find(':', c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw UsageError("--sweep must look like var=start:stop:points");
      nvsim::SweepDecl* decl = nullptr;
      for (auto& s : program.sweeps)
        if (s.variable == var) decl = &s;
      if (decl == nullptr)
        throw std::invalid_argument("cli: the program does not sweep '" + var + "'");
      decl->start = parse_quantity(range.substr(0, c1));
      decl->stop = parse_quantity(range.substr(c1 + 1, c2 - c1 - 1));
      decl->points = parse_int(range.substr(c2 + 1), "sweep point count");
      if (decl->points < 2) throw UsageError("--sweep needs at least 2 points");
    }

    const nvsim::NVParameters params = physics.params();
    const nvsim::RelaxationParams relax = run_opts.relax();
    const nvsim::RunOptions options = run_opts.options(cfg);
    const nvsim::SweepRunResult result = nvsim::run_swept(program, params, relax, options);

    json summary = sweep_summary("run", result, options.shots);
    summary["file"] = file;
    if (!fit_model.empty())
      attach_fit(summary, parse_model(fit_model), result.x, result.sampled_counts);

    nvsim::CsvTable t;
    t.headers = {result.variable == "f" ? "frequency_hz" : "tau_s", "mean_counts",
                 "sampled_counts"};
    t.columns = {result.x, result.mean_counts, result.sampled_counts};
    emit(summary, output, nvsim::csv_format(t));
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Subcommand: sgi

struct SgiCmd {
  CLI::App* cmd = nullptr;
  OptionBindings reg;
  std::string config_path, output;
  bool schema = false;
  double atoms = 1e7;
  std::string gradient = "1e5";
  std::string duration = "40us";
  std::string arms = "0,1";
  std::string t2 = "0";
  double contrast_exponent = 1.0;
  std::string max_gradient = "1e6";
  int samples = 129;

  void attach(CLI::App& app) {
    cmd = app.add_subcommand("sgi", "symmetric spin-dependent-gradient interferometer");
    cmd->add_option("--config", config_path, "flat JSON config file (flags override)");
    cmd->add_flag("--schema", schema, "print the output schema and exit");
    reg.add(*cmd, "--output", output, "write the full trajectory JSON here");
    reg.add(*cmd, "--atoms", atoms, "carbon atoms in the nanodiamond");
    reg.add(*cmd, "--gradient", gradient, "magnetic gradient magnitude, T/m");
    reg.add(*cmd, "--duration", duration, "total interferometer time");
    reg.add(*cmd, "--arms", arms, "m_s of the two arms, e.g. 0,1");
    reg.add(*cmd, "--t2", t2, "coherence time for the contrast estimate (0 disables)");
    reg.add(*cmd, "--contrast-exponent", contrast_exponent, "envelope stretching exponent");
    reg.add(*cmd, "--max-gradient", max_gradient, "validation limit, T/m");
    reg.add(*cmd, "--samples", samples, "trajectory samples in the JSON output");
  }

  static json schema_json() {
    return {{"schema_version", kSchemaVersion},
            {"subcommand", "sgi"},
            {"summary",
             {{"schema_version", "integer"},
              {"subcommand", "constant 'sgi'"},
              {"n_atoms", "configured atom count"},
              {"mass_kg", "nanodiamond mass"},
              {"cube_edge_m", "equivalent cube edge"},
              {"sphere_diameter_m", "equivalent sphere diameter"},
              {"gradient_t_per_m", "configured gradient"},
              {"duration_s", "total time"},
              {"arms", "m_s pair"},
              {"max_splitting_m", "peak arm separation"},
              {"dz_final_m", "closure position gap"},
              {"dv_final_m_per_s", "closure velocity gap"},
              {"contrast", "envelope estimate (1 when --t2 is 0)"}}},
            {"data_file", {{"format", "json"}, {"content", "trajectory samples per arm"}}}};
  }

  int run(const json&) {
    const auto comma = arms.find(',');
    if (comma == std::string::npos) throw UsageError("--arms must look like 0,1");
    const int ms_a = parse_int(arms.substr(0, comma), "arm");
    const int ms_b = parse_int(arms.substr(comma + 1), "arm");

    const nvsim::NDSpec nd = nvsim::nd_from_atoms(atoms);
    nvsim::GradientProfile profile =
        nvsim::symmetric_profile(parse_quantity(gradient), parse_quantity(duration));
    profile.max_gradient_t_per_m = parse_quantity(max_gradient);
    nvsim::SGIOptions opts;
    opts.t2_s = parse_quantity(t2);
    opts.contrast_exponent = contrast_exponent;
    const nvsim::SGIResult result =
        nvsim::simulate_interferometer(nd, profile, {ms_a, ms_b}, opts);

    const json summary = {{"schema_version", kSchemaVersion},
                          {"subcommand", "sgi"},
                          {"n_atoms", nd.n_atoms},
                          {"mass_kg", nd.mass_kg},
                          {"cube_edge_m", nd.cube_edge_m},
                          {"sphere_diameter_m", nd.sphere_diameter_m},
                          {"gradient_t_per_m", parse_quantity(gradient)},
                          {"duration_s", result.total_duration_s},
                          {"arms", {ms_a, ms_b}},
                          {"max_splitting_m", result.max_splitting_m},
                          {"dz_final_m", result.dz_final_m},
                          {"dv_final_m_per_s", result.dv_final_m_per_s},
                          {"contrast", result.contrast}};
    emit(summary, output, nvsim::sgi_result_json(result, samples).dump(2) + "\n");
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Subcommand: resonator

struct ResonatorCmd {
  CLI::App* cmd = nullptr;
  OptionBindings reg;
  std::string config_path, output;
  bool schema = false;
  std::string inductance = "1nH";
  std::string capacitance;  // empty: solve from --target-f0
  std::string target_f0 = "2.87GHz";
  std::string resistance;  // empty: solve from --target-bandwidth
  std::string target_bandwidth = "270MHz";
  std::string power = "1";
  std::string match_from = "100";
  std::string match_to = "650";
  std::string geometry;
  std::string current;  // empty: Q-enhanced loop current from the design
  int grid_n = 21;
  std::string grid_half_extent = "1mm";
  std::string grid_center = "0,0,0";
  std::string grid_axis1 = "1,0,0";
  std::string grid_axis2 = "0,1,0";
  double metrics_fraction = 0.5;

  void attach(CLI::App& app) {
    cmd = app.add_subcommand("resonator", "RLC design numbers and loop field maps");
    cmd->add_option("--config", config_path, "flat JSON config file (flags override)");
    cmd->add_flag("--schema", schema, "print the output schema and exit");
    reg.add(*cmd, "--output", output, "write the field-map CSV here (needs --geometry)");
    reg.add(*cmd, "--inductance", inductance, "loop inductance");
    reg.add(*cmd, "--capacitance", capacitance, "tuning capacitance (default: solve for f0)");
    reg.add(*cmd, "--target-f0", target_f0, "resonance to solve the capacitance for");
    reg.add(*cmd, "--resistance", resistance, "series loss (default: solve for bandwidth)");
    reg.add(*cmd, "--target-bandwidth", target_bandwidth,
            "3 dB bandwidth to solve the resistance for");
    reg.add(*cmd, "--power", power, "drive power, watts");
    reg.add(*cmd, "--match-from", match_from, "quarter-wave source impedance");
    reg.add(*cmd, "--match-to", match_to, "quarter-wave load impedance");
    reg.add(*cmd, "--geometry", geometry, "JSON wire geometry (object or array)");
    reg.add(*cmd, "--current", current, "override the loop current for the field map");
    reg.add(*cmd, "--grid-n", grid_n, "field-map grid points per side");
    reg.add(*cmd, "--grid-half-extent", grid_half_extent, "field-map half extent");
    reg.add(*cmd, "--grid-center", grid_center, "field-map plane center");
    reg.add(*cmd, "--grid-axis1", grid_axis1, "field-map plane axis 1");
    reg.add(*cmd, "--grid-axis2", grid_axis2, "field-map plane axis 2");
    reg.add(*cmd, "--metrics-fraction", metrics_fraction,
            "central grid fraction used for uniformity / efficiency");
  }

  static json schema_json() {
    return {{"schema_version", kSchemaVersion},
            {"subcommand", "resonator"},
            {"summary",
             {{"schema_version", "integer"},
              {"subcommand", "constant 'resonator'"},
              {"inductance_h", "loop inductance"},
              {"capacitance_f", "tuning capacitance (given or solved)"},
              {"resistance_ohm", "series loss (given or solved)"},
              {"f0_hz", "resonant frequency"},
              {"q", "quality factor"},
              {"bandwidth_hz", "3 dB bandwidth"},
              {"infinite_q", "true for a lossless design"},
              {"drive_power_w", "configured drive power"},
              {"loop_current_a", "Q-enhanced loop current (finite Q only)"},
              {"quarter_wave_ohm", "matching-section impedance"},
              {"field", "with --geometry: mean gauss, uniformity, efficiency"}}},
            {"data_file",
             {{"format", "csv"},
              {"columns", {"x_m", "y_m", "z_m", "bx_t", "by_t", "bz_t", "singular"}}}}};
  }

  int run(const json&) {
    nvsim::RLCDesign design;
    design.inductance_h = parse_quantity(inductance);
    design.capacitance_f = capacitance.empty()
                               ? nvsim::capacitance_for(parse_quantity(target_f0),
                                                        design.inductance_h)
                               : parse_quantity(capacitance);
    design.drive_power_w = parse_quantity(power);
    design.series_resistance_ohm = 0.0;
    const double f0 = nvsim::resonant_frequency(design);
    if (resistance.empty()) {
      const double bw = parse_quantity(target_bandwidth);
      if (!(bw > 0.0)) throw std::invalid_argument("cli: --target-bandwidth must be positive");
      design.series_resistance_ohm =
          std::sqrt(design.inductance_h / design.capacitance_f) * bw / f0;
    } else {
      design.series_resistance_ohm = parse_quantity(resistance);
    }
    design.validate();
    const nvsim::BandwidthQ bwq = nvsim::bandwidth_and_q(design);

    json summary = {{"schema_version", kSchemaVersion},
                    {"subcommand", "resonator"},
                    {"inductance_h", design.inductance_h},
                    {"capacitance_f", design.capacitance_f},
                    {"resistance_ohm", design.series_resistance_ohm},
                    {"f0_hz", f0},
                    {"q", bwq.q},
                    {"bandwidth_hz", bwq.bandwidth_hz},
                    {"infinite_q", bwq.infinite_q},
                    {"drive_power_w", design.drive_power_w},
                    {"quarter_wave_ohm",
                     nvsim::quarter_wave_match(parse_quantity(match_from),
                                               parse_quantity(match_to))}};
    if (!bwq.infinite_q) summary["loop_current_a"] = nvsim::loop_current(design);

    std::string data;
    if (!geometry.empty()) {
      const json gj = json::parse(nvsim::read_file(geometry));
      std::vector<nvsim::WireGeometry> wires;
      if (gj.is_array())
        for (const auto& item : gj) wires.push_back(nvsim::wire_geometry_from_json(item));
      else
        wires.push_back(nvsim::wire_geometry_from_json(gj));

      double amps;
      if (!current.empty())
        amps = parse_quantity(current);
      else if (!bwq.infinite_q)
        amps = nvsim::loop_current(design);
      else
        throw std::invalid_argument(
            "cli: a lossless design has no loop current; pass --current");

      const nvsim::Vector3d a1 = parse_vec3(grid_axis1).normalized();
      const nvsim::Vector3d a2 = parse_vec3(grid_axis2).normalized();
      const auto grid = nvsim::planar_grid(parse_vec3(grid_center), a1, a2,
                                           parse_quantity(grid_half_extent), grid_n);
      const nvsim::FieldMap map = nvsim::loop_field_map(wires, amps, grid);

      // Central square: indices within the configured fraction of each axis.
      if (!(metrics_fraction > 0.0 && metrics_fraction <= 1.0))
        throw std::invalid_argument("cli: --metrics-fraction must be in (0, 1]");
      const double mid = (grid_n - 1) / 2.0;
      const double reach = metrics_fraction * mid;
      std::vector<std::size_t> region;
      for (int i = 0; i < grid_n; ++i)
        for (int j = 0; j < grid_n; ++j)
          if (std::abs(i - mid) <= reach && std::abs(j - mid) <= reach)
            region.push_back(static_cast<std::size_t>(i) * grid_n + j);
      const nvsim::FieldMetrics metrics =
          nvsim::field_metrics(map, region, design.drive_power_w);

      summary["loop_current_a"] = amps;
      summary["field"] = nvsim::field_metrics_json(metrics);
      summary["field"]["grid_n"] = grid_n;
      summary["field"]["region_points"] = region.size();
      data = nvsim::field_map_csv(map);
    } else if (!output.empty()) {
      throw std::invalid_argument("cli: --output for resonator needs --geometry");
    }

    emit(summary, output, data);
    return 0;
  }
};

// ---------------------------------------------------------------------------
// Subcommand: fit <model> <datafile>

struct FitCmd {
  CLI::App* cmd = nullptr;
  OptionBindings reg;
  std::string config_path, output;
  bool schema = false;
  std::string model_name;
  std::string datafile;
  int x_column = 0;
  int y_column = 1;
  std::string init;
  bool poisson = false;

  void attach(CLI::App& app) {
    cmd = app.add_subcommand("fit", "fit a CSV data file with a library model");
    cmd->add_option("model", model_name,
                    "damped_sin | exp_decay | ramsey_3cos | lorentzian_multi[:n]");
    cmd->add_option("datafile", datafile, "CSV with at least two numeric columns");
    cmd->add_option("--config", config_path, "flat JSON config file (flags override)");
    cmd->add_flag("--schema", schema, "print the output schema and exit");
    reg.add(*cmd, "--output", output, "write the fit report JSON here");
    reg.add(*cmd, "--x-column", x_column, "abscissa column index");
    reg.add(*cmd, "--y-column", y_column, "ordinate column index");
    reg.add(*cmd, "--init", init, "comma-separated initial parameters (default: automatic)");
    cmd->add_flag("--poisson", poisson, "weight residuals by 1/sqrt(max(y, 1))");
  }

  static json schema_json() {
    return {{"schema_version", kSchemaVersion},
            {"subcommand", "fit"},
            {"summary",
             {{"schema_version", "integer"},
              {"subcommand", "constant 'fit'"},
              {"datafile", "input file"},
              {"points", "rows fitted"},
              {"fit",
               "model, parameters, parameter_names, uncertainties, residual_norm, "
               "converged, iterations"}}},
            {"data_file", {{"format", "json"}, {"content", "the same report as the summary"}}}};
  }

  int run(const json&) {
    if (model_name.empty() || datafile.empty())
      throw UsageError("fit needs a model and a data file");
    nvsim::FitModel model = parse_model(model_name);
    model.poisson_weights = poisson;

    const nvsim::CsvTable table = nvsim::csv_parse(nvsim::read_file(datafile));
    const auto xc = static_cast<std::size_t>(x_column);
    const auto yc = static_cast<std::size_t>(y_column);
    if (x_column < 0 || y_column < 0 || xc >= table.columns.size() ||
        yc >= table.columns.size())
      throw std::invalid_argument("cli: column index outside the data file");
    const std::vector<double>& x = table.columns[xc];
    const std::vector<double>& y = table.columns[yc];

    std::vector<double> start;
    if (!init.empty()) {
      std::string cur;
      for (char ch : init + ",") {
        if (ch == ',') {
          start.push_back(parse_quantity(cur));
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
      if (start.size() != static_cast<std::size_t>(model.parameter_count()))
        throw UsageError("--init needs exactly " + std::to_string(model.parameter_count()) +
                         " values for " + model.name());
    } else {
      start = nvsim::initial_guess(model, x, y);
    }

    const nvsim::FitResult result = nvsim::fit(model, x, y, start);
    json report = nvsim::fit_report_json(model, result);
    report["parameter_names"] = parameter_names(model);

    json summary = {{"schema_version", kSchemaVersion},
                    {"subcommand", "fit"},
                    {"datafile", datafile},
                    {"points", x.size()},
                    {"fit", report}};
    emit(summary, output, summary.dump(2) + "\n");
    return 0;
  }
};

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"NV spin simulator: measurement protocols and design calculators"};
  app.require_subcommand(0, 1);

  OdmrCmd odmr;
  odmr.attach(app);
  std::vector<ProtocolCmd> protocols;
  protocols.reserve(5);
  protocols.emplace_back("rabi", "swept-duration Rabi nutation", "0", "2us", 101);
  protocols.emplace_back("ramsey-time", "Ramsey fringes vs free-evolution time", "0", "2.5us",
                         161);
  protocols.emplace_back("ramsey-freq", "Ramsey fringes vs drive frequency", "auto", "auto",
                         201);
  protocols.emplace_back("t1", "population relaxation vs dark time", "0", "10ms", 31);
  protocols.emplace_back("echo", "Hahn echo vs half-evolution time tau", "0", "150us", 51);
  for (auto& p : protocols) p.attach(app);
  RunCmd runner;
  runner.attach(app);
  SgiCmd sgi;
  sgi.attach(app);
  ResonatorCmd resonator;
  resonator.attach(app);
  FitCmd fitter;
  fitter.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    auto dispatch = [&](auto& c) -> int {
      if (c.schema) {
        std::cout << c.schema_json().dump(2) << "\n";
        return 0;
      }
      const json cfg = load_config(c.config_path);
      c.reg.apply_config(cfg);
      return c.run(cfg);
    };
    if (odmr.cmd->parsed()) return dispatch(odmr);
    for (auto& p : protocols)
      if (p.cmd->parsed()) return dispatch(p);
    if (runner.cmd->parsed()) return dispatch(runner);
    if (sgi.cmd->parsed()) return dispatch(sgi);
    if (resonator.cmd->parsed()) return dispatch(resonator);
    if (fitter.cmd->parsed()) return dispatch(fitter);
    std::cout << app.help();
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
