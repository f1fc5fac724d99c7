#include "cavcool/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <system_error>

namespace cavcool {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view what) {
  std::ostringstream msg;
  msg << "config key '" << key << "': " << what << " (got '" << value << "')";
  throw ConfigError(msg.str());
}

double parse_double(std::string_view key, std::string_view value) {
  value = trim(value);
  double out = 0.0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value, "expected a finite number");
  }
  return out;
}

long long parse_int(std::string_view key, std::string_view value) {
  value = trim(value);
  long long out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    bad_value(key, value, "expected an integer");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  value = trim(value);
  std::uint64_t out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size()) {
    bad_value(key, value, "expected a non-negative integer");
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  for (auto item : split(value, ',')) out.push_back(parse_double(key, item));
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += format_double(values[i]);
  }
  return out;
}

int positive_int(std::string_view key, std::string_view value) {
  const long long v = parse_int(key, value);
  if (v < 1 || v > std::numeric_limits<int>::max()) bad_value(key, value, "must be a positive integer");
  return static_cast<int>(v);
}

double positive_double(std::string_view key, std::string_view value) {
  const double v = parse_double(key, value);
  if (!(v > 0.0)) bad_value(key, value, "must be > 0");
  return v;
}

double nonneg_double(std::string_view key, std::string_view value) {
  const double v = parse_double(key, value);
  if (v < 0.0) bad_value(key, value, "must be >= 0");
  return v;
}

struct KeySpec {
  std::string name;
  std::function<void(RunConfig&, std::string_view)> parse;
  std::function<std::optional<std::string>(const RunConfig&)> emit;  // nullopt: omit line
};

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> table = {
      {"n_atoms", [](RunConfig& c, std::string_view v) { c.params.n_atoms = positive_int("n_atoms", v); },
       [](const RunConfig& c) { return std::to_string(c.params.n_atoms); }},
      {"kappa", [](RunConfig& c, std::string_view v) { c.params.kappa = positive_double("kappa", v); },
       [](const RunConfig& c) { return format_double(c.params.kappa); }},
      {"delta", [](RunConfig& c, std::string_view v) { c.params.delta = positive_double("delta", v); },
       [](const RunConfig& c) { return format_double(c.params.delta); }},
      {"gamma_c", [](RunConfig& c, std::string_view v) { c.params.gamma_c = positive_double("gamma_c", v); },
       [](const RunConfig& c) -> std::optional<std::string> {
         if (!c.params.gamma_c) return std::nullopt;
         return format_double(*c.params.gamma_c);
       }},
      {"g", [](RunConfig& c, std::string_view v) { c.params.g = positive_double("g", v); },
       [](const RunConfig& c) -> std::optional<std::string> {
         if (!c.params.g) return std::nullopt;
         return format_double(*c.params.g);
       }},
      {"w", [](RunConfig& c, std::string_view v) { c.params.w = nonneg_double("w", v); },
       [](const RunConfig& c) { return format_double(c.params.w); }},
      {"w_mode",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "fixed") c.repump.kind = RepumpRule::Kind::fixed;
         else if (v == "scaled") c.repump.kind = RepumpRule::Kind::scaled;
         else if (v == "anchors") c.repump.kind = RepumpRule::Kind::anchors;
         else bad_value("w_mode", v, "expected fixed, scaled or anchors");
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         switch (c.repump.kind) {
           case RepumpRule::Kind::fixed: return "fixed";
           case RepumpRule::Kind::scaled: return "scaled";
           case RepumpRule::Kind::anchors: return "anchors";
         }
         return "fixed";
       }},
      {"w_scale", [](RunConfig& c, std::string_view v) { c.repump.scale = positive_double("w_scale", v); },
       [](const RunConfig& c) { return format_double(c.repump.scale); }},
      {"w_anchors",
       [](RunConfig& c, std::string_view v) {
         c.repump.anchors.clear();
         for (auto item : split(v, ',')) {
           const auto parts = split(item, ':');
           if (parts.size() != 2) bad_value("w_anchors", v, "expected a list of N:w pairs");
           c.repump.anchors.emplace_back(parse_double("w_anchors", parts[0]),
                                         parse_double("w_anchors", parts[1]));
         }
         if (!std::is_sorted(c.repump.anchors.begin(), c.repump.anchors.end())) {
           bad_value("w_anchors", v, "anchors must be sorted by N");
         }
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         if (c.repump.anchors.empty()) return std::nullopt;
         std::string out;
         for (std::size_t i = 0; i < c.repump.anchors.size(); ++i) {
           if (i) out += ",";
           out += format_double(c.repump.anchors[i].first) + ":" +
                  format_double(c.repump.anchors[i].second);
         }
         return out;
       }},
      {"omega_r", [](RunConfig& c, std::string_view v) { c.params.omega_r = positive_double("omega_r", v); },
       [](const RunConfig& c) { return format_double(c.params.omega_r); }},
      {"kprime_ratio",
       [](RunConfig& c, std::string_view v) { c.params.kprime_ratio = nonneg_double("kprime_ratio", v); },
       [](const RunConfig& c) { return format_double(c.params.kprime_ratio); }},
      {"u2bar",
       [](RunConfig& c, std::string_view v) {
         c.params.u2bar = nonneg_double("u2bar", v);
         if (c.params.u2bar > 1.0) bad_value("u2bar", v, "must lie in [0, 1]");
       },
       [](const RunConfig& c) { return format_double(c.params.u2bar); }},
      {"n_traj", [](RunConfig& c, std::string_view v) { c.n_traj = positive_int("n_traj", v); },
       [](const RunConfig& c) { return std::to_string(c.n_traj); }},
      {"dt",
       [](RunConfig& c, std::string_view v) {
         c.dt = trim(v) == "auto" ? 0.0 : positive_double("dt", v);
       },
       [](const RunConfig& c) { return c.dt > 0.0 ? format_double(c.dt) : std::string("auto"); }},
      {"t_final", [](RunConfig& c, std::string_view v) { c.t_final = nonneg_double("t_final", v); },
       [](const RunConfig& c) { return format_double(c.t_final); }},
      {"sample_stride",
       [](RunConfig& c, std::string_view v) {
         c.sample_stride = trim(v) == "auto" ? 0 : positive_int("sample_stride", v);
       },
       [](const RunConfig& c) {
         return c.sample_stride > 0 ? std::to_string(c.sample_stride) : std::string("auto");
       }},
      {"dp0", [](RunConfig& c, std::string_view v) { c.init.dp0 = nonneg_double("dp0", v); },
       [](const RunConfig& c) { return format_double(c.init.dp0); }},
      {"positions",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "uniform") c.init.positions = PositionLaw::uniform;
         else if (v == "antinode") c.init.positions = PositionLaw::antinode;
         else bad_value("positions", v, "expected uniform or antinode");
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         return c.init.positions == PositionLaw::uniform ? "uniform" : "antinode";
       }},
      {"seed", [](RunConfig& c, std::string_view v) { c.seed = parse_u64("seed", v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"output_dir",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v.empty()) bad_value("output_dir", v, "must not be empty");
         c.output_dir = std::string(v);
       },
       [](const RunConfig& c) { return c.output_dir; }},
      {"sweep_axis", [](RunConfig& c, std::string_view v) { c.sweep_axis = parse_sweep_axis(std::string(trim(v))); },
       [](const RunConfig& c) -> std::optional<std::string> {
         if (!c.sweep_axis) return std::nullopt;
         return to_string(*c.sweep_axis);
       }},
      {"sweep_values", [](RunConfig& c, std::string_view v) { c.sweep_values = parse_list("sweep_values", v); },
       [](const RunConfig& c) -> std::optional<std::string> {
         if (c.sweep_values.empty()) return std::nullopt;
         return join(c.sweep_values);
       }},
      {"histogram",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "auto") c.histogram = HistogramMode::automatic;
         else if (v == "wide") c.histogram = HistogramMode::wide;
         else if (v == "recoil") c.histogram = HistogramMode::recoil;
         else bad_value("histogram", v, "expected auto, wide or recoil");
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         switch (c.histogram) {
           case HistogramMode::automatic: return "auto";
           case HistogramMode::wide: return "wide";
           case HistogramMode::recoil: return "recoil";
         }
         return "auto";
       }},
      {"histogram_snapshots",
       [](RunConfig& c, std::string_view v) { c.histogram_snapshots = positive_int("histogram_snapshots", v); },
       [](const RunConfig& c) { return std::to_string(c.histogram_snapshots); }},
      {"spin_substeps",
       [](RunConfig& c, std::string_view v) { c.spin_substeps = positive_int("spin_substeps", v); },
       [](const RunConfig& c) { return std::to_string(c.spin_substeps); }},
      {"spin_scheme",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "rk4") c.spin_scheme = SpinScheme::rk4;
         else if (v == "euler") c.spin_scheme = SpinScheme::euler;
         else bad_value("spin_scheme", v, "expected rk4 or euler");
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         return c.spin_scheme == SpinScheme::rk4 ? "rk4" : "euler";
       }},
      {"refactor_interval",
       [](RunConfig& c, std::string_view v) { c.refactor_interval = positive_int("refactor_interval", v); },
       [](const RunConfig& c) { return std::to_string(c.refactor_interval); }},
      {"factorization",
       [](RunConfig& c, std::string_view v) {
         v = trim(v);
         if (v == "cholesky") c.factorization = FactorMethod::cholesky;
         else if (v == "eigen") c.factorization = FactorMethod::eigen;
         else bad_value("factorization", v, "expected cholesky or eigen");
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         return c.factorization == FactorMethod::cholesky ? "cholesky" : "eigen";
       }},
      {"noise_refine",
       [](RunConfig& c, std::string_view v) { c.noise_refine = positive_int("noise_refine", v); },
       [](const RunConfig& c) { return std::to_string(c.noise_refine); }},
      {"oracle_positions",
       [](RunConfig& c, std::string_view v) {
         if (trim(v) == "antinode") c.oracle_positions.clear();
         else c.oracle_positions = parse_list("oracle_positions", v);
       },
       [](const RunConfig& c) -> std::optional<std::string> {
         if (c.oracle_positions.empty()) return "antinode";
         return join(c.oracle_positions);
       }},
  };
  return table;
}

const std::vector<std::string> kRequired = {"n_atoms", "kappa", "delta", "gamma_c|g",
                                            "w (unless w_mode != fixed)", "omega_r",
                                            "n_traj", "t_final"};

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? end : end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = key_table();
    const auto it = std::find_if(table.begin(), table.end(), [&](const KeySpec& k) { return k.name == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("config key '" + key + "' given twice");
    it->parse(cfg, value);
  }

  std::vector<std::string> missing;
  for (const char* key : {"n_atoms", "kappa", "delta", "omega_r", "n_traj", "t_final"}) {
    if (!seen.count(key)) missing.push_back(key);
  }
  if (!seen.count("gamma_c") && !seen.count("g")) missing.push_back("gamma_c (or g)");
  if (cfg.repump.kind == RepumpRule::Kind::fixed && !seen.count("w")) missing.push_back("w");
  if (!missing.empty()) {
    std::string msg = "missing required config keys:";
    for (const auto& k : missing) msg += " " + k;
    throw ConfigError(msg);
  }
  if (seen.count("gamma_c") && seen.count("g")) {
    throw ConfigError("config keys 'gamma_c' and 'g' are mutually exclusive");
  }
  if (cfg.repump.kind == RepumpRule::Kind::anchors && cfg.repump.anchors.empty()) {
    throw ConfigError("config key 'w_anchors' is required when w_mode = anchors");
  }
  if (cfg.sweep_axis.has_value() != !cfg.sweep_values.empty()) {
    throw ConfigError("config keys 'sweep_axis' and 'sweep_values' must be given together");
  }
  try {
    const DerivedRates rates = derive_rates(cfg.params);
    cfg.params.w = cfg.repump.resolve(cfg.params, rates);
  } catch (const InvalidParameter& e) {
    throw ConfigError(std::string("invalid parameters: ") + e.what());
  }
  for (const auto& k : key_table()) {
    cfg.provenance[k.name] = seen.count(k.name) ? Provenance::user : Provenance::defaulted;
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

RunConfig resolve(const RunConfig& cfg) {
  RunConfig out = cfg;
  const DerivedRates rates = derive_rates(out.params);
  out.params.w = out.repump.resolve(out.params, rates);
  if (out.dt <= 0.0) {
    out.dt = auto_dt(out.params, rates);
    out.provenance["dt"] = Provenance::derived;
  }
  if (out.sample_stride <= 0) {
    out.sample_stride = static_cast<int>(std::max(1LL, step_count(out.t_final, out.dt) / 200));
    out.provenance["sample_stride"] = Provenance::derived;
  }
  return out;
}

EnsembleConfig ensemble_config(const RunConfig& c) {
  EnsembleConfig e;
  e.params = c.params;
  e.step.dt = c.dt;
  e.step.spin_substeps = c.spin_substeps;
  e.step.spin_scheme = c.spin_scheme;
  e.step.refactor_interval = c.refactor_interval;
  e.step.factorization = c.factorization;
  e.step.noise_refine = c.noise_refine;
  e.init = c.init;
  e.record.sample_stride = c.sample_stride;
  e.record.late_snapshots = c.histogram_snapshots;
  e.t_final = c.t_final;
  e.n_traj = c.n_traj;
  e.seed = c.seed;
  e.histogram = c.histogram;
  return e;
}

std::string emit_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : key_table()) {
    if (auto v = k.emit(cfg)) out += k.name + " = " + *v + "\n";
  }
  return out;
}

std::string emit_manifest(const RunConfig& cfg, const ManifestInfo& info) {
  const DerivedRates rates = derive_rates(cfg.params);
  std::ostringstream out;
  out << "# cavcool run manifest\n";
  out << "# tool_version: " << CAVCOOL_VERSION << "\n";
#if defined(__VERSION__)
  out << "# platform: " << CAVCOOL_SYSTEM << ", compiler " << __VERSION__ << "\n";
#else
  out << "# platform: " << CAVCOOL_SYSTEM << "\n";
#endif
  out << "# command: " << info.command << "\n";
  out << "# wall_seconds: " << format_double(info.wall_seconds) << "\n";
  for (const auto& [stage, seconds] : info.timings) {
    out << "# timing." << stage << ": " << format_double(seconds) << "\n";
  }
  out << "# derived.gamma_c: " << format_double(rates.gamma_c) << "\n";
  out << "# derived.gamma_delta: " << format_double(rates.gamma_delta) << "\n";
  out << "# derived.eta: " << format_double(rates.eta) << "\n";
  out << "# derived.mass: " << format_double(rates.mass) << "\n";
  out << "# derived.g: " << format_double(rates.g) << "\n";
  out << "# derived.single_atom_rate_s: "
      << format_double(rates.eta * rates.gamma_c *
                       averaged_single_atom_population(cfg.params.w, rates.gamma_c))
      << "  (eta * Gamma_C * position-averaged single-atom population at this w)\n";
  out << "# clamped_mass_total: " << format_double(info.clamped_mass) << "\n";
  for (const auto& [key, value] : info.results) out << "# result." << key << ": " << value << "\n";
  for (const auto& [key, prov] : cfg.provenance) {
    out << "# provenance." << key << ": "
        << (prov == Provenance::user ? "user" : prov == Provenance::defaulted ? "default" : "derived")
        << "\n";
  }
  out << emit_config(cfg);
  return out.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string series_csv(const EnsembleSeries& s) {
  std::string out = "t,p2_mean,p2_sem,corrE_mean,inversion_mean\n";
  for (std::size_t k = 0; k < s.times.size(); ++k) {
    out += format_double(s.times[k]) + "," + format_double(s.p2_mean[k]) + "," +
           format_double(s.p2_sem[k]) + "," + format_double(s.corr_e_mean[k]) + "," +
           format_double(s.inversion_mean[k]) + "\n";
  }
  return out;
}

std::string histogram_csv(const MomentumHistogram& h) {
  std::string out = "bin_left,bin_right,count\n";
  out += "-inf," + format_double(h.lo) + "," + std::to_string(h.underflow) + "\n";
  for (int i = 0; i < h.bins(); ++i) {
    out += format_double(h.edge(i)) + "," + format_double(h.edge(i + 1)) + "," +
           std::to_string(h.counts[i]) + "\n";
  }
  out += format_double(h.hi) + ",inf," + std::to_string(h.overflow) + "\n";
  return out;
}

std::string fit_csv(const FitResult& f) {
  return "rate,asymptote,amplitude,rms_residual,window_start,window_end\n" + format_double(f.rate) +
         "," + format_double(f.asymptote) + "," + format_double(f.amplitude) + "," +
         format_double(f.rms_residual) + "," + format_double(f.window_start) + "," +
         format_double(f.window_end) + "\n";
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
  std::string out = to_string(axis) +
                    ",w,final_dp,final_p2,corrE,rate,rate_over_rs,clamped_mass,n_traj,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += format_double(r.value) + "," + format_double(r.w) + "," + format_double(r.final_dp) + "," +
           format_double(r.final_p2) + "," + format_double(r.corr_e) + "," + format_double(r.rate) +
           "," + format_double(r.rate_over_rs) + "," + format_double(r.clamped_mass) + "," +
           std::to_string(r.n_traj) + "," + status + "\n";
  }
  return out;
}

std::string oracle_csv(const DiscrepancyReport& report) {
  std::string out = "moment,exact,cumulant,rel_error\n";
  for (const auto& m : report.moments) {
    out += m.name + "," + format_double(m.exact) + "," + format_double(m.cumulant) + "," +
           format_double(m.rel_error) + "\n";
  }
  return out;
}

void emit_series(const EnsembleSeries& series, const std::filesystem::path& path) {
  write_file_atomic(path, series_csv(series));
}

EnsembleSeries read_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open series file '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || trim(line) != "t,p2_mean,p2_sem,corrE_mean,inversion_mean") {
    throw ConfigError("'" + path.string() + "' is not a series CSV (bad header)");
  }
  EnsembleSeries s;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 5) throw ConfigError("series CSV row " + std::to_string(row) + ": expected 5 columns");
    auto num = [&](std::string_view v) {
      if (v == "nan") return std::numeric_limits<double>::quiet_NaN();
      return parse_double("series", v);
    };
    s.times.push_back(num(cols[0]));
    s.p2_mean.push_back(num(cols[1]));
    s.p2_sem.push_back(num(cols[2]));
    s.corr_e_mean.push_back(num(cols[3]));
    s.inversion_mean.push_back(num(cols[4]));
  }
  return s;
}

}  // namespace cavcool
