#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "rydgate/constants.hpp"
#include "rydgate/error.hpp"

namespace rydgate::cli {

namespace c = constants;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& what) {
  throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
}

std::string parse_string(const std::string& s, const std::string& origin, int line) {
  if (s.size() < 2 || s.front() != '"' || s.back() != '"') fail(origin, line, "malformed string " + s);
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    if (s[i] == '\\' && i + 2 < s.size()) {
      const char n = s[++i];
      out += n == 'n' ? '\n' : n == 't' ? '\t' : n;
    } else {
      out += s[i];
    }
  }
  return out;
}

double parse_number(const std::string& s, const std::string& origin, int line) {
  std::string clean;
  for (char ch : s) {
    if (ch != '_') clean += ch;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(clean, &used);
    if (used != clean.size()) fail(origin, line, "malformed number " + s);
    return v;
  } catch (const std::logic_error&) {
    fail(origin, line, "malformed value " + s);
  }
}

std::vector<std::string> split_array(const std::string& body) {
  std::vector<std::string> items;
  std::string cur;
  bool in_string = false;
  for (char ch : body) {
    if (ch == '"') in_string = !in_string;
    if (ch == ',' && !in_string) {
      items.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!trim(cur).empty()) items.push_back(trim(cur));
  return items;
}

TomlValue parse_value(const std::string& raw, const std::string& origin, int line) {
  const std::string s = trim(raw);
  TomlValue v;
  v.line = line;
  if (s.empty()) fail(origin, line, "missing value");
  if (s.front() == '[') {
    if (s.back() != ']') fail(origin, line, "unterminated array");
    const auto items = split_array(s.substr(1, s.size() - 2));
    if (!items.empty() && items.front().front() == '"') {
      std::vector<std::string> out;
      for (const auto& it : items) out.push_back(parse_string(it, origin, line));
      v.value = out;
    } else {
      std::vector<double> out;
      for (const auto& it : items) out.push_back(parse_number(it, origin, line));
      v.value = out;
    }
  } else if (s.front() == '"') {
    v.value = parse_string(s, origin, line);
  } else if (s == "true" || s == "false") {
    v.value = s == "true";
  } else {
    v.value = parse_number(s, origin, line);
  }
  return v;
}

bool valid_key(const std::string& k) {
  return !k.empty() && std::all_of(k.begin(), k.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

std::string format_value(const TomlValue& v) {
  std::ostringstream os;
  os.precision(17);
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) {
          os << x;
        } else if constexpr (std::is_same_v<T, bool>) {
          os << (x ? "true" : "false");
        } else if constexpr (std::is_same_v<T, std::string>) {
          os << '"' << x << '"';
        } else {
          os << '[';
          for (std::size_t i = 0; i < x.size(); ++i) {
            if (i) os << ", ";
            if constexpr (std::is_same_v<T, std::vector<std::string>>) {
              os << '"' << x[i] << '"';
            } else {
              os << x[i];
            }
          }
          os << ']';
        }
      },
      v.value);
  return os.str();
}

// Typed access with consumption tracking, so leftover keys can be rejected.
class Reader {
 public:
  explicit Reader(const TomlDocument& doc) : doc_(doc) {}

  const TomlValue* find(const std::string& key) {
    const auto it = doc_.entries().find(key);
    if (it == doc_.entries().end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  double number(const std::string& key, double fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (const auto* d = std::get_if<double>(&v->value)) return *d;
    fail(doc_.origin(), v->line, key + " must be a number");
  }

  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) fail_key(key, "must be positive");
    return v;
  }

  double unit(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v >= 0.0 && v <= 1.0)) fail_key(key, "must lie in [0, 1]");
    return v;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback, std::uint64_t minimum = 1) {
    const double v = number(key, static_cast<double>(fallback));
    if (!(v >= static_cast<double>(minimum)) || v != std::floor(v) || v > 9.0e15) {
      fail_key(key, "must be an integer >= " + std::to_string(minimum));
    }
    return static_cast<std::uint64_t>(v);
  }

  bool flag(const std::string& key, bool fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (const auto* b = std::get_if<bool>(&v->value)) return *b;
    fail(doc_.origin(), v->line, key + " must be true or false");
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (const auto* s = std::get_if<std::string>(&v->value)) return *s;
    fail(doc_.origin(), v->line, key + " must be a string");
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (const auto* a = std::get_if<std::vector<double>>(&v->value)) return *a;
    fail(doc_.origin(), v->line, key + " must be an array of numbers");
  }

  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& fallback) {
    const TomlValue* v = find(key);
    if (v == nullptr) return fallback;
    if (const auto* a = std::get_if<std::vector<std::string>>(&v->value)) return *a;
    fail(doc_.origin(), v->line, key + " must be an array of strings");
  }

  [[noreturn]] void fail_key(const std::string& key, const std::string& what) {
    const auto it = doc_.entries().find(key);
    fail(doc_.origin(), it == doc_.entries().end() ? 0 : it->second.line, key + " " + what);
  }

  void reject_unknown() const {
    for (const auto& [key, v] : doc_.entries()) {
      if (!used_.count(key)) fail(doc_.origin(), v.line, "unknown key " + key);
    }
  }

 private:
  const TomlDocument& doc_;
  std::set<std::string> used_;
};

atom::HalfInt half_int(Reader& r, const std::string& key, double fallback) {
  const double v = r.number(key, fallback);
  const double twice = 2.0 * v;
  if (twice != std::round(twice)) r.fail_key(key, "must be a multiple of 1/2");
  return atom::HalfInt{static_cast<int>(twice)};
}

pair::LevelFamily parse_family(const std::string& token) {
  static const std::regex re(R"(^(\d+)([spdfghik])(\d+)/2$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(token, m, re)) throw ConfigError("malformed level '" + token + "' (expected e.g. 80p3/2)");
  static const std::string letters = "spdfghik";
  const int n = std::stoi(m[1]);
  const int l = static_cast<int>(letters.find(static_cast<char>(std::tolower(static_cast<unsigned char>(m[2].str()[0])))));
  const int j2 = std::stoi(m[3]);
  if (j2 != 2 * l - 1 && j2 != 2 * l + 1) throw ConfigError("level '" + token + "' has j != l +- 1/2");
  if (n <= l) throw ConfigError("level '" + token + "' has n <= l");
  return pair::LevelFamily{n, l, atom::HalfInt{j2}};
}

}  // namespace

TomlDocument TomlDocument::parse(const std::string& text, const std::string& origin) {
  TomlDocument doc;
  doc.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string table;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[' && s.find('=') == std::string::npos) {
      if (s.back() != ']' || s.size() < 3) fail(origin, line_no, "malformed table header");
      table = trim(s.substr(1, s.size() - 2));
      if (!valid_key(table)) fail(origin, line_no, "malformed table name " + table);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (!valid_key(key)) fail(origin, line_no, "malformed key " + key);
    std::string value = trim(s.substr(eq + 1));
    const int start_line = line_no;
    // Multi-line arrays: keep reading until the bracket closes.
    if (!value.empty() && value.front() == '[') {
      while (std::count(value.begin(), value.end(), '[') > std::count(value.begin(), value.end(), ']')) {
        if (!std::getline(in, line)) fail(origin, start_line, "unterminated array");
        ++line_no;
        value += " " + trim(strip_comment(line));
      }
    }
    const std::string full = table.empty() ? key : table + "." + key;
    if (doc.entries_.count(full)) fail(origin, start_line, "duplicate key " + full);
    doc.entries_[full] = parse_value(value, origin, start_line);
  }
  return doc;
}

TomlDocument TomlDocument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string TomlDocument::canonical() const {
  std::string out;
  for (const auto& [k, v] : entries_) out += k + " = " + format_value(v) + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

pair::FoersterChannel parse_channel(const std::string& text) {
  std::istringstream in(text);
  std::string a, b, extra;
  if (!(in >> a >> b) || (in >> extra)) throw ConfigError("channel '" + text + "' must name two levels");
  return pair::FoersterChannel{parse_family(a), parse_family(b)};
}

RunConfig build_run_config(const TomlDocument& doc, const std::filesystem::path& base_dir) {
  Reader r(doc);
  RunConfig cfg;
  cfg.source = doc.origin();
  // Run-control keys (seed, jobs, output directory) do not enter the hash.
  std::istringstream lines(doc.canonical());
  for (std::string l; std::getline(lines, l);) {
    if (l.rfind("run.", 0) != 0) cfg.canonical += l + "\n";
  }

  cfg.seed = r.count("run.seed", 0, 0);
  cfg.jobs = static_cast<unsigned>(r.count("run.jobs", 1));
  cfg.output_dir = r.text("run.output_dir", ".");

  const std::filesystem::path data = r.text("species.data", "");
  if (data.empty()) r.fail_key("species.data", "is required");
  cfg.species_data = data.is_absolute() ? data : base_dir / data;
  cfg.control = r.text("species.control", "Rb87");
  cfg.target = r.text("species.target", "Rb85");

  cfg.rydberg.n = static_cast<int>(r.count("rydberg.n", 79, 2));
  cfg.rydberg.l = static_cast<int>(r.count("rydberg.l", 2, 0));
  cfg.rydberg.j = half_int(r, "rydberg.j", 2.5);
  cfg.rydberg_mj = half_int(r, "rydberg.mj", 2.5);
  if (std::abs(cfg.rydberg_mj.twice) > cfg.rydberg.j.twice) r.fail_key("rydberg.mj", "exceeds j");

  const auto channels = r.strings("channels.pairs", {});
  if (channels.empty()) {
    cfg.channels = pair::default_channels();
  } else {
    for (const auto& ch : channels) cfg.channels.push_back(parse_channel(ch));
  }

  cfg.z = r.positive("geometry.z_m", 3.8e-6);
  const double y_max = r.number("geometry.y_max_m", 30e-6);
  const auto y_points = r.count("geometry.y_points", 61);
  cfg.y_grid = r.numbers("geometry.y_grid_m", {});
  if (cfg.y_grid.empty()) {
    if (!(y_max >= 0.0)) r.fail_key("geometry.y_max_m", "must be non-negative");
    for (std::uint64_t i = 0; i < y_points; ++i) {
      cfg.y_grid.push_back(y_points == 1 ? 0.0 : y_max * static_cast<double>(i) / static_cast<double>(y_points - 1));
    }
  }
  for (std::size_t i = 0; i < cfg.y_grid.size(); ++i) {
    if (!(cfg.y_grid[i] >= 0.0) || (i > 0 && !(cfg.y_grid[i] > cfg.y_grid[i - 1]))) {
      r.fail_key("geometry.y_grid_m", "must be non-negative and increasing");
    }
  }

  cfg.field_gauss = r.number("field.b_gauss", 3.0);
  if (!(cfg.field_gauss >= 0.0)) r.fail_key("field.b_gauss", "must be non-negative");

  cfg.trap.omega_y = c::two_pi * r.positive("trap.f_y_hz", 1.39e3);
  cfg.trap.omega_r = c::two_pi * r.positive("trap.f_r_hz", 16.9e3);

  cfg.t87 = r.positive("thermal.t87_k", 8e-6);
  cfg.t85 = r.positive("thermal.t85_k", 9e-6);
  std::vector<double> sweep;
  for (int i = 0; i < 10; ++i) sweep.push_back(0.5e-6 * std::pow(80.0, i / 9.0));
  cfg.temperature_sweep = r.numbers("thermal.sweep_k", sweep);
  for (double t : cfg.temperature_sweep) {
    if (!(t > 0.0)) r.fail_key("thermal.sweep_k", "must be positive");
  }
  cfg.thermal_nodes = r.count("thermal.nodes", 64, 8);
  cfg.p85_points = r.count("thermal.p85_points", 61, 3);
  cfg.p85_y_max = r.positive("thermal.p85_y_max_m", 30e-6);

  cfg.omega85 = c::two_pi * r.positive("blockade.omega85_over_2pi_hz", 0.6e6);
  cfg.time_average.window_rabi_periods = r.positive("blockade.window_rabi_periods", 100.0);
  cfg.time_average.samples = r.count("blockade.samples", 1000, 100);

  const double red87 = c::two_pi * r.positive("rabi.red87_over_2pi_hz", 226e6);
  const double red85 = c::two_pi * r.positive("rabi.red85_over_2pi_hz", 206e6);
  const double blue = c::two_pi * r.positive("rabi.blue_over_2pi_hz", 28e6);
  const double delta = c::two_pi * r.positive("rabi.delta_int_over_2pi_hz", 4.8e9);
  cfg.rabi.raman87 = c::two_pi * r.positive("rabi.raman87_over_2pi_hz", 0.625e6);
  cfg.rabi.raman85 = c::two_pi * r.positive("rabi.raman85_over_2pi_hz", 0.625e6);
  cfg.rabi.rydberg87 = gate::effective_rabi(red87, blue, delta);
  cfg.rabi.rydberg85 = gate::effective_rabi(red85, blue, delta);

  const std::string preset = r.text("error_model.preset", "experiment");
  if (preset == "experiment") {
    cfg.error_model = gate::ErrorModel::experimental();
  } else if (preset == "ideal") {
    cfg.error_model = gate::ErrorModel::ideal();
  } else {
    r.fail_key("error_model.preset", "must be \"experiment\" or \"ideal\"");
  }
  auto& em = cfg.error_model;
  em.excitation_efficiency87 = r.unit("error_model.eff87", em.excitation_efficiency87);
  em.excitation_efficiency85 = r.unit("error_model.eff85", em.excitation_efficiency85);
  em.detection_efficiency = r.unit("error_model.detection", em.detection_efficiency);
  // The ideal preset keeps an infinite lifetime unless one is given.
  em.rydberg_lifetime = r.number("error_model.lifetime_s", em.rydberg_lifetime);
  if (!(em.rydberg_lifetime > 0.0)) r.fail_key("error_model.lifetime_s", "must be positive");
  em.raman_amplitude_drift = r.unit("error_model.raman_drift", em.raman_amplitude_drift);
  em.doppler.enabled = r.flag("error_model.doppler", em.doppler.enabled);
  const std::string blockade = r.text("error_model.blockade", preset == "ideal" ? "perfect" : "thermal");
  if (blockade == "thermal") {
    cfg.blockade = BlockadeMode::thermal;
  } else if (blockade == "perfect") {
    cfg.blockade = BlockadeMode::perfect;
  } else if (blockade == "none") {
    cfg.blockade = BlockadeMode::none;
  } else if (blockade == "fixed") {
    cfg.blockade = BlockadeMode::fixed;
  } else {
    r.fail_key("error_model.blockade", "must be thermal, perfect, none or fixed");
  }
  const double fixed_hz = r.number("error_model.blockade_shift_over_h_hz", 0.0);
  if (cfg.blockade == BlockadeMode::fixed && !(fixed_hz > 0.0)) {
    r.fail_key("error_model.blockade_shift_over_h_hz", "must be positive for fixed blockade");
  }
  cfg.fixed_shift = c::planck * fixed_hz;
  cfg.blockade_nodes = r.count("error_model.blockade_nodes", 32, 8);

  em.doppler.temperature = r.positive("doppler.t_k", 8e-6);
  em.doppler.dt = r.positive("doppler.dt_s", 3.6e-6);
  em.doppler.lambda1 = r.positive("doppler.lambda1_m", 480e-9);
  em.doppler.lambda2 = r.positive("doppler.lambda2_m", 780e-9);
  if (!(em.doppler.lambda1 < em.doppler.lambda2)) r.fail_key("doppler.lambda1_m", "must be below doppler.lambda2_m");
  cfg.doppler_mc_samples = r.count("doppler.mc_samples", 1000000, 1000);

  const std::string mode = r.text("simulation.mode", "exact");
  if (mode == "exact") {
    cfg.mode = SimulationMode::exact;
  } else if (mode == "sampled") {
    cfg.mode = SimulationMode::sampled;
  } else {
    r.fail_key("simulation.mode", "must be exact or sampled");
  }
  cfg.shots = r.count("simulation.shots", 150);
  cfg.exact.doppler_nodes = r.count("simulation.doppler_nodes", 12);
  cfg.exact.drift_nodes = r.count("simulation.drift_nodes", 6);

  cfg.cnot_phase_points = r.count("scan.cnot_phase_points", 25, 2);
  cfg.entangle_phi_points = r.count("scan.entangle_phi_points", 25, 8);
  cfg.demo_t_max = r.positive("scan.demo_t_max_s", 4e-6);
  cfg.demo_points = r.count("scan.demo_points", 41, 10);

  cfg.f_cnot_reference = r.unit("analysis.f_cnot_reference", 0.73);

  r.reject_unknown();

  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a64(cfg.canonical)));
  cfg.config_hash = hash;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  const TomlDocument doc = TomlDocument::load(path);
  return build_run_config(doc, path.parent_path());
}

}  // namespace rydgate::cli
