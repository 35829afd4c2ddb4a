#pragma once

// Experiment configuration: flat `key = value` text with dotted section
// names. A `[section]` header prefixes the keys that follow it, so
//
//   [grid]
//   M = 128
//
// and `grid.M = 128` are equivalent. `#` starts a comment. Unknown keys and
// repeated keys are rejected. Values that are not set resolve to defaults
// that depend on the command (BER runs default to a smaller grid and RRC).

#include <charconv>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dfts_otfs/channel_receiver.hpp"

namespace dfts_otfs {

enum class Command { ccdf, bounds, ber, g0, selftest };

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace detail

/// Every accepted key, in echo order.
inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "grid.M",           "grid.N",
      "grid.Q",           "grid.delta_tau",
      "scheme",           "spreading",
      "qam.order",        "pulse.kind",
      "pulse.beta",       "pulse.span",
      "pulse.oversample", "cp_len",
      "channel.profile",  "channel.carrier_hz",
      "channel.velocity_kmh", "montecarlo.frames",
      "montecarlo.seed",  "montecarlo.threads",
      "snr_db",           "output",
      "papr.normalization", "papr.include_cp",
      "papr.user",        "sweep.betas",
      "g0.grid_points",
  };
  return keys;
}

/// Keys that change how a run executes but not what it computes; they are
/// left out of the CSV header so output bytes do not depend on them.
inline bool is_execution_key(const std::string& key) {
  return key == "montecarlo.threads" || key == "output";
}

class ExperimentConfig {
 public:
  ExperimentConfig() = default;

  static ExperimentConfig parse(std::string_view text) {
    ExperimentConfig cfg;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = detail::trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
        section = detail::trim(std::string_view(t).substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected `key = value`");
      }
      std::string key = detail::trim(std::string_view(t).substr(0, eq));
      if (!section.empty()) key = section + "." + key;
      if (cfg.has(key)) throw ConfigError("duplicate key: " + key);
      cfg.set(key, detail::trim(std::string_view(t).substr(eq + 1)));
    }
    return cfg;
  }

  /// Sets or overrides a key; unknown keys are rejected.
  void set(const std::string& key, const std::string& value) {
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("unknown config key: " + key);
    }
    values_[key] = value;
  }

  /// Applies a `key=value` override string.
  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + assignment);
    set(detail::trim(std::string_view(assignment).substr(0, eq)),
        detail::trim(std::string_view(assignment).substr(eq + 1)));
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> raw(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Fully resolved, typed settings for one command.
struct ResolvedConfig {
  Command command = Command::ccdf;
  int M = 128, N = 32, Q = 4;
  double delta_tau = 1.0 / 7.68e6;
  Scheme scheme = Scheme::interleaved;
  bool spreading = true;
  int qam_order = 16;
  PulseSpec pulse;
  int cp_len = 0;
  std::string channel_profile = "eva";
  double carrier_hz = 4e9;
  double velocity_kmh = 500.0;
  int frames = 10000;
  std::uint64_t seed = 1;
  int threads = 0;
  std::vector<double> snr_db;
  std::string output;
  PaprNormalization normalization = PaprNormalization::expected;
  bool include_cp = false;
  int user = 0;
  std::vector<double> betas;
  int g0_grid_points = 4000;

  GridConfig grid() const { return GridConfig(M, N, Q, delta_tau); }

  DelayProfile profile() const {
    if (channel_profile == "eva") return eva_profile();
    if (channel_profile == "identity") return identity_profile();
    return load_delay_profile(channel_profile);
  }

  /// `key = value` lines describing this run, execution-only keys omitted.
  std::vector<std::pair<std::string, std::string>> echo() const {
    std::vector<std::pair<std::string, std::string>> out;
    const auto add = [&](const char* k, std::string v) { out.emplace_back(k, std::move(v)); };
    add("grid.M", std::to_string(M));
    add("grid.N", std::to_string(N));
    add("grid.Q", std::to_string(Q));
    add("grid.delta_tau", detail::format_double(delta_tau));
    add("scheme", to_string(scheme));
    add("spreading", spreading ? "true" : "false");
    add("qam.order", std::to_string(qam_order));
    add("pulse.kind", to_string(pulse.kind));
    add("pulse.beta", detail::format_double(pulse.beta));
    add("pulse.span", std::to_string(pulse.span));
    add("pulse.oversample", std::to_string(pulse.oversample));
    add("cp_len", std::to_string(cp_len));
    if (command == Command::ber) {
      add("channel.profile", channel_profile);
      add("channel.carrier_hz", detail::format_double(carrier_hz));
      add("channel.velocity_kmh", detail::format_double(velocity_kmh));
      add("snr_db", detail::join_doubles(snr_db));
    }
    add("montecarlo.frames", std::to_string(frames));
    add("montecarlo.seed", std::to_string(seed));
    if (command == Command::ccdf) {
      add("papr.normalization", to_string(normalization));
      add("papr.include_cp", include_cp ? "true" : "false");
      add("papr.user", std::to_string(user));
    }
    if (command == Command::bounds || command == Command::g0) {
      add("sweep.betas", detail::join_doubles(betas));
    }
    if (command == Command::g0) add("g0.grid_points", std::to_string(g0_grid_points));
    return out;
  }
};

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf" || v == "+inf") return INFINITY;
  if (v == "-inf") return -INFINITY;
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": expected a number, got `" + v + "`");
  return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected an integer, got `" + v + "`");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got `" + v + "`");
}

/// Comma-separated values, or `start:step:stop` (inclusive).
inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  if (v.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(v);
    std::string p;
    while (std::getline(ss, p, ':')) parts.push_back(trim(p));
    if (parts.size() != 3) throw ConfigError(key + ": range must be start:step:stop");
    const double start = parse_double(key, parts[0]);
    const double step = parse_double(key, parts[1]);
    const double stop = parse_double(key, parts[2]);
    if (!(step > 0.0) || stop < start) throw ConfigError(key + ": invalid range `" + v + "`");
    const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= count; ++i) out.push_back(start + step * i);
    return out;
  }
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

}  // namespace detail

/// Resolves typed settings for `command`, applying command-dependent defaults
/// and validating ranges. Errors name the offending key.
inline ResolvedConfig resolve(const ExperimentConfig& cfg, Command command) {
  using namespace detail;
  ResolvedConfig r;
  r.command = command;
  const bool ber = command == Command::ber;
  const auto str = [&](const char* key, std::string def) { return cfg.raw(key).value_or(def); };
  const auto integer = [&](const char* key, long long def) {
    const auto v = cfg.raw(key);
    return v ? parse_int(key, *v) : def;
  };
  const auto real = [&](const char* key, double def) {
    const auto v = cfg.raw(key);
    return v ? parse_double(key, *v) : def;
  };
  const auto boolean = [&](const char* key, bool def) {
    const auto v = cfg.raw(key);
    return v ? parse_bool(key, *v) : def;
  };

  r.M = static_cast<int>(integer("grid.M", ber ? 32 : 128));
  r.N = static_cast<int>(integer("grid.N", ber ? 16 : 32));
  r.Q = static_cast<int>(integer("grid.Q", 4));
  r.delta_tau = real("grid.delta_tau", 1.0 / 7.68e6);
  if (r.M < 1) throw ConfigError("grid.M: must be >= 1");
  if (r.N < 1) throw ConfigError("grid.N: must be >= 1");
  if (r.Q < 1 || r.N % r.Q != 0) throw ConfigError("grid.Q: must divide grid.N");
  if (!(r.delta_tau > 0.0)) throw ConfigError("grid.delta_tau: must be positive");

  const std::string scheme = str("scheme", "interleaved");
  if (scheme == "interleaved") {
    r.scheme = Scheme::interleaved;
  } else if (scheme == "block") {
    r.scheme = Scheme::block;
  } else {
    throw ConfigError("scheme: expected interleaved or block, got `" + scheme + "`");
  }
  r.spreading = boolean("spreading", true);
  r.qam_order = static_cast<int>(integer("qam.order", 16));
  try {
    QamConstellation check(r.qam_order);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("qam.order: ") + e.what());
  }

  const std::string kind = str("pulse.kind", ber ? "rrc" : "rect");
  if (kind == "rect") {
    r.pulse.kind = PulseKind::rect;
  } else if (kind == "rrc") {
    r.pulse.kind = PulseKind::rrc;
  } else {
    throw ConfigError("pulse.kind: expected rect or rrc, got `" + kind + "`");
  }
  r.pulse.beta = real("pulse.beta", 0.5);
  r.pulse.span = static_cast<int>(integer("pulse.span", 10));
  const std::string os = str("pulse.oversample", "auto");
  if (os == "auto") {
    r.pulse.oversample = r.pulse.kind == PulseKind::rect ? 1 : (ber ? 4 : 16);
  } else {
    r.pulse.oversample = static_cast<int>(parse_int("pulse.oversample", os));
  }
  if (!(r.pulse.beta >= 0.0 && r.pulse.beta <= 1.0)) throw ConfigError("pulse.beta: must lie in [0, 1]");
  if (r.pulse.span < 1) throw ConfigError("pulse.span: must be >= 1");
  if (r.pulse.oversample < 1) throw ConfigError("pulse.oversample: must be >= 1");

  r.channel_profile = str("channel.profile", "eva");
  r.carrier_hz = real("channel.carrier_hz", 4e9);
  r.velocity_kmh = real("channel.velocity_kmh", 500.0);
  if (!(r.carrier_hz > 0.0)) throw ConfigError("channel.carrier_hz: must be positive");
  if (r.velocity_kmh < 0.0) throw ConfigError("channel.velocity_kmh: must be >= 0");

  const std::string cp = str("cp_len", "auto");
  if (cp == "auto") {
    // PAPR runs have no channel; BER runs cover the profile's delay spread.
    r.cp_len = ber ? default_cp_len(r.profile(), r.delta_tau) : 0;
  } else {
    r.cp_len = static_cast<int>(parse_int("cp_len", cp));
    if (r.cp_len < 0 || r.cp_len > r.M * r.N) throw ConfigError("cp_len: must lie in [0, M*N]");
  }

  r.frames = static_cast<int>(integer("montecarlo.frames", ber ? 20 : 10000));
  if (r.frames < 1) throw ConfigError("montecarlo.frames: must be >= 1");
  if (command == Command::ccdf && r.frames < 100) {
    throw ConfigError("montecarlo.frames: CCDF needs at least 100 frames");
  }
  const long long seed = integer("montecarlo.seed", 1);
  if (seed < 0) throw ConfigError("montecarlo.seed: must be >= 0");
  r.seed = static_cast<std::uint64_t>(seed);
  r.threads = static_cast<int>(integer("montecarlo.threads", 0));
  if (r.threads < 0) throw ConfigError("montecarlo.threads: must be >= 0");

  r.snr_db = parse_list("snr_db", str("snr_db", "0:2.5:30"));
  r.output = str("output", "");

  const std::string norm = str("papr.normalization", "expected");
  if (norm == "expected") {
    r.normalization = PaprNormalization::expected;
  } else if (norm == "empirical") {
    r.normalization = PaprNormalization::empirical;
  } else {
    throw ConfigError("papr.normalization: expected `expected` or `empirical`, got `" + norm + "`");
  }
  r.include_cp = boolean("papr.include_cp", false);
  r.user = static_cast<int>(integer("papr.user", 0));
  if (r.user < 0 || r.user >= r.Q) throw ConfigError("papr.user: must lie in [0, Q)");

  r.betas = parse_list("sweep.betas", str("sweep.betas", "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9"));
  for (double b : r.betas) {
    if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("sweep.betas: values must lie in [0, 1]");
  }
  r.g0_grid_points = static_cast<int>(integer("g0.grid_points", 4000));
  if (r.g0_grid_points < 1000) throw ConfigError("g0.grid_points: must be >= 1000");
  return r;
}

}  // namespace dfts_otfs
