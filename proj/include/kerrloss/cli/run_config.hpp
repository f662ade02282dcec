#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../kerrloss.hpp"

namespace kerrloss::cli {

// Flat key=value run description. Every command is a pure function of this plus the seed.
struct RunConfig {
  ModelParams params{1.0, 0.0, 1.0, 0.0};
  int n_max = 12;
  std::vector<double> times{0.1, 1.0, 5.0};
  std::string initial = "vacuum";  // vacuum | fock | coherent | file
  int fock_n = 0;
  double alpha_re = 0.8;
  double alpha_im = 0.0;
  std::string initial_file;
  bool oracle = false;
  std::string heisenberg;  // "" or "a"
  double rtol = 1e-10;
  double atol = 1e-12;
  std::string grid = "auto";  // auto | fixed
  double J_max = 8.0;
  int N_J = 257;
  std::vector<double> noise_times{0.5, 2.0, 20.0};
  int draws = 5;
  std::uint64_t seed = 20240607;
  bool fault_flip_superdiag = false;
  std::string out = "out";

  // canonical text; "out" is excluded so relocating outputs keeps the hash
  std::string serialize(bool with_out = true) const;
  std::string hash() const;
  void set(const std::string& key, const std::string& value);
  void validate() const;
};

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': not a number: '" + v + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': not an integer: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ValidationError("config key '" + key + "': not a boolean: '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(key, item));
  }
  return out;
}

// FNV-1a, 64 bit
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace detail

inline std::string RunConfig::serialize(bool with_out) const {
  using detail::fmt;
  std::ostringstream os;
  os << "omega=" << fmt(params.omega) << '\n'
     << "U=" << fmt(params.U) << '\n'
     << "kappa1=" << fmt(params.kappa1) << '\n'
     << "kappa2=" << fmt(params.kappa2) << '\n'
     << "n_max=" << n_max << '\n'
     << "times=" << detail::fmt_list(times) << '\n'
     << "initial=" << initial << '\n'
     << "fock_n=" << fock_n << '\n'
     << "alpha_re=" << fmt(alpha_re) << '\n'
     << "alpha_im=" << fmt(alpha_im) << '\n'
     << "initial_file=" << initial_file << '\n'
     << "oracle=" << (oracle ? "true" : "false") << '\n'
     << "heisenberg=" << heisenberg << '\n'
     << "rtol=" << fmt(rtol) << '\n'
     << "atol=" << fmt(atol) << '\n'
     << "grid=" << grid << '\n'
     << "J_max=" << fmt(J_max) << '\n'
     << "N_J=" << N_J << '\n'
     << "noise_times=" << detail::fmt_list(noise_times) << '\n'
     << "draws=" << draws << '\n'
     << "seed=" << seed << '\n'
     << "fault_flip_superdiag=" << (fault_flip_superdiag ? "true" : "false") << '\n';
  if (with_out) os << "out=" << out << '\n';
  return os.str();
}

inline std::string RunConfig::hash() const {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << detail::fnv1a(serialize(false));
  return os.str();
}

inline void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = detail::trim(raw);
  if (key == "omega") params.omega = detail::parse_double(key, v);
  else if (key == "U") params.U = detail::parse_double(key, v);
  else if (key == "kappa1") params.kappa1 = detail::parse_double(key, v);
  else if (key == "kappa2") params.kappa2 = detail::parse_double(key, v);
  else if (key == "n_max" || key == "nmax") n_max = static_cast<int>(detail::parse_int(key, v));
  else if (key == "times") times = detail::parse_list(key, v);
  else if (key == "initial") initial = v;
  else if (key == "fock_n") fock_n = static_cast<int>(detail::parse_int(key, v));
  else if (key == "alpha_re" || key == "alpha") alpha_re = detail::parse_double(key, v);
  else if (key == "alpha_im") alpha_im = detail::parse_double(key, v);
  else if (key == "initial_file") initial_file = v;
  else if (key == "oracle") oracle = detail::parse_bool(key, v);
  else if (key == "heisenberg") heisenberg = v;
  else if (key == "rtol") rtol = detail::parse_double(key, v);
  else if (key == "atol") atol = detail::parse_double(key, v);
  else if (key == "grid") grid = v;
  else if (key == "J_max") J_max = detail::parse_double(key, v);
  else if (key == "N_J") N_J = static_cast<int>(detail::parse_int(key, v));
  else if (key == "noise_times") noise_times = detail::parse_list(key, v);
  else if (key == "draws") draws = static_cast<int>(detail::parse_int(key, v));
  else if (key == "seed") seed = static_cast<std::uint64_t>(detail::parse_int(key, v));
  else if (key == "fault_flip_superdiag") fault_flip_superdiag = detail::parse_bool(key, v);
  else if (key == "out") out = v;
  else throw ValidationError("unknown config key '" + key + "'");
}

inline void RunConfig::validate() const {
  params.validate();
  Truncation t(n_max);
  (void)t;
  for (double x : times)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("times must be finite and non-negative");
  for (double x : noise_times)
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("noise_times must be finite and non-negative");
  for (std::size_t i = 1; i < noise_times.size(); ++i)
    if (!(noise_times[i] > noise_times[i - 1])) throw ValidationError("noise_times must be increasing");
  if (initial != "vacuum" && initial != "fock" && initial != "coherent" && initial != "file")
    throw ValidationError("initial must be one of vacuum, fock, coherent, file");
  if (initial == "fock" && (fock_n < 0 || fock_n > n_max)) throw ValidationError("fock_n outside truncation");
  if (initial == "file" && initial_file.empty()) throw ValidationError("initial=file requires initial_file");
  if (!heisenberg.empty() && heisenberg != "a") throw ValidationError("heisenberg supports only 'a'");
  if (grid != "auto" && grid != "fixed") throw ValidationError("grid must be auto or fixed");
  if (grid == "fixed" && (N_J < 3 || N_J % 2 == 0 || !(J_max > 0.0)))
    throw ValidationError("fixed grid needs odd N_J >= 3 and J_max > 0");
  if (draws < 1) throw ValidationError("draws must be >= 1");
  if (!(rtol > 0.0) || !(atol > 0.0)) throw ValidationError("tolerances must be positive");
}

inline RunConfig parse_config_text(const std::string& text, RunConfig base = {}) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError("config line " + std::to_string(lineno) + ": expected key=value");
    base.set(detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

inline FockState initial_state(const RunConfig& c) {
  Truncation t(c.n_max);
  if (c.initial == "vacuum") return FockState::vacuum(t);
  if (c.initial == "fock") return FockState::fock(t, c.fock_n);
  if (c.initial == "coherent") return FockState::coherent(t, cplx(c.alpha_re, c.alpha_im));
  std::ifstream in(c.initial_file);
  if (!in) throw ValidationError("cannot read initial-state file '" + c.initial_file + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed initial-state file: ") + e.what());
  }
  FockState s = fock_state_from_json(j);
  if (s.truncation().n_max() != c.n_max) throw DimensionError("initial-state file n_max differs from config n_max");
  return s;
}

}  // namespace kerrloss::cli
