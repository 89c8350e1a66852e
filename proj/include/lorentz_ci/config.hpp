#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "lorentz_ci/error.hpp"

namespace lorentz_ci {

enum class Command { Corrugate, Search, Rigidity, Modulus };

/// Fully resolved run configuration.
struct RunConfig {
  Command command = Command::Corrugate;
  int grid_n = 256;
  double epsilon = 0.05;
  double rho = 0.1;
  std::complex<double> w0{0.0, 1.0};
  std::vector<int> n_policy;  // empty = auto; corrugate: sweep, search: one per term
  int word_len = 8;
  std::string output_dir = "out";
  unsigned long long seed = 0;
  // corrugate: eta(x, y) = eta * (1 + eta_modulation sin 2 pi y), form dx
  double eta = 0.75;
  double eta_modulation = 0.0;
  // modulus: constant metric E,F,G
  std::array<double, 3> metric{1.0, 0.0, 1.0};
};

inline std::string command_name(Command c) {
  switch (c) {
    case Command::Corrugate: return "corrugate";
    case Command::Search: return "search";
    case Command::Rigidity: return "rigidity";
    case Command::Modulus: return "modulus";
  }
  return "?";
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] inline void config_fail(const std::string& key, int line, const std::string& why) {
  std::string where = "key '" + key + "'";
  if (line > 0) where += " (line " + std::to_string(line) + ")";
  throw Error(ErrorCode::ConfigError, where + ": " + why);
}

inline bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && p == end && std::isfinite(out);
}

inline bool parse_int(const std::string& s, long long& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* end = t.data() + t.size();
  auto [p, ec] = std::from_chars(t.data(), end, out);
  return ec == std::errc() && p == end;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace detail

/// Parses "a+bi", "a-bi", "bi", "i", "-i" or a bare real.
inline bool parse_complex(const std::string& text, std::complex<double>& out) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s += c;
  if (s.empty()) return false;
  if (s.back() != 'i') {
    double re;
    if (!detail::parse_double(s, re)) return false;
    out = {re, 0.0};
    return true;
  }
  s.pop_back();
  // split at the last sign that is not an exponent sign or the leading one
  std::size_t cut = std::string::npos;
  for (std::size_t k = s.size(); k-- > 1;) {
    if ((s[k] == '+' || s[k] == '-') && s[k - 1] != 'e' && s[k - 1] != 'E') {
      cut = k;
      break;
    }
  }
  std::string re_part = cut == std::string::npos ? "" : s.substr(0, cut);
  std::string im_part = cut == std::string::npos ? s : s.substr(cut);
  if (im_part.empty() || im_part == "+") im_part = "1";
  if (im_part == "-") im_part = "-1";
  if (im_part[0] == '+') im_part.erase(0, 1);
  double re = 0.0, im;
  if (!re_part.empty() && !detail::parse_double(re_part, re)) return false;
  if (!detail::parse_double(im_part, im)) return false;
  out = {re, im};
  return true;
}

/// Sets one key; `line` is 0 for command-line values. Validates the value.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value, int line = 0) {
  using detail::config_fail;
  double d;
  long long k;
  if (key == "command") {
    const std::string v = detail::trim(value);
    if (v == "corrugate") cfg.command = Command::Corrugate;
    else if (v == "search") cfg.command = Command::Search;
    else if (v == "rigidity") cfg.command = Command::Rigidity;
    else if (v == "modulus") cfg.command = Command::Modulus;
    else config_fail(key, line, "unknown command '" + v + "'");
  } else if (key == "grid_n") {
    if (!detail::parse_int(value, k) || k < 8 || k > 1 << 14) config_fail(key, line, "expected an integer >= 8");
    cfg.grid_n = static_cast<int>(k);
  } else if (key == "epsilon") {
    if (!detail::parse_double(value, d) || !(d > 0.0)) config_fail(key, line, "expected a positive real");
    cfg.epsilon = d;
  } else if (key == "rho") {
    if (!detail::parse_double(value, d) || !(d >= 0.0)) config_fail(key, line, "expected a nonnegative real");
    cfg.rho = d;
  } else if (key == "w0") {
    std::complex<double> w;
    if (!parse_complex(value, w) || !(w.imag() > 0.0)) config_fail(key, line, "expected a complex number with Im > 0");
    cfg.w0 = w;
  } else if (key == "n_policy") {
    const std::string v = detail::trim(value);
    if (v == "auto") {
      cfg.n_policy.clear();
    } else {
      std::vector<int> ns;
      for (const auto& item : detail::split(v, ',')) {
        if (!detail::parse_int(item, k) || k < 1 || k > (1 << 26)) config_fail(key, line, "expected 'auto' or positive integers");
        ns.push_back(static_cast<int>(k));
      }
      if (ns.empty()) config_fail(key, line, "empty list");
      cfg.n_policy = ns;
    }
  } else if (key == "word_len") {
    if (!detail::parse_int(value, k) || k < 1 || k > 12) config_fail(key, line, "expected an integer in [1, 12]");
    cfg.word_len = static_cast<int>(k);
  } else if (key == "output_dir") {
    const std::string v = detail::trim(value);
    if (v.empty()) config_fail(key, line, "empty path");
    cfg.output_dir = v;
  } else if (key == "seed") {
    if (!detail::parse_int(value, k) || k < 0) config_fail(key, line, "expected a nonnegative integer");
    cfg.seed = static_cast<unsigned long long>(k);
  } else if (key == "eta") {
    if (!detail::parse_double(value, d) || !(d > 0.0 && d < 1.0)) config_fail(key, line, "expected a real in (0, 1)");
    cfg.eta = d;
  } else if (key == "eta_modulation") {
    if (!detail::parse_double(value, d) || !(std::abs(d) < 1.0)) config_fail(key, line, "expected |value| < 1");
    cfg.eta_modulation = d;
  } else if (key == "metric") {
    const auto parts = detail::split(value, ',');
    std::array<double, 3> m{};
    if (parts.size() != 3) config_fail(key, line, "expected E,F,G");
    for (int i = 0; i < 3; ++i)
      if (!detail::parse_double(parts[i], m[i])) config_fail(key, line, "expected E,F,G");
    if (!(m[0] > 0.0 && m[0] * m[2] - m[1] * m[1] > 0.0)) config_fail(key, line, "metric is not positive definite");
    cfg.metric = m;
  } else {
    config_fail(key, line, "unknown key");
  }
}

/// Flat `key = value` file; blank lines and `#` comments are ignored.
inline void apply_config_stream(RunConfig& cfg, std::istream& in) {
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) detail::config_fail(s, line, "expected key = value");
    apply_setting(cfg, detail::trim(s.substr(0, eq)), s.substr(eq + 1), line);
  }
}

/// key -> value strings for echoing into reports, in a fixed order.
inline std::vector<std::pair<std::string, std::string>> describe(const RunConfig& cfg) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  std::string np;
  if (cfg.n_policy.empty()) {
    np = "auto";
  } else {
    for (std::size_t i = 0; i < cfg.n_policy.size(); ++i) np += (i ? "," : "") + std::to_string(cfg.n_policy[i]);
  }
  return {{"command", command_name(cfg.command)},
          {"grid_n", std::to_string(cfg.grid_n)},
          {"epsilon", num(cfg.epsilon)},
          {"rho", num(cfg.rho)},
          {"w0", num(cfg.w0.real()) + (cfg.w0.imag() < 0 ? "" : "+") + num(cfg.w0.imag()) + "i"},
          {"n_policy", np},
          {"word_len", std::to_string(cfg.word_len)},
          {"output_dir", cfg.output_dir},
          {"seed", std::to_string(cfg.seed)},
          {"eta", num(cfg.eta)},
          {"eta_modulation", num(cfg.eta_modulation)},
          {"metric", num(cfg.metric[0]) + "," + num(cfg.metric[1]) + "," + num(cfg.metric[2])}};
}

}  // namespace lorentz_ci
