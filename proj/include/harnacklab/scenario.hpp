#pragma once
// Flat key = value scenario configs with dotted section prefixes.  The
// format is deliberately dependency-free and diffable; every key is
// validated eagerly so a typo fails the parse, not a check three minutes
// into a run.

#include <array>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "harnacklab/entropy.hpp"
#include "harnacklab/errors.hpp"
#include "harnacklab/geometry.hpp"
#include "harnacklab/harnack.hpp"

namespace harnacklab {

/// Named initial-data profile; the numeric slots depend on the kind:
/// constant(value) | delta(ca, cb, sigma) | offset_sine(base, amp).
struct InitSpec {
  std::string kind = "constant";
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
};

/// Initial conformal factor profile: zero | constant(v) | sine2d(amp)
/// on the torus | cos_theta(amp) on the rotationally symmetric sphere.
struct Phi0Spec {
  std::string kind = "zero";
  double amp = 0.0;
};

struct PairSpec {
  double x1 = 0.0, y1 = 0.0, tau1 = 0.0;
  double x2 = 0.0, y2 = 0.0, tau2 = 0.0;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 42;

  // geometry
  ManifoldKind kind = ManifoldKind::ConformalTorus2D;
  int n = 2;
  int grid = 64;
  double length = 1.0;
  double r0 = 1.0;
  Phi0Spec phi0;
  double T = 1.0;
  double tau0 = 0.01;
  long steps = 0;  ///< 0 = adaptive

  // equation
  double c = -2.0;
  InitSpec init;
  double tau_end = 0.0;  ///< 0 = run to T
  int records = 257;
  InitSpec pairing_init;

  // checks
  std::vector<std::string> presets;
  double tolerance = 0.0;  ///< nonpositivity allowance; 0 = scale-aware auto
  std::vector<EntropyKind> entropy;
  double entropy_tolerance = 1e-8;
  bool mass = false;
  double mass_tolerance = 1e-6;
  bool pairing = false;
  std::vector<PairSpec> pairs;
  int paths_random = 0;
  int path_segments = 64;
  std::vector<int> residual_levels;
  std::vector<std::string> residual_presets;
  bool li_yau = false;
  double li_lo = 0.05, li_hi = 1.0;
  int li_grid = 512, li_samples = 33;

  // output
  std::string csv;
  std::string json;
  bool plots = false;

  bool any_checks() const {
    return !presets.empty() || !entropy.empty() || mass || pairing ||
           !pairs.empty() || paths_random > 0 || !residual_levels.empty() ||
           li_yau;
  }

  /// True when some check needs a backward solution.
  bool needs_solution() const {
    return !presets.empty() || !entropy.empty() || mass || pairing ||
           !pairs.empty() || paths_random > 0;
  }

  ManifoldSpec manifold() const {
    ManifoldSpec spec;
    spec.kind = kind;
    spec.n = n;
    spec.grid = grid;
    spec.length = length;
    spec.r0 = r0;
    return spec;
  }

  double effective_tau_end() const { return tau_end > 0.0 ? tau_end : T; }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

[[noreturn]] inline void bad_line(int line, const std::string& why) {
  throw ConfigError("line " + std::to_string(line) + ": " + why);
}

inline double parse_num(const std::string& tok, int line) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    bad_line(line, "expected a number, got '" + tok + "'");
  }
  if (used != tok.size()) bad_line(line, "trailing junk in number '" + tok + "'");
  return v;
}

inline long parse_int(const std::string& tok, int line) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
    bad_line(line, "expected an integer, got '" + tok + "'");
  }
  if (used != tok.size()) bad_line(line, "trailing junk in integer '" + tok + "'");
  return v;
}

inline bool parse_bool(const std::string& tok, int line) {
  if (tok == "true" || tok == "on" || tok == "1") return true;
  if (tok == "false" || tok == "off" || tok == "0") return false;
  bad_line(line, "expected true/false, got '" + tok + "'");
}

inline std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      const std::string t = trim(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  const std::string t = trim(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

inline InitSpec parse_init(const std::vector<std::string>& toks, int line) {
  if (toks.empty()) bad_line(line, "empty initial-data spec");
  InitSpec init;
  init.kind = toks[0];
  if (init.kind == "constant") {
    if (toks.size() != 2) bad_line(line, "constant takes one value");
    init.a = parse_num(toks[1], line);
  } else if (init.kind == "delta") {
    if (toks.size() != 4) bad_line(line, "delta takes center-a center-b sigma");
    init.a = parse_num(toks[1], line);
    init.b = parse_num(toks[2], line);
    init.c = parse_num(toks[3], line);
  } else if (init.kind == "offset_sine") {
    if (toks.size() != 3) bad_line(line, "offset_sine takes base amp");
    init.a = parse_num(toks[1], line);
    init.b = parse_num(toks[2], line);
  } else {
    bad_line(line, "unknown initial-data kind '" + init.kind + "'");
  }
  return init;
}

}  // namespace detail

/// Parse a scenario from config text.  Unknown keys, duplicate keys (except
/// the accumulating checks.pair) and malformed values all raise ConfigError
/// with the offending line number.
inline Scenario parse_scenario(const std::string& text) {
  using detail::bad_line;
  Scenario s;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string stripped = detail::trim(raw);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) bad_line(line, "expected key = value");
    const std::string key = detail::trim(stripped.substr(0, eq));
    const std::string value = detail::trim(stripped.substr(eq + 1));
    if (key.empty()) bad_line(line, "empty key");
    if (value.empty()) bad_line(line, "empty value for '" + key + "'");
    if (key != "checks.pair" && !seen.insert(key).second)
      bad_line(line, "duplicate key '" + key + "'");
    const auto toks = detail::tokens(value);

    if (key == "name") {
      s.name = value;
    } else if (key == "seed") {
      s.seed = static_cast<std::uint64_t>(detail::parse_int(value, line));
    } else if (key == "geometry.kind") {
      if (value == "torus") s.kind = ManifoldKind::ConformalTorus2D;
      else if (value == "rotsym_sphere") s.kind = ManifoldKind::RotSymSphere2D;
      else if (value == "round_sphere") s.kind = ManifoldKind::RoundSphere;
      else bad_line(line, "unknown geometry.kind '" + value + "'");
    } else if (key == "geometry.n") {
      s.n = static_cast<int>(detail::parse_int(value, line));
    } else if (key == "geometry.grid") {
      s.grid = static_cast<int>(detail::parse_int(value, line));
    } else if (key == "geometry.length") {
      s.length = detail::parse_num(value, line);
    } else if (key == "geometry.r0") {
      s.r0 = detail::parse_num(value, line);
    } else if (key == "geometry.phi0") {
      if (toks[0] == "zero") {
        if (toks.size() != 1) bad_line(line, "zero takes no arguments");
        s.phi0 = {"zero", 0.0};
      } else if (toks[0] == "constant" || toks[0] == "sine2d" ||
                 toks[0] == "cos_theta") {
        if (toks.size() != 2) bad_line(line, toks[0] + " takes one amplitude");
        s.phi0 = {toks[0], detail::parse_num(toks[1], line)};
      } else {
        bad_line(line, "unknown phi0 profile '" + toks[0] + "'");
      }
    } else if (key == "geometry.T") {
      s.T = detail::parse_num(value, line);
    } else if (key == "geometry.tau0") {
      s.tau0 = detail::parse_num(value, line);
    } else if (key == "geometry.steps") {
      s.steps = (value == "auto") ? 0 : detail::parse_int(value, line);
    } else if (key == "equation.c") {
      s.c = detail::parse_num(value, line);
    } else if (key == "equation.init") {
      s.init = detail::parse_init(toks, line);
    } else if (key == "equation.tau_end") {
      s.tau_end = detail::parse_num(value, line);
    } else if (key == "equation.records") {
      s.records = static_cast<int>(detail::parse_int(value, line));
    } else if (key == "equation.pairing_init") {
      s.pairing_init = detail::parse_init(toks, line);
    } else if (key == "checks.presets") {
      s.presets = detail::split_csv(value);
    } else if (key == "checks.tolerance") {
      s.tolerance = detail::parse_num(value, line);
    } else if (key == "checks.entropy") {
      for (const auto& item : detail::split_csv(value)) {
        if (item == "F") s.entropy.push_back(EntropyKind::F);
        else if (item == "W") s.entropy.push_back(EntropyKind::W);
        else bad_line(line, "unknown entropy kind '" + item + "'");
      }
    } else if (key == "checks.entropy_tolerance") {
      s.entropy_tolerance = detail::parse_num(value, line);
    } else if (key == "checks.mass") {
      s.mass = detail::parse_bool(value, line);
    } else if (key == "checks.mass_tolerance") {
      s.mass_tolerance = detail::parse_num(value, line);
    } else if (key == "checks.pairing") {
      s.pairing = detail::parse_bool(value, line);
    } else if (key == "checks.pair") {
      if (toks.size() != 6) bad_line(line, "pair takes x1 y1 tau1 x2 y2 tau2");
      PairSpec p;
      p.x1 = detail::parse_num(toks[0], line);
      p.y1 = detail::parse_num(toks[1], line);
      p.tau1 = detail::parse_num(toks[2], line);
      p.x2 = detail::parse_num(toks[3], line);
      p.y2 = detail::parse_num(toks[4], line);
      p.tau2 = detail::parse_num(toks[5], line);
      s.pairs.push_back(p);
    } else if (key == "checks.paths_random") {
      s.paths_random = static_cast<int>(detail::parse_int(value, line));
    } else if (key == "checks.path_segments") {
      s.path_segments = static_cast<int>(detail::parse_int(value, line));
    } else if (key == "checks.residual_levels") {
      for (const auto& item : detail::split_csv(value))
        s.residual_levels.push_back(
            static_cast<int>(detail::parse_int(item, line)));
    } else if (key == "checks.residual_presets") {
      s.residual_presets = detail::split_csv(value);
    } else if (key == "checks.li_yau") {
      if (toks.size() != 2 && toks.size() != 4)
        bad_line(line, "li_yau takes t_lo t_hi [grid samples]");
      s.li_yau = true;
      s.li_lo = detail::parse_num(toks[0], line);
      s.li_hi = detail::parse_num(toks[1], line);
      if (toks.size() == 4) {
        s.li_grid = static_cast<int>(detail::parse_int(toks[2], line));
        s.li_samples = static_cast<int>(detail::parse_int(toks[3], line));
      }
    } else if (key == "output.csv") {
      s.csv = value;
    } else if (key == "output.json") {
      s.json = value;
    } else if (key == "output.plots") {
      s.plots = detail::parse_bool(value, line);
    } else {
      bad_line(line, "unknown key '" + key + "'");
    }
  }
  return s;
}

/// Cross-field validation; raises ConfigError with a readable message.
inline void validate_scenario(const Scenario& s) {
  auto fail = [](const std::string& why) { throw ConfigError(why); };
  try {
    s.manifold().validate();
  } catch (const Error& e) {
    fail(std::string("geometry: ") + e.what());
  }
  if (!(s.T > 0.0)) fail("geometry.T must be positive");
  if (!(s.tau0 > 0.0 && s.tau0 < s.T)) fail("need 0 < tau0 < T");
  if (s.steps != 0 && s.steps < 16) fail("geometry.steps must be auto or >= 16");
  const double tau_end = s.effective_tau_end();
  if (!(tau_end > s.tau0 && tau_end <= s.T))
    fail("equation.tau_end must lie in (tau0, T]");
  if (s.records < 2) fail("equation.records must be at least 2");
  if (s.tolerance < 0.0) fail("checks.tolerance must be >= 0 (0 = auto)");
  if (s.entropy_tolerance <= 0.0) fail("checks.entropy_tolerance must be positive");
  if (s.mass_tolerance <= 0.0) fail("checks.mass_tolerance must be positive");
  if (s.paths_random < 0) fail("checks.paths_random must be >= 0");
  if (s.path_segments < 1) fail("checks.path_segments must be >= 1");

  if (s.kind == ManifoldKind::RoundSphere) {
    if (s.phi0.kind != "zero")
      fail("phi0 profiles do not apply to the homogeneous sphere");
  } else if (s.kind == ManifoldKind::ConformalTorus2D) {
    if (s.phi0.kind == "cos_theta") fail("cos_theta phi0 needs rotsym_sphere");
  } else {
    if (s.phi0.kind == "sine2d") fail("sine2d phi0 needs torus geometry");
  }

  for (const auto& name : s.presets) {
    const HarnackParams p = preset(name);  // throws on unknown name
    if (p.c != s.c)
      fail("preset " + name + " requires equation.c = " + std::to_string(p.c));
  }
  for (const auto& name : s.residual_presets)
    (void)preset(name);
  if (!s.residual_presets.empty() && s.residual_levels.empty())
    fail("checks.residual_presets needs checks.residual_levels");
  if (!s.residual_levels.empty() && s.residual_presets.empty())
    fail("checks.residual_levels needs checks.residual_presets");
  for (int g : s.residual_levels)
    if (g < 8) fail("residual grid levels must be >= 8");
  for (EntropyKind kind : s.entropy) {
    const double want = (kind == EntropyKind::F) ? -2.0 : -1.0;
    if (s.c != want)
      fail("entropy " + to_string(kind) + " requires equation.c = " +
           std::to_string(want));
  }
  if ((s.mass || s.pairing) && s.c != -1.0)
    fail("mass and pairing conservation hold for equation.c = -1 only");
  if ((!s.pairs.empty() || s.paths_random > 0) && s.c != -2.0 && s.c != -1.0)
    fail("integrated inequality checks need equation.c = -2 or -1");
  if (s.li_yau) {
    if (!(s.li_lo > 0.0 && s.li_hi > s.li_lo)) fail("li_yau needs 0 < t_lo < t_hi");
    if (s.li_grid < 16 || s.li_samples < 2) fail("li_yau grid/samples too small");
  }
  if (s.init.kind == "delta" && s.init.c <= 0.0 &&
      s.kind != ManifoldKind::RoundSphere)
    fail("delta initial data needs a positive sigma");
  if (s.init.kind == "constant" && s.init.a <= 0.0)
    fail("constant initial data must be positive");
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  Scenario s = parse_scenario(buf.str());
  validate_scenario(s);
  return s;
}

}  // namespace harnacklab
