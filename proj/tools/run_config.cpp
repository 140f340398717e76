/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/

#include "run_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "sdews/error.hpp"

namespace sdews::cli {

using nlohmann::json;

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "sample", "converge", "tvd", "time-average", "fpe-check", "oracle",
      "ctmc-check"};
  return names;
}

// ---------------------------------------------------------------------------
// Scalar parsing

std::uint64_t parse_count(std::string_view text) {
  const auto fail = [&]() -> std::uint64_t {
    throw ConfigError("'" + std::string(text) +
                      "' is not a non-negative integer count (max 2^63-1)");
  };
  std::size_t pos = 0;
  if (pos < text.size() && text[pos] == '+') ++pos;
  std::string digits;
  std::size_t int_digits = 0;
  while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
    digits += text[pos++];
    ++int_digits;
  }
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      digits += text[pos++];
    }
  }
  if (digits.empty()) return fail();
  long exponent = 0;
  if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
    ++pos;
    bool negative = false;
    if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) {
      negative = text[pos] == '-';
      ++pos;
    }
    const auto* begin = text.data() + pos;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, exponent);
    if (ec != std::errc() || ptr == begin || exponent > 1000) return fail();
    pos = static_cast<std::size_t>(ptr - text.data());
    if (negative) exponent = -exponent;
  }
  if (pos != text.size()) return fail();

  // Value = digits * 10^(exponent - fractional digit count).
  long shift = exponent - static_cast<long>(digits.size() - int_digits);
  while (shift < 0) {
    if (digits.empty() || digits.back() != '0') return fail();
    digits.pop_back();
    ++shift;
  }
  constexpr auto kMax =
      static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max());
  unsigned __int128 value = 0;
  for (char c : digits) {
    value = value * 10 + static_cast<unsigned>(c - '0');
    if (value > kMax) return fail();
  }
  for (long i = 0; i < shift; ++i) {
    value *= 10;
    if (value > kMax) return fail();
  }
  return static_cast<std::uint64_t>(value);
}

double parse_real(std::string_view text) {
  const std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError("'" + s + "' is not a finite number");
  }
  return v;
}

StepOrdering parse_ordering(std::string_view text) {
  if (text == "switch_first") return StepOrdering::kSwitchFirst;
  if (text == "simultaneous") return StepOrdering::kSimultaneous;
  throw ConfigError("ordering: expected switch_first or simultaneous");
}

std::vector<double> parse_real_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
    out.push_back(parse_real(text.substr(start, end - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

GridSpec parse_grid(std::string_view text) {
  // lo:hi:step; the leading value may be negative.
  const std::size_t a = text.find(':', 1);
  const std::size_t b = a == std::string_view::npos ? a : text.find(':', a + 2);
  if (a == std::string_view::npos || b == std::string_view::npos) {
    throw ConfigError("grid must be lo:hi:step, got '" + std::string(text) + "'");
  }
  GridSpec g{parse_real(text.substr(0, a)), parse_real(text.substr(a + 1, b - a - 1)),
             parse_real(text.substr(b + 1))};
  (void)g.points();
  return g;
}

// ---------------------------------------------------------------------------
// JSON schema

namespace {

// Line of the first occurrence of the key path, searching each segment after
// the previous one. 0 when not found.
std::size_t line_of(std::string_view text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    const std::size_t found = text.find("\"" + key + "\"", pos);
    if (found == std::string_view::npos) return 0;
    pos = found;
  }
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
}

class Reader {
 public:
  Reader(std::string_view text, std::string_view source)
      : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::vector<std::string>& path,
                         const std::string& message) const {
    std::string where;
    for (const auto& p : path) where += (where.empty() ? "" : ".") + p;
    const std::size_t line = line_of(text_, path);
    throw ConfigError(std::string(source_) +
                      (line > 0 ? ":" + std::to_string(line) : std::string()) +
                      ": " + where + ": " + message);
  }

  void allow_keys(const json& obj, const std::vector<std::string>& path,
                  const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.contains(key)) {
        auto p = path;
        p.push_back(key);
        fail(p, "unknown key");
      }
    }
  }

  double real(const json& v, const std::vector<std::string>& path) const {
    if (v.is_number()) {
      const double d = v.get<double>();
      if (std::isfinite(d)) return d;
    }
    if (v.is_string()) {
      try {
        return parse_real(v.get<std::string>());
      } catch (const ConfigError& e) {
        fail(path, e.what());
      }
    }
    fail(path, "expected a finite number");
  }

  std::uint64_t count(const json& v, const std::vector<std::string>& path) const {
    if (v.is_number_unsigned()) {
      const auto n = v.get<std::uint64_t>();
      if (n <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
        return n;
      }
    } else if (v.is_number_float()) {
      const double d = v.get<double>();
      if (d >= 0.0 && d < 0x1p63 && std::floor(d) == d) {
        return static_cast<std::uint64_t>(d);
      }
    } else if (v.is_string()) {
      try {
        return parse_count(v.get<std::string>());
      } catch (const ConfigError& e) {
        fail(path, e.what());
      }
    }
    fail(path, "expected a non-negative integer (max 2^63-1)");
  }

  std::vector<double> reals(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_array()) fail(path, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(real(e, path));
    return out;
  }

  std::string string(const json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  std::string_view text_;
  std::string_view source_;
};

void check_mixture(const Reader& r, const json& m) {
  if (m.is_string()) {
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), m.get<std::string>()) == names.end()) {
      r.fail({"mixture"}, "unknown preset '" + m.get<std::string>() + "'");
    }
    return;
  }
  r.allow_keys(m, {"mixture"}, {"components"});
  if (!m.contains("components") || !m["components"].is_array() ||
      m["components"].empty()) {
    r.fail({"mixture", "components"}, "expected a non-empty array");
  }
  for (const auto& c : m["components"]) {
    const std::vector<std::string> path = {"mixture", "components"};
    r.allow_keys(c, path, {"type", "mean", "covariance", "sigma", "beta", "alpha"});
    if (!c.contains("type") || !c.contains("alpha")) {
      r.fail(path, "every component needs 'type' and 'alpha'");
    }
    const std::string type = r.string(c["type"], {"mixture", "components", "type"});
    if (type != "gaussian" && type != "quartic" && type != "custom_grid") {
      r.fail({"mixture", "components", "type"},
             "expected gaussian, quartic or custom_grid");
    }
  }
}

}  // namespace

RunConfig parse_config(std::string_view text, std::string_view source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const auto line =
        std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n') + 1;
    throw ConfigError(std::string(source) + ":" + std::to_string(line) +
                      ": invalid JSON: " + e.what());
  }
  // A manifest carries the resolved config under "config".
  if (root.is_object() && root.contains("config") && root.contains("version")) {
    root = root["config"];
  }
  const Reader r(text, source);
  r.allow_keys(root, {},
               {"command", "mixture", "rate_policy", "h", "T", "M", "L", "T_tilde",
                "noise", "ordering", "rejection_radius", "seed", "observable", "histogram",
                "reference", "initial", "grid", "delta", "tolerance",
                "output_dir", "workers"});

  RunConfig c;
  if (root.contains("command")) c.command = r.string(root["command"], {"command"});
  if (root.contains("mixture")) {
    check_mixture(r, root["mixture"]);
    c.mixture = root["mixture"];
  }
  if (root.contains("rate_policy")) {
    const json& p = root["rate_policy"];
    r.allow_keys(p, {"rate_policy"}, {"type", "betas", "q"});
    if (!p.contains("type")) r.fail({"rate_policy"}, "missing 'type'");
    c.policy = r.string(p["type"], {"rate_policy", "type"});
    if (c.policy != "density" && c.policy != "density_scaled" &&
        c.policy != "constant") {
      r.fail({"rate_policy", "type"},
             "expected density, density_scaled or constant");
    }
    if (p.contains("betas")) c.betas = r.reals(p["betas"], {"rate_policy", "betas"});
    if (p.contains("q")) {
      if (!p["q"].is_array()) r.fail({"rate_policy", "q"}, "expected a matrix");
      for (const auto& row : p["q"]) c.q.push_back(r.reals(row, {"rate_policy", "q"}));
    }
  }
  if (root.contains("h")) {
    const json& h = root["h"];
    c.h = h.is_array() ? r.reals(h, {"h"}) : std::vector<double>{r.real(h, {"h"})};
    if (h.is_array() && c.h.empty()) r.fail({"h"}, "expected at least one step");
  }
  if (root.contains("T")) c.horizon = r.real(root["T"], {"T"});
  if (root.contains("M")) c.trajectories = r.count(root["M"], {"M"});
  if (root.contains("L")) c.averaging_steps = r.count(root["L"], {"L"});
  if (root.contains("T_tilde")) {
    if (c.averaging_steps) r.fail({"T_tilde"}, "give either L or T_tilde");
    if (c.h.size() != 1) r.fail({"T_tilde"}, "T_tilde needs a single h");
    try {
      c.averaging_steps =
          steps_for_horizon(r.real(root["T_tilde"], {"T_tilde"}), c.h[0]);
    } catch (const ConfigError& e) {
      r.fail({"T_tilde"}, e.what());
    }
  }
  if (root.contains("noise")) {
    const std::string n = r.string(root["noise"], {"noise"});
    if (n == "gaussian") {
      c.noise = NoiseKind::kGaussian;
    } else if (n == "rademacher") {
      c.noise = NoiseKind::kRademacher;
    } else {
      r.fail({"noise"}, "expected gaussian or rademacher");
    }
  }
  if (root.contains("ordering")) {
    try {
      c.ordering = parse_ordering(r.string(root["ordering"], {"ordering"}));
    } catch (const ConfigError& e) {
      r.fail({"ordering"}, e.what());
    }
  }
  if (root.contains("rejection_radius") && !root["rejection_radius"].is_null()) {
    c.rejection_radius = r.real(root["rejection_radius"], {"rejection_radius"});
  }
  if (root.contains("seed")) c.seed = r.count(root["seed"], {"seed"});
  if (root.contains("observable")) {
    c.observable = r.string(root["observable"], {"observable"});
  }
  if (root.contains("histogram") && !root["histogram"].is_null()) {
    const json& h = root["histogram"];
    r.allow_keys(h, {"histogram"}, {"lo", "hi", "bins"});
    HistogramSpec spec;
    if (!h.contains("lo") || !h.contains("hi") || !h.contains("bins")) {
      r.fail({"histogram"}, "needs lo, hi and bins");
    }
    spec.lo = r.reals(h["lo"], {"histogram", "lo"});
    spec.hi = r.reals(h["hi"], {"histogram", "hi"});
    if (!h["bins"].is_array()) r.fail({"histogram", "bins"}, "expected an array");
    for (const auto& b : h["bins"]) {
      spec.bins.push_back(static_cast<std::size_t>(r.count(b, {"histogram", "bins"})));
    }
    try {
      spec.validate();
    } catch (const ConfigError& e) {
      r.fail({"histogram"}, e.what());
    }
    c.histogram = spec;
  }
  if (root.contains("reference") && !root["reference"].is_null()) {
    c.reference = r.real(root["reference"], {"reference"});
  }
  if (root.contains("initial") && !root["initial"].is_null()) {
    const json& i = root["initial"];
    r.allow_keys(i, {"initial"}, {"x0", "regime"});
    FixedPoint fp;
    if (i.contains("x0")) fp.x0 = r.reals(i["x0"], {"initial", "x0"});
    if (i.contains("regime")) {
      fp.regime = static_cast<std::size_t>(r.count(i["regime"], {"initial", "regime"}));
    }
    c.initial = fp;
  }
  if (root.contains("grid")) {
    const json& g = root["grid"];
    r.allow_keys(g, {"grid"}, {"lo", "hi", "step"});
    if (g.contains("lo")) c.grid.lo = r.real(g["lo"], {"grid", "lo"});
    if (g.contains("hi")) c.grid.hi = r.real(g["hi"], {"grid", "hi"});
    if (g.contains("step")) c.grid.step = r.real(g["step"], {"grid", "step"});
  }
  if (root.contains("delta")) c.delta = r.real(root["delta"], {"delta"});
  if (root.contains("tolerance")) c.tolerance = r.real(root["tolerance"], {"tolerance"});
  if (root.contains("output_dir")) {
    c.output_dir = r.string(root["output_dir"], {"output_dir"});
  }
  if (root.contains("workers")) {
    c.workers = static_cast<std::size_t>(r.count(root["workers"], {"workers"}));
  }
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

void finalize(RunConfig& c) {
  const auto& names = command_names();
  if (std::find(names.begin(), names.end(), c.command) == names.end()) {
    throw ConfigError("unknown or missing command '" + c.command + "'");
  }
  const bool multi = c.command == "converge" || c.command == "tvd";
  const bool needs_h = c.command != "fpe-check" && c.command != "oracle";
  if (needs_h) {
    if (c.h.empty()) throw ConfigError("h: a step size is required");
    if (!multi && c.h.size() != 1) {
      throw ConfigError("h: command '" + c.command + "' takes a single step size");
    }
    for (double h : c.h) {
      if (!(h > 0.0)) throw ConfigError("h: step sizes must be positive");
    }
  }
  if (c.command == "time-average" && !c.averaging_steps) {
    throw ConfigError("time-average needs L or T_tilde");
  }
  if (c.command == "ctmc-check" && c.policy != "constant") {
    throw ConfigError("ctmc-check needs a constant rate_policy with q");
  }
  if (c.policy == "constant" && c.q.empty()) {
    throw ConfigError("rate_policy: constant policy needs q");
  }
  if (c.policy == "density_scaled" && c.betas.empty()) {
    throw ConfigError("rate_policy: density_scaled policy needs betas");
  }
  if (c.output_dir.empty()) {
    const char* env = std::getenv(kOutputDirEnv);
    c.output_dir = (env != nullptr && *env != '\0') ? env : kDefaultOutputDir;
  }
  if (!(c.delta >= 1e-5 && c.delta <= 1e-3)) {
    throw ConfigError("delta must lie in [1e-5, 1e-3]");
  }
  (void)c.grid.points();
}

json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["mixture"] = c.mixture;
  json p = {{"type", c.policy}};
  if (!c.betas.empty()) p["betas"] = c.betas;
  if (!c.q.empty()) p["q"] = c.q;
  j["rate_policy"] = p;
  if (c.command == "converge" || c.command == "tvd") {
    j["h"] = c.h;
  } else if (!c.h.empty()) {
    j["h"] = c.h.front();
  }
  j["T"] = c.horizon;
  j["M"] = c.trajectories;
  if (c.averaging_steps) j["L"] = *c.averaging_steps;
  j["noise"] = c.noise == NoiseKind::kGaussian ? "gaussian" : "rademacher";
  j["ordering"] =
      c.ordering == StepOrdering::kSwitchFirst ? "switch_first" : "simultaneous";
  j["rejection_radius"] =
      c.rejection_radius ? json(*c.rejection_radius) : json(nullptr);
  j["seed"] = c.seed;
  if (c.observable) j["observable"] = *c.observable;
  if (c.histogram) {
    j["histogram"] = {{"lo", c.histogram->lo},
                      {"hi", c.histogram->hi},
                      {"bins", c.histogram->bins}};
  }
  if (c.reference) j["reference"] = *c.reference;
  if (c.initial) j["initial"] = {{"x0", c.initial->x0}, {"regime", c.initial->regime}};
  j["grid"] = {{"lo", c.grid.lo}, {"hi", c.grid.hi}, {"step", c.grid.step}};
  j["delta"] = c.delta;
  j["tolerance"] = c.tolerance;
  j["output_dir"] = c.output_dir;
  return j;
}

// ---------------------------------------------------------------------------
// Model construction

namespace {

MixtureModel build_inline_model(const nlohmann::json& mixture) {
  std::vector<PotentialComponent> components;
  for (const auto& e : mixture.at("components")) {
    const std::string type = e.at("type").get<std::string>();
    const double alpha = e.at("alpha").get<double>();
    if (type == "gaussian") {
      if (!e.contains("mean")) throw ConfigError("gaussian component needs 'mean'");
      auto mean = e["mean"].get<std::vector<double>>();
      std::vector<double> cov;
      if (e.contains("covariance")) {
        // Row-major flat list or nested rows.
        for (const auto& v : e["covariance"]) {
          if (v.is_array()) {
            for (const auto& w : v) cov.push_back(w.get<double>());
          } else {
            cov.push_back(v.get<double>());
          }
        }
      } else if (e.contains("sigma") && mean.size() == 1) {
        const double s = e["sigma"].get<double>();
        cov = {s * s};
      } else {
        throw ConfigError("gaussian component needs 'covariance' (or 'sigma' in 1D)");
      }
      components.push_back(
          PotentialComponent::Gaussian(std::move(mean), std::move(cov), alpha));
    } else if (type == "quartic") {
      if (!e.contains("beta")) throw ConfigError("quartic component needs 'beta'");
      components.push_back(PotentialComponent::Quartic(e["beta"].get<double>(), alpha));
    } else {
      components.emplace_back(CustomGridPotential{}, alpha);
    }
  }
  return MixtureModel(std::move(components));
}

}  // namespace

MixtureModel build_model(const RunConfig& c) {
  if (c.mixture.is_string()) return preset(c.mixture.get<std::string>());
  try {
    return build_inline_model(c.mixture);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  }
}

RatePolicy build_policy(const RunConfig& c, const MixtureModel* model) {
  if (c.policy == "density") return RatePolicy::density();
  if (c.policy == "density_scaled") return RatePolicy::density_scaled(c.betas);
  const std::size_t n = c.q.size();
  std::vector<double> flat;
  for (const auto& row : c.q) {
    if (row.size() != n) throw ConfigError("rate_policy.q must be square");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  for (std::size_t i = 0; i < n; ++i) flat[i * n + i] = 0.0;
  if (model != nullptr && model->regimes() != n) {
    throw ConfigError("rate_policy.q size does not match the mixture");
  }
  return RatePolicy::constant(n, std::move(flat));
}

ObservableSpec build_observable(const RunConfig& c, std::size_t dimension) {
  const std::string name =
      c.observable.value_or(dimension == 1 ? "second_moment" : "squared_norm");
  if (name == "second_moment") return ObservableSpec::second_moment();
  if (name == "squared_norm") return ObservableSpec::squared_norm();
  throw ConfigError("observable: expected second_moment or squared_norm");
}

}  // namespace sdews::cli
