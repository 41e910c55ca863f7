#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ensemble.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "quasifree.hpp"

namespace qfldp {

using json = nlohmann::json;

constexpr int kConfigSchemaVersion = 1;

struct GridSpec {
  double min = 0, max = 0;
  int count = 0;
  std::vector<double> values() const { return linear_grid(min, max, count); }
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  // model
  int dim = 1;
  ModelParams params;
  DisorderMode disorder = DisorderMode::zero;
  // boxes
  int L = 3, L_rho = 3, L_tau = 3, cell_radius = 1;
  FieldProfile field;
  GridSpec s_grid{-2.0, 2.0, 41};
  int x_count = 401;
  GridSpec u_grid{-3.0, 3.0, 13};
  // ensemble
  int samples = 20;
  std::uint64_t seed = 1;
  std::vector<int> cell_radii{1};
  int ergodic_samples = 50;
  // response
  std::vector<double> etas{0.1, 0.05, 0.025};
  double t_end = 0.0;
  double dt = 0.01;
  int stride = 10;
  // ct-check
  int ct_draws = 20;
  // verify
  int oracle_instances = 5;
  int car_modes = 4;
  int bogoliubov_instances = 5;
  // run-time only, never embedded in bundles
  int threads = 0;
  std::string output;

  EnsembleSpec ensemble_spec() const {
    EnsembleSpec e;
    e.samples = samples;
    e.seed_base = seed;
    e.params = params;
    e.mode = disorder;
    e.dim = dim;
    e.L = L;
    e.L_rho = L_rho;
    e.L_tau = L_tau;
    e.cell_radius = cell_radius;
    e.field = field;
    e.s_grid = s_grid.values();
    e.threads = threads;
    return e;
  }

  void validate() const {
    if (schema_version != kConfigSchemaVersion)
      throw ConfigError("schema_version: expected " + std::to_string(kConfigSchemaVersion));
    if (dim < 1 || dim > kMaxDim) throw ConfigError("model.dim: must be 1, 2 or 3");
    try {
      params.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
    if (!(L_tau >= L_rho && L_rho >= L && L >= cell_radius && cell_radius >= 1))
      throw ConfigError("boxes: need L_tau >= L_rho >= L >= cell_radius >= 1");
    if (field.dim != dim) throw ConfigError("field: dimension differs from model.dim");
    try {
      field.validate();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("field: ") + e.what());
    }
    if (!(s_grid.min < 0.0 && s_grid.max > 0.0)) throw ConfigError("grids.s: range must contain 0 in its interior");
    if (s_grid.count < 3) throw ConfigError("grids.s.count: need at least 3 points");
    bool zero = false;
    for (double s : s_grid.values()) zero = zero || s == 0.0;
    if (!zero) throw ConfigError("grids.s: grid must contain s = 0 exactly (use an odd count on a symmetric range)");
    if (x_count < 3) throw ConfigError("grids.x.count: need at least 3 points");
    if (!(u_grid.max > u_grid.min) || u_grid.count < 2) throw ConfigError("grids.u: need max > min and count >= 2");
    if (samples < 1) throw ConfigError("ensemble.samples: must be positive");
    if (ergodic_samples < 2) throw ConfigError("ensemble.ergodic_samples: need at least 2");
    for (int l : cell_radii)
      if (l < 1 || l > L) throw ConfigError("ensemble.cell_radii: each radius must satisfy 1 <= l <= L");
    if (etas.empty()) throw ConfigError("response.eta: need at least one value");
    for (double e : etas)
      if (!(e > 0)) throw ConfigError("response.eta: values must be positive");
    if (!(dt > 0)) throw ConfigError("response.dt: must be positive");
    if (stride < 1) throw ConfigError("response.stride: must be positive");
    if (!(t_end > field.support_lo() - 1.0)) throw ConfigError("response.t_end: must follow the start of the evolution");
    if (ct_draws < 1) throw ConfigError("ct.draws: must be positive");
    if (oracle_instances < 0 || bogoliubov_instances < 0) throw ConfigError("verify: counts must be non-negative");
    if (car_modes < 1 || car_modes > 8) throw ConfigError("verify.car_modes: must lie in [1, 8]");
    if (threads < 0) throw ConfigError("threads: must be non-negative");
  }
};

namespace detail {

struct ConfigReader {
  std::string path;

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError((path.empty() ? key : path + "." + key) + ": " + msg);
  }

  void only(const json& j, std::initializer_list<const char*> keys) const {
    if (!j.is_object()) throw ConfigError((path.empty() ? std::string("<root>") : path) + ": expected an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!allowed.count(it.key())) fail(it.key(), "unknown key");
  }

  ConfigReader sub(const std::string& key) const { return {path.empty() ? key : path + "." + key}; }

  double number(const json& j, const char* key, double fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number()) fail(key, "expected a number");
    return j[key].get<double>();
  }

  int integer(const json& j, const char* key, int fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) fail(key, "expected an integer");
    return j[key].get<int>();
  }

  std::uint64_t u64(const json& j, const char* key, std::uint64_t fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_unsigned() && !(j[key].is_number_integer() && j[key].get<long long>() >= 0))
      fail(key, "expected a non-negative integer");
    return j[key].get<std::uint64_t>();
  }

  std::string string(const json& j, const char* key, const std::string& fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_string()) fail(key, "expected a string");
    return j[key].get<std::string>();
  }

  std::vector<double> numbers(const json& j, const char* key, const std::vector<double>& fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& v : j[key]) {
      if (!v.is_number()) fail(key, "expected an array of numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const json& j, const char* key, const std::vector<int>& fallback) const {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_array()) fail(key, "expected an array of integers");
    std::vector<int> out;
    for (const auto& v : j[key]) {
      if (!v.is_number_integer()) fail(key, "expected an array of integers");
      out.push_back(v.get<int>());
    }
    return out;
  }

  GridSpec grid(const json& j, const char* key, GridSpec g) const {
    if (!j.contains(key)) return g;
    auto r = sub(key);
    r.only(j[key], {"min", "max", "count"});
    g.min = r.number(j[key], "min", g.min);
    g.max = r.number(j[key], "max", g.max);
    g.count = r.integer(j[key], "count", g.count);
    return g;
  }
};

inline std::array<double, kMaxDim> vec3(const std::vector<double>& v, const std::string& what) {
  if (v.empty() || v.size() > std::size_t(kMaxDim)) throw ConfigError(what + ": expected 1 to 3 components");
  std::array<double, kMaxDim> out{0, 0, 0};
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

// line and column of a byte offset
inline std::pair<int, int> line_col(const std::string& text, std::size_t pos) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < pos && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  detail::ConfigReader r;
  r.only(j, {"schema_version", "model", "boxes", "field", "grids", "ensemble", "response", "ct", "verify", "threads",
             "output"});
  ExperimentConfig c;
  if (!j.contains("schema_version")) throw ConfigError("schema_version: missing");
  c.schema_version = r.integer(j, "schema_version", 0);
  c.threads = r.integer(j, "threads", 0);
  c.output = r.string(j, "output", "");

  json empty = json::object();
  const json& m = j.contains("model") ? j["model"] : empty;
  auto rm = r.sub("model");
  rm.only(m, {"dim", "lambda", "theta", "beta", "disorder"});
  c.dim = rm.integer(m, "dim", 1);
  c.params.lambda = rm.number(m, "lambda", 0.0);
  c.params.theta = rm.number(m, "theta", 0.0);
  c.params.beta = rm.number(m, "beta", 1.0);
  try {
    c.disorder = parse_disorder_mode(rm.string(m, "disorder", "zero"));
  } catch (const ConfigError& e) {
    rm.fail("disorder", e.what());
  }

  const json& b = j.contains("boxes") ? j["boxes"] : empty;
  auto rb = r.sub("boxes");
  rb.only(b, {"L", "L_rho", "L_tau", "cell_radius"});
  c.L = rb.integer(b, "L", 3);
  c.L_rho = rb.integer(b, "L_rho", c.L);
  c.L_tau = rb.integer(b, "L_tau", c.L_rho);
  c.cell_radius = rb.integer(b, "cell_radius", 1);

  const json& f = j.contains("field") ? j["field"] : empty;
  auto rf = r.sub("field");
  rf.only(f, {"profile", "T", "amplitude", "density", "polarization", "direction", "samples"});
  try {
    c.field.shape = parse_field_shape(rf.string(f, "profile", "smooth-bump"));
  } catch (const ConfigError& e) {
    rf.fail("profile", e.what());
  }
  c.field.dim = c.dim;
  c.field.T = rf.number(f, "T", 2.0);
  c.field.amplitude = rf.number(f, "amplitude", 1.0);
  c.field.density = rf.integer(f, "density", 16);
  std::vector<double> unit(c.dim, 0.0);
  unit[0] = 1.0;
  c.field.polarization = detail::vec3(rf.numbers(f, "polarization", unit), "field.polarization");
  c.field.direction = detail::vec3(rf.numbers(f, "direction", unit), "field.direction");
  c.field.samples = rf.numbers(f, "samples", {});
  if (c.field.shape != FieldShape::sampled && !c.field.samples.empty())
    rf.fail("samples", "only allowed with profile \"sampled\"");

  const json& g = j.contains("grids") ? j["grids"] : empty;
  auto rg = r.sub("grids");
  rg.only(g, {"s", "x", "u"});
  c.s_grid = rg.grid(g, "s", c.s_grid);
  if (g.contains("x")) {
    auto rx = rg.sub("x");
    rx.only(g["x"], {"count"});
    c.x_count = rx.integer(g["x"], "count", c.x_count);
  }
  c.u_grid = rg.grid(g, "u", c.u_grid);

  const json& e = j.contains("ensemble") ? j["ensemble"] : empty;
  auto re = r.sub("ensemble");
  re.only(e, {"samples", "seed", "cell_radii", "ergodic_samples"});
  c.samples = re.integer(e, "samples", c.samples);
  c.seed = re.u64(e, "seed", c.seed);
  c.cell_radii = re.integers(e, "cell_radii", {c.cell_radius});
  c.ergodic_samples = re.integer(e, "ergodic_samples", c.ergodic_samples);

  const json& s = j.contains("response") ? j["response"] : empty;
  auto rs = r.sub("response");
  rs.only(s, {"eta", "t_end", "dt", "stride"});
  c.etas = rs.numbers(s, "eta", c.etas);
  c.t_end = rs.number(s, "t_end", c.t_end);
  c.dt = rs.number(s, "dt", c.dt);
  c.stride = rs.integer(s, "stride", c.stride);

  const json& t = j.contains("ct") ? j["ct"] : empty;
  auto rt = r.sub("ct");
  rt.only(t, {"draws"});
  c.ct_draws = rt.integer(t, "draws", c.ct_draws);

  const json& v = j.contains("verify") ? j["verify"] : empty;
  auto rv = r.sub("verify");
  rv.only(v, {"oracle_instances", "car_modes", "bogoliubov_instances"});
  c.oracle_instances = rv.integer(v, "oracle_instances", c.oracle_instances);
  c.car_modes = rv.integer(v, "car_modes", c.car_modes);
  c.bogoliubov_instances = rv.integer(v, "bogoliubov_instances", c.bogoliubov_instances);

  c.validate();
  return c;
}

// every field written out, so an embedded copy fully determines a rerun;
// threads and output are left out on purpose
inline json config_to_json(const ExperimentConfig& c) {
  auto vec = [&](const std::array<double, kMaxDim>& a) {
    return std::vector<double>(a.begin(), a.begin() + c.dim);
  };
  auto grid = [](const GridSpec& g) { return json{{"min", g.min}, {"max", g.max}, {"count", g.count}}; };
  json j;
  j["schema_version"] = c.schema_version;
  j["model"] = {{"dim", c.dim},
                {"lambda", c.params.lambda},
                {"theta", c.params.theta},
                {"beta", c.params.beta},
                {"disorder", to_string(c.disorder)}};
  j["boxes"] = {{"L", c.L}, {"L_rho", c.L_rho}, {"L_tau", c.L_tau}, {"cell_radius", c.cell_radius}};
  j["field"] = {{"profile", to_string(c.field.shape)},
                {"T", c.field.T},
                {"amplitude", c.field.amplitude},
                {"density", c.field.density},
                {"polarization", vec(c.field.polarization)},
                {"direction", vec(c.field.direction)}};
  if (c.field.shape == FieldShape::sampled) j["field"]["samples"] = c.field.samples;
  j["grids"] = {{"s", grid(c.s_grid)}, {"x", {{"count", c.x_count}}}, {"u", grid(c.u_grid)}};
  j["ensemble"] = {{"samples", c.samples},
                   {"seed", c.seed},
                   {"cell_radii", c.cell_radii},
                   {"ergodic_samples", c.ergodic_samples}};
  j["response"] = {{"eta", c.etas}, {"t_end", c.t_end}, {"dt", c.dt}, {"stride", c.stride}};
  j["ct"] = {{"draws", c.ct_draws}};
  j["verify"] = {{"oracle_instances", c.oracle_instances},
                 {"car_modes", c.car_modes},
                 {"bogoliubov_instances", c.bogoliubov_instances}};
  return j;
}

inline json disorder_to_json(const DisorderSample& w) {
  json o2 = json::array();
  for (const auto& z : w.omega2) o2.push_back({z.real(), z.imag()});
  return {{"seed", w.seed},
          {"mode", to_string(w.mode)},
          {"d", w.domain.dim()},
          {"L", w.domain.radius()},
          {"omega1", w.omega1},
          {"omega2", o2}};
}

inline json field_to_json(const FieldProfile& f) {
  json j = {{"profile", to_string(f.shape)}, {"T", f.T},         {"amplitude", f.amplitude},
            {"shift", f.shift},              {"density", f.density},
            {"polarization", std::vector<double>(f.polarization.begin(), f.polarization.begin() + f.dim)},
            {"direction", std::vector<double>(f.direction.begin(), f.direction.begin() + f.dim)}};
  if (f.shape == FieldShape::sampled) j["samples"] = f.samples;
  return j;
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = detail::line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(origin + ": line " + std::to_string(line) + ", column " + std::to_string(col) +
                      ": malformed JSON");
  }
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace qfldp
