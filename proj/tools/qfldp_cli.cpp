// qfldp: command-line front end.
//
//   qfldp <verify|generating|rate|ensemble|response|ct-check> [config.json]
//         [--config path] [--out dir] [--threads n] [--seed u64]
//
// Exit codes: 0 ok, 1 failed invariant, 2 config error, 3 numerical failure,
// 4 resource limit.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include <qfldp/config.hpp>
#include <qfldp/ensemble.hpp>
#include <qfldp/io.hpp>
#include <qfldp/response.hpp>
#include <qfldp/verify.hpp>

namespace fs = std::filesystem;
using namespace qfldp;

namespace {

struct Options {
  std::string config_pos;
  std::string config_opt;
  std::string out;
  int threads = -1;
  std::optional<std::uint64_t> seed;
};

struct Run {
  std::string command;
  ExperimentConfig cfg;
  fs::path out;
  json results = json::object();
  std::vector<std::string> files;
  bool invariants_ok = true;

  void write(const std::string& name, const std::string& text) {
    write_text_file(out / name, text);
    files.push_back(name);
  }

  void finish() {
    json bundle;
    bundle["qfldp_bundle"] = 1;
    bundle["command"] = command;
    bundle["config"] = config_to_json(cfg);
    bundle["results"] = results;
    bundle["files"] = files;
    bundle["invariants_ok"] = invariants_ok;
    write_text_file(out / "bundle.json", bundle.dump(2) + "\n");
  }
};

Run prepare(const std::string& command, const Options& o) {
  std::string path = !o.config_opt.empty() ? o.config_opt : o.config_pos;
  if (path.empty()) throw ConfigError("no config given (positional argument or --config)");
  json j = parse_json_text(read_text_file(path), path);
  if (j.is_object() && j.contains("qfldp_bundle")) {
    if (!j.contains("command") || j["command"] != command)
      throw ConfigError(path + ": bundle was produced by a different subcommand");
    j = j["config"];
  }
  Run r;
  r.command = command;
  try {
    r.cfg = config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (o.seed) r.cfg.seed = *o.seed;
  if (o.threads >= 0) r.cfg.threads = o.threads;
  if (r.cfg.threads == 0) r.cfg.threads = default_threads();
  std::string out = o.out;
  if (out.empty())
    if (const char* env = std::getenv("QFLDP_OUT")) out = env;
  if (out.empty()) out = r.cfg.output.empty() ? "out" : r.cfg.output;
  r.out = out;
  std::error_code ec;
  fs::create_directories(r.out, ec);
  if (ec) throw ResourceError("cannot create output directory " + out);
  return r;
}

struct Assembled {
  GeneratingCurve curve;
  QuadratureReport report;
  Matrix symbol, K;
  json disorder, field;
};

// J_{{Λ_L},{Λ_Lρ},{Λ_Lτ}} for the configured seed
Assembled single_realization(const ExperimentConfig& c) {
  auto amb = LatticeBox::centered(c.dim, c.L_tau);
  long n = amb.size();
  if (n > kDenseCap) throw ResourceError("ambient box exceeds the dense cap");
  auto w = sample_disorder(amb, c.seed, c.disorder);
  AssemblyOptions ao;
  ao.threads = c.threads;
  auto K = assemble_K(amb, w, c.params, c.field, {LatticeBox::centered(c.dim, c.L)}, {amb}, ao);
  Matrix h = restrict_to_collection(amb, w, c.params, {LatticeBox::centered(c.dim, c.L_rho)});
  GeneratingEvaluator ev(h, K.K, c.params.beta, LatticeBox::centered(c.dim, c.L).size());
  Assembled a;
  a.curve = generating_curve(ev, c.s_grid.values(), c.threads);
  a.report = K.report;
  a.symbol = ev.symbol();
  a.K = ev.current();
  a.disorder = disorder_to_json(w);
  a.field = field_to_json(c.field);
  a.field["diamagnetic_weight"] = K.diamagnetic_weight;
  return a;
}

bool curve_convex(const GeneratingCurve& c) {
  for (std::size_t i = 1; i + 1 < c.s.size(); ++i) {
    double h0 = c.s[i] - c.s[i - 1], h1 = c.s[i + 1] - c.s[i];
    if ((c.J[i + 1] - c.J[i]) / h1 - (c.J[i] - c.J[i - 1]) / h0 < -1e-9) return false;
  }
  for (double v : c.d2J)
    if (v < -1e-12) return false;
  return true;
}

json report_json(const QuadratureReport& q) {
  return {{"density", q.density}, {"nodes", q.nodes}, {"doublings", q.doublings}, {"last_change", q.last_change}};
}

void cmd_generating(Run& r, bool with_rate) {
  auto a = single_realization(r.cfg);
  const auto& c = a.curve;
  r.write("generating_curve.csv", curve_csv(c));
  auto u = r.cfg.u_grid.values();
  auto ch = characteristic_function(a.symbol, a.K, u, r.cfg.threads);
  CsvWriter cw({"u", "re_phi", "im_phi", "abs_phi"});
  for (std::size_t i = 0; i < u.size(); ++i) cw.row({u[i], ch.phi[i].real(), ch.phi[i].imag(), std::abs(ch.phi[i])});
  r.write("characteristic.csv", cw.text());
  int z = c.zero_index();
  r.results["x_E"] = c.dJ[z];
  r.results["volume"] = c.volume;
  r.results["quadrature"] = report_json(a.report);
  r.results["field"] = a.field;
  r.results["disorder"] = a.disorder;
  r.results["convex"] = curve_convex(c);
  r.invariants_ok = r.invariants_ok && curve_convex(c) && c.J[z] == 0.0;
  if (with_rate) {
    auto rf = legendre_rate(c, linear_grid(c.dJ.front(), c.dJ.back(), r.cfg.x_count));
    CsvWriter rw({"x", "I"});
    double minI = INFINITY;
    for (std::size_t k = 0; k < rf.x.size(); ++k) {
      rw.row({rf.x[k], rf.I[k]});
      minI = std::min(minI, rf.I[k]);
    }
    r.write("rate_function.csv", rw.text());
    r.results["x_minus"] = rf.x_minus;
    r.results["x_plus"] = rf.x_plus;
    r.results["min_I"] = json_number(minI);
    r.invariants_ok = r.invariants_ok && minI >= 0.0;
  }
}

void cmd_ensemble(Run& r) {
  auto spec = r.cfg.ensemble_spec();
  auto res = mc_generating(spec);
  const auto& st = res.stats;
  CsvWriter ec({"s", "mean_J", "stderr_J", "mean_dJ", "stderr_dJ", "mean_d2J", "single_J"});
  for (std::size_t i = 0; i < st.s.size(); ++i)
    ec.row({st.s[i], st.mean_J[i], st.stderr_J[i], st.mean_dJ[i], st.stderr_dJ[i], st.mean_d2J[i],
            res.single_ok ? res.single.J[i] : NAN});
  r.write("ensemble_curve.csv", ec.text());
  CsvWriter mc({"index", "seed", "outcome", "message"});
  CsvWriter tc({"index", "seed", "seconds"});
  int failures = 0;
  for (const auto& m : res.manifest) {
    mc.row_strings({std::to_string(m.index), std::to_string(m.seed), m.ok ? "ok" : "failed", m.message});
    tc.row_strings({std::to_string(m.index), std::to_string(m.seed), fmt_double(m.seconds)});
    failures += m.ok ? 0 : 1;
  }
  r.write("manifest.csv", mc.text());
  write_text_file(r.out / "timings.csv", tc.text());  // wall times, outside the bundle
  bool convex = true;
  for (const auto& c : res.curves) convex = convex && curve_convex(c);
  int z = res.curves.empty() ? -1 : res.curves.front().zero_index();

  auto dec = box_decomposition_compare(spec, r.cfg.cell_radii);
  CsvWriter dc({"l", "cells", "discrepancy", "discrepancy_stderr", "identity_residual"});
  double ident = 0;
  for (const auto& p : dec) {
    dc.row({double(p.l), double(p.cells), p.discrepancy, p.discrepancy_stderr, p.identity_residual});
    ident = std::max(ident, p.identity_residual);
  }
  r.write("decomposition.csv", dc.text());

  EnsembleSpec es = spec;
  es.samples = r.cfg.ergodic_samples;
  auto erg = ergodic_average_check(es);

  r.results["samples"] = spec.samples;
  r.results["failures"] = failures;
  if (z >= 0) {
    r.results["x_E_mean"] = st.mean_dJ[z];
    r.results["x_E_stderr"] = st.stderr_dJ[z];
  }
  r.results["all_samples_convex"] = convex;
  r.results["decomposition_identity_residual"] = ident;
  r.results["ergodic"] = {{"cells", erg.cells},
                          {"samples", erg.samples},
                          {"s_probe", erg.s_probe},
                          {"spatial_J", erg.spatial_J},
                          {"spatial_J_stderr", erg.spatial_J_stderr},
                          {"mc_J", erg.mc_J},
                          {"mc_J_stderr", erg.mc_J_stderr},
                          {"gap_J_sigmas", json_number(erg.gap_J_sigmas)},
                          {"spatial_x", erg.spatial_x},
                          {"spatial_x_stderr", erg.spatial_x_stderr},
                          {"mc_x", erg.mc_x},
                          {"mc_x_stderr", erg.mc_x_stderr},
                          {"gap_x_sigmas", json_number(erg.gap_x_sigmas)}};
  r.invariants_ok = r.invariants_ok && convex && ident <= 1e-10;
}

void cmd_response(Run& r) {
  const auto& c = r.cfg;
  auto box = LatticeBox::centered(c.dim, c.L);
  auto w = sample_disorder(box, c.seed, c.disorder);
  ConductivityKernel ck(box, w, c.params, box);
  EvolutionOptions opt;
  opt.dt = c.dt;
  CsvWriter tw({"eta", "t", "current_full", "current_linear", "residual_max"});
  std::vector<double> linear;  // per recorded time, shared across η
  double worst_linear_gap = 0;
  for (double eta : c.etas) {
    DrivenSystem sys(box, w, c.params, c.field, eta);
    auto ev = liouville_evolve(sys, c.t_end + c.dt, opt);
    std::size_t k = 0;
    for (std::size_t i = c.stride; i + 1 < ev.times.size(); i += c.stride, ++k) {
      double t = ev.times[i];
      if (k == linear.size()) linear.push_back(linear_response_current(ck, c.field, t).value);
      double full = full_current_density(sys, ev.symbols[i], t, ev.symbols.front());
      double res = box.size() > 2 ? continuity_residual_max(sys, ev, t) : NAN;
      tw.row({eta, t, full, eta * linear[k], res});
      worst_linear_gap = std::max(worst_linear_gap, std::abs(full - eta * linear[k]) / eta);
    }
  }
  r.write("trajectory.csv", tw.text());
  r.results["max_gap_over_eta"] = worst_linear_gap;
  r.results["linear_at_zero_field_time"] = linear.empty() ? json(nullptr) : json(linear.back());
}

json check_json(const CheckResult& c) {
  return {{"name", c.name}, {"passed", c.passed}, {"metric", json_number(c.metric)},
          {"threshold", c.threshold}, {"detail", c.detail}};
}

void cmd_ct(Run& r) {
  int side = r.cfg.ct_draws / 4 + 1;
  auto c = ct_suite(r.cfg.ct_draws, side, side, r.cfg.seed);
  r.results["ct"] = check_json(c);
  CsvWriter w({"check", "passed", "worst_ratio", "detail"});
  w.row_strings({c.name, c.passed ? "1" : "0", fmt_double(c.metric), c.detail});
  r.write("ct_report.csv", w.text());
  r.invariants_ok = c.passed;
}

void cmd_verify(Run& r) {
  const auto& cfg = r.cfg;
  std::vector<CheckResult> checks;
  if (cfg.oracle_instances > 0) checks.push_back(oracle_equivalence(cfg.oracle_instances, cfg.seed));
  checks.push_back(car_exactness(cfg.car_modes, cfg.seed));
  checks.push_back(ct_suite(cfg.ct_draws, cfg.ct_draws / 4 + 1, cfg.ct_draws / 4 + 1, cfg.seed));
  if (cfg.bogoliubov_instances > 0) checks.push_back(bogoliubov_suite(cfg.bogoliubov_instances, cfg.seed));

  // the configured system
  auto amb = LatticeBox::centered(cfg.dim, cfg.L_tau);
  auto w = sample_disorder(amb, cfg.seed, cfg.disorder);
  auto ev = finite_volume_evaluator(amb, w, cfg.params, cfg.field, {LatticeBox::centered(cfg.dim, cfg.L)},
                                    {LatticeBox::centered(cfg.dim, cfg.L_rho)}, {amb});
  auto curve = generating_curve(ev, cfg.s_grid.values(), cfg.threads);
  auto cs = convexity_stats(ev, curve);
  checks.push_back({"convexity", cs.min_second_difference >= -1e-9 && cs.min_d2J >= 0.0 && cs.max_slope_error <= 1e-6,
                    cs.max_slope_error, 1e-6,
                    "min second difference=" + sci(cs.min_second_difference) + " min d2J=" + sci(cs.min_d2J) +
                        " slope error=" + sci(cs.max_slope_error)});
  double forms = 0, spec_lo = 1, spec_hi = 0;
  for (double s : curve.s) {
    if (s == 0.0) continue;
    forms = std::max(forms, std::abs(ev.J(s) - ev.J_ratio_form(s)) / std::max(1e-12, std::abs(ev.J(s))));
    auto sd = eigh(ev.tilted_symbol(s));
    spec_lo = std::min(spec_lo, sd.eigenvalues.minCoeff());
    spec_hi = std::max(spec_hi, sd.eigenvalues.maxCoeff());
  }
  checks.push_back({"two J forms", forms <= 1e-10, forms, 1e-10, "relative gap=" + sci(forms)});
  checks.push_back({"tilted symbol spectrum", spec_lo >= -1e-12 && spec_hi <= 1 + 1e-12, spec_hi, 1.0,
                    "spectrum within [" + sci(spec_lo) + ", " + sci(spec_hi) + "]"});
  double range = curve.dJ.back() - curve.dJ.front();
  if (range > 0) {
    auto rs = rate_stats(curve, range / 20000.0);
    bool ok = rs.I_at_xE <= 1e-8 && rs.min_I_one_step > 0 && rs.min_second_difference >= -1e-12 &&
              rs.roundtrip_error <= 1e-6;
    checks.push_back({"rate function", ok, rs.roundtrip_error, 1e-6,
                      "I(x_E)=" + sci(rs.I_at_xE) + " I one step away=" + sci(rs.min_I_one_step) +
                          " round trip=" + sci(rs.roundtrip_error)});
  } else {
    checks.push_back({"rate function", false, 0, 1e-6, "degenerate slope range"});
  }

  auto sp = suppression_series({4}, cfg.seed, cfg.params, field_profile(to_string(cfg.field.shape) == "sampled"
                                                                             ? "smooth-bump"
                                                                             : to_string(cfg.field.shape),
                                                                         cfg.field.T, 1, cfg.field.amplitude),
                               OpenInterval{0.0, INFINITY}, linear_grid(-4, 4, 81));
  checks.push_back({"Chernoff bound", sp[0].log_mass <= sp[0].chernoff + 1e-12, sp[0].log_mass, sp[0].chernoff,
                    "(1/|L|) ln m(O)=" + fmt_double(sp[0].log_mass) + " bound=" + fmt_double(sp[0].chernoff)});

  auto box = LatticeBox::centered(cfg.dim, std::max(cfg.L, 2));
  auto wb = sample_disorder(box, cfg.seed, cfg.disorder);
  auto ct = continuity_stats(box, wb, cfg.params, cfg.field, 1.0, cfg.field.support_lo() + 0.5 * cfg.field.T, 0.02, 2);
  bool order_ok = true;
  for (double o : ct.orders) order_ok = order_ok && std::abs(o - 2.0) <= 0.2;
  checks.push_back({"continuity", ct.equilibrium <= 1e-12 && order_ok, ct.equilibrium, 1e-12,
                    "equilibrium=" + sci(ct.equilibrium) + " orders=" + fmt_double(ct.orders[0]) + "," +
                        fmt_double(ct.orders[1])});

  json arr = json::array();
  CsvWriter rep({"check", "passed", "metric", "threshold", "detail"});
  bool all = true;
  for (const auto& c : checks) {
    arr.push_back(check_json(c));
    rep.row_strings({c.name, c.passed ? "1" : "0", fmt_double(c.metric), fmt_double(c.threshold), c.detail});
    all = all && c.passed;
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
  }
  r.write("verify_report.csv", rep.text());
  r.results["checks"] = arr;
  r.results["all_passed"] = all;
  r.invariants_ok = all;
}

int run(const std::string& command, const Options& o) {
  try {
    Run r = prepare(command, o);
    if (command == "verify") cmd_verify(r);
    else if (command == "generating") cmd_generating(r, false);
    else if (command == "rate") cmd_generating(r, true);
    else if (command == "ensemble") cmd_ensemble(r);
    else if (command == "response") cmd_response(r);
    else if (command == "ct-check") cmd_ct(r);
    r.finish();
    if (!r.invariants_ok) {
      std::cerr << "qfldp " << command << ": invariant check failed (see " << (r.out / "bundle.json").string()
                << ")\n";
      return 1;
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ResourceError& e) {
    std::cerr << "resource limit: " << e.what() << "\n";
    return 4;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::bad_alloc&) {
    std::cerr << "resource limit: out of memory\n";
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quasi-free fermion current statistics"};
  app.require_subcommand(1);
  Options o;
  std::string chosen;
  for (const char* name : {"verify", "generating", "rate", "ensemble", "response", "ct-check"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("config_file", o.config_pos, "experiment config or bundle.json");
    sub->add_option("--config", o.config_opt, "experiment config or bundle.json");
    sub->add_option("--out", o.out, "output directory (default: $QFLDP_OUT, then config \"output\", then ./out)");
    sub->add_option("--threads", o.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", o.seed, "disorder seed, overrides ensemble.seed");
    sub->callback([&chosen, name] { chosen = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return run(chosen, o);
}
