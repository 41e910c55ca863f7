#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <tuple>
#include <vector>

#include "currents.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "quasifree.hpp"
#include "rng.hpp"

namespace qfldp {

// J_{Z, Zρ, Zτ}(s) = (1/|∪Z|) ln ρ_{h_{Zρ}}(e^{s ⟨A, K_{Z,Zτ} A⟩}) on `ambient`;
// sites of `ambient` outside ∪Zρ are in the tracial state
inline GeneratingEvaluator finite_volume_evaluator(const LatticeBox& ambient, const DisorderSample& w,
                                                   const ModelParams& p, const FieldProfile& f, const Collection& Z,
                                                   const Collection& Zrho, const Collection& Ztau,
                                                   const AssemblyOptions& opts = {}) {
  Matrix K = assemble_K(ambient, w, p, f, Z, Ztau, opts).K;
  Matrix h = restrict_to_collection(ambient, w, p, Zrho);
  return GeneratingEvaluator(h, K, p.beta, collection_volume(Z));
}

inline GeneratingCurve finite_volume_curve(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                                           const FieldProfile& f, const Collection& Z, const Collection& Zrho,
                                           const Collection& Ztau, const std::vector<double>& s_grid) {
  return generating_curve(finite_volume_evaluator(ambient, w, p, f, Z, Zrho, Ztau), s_grid);
}

struct EnsembleSpec {
  int samples = 20;
  std::uint64_t seed_base = 1;
  ModelParams params;
  DisorderMode mode = DisorderMode::uniform_iid;
  int dim = 1;
  int L = 4;
  int L_rho = 8;
  int L_tau = 16;
  int cell_radius = 2;
  FieldProfile field;
  std::vector<double> s_grid = default_s_grid();
  int threads = 1;

  void validate() const {
    if (samples < 1) throw ConfigError("ensemble needs at least one sample");
    if (!(L_tau >= L_rho && L_rho >= L && L >= cell_radius && cell_radius >= 1))
      throw ConfigError("box sizes must satisfy L_tau >= L_rho >= L >= l >= 1");
    if (field.dim != dim) throw ConfigError("field dimension differs from lattice dimension");
    params.validate();
    field.validate();
    for (std::size_t i = 1; i < s_grid.size(); ++i)
      if (!(s_grid[i] > s_grid[i - 1])) throw ConfigError("s-grid must be strictly ascending");
    long n = 1;
    for (int i = 0; i < dim; ++i) n *= 2 * L_tau + 1;
    if (n > kDenseCap) throw ResourceError("ambient box exceeds the dense cap");
  }
};

struct SampleRecord {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string message;
  double seconds = 0;  // wall time, not part of reproducible output
};

struct CurveStatistics {
  std::vector<double> s;
  std::vector<double> mean_J, stderr_J;
  std::vector<double> mean_dJ, stderr_dJ;
  std::vector<double> mean_d2J;
  int count = 0;
};

namespace detail {

// moments of deviations from the first entry, so equal samples give exactly zero spread
inline std::pair<double, double> mean_stderr(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  const double x0 = v.front(), n = v.size();
  double m = 0, s = 0;
  for (double x : v) m += (x - x0) / n;
  for (double x : v) s += (x - x0 - m) * (x - x0 - m);
  return {x0 + m, v.size() > 1 ? std::sqrt(s / (n - 1) / n) : 0.0};
}

}  // namespace detail

inline CurveStatistics curve_statistics(const std::vector<GeneratingCurve>& curves) {
  CurveStatistics st;
  if (curves.empty()) return st;
  const std::size_t m = curves.front().s.size();
  st.s = curves.front().s;
  st.count = static_cast<int>(curves.size());
  st.mean_J.assign(m, 0);
  st.stderr_J.assign(m, 0);
  st.mean_dJ.assign(m, 0);
  st.stderr_dJ.assign(m, 0);
  st.mean_d2J.assign(m, 0);
  std::vector<double> col(curves.size());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < curves.size(); ++i) col[i] = curves[i].J[j];
    std::tie(st.mean_J[j], st.stderr_J[j]) = detail::mean_stderr(col);
    for (std::size_t i = 0; i < curves.size(); ++i) col[i] = curves[i].dJ[j];
    std::tie(st.mean_dJ[j], st.stderr_dJ[j]) = detail::mean_stderr(col);
    double c = 0;
    for (const auto& cv : curves) c += cv.d2J[j];
    st.mean_d2J[j] = c / curves.size();
  }
  return st;
}

struct EnsembleResult {
  std::vector<SampleRecord> manifest;
  std::vector<GeneratingCurve> curves;  // successful samples, index order
  CurveStatistics stats;
  GeneratingCurve single;  // sample 0 (seed = seed_base)
  bool single_ok = false;
};

// Per-sample task with the failure policy: numerical errors are recorded,
// more than 10% failures abort the run.
template <class Task>
EnsembleResult run_samples(const EnsembleSpec& spec, Task&& task) {
  EnsembleResult out;
  const int N = spec.samples;
  std::vector<GeneratingCurve> curves(N);
  out.manifest.resize(N);
  parallel_for(N, spec.threads, [&](int i) {
    auto& rec = out.manifest[i];
    rec.index = i;
    rec.seed = sample_seed(spec.seed_base, i);
    auto t0 = std::chrono::steady_clock::now();
    try {
      curves[i] = task(rec.seed);
      rec.ok = true;
      rec.message = "ok";
    } catch (const ConfigError&) {
      throw;
    } catch (const ResourceError&) {
      throw;
    } catch (const Error& e) {
      rec.ok = false;
      rec.message = e.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  int failures = 0;
  for (int i = 0; i < N; ++i) {
    if (out.manifest[i].ok)
      out.curves.push_back(curves[i]);
    else
      ++failures;
  }
  if (failures * 10 > N)
    throw DataError(std::to_string(failures) + " of " + std::to_string(N) + " samples failed");
  if (out.manifest[0].ok) {
    out.single = curves[0];
    out.single_ok = true;
  }
  out.stats = curve_statistics(out.curves);
  return out;
}

// J_{{Λ_L},{Λ_Lρ},{Λ_Lτ}} for one disorder seed
inline GeneratingCurve nested_curve(const EnsembleSpec& spec, std::uint64_t seed, int L) {
  LatticeBox amb = LatticeBox::centered(spec.dim, spec.L_tau);
  auto w = sample_disorder(amb, seed, spec.mode);
  return finite_volume_curve(amb, w, spec.params, spec.field, {LatticeBox::centered(spec.dim, L)},
                             {LatticeBox::centered(spec.dim, spec.L_rho)}, {amb}, spec.s_grid);
}

inline EnsembleResult mc_generating(const EnsembleSpec& spec) {
  spec.validate();
  return run_samples(spec, [&](std::uint64_t seed) { return nested_curve(spec, seed, spec.L); });
}

struct ConvergencePoint {
  int L = 0;
  CurveStatistics stats;
  double mean_xE = 0, stderr_xE = 0;
  double single_gap = 0;  // max_s |J_single − mean J|
};

// per-L ensemble statistics with L_ρ : L_τ : L ratios taken from the spec
inline std::vector<ConvergencePoint> convergence_run(const EnsembleSpec& spec, const std::vector<int>& Ls) {
  std::vector<ConvergencePoint> out;
  for (int L : Ls) {
    EnsembleSpec s = spec;
    s.L = L;
    s.L_rho = L * spec.L_rho / spec.L;
    s.L_tau = L * spec.L_tau / spec.L;
    s.cell_radius = std::min(spec.cell_radius, L);
    auto r = mc_generating(s);
    ConvergencePoint pt;
    pt.L = L;
    pt.stats = r.stats;
    int z = -1;
    for (std::size_t j = 0; j < s.s_grid.size(); ++j)
      if (s.s_grid[j] == 0.0) z = static_cast<int>(j);
    if (z >= 0) {
      pt.mean_xE = r.stats.mean_dJ[z];
      pt.stderr_xE = r.stats.stderr_dJ[z];
    }
    if (r.single_ok)
      for (std::size_t j = 0; j < r.single.J.size(); ++j)
        pt.single_gap = std::max(pt.single_gap, std::abs(r.single.J[j] - r.stats.mean_J[j]));
    out.push_back(pt);
  }
  return out;
}

struct DecompositionPoint {
  int l = 0;
  int cells = 0;
  double discrepancy = 0;        // sample mean of max_s |J_big − cell average|
  double discrepancy_stderr = 0;
  double identity_residual = 0;  // worst |J_{cells,cells,cells} − cell average|
};

// One disorder realization: per-cell curves J_{{Z},{Z},{Z}}, their average,
// and the decomposed evaluation on Λ_L
struct CellAverage {
  std::vector<GeneratingCurve> cells;
  std::vector<double> mean_J;
  double identity_residual = 0;
};

inline CellAverage cell_average(const LatticeBox& box, const DisorderSample& w, const ModelParams& p,
                                const FieldProfile& f, int l, const std::vector<double>& s_grid,
                                bool check_identity = true) {
  auto dec = decompose(box, l);
  if (dec.cells.empty()) throw ConfigError("cell radius too large for the box");
  CellAverage out;
  out.mean_J.assign(s_grid.size(), 0);
  for (const auto& c : dec.cells) {
    out.cells.push_back(finite_volume_curve(c, w, p, f, {c}, {c}, {c}, s_grid));
    for (std::size_t j = 0; j < s_grid.size(); ++j) out.mean_J[j] += out.cells.back().J[j] / dec.cells.size();
  }
  if (check_identity) {
    auto joint = finite_volume_evaluator(box, w, p, f, dec.cells, dec.cells, dec.cells);
    for (std::size_t j = 0; j < s_grid.size(); ++j)
      out.identity_residual = std::max(out.identity_residual, std::abs(joint.J(s_grid[j]) - out.mean_J[j]));
  }
  return out;
}

inline std::vector<DecompositionPoint> box_decomposition_compare(const EnsembleSpec& spec,
                                                                 const std::vector<int>& ls) {
  spec.validate();
  const int N = spec.samples;
  const int nl = static_cast<int>(ls.size());
  for (int l : ls)
    if (l < 1 || l > spec.L) throw ConfigError("cell radii must satisfy 1 <= l <= L");
  std::vector<std::vector<double>> disc(N, std::vector<double>(nl, 0));
  std::vector<std::vector<double>> ident(N, std::vector<double>(nl, 0));
  std::vector<int> cells(nl, 0);
  parallel_for(N, spec.threads, [&](int i) {
    auto seed = sample_seed(spec.seed_base, i);
    LatticeBox amb = LatticeBox::centered(spec.dim, spec.L_tau);
    LatticeBox box = LatticeBox::centered(spec.dim, spec.L);
    auto w = sample_disorder(amb, seed, spec.mode);
    auto big = finite_volume_curve(amb, w, spec.params, spec.field, {box},
                                   {LatticeBox::centered(spec.dim, spec.L_rho)}, {amb}, spec.s_grid);
    for (int k = 0; k < nl; ++k) {
      auto ca = cell_average(box, w, spec.params, spec.field, ls[k], spec.s_grid);
      double worst = 0;
      for (std::size_t j = 0; j < spec.s_grid.size(); ++j) worst = std::max(worst, std::abs(big.J[j] - ca.mean_J[j]));
      disc[i][k] = worst;
      ident[i][k] = ca.identity_residual;
    }
  });
  for (int k = 0; k < nl; ++k) cells[k] = static_cast<int>(decompose(LatticeBox::centered(spec.dim, spec.L), ls[k]).cells.size());
  std::vector<DecompositionPoint> out;
  for (int k = 0; k < nl; ++k) {
    DecompositionPoint pt;
    pt.l = ls[k];
    pt.cells = cells[k];
    double m = 0, v = 0;
    for (int i = 0; i < N; ++i) m += disc[i][k] / N;
    for (int i = 0; i < N; ++i) v += (disc[i][k] - m) * (disc[i][k] - m);
    pt.discrepancy = m;
    pt.discrepancy_stderr = N > 1 ? std::sqrt(v / (N - 1) / N) : 0.0;
    for (int i = 0; i < N; ++i) pt.identity_residual = std::max(pt.identity_residual, ident[i][k]);
    out.push_back(pt);
  }
  return out;
}

struct ErgodicReport {
  int cells = 0;
  int samples = 0;
  // quantities: J(s_probe) and dJ(0)
  double s_probe = 1.0;
  double spatial_J = 0, spatial_J_stderr = 0;
  double mc_J = 0, mc_J_stderr = 0;
  double spatial_x = 0, spatial_x_stderr = 0;
  double mc_x = 0, mc_x_stderr = 0;
  double gap_J_sigmas = 0;  // |spatial − mc| / combined stderr
  double gap_x_sigmas = 0;
};

namespace detail {

inline double sigmas(double a, double sa, double b, double sb) {
  double c = std::sqrt(sa * sa + sb * sb);
  double g = std::abs(a - b);
  if (c == 0) return g <= 1e-12 ? 0.0 : INFINITY;
  return g / c;
}

}  // namespace detail

// Cell average over Z^{(Λ_L, l)} of one large realization (seed base ⊕ N)
// against the Monte Carlo mean of J_{{Λ_l},{Λ_l},{Λ_l}} over seeds base ⊕ i,
// i < N
inline ErgodicReport ergodic_average_check(const EnsembleSpec& spec, double s_probe = 1.0) {
  spec.validate();
  const int l = spec.cell_radius;
  if (s_probe == 0.0) throw ConfigError("probe s must be non-zero");

  LatticeBox box = LatticeBox::centered(spec.dim, spec.L);
  auto big = sample_disorder(box, sample_seed(spec.seed_base, spec.samples), spec.mode);
  auto dec = decompose(box, l);
  std::vector<double> cJ(dec.cells.size()), cx(dec.cells.size());
  parallel_for(static_cast<int>(dec.cells.size()), spec.threads, [&](int c) {
    const auto& z = dec.cells[c];
    auto ev = finite_volume_evaluator(z, big, spec.params, spec.field, {z}, {z}, {z});
    cJ[c] = ev.J(s_probe);
    cx[c] = ev.derivatives(0.0).first;
  });
  std::vector<double> mJ(spec.samples), mx(spec.samples);
  LatticeBox cell = LatticeBox::centered(spec.dim, l);
  parallel_for(spec.samples, spec.threads, [&](int i) {
    auto w = sample_disorder(cell, sample_seed(spec.seed_base, i), spec.mode);
    auto ev = finite_volume_evaluator(cell, w, spec.params, spec.field, {cell}, {cell}, {cell});
    mJ[i] = ev.J(s_probe);
    mx[i] = ev.derivatives(0.0).first;
  });
  ErgodicReport r;
  r.cells = static_cast<int>(dec.cells.size());
  r.samples = spec.samples;
  r.s_probe = s_probe;
  std::tie(r.spatial_J, r.spatial_J_stderr) = detail::mean_stderr(cJ);
  std::tie(r.mc_J, r.mc_J_stderr) = detail::mean_stderr(mJ);
  std::tie(r.spatial_x, r.spatial_x_stderr) = detail::mean_stderr(cx);
  std::tie(r.mc_x, r.mc_x_stderr) = detail::mean_stderr(mx);
  r.gap_J_sigmas = detail::sigmas(r.spatial_J, r.spatial_J_stderr, r.mc_J, r.mc_J_stderr);
  r.gap_x_sigmas = detail::sigmas(r.spatial_x, r.spatial_x_stderr, r.mc_x, r.mc_x_stderr);
  return r;
}

}  // namespace qfldp
