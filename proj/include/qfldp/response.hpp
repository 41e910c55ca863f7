#pragma once

#include <cmath>
#include <vector>

#include "currents.hpp"
#include "errors.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "spectral.hpp"

namespace qfldp {

// ηA_L(t, x) = η a(t) p for x/L in [−1, 1]^d and 0 outside, with
// a(t) = −∫_{−∞}^t (E / p), so that E = −∂_t A inside the cube.
inline VectorPotential rescaled_potential(const FieldProfile& f, double eta, int L) {
  if (L < 1) throw ConfigError("potential window needs L >= 1");
  return [f, eta, L](double t, const Point& x) {
    Point out{0, 0, 0};
    for (int i = 0; i < f.dim; ++i)
      if (std::abs(x[i]) > double(L) + 1e-12) return out;
    double a = -eta * f.primitive(t);
    for (int i = 0; i < f.dim; ++i) out[i] = a * f.polarization[i];
    return out;
  };
}

// Λ_L with disorder ω, driven by ηA_L built from `field`
struct DrivenSystem {
  LatticeBox box;
  DisorderSample disorder;
  ModelParams params;
  FieldProfile field;
  double eta = 0;
  int L = 1;  // window radius of the potential

  DrivenSystem(const LatticeBox& b, const DisorderSample& w, const ModelParams& p, const FieldProfile& f,
               double eta_, int window = -1)
      : box(b), disorder(w), params(p), field(f), eta(eta_), L(window > 0 ? window : b.radius()) {
    if (L < 1) throw ConfigError("driven system needs a centered box or an explicit window");
    if (field.dim != box.dim()) throw ConfigError("field dimension differs from lattice dimension");
    potential_ = rescaled_potential(field, eta, L);
  }

  Matrix hamiltonian(double t) const {
    return build_magnetic_hamiltonian(box, disorder, params, potential_, t);
  }
  Matrix equilibrium_hamiltonian() const { return build_hamiltonian(box, disorder, params); }
  const VectorPotential& potential() const { return potential_; }

  double start_time() const { return field.support_lo() - 1.0; }

 private:
  VectorPotential potential_;
};

struct EvolvedSymbol {
  std::vector<double> times;
  std::vector<Matrix> symbols;
  double dt = 0;
  double t0 = 0;
  double halving_change = -1;  // ‖d(dt) − d(dt/2)‖_max at t_end when checked
};

struct EvolutionOptions {
  double dt = 0.01;
  bool halving_check = false;
  double halving_tolerance = 1e-7;
};

namespace detail {

inline EvolvedSymbol midpoint_run(const DrivenSystem& sys, double t_end, double dt) {
  double t0 = sys.start_time();
  if (!(t_end > t0)) throw DomainError("end time precedes the start of the evolution");
  int steps = static_cast<int>(std::ceil((t_end - t0) / dt - 1e-9));
  double h = (t_end - t0) / steps;
  EvolvedSymbol ev;
  ev.dt = h;
  ev.t0 = t0;
  ev.times.reserve(steps + 1);
  ev.symbols.reserve(steps + 1);
  Matrix d = fermi_symbol(sys.equilibrium_hamiltonian(), sys.params.beta);
  ev.times.push_back(t0);
  ev.symbols.push_back(d);
  for (int s = 0; s < steps; ++s) {
    double tm = t0 + (s + 0.5) * h;
    Matrix V = propagator(sys.hamiltonian(tm), -h);
    d = V * d * V.adjoint();
    d = 0.5 * (d + d.adjoint());
    ev.times.push_back(t0 + (s + 1) * h);
    ev.symbols.push_back(d);
  }
  return ev;
}

}  // namespace detail

// i∂_t d = [H(t), d] from d_{t0} = (1 + e^{βh})^{-1}, t0 one time unit
// before the field, by the exponential midpoint rule
inline EvolvedSymbol liouville_evolve(const DrivenSystem& sys, double t_end, const EvolutionOptions& opt = {}) {
  if (!(opt.dt > 0)) throw ConfigError("time step must be positive");
  if (!(sys.params.beta > 0)) throw ConfigError("beta must be positive");
  EvolvedSymbol ev = detail::midpoint_run(sys, t_end, opt.dt);
  if (opt.halving_check) {
    EvolvedSymbol fine = detail::midpoint_run(sys, t_end, 0.5 * ev.dt);
    ev.halving_change = max_abs(fine.symbols.back() - ev.symbols.back());
    if (ev.halving_change > opt.halving_tolerance)
      throw AccuracyError("halving the time step changed the symbol by " + sci(ev.halving_change) + " (dt = " + sci(ev.dt) + ")",
                          ev.halving_change);
  }
  return ev;
}

inline int time_index(const EvolvedSymbol& ev, double t) {
  for (std::size_t i = 0; i < ev.times.size(); ++i)
    if (std::abs(ev.times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return static_cast<int>(i);
  throw DomainError("time " + std::to_string(t) + " is not on the evolution grid");
}

// (1/|Λ|) Σ_k w_k Σ_{x, x+e_k ∈ Λ} [−2 Im(H_{x+e_k,x}(t) d_t[x, x+e_k]) + 2 Im(Δ_{x+e_k,x} d_eq[x, x+e_k])]
inline double full_current_density(const DrivenSystem& sys, const Matrix& d_t, double t, const Matrix& d_eq) {
  Matrix H = sys.hamiltonian(t);
  Matrix h = sys.equilibrium_hamiltonian();
  double acc = 0;
  for (const auto& e : sys.box.edges()) {
    double wk = sys.field.direction[e.dir];
    if (wk == 0.0) continue;
    int x = e.a, y = e.b;  // y = x + e_k
    acc += wk * (-2.0 * (H(y, x) * d_t(x, y)).imag() + 2.0 * (h(y, x) * d_eq(x, y)).imag());
  }
  return acc / sys.box.size();
}

inline double full_current_density(const DrivenSystem& sys, const EvolvedSymbol& ev, double t) {
  int i = time_index(ev, t);
  return full_current_density(sys, ev.symbols[i], ev.times[i], ev.symbols.front());
}

struct LinearResponseResult {
  double value = 0;
  QuadratureReport report;
  double imag_residue = 0;
};

// Σ_{k,q} w_k ∫_{−∞}^t E_q(α) C_kq(t − α) dα by composite Gauss-Legendre with doubling
inline LinearResponseResult linear_response_current(const ConductivityKernel& ck, const FieldProfile& f, double t,
                                                    double tolerance = 1e-10, int max_doublings = 8) {
  LinearResponseResult out;
  double lo = f.support_lo(), hi = std::min(t, f.support_hi());
  if (!(hi > lo)) return out;
  auto eval = [&](int density) {
    auto rule = composite_rule(lo, hi, density, f.breakpoints());
    double acc = 0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      double e = f.scalar(rule.nodes[q]);
      if (e == 0.0) continue;
      auto c = ck.at(t - rule.nodes[q]);
      out.imag_residue = std::max(out.imag_residue, c.imag_residue);
      double s = 0;
      for (int k = 0; k < f.dim; ++k)
        for (int p = 0; p < f.dim; ++p) s += f.direction[k] * f.polarization[p] * c.C(k, p);
      acc += rule.weights[q] * e * s;
    }
    return std::make_pair(acc, static_cast<int>(rule.nodes.size()));
  };
  int density = f.density;
  auto [prev, n0] = eval(density);
  for (int level = 1;; ++level) {
    auto [next, n1] = eval(2 * density);
    density *= 2;
    out.report = {density, n1, level, std::abs(next - prev)};
    prev = next;
    if (out.report.last_change <= tolerance) break;
    if (level >= max_doublings)
      throw AccuracyError("linear response quadrature did not stabilize", out.report.last_change);
  }
  out.value = prev;
  return out;
}

inline LinearResponseResult linear_response_current(const LatticeBox& box, const DisorderSample& w,
                                                    const ModelParams& p, const FieldProfile& f, double t) {
  return linear_response_current(ConductivityKernel(box, w, p, box), f, t);
}

// |∂_t⟨n_x⟩ − Σ_{|z|=1} ⟨𝐈_{(x+z, x)}⟩| at grid point t, with the inflow
// current 𝐈_{(y,x)} = −2 Im(H_yx a*_y a_x) and a central difference in time
inline double continuity_residual(const DrivenSystem& sys, const EvolvedSymbol& ev, const Coord& x, double t) {
  const auto& box = sys.box;
  if (!box.contains(x)) throw DomainError("site outside box");
  for (int j = 0; j < box.dim(); ++j) {
    Coord e = unit_vector(j);
    if (!box.contains(x + e) || !box.contains(x - e)) throw DomainError("continuity check needs an interior site");
  }
  int i = time_index(ev, t);
  if (i == 0 || i + 1 >= static_cast<int>(ev.times.size()))
    throw DomainError("central difference needs neighbouring time points");
  int ix = box.index(x);
  double dndt = (ev.symbols[i + 1](ix, ix).real() - ev.symbols[i - 1](ix, ix).real()) / (2.0 * ev.dt);
  Matrix H = sys.hamiltonian(ev.times[i]);
  const Matrix& d = ev.symbols[i];
  double inflow = 0;
  for (int j = 0; j < box.dim(); ++j) {
    for (int sgn : {1, -1}) {
      Coord y = x + (sgn > 0 ? unit_vector(j) : Coord{0, 0, 0} - unit_vector(j));
      int iy = box.index(y);
      inflow += -2.0 * (H(iy, ix) * d(ix, iy)).imag();
    }
  }
  return std::abs(dndt - inflow);
}

inline double continuity_residual_max(const DrivenSystem& sys, const EvolvedSymbol& ev, double t) {
  double worst = 0;
  for (int k = 0; k < sys.box.size(); ++k) {
    Coord x = sys.box.site(k);
    bool interior = true;
    for (int j = 0; j < sys.box.dim(); ++j)
      interior = interior && sys.box.contains(x + unit_vector(j)) && sys.box.contains(x - unit_vector(j));
    if (interior) worst = std::max(worst, continuity_residual(sys, ev, x, t));
  }
  return worst;
}

struct VelocityReport {
  int L = 0;
  double trace_norm_diff = 0;     // ‖𝔍_L − P_L(−i[H, X_k])P_L/|Λ_L|‖₁
  double operator_norm_diff = 0;
  double scaled_trace_norm = 0;   // L · trace_norm_diff
  bool support_ok = true;         // difference lives on x ∈ Λ_L with x + e_k ∉ Λ_L and their partners
  Matrix velocity;                // −i[H, X_k] on the ambient box Λ_{L+1}
};

// Compares the truncated bond current 𝔍_L with the projected velocity operator.
// Both live on Λ_{L+1} so that bonds leaving Λ_L are represented.
inline VelocityReport velocity_operator_compare(int L, const DisorderSample& w, const ModelParams& p,
                                                const VectorPotential& A, double t, int k) {
  if (L < 2) throw ConfigError("velocity comparison needs L >= 2");
  const int d = w.domain.dim();
  LatticeBox inner = LatticeBox::centered(d, L);
  LatticeBox outer = LatticeBox::centered(d, L + 1);
  if (!w.domain.contains(outer)) throw DomainError("disorder must cover Λ_{L+1}");
  if (k < 0 || k >= d) throw ConfigError("direction index out of range");
  Matrix H = build_magnetic_hamiltonian(outer, w, p, A, t);
  const int n = outer.size();
  Matrix X = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) X(i, i) = outer.site(i)[k];
  Matrix vel = cplx(0, -1) * (H * X - X * H);
  const double vol = inner.size();

  Matrix P = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    if (inner.contains(outer.site(i))) P(i, i) = 1;
  Matrix projected = P * vel * P / vol;

  Matrix bond = Matrix::Zero(n, n);
  for (int i = 0; i < inner.size(); ++i) {
    Coord x = inner.site(i);
    int ix = outer.index(x), iy = outer.index(x + unit_vector(k));
    cplx v = H(iy, ix);
    // −2 Im{v |e_y⟩⟨e_x|}
    bond(iy, ix) += -2.0 * v / cplx(0, 2);
    bond(ix, iy) += 2.0 * std::conj(v) / cplx(0, 2);
  }
  bond /= vol;

  Matrix diff = bond - projected;
  Eigen::JacobiSVD<Matrix> svd(diff);
  VelocityReport r;
  r.L = L;
  r.trace_norm_diff = svd.singularValues().sum();
  r.operator_norm_diff = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  r.scaled_trace_norm = L * r.trace_norm_diff;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (std::abs(diff(i, j)) <= 1e-14) continue;
      Coord a = outer.site(i), b = outer.site(j);
      bool ok = false;
      for (const auto& [x, y] : {std::make_pair(a, b), std::make_pair(b, a)})
        if (inner.contains(x) && !inner.contains(x + unit_vector(k)) && y == x + unit_vector(k)) ok = true;
      if (!ok) r.support_ok = false;
    }
  r.velocity = vel;
  return r;
}

}  // namespace qfldp
