#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "errors.hpp"
#include "field.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "spectral.hpp"

namespace qfldp {

// Sign in front of the δ_{kq}-term of the conductivity observable and of the
// ∫E term of K. The value −1 is the one consistent with the Peierls coupling
// used by the Liouville evolution.
constexpr double kDiamagneticSign = -1.0;

inline Matrix im_part(const Matrix& c) { return (c - c.adjoint()) / cplx(0, 2); }
inline Matrix re_part(const Matrix& c) { return 0.5 * (c + c.adjoint()); }

// ⟨e_x, Δ e_y⟩ for the disordered Laplacian (no potential term)
inline cplx laplacian_entry(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                            const Coord& x, const Coord& y) {
  if (!ambient.contains(x) || !ambient.contains(y)) throw DomainError("site outside box");
  if (x == y) return 2.0 * ambient.dim();
  for (int j = 0; j < ambient.dim(); ++j) {
    Coord e = unit_vector(j);
    if (y == x + e) return hopping(w, p, x, j);
    if (x == y + e) return std::conj(hopping(w, p, y, j));
  }
  return 0.0;
}

// S_{x,y} = ⟨e_x, Δ e_y⟩ |e_x⟩⟨e_y|
inline Matrix single_hopping(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                             const Coord& x, const Coord& y) {
  Matrix s = Matrix::Zero(ambient.size(), ambient.size());
  double r = 0;
  for (int i = 0; i < kMaxDim; ++i) r += std::abs(x[i] - y[i]);
  if (r > 1) throw DomainError("single hopping needs |x - y| <= 1");
  s(ambient.index(x), ambient.index(y)) = laplacian_entry(ambient, w, p, x, y);
  return s;
}

// Σ_{x, x+e_k ∈ Z} Im S_{x+e_k,x}
inline Matrix direction_current(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                                const LatticeBox& cell, int k) {
  Matrix g = Matrix::Zero(ambient.size(), ambient.size());
  for (const auto& e : cell.edges()) {
    if (e.dir != k) continue;
    Coord x = cell.site(e.a), y = cell.site(e.b);
    int i = ambient.index(y), j = ambient.index(x);
    cplx v = laplacian_entry(ambient, w, p, y, x);
    g(i, j) += v / cplx(0, 2);
    g(j, i) -= std::conj(v) / cplx(0, 2);
  }
  return g;
}

// Σ_{x, x+e_k ∈ Z} Re S_{x+e_k,x}
inline Matrix direction_kinetic(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                                const LatticeBox& cell, int k) {
  Matrix g = Matrix::Zero(ambient.size(), ambient.size());
  for (const auto& e : cell.edges()) {
    if (e.dir != k) continue;
    Coord x = cell.site(e.a), y = cell.site(e.b);
    int i = ambient.index(y), j = ambient.index(x);
    cplx v = laplacian_entry(ambient, w, p, y, x);
    g(i, j) += 0.5 * v;
    g(j, i) += 0.5 * std::conj(v);
  }
  return g;
}

// ∫₀^a e^{−isω} ds
inline cplx phase_integral(double a, double w) {
  double x = 0.5 * a * w;
  double sinc = std::abs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x;
  return a * std::polar(1.0, -x) * sinc;
}

struct QuadratureReport {
  int density = 0;     // nodes per unit time of the accepted rule
  int nodes = 0;
  int doublings = 0;
  double last_change = 0;  // max-entry change of the last doubling
};

struct CurrentOperator {
  Matrix K;
  QuadratureReport report;
  double diamagnetic_weight = 0;  // ∫_{−∞}^0 f, times amplitude
};

struct AssemblyOptions {
  double tolerance = 1e-8;
  int max_doublings = 8;
  int threads = 1;
};

namespace detail {

// Φ_ab = ∫ E(α) g(−α, λ_a − λ_b) dα over the part of the support in (−∞, 0]
inline Matrix phi_matrix(const RVector& lam, const FieldProfile& f, int density, int threads, int* nodes) {
  const int n = static_cast<int>(lam.size());
  Matrix phi = Matrix::Zero(n, n);
  double lo = f.support_lo(), hi = std::min(0.0, f.support_hi());
  if (!(hi > lo)) {
    *nodes = 0;
    return phi;
  }
  auto rule = composite_rule(lo, hi, density, f.breakpoints());
  *nodes = static_cast<int>(rule.nodes.size());
  std::vector<double> fw(rule.nodes.size());
  for (std::size_t q = 0; q < fw.size(); ++q) fw[q] = rule.weights[q] * f.scalar(rule.nodes[q]);
  parallel_for(n, threads, [&](int a) {
    for (int b = a; b < n; ++b) {
      double w = lam[a] - lam[b];
      cplx acc = 0;
      for (std::size_t q = 0; q < fw.size(); ++q)
        if (fw[q] != 0.0) acc += fw[q] * phase_integral(-rule.nodes[q], w);
      phi(a, b) = acc;
    }
  });
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < a; ++b) phi(a, b) = std::conj(phi(b, a));
  return phi;
}

}  // namespace detail

// K_{Z,Zτ} for the field E: the paramagnetic double integral in closed form
// in the eigenbasis of h_{Zτ}, the remaining α-integral by composite
// Gauss-Legendre with doubling, plus the ∫E term.
inline CurrentOperator assemble_K(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                                  const FieldProfile& field, const Collection& Z, const Collection& Ztau,
                                  const AssemblyOptions& opts = {}) {
  field.validate();
  if (field.dim != ambient.dim()) throw ConfigError("field dimension differs from lattice dimension");
  check_collection(ambient, Z);
  check_collection(ambient, Ztau);
  const int n = ambient.size();
  const int d = ambient.dim();
  auto sd = eigh(restrict_to_collection(ambient, w, p, Ztau));
  const Matrix& U = sd.vectors;

  std::vector<Matrix> Gp_e, Gw;
  Matrix R = Matrix::Zero(n, n);
  for (const auto& cell : Z) {
    Matrix gp = Matrix::Zero(n, n), gw = Matrix::Zero(n, n);
    for (int k = 0; k < d; ++k) {
      Matrix g = direction_current(ambient, w, p, cell, k);
      if (field.polarization[k] != 0.0) gp += field.polarization[k] * g;
      if (field.direction[k] != 0.0) gw += field.direction[k] * g;
      if (field.direction[k] * field.polarization[k] != 0.0)
        R += field.direction[k] * field.polarization[k] * direction_kinetic(ambient, w, p, cell, k);
    }
    Gp_e.push_back(U.adjoint() * gp * U);
    Gw.push_back(std::move(gw));
  }

  auto para = [&](const Matrix& phi) {
    Matrix acc = Matrix::Zero(n, n);
    for (std::size_t c = 0; c < Z.size(); ++c) {
      Matrix X = U * phi.cwiseProduct(Gp_e[c]) * U.adjoint();
      acc += cplx(0, 4) * (X * Gw[c] - Gw[c] * X);
    }
    return acc;
  };

  CurrentOperator out;
  int density = field.density, nodes = 0;
  Matrix prev = para(detail::phi_matrix(sd.eigenvalues, field, density, opts.threads, &nodes));
  if (nodes == 0) {
    out.K = prev;
  } else {
    for (int level = 1;; ++level) {
      int nodes2 = 0;
      Matrix next = para(detail::phi_matrix(sd.eigenvalues, field, 2 * density, opts.threads, &nodes2));
      double change = max_abs(next - prev);
      density *= 2;
      nodes = nodes2;
      out.report.doublings = level;
      out.report.last_change = change;
      prev = std::move(next);
      if (change <= opts.tolerance) break;
      if (level >= opts.max_doublings)
        throw AccuracyError("K quadrature did not stabilize after " + std::to_string(level) + " doublings", change);
    }
    out.K = prev;
  }
  out.report.density = density;
  out.report.nodes = nodes;
  out.diamagnetic_weight = field.primitive(0.0);
  out.K += (2.0 * kDiamagneticSign * out.diamagnetic_weight) * R;
  out.K = 0.5 * (out.K + out.K.adjoint());
  return out;
}

inline CurrentOperator assemble_K(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                                  const FieldProfile& field, const AssemblyOptions& opts = {}) {
  return assemble_K(ambient, w, p, field, {ambient}, {ambient}, opts);
}

struct ConductivityResult {
  RMatrix C;
  double imag_residue = 0;
};

// Eigendata for ϱ({C_Λ(t)}_{k,q}) in the Gibbs state of h on `ambient`, with
// the bond sums restricted to `region`; C(t) is then cheap for many t.
class ConductivityKernel {
 public:
  ConductivityKernel(const LatticeBox& ambient, const DisorderSample& w, const ModelParams& p,
                     const LatticeBox& region)
      : d_(ambient.dim()), vol_(region.size()) {
    if (!(p.beta > 0)) throw ConfigError("beta must be positive");
    if (!ambient.contains(region)) throw DomainError("region outside ambient box");
    auto sd = eigh(build_hamiltonian(ambient, w, p));
    lam_ = sd.eigenvalues;
    const Matrix& U = sd.vectors;
    const int n = static_cast<int>(lam_.size());
    f_ = RVector(n);
    for (int a = 0; a < n; ++a) f_[a] = logistic(p.beta * lam_[a]);
    Matrix d_sym = U * f_.cast<cplx>().asDiagonal() * U.adjoint();
    G_.resize(d_);
    dia_.assign(d_, 0.0);
    for (int k = 0; k < d_; ++k) {
      G_[k] = U.adjoint() * direction_current(ambient, w, p, region, k) * U;
      dia_[k] = 2.0 * kDiamagneticSign * (direction_kinetic(ambient, w, p, region, k) * d_sym).trace().real() / vol_;
    }
  }

  int dim() const { return d_; }

  ConductivityResult at(double t) const {
    if (!std::isfinite(t)) throw DomainError("time must be finite");
    const int n = static_cast<int>(lam_.size());
    ConductivityResult out;
    out.C = RMatrix::Zero(d_, d_);
    for (int k = 0; k < d_; ++k)
      for (int q = 0; q < d_; ++q) {
        cplx acc = 0;
        double scale = 0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            double df = f_[a] - f_[b];
            if (df == 0.0) continue;
            cplx term = phase_integral(t, lam_[a] - lam_[b]) * G_[q](a, b) * G_[k](b, a) * df;
            acc += term;
            scale += std::abs(term);
          }
        cplx v = cplx(0, 4) * acc / vol_;
        out.imag_residue = std::max(out.imag_residue, std::abs(v.imag()) / std::max(1.0, 4.0 * scale / vol_));
        out.C(k, q) = v.real() + (k == q ? dia_[k] : 0.0);
      }
    return out;
  }

 private:
  int d_;
  double vol_;
  RVector lam_;
  RVector f_;
  std::vector<Matrix> G_;
  std::vector<double> dia_;
};

inline ConductivityResult conductivity_expectation(const LatticeBox& ambient, const DisorderSample& w,
                                                   const ModelParams& p, double t, const LatticeBox& region) {
  return ConductivityKernel(ambient, w, p, region).at(t);
}

inline ConductivityResult conductivity_expectation(const LatticeBox& box, const DisorderSample& w,
                                                   const ModelParams& p, double t) {
  return conductivity_expectation(box, w, p, t, box);
}

// Σ_{z ∈ Z^d} g(|z|) over a cube wide enough that the dropped shell is negligible
template <class F>
double lattice_sum(int d, double rate, F&& g) {
  int R = static_cast<int>(std::ceil(40.0 / std::max(rate, 1e-3))) + 1;
  if (d == 1) {
    double acc = g(0.0);
    for (int z = 1; z <= R; ++z) acc += 2.0 * g(double(z));
    return acc;
  }
  double acc = 0;
  if (d == 2) {
    for (int a = -R; a <= R; ++a)
      for (int b = -R; b <= R; ++b) acc += g(std::sqrt(double(a * a + b * b)));
    return acc;
  }
  R = std::min(R, 200);
  for (int a = -R; a <= R; ++a)
    for (int b = -R; b <= R; ++b)
      for (int c = -R; c <= R; ++c) acc += g(std::sqrt(double(a * a + b * b + c * c)));
  return acc;
}

// ∫ ‖E(α)‖^power |α|^apow e^{2|αη|} dα
inline double field_weight(const FieldProfile& f, double eta, int power, int apow) {
  auto rule = composite_rule(f.support_lo(), f.support_hi(), 4 * f.density, f.breakpoints());
  double acc = 0;
  for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
    double a = rule.nodes[q];
    acc += rule.weights[q] * std::pow(f.norm_at(a), power) * std::pow(std::abs(a), apow) *
           std::exp(2.0 * std::abs(a * eta));
  }
  return acc;
}

struct BoundCheck {
  double lhs = 0;    // worst measured quantity
  double rhs = 0;    // matching bound
  double ratio = 0;  // worst lhs / rhs
  int violations = 0;
  int checked = 0;
};

// Pointwise and summed decay bounds for K_{Z,Zτ}
inline BoundCheck decay_lemma_check(const Matrix& K, const LatticeBox& ambient, const Collection& Z,
                                    const FieldProfile& f, const ModelParams& p, double eta, double mu) {
  const int d = ambient.dim();
  double me = ct_mu_eta(mu, eta, d, p.theta);
  double D = 4.0 * d / eta * 36.0 * 36.0 * std::pow(1.0 + p.theta, 2) *
             lattice_sum(d, 2 * me, [&](double r) { return std::exp(2.0 * me * (1.0 - r)); });
  double W = field_weight(f, eta, 1, 0);
  BoundCheck out;
  double total = 0;
  for (int i = 0; i < K.rows(); ++i)
    for (int j = 0; j < K.cols(); ++j) {
      double r = distance(ambient.site(i), ambient.site(j));
      double bound = D * W * (std::exp(-me * r) + (std::abs(r - 1.0) < 1e-12 ? eta : 0.0));
      double v = std::abs(K(i, j));
      total += v;
      ++out.checked;
      if (v > bound) ++out.violations;
      if (v / bound > out.ratio) {
        out.ratio = v / bound;
        out.lhs = v;
        out.rhs = bound;
      }
    }
  double vol = collection_volume(Z);
  double sum_bound = D * W * lattice_sum(d, me, [&](double r) { return std::exp(-me * r); }) * (1.0 + eta);
  ++out.checked;
  if (total / vol > sum_bound) ++out.violations;
  out.ratio = std::max(out.ratio, total / vol / sum_bound);
  return out;
}

inline double entry_abs_sum(const Matrix& m) { return m.cwiseAbs().sum(); }

namespace detail {

// sites touched by edges of `parent` joining a cell to its complement
inline std::set<int> boundary_sites(const LatticeBox& parent, const Collection& Z) {
  std::vector<int> owner(parent.size(), -1);
  for (std::size_t c = 0; c < Z.size(); ++c)
    for (int k = 0; k < Z[c].size(); ++k) owner[parent.index(Z[c].site(k))] = static_cast<int>(c);
  std::set<int> out;
  for (const auto& e : parent.edges())
    if (owner[e.a] != owner[e.b]) {
      if (owner[e.a] >= 0 || owner[e.b] >= 0) {
        out.insert(e.a);
        out.insert(e.b);
      }
    }
  return out;
}

inline std::vector<int> uncovered(const LatticeBox& parent, const Collection& Z) {
  std::vector<char> cov(parent.size(), 0);
  for (const auto& c : Z)
    for (int k = 0; k < c.size(); ++k) cov[parent.index(c.site(k))] = 1;
  std::vector<int> out;
  for (int k = 0; k < parent.size(); ++k)
    if (!cov[k]) out.push_back(k);
  return out;
}

}  // namespace detail

// Σ|K_{{Λ},{Λ̃}} − K_{{Λ},Z}| against the first box-decomposition bound;
// `ambient` plays the role of Λ̃
inline BoundCheck box_lemma_one_check(const LatticeBox& ambient, const LatticeBox& region, const Collection& Z,
                                      const DisorderSample& w, const ModelParams& p, const FieldProfile& f,
                                      double eta, double mu, const AssemblyOptions& opts = {}) {
  const int d = ambient.dim();
  Matrix K1 = assemble_K(ambient, w, p, f, {region}, {ambient}, opts).K;
  Matrix K2 = assemble_K(ambient, w, p, f, {region}, Z, opts).K;
  double me = ct_mu_eta(mu, eta, d, p.theta);
  double s1 = lattice_sum(d, me, [&](double r) { return std::exp(-me * r); });
  double D = 8.0 * std::pow(36.0, 4) * std::pow(1.0 + p.theta, 3) * (4.0 * d + p.lambda) * std::exp(3.0 * me) *
             s1 * s1 * s1;
  double W = field_weight(f, eta, 1, 2);
  double geo = 0;
  auto unc = detail::uncovered(ambient, Z);
  for (int i = 0; i < region.size(); ++i)
    for (int z : unc) geo += std::exp(-me * distance(region.site(i), ambient.site(z)));
  geo += s1 * double(detail::boundary_sites(ambient, Z).size());
  BoundCheck out;
  out.lhs = entry_abs_sum(K1 - K2);
  out.rhs = D * W * geo;
  out.ratio = out.rhs > 0 ? out.lhs / out.rhs : (out.lhs > 0 ? INFINITY : 0.0);
  out.checked = 1;
  out.violations = out.lhs > out.rhs ? 1 : 0;
  return out;
}

// Σ|K_{{Λ},Zτ} − K_{Z,Zτ}| against the second box-decomposition bound;
// `region` is Λ and Z tiles part of it
inline BoundCheck box_lemma_two_check(const LatticeBox& ambient, const LatticeBox& region, const Collection& Z,
                                      const Collection& Ztau, const DisorderSample& w, const ModelParams& p,
                                      const FieldProfile& f, double eta, double mu,
                                      const AssemblyOptions& opts = {}) {
  const int d = ambient.dim();
  for (const auto& c : Z)
    if (!region.contains(c)) throw DomainError("collection must lie inside the region");
  Matrix K1 = assemble_K(ambient, w, p, f, {region}, Ztau, opts).K;
  Matrix K2 = assemble_K(ambient, w, p, f, Z, Ztau, opts).K;
  double me = ct_mu_eta(mu, eta, d, p.theta);
  double s2 = lattice_sum(d, 2 * me, [&](double r) { return std::exp(-2.0 * me * r); });
  double D = 16.0 * 36.0 * 36.0 * std::pow(1.0 + p.theta, 2) * d * std::exp(4.0 * me) * s2 * s2 +
             d * (1.0 + p.theta);
  double W = field_weight(f, eta, 2, 1);
  auto bnd = detail::boundary_sites(region, Z);
  for (int k : detail::uncovered(region, Z)) bnd.insert(k);
  BoundCheck out;
  out.lhs = entry_abs_sum(K1 - K2);
  out.rhs = D * W * double(bnd.size());
  out.ratio = out.rhs > 0 ? out.lhs / out.rhs : (out.lhs > 0 ? INFINITY : 0.0);
  out.checked = 1;
  out.violations = out.lhs > out.rhs ? 1 : 0;
  return out;
}

}  // namespace qfldp
