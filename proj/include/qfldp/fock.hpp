#pragma once

#include <bit>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include "errors.hpp"
#include "quadrature.hpp"
#include "spectral.hpp"

namespace qfldp {

constexpr int kFockCap = 10;

// Dense operator on the 2^n dimensional Fock space. Basis state s has mode i
// occupied iff bit i of s is set; creation operators act in mode order.
struct FockOperator {
  int n = 0;
  Matrix matrix;
  std::string label;
};

namespace detail {

inline void check_modes(int n) {
  if (n < 1) throw ConfigError("mode count must be positive");
  if (n > kFockCap) throw ResourceError("Fock oracle limited to 10 modes");
}

// (-1)^{number of occupied modes below i}
inline double jw_sign(unsigned s, int i) { return (std::popcount(s & ((1u << i) - 1u)) & 1) ? -1.0 : 1.0; }

}  // namespace detail

using SparseOp = Eigen::SparseMatrix<cplx>;

struct CarGenerators {
  int n = 0;
  std::vector<SparseOp> a;  // annihilators

  FockOperator annihilator(int i) const { return {n, Matrix(a[i]), "a_" + std::to_string(i)}; }
  FockOperator creator(int i) const { return {n, Matrix(a[i].adjoint()), "a*_" + std::to_string(i)}; }
};

inline CarGenerators build_car_generators(int n) {
  detail::check_modes(n);
  const int dim = 1 << n;
  CarGenerators g;
  g.n = n;
  for (int i = 0; i < n; ++i) {
    std::vector<Eigen::Triplet<cplx>> trip;
    for (unsigned s = 0; s < unsigned(dim); ++s)
      if (s & (1u << i)) trip.emplace_back(int(s ^ (1u << i)), int(s), detail::jw_sign(s, i));
    SparseOp m(dim, dim);
    m.setFromTriplets(trip.begin(), trip.end());
    g.a.push_back(std::move(m));
  }
  return g;
}

// a(ψ) = Σ_i conj(ψ_i) a_i (antilinear in ψ)
inline FockOperator annihilation(const CVector& psi, const CarGenerators& g) {
  if (psi.size() != g.n) throw DomainError("vector length does not match mode count");
  const int dim = 1 << g.n;
  Matrix m = Matrix::Zero(dim, dim);
  for (int i = 0; i < g.n; ++i) m += std::conj(psi[i]) * Matrix(g.a[i]);
  return {g.n, m, "a(psi)"};
}

// ⟨A, C A⟩ = Σ_ij C_ij a*_i a_j, assembled state by state
inline FockOperator bilinear_to_fock(const Matrix& C, int n) {
  detail::check_modes(n);
  if (C.rows() != n || C.cols() != n) throw DomainError("bilinear coefficient has wrong dimension");
  const int dim = 1 << n;
  Matrix m = Matrix::Zero(dim, dim);
  for (unsigned s = 0; s < unsigned(dim); ++s) {
    for (int j = 0; j < n; ++j) {
      if (!(s & (1u << j))) continue;
      unsigned s1 = s ^ (1u << j);
      double sg1 = detail::jw_sign(s, j);
      for (int i = 0; i < n; ++i) {
        if (C(i, j) == cplx(0)) continue;
        if (s1 & (1u << i)) continue;
        unsigned s2 = s1 | (1u << i);
        m(int(s2), int(s)) += C(i, j) * sg1 * detail::jw_sign(s1, i);
      }
    }
  }
  return {n, m, "bilinear"};
}

inline FockOperator bilinear_to_fock(const Matrix& C, const CarGenerators& g) { return bilinear_to_fock(C, g.n); }

// a*_i a_j from generator products
inline Matrix fock_hop(const CarGenerators& g, int i, int j) { return Matrix(g.a[i].adjoint() * g.a[j]); }

// tr(X W) / tr(W)
inline cplx fock_trace_state(const Matrix& W, const Matrix& X) {
  cplx z = W.trace();
  if (std::abs(z) == 0.0) throw SingularityError("state weight has zero trace", 0.0);
  return (X * W).trace() / z;
}

inline bool is_hermitian(const Matrix& m, double tol = 1e-12) {
  return max_abs(m - m.adjoint()) <= tol * (1.0 + max_abs(m));
}

// Exponential of a Fock matrix. Hermitian and skew-Hermitian inputs go
// through an eigendecomposition; anything else through scaling and squaring.
inline Matrix fock_exp(const Matrix& x) {
  if (is_hermitian(x)) return hermitian_exp(x);
  Matrix ix = cplx(0, -1) * x;
  if (is_hermitian(ix)) {
    auto sd = eigh(ix);
    return apply_function(sd, [](double l) { return std::polar(1.0, l); });
  }
  return x.exp();
}

// basis states of the Fock space grouped by particle number
inline std::vector<std::vector<int>> number_sectors(int n) {
  std::vector<std::vector<int>> out(n + 1);
  for (int s = 0; s < (1 << n); ++s) out[std::popcount(unsigned(s))].push_back(s);
  return out;
}

inline Matrix sector_block(const Matrix& X, const std::vector<int>& idx) {
  const int m = static_cast<int>(idx.size());
  Matrix B(m, m);
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) B(a, b) = X(idx[a], idx[b]);
  return B;
}

// exp(z X) for a Hermitian X that conserves particle number, one number
// sector at a time
inline Matrix sector_exp(const Matrix& X, cplx z) {
  const int dim = static_cast<int>(X.rows());
  int n = 0;
  while ((1 << n) < dim) ++n;
  Matrix out = Matrix::Zero(dim, dim);
  for (const auto& idx : number_sectors(n)) {
    Matrix E = apply_function(eigh(sector_block(X, idx)), [&](double l) { return std::exp(z * l); });
    for (std::size_t a = 0; a < idx.size(); ++a)
      for (std::size_t b = 0; b < idx.size(); ++b) out(idx[a], idx[b]) = E(a, b);
  }
  return out;
}

// Exact quasi-free quantities evaluated on Fock space. The state is the Gibbs
// state of ⟨A, h A⟩ at inverse temperature β.
class FockModel {
 public:
  FockModel(const Matrix& h, double beta) : n_(static_cast<int>(h.rows())), gen_(build_car_generators(n_)) {
    H_ = bilinear_to_fock(h, n_).matrix;
    Hsd_ = eigh(H_);
    const auto& E = Hsd_.eigenvalues;
    double emin = E.size() ? E.minCoeff() : 0.0;
    weights_ = RVector(E.size());
    for (int i = 0; i < E.size(); ++i) weights_[i] = std::exp(-beta * (E[i] - emin));
    weights_ /= weights_.sum();
    W_ = Hsd_.vectors * weights_.cast<cplx>().asDiagonal() * Hsd_.vectors.adjoint();
  }

  int modes() const { return n_; }
  const CarGenerators& generators() const { return gen_; }
  const Matrix& hamiltonian() const { return H_; }
  const Matrix& density() const { return W_; }

  cplx expect(const Matrix& X) const { return (X * W_).trace(); }

  Matrix bilinear(const Matrix& C) const { return bilinear_to_fock(C, n_).matrix; }

  // ρ(a*_i a_j)
  Matrix two_point() const {
    Matrix out(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out(i, j) = expect(fock_hop(gen_, i, j));
    return out;
  }

  // ρ(e^{⟨A, C A⟩})
  cplx exp_expectation(const Matrix& C) const { return expect(fock_exp(bilinear(C))); }

  // (1/V)[ln tr(e^{−βH} e^{s𝔎}) − ln tr(e^{−βH})]
  double generating(const Matrix& K, double s, double volume) const {
    cplx z = expect(fock_exp(s * bilinear(K)));
    return std::log(z.real()) / volume;
  }

  // tilted-state mean and variance of 𝔎 divided by V
  std::pair<double, double> generating_derivatives(const Matrix& K, double s, double volume) const {
    Matrix Kf = bilinear(K);
    Matrix half = fock_exp(0.5 * s * Kf);
    Matrix tilted = half * W_ * half;
    double z = tilted.trace().real();
    double m1 = (Kf * tilted).trace().real() / z;
    double m2 = (Kf * Kf * tilted).trace().real() / z;
    return {m1 / volume, (m2 - m1 * m1) / volume};
  }

  cplx characteristic(const Matrix& K, double u) const {
    return expect(fock_exp(cplx(0, u) * bilinear(K)));
  }

  // distribution of ⟨A, K A⟩ in the state: eigenvalues and their weights,
  // with eigenvalues closer than `merge` fused
  std::vector<std::pair<double, double>> atomic_measure(const Matrix& K, double merge = 1e-9) const {
    auto sd = eigh(bilinear(K));
    std::vector<std::pair<double, double>> atoms;
    for (int a = 0; a < sd.eigenvalues.size(); ++a) {
      CVector v = sd.vectors.col(a);
      double w = (v.adjoint() * W_ * v)(0, 0).real();
      double e = sd.eigenvalues[a];
      if (!atoms.empty() && std::abs(e - atoms.back().first) <= merge)
        atoms.back().second += w;
      else
        atoms.emplace_back(e, w);
    }
    return atoms;
  }

  // ∫₀ᵗ ρ(i[τ_{−α}(X), Y]) dα by composite Gauss-Legendre in α, with
  // τ_t(B) = e^{itH} B e^{−itH}
  double kubo_integral(const Matrix& X, const Matrix& Y, double t, int density = 64) const {
    const auto& U = Hsd_.vectors;
    const auto& E = Hsd_.eigenvalues;
    Matrix Xe = U.adjoint() * X * U;
    Matrix Ye = U.adjoint() * Y * U;
    const int dim = static_cast<int>(E.size());
    double lo = std::min(0.0, t), hi = std::max(0.0, t);
    auto rule = composite_rule(lo, hi, density);
    double sign = t >= 0 ? 1.0 : -1.0;
    double acc = 0.0;
    for (std::size_t q = 0; q < rule.nodes.size(); ++q) {
      double alpha = rule.nodes[q];
      // ρ(i[X(−α), Y]) = i Σ_ab (w_a − w_b) X_ab e^{−iα(E_a − E_b)} Y_ba
      cplx v = 0;
      for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) {
          double dw = weights_[a] - weights_[b];
          if (dw == 0.0) continue;
          v += dw * Xe(a, b) * std::polar(1.0, -alpha * (E[a] - E[b])) * Ye(b, a);
        }
      acc += sign * rule.weights[q] * (cplx(0, 1) * v).real();
    }
    return acc;
  }

 private:
  int n_;
  CarGenerators gen_;
  Matrix H_;
  SpectralDecomposition Hsd_;
  RVector weights_;
  Matrix W_;
};

struct IdentityReport {
  double bogoliubov_i_lhs = 0;   // worst |∂_α ln tr(C e^{H_α})|
  double bogoliubov_i_rhs = 0;   // matching sup-norm bound
  double bogoliubov_i_violation = 0;   // max(lhs − rhs, 0) over α
  double bogoliubov_ii_lhs = 0;
  double bogoliubov_ii_rhs = 0;
  double bogoliubov_ii_violation = 0;
  double lemma_cool_D = 0;         // ln(tr LHS / tr RHS)
  double lemma_cool_residual = 0;  // ‖LHS − e^D RHS‖_max / ‖LHS‖_max
  double continuity_operator_residual = 0;  // ‖i[H, n_x] − Σ_y currents‖_max
  double continuity_equilibrium_residual = 0;
};

namespace detail {

// sup over a u-grid on [−1/2, 1/2] of ‖e^{uH} X e^{−uH}‖ with H Hermitian
inline double conjugated_norm_sup(const Matrix& H, const Matrix& X, int ugrid = 11) {
  auto sd = eigh(H);
  Matrix Xe = sd.vectors.adjoint() * X * sd.vectors;
  const auto& E = sd.eigenvalues;
  double best = 0.0;
  for (int k = 0; k < ugrid; ++k) {
    double u = -0.5 + double(k) / (ugrid - 1);
    Matrix Y = Xe;
    for (int a = 0; a < Y.rows(); ++a)
      for (int b = 0; b < Y.cols(); ++b) Y(a, b) *= std::exp(u * (E[a] - E[b]));
    best = std::max(best, spectral_norm(Y));
  }
  return best;
}

// ∂_α ln tr(C e^{H0 + α D}) through divided differences of exp in the
// eigenbasis of H_α
inline double log_trace_derivative(const Matrix& C, const Matrix& Ha, const Matrix& D) {
  auto sd = eigh(Ha);
  const auto& E = sd.eigenvalues;
  const int dim = static_cast<int>(E.size());
  double emax = E.maxCoeff();
  Matrix De = sd.vectors.adjoint() * D * sd.vectors;
  Matrix Ce = sd.vectors.adjoint() * C * sd.vectors;
  cplx num = 0, den = 0;
  for (int a = 0; a < dim; ++a) {
    den += Ce(a, a) * std::exp(E[a] - emax);
    for (int b = 0; b < dim; ++b) {
      double dd;
      double x = E[a] - emax, y = E[b] - emax;
      if (std::abs(E[a] - E[b]) < 1e-12)
        dd = std::exp(0.5 * (x + y));
      else
        dd = (std::exp(x) - std::exp(y)) / (E[a] - E[b]);
      num += Ce(b, a) * De(a, b) * dd;
    }
  }
  return (num / den).real();
}

}  // namespace detail

// Bogoliubov-type inequalities with C = e^{−β⟨A,hA⟩}, H₀ = 0, H₁ = s⟨A,KA⟩;
// product-of-exponentials identity with C₁ = −βh, C₂ = sK/2; continuity of
// the particle density in the Gibbs state of h.
inline IdentityReport verify_identities_suite(const Matrix& h, const Matrix& K, double beta, double s) {
  const int n = static_cast<int>(h.rows());
  detail::check_modes(n);
  IdentityReport r;
  FockModel fm(h, beta);
  Matrix C = fm.density();
  Matrix H0 = Matrix::Zero(C.rows(), C.cols());
  Matrix H1 = s * fm.bilinear(K);
  Matrix D = H1 - H0;

  const int agrid = 6;
  for (int k = 0; k < agrid; ++k) {
    double a = double(k) / (agrid - 1);
    Matrix Ha = H0 + a * D;
    double lhs = std::abs(detail::log_trace_derivative(C, Ha, D));
    double rhs = detail::conjugated_norm_sup(Ha, D);
    r.bogoliubov_i_lhs = std::max(r.bogoliubov_i_lhs, lhs);
    r.bogoliubov_i_rhs = std::max(r.bogoliubov_i_rhs, rhs);
    r.bogoliubov_i_violation = std::max(r.bogoliubov_i_violation, lhs - rhs);
    r.bogoliubov_ii_rhs = std::max(r.bogoliubov_ii_rhs, rhs);
  }
  double t1 = (C * fock_exp(H1)).trace().real();
  double t0 = (C * fock_exp(H0)).trace().real();
  r.bogoliubov_ii_lhs = std::abs(std::log(t1) - std::log(t0));
  r.bogoliubov_ii_violation = std::max(0.0, r.bogoliubov_ii_lhs - r.bogoliubov_ii_rhs);

  Matrix C1 = -beta * h, C2 = 0.5 * s * K;
  Matrix e2 = hermitian_exp(C2);
  Matrix prod = e2 * hermitian_exp(C1) * e2;
  Matrix Clog = hermitian_log(0.5 * (prod + prod.adjoint()));
  Matrix F2 = fock_exp(fm.bilinear(C2));
  Matrix lhs = F2 * fock_exp(fm.bilinear(C1)) * F2;
  Matrix rhs = fock_exp(fm.bilinear(Clog));
  r.lemma_cool_D = std::log(lhs.trace().real() / rhs.trace().real());
  r.lemma_cool_residual = max_abs(lhs - std::exp(r.lemma_cool_D) * rhs) / max_abs(lhs);

  const auto& g = fm.generators();
  const Matrix& H = fm.hamiltonian();
  for (int x = 0; x < n; ++x) {
    Matrix nx = fock_hop(g, x, x);
    Matrix lhs_op = cplx(0, 1) * (H * nx - nx * H);
    Matrix rhs_op = Matrix::Zero(H.rows(), H.cols());
    for (int y = 0; y < n; ++y) {
      if (y == x || h(y, x) == cplx(0)) continue;
      // inflow I_(y,x) = −2 Im(h_yx a*_y a_x)
      Matrix hop = h(y, x) * fock_hop(g, y, x);
      rhs_op += -2.0 * (hop - hop.adjoint()) / cplx(0, 2);
    }
    r.continuity_operator_residual = std::max(r.continuity_operator_residual, max_abs(lhs_op - rhs_op));
    r.continuity_equilibrium_residual =
        std::max(r.continuity_equilibrium_residual, std::abs(fm.expect(rhs_op)));
  }
  return r;
}

}  // namespace qfldp
