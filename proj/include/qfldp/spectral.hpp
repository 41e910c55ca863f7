#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "lattice.hpp"

namespace qfldp {

constexpr int kDenseCap = 4096;

struct SpectralDecomposition {
  RVector eigenvalues;  // ascending
  Matrix vectors;       // h = U diag(λ) U†
};

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

// Checks ‖h − h†‖_max ≤ 1e-10 (1 + ‖h‖_max) and returns (h + h†)/2.
inline Matrix hermitian_part_checked(const Matrix& h, const char* what = "operator") {
  if (h.rows() != h.cols()) throw DomainError(std::string(what) + " is not square");
  double asym = max_abs(h - h.adjoint());
  if (asym > 1e-10 * (1.0 + max_abs(h)))
    throw DomainError(std::string(what) + " is not Hermitian (asymmetry " + std::to_string(asym) + ")");
  return 0.5 * (h + h.adjoint());
}

inline SpectralDecomposition eigh(const Matrix& h) {
  if (h.rows() > kDenseCap) throw ResourceError("matrix dimension exceeds dense cap");
  Matrix hs = hermitian_part_checked(h);
  Eigen::SelfAdjointEigenSolver<Matrix> es(hs);
  if (es.info() != Eigen::Success) throw SingularityError("eigendecomposition failed", 0.0);
  return {es.eigenvalues(), es.eigenvectors()};
}

template <class F>
Matrix apply_function(const SpectralDecomposition& sd, F&& f) {
  const auto& U = sd.vectors;
  const int n = static_cast<int>(sd.eigenvalues.size());
  CVector v(n);
  for (int i = 0; i < n; ++i) v[i] = f(sd.eigenvalues[i]);
  return U * v.asDiagonal() * U.adjoint();
}

// 1/(1 + e^x) without overflow
inline double logistic(double x) {
  if (x > 0) {
    double e = std::exp(-x);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(x));
}

// ln(1 + e^x) without overflow
inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline Matrix fermi_symbol(const SpectralDecomposition& sd, double beta) {
  return apply_function(sd, [&](double l) { return cplx(logistic(beta * l), 0.0); });
}

inline Matrix fermi_symbol(const Matrix& h, double beta) { return fermi_symbol(eigh(h), beta); }

inline Matrix propagator(const SpectralDecomposition& sd, double t) {
  return apply_function(sd, [&](double l) { return std::polar(1.0, t * l); });
}

// e^{ith}
inline Matrix propagator(const Matrix& h, double t) { return propagator(eigh(h), t); }

inline Matrix hermitian_exp(const Matrix& h) {
  return apply_function(eigh(h), [](double l) { return cplx(std::exp(l), 0.0); });
}

inline Matrix hermitian_log(const Matrix& h) {
  auto sd = eigh(h);
  if (sd.eigenvalues.size() > 0 && sd.eigenvalues[0] <= 0)
    throw DomainError("logarithm of a non-positive operator");
  return apply_function(sd, [](double l) { return cplx(std::log(l), 0.0); });
}

inline double schur_norm_bound(const Matrix& c) {
  if (c.size() == 0) return 0.0;
  return c.cwiseAbs().rowwise().sum().maxCoeff();
}

inline double spectral_norm(const Matrix& c) {
  if (c.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(c);
  return svd.singularValues()[0];
}

// ln det M from a partially pivoted LU factorization
inline cplx log_det_stable(const Matrix& m) {
  if (m.rows() != m.cols()) throw DomainError("log_det_stable needs a square matrix");
  if (m.rows() == 0) return 0.0;
  Eigen::PartialPivLU<Matrix> lu(m);
  const Matrix& f = lu.matrixLU();
  double logabs = 0.0, phase = 0.0, smallest = std::numeric_limits<double>::infinity();
  for (int i = 0; i < f.rows(); ++i) {
    double a = std::abs(f(i, i));
    smallest = std::min(smallest, a);
    if (!(a > 1e-300)) throw SingularityError("matrix singular to working precision", a);
    logabs += std::log(a);
    phase += std::arg(f(i, i));
  }
  if (lu.permutationP().determinant() < 0) phase += M_PI;
  phase = std::remainder(phase, 2.0 * M_PI);
  return {logabs, phase};
}

struct CTConstants {
  double mu = 0;
  double eta = 0;
  double S0 = 0;
  double S = 0;
  double mu_eta = 0;
};

// sup_x Σ_y w(|x−y|) |h_xy|
template <class W>
double weighted_row_sum(const Matrix& h, const LatticeBox& box, W&& weight) {
  double best = 0.0;
  for (int i = 0; i < h.rows(); ++i) {
    Coord x = box.site(i);
    double acc = 0.0;
    for (int j = 0; j < h.cols(); ++j) {
      double a = std::abs(h(i, j));
      if (a == 0.0) continue;
      acc += weight(distance(x, box.site(j))) * a;
    }
    best = std::max(best, acc);
  }
  return best;
}

inline double ct_S0(const Matrix& h, const LatticeBox& box, double mu) {
  return weighted_row_sum(h, box, [&](double r) { return std::exp(mu * r); });
}

inline double ct_S(const Matrix& h, const LatticeBox& box, double mu) {
  return weighted_row_sum(h, box, [&](double r) { return std::expm1(mu * r); });
}

inline double ct_mu_eta(double mu, double eta, int d, double theta) {
  return mu * std::min(0.5, eta / (8.0 * d * (1.0 + theta) * std::exp(mu)));
}

inline CTConstants ct_constants(const Matrix& h, const LatticeBox& box, double mu, double eta,
                                const ModelParams& p) {
  CTConstants c;
  c.mu = mu;
  c.eta = eta;
  c.S0 = ct_S0(h, box, mu);
  c.S = ct_S(h, box, mu);
  c.mu_eta = ct_mu_eta(mu, eta, box.dim(), p.theta);
  return c;
}

// Absolute resolution of entries of a matrix function computed through an
// eigendecomposition; far-off-diagonal bounds below it cannot be resolved.
inline double entry_roundoff(const Matrix& m) {
  return 64.0 * double(m.rows()) * std::numeric_limits<double>::epsilon() * max_abs(m);
}

// Largest ratio |⟨e_x, e^{ith} e_y⟩| / (36 e^{|tη| − 2μ_η|x−y|} + roundoff); ≤ 1 means the bound holds.
inline double ct_propagator_ratio(const Matrix& h, const LatticeBox& box, double t, double eta, double mu,
                                  const ModelParams& p) {
  Matrix U = propagator(h, t);
  double me = ct_mu_eta(mu, eta, box.dim(), p.theta);
  double floor = entry_roundoff(U);
  double worst = 0.0;
  for (int i = 0; i < U.rows(); ++i)
    for (int j = 0; j < U.cols(); ++j) {
      double r = distance(box.site(i), box.site(j));
      double bound = 36.0 * std::exp(std::abs(t * eta) - 2.0 * me * r) + floor;
      worst = std::max(worst, std::abs(U(i, j)) / bound);
    }
  return worst;
}

// Largest ratio of |(z − h)^{-1}_xy| to e^{−μ|x−y|}/(Δ(h,z) − S(h,μ)) + roundoff; negative when Δ ≤ S.
inline double ct_resolvent_ratio(const Matrix& h, const LatticeBox& box, cplx z, double mu) {
  auto sd = eigh(h);
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < sd.eigenvalues.size(); ++i) gap = std::min(gap, std::abs(z - sd.eigenvalues[i]));
  double S = ct_S(h, box, mu);
  if (!(gap > S)) return -1.0;
  Matrix G = apply_function(sd, [&](double l) { return 1.0 / (z - l); });
  double floor = entry_roundoff(G);
  double worst = 0.0;
  for (int i = 0; i < G.rows(); ++i)
    for (int j = 0; j < G.cols(); ++j) {
      double r = distance(box.site(i), box.site(j));
      worst = std::max(worst, std::abs(G(i, j)) / (std::exp(-mu * r) / (gap - S) + floor));
    }
  return worst;
}

// (1 + e^{h2} e^{h1} e^{h2})^{-1}, evaluated through the Hermitian positive
// middle product
inline Matrix two_symbol(const Matrix& h1, const Matrix& h2) {
  Matrix e2 = hermitian_exp(h2);
  Matrix g = e2 * hermitian_exp(h1) * e2;
  return apply_function(eigh(0.5 * (g + g.adjoint())), [](double l) { return cplx(1.0 / (1.0 + l), 0.0); });
}

// Largest ratio against 2 exp(−(μ/2) e^{−S0(h1,μ) − 2 S0(h2,μ)} |x − y|) + roundoff,
// minimized over the supplied μ values.
inline double ct_two_symbol_ratio(const Matrix& h1, const Matrix& h2, const LatticeBox& box,
                                  const std::vector<double>& mus) {
  Matrix M = two_symbol(h1, h2);
  std::vector<double> rate;
  for (double mu : mus) rate.push_back(0.5 * mu * std::exp(-ct_S0(h1, box, mu) - 2.0 * ct_S0(h2, box, mu)));
  double floor = entry_roundoff(M);
  double worst = 0.0;
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j) {
      double r = distance(box.site(i), box.site(j));
      double bound = std::numeric_limits<double>::infinity();
      for (double c : rate) bound = std::min(bound, 2.0 * std::exp(-c * r));
      bound += floor;
      worst = std::max(worst, std::abs(M(i, j)) / bound);
    }
  return worst;
}

}  // namespace qfldp
