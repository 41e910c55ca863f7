#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "errors.hpp"
#include "parallel.hpp"
#include "spectral.hpp"

namespace qfldp {

constexpr double kImagResidue = 1e-9;

inline double real_log_checked(cplx z, const char* what) {
  if (std::abs(z.imag()) > kImagResidue * std::max(1.0, std::abs(z.real())))
    throw DataError(std::string(what) + ": logarithm has imaginary residue " + std::to_string(z.imag()));
  return z.real();
}

inline Matrix exp_general(const Matrix& C) {
  double asym = max_abs(C - C.adjoint());
  if (asym <= 1e-12 * (1.0 + max_abs(C))) return hermitian_exp(C);
  return C.exp();
}

// ρ_d(e^{⟨A,CA⟩}) = det(1 + d(e^C − 1))
inline cplx qf_exp_expectation(const Matrix& d, const Matrix& C) {
  const int n = static_cast<int>(d.rows());
  Matrix M = Matrix::Identity(n, n) + d * (exp_general(C) - Matrix::Identity(n, n));
  cplx l = log_det_stable(M);
  bool hermitian_c = max_abs(C - C.adjoint()) <= 1e-12 * (1.0 + max_abs(C));
  if (hermitian_c) return std::exp(real_log_checked(l, "qf_exp_expectation"));
  return std::exp(l);
}

// Precomputed data for repeated evaluation of J(s) and its derivatives on
// one (h_ρ, K, β, volume).
class GeneratingEvaluator {
 public:
  GeneratingEvaluator(const Matrix& h_rho, const Matrix& K, double beta, double volume)
      : beta_(beta), volume_(volume) {
    if (!(volume > 0)) throw ConfigError("volume must be positive");
    if (h_rho.rows() != K.rows()) throw DomainError("h and K dimensions differ");
    hsd_ = eigh(h_rho);
    ksd_ = eigh(K);
    K_ = 0.5 * (K + K.adjoint());
    d_ = fermi_symbol(hsd_, beta);
  }

  const Matrix& symbol() const { return d_; }
  const Matrix& current() const { return K_; }
  double volume() const { return volume_; }

  Matrix expK(double s) const {
    return apply_function(ksd_, [&](double k) { return cplx(std::exp(s * k), 0.0); });
  }

  // (1/V) ln det(1 + d(e^{sK} − 1))
  double J(double s) const {
    if (s == 0.0) return 0.0;
    const int n = static_cast<int>(d_.rows());
    Matrix M = Matrix::Identity(n, n) + d_ * (expK(s) - Matrix::Identity(n, n));
    return real_log_checked(log_det_stable(M), "generating_J") / volume_;
  }

  // (1/V)[ln det(1 + e^{−βh} e^{sK}) − ln det(1 + e^{−βh})], through the
  // Hermitian product e^{−βh/2} e^{sK} e^{−βh/2}
  double J_ratio_form(double s) const {
    Matrix half = apply_function(hsd_, [&](double l) { return cplx(std::exp(-0.5 * beta_ * l), 0.0); });
    Matrix P = half * expK(s) * half;
    auto sd = eigh(0.5 * (P + P.adjoint()));
    double acc = 0.0;
    for (int i = 0; i < sd.eigenvalues.size(); ++i) acc += std::log1p(sd.eigenvalues[i]);
    for (int i = 0; i < hsd_.eigenvalues.size(); ++i) acc -= softplus(-beta_ * hsd_.eigenvalues[i]);
    return acc / volume_;
  }

  // d_s = (1 + e^{−sK/2} e^{βh} e^{−sK/2})^{-1}, written as
  // e^{sK/2} d [d + e^{−sK}(1 − d)]^{-1} e^{−sK/2} so that e^{βh} never appears
  Matrix tilted_symbol(double s) const {
    if (s == 0.0) return d_;
    const int n = static_cast<int>(d_.rows());
    Matrix I = Matrix::Identity(n, n);
    Matrix M = d_ + expK(-s) * (I - d_);
    Matrix T = d_ * M.inverse();
    Matrix ds = expK(0.5 * s) * T * expK(-0.5 * s);
    return 0.5 * (ds + ds.adjoint());
  }

  // (dJ, d²J) = (Tr(K d_s), Tr(K(1 − d_s)K d_s)) / V
  std::pair<double, double> derivatives(double s) const {
    Matrix ds = tilted_symbol(s);
    auto sd = eigh(ds);
    Matrix Kr = sd.vectors.adjoint() * K_ * sd.vectors;
    const int n = static_cast<int>(Kr.rows());
    double first = 0.0, second = 0.0;
    for (int i = 0; i < n; ++i) {
      double pi = std::clamp(sd.eigenvalues[i], 0.0, 1.0);
      first += Kr(i, i).real() * pi;
      for (int j = 0; j < n; ++j) {
        double pj = std::clamp(sd.eigenvalues[j], 0.0, 1.0);
        second += std::norm(Kr(i, j)) * (1.0 - pj) * pi;
      }
    }
    return {first / volume_, second / volume_};
  }

 private:
  double beta_;
  double volume_;
  SpectralDecomposition hsd_;
  SpectralDecomposition ksd_;
  Matrix K_;
  Matrix d_;
};

inline double generating_J(const Matrix& h_rho, const Matrix& K, double beta, double s, double volume) {
  return GeneratingEvaluator(h_rho, K, beta, volume).J(s);
}

inline std::pair<double, double> generating_derivatives(const Matrix& h_rho, const Matrix& K, double beta,
                                                        double s, double volume) {
  return GeneratingEvaluator(h_rho, K, beta, volume).derivatives(s);
}

inline std::vector<double> linear_grid(double lo, double hi, int count) {
  if (count < 2) throw ConfigError("grid needs at least two points");
  if (!(hi > lo)) throw ConfigError("grid bounds out of order");
  std::vector<double> g(count);
  for (int i = 0; i < count; ++i) g[i] = lo + (hi - lo) * double(i) / (count - 1);
  return g;
}

inline std::vector<double> default_s_grid() { return linear_grid(-2.0, 2.0, 41); }

struct GeneratingCurve {
  std::vector<double> s;
  std::vector<double> J;
  std::vector<double> dJ;
  std::vector<double> d2J;
  double volume = 0;

  // index of s = 0 when present
  int zero_index() const {
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] == 0.0) return static_cast<int>(i);
    return -1;
  }
};

inline GeneratingCurve generating_curve(const GeneratingEvaluator& ev, const std::vector<double>& s_grid,
                                        int threads = 1) {
  for (std::size_t i = 1; i < s_grid.size(); ++i)
    if (!(s_grid[i] > s_grid[i - 1])) throw ConfigError("s-grid must be strictly ascending");
  GeneratingCurve c;
  c.s = s_grid;
  c.volume = ev.volume();
  const int m = static_cast<int>(s_grid.size());
  c.J.assign(m, 0.0);
  c.dJ.assign(m, 0.0);
  c.d2J.assign(m, 0.0);
  parallel_for(m, threads, [&](int i) {
    c.J[i] = ev.J(s_grid[i]);
    auto [a, b] = ev.derivatives(s_grid[i]);
    c.dJ[i] = a;
    c.d2J[i] = b;
  });
  return c;
}

struct DistributionEstimate {
  std::vector<double> u;
  std::vector<cplx> phi;
  std::vector<std::pair<double, double>> atoms;  // (value of ⟨A,KA⟩, weight), oracle scale only
};

// φ(u) = ρ_d(e^{iu⟨A,KA⟩}) = det(1 + d(e^{iuK} − 1))
inline DistributionEstimate characteristic_function(const Matrix& d, const Matrix& K, const std::vector<double>& u,
                                                    int threads = 1) {
  auto ksd = eigh(K);
  const int n = static_cast<int>(d.rows());
  DistributionEstimate out;
  out.u = u;
  out.phi.assign(u.size(), cplx(0));
  parallel_for(static_cast<int>(u.size()), threads, [&](int i) {
    Matrix e = apply_function(ksd, [&](double k) { return std::polar(1.0, u[i] * k); });
    Matrix M = Matrix::Identity(n, n) + d * (e - Matrix::Identity(n, n));
    out.phi[i] = std::exp(log_det_stable(M));
  });
  return out;
}

struct RateFunction {
  std::vector<double> x;
  std::vector<double> I;  // +inf outside [x_minus, x_plus]
  double x_E = 0;
  double x_minus = 0;
  double x_plus = 0;
};

namespace detail {

// sup over s in [s0, s1] of (s x − H(s)) for the cubic Hermite interpolant H
// of (s0, J0, D0), (s1, J1, D1)
inline double hermite_segment_sup(double s0, double s1, double J0, double J1, double D0, double D1, double x) {
  double h = s1 - s0;
  auto H = [&](double t) {  // t in [0,1]
    double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * J0 + (t3 - 2 * t2 + t) * h * D0 + (-2 * t3 + 3 * t2) * J1 + (t3 - t2) * h * D1;
  };
  auto value = [&](double t) { return (s0 + t * h) * x - H(t); };
  double best = std::max(value(0.0), value(1.0));
  // H'(t)/h = a t² + b t + c; stationary points solve H'(t)/h = x
  double a = (6 * J0 - 6 * J1) / h + 3 * D0 + 3 * D1;
  double b = (-6 * J0 + 6 * J1) / h - 4 * D0 - 2 * D1;
  double c = D0 - x;
  auto consider = [&](double t) {
    if (t > 0.0 && t < 1.0) best = std::max(best, value(t));
  };
  if (std::abs(a) < 1e-300) {
    if (std::abs(b) > 0) consider(-c / b);
  } else {
    double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      double r = std::sqrt(disc);
      double q = -0.5 * (b + std::copysign(r, b));
      if (q != 0) {
        consider(q / a);
        consider(c / q);
      } else {
        consider(0.0);
      }
    }
  }
  return best;
}

}  // namespace detail

// Legendre-Fenchel conjugate I(x) = sup_s {s x − J(s)} of a sampled convex
// curve. A single sweep over the sorted x-grid advances a pointer through the
// slope intervals [dJ(s_i), dJ(s_{i+1})]; inside an interval the supremum is
// taken over the Hermite interpolant built from J and dJ.
inline RateFunction legendre_rate(const GeneratingCurve& c, std::vector<double> xgrid) {
  const int m = static_cast<int>(c.s.size());
  if (m < 3) throw DataError("curve needs at least three points");
  for (int i = 1; i + 1 < m; ++i) {
    double h0 = c.s[i] - c.s[i - 1], h1 = c.s[i + 1] - c.s[i];
    double second = (c.J[i + 1] - c.J[i]) / h1 - (c.J[i] - c.J[i - 1]) / h0;
    if (second < -1e-9 * std::max(1.0, std::abs(c.J[i]))) throw DataError("generating curve is not convex");
  }
  for (int i = 1; i < m; ++i)
    if (c.dJ[i] < c.dJ[i - 1] - 1e-9) throw DataError("generating curve slopes are not monotone");
  std::sort(xgrid.begin(), xgrid.end());
  RateFunction r;
  r.x = xgrid;
  r.x_minus = c.dJ.front();
  r.x_plus = c.dJ.back();
  int z = c.zero_index();
  r.x_E = z >= 0 ? c.dJ[z] : std::numeric_limits<double>::quiet_NaN();
  r.I.assign(xgrid.size(), std::numeric_limits<double>::infinity());
  int seg = 0;
  for (std::size_t k = 0; k < xgrid.size(); ++k) {
    double x = xgrid[k];
    if (x < r.x_minus || x > r.x_plus) continue;
    while (seg + 1 < m - 1 && c.dJ[seg + 1] < x) ++seg;
    double best = -std::numeric_limits<double>::infinity();
    for (int j = std::max(0, seg - 1); j <= std::min(m - 2, seg + 1); ++j)
      best = std::max(best, detail::hermite_segment_sup(c.s[j], c.s[j + 1], c.J[j], c.J[j + 1], c.dJ[j],
                                                         c.dJ[j + 1], x));
    r.I[k] = std::max(0.0, best);
  }
  return r;
}

// J**(s) = max_x {s x − I(x)} over the finite part of a rate function
inline double legendre_roundtrip(const RateFunction& r, double s) {
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < r.x.size(); ++k)
    if (std::isfinite(r.I[k])) best = std::max(best, s * r.x[k] - r.I[k]);
  return best;
}

struct OpenInterval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

// (1/V) ln m(O) for the observable ⟨A,KA⟩/V from an atomic measure
inline double tail_logprob(const std::vector<std::pair<double, double>>& atoms, const OpenInterval& O,
                           double volume) {
  double mass = 0.0;
  for (const auto& [v, w] : atoms) {
    double x = v / volume;
    if (x > O.lo && x < O.hi) mass += w;
  }
  if (!(mass > 0)) return -std::numeric_limits<double>::infinity();
  return std::log(mass) / volume;
}

// One-sided Chernoff bound inf_s {−s·x₀ + J(s)} over the grid, with x₀ the
// endpoint of O facing x^(E); zero when O contains x^(E).
inline double chernoff_bound(const GeneratingCurve& c, const OpenInterval& O) {
  int z = c.zero_index();
  if (z < 0) throw DataError("curve lacks s = 0");
  double xE = c.dJ[z];
  double best = 0.0;
  if (O.lo >= xE) {
    for (std::size_t i = 0; i < c.s.size(); ++i)
      if (c.s[i] >= 0) best = std::min(best, -c.s[i] * O.lo + c.J[i]);
  } else if (O.hi <= xE) {
    for (std::size_t i = 0; i < c.s.size(); ++i)
      if (c.s[i] <= 0) best = std::min(best, -c.s[i] * O.hi + c.J[i]);
  }
  return best;
}

}  // namespace qfldp
