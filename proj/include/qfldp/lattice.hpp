#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "quadrature.hpp"
#include "rng.hpp"

namespace qfldp {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

constexpr int kMaxDim = 3;
using Coord = std::array<int, kMaxDim>;

inline Coord unit_vector(int dir) {
  Coord e{0, 0, 0};
  e[dir] = 1;
  return e;
}

inline Coord operator+(Coord a, const Coord& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
  return a;
}

inline Coord operator-(Coord a, const Coord& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] -= b[i];
  return a;
}

inline double distance(const Coord& a, const Coord& b) {
  double s = 0;
  for (int i = 0; i < kMaxDim; ++i) s += double(a[i] - b[i]) * double(a[i] - b[i]);
  return std::sqrt(s);
}

// nearest-neighbour pair, site(b) = site(a) + e_dir
struct Edge {
  int a;
  int b;
  int dir;
};

// Rectangular block of Z^d with inclusive bounds lo..hi. Sites are indexed
// lexicographically with the last coordinate running fastest.
class LatticeBox {
 public:
  LatticeBox() = default;

  LatticeBox(int d, Coord lo, Coord hi) : d_(d), lo_(lo), hi_(hi) {
    if (d < 1 || d > kMaxDim) throw ConfigError("dimension must be 1, 2 or 3");
    for (int i = d; i < kMaxDim; ++i) lo_[i] = hi_[i] = 0;
    n_ = 1;
    for (int i = kMaxDim - 1; i >= 0; --i) {
      if (hi_[i] < lo_[i]) throw ConfigError("empty lattice box");
      stride_[i] = n_;
      n_ *= hi_[i] - lo_[i] + 1;
    }
    build_edges();
  }

  static LatticeBox centered(int d, int L) {
    if (L < 0) throw ConfigError("box radius must be non-negative");
    Coord lo{0, 0, 0}, hi{0, 0, 0};
    for (int i = 0; i < d; ++i) {
      lo[i] = -L;
      hi[i] = L;
    }
    return LatticeBox(d, lo, hi);
  }

  // one-dimensional segment {first, ..., first + count - 1}
  static LatticeBox segment(int first, int count) {
    return LatticeBox(1, Coord{first, 0, 0}, Coord{first + count - 1, 0, 0});
  }

  int dim() const { return d_; }
  int size() const { return n_; }
  const Coord& lo() const { return lo_; }
  const Coord& hi() const { return hi_; }

  // radius L when the box is Λ_L, otherwise -1
  int radius() const {
    int L = hi_[0];
    for (int i = 0; i < d_; ++i)
      if (lo_[i] != -L || hi_[i] != L) return -1;
    return L;
  }

  bool contains(const Coord& x) const {
    for (int i = 0; i < kMaxDim; ++i)
      if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
    return true;
  }

  bool contains(const LatticeBox& other) const {
    return other.d_ == d_ && contains(other.lo_) && contains(other.hi_);
  }

  bool intersects(const LatticeBox& other) const {
    for (int i = 0; i < kMaxDim; ++i)
      if (other.hi_[i] < lo_[i] || other.lo_[i] > hi_[i]) return false;
    return true;
  }

  int index(const Coord& x) const {
    if (!contains(x)) throw DomainError("site outside lattice box");
    int k = 0;
    for (int i = 0; i < kMaxDim; ++i) k += (x[i] - lo_[i]) * stride_[i];
    return k;
  }

  Coord site(int k) const {
    Coord x{0, 0, 0};
    for (int i = 0; i < kMaxDim; ++i) {
      x[i] = lo_[i] + k / stride_[i];
      k %= stride_[i];
    }
    return x;
  }

  const std::vector<Edge>& edges() const { return edges_; }

  LatticeBox translated(const Coord& v) const { return LatticeBox(d_, lo_ + v, hi_ + v); }

  bool operator==(const LatticeBox& o) const { return d_ == o.d_ && lo_ == o.lo_ && hi_ == o.hi_; }

 private:
  void build_edges() {
    edges_.clear();
    for (int k = 0; k < n_; ++k) {
      Coord x = site(k);
      for (int j = 0; j < d_; ++j) {
        if (x[j] < hi_[j]) edges_.push_back({k, k + stride_[j], j});
      }
    }
  }

  int d_ = 1;
  Coord lo_{0, 0, 0};
  Coord hi_{0, 0, 0};
  std::array<int, kMaxDim> stride_{1, 1, 1};
  int n_ = 1;
  std::vector<Edge> edges_;
};

using Collection = std::vector<LatticeBox>;

inline int collection_volume(const Collection& z) {
  int v = 0;
  for (const auto& b : z) v += b.size();
  return v;
}

inline void check_collection(const LatticeBox& ambient, const Collection& z) {
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!ambient.contains(z[i])) throw DomainError("collection member outside ambient box");
    for (std::size_t j = 0; j < i; ++j)
      if (z[i].intersects(z[j])) throw DomainError("collection members overlap");
  }
}

// The l-th box decomposition: translates Λ_l + (2l+1)x lying inside parent.
struct BoxDecomposition {
  LatticeBox parent;
  int cell_radius = 1;
  Collection cells;
  std::vector<int> uncovered_sites;                // parent indices
  std::vector<std::vector<Edge>> boundary_edges;   // parent edges, per cell
};

inline BoxDecomposition decompose(const LatticeBox& parent, int l) {
  if (l < 1) throw ConfigError("cell radius must be positive");
  const int d = parent.dim();
  const int w = 2 * l + 1;
  BoxDecomposition out;
  out.parent = parent;
  out.cell_radius = l;
  // range of cell multipliers per axis
  std::array<int, kMaxDim> mlo{0, 0, 0}, mhi{0, 0, 0};
  for (int i = 0; i < d; ++i) {
    mlo[i] = static_cast<int>(std::ceil(double(parent.lo()[i] + l) / w));
    mhi[i] = static_cast<int>(std::floor(double(parent.hi()[i] - l) / w));
    if (mhi[i] < mlo[i]) {
      mlo[i] = 1;
      mhi[i] = 0;
    }
  }
  bool any = true;
  for (int i = 0; i < d; ++i) any = any && mhi[i] >= mlo[i];
  if (any) {
    Coord m = mlo;
    while (true) {
      Coord c{0, 0, 0};
      for (int i = 0; i < d; ++i) c[i] = w * m[i];
      out.cells.push_back(LatticeBox::centered(d, l).translated(c));
      int i = d - 1;
      while (i >= 0 && m[i] == mhi[i]) {
        m[i] = mlo[i];
        --i;
      }
      if (i < 0) break;
      ++m[i];
    }
  }
  std::vector<int> owner(parent.size(), -1);
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    const auto& cell = out.cells[c];
    for (int k = 0; k < cell.size(); ++k) owner[parent.index(cell.site(k))] = static_cast<int>(c);
  }
  for (int k = 0; k < parent.size(); ++k)
    if (owner[k] < 0) out.uncovered_sites.push_back(k);
  out.boundary_edges.resize(out.cells.size());
  for (const auto& e : parent.edges()) {
    int oa = owner[e.a], ob = owner[e.b];
    if (oa == ob) continue;
    if (oa >= 0) out.boundary_edges[oa].push_back(e);
    if (ob >= 0) out.boundary_edges[ob].push_back(e);
  }
  return out;
}

enum class DisorderMode { uniform_iid, circle_phase_iid, zero };

inline DisorderMode parse_disorder_mode(const std::string& tag) {
  if (tag == "uniform-iid") return DisorderMode::uniform_iid;
  if (tag == "circle-phase-iid") return DisorderMode::circle_phase_iid;
  if (tag == "zero") return DisorderMode::zero;
  throw ConfigError("unknown disorder mode '" + tag + "'");
}

inline std::string to_string(DisorderMode m) {
  switch (m) {
    case DisorderMode::uniform_iid: return "uniform-iid";
    case DisorderMode::circle_phase_iid: return "circle-phase-iid";
    case DisorderMode::zero: return "zero";
  }
  return "?";
}

// ω₁ on the sites and ω₂ on the edges of a domain box. ω₂ is stored per
// (lower endpoint, direction).
struct DisorderSample {
  LatticeBox domain;
  std::uint64_t seed = 0;
  DisorderMode mode = DisorderMode::zero;
  std::vector<double> omega1;
  std::vector<cplx> omega2;

  DisorderSample() = default;
  explicit DisorderSample(const LatticeBox& box)
      : domain(box), omega1(box.size(), 0.0), omega2(std::size_t(box.size()) * kMaxDim, cplx(0, 0)) {}

  double w1(const Coord& x) const {
    if (!domain.contains(x)) throw DomainError("disorder missing for site");
    return omega1[domain.index(x)];
  }

  cplx w2(const Coord& x, int dir) const {
    if (!domain.contains(x) || !domain.contains(x + unit_vector(dir)))
      throw DomainError("disorder missing for edge");
    return omega2[std::size_t(domain.index(x)) * kMaxDim + dir];
  }

  void set_w1(const Coord& x, double v) { omega1[domain.index(x)] = v; }
  void set_w2(const Coord& x, int dir, cplx v) {
    omega2[std::size_t(domain.index(x)) * kMaxDim + dir] = v;
  }
};

namespace detail {

inline std::uint64_t coord_word(int v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }

inline double site_potential(std::uint64_t seed, const Coord& x) {
  auto h = hash_words(seed, {1, coord_word(x[0]), coord_word(x[1]), coord_word(x[2])});
  return 2.0 * to_unit(h) - 1.0;
}

inline cplx edge_disc(std::uint64_t seed, const Coord& x, int dir) {
  for (std::uint64_t k = 0;; ++k) {
    auto hu = hash_words(seed, {2, coord_word(x[0]), coord_word(x[1]), coord_word(x[2]),
                                std::uint64_t(dir), 2 * k});
    auto hv = hash_words(seed, {2, coord_word(x[0]), coord_word(x[1]), coord_word(x[2]),
                                std::uint64_t(dir), 2 * k + 1});
    double u = 2.0 * to_unit(hu) - 1.0, v = 2.0 * to_unit(hv) - 1.0;
    if (u * u + v * v <= 1.0) return {u, v};
  }
}

inline cplx edge_circle(std::uint64_t seed, const Coord& x, int dir) {
  auto h = hash_words(seed, {3, coord_word(x[0]), coord_word(x[1]), coord_word(x[2]), std::uint64_t(dir)});
  return std::polar(1.0, 2.0 * M_PI * to_unit(h));
}

}  // namespace detail

// Entries are a function of (seed, coordinate) only, so samples on nested
// boxes agree on their common sites.
inline DisorderSample sample_disorder(const LatticeBox& box, std::uint64_t seed,
                                      DisorderMode mode = DisorderMode::uniform_iid) {
  DisorderSample s(box);
  s.seed = seed;
  s.mode = mode;
  if (mode == DisorderMode::zero) return s;
  for (int k = 0; k < box.size(); ++k) s.omega1[k] = detail::site_potential(seed, box.site(k));
  for (const auto& e : box.edges()) {
    Coord x = box.site(e.a);
    s.omega2[std::size_t(e.a) * kMaxDim + e.dir] = mode == DisorderMode::uniform_iid
                                                       ? detail::edge_disc(seed, x, e.dir)
                                                       : detail::edge_circle(seed, x, e.dir);
  }
  return s;
}

// ω'(y) = ω(y + v) on `target`
inline DisorderSample shift_disorder(const DisorderSample& w, const Coord& v, const LatticeBox& target) {
  if (!w.domain.contains(target.translated(v))) throw DomainError("shift escapes the ambient box");
  DisorderSample out(target);
  out.seed = w.seed;
  out.mode = w.mode;
  for (int k = 0; k < target.size(); ++k) {
    Coord y = target.site(k);
    out.omega1[k] = w.w1(y + v);
  }
  for (const auto& e : target.edges()) {
    Coord y = target.site(e.a);
    out.set_w2(y, e.dir, w.w2(y + v, e.dir));
  }
  return out;
}

inline DisorderSample shift_disorder(const DisorderSample& w, const Coord& v) {
  return shift_disorder(w, v, w.domain.translated(Coord{0, 0, 0} - v));
}

struct ModelParams {
  double lambda = 0.0;
  double theta = 0.0;
  double beta = 1.0;

  void validate() const {
    if (!(lambda >= 0) || !(theta >= 0) || !(beta >= 0))
      throw ConfigError("model parameters must satisfy lambda, theta, beta >= 0");
  }
};

// ⟨e_x, Δ e_{x+e_j}⟩ for the disordered Laplacian
inline cplx hopping(const DisorderSample& w, const ModelParams& p, const Coord& x, int dir) {
  return -(1.0 + p.theta * w.w2(x, dir));
}

// h restricted to `box`, written into rows/columns `offset` of the
// ambient-indexed matrix `out`.
inline void add_box_hamiltonian(Matrix& out, const LatticeBox& ambient, const LatticeBox& box,
                                const DisorderSample& w, const ModelParams& p) {
  const double diag = 2.0 * box.dim();
  for (int k = 0; k < box.size(); ++k) {
    Coord x = box.site(k);
    int i = ambient.index(x);
    out(i, i) += diag + p.lambda * w.w1(x);
  }
  for (const auto& e : box.edges()) {
    Coord x = box.site(e.a);
    int i = ambient.index(x), j = ambient.index(box.site(e.b));
    cplx t = hopping(w, p, x, e.dir);
    out(i, j) += t;
    out(j, i) += std::conj(t);
  }
}

inline Matrix build_hamiltonian(const LatticeBox& box, const DisorderSample& w, const ModelParams& p) {
  Matrix h = Matrix::Zero(box.size(), box.size());
  add_box_hamiltonian(h, box, box, w, p);
  return h;
}

inline Matrix restrict_to_collection(const LatticeBox& ambient, const DisorderSample& w,
                                     const ModelParams& p, const Collection& z) {
  check_collection(ambient, z);
  Matrix h = Matrix::Zero(ambient.size(), ambient.size());
  for (const auto& cell : z) add_box_hamiltonian(h, ambient, cell, w, p);
  return h;
}

// P_Z h P_Z applied to an existing ambient-indexed operator
inline Matrix project_to_collection(const Matrix& h, const LatticeBox& ambient, const Collection& z) {
  check_collection(ambient, z);
  std::vector<int> owner(ambient.size(), -1);
  for (std::size_t c = 0; c < z.size(); ++c)
    for (int k = 0; k < z[c].size(); ++k) owner[ambient.index(z[c].site(k))] = static_cast<int>(c);
  Matrix out = Matrix::Zero(h.rows(), h.cols());
  for (int i = 0; i < h.rows(); ++i)
    for (int j = 0; j < h.cols(); ++j)
      if (owner[i] >= 0 && owner[i] == owner[j]) out(i, j) = h(i, j);
  return out;
}

using Point = std::array<double, kMaxDim>;
using VectorPotential = std::function<Point(double t, const Point& x)>;

// exp(i ∫₀¹ A(t, αy + (1-α)x)·(y - x) dα), 8-point Gauss-Legendre in α
inline cplx peierls_phase(const VectorPotential& A, double t, const Coord& x, const Coord& y) {
  const auto& g = gauss_legendre_8();
  double acc = 0.0;
  for (std::size_t q = 0; q < g.nodes.size(); ++q) {
    double a = 0.5 * (g.nodes[q] + 1.0);
    Point r{};
    for (int i = 0; i < kMaxDim; ++i) r[i] = a * y[i] + (1.0 - a) * x[i];
    Point v = A(t, r);
    double dot = 0.0;
    for (int i = 0; i < kMaxDim; ++i) dot += v[i] * (y[i] - x[i]);
    acc += 0.5 * g.weights[q] * dot;
  }
  return std::polar(1.0, acc);
}

inline Matrix build_magnetic_hamiltonian(const LatticeBox& box, const DisorderSample& w,
                                         const ModelParams& p, const VectorPotential& A, double t) {
  Matrix h = Matrix::Zero(box.size(), box.size());
  const double diag = 2.0 * box.dim();
  for (int k = 0; k < box.size(); ++k) h(k, k) = diag + p.lambda * w.w1(box.site(k));
  for (const auto& e : box.edges()) {
    Coord x = box.site(e.a), y = box.site(e.b);
    cplx v = hopping(w, p, x, e.dir) * peierls_phase(A, t, x, y);
    h(e.a, e.b) = v;
    h(e.b, e.a) = std::conj(v);
  }
  return h;
}

}  // namespace qfldp
