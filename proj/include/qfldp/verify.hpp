#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "currents.hpp"
#include "fock.hpp"
#include "quasifree.hpp"
#include "response.hpp"
#include "rng.hpp"

namespace qfldp {

struct CheckResult {
  std::string name;
  bool passed = false;
  double metric = 0;     // worst observed value of the checked quantity
  double threshold = 0;
  std::string detail;
};

// A random tiny system: n ∈ [nmin, nmax] sites, d ∈ {1, 2}, iid disorder,
// random β ∈ {0.5, 1, 2} and a random field profile.
struct OracleInstance {
  LatticeBox box;
  DisorderSample w;
  ModelParams p;
  FieldProfile f;
  Matrix h;
  Matrix K;
};

inline OracleInstance random_oracle_instance(std::uint64_t seed, int nmin = 2, int nmax = 8) {
  Rng r(seed);
  OracleInstance I;
  int n = r.integer(nmin, nmax);
  if (n >= 4 && n % 2 == 0 && r.uniform() < 0.5)
    I.box = LatticeBox(2, Coord{0, 0, 0}, Coord{1, n / 2 - 1, 0});
  else
    I.box = LatticeBox::segment(-(n / 2), n);
  const int d = I.box.dim();
  I.w = sample_disorder(I.box, r.next());
  const double betas[] = {0.5, 1.0, 2.0};
  I.p = {r.uniform(0.0, 2.0), r.uniform(0.0, 1.0), betas[r.integer(0, 2)]};
  const char* shapes[] = {"smooth-bump", "half-sine", "square-ramp"};
  I.f = field_profile(shapes[r.integer(0, 2)], r.uniform(0.5, 2.0), d, r.uniform(0.3, 1.2));
  if (d == 2) {
    double a = r.uniform(0.0, 2.0 * M_PI), b = r.uniform(0.0, 2.0 * M_PI);
    I.f.polarization = {std::cos(a), std::sin(a), 0.0};
    I.f.direction = {std::cos(b), std::sin(b), 0.0};
  }
  I.h = build_hamiltonian(I.box, I.w, I.p);
  I.K = assemble_K(I.box, I.w, I.p, I.f).K;
  return I;
}

namespace detail {

inline double rel_err(cplx a, cplx b, double floor) { return std::abs(a - b) / std::max(std::abs(b), floor); }

// bond operators read off the one-particle matrix: Im and Re of
// h_{x+e_k,x} |x+e_k⟩⟨x| summed over the k-bonds of the box
inline std::pair<Matrix, Matrix> bond_operators(const Matrix& h, const LatticeBox& box, int k) {
  const int n = box.size();
  Matrix G = Matrix::Zero(n, n), R = Matrix::Zero(n, n);
  for (const auto& e : box.edges()) {
    if (e.dir != k) continue;
    cplx v = h(e.b, e.a);
    G(e.b, e.a) += v / cplx(0, 2);
    G(e.a, e.b) -= std::conj(v) / cplx(0, 2);
    R(e.b, e.a) += 0.5 * v;
    R(e.a, e.b) += 0.5 * std::conj(v);
  }
  return {G, R};
}

// Σ_k w_k Σ_bonds −2 Im(H_{y,x} a*_y a_x) as a one-particle matrix
inline Matrix current_matrix(const Matrix& H, const LatticeBox& box, const FieldProfile& f) {
  const int n = box.size();
  Matrix M = Matrix::Zero(n, n);
  for (const auto& e : box.edges()) {
    double wk = f.direction[e.dir];
    if (wk == 0.0) continue;
    cplx v = H(e.b, e.a);
    M(e.b, e.a) += cplx(0, 1) * wk * v;
    M(e.a, e.b) += cplx(0, -1) * wk * std::conj(v);
  }
  return M;
}

}  // namespace detail

// Conductivity ϱ(C(t))_{kq} through many-body Kubo integrals
inline RMatrix fock_conductivity(const FockModel& fm, const Matrix& h, const LatticeBox& box, double t) {
  const int d = box.dim();
  const double V = box.size();
  std::vector<Matrix> G(d), R(d);
  for (int k = 0; k < d; ++k) std::tie(G[k], R[k]) = detail::bond_operators(h, box, k);
  RMatrix C = RMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k)
    for (int q = 0; q < d; ++q) {
      C(k, q) = 4.0 * fm.kubo_integral(fm.bilinear(G[q]), fm.bilinear(G[k]), t) / V;
      if (k == q) C(k, q) += 2.0 * kDiamagneticSign * fm.expect(fm.bilinear(R[k])).real() / V;
    }
  return C;
}

// Full current density at the last time of `times` by many-body midpoint
// steps on the same time grid as the one-particle evolution. Everything
// conserves particle number, so the state is propagated sector by sector.
inline double fock_full_current(const DrivenSystem& sys, const std::vector<double>& times) {
  FockModel fm(sys.equilibrium_hamiltonian(), sys.params.beta);
  auto sectors = number_sectors(fm.modes());
  std::vector<Matrix> W;
  for (const auto& idx : sectors) W.push_back(sector_block(fm.density(), idx));
  for (std::size_t i = 0; i + 1 < times.size(); ++i) {
    double dt = times[i + 1] - times[i];
    Matrix H = fm.bilinear(sys.hamiltonian(0.5 * (times[i] + times[i + 1])));
    for (std::size_t k = 0; k < sectors.size(); ++k) {
      Matrix V = apply_function(eigh(sector_block(H, sectors[k])), [&](double l) { return std::polar(1.0, -dt * l); });
      W[k] = V * W[k] * V.adjoint();
    }
  }
  Matrix Mt = fm.bilinear(detail::current_matrix(sys.hamiltonian(times.back()), sys.box, sys.field));
  Matrix Me = detail::current_matrix(sys.equilibrium_hamiltonian(), sys.box, sys.field);
  double now = 0;
  for (std::size_t k = 0; k < sectors.size(); ++k) now += (sector_block(Mt, sectors[k]) * W[k]).trace().real();
  double eq = fm.expect(fm.bilinear(Me)).real();
  return (now - eq) / sys.box.size();
}

struct OracleErrors {
  double exp_expectation = 0, generating = 0, derivatives = 0, characteristic = 0, conductivity = 0,
         full_current = 0;
  double worst() const {
    return std::max({exp_expectation, generating, derivatives, characteristic, conductivity, full_current});
  }
};

// Quasi-free routines against the Fock-space oracle. Errors are relative with
// a floor of 1e-6 on the reference magnitude.
inline OracleErrors oracle_errors(const OracleInstance& I, double evolve_dt = 0.05) {
  constexpr double floor = 1e-6;
  OracleErrors e;
  const int n = I.box.size();
  const double V = n;
  FockModel fm(I.h, I.p.beta);
  Matrix d = fermi_symbol(I.h, I.p.beta);

  Rng r(I.w.seed ^ 0x5eedULL);
  Matrix C(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) C(i, j) = cplx(r.uniform(-0.5, 0.5), r.uniform(-0.5, 0.5));
  for (const Matrix& X : {C, Matrix(0.7 * I.K)})
    e.exp_expectation = std::max(e.exp_expectation, detail::rel_err(qf_exp_expectation(d, X), fm.exp_expectation(X), floor));

  GeneratingEvaluator ev(I.h, I.K, I.p.beta, V);
  for (double s : {-1.3, -0.4, 0.6, 1.5}) {
    e.generating = std::max(e.generating, detail::rel_err(ev.J(s), fm.generating(I.K, s, V), floor));
    auto [a, b] = ev.derivatives(s);
    auto [fa, fb] = fm.generating_derivatives(I.K, s, V);
    e.derivatives = std::max({e.derivatives, detail::rel_err(a, fa, floor), detail::rel_err(b, fb, floor)});
  }

  std::vector<double> u{-2.0, -0.5, 0.3, 1.1, 3.0};
  auto ch = characteristic_function(d, I.K, u);
  for (std::size_t i = 0; i < u.size(); ++i)
    e.characteristic = std::max(e.characteristic, detail::rel_err(ch.phi[i], fm.characteristic(I.K, u[i]), floor));

  for (double t : {-0.7, 0.5, 1.6}) {
    auto qc = conductivity_expectation(I.box, I.w, I.p, t);
    RMatrix fc = fock_conductivity(fm, I.h, I.box, t);
    for (int k = 0; k < fc.rows(); ++k)
      for (int q = 0; q < fc.cols(); ++q)
        e.conductivity = std::max(e.conductivity, detail::rel_err(qc.C(k, q), fc(k, q), floor));
  }

  // window wider than the box: the vector potential is uniform on every bond
  DrivenSystem sys(I.box, I.w, I.p, I.f, 0.5, n + 2);
  EvolutionOptions opt;
  opt.dt = evolve_dt;
  double t_end = I.f.support_hi();
  auto evs = liouville_evolve(sys, t_end, opt);
  double qf = full_current_density(sys, evs.symbols.back(), evs.times.back(), evs.symbols.front());
  e.full_current = detail::rel_err(qf, fock_full_current(sys, evs.times), floor);
  return e;
}

inline CheckResult oracle_equivalence(int instances, std::uint64_t seed, double tol = 1e-9) {
  CheckResult c{"oracle equivalence", true, 0, tol, ""};
  OracleErrors worst;
  for (int i = 0; i < instances; ++i) {
    auto e = oracle_errors(random_oracle_instance(sample_seed(seed, i)));
    worst.exp_expectation = std::max(worst.exp_expectation, e.exp_expectation);
    worst.generating = std::max(worst.generating, e.generating);
    worst.derivatives = std::max(worst.derivatives, e.derivatives);
    worst.characteristic = std::max(worst.characteristic, e.characteristic);
    worst.conductivity = std::max(worst.conductivity, e.conductivity);
    worst.full_current = std::max(worst.full_current, e.full_current);
  }
  c.metric = worst.worst();
  c.passed = c.metric <= tol;
  c.detail = "instances=" + std::to_string(instances) + " exp=" + sci(worst.exp_expectation) +
             " J=" + sci(worst.generating) + " dJ=" + sci(worst.derivatives) + " phi=" + sci(worst.characteristic) +
             " sigma=" + sci(worst.conductivity) + " current=" + sci(worst.full_current);
  return c;
}

inline CheckResult car_exactness(int nmax, std::uint64_t seed, double tol = 1e-12) {
  CheckResult c{"CAR exactness", true, 0, tol, ""};
  bool exact = true;
  double norm_excess = 0;
  Rng r(seed);
  for (int n = 1; n <= nmax; ++n) {
    auto g = build_car_generators(n);
    const int dim = 1 << n;
    Matrix I = Matrix::Identity(dim, dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Matrix ac = g.a[i] * g.a[j].adjoint() + g.a[j].adjoint() * g.a[i];
        Matrix aa = g.a[i] * g.a[j] + g.a[j] * g.a[i];
        Matrix want = i == j ? I : Matrix::Zero(dim, dim);
        if (ac != want || aa != Matrix::Zero(dim, dim)) exact = false;
      }
    for (int rep = 0; rep < 5; ++rep) {
      CVector psi(n);
      for (int i = 0; i < n; ++i) psi[i] = cplx(r.uniform(-1, 1), r.uniform(-1, 1));
      double op = spectral_norm(annihilation(psi, g).matrix);
      norm_excess = std::max(norm_excess, op - psi.norm());
    }
  }
  c.metric = norm_excess;
  c.passed = exact && norm_excess <= tol;
  c.detail = std::string("anticommutators ") + (exact ? "exact" : "NOT exact") + ", max(|a(psi)| - |psi|)=" +
             sci(norm_excess) + ", n<=" + std::to_string(nmax);
  return c;
}

inline CheckResult ct_suite(int draws, int resolvent_draws, int symbol_draws, std::uint64_t seed) {
  CheckResult c{"Combes-Thomas suite", true, 0, 1.0, ""};
  Rng r(seed);
  const double grid[] = {0.25, 0.5, 1.0, 2.0};
  auto system = [&](int Lmax2) {
    int d = r.integer(1, 2);
    int L = d == 1 ? r.integer(1, 12) : r.integer(1, Lmax2);
    auto box = LatticeBox::centered(d, L);
    ModelParams p{r.uniform(0.0, 2.0), r.uniform(0.0, 1.0), 1.0};
    auto w = sample_disorder(box, r.next());
    return std::make_tuple(box, p, build_hamiltonian(box, w, p));
  };
  int v1 = 0, v2 = 0, v3 = 0, skipped = 0;
  double worst = 0;
  for (int i = 0; i < draws; ++i) {
    auto [box, p, h] = system(6);
    double t = r.uniform(-5.0, 5.0), eta = grid[r.integer(0, 3)], mu = grid[r.integer(0, 3)];
    double q = ct_propagator_ratio(h, box, t, eta, mu, p);
    worst = std::max(worst, q);
    if (q > 1.0) ++v1;
  }
  for (int i = 0; i < resolvent_draws; ++i) {
    auto [box, p, h] = system(6);
    double mu = grid[r.integer(0, 3)];
    double S = ct_S(h, box, mu);
    cplx z(r.uniform(-2.0, 6.0 + p.lambda), (r.uniform() < 0.5 ? -1.0 : 1.0) * (S * (1.0 + r.uniform()) + 0.1));
    double q = ct_resolvent_ratio(h, box, z, mu);
    if (q < 0) {
      ++skipped;
      continue;
    }
    worst = std::max(worst, q);
    if (q > 1.0) ++v2;
  }
  for (int i = 0; i < symbol_draws; ++i) {
    auto [box, p, h] = system(5);
    auto w2 = sample_disorder(box, r.next());
    Matrix h2 = build_hamiltonian(box, w2, p);
    const double betas[] = {0.5, 1.0, 2.0};
    double beta = betas[r.integer(0, 2)], s = r.uniform(-1.0, 1.0);
    double q = ct_two_symbol_ratio(-beta * h, 0.5 * s * h2, box, {0.1, 0.25, 0.5, 1.0});
    worst = std::max(worst, q);
    if (q > 1.0) ++v3;
  }
  c.metric = worst;
  c.passed = v1 + v2 + v3 == 0 && skipped == 0;
  c.detail = "violations propagator=" + std::to_string(v1) + "/" + std::to_string(draws) +
             " resolvent=" + std::to_string(v2) + "/" + std::to_string(resolvent_draws) +
             " two-symbol=" + std::to_string(v3) + "/" + std::to_string(symbol_draws) +
             " worst ratio=" + sci(worst);
  return c;
}

inline CheckResult bogoliubov_suite(int instances, std::uint64_t seed, double d_tol = 1e-10) {
  CheckResult c{"Bogoliubov inequalities", true, 0, d_tol, ""};
  double viol = 0, D = 0, resid = 0;
  for (int i = 0; i < instances; ++i) {
    auto I = random_oracle_instance(sample_seed(seed, i));
    Rng r(sample_seed(seed, i) + 17);
    auto rep = verify_identities_suite(I.h, I.K, I.p.beta, r.uniform(-1.5, 1.5));
    double scale = std::max(1.0, rep.bogoliubov_i_rhs);
    viol = std::max({viol, rep.bogoliubov_i_violation / scale, rep.bogoliubov_ii_violation / scale});
    D = std::max(D, std::abs(rep.lemma_cool_D));
    resid = std::max(resid, rep.lemma_cool_residual);
  }
  c.metric = D;
  c.passed = viol <= 1e-12 && D <= d_tol && resid <= d_tol;
  c.detail = "max violation=" + sci(viol) + " max|D|=" + sci(D) + " operator residual=" + sci(resid);
  return c;
}

struct ConvexityStats {
  double min_second_difference = INFINITY;
  double max_slope_error = 0;
  double min_d2J = INFINITY;
};

// second differences of J on the grid, formula dJ against central differences
// of J with step hstep, and the sign of formula d²J
inline ConvexityStats convexity_stats(const GeneratingEvaluator& ev, const GeneratingCurve& c, double hstep = 1e-4) {
  ConvexityStats st;
  for (std::size_t i = 1; i + 1 < c.s.size(); ++i) {
    double h0 = c.s[i] - c.s[i - 1], h1 = c.s[i + 1] - c.s[i];
    double sd = (c.J[i + 1] - c.J[i]) / h1 - (c.J[i] - c.J[i - 1]) / h0;
    st.min_second_difference = std::min(st.min_second_difference, sd);
  }
  for (std::size_t i = 0; i < c.s.size(); ++i) {
    double s = c.s[i];
    double fd = (ev.J(s + hstep) - ev.J(s - hstep)) / (2 * hstep);
    st.max_slope_error = std::max(st.max_slope_error, std::abs(fd - c.dJ[i]));
    st.min_d2J = std::min(st.min_d2J, c.d2J[i]);
  }
  return st;
}

struct RateStats {
  double I_at_xE = 0;
  double min_I_one_step = 0;
  double min_second_difference = 0;
  double roundtrip_error = 0;
};

// rate function on a grid through x^(E) with spacing dx, round trip tested on
// the interior grid points of the curve
inline RateStats rate_stats(const GeneratingCurve& c, double dx) {
  int z = c.zero_index();
  if (z < 0) throw DataError("curve lacks s = 0");
  double xE = c.dJ[z];
  std::vector<double> xs;
  int lo = static_cast<int>(std::floor((c.dJ.front() - xE) / dx)), hi = static_cast<int>(std::ceil((c.dJ.back() - xE) / dx));
  for (int k = lo; k <= hi; ++k) xs.push_back(xE + k * dx);
  auto rf = legendre_rate(c, xs);
  RateStats st;
  int k0 = -lo;
  st.I_at_xE = rf.I[k0];
  st.min_I_one_step = std::min(rf.I[k0 - 1], rf.I[k0 + 1]);
  st.min_second_difference = INFINITY;
  for (std::size_t k = 1; k + 1 < rf.I.size(); ++k)
    if (std::isfinite(rf.I[k - 1]) && std::isfinite(rf.I[k + 1]))
      st.min_second_difference = std::min(st.min_second_difference, rf.I[k + 1] - 2 * rf.I[k] + rf.I[k - 1]);
  for (std::size_t i = 1; i + 1 < c.s.size(); ++i)
    st.roundtrip_error = std::max(st.roundtrip_error, std::abs(legendre_roundtrip(rf, c.s[i]) - c.J[i]));
  return st;
}

struct SuppressionPoint {
  int sites = 0;
  double x_E = 0;
  double log_mass = 0;  // (1/|Λ|) ln m(O)
  double chernoff = 0;
};

// m(O) on segments of n sites with common disorder, from the exact atomic
// distribution of ⟨A,KA⟩/|Λ|
inline std::vector<SuppressionPoint> suppression_series(const std::vector<int>& sizes, std::uint64_t seed,
                                                        const ModelParams& p, const FieldProfile& f,
                                                        const OpenInterval& O, const std::vector<double>& s_grid) {
  std::vector<SuppressionPoint> out;
  for (int n : sizes) {
    auto box = LatticeBox::segment(-(n / 2), n);
    auto w = sample_disorder(box, seed);
    Matrix h = build_hamiltonian(box, w, p);
    Matrix K = assemble_K(box, w, p, f).K;
    FockModel fm(h, p.beta);
    GeneratingEvaluator ev(h, K, p.beta, n);
    auto c = generating_curve(ev, s_grid);
    SuppressionPoint pt;
    pt.sites = n;
    pt.x_E = c.dJ[c.zero_index()];
    pt.log_mass = tail_logprob(fm.atomic_measure(K), O, n);
    pt.chernoff = chernoff_bound(c, O);
    out.push_back(pt);
  }
  return out;
}


struct ContinuityStats {
  double equilibrium = 0;
  std::vector<double> dts;
  std::vector<double> residuals;
  std::vector<double> orders;  // log2 of successive residual ratios
};

// continuity residual at (about) time t for the undriven system and for the
// driven one under successive halving of dt
inline ContinuityStats continuity_stats(const LatticeBox& box, const DisorderSample& w, const ModelParams& p,
                                        const FieldProfile& f, double eta, double t, double dt0, int halvings) {
  ContinuityStats st;
  EvolutionOptions opt;
  opt.dt = dt0;
  DrivenSystem rest(box, w, p, f, 0.0);
  // snap t onto the coarsest grid, which every halved grid contains
  const double t0 = rest.start_time();
  t = t0 + dt0 * std::round((t - t0) / dt0);
  if (!(t > t0)) throw DomainError("continuity check time precedes the evolution");
  st.equilibrium = continuity_residual_max(rest, liouville_evolve(rest, t + dt0, opt), t);
  DrivenSystem sys(box, w, p, f, eta);
  for (int k = 0; k <= halvings; ++k) {
    opt.dt = dt0 / double(1 << k);
    st.dts.push_back(opt.dt);
    st.residuals.push_back(continuity_residual_max(sys, liouville_evolve(sys, t + opt.dt, opt), t));
    if (k > 0) st.orders.push_back(std::log2(st.residuals[k - 1] / st.residuals[k]));
  }
  return st;
}

}  // namespace qfldp
