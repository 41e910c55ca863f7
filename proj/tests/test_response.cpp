#include <gtest/gtest.h>

#include <cmath>

#include <qfldp/quasifree.hpp>
#include <qfldp/response.hpp>
#include <qfldp/verify.hpp>

using namespace qfldp;

namespace {

const ModelParams kP{1.0, 0.5, 1.0};

struct Fixture {
  LatticeBox box;
  DisorderSample w;
  FieldProfile f;
};

Fixture fixture(int L, std::uint64_t seed) {
  Fixture fx{LatticeBox::centered(1, L), DisorderSample(LatticeBox::centered(1, L)), field_profile("smooth-bump", 2.0)};
  fx.w = sample_disorder(fx.box, seed);
  return fx;
}

double current_at_zero(const Fixture& fx, double eta, double dt) {
  DrivenSystem sys(fx.box, fx.w, kP, fx.f, eta);
  EvolutionOptions o;
  o.dt = dt;
  auto ev = liouville_evolve(sys, 0.0, o);
  return full_current_density(sys, ev, 0.0);
}

}  // namespace

TEST(Evolution, NoFieldIsStationary) {
  auto fx = fixture(6, 1);
  DrivenSystem sys(fx.box, fx.w, kP, fx.f, 0.0);
  auto ev = liouville_evolve(sys, 0.5);
  for (const auto& d : ev.symbols) EXPECT_LE(max_abs(d - ev.symbols.front()), 1e-12);
  EXPECT_LE(std::abs(full_current_density(sys, ev, 0.5)), 1e-13);
}

TEST(Evolution, IsospectralAndTraceConserving) {
  auto fx = fixture(6, 2);
  DrivenSystem sys(fx.box, fx.w, kP, fx.f, 1.0);
  auto ev = liouville_evolve(sys, 0.0);
  auto e0 = eigh(ev.symbols.front()).eigenvalues;
  for (std::size_t i = 0; i < ev.symbols.size(); i += 25) {
    EXPECT_LE(max_abs(ev.symbols[i] - ev.symbols[i].adjoint()), 1e-13);
    EXPECT_LE((eigh(ev.symbols[i]).eigenvalues - e0).cwiseAbs().maxCoeff(), 1e-11);
    EXPECT_NEAR(ev.symbols[i].trace().real(), ev.symbols.front().trace().real(), 1e-11);
  }
  EXPECT_GT(max_abs(ev.symbols.back() - ev.symbols.front()), 1e-3);
}

TEST(Evolution, SecondOrderInTheStep) {
  auto fx = fixture(4, 3);
  DrivenSystem sys(fx.box, fx.w, kP, fx.f, 1.0);
  std::vector<Matrix> ends;
  for (double dt : {0.04, 0.02, 0.01, 0.005}) {
    EvolutionOptions o;
    o.dt = dt;
    ends.push_back(liouville_evolve(sys, 0.0, o).symbols.back());
  }
  for (int k = 0; k + 2 < 4; ++k) {
    double order = std::log2(max_abs(ends[k] - ends[k + 1]) / max_abs(ends[k + 1] - ends[k + 2]));
    EXPECT_NEAR(order, 2.0, 0.15);
  }
  EvolutionOptions strict;
  strict.dt = 0.04;
  strict.halving_check = true;
  strict.halving_tolerance = 1e-12;
  EXPECT_THROW(liouville_evolve(sys, 0.0, strict), AccuracyError);
  EXPECT_THROW(liouville_evolve(sys, sys.start_time() - 1.0), DomainError);
}

TEST(FullCurrent, VanishesBeforeTheField) {
  auto fx = fixture(5, 4);
  DrivenSystem sys(fx.box, fx.w, kP, fx.f, 1.0);
  double t = fx.f.support_lo();
  auto ev = liouville_evolve(sys, t, {0.01});
  EXPECT_LE(std::abs(full_current_density(sys, ev, t)), 1e-13);
}

TEST(FullCurrent, FockOracleOnFourSites) {
  auto box = LatticeBox::segment(-2, 4);
  auto w = sample_disorder(box, 5);
  DrivenSystem sys(box, w, kP, field_profile("smooth-bump", 2.0), 0.8, 2);
  auto ev = liouville_evolve(sys, 0.5, {0.01});
  double qf = full_current_density(sys, ev, 0.5);
  double ex = fock_full_current(sys, ev.times);
  EXPECT_GT(std::abs(ex), 1e-4);
  EXPECT_LE(std::abs(qf - ex) / std::abs(ex), 1e-9);
}

TEST(FullCurrent, OddUnderDirectionReversal) {
  auto fx = fixture(5, 6);
  DrivenSystem sys(fx.box, fx.w, kP, fx.f, 0.5);
  auto flipped = fx.f;
  flipped.direction[0] = -1.0;
  DrivenSystem rev(fx.box, fx.w, kP, flipped, 0.5);
  auto ev = liouville_evolve(sys, 0.0);
  EXPECT_EQ(full_current_density(rev, ev, 0.0), -full_current_density(sys, ev, 0.0));
  ConductivityKernel ck(fx.box, fx.w, kP, fx.box);
  EXPECT_NEAR(linear_response_current(ck, flipped, 0.0).value, -linear_response_current(ck, fx.f, 0.0).value, 1e-14);
}

TEST(LinearResponse, ZeroFieldAndEarlyTimes) {
  auto fx = fixture(4, 7);
  ConductivityKernel ck(fx.box, fx.w, kP, fx.box);
  EXPECT_EQ(linear_response_current(ck, field_profile("smooth-bump", 2.0, 1, 0.0), 0.0).value, 0.0);
  EXPECT_EQ(linear_response_current(ck, fx.f, fx.f.support_lo() - 0.5).value, 0.0);
}

// at t = 0 the linear current is the mean of K in the equilibrium state
TEST(LinearResponse, EqualsGeneratingSlopeAtTimeZero) {
  for (int L : {3, 5}) {
    auto fx = fixture(L, 8 + L);
    double lin = linear_response_current(fx.box, fx.w, kP, fx.f, 0.0).value;
    AssemblyOptions o;
    o.tolerance = 1e-12;
    Matrix K = assemble_K(fx.box, fx.w, kP, fx.f, o).K;
    GeneratingEvaluator ev(build_hamiltonian(fx.box, fx.w, kP), K, kP.beta, fx.box.size());
    EXPECT_NEAR(lin, ev.derivatives(0.0).first, 1e-8);
  }
}

TEST(LinearResponse, ResidualIsQuadraticInEta) {
  auto fx = fixture(16, 11);
  fx.f.amplitude = 0.1;
  double lin = linear_response_current(fx.box, fx.w, kP, fx.f, 0.0).value;
  std::vector<double> etas{0.1, 0.05, 0.025}, res;
  for (double eta : etas) res.push_back(std::abs(current_at_zero(fx, eta, 0.0025) - eta * lin));
  for (std::size_t k = 0; k + 1 < etas.size(); ++k) {
    double slope = std::log(res[k] / res[k + 1]) / std::log(etas[k] / etas[k + 1]);
    EXPECT_NEAR(slope, 2.0, 0.1);
  }
}

TEST(Continuity, EquilibriumExactAndDrivenSecondOrder) {
  auto fx = fixture(6, 13);
  auto st = continuity_stats(fx.box, fx.w, kP, fx.f, 1.0, -1.0, 0.02, 3);
  EXPECT_LE(st.equilibrium, 1e-12);
  for (double o : st.orders) EXPECT_NEAR(o, 2.0, 0.2);
  EXPECT_LT(st.residuals.back(), st.residuals.front());
}

TEST(Velocity, FreeSuperdiagonalSupportAndScaling) {
  ModelParams free{0.0, 0.0, 1.0};
  auto w0 = sample_disorder(LatticeBox::centered(1, 5), 0, DisorderMode::zero);
  VectorPotential none = [](double, const Point&) { return Point{0, 0, 0}; };
  auto r0 = velocity_operator_compare(4, w0, free, none, 0.0, 0);
  auto outer = LatticeBox::centered(1, 5);
  for (int x = -5; x < 5; ++x)
    EXPECT_EQ(r0.velocity(outer.index(Coord{x, 0, 0}), outer.index(Coord{x + 1, 0, 0})), cplx(0, 1));
  EXPECT_TRUE(r0.support_ok);

  auto f = field_profile("smooth-bump", 2.0);
  std::vector<double> scaled;
  for (int L : {8, 16, 32}) {
    auto w = sample_disorder(LatticeBox::centered(1, L + 1), 14);
    auto r = velocity_operator_compare(L, w, kP, rescaled_potential(f, 0.7, L), -1.0, 0);
    EXPECT_TRUE(r.support_ok);
    EXPECT_GT(r.trace_norm_diff, 0.0);
    scaled.push_back(r.scaled_trace_norm);
  }
  for (double v : scaled) {
    EXPECT_LE(v, 2.0 * scaled.front());
    EXPECT_GE(v, 0.5 * scaled.front());
  }
  EXPECT_THROW(velocity_operator_compare(1, w0, free, none, 0.0, 0), ConfigError);
}
