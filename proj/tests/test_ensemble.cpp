#include <gtest/gtest.h>

#include <cmath>

#include <qfldp/ensemble.hpp>

using namespace qfldp;

namespace {

EnsembleSpec small_spec(int samples = 8) {
  EnsembleSpec s;
  s.samples = samples;
  s.seed_base = 21;
  s.params = {1.0, 0.5, 1.0};
  s.dim = 1;
  s.L = 4;
  s.L_rho = 8;
  s.L_tau = 16;
  s.cell_radius = 2;
  s.field = field_profile("smooth-bump", 2.0);
  s.s_grid = linear_grid(-1, 1, 9);
  return s;
}

bool bitwise_equal(const CurveStatistics& a, const CurveStatistics& b) {
  return a.s == b.s && a.mean_J == b.mean_J && a.stderr_J == b.stderr_J && a.mean_dJ == b.mean_dJ &&
         a.stderr_dJ == b.stderr_dJ && a.mean_d2J == b.mean_d2J;
}

}  // namespace

TEST(EnsembleSpec, Validation) {
  auto s = small_spec();
  s.L_rho = 3;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.samples = 0;
  EXPECT_THROW(s.validate(), ConfigError);
  s = small_spec();
  s.cell_radius = 5;
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Ensemble, NoDisorderMeansNoSpread) {
  auto s = small_spec(5);
  s.params.lambda = 0;
  s.params.theta = 0;
  auto r = mc_generating(s);
  for (double e : r.stats.stderr_J) EXPECT_EQ(e, 0.0);
  for (double e : r.stats.stderr_dJ) EXPECT_EQ(e, 0.0);
  for (const auto& c : r.curves) EXPECT_EQ(c.J, r.curves.front().J);

  auto zero = small_spec(5);
  zero.mode = DisorderMode::zero;
  auto erg = ergodic_average_check(zero);
  EXPECT_LE(erg.gap_J_sigmas, 1e-12);
  EXPECT_LE(std::abs(erg.spatial_J - erg.mc_J), 1e-14);
}

TEST(Ensemble, SeedsManifestAndReproducibility) {
  auto s = small_spec(6);
  auto a = mc_generating(s);
  s.threads = 3;
  auto b = mc_generating(s);
  EXPECT_TRUE(bitwise_equal(a.stats, b.stats));
  ASSERT_EQ(a.manifest.size(), 6u);
  for (int i = 0; i < 6; ++i) {
    EXPECT_EQ(a.manifest[i].seed, sample_seed(s.seed_base, i));
    EXPECT_TRUE(a.manifest[i].ok);
  }
  EXPECT_TRUE(a.single_ok);
  EXPECT_EQ(a.single.J, nested_curve(s, s.seed_base, s.L).J);
  for (std::size_t j = 0; j < a.stats.s.size(); ++j) {
    double m = 0;
    for (const auto& c : a.curves) m += c.J[j] / a.curves.size();
    EXPECT_NEAR(a.stats.mean_J[j], m, 1e-15);
  }
}

TEST(Ensemble, EverySampleConvex) {
  auto r = mc_generating(small_spec(6));
  for (const auto& c : r.curves) {
    for (std::size_t i = 1; i + 1 < c.s.size(); ++i) EXPECT_GE(c.J[i + 1] - 2 * c.J[i] + c.J[i - 1], -1e-9);
    for (double v : c.d2J) EXPECT_GE(v, 0.0);
  }
}

TEST(Ensemble, FailurePolicy) {
  auto s = small_spec(10);
  int calls = 0;
  auto one_bad = run_samples(s, [&](std::uint64_t seed) {
    ++calls;
    if (seed == sample_seed(s.seed_base, 3)) throw SingularityError("synthetic", 0.0);
    return nested_curve(s, seed, s.L);
  });
  EXPECT_EQ(calls, 10);
  EXPECT_FALSE(one_bad.manifest[3].ok);
  EXPECT_EQ(one_bad.curves.size(), 9u);
  EXPECT_THROW(run_samples(s,
                           [&](std::uint64_t seed) -> GeneratingCurve {
                             if (seed % 3 == 0 || seed % 3 == 1) throw AccuracyError("synthetic", 1.0);
                             return nested_curve(s, seed, s.L);
                           }),
               DataError);
}

// E[J] over Λ and over x + Λ agree to stderr accuracy
TEST(Ensemble, ShiftInvarianceOfTheMean) {
  auto s = small_spec(16);
  Coord v{3, 0, 0};
  LatticeBox amb = LatticeBox::centered(1, s.L_tau + 3);
  LatticeBox target = LatticeBox::centered(1, s.L_tau);
  std::vector<double> a, b;
  for (int i = 0; i < s.samples; ++i) {
    auto w = sample_disorder(amb, sample_seed(s.seed_base, i));
    auto w0 = shift_disorder(w, Coord{0, 0, 0}, target);
    auto wv = shift_disorder(w, v, target);
    auto box = LatticeBox::centered(1, s.L);
    auto rho = LatticeBox::centered(1, s.L_rho);
    a.push_back(finite_volume_evaluator(target, w0, s.params, s.field, {box}, {rho}, {target}).J(1.0));
    b.push_back(finite_volume_evaluator(target, wv, s.params, s.field, {box}, {rho}, {target}).J(1.0));
  }
  auto [ma, sa] = detail::mean_stderr(a);
  auto [mb, sb] = detail::mean_stderr(b);
  EXPECT_LE(detail::sigmas(ma, sa, mb, sb), 3.0);
}

TEST(Decomposition, SingleCellIdentityAndDecomposedForm) {
  auto s = small_spec();
  auto box = LatticeBox::centered(1, s.L);
  auto w = sample_disorder(box, 5);
  auto ca = cell_average(box, w, s.params, s.field, s.L, s.s_grid);
  auto direct = finite_volume_curve(box, w, s.params, s.field, {box}, {box}, {box}, s.s_grid);
  ASSERT_EQ(ca.cells.size(), 1u);
  EXPECT_EQ(ca.mean_J, direct.J);

  auto big = LatticeBox::centered(1, 12);
  auto wb = sample_disorder(big, 6);
  auto c2 = cell_average(big, wb, s.params, s.field, 2, s.s_grid);
  EXPECT_GT(c2.cells.size(), 3u);
  EXPECT_LE(c2.identity_residual, 1e-12);
}

// identical disorder in every cell gives identical per-cell curves
TEST(Decomposition, PeriodicReplication) {
  auto s = small_spec();
  const int l = 2, w_ = 2 * l + 1;
  auto big = LatticeBox::centered(1, 12);
  auto one = sample_disorder(LatticeBox::centered(1, l), 8);
  DisorderSample w(big);
  for (int k = 0; k < big.size(); ++k) {
    Coord x = big.site(k);
    int r = ((x[0] + l) % w_ + w_) % w_ - l;
    w.set_w1(x, one.w1(Coord{r, 0, 0}));
    if (big.contains(x + unit_vector(0)) && r < l) w.set_w2(x, 0, one.w2(Coord{r, 0, 0}, 0));
  }
  auto ca = cell_average(big, w, s.params, s.field, l, s.s_grid, false);
  for (const auto& c : ca.cells) EXPECT_EQ(c.J, ca.cells.front().J);
}

TEST(Decomposition, CompareReportsNonNegativeDiscrepancy) {
  auto s = small_spec(4);
  auto pts = box_decomposition_compare(s, {1, 2, 4});
  ASSERT_EQ(pts.size(), 3u);
  for (const auto& p : pts) {
    EXPECT_GE(p.discrepancy, 0.0);
    EXPECT_LE(p.identity_residual, 1e-12);
  }
  EXPECT_EQ(pts[2].cells, 1);
}

TEST(Convergence, SingleRealizationApproachesEnsembleMean) {
  auto s = small_spec(12);
  auto pts = convergence_run(s, {4, 8, 12});
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[1].L, 8);
  EXPECT_GT(pts[0].single_gap, pts[2].single_gap);
  EXPECT_GT(pts[0].stats.stderr_J.front(), pts[2].stats.stderr_J.front());
}

TEST(Convergence, MeanCurrentStableUnderQuadratureDoubling) {
  auto s = small_spec(4);
  auto a = mc_generating(s);
  s.field.density *= 2;
  auto b = mc_generating(s);
  int z = 4;
  ASSERT_EQ(s.s_grid[z], 0.0);
  EXPECT_LE(std::abs(a.stats.mean_dJ[z] - b.stats.mean_dJ[z]), 1e-6);
}

// the stderr of the spatial cell average falls like 1/√cells
TEST(Ergodic, SpatialStderrFollowsCellCount) {
  auto s = small_spec(4);
  s.cell_radius = 2;
  s.L = s.L_rho = s.L_tau = 32;
  auto a = ergodic_average_check(s);
  s.L = s.L_rho = s.L_tau = 64;
  auto b = ergodic_average_check(s);
  ASSERT_GT(b.cells, a.cells);
  double measured = a.spatial_J_stderr / b.spatial_J_stderr;
  double expected = std::sqrt(double(b.cells) / a.cells);
  EXPECT_LE(measured / expected, 1.5);
  EXPECT_GE(measured / expected, 1.0 / 1.5);
}
