#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include <qfldp/lattice.hpp>
#include <qfldp/spectral.hpp>

using namespace qfldp;

TEST(LatticeBox, SizeNeighboursAndIndexRoundTrip) {
  for (int d = 1; d <= 3; ++d)
    for (int L = 0; L <= 3; ++L) {
      auto box = LatticeBox::centered(d, L);
      EXPECT_EQ(box.size(), int(std::pow(2 * L + 1, d)));
      std::vector<int> deg(box.size(), 0);
      for (const auto& e : box.edges()) {
        ++deg[e.a];
        ++deg[e.b];
      }
      for (int k = 0; k < box.size(); ++k) {
        EXPECT_EQ(box.index(box.site(k)), k);
        EXPECT_LE(deg[k], 2 * d);
      }
    }
}

TEST(LatticeBox, EdgesAreExactlyUnitDistancePairs) {
  auto box = LatticeBox::centered(2, 2);
  std::set<std::pair<int, int>> edges;
  for (const auto& e : box.edges()) edges.insert({std::min(e.a, e.b), std::max(e.a, e.b)});
  EXPECT_EQ(edges.size(), box.edges().size());
  int expected = 0;
  for (int a = 0; a < box.size(); ++a)
    for (int b = a + 1; b < box.size(); ++b)
      if (distance(box.site(a), box.site(b)) == 1.0) {
        ++expected;
        EXPECT_TRUE(edges.count({a, b}));
      }
  EXPECT_EQ(int(edges.size()), expected);
}

TEST(BoxDecomposition, CellsPartitionAndBoundaryEdges) {
  for (int d : {1, 2})
    for (int l : {1, 2}) {
      auto parent = LatticeBox::centered(d, 5);
      auto dec = decompose(parent, l);
      std::vector<int> hits(parent.size(), 0);
      for (const auto& c : dec.cells) {
        EXPECT_EQ(c.size(), int(std::pow(2 * l + 1, d)));
        for (int k = 0; k < c.size(); ++k) ++hits[parent.index(c.site(k))];
      }
      for (int k : dec.uncovered_sites) ++hits[k];
      for (int h : hits) EXPECT_EQ(h, 1);
      for (std::size_t c = 0; c < dec.cells.size(); ++c)
        for (const auto& e : dec.boundary_edges[c]) {
          bool a = dec.cells[c].contains(parent.site(e.a)), b = dec.cells[c].contains(parent.site(e.b));
          EXPECT_NE(a, b);
        }
    }
}

TEST(Disorder, ZeroModeIsIdenticallyZero) {
  auto box = LatticeBox::centered(2, 2);
  auto w = sample_disorder(box, 99, DisorderMode::zero);
  for (double v : w.omega1) EXPECT_EQ(v, 0.0);
  for (auto z : w.omega2) EXPECT_EQ(z, cplx(0));
}

TEST(Disorder, DeterministicAndBounded) {
  auto box = LatticeBox::centered(2, 3);
  for (auto mode : {DisorderMode::uniform_iid, DisorderMode::circle_phase_iid}) {
    auto a = sample_disorder(box, 7, mode), b = sample_disorder(box, 7, mode);
    EXPECT_EQ(a.omega1, b.omega1);
    EXPECT_EQ(a.omega2, b.omega2);
    for (double v : a.omega1) EXPECT_LE(std::abs(v), 1.0);
    for (const auto& e : box.edges()) {
      double r = std::abs(a.w2(box.site(e.a), e.dir));
      EXPECT_LE(r, 1.0 + 1e-15);
      if (mode == DisorderMode::circle_phase_iid) EXPECT_NEAR(r, 1.0, 1e-14);
    }
  }
  EXPECT_THROW(parse_disorder_mode("gaussian"), ConfigError);
}

// Uniform[−1,1] has variance 1/3
TEST(Disorder, EmpiricalMeanOfSitePotential) {
  auto box = LatticeBox::centered(1, 5000);
  auto w = sample_disorder(box, 2024);
  double mean = 0;
  for (int k = 0; k < 10000; ++k) mean += w.omega1[k];
  mean /= 10000;
  EXPECT_LE(std::abs(mean), 3.0 * (1.0 / std::sqrt(3.0)) / 100.0);
}

TEST(Disorder, ShiftIdentityInverseAndSubstitution) {
  auto box = LatticeBox::centered(1, 1);
  DisorderSample w(box);
  w.omega1 = {0.1, 0.2, 0.3};  // a, b, c on −1, 0, 1
  auto same = shift_disorder(w, Coord{0, 0, 0});
  EXPECT_EQ(same.omega1, w.omega1);
  auto s = shift_disorder(w, Coord{1, 0, 0}, LatticeBox::segment(-1, 2));
  EXPECT_EQ(s.w1(Coord{-1, 0, 0}), 0.2);
  EXPECT_EQ(s.w1(Coord{0, 0, 0}), 0.3);

  auto r = sample_disorder(LatticeBox::centered(2, 3), 5);
  auto fwd = shift_disorder(r, Coord{1, -1, 0});
  auto back = shift_disorder(fwd, Coord{-1, 1, 0});
  for (int k = 0; k < back.domain.size(); ++k) EXPECT_EQ(back.w1(back.domain.site(k)), r.w1(back.domain.site(k)));
}

TEST(Hamiltonian, TwoSiteLaplacian) {
  auto box = LatticeBox::segment(0, 2);
  auto w = sample_disorder(box, 1, DisorderMode::zero);
  Matrix h = build_hamiltonian(box, w, {0, 0, 1});
  EXPECT_EQ(h(0, 0), cplx(2));
  EXPECT_EQ(h(0, 1), cplx(-1));
  EXPECT_EQ(h(1, 0), cplx(-1));
  auto sd = eigh(h);
  EXPECT_NEAR(sd.eigenvalues[0], 1.0, 1e-14);
  EXPECT_NEAR(sd.eigenvalues[1], 3.0, 1e-14);
}

TEST(Hamiltonian, UnitPotentialShiftsDiagonal) {
  auto box = LatticeBox::centered(2, 2);
  DisorderSample w(box);
  for (auto& v : w.omega1) v = 1.0;
  Matrix h = build_hamiltonian(box, w, {1.0, 0.0, 1.0});
  for (int k = 0; k < box.size(); ++k) EXPECT_EQ(h(k, k), cplx(5));
  for (const auto& e : box.edges()) EXPECT_EQ(h(e.a, e.b), cplx(-1));
}

TEST(Hamiltonian, HermitianWithGershgorinSpectrum) {
  for (int d : {1, 2}) {
    auto box = LatticeBox::centered(d, 3);
    ModelParams p{0.7, 0.4, 1.0};
    Matrix h = build_hamiltonian(box, sample_disorder(box, 31), p);
    EXPECT_LE(max_abs(h - h.adjoint()), 1e-14);
    auto sd = eigh(h);
    EXPECT_GE(sd.eigenvalues.minCoeff(), -2.0 * d * (1 + p.theta) - p.lambda - 1e-12);
    EXPECT_LE(sd.eigenvalues.maxCoeff(), 4.0 * d * (1 + p.theta) + p.lambda + 1e-12);
  }
}

TEST(Restriction, WholeBoxSplitAndIdempotence) {
  auto box = LatticeBox::segment(0, 2);
  auto w = sample_disorder(box, 3);
  ModelParams p{0.5, 0.3, 1.0};
  EXPECT_EQ(restrict_to_collection(box, w, p, {box}), build_hamiltonian(box, w, p));
  Matrix split = restrict_to_collection(box, w, p, {LatticeBox::segment(0, 1), LatticeBox::segment(1, 1)});
  EXPECT_EQ(split(0, 1), cplx(0));
  EXPECT_EQ(split(1, 0), cplx(0));
  EXPECT_DOUBLE_EQ(split(0, 0).real(), 2 + p.lambda * w.omega1[0]);
  EXPECT_DOUBLE_EQ(split(1, 1).real(), 2 + p.lambda * w.omega1[1]);

  auto big = LatticeBox::centered(2, 4);
  auto wb = sample_disorder(big, 8);
  auto dec = decompose(big, 1);
  Matrix hz = restrict_to_collection(big, wb, p, dec.cells);
  EXPECT_EQ(project_to_collection(hz, big, dec.cells), hz);
}

// h_{Λ} − h_Z lives on uncovered sites and boundary edges only
TEST(Restriction, DifferenceSupport) {
  auto big = LatticeBox::centered(2, 4);
  auto w = sample_disorder(big, 9);
  ModelParams p{0.8, 0.5, 1.0};
  auto dec = decompose(big, 1);
  Matrix diff = build_hamiltonian(big, w, p) - restrict_to_collection(big, w, p, dec.cells);
  std::set<int> unc(dec.uncovered_sites.begin(), dec.uncovered_sites.end());
  std::set<std::pair<int, int>> bnd;
  for (const auto& es : dec.boundary_edges)
    for (const auto& e : es) bnd.insert({std::min(e.a, e.b), std::max(e.a, e.b)});
  for (int i = 0; i < big.size(); ++i)
    for (int j = 0; j < big.size(); ++j) {
      if (diff(i, j) == cplx(0)) continue;
      if (i == j) {
        EXPECT_TRUE(unc.count(i));
      } else {
        bool edge = bnd.count({std::min(i, j), std::max(i, j)}) || (unc.count(i) && unc.count(j));
        EXPECT_TRUE(edge) << i << "," << j;
      }
    }
}

TEST(Hamiltonian, TranslationCovariance) {
  auto big = LatticeBox::centered(2, 4);
  auto w = sample_disorder(big, 12);
  ModelParams p{0.9, 0.6, 1.0};
  Coord v{1, 2, 0};
  auto target = LatticeBox::centered(2, 2);
  Matrix h_shift = build_hamiltonian(target, shift_disorder(w, v, target), p);
  Matrix h_big = build_hamiltonian(target.translated(v), w, p);
  EXPECT_EQ(h_shift, h_big);
}

TEST(MagneticHamiltonian, ZeroAndConstantPotential) {
  auto box = LatticeBox::centered(2, 2);
  auto w = sample_disorder(box, 4);
  ModelParams p{0.5, 0.5, 1.0};
  VectorPotential zero = [](double, const Point&) { return Point{0, 0, 0}; };
  Matrix h0 = build_hamiltonian(box, w, p);
  EXPECT_LE(max_abs(build_magnetic_hamiltonian(box, w, p, zero, 0.3) - h0), 1e-15);
  const double phi = 0.37;
  VectorPotential cst = [&](double, const Point&) { return Point{phi, 0, 0}; };
  Matrix hm = build_magnetic_hamiltonian(box, w, p, cst, 0.0);
  EXPECT_LE(max_abs(hm - hm.adjoint()), 1e-15);
  for (const auto& e : box.edges()) {
    cplx expect = e.dir == 0 ? h0(e.a, e.b) * std::polar(1.0, phi) : h0(e.a, e.b);
    EXPECT_LE(std::abs(hm(e.a, e.b) - expect), 1e-14);
  }
  VectorPotential wild = [](double t, const Point& x) { return Point{std::sin(x[1] + t), x[0] * x[0], 0}; };
  Matrix hw = build_magnetic_hamiltonian(box, w, p, wild, 0.8);
  EXPECT_LE(max_abs(hw - hw.adjoint()), 1e-15);
  EXPECT_LE((hw.cwiseAbs() - h0.cwiseAbs()).cwiseAbs().maxCoeff(), 1e-14);
}
