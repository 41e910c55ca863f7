#include <gtest/gtest.h>

#include <cmath>

#include <qfldp/fock.hpp>
#include <qfldp/lattice.hpp>
#include <qfldp/rng.hpp>
#include <qfldp/verify.hpp>

using namespace qfldp;

namespace {

Matrix random_matrix(int n, Rng& r) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = cplx(r.uniform(-1, 1), r.uniform(-1, 1));
  return a;
}

Matrix random_hermitian(int n, Rng& r) {
  Matrix a = random_matrix(n, r);
  return 0.5 * (a + a.adjoint());
}

}  // namespace

TEST(Car, SingleMode) {
  auto g = build_car_generators(1);
  Matrix a = g.annihilator(0).matrix;
  Matrix expect(2, 2);
  expect << 0, 1, 0, 0;
  EXPECT_EQ(a, expect);
  Matrix n = g.creator(0).matrix * a;
  EXPECT_EQ(n(0, 0), cplx(0));
  EXPECT_EQ(n(1, 1), cplx(1));
}

TEST(Car, AnticommutatorsAreExact) {
  for (int n = 1; n <= 5; ++n) {
    auto g = build_car_generators(n);
    const int dim = 1 << n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Matrix ai = g.annihilator(i).matrix, aj = g.annihilator(j).matrix;
        Matrix ajs = g.creator(j).matrix;
        EXPECT_EQ(Matrix(ai * aj + aj * ai), Matrix::Zero(dim, dim));
        Matrix expect = Matrix::Zero(dim, dim);
        if (i == j) expect = Matrix::Identity(dim, dim);
        EXPECT_EQ(Matrix(ai * ajs + ajs * ai), expect);
      }
  }
  EXPECT_THROW(build_car_generators(11), ResourceError);
}

TEST(Car, AnnihilatorNormEqualsVectorNorm) {
  Rng r(1);
  for (int n = 1; n <= 5; ++n) {
    auto g = build_car_generators(n);
    CVector psi(n);
    for (int i = 0; i < n; ++i) psi[i] = cplx(r.uniform(-1, 1), r.uniform(-1, 1));
    EXPECT_NEAR(spectral_norm(annihilation(psi, g).matrix), psi.norm(), 1e-13);
  }
}

TEST(Bilinear, IdentityGivesNumberOperator) {
  const int n = 4;
  auto N = bilinear_to_fock(Matrix::Identity(n, n), n).matrix;
  auto sd = eigh(N);
  for (int k = 0; k < sd.eigenvalues.size(); ++k)
    EXPECT_NEAR(sd.eigenvalues[k], std::round(sd.eigenvalues[k]), 1e-14);
  EXPECT_NEAR(sd.eigenvalues.minCoeff(), 0.0, 1e-14);
  EXPECT_NEAR(sd.eigenvalues.maxCoeff(), double(n), 1e-14);
}

// [⟨A,C1A⟩, ⟨A,C2A⟩] = ⟨A,[C1,C2]A⟩
TEST(Bilinear, CommutatorIdentity) {
  Rng r(2);
  const int n = 4;
  Matrix C1 = random_matrix(n, r), C2 = random_matrix(n, r);
  Matrix F1 = bilinear_to_fock(C1, n).matrix, F2 = bilinear_to_fock(C2, n).matrix;
  Matrix lhs = F1 * F2 - F2 * F1;
  Matrix rhs = bilinear_to_fock(C1 * C2 - C2 * C1, n).matrix;
  EXPECT_LE(max_abs(lhs - rhs), 1e-12);
}

// e^{⟨A,CA⟩} a*(φ) e^{−⟨A,CA⟩} = a*(e^C φ)
TEST(Bilinear, ConjugationIdentity) {
  Rng r(3);
  const int n = 4;
  auto g = build_car_generators(n);
  Matrix C = random_matrix(n, r) * 0.5;
  CVector phi(n);
  for (int i = 0; i < n; ++i) phi[i] = cplx(r.uniform(-1, 1), r.uniform(-1, 1));
  Matrix F = bilinear_to_fock(C, n).matrix;
  Matrix E = F.exp(), Einv = (-F).exp();
  Matrix astar = annihilation(phi, g).matrix.adjoint();
  CVector phi2 = C.exp() * phi;
  Matrix astar2 = annihilation(phi2, g).matrix.adjoint();
  EXPECT_LE(max_abs(E * astar * Einv - astar2), 1e-11);
}

TEST(FockState, NormalizationTwoPointAndWick) {
  Rng r(4);
  const int n = 4;
  Matrix h = random_hermitian(n, r);
  const double beta = 1.3;
  FockModel fm(h, beta);
  const int dim = 1 << n;
  EXPECT_NEAR(std::abs(fm.expect(Matrix::Identity(dim, dim)) - 1.0), 0.0, 1e-14);
  Matrix d = fermi_symbol(h, beta);
  Matrix tp = fm.two_point();
  // ρ(a*_x a_y) = ⟨e_y, d e_x⟩
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y) EXPECT_LE(std::abs(tp(x, y) - d(y, x)), 1e-13);

  auto g = fm.generators();
  for (int k = 0; k < 20; ++k) {
    int i = r.integer(0, n - 1), j = r.integer(0, n - 1), a = r.integer(0, n - 1), b = r.integer(0, n - 1);
    Matrix X = Matrix(g.a[i].adjoint()) * Matrix(g.a[j].adjoint()) * Matrix(g.a[a]) * Matrix(g.a[b]);
    // ρ(a*_i a*_j a_a a_b) = ρ(a*_i a_b)ρ(a*_j a_a) − ρ(a*_i a_a)ρ(a*_j a_b)
    cplx wick = tp(i, b) * tp(j, a) - tp(i, a) * tp(j, b);
    EXPECT_LE(std::abs(fm.expect(X) - wick), 1e-11);
  }
}

// normalized trace of e^{⟨A,CA⟩} is 2^{−n} det(1 + e^C)
TEST(FockState, TraceOfBilinearExponential) {
  Rng r(5);
  for (int n = 1; n <= 6; ++n) {
    Matrix C = random_hermitian(n, r);
    Matrix F = fock_exp(bilinear_to_fock(C, n).matrix);
    cplx tr = F.trace() / double(1 << n);
    cplx det = std::exp(log_det_stable(Matrix::Identity(n, n) + hermitian_exp(C))) / double(1 << n);
    EXPECT_LE(std::abs(tr - det) / std::abs(det), 1e-12);
  }
}

TEST(FockState, ImAndRePartsAreSelfAdjoint) {
  Rng r(6);
  Matrix C = random_matrix(3, r);
  Matrix Fim = bilinear_to_fock(im_part(C), 3).matrix, Fre = bilinear_to_fock(re_part(C), 3).matrix;
  EXPECT_TRUE(is_hermitian(Fim));
  EXPECT_TRUE(is_hermitian(Fre));
  EXPECT_LE(max_abs(Fre + cplx(0, 1) * Fim - bilinear_to_fock(C, 3).matrix), 1e-14);
}

TEST(Identities, TrivialCases) {
  Rng r(7);
  Matrix h = random_hermitian(3, r);
  auto rep = verify_identities_suite(h, Matrix::Zero(3, 3), 1.0, 0.7);
  EXPECT_EQ(rep.bogoliubov_ii_lhs, 0.0);
  EXPECT_EQ(rep.bogoliubov_ii_violation, 0.0);
  EXPECT_LE(std::abs(rep.lemma_cool_D), 1e-12);
  EXPECT_LE(rep.lemma_cool_residual, 1e-12);
}

TEST(Identities, RandomBilinears) {
  Rng r(8);
  for (int k = 0; k < 5; ++k) {
    Matrix h = random_hermitian(4, r), K = random_hermitian(4, r);
    auto rep = verify_identities_suite(h, K, r.uniform(0.5, 2), r.uniform(-1.5, 1.5));
    EXPECT_LE(rep.bogoliubov_i_violation, 1e-12);
    EXPECT_LE(rep.bogoliubov_ii_violation, 1e-12);
    EXPECT_LE(std::abs(rep.lemma_cool_D), 1e-10);
    EXPECT_LE(rep.lemma_cool_residual, 1e-10);
    EXPECT_LE(rep.continuity_operator_residual, 1e-12);
    EXPECT_LE(rep.continuity_equilibrium_residual, 1e-12);
  }
}

TEST(Sectors, BlockExponentialMatchesDense) {
  Rng r(9);
  const int n = 4;
  Matrix X = bilinear_to_fock(random_hermitian(n, r), n).matrix;
  Matrix dense = (cplx(0, -0.3) * X).exp();
  Matrix blocks = sector_exp(X, cplx(0, -0.3));
  EXPECT_LE(max_abs(dense - blocks), 1e-12);
}
