#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "nvsim/linalg.hpp"

using namespace nvsim;

namespace {

MatrixXc random_hermitian(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXc m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = Complex(g(rng), g(rng));
  return (m + m.adjoint()).eval() / 2.0;
}

} // namespace

TEST_CASE("spin-1 operators obey the angular momentum algebra") {
  const Matrix3c sx = spin1_x(), sy = spin1_y(), sz = spin1_z();
  const Complex i(0.0, 1.0);
  CHECK((sx * sy - sy * sx - i * sz).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((sy * sz - sz * sy - i * sx).cwiseAbs().maxCoeff() < 1e-15);
  const Matrix3c s2 = sx * sx + sy * sy + sz * sz;
  CHECK((s2 - 2.0 * Matrix3c::Identity()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("kron dimensions and values") {
  const MatrixXc a = spin1_z();
  const MatrixXc id = MatrixXc::Identity(3, 3);
  const MatrixXc k = kron(a, id);
  REQUIRE(k.rows() == 9);
  CHECK(std::real(k(0, 0)) == 1.0);
  CHECK(std::real(k(4, 4)) == 0.0);
  CHECK(std::real(k(8, 8)) == -1.0);
}

TEST_CASE("eigensolve of a diagonal matrix returns the diagonal") {
  MatrixXc m = MatrixXc::Zero(9, 9);
  for (int i = 0; i < 9; ++i) m(i, i) = i + 1.0;
  const auto eig = hermitian_eigensolve(m);
  for (int i = 0; i < 9; ++i) {
    CHECK(eig.values(i) == Catch::Approx(i + 1.0).margin(1e-12));
    CHECK(std::abs(eig.vectors(i, i)) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("eigensolve of the zero matrix") {
  const auto eig = hermitian_eigensolve(MatrixXc::Zero(9, 9));
  for (int i = 0; i < 9; ++i) CHECK(eig.values(i) == 0.0);
}

TEST_CASE("random Hermitian matrices are reconstructed from the decomposition") {
  for (std::uint64_t seed : {11u, 22u, 33u, 44u, 55u}) {
    const MatrixXc h = random_hermitian(9, seed);
    const auto eig = hermitian_eigensolve(h);
    const MatrixXc recon =
        eig.vectors * eig.values.cast<Complex>().asDiagonal() * eig.vectors.adjoint();
    CHECK((recon - h).cwiseAbs().maxCoeff() / h.cwiseAbs().maxCoeff() < 1e-9);
    const MatrixXc gram = eig.vectors.adjoint() * eig.vectors;
    CHECK((gram - MatrixXc::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-10);
    for (int i = 0; i + 1 < 9; ++i) CHECK(eig.values(i) <= eig.values(i + 1));
  }
}

TEST_CASE("eigensolve rejects non-Hermitian input") {
  MatrixXc m = MatrixXc::Zero(3, 3);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(hermitian_eigensolve(m), std::invalid_argument);
}

TEST_CASE("unitary propagator is unitary and phases match") {
  const MatrixXc h = random_hermitian(9, 7);
  const auto eig = hermitian_eigensolve(h);
  const MatrixXc u = unitary_propagator(eig, 0.35);
  CHECK((u * u.adjoint() - MatrixXc::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-12);

  // diagonal Hamiltonian: each basis state picks up exp(-i 2 pi E dt)
  MatrixXc d = MatrixXc::Zero(3, 3);
  d(0, 0) = 2.0; d(1, 1) = -1.0; d(2, 2) = 0.5;
  const MatrixXc ud = unitary_propagator(hermitian_eigensolve(d), 0.125);
  for (int i = 0; i < 3; ++i) {
    const double phi = -2.0 * M_PI * std::real(d(i, i)) * 0.125;
    CHECK(std::abs(ud(i, i) - Complex(std::cos(phi), std::sin(phi))) < 1e-12);
  }
}
