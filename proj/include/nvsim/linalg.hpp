#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace nvsim {

using Complex = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;
using Matrix9c = Eigen::Matrix<Complex, 9, 9>;
using Vector9c = Eigen::Matrix<Complex, 9, 1>;
using MatrixXc = Eigen::MatrixXcd;
using Vector3d = Eigen::Vector3d;

/// Spin-1 operators in the basis {|+1>, |0>, |-1>}, dimensionless.
inline Matrix3c spin1_x() {
  const double r = 1.0 / std::sqrt(2.0);
  Matrix3c m = Matrix3c::Zero();
  m(0, 1) = r; m(1, 0) = r;
  m(1, 2) = r; m(2, 1) = r;
  return m;
}

inline Matrix3c spin1_y() {
  const Complex i(0.0, 1.0);
  const double r = 1.0 / std::sqrt(2.0);
  Matrix3c m = Matrix3c::Zero();
  m(0, 1) = -i * r; m(1, 0) = i * r;
  m(1, 2) = -i * r; m(2, 1) = i * r;
  return m;
}

inline Matrix3c spin1_z() {
  Matrix3c m = Matrix3c::Zero();
  m(0, 0) = 1.0;
  m(2, 2) = -1.0;
  return m;
}

/// Kronecker product; row/col index of the result is (i_a * rows_b + i_b).
inline MatrixXc kron(const MatrixXc& a, const MatrixXc& b) {
  MatrixXc out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline double hermiticity_error(const MatrixXc& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

struct HermitianEigen {
  Eigen::VectorXd values;  // ascending
  MatrixXc vectors;        // orthonormal columns, h = V diag(values) V^dagger
};

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Deterministic and robust for the small dense matrices used here.
inline HermitianEigen hermitian_eigensolve(const MatrixXc& h_in,
                                           double hermitian_tol = 1e-9) {
  const Eigen::Index n = h_in.rows();
  if (h_in.cols() != n) throw std::invalid_argument("linalg: eigensolve needs a square matrix");
  const double scale = std::max(h_in.cwiseAbs().maxCoeff(), 1.0);
  if (hermiticity_error(h_in) > hermitian_tol * scale)
    throw std::invalid_argument("linalg: eigensolve input is not Hermitian");

  MatrixXc a = (h_in + h_in.adjoint()) / 2.0;  // symmetrize roundoff
  MatrixXc v = MatrixXc::Identity(n, n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) s += std::norm(a(p, q));
    return std::sqrt(s);
  };

  const double stop = 1e-15 * std::max(a.norm(), 1e-300);
  for (int sweep = 0; sweep < 100 && off_norm() > stop; ++sweep) {
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double r = std::abs(a(p, q));
        if (r <= 1e-300) continue;
        const Complex w = a(p, q) / r;  // phase so the rotated pivot is real
        const double app = std::real(a(p, p));
        const double aqq = std::real(a(q, q));
        const double tau = (aqq - app) / (2.0 * r);
        const double t = (tau >= 0 ? 1.0 : -1.0) /
                         (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        // J differs from identity only in the (p,q) plane:
        //   J(p,p) = c, J(p,q) = s, J(q,p) = -s conj(w), J(q,q) = c conj(w)
        const Complex jqp = -s * std::conj(w);
        const Complex jqq = c * std::conj(w);
        for (Eigen::Index k = 0; k < n; ++k) {  // A <- A J
          const Complex akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * c + akq * jqp;
          a(k, q) = akp * s + akq * jqq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {  // A <- J^dagger A
          const Complex apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk + std::conj(jqp) * aqk;
          a(q, k) = s * apk + std::conj(jqq) * aqk;
        }
        for (Eigen::Index k = 0; k < n; ++k) {  // V <- V J
          const Complex vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * c + vkq * jqp;
          v(k, q) = vkp * s + vkq * jqq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = Complex(std::real(a(p, p)), 0.0);
        a(q, q) = Complex(std::real(a(q, q)), 0.0);
      }
    }
  }

  HermitianEigen out;
  out.values.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.values(i) = std::real(a(i, i));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r2) {
    return out.values(l) < out.values(r2);
  });
  Eigen::VectorXd sorted(n);
  MatrixXc vs(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sorted(i) = out.values(order[static_cast<std::size_t>(i)]);
    vs.col(i) = v.col(order[static_cast<std::size_t>(i)]);
  }
  out.values = sorted;
  out.vectors = vs;
  return out;
}

/// exp(-i 2 pi H dt) for Hermitian H given in Hz, via its eigendecomposition.
inline MatrixXc unitary_propagator(const HermitianEigen& eig, double dt_seconds) {
  const Eigen::Index n = eig.values.size();
  MatrixXc phases = MatrixXc::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double phi = -2.0 * M_PI * eig.values(k) * dt_seconds;
    phases(k, k) = Complex(std::cos(phi), std::sin(phi));
  }
  return eig.vectors * phases * eig.vectors.adjoint();
}

} // namespace nvsim
