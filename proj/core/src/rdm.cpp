#include "atxy/rdm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/KroneckerProduct>

namespace atxy {

using Eigen::Matrix2cd;
using Eigen::Matrix4cd;
using std::complex;

double CorrelatorSet::max_abs() const {
  return std::max({std::abs(mz_e), std::abs(mz_o), std::abs(txx), std::abs(tyy),
                   std::abs(tzz), std::abs(txy), std::abs(tyx)});
}

const Matrix2cd& pauli_x() {
  static const Matrix2cd m = (Matrix2cd() << 0, 1, 1, 0).finished();
  return m;
}
const Matrix2cd& pauli_y() {
  static const Matrix2cd m =
      (Matrix2cd() << 0, complex<double>(0, -1), complex<double>(0, 1), 0).finished();
  return m;
}
const Matrix2cd& pauli_z() {
  static const Matrix2cd m = (Matrix2cd() << 1, 0, 0, -1).finished();
  return m;
}

namespace {

Matrix4cd kron2(const Matrix2cd& a, const Matrix2cd& b) {
  return Eigen::kroneckerProduct(a, b).eval();
}

}  // namespace

TwoSiteState assemble(const CorrelatorSet& c) {
  const Matrix2cd id = Matrix2cd::Identity();
  Matrix4cd rho = kron2(id, id);
  rho += c.mz_e * kron2(pauli_z(), id);
  rho += c.mz_o * kron2(id, pauli_z());
  rho += c.txx * kron2(pauli_x(), pauli_x());
  rho += c.tyy * kron2(pauli_y(), pauli_y());
  rho += c.tzz * kron2(pauli_z(), pauli_z());
  rho += c.txy * kron2(pauli_x(), pauli_y());
  rho += c.tyx * kron2(pauli_y(), pauli_x());
  rho *= 0.25;

  Eigen::SelfAdjointEigenSolver<Matrix4cd> es(rho);
  const Eigen::Vector4d ev = es.eigenvalues();
  if (ev.minCoeff() < -kUnphysicalTol)
    throw std::runtime_error("assemble: unphysical correlators, min eigenvalue " +
                             std::to_string(ev.minCoeff()));
  if (ev.minCoeff() < 0.0) {
    // round-off clip: zero out small negatives and renormalize
    Eigen::Vector4d clipped = ev.cwiseMax(0.0);
    clipped /= clipped.sum();
    rho = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().adjoint();
  }
  return rho;
}

CorrelatorSet extract(const TwoSiteState& rho) {
  const Matrix2cd id = Matrix2cd::Identity();
  auto expval = [&rho](const Matrix4cd& op) { return (op * rho).trace().real(); };
  CorrelatorSet c;
  c.mz_e = expval(kron2(pauli_z(), id));
  c.mz_o = expval(kron2(id, pauli_z()));
  c.txx = expval(kron2(pauli_x(), pauli_x()));
  c.tyy = expval(kron2(pauli_y(), pauli_y()));
  c.tzz = expval(kron2(pauli_z(), pauli_z()));
  c.txy = expval(kron2(pauli_x(), pauli_y()));
  c.tyx = expval(kron2(pauli_y(), pauli_x()));
  return c;
}

}  // namespace atxy
