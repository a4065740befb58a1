#include "atxy/ed.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace atxy {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using std::complex;

SparseHamiltonian build_hamiltonian(const ModelParams& p, double h1, double h2) {
  p.validate();
  if (p.N < 4 || p.N > kEdMaxSites || p.N % 2 != 0)
    throw std::invalid_argument("build_hamiltonian: N must be even, 4 <= N <= 14");
  const int n = p.N;
  const long dim = 1L << n;
  const double J = p.J;

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(dim) * (n + 1));

  for (long s = 0; s < dim; ++s) {
    // field term: h_i/2 * sigma^z_i, bit 0 = up (+1)
    double diag = 0.0;
    for (int i = 1; i <= n; ++i) {
      const double hi = h1 + ((i % 2 == 0) ? h2 : -h2);
      const int bit = (s >> (i - 1)) & 1;
      diag += 0.5 * hi * (bit == 0 ? 1.0 : -1.0);
    }
    if (diag != 0.0) trip.emplace_back(s, s, diag);

    // bond terms flip the two bits; element J/2 when the bits differ
    // (xx and yy add), J*gamma/2 when equal (yy contributes -1)
    for (int i = 1; i <= n; ++i) {
      const int j = (i % n) + 1;
      const int bi = (s >> (i - 1)) & 1;
      const int bj = (s >> (j - 1)) & 1;
      const long sp = s ^ (1L << (i - 1)) ^ (1L << (j - 1));
      const double elem = (bi == bj) ? 0.5 * J * p.gamma : 0.5 * J;
      if (elem != 0.0) trip.emplace_back(sp, s, elem);
    }
  }

  SparseHamiltonian H(dim, dim);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

EdSolver::EdSolver(const SparseHamiltonian& H) : dim_(static_cast<int>(H.rows())) {
  const MatrixXd hd(H);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hd);
  if (es.info() != Eigen::Success) throw std::runtime_error("EdSolver: eigensolver failed");
  evals_ = es.eigenvalues();
  evecs_ = es.eigenvectors();
}

DenseState EdSolver::thermal_state(double beta_s) const {
  if (beta_s < 0.0) throw std::invalid_argument("thermal_state: beta_s must be >= 0");
  VectorXd w = (-beta_s * (evals_.array() - evals_(0))).exp();
  w /= w.sum();
  MatrixXd rho = evecs_ * w.asDiagonal() * evecs_.transpose();
  return rho.cast<complex<double>>();
}

DenseState EdSolver::evolve(const DenseState& rho0, double t) const {
  if (rho0.rows() != dim_ || rho0.cols() != dim_)
    throw std::invalid_argument("evolve: dimension mismatch");
  Eigen::VectorXcd phases(dim_);
  for (int m = 0; m < dim_; ++m) phases(m) = std::polar(1.0, -evals_(m) * t);
  // U rho U^+ = V diag(e^{-iEt}) V^T rho V diag(e^{+iEt}) V^T
  MatrixXcd a = evecs_.transpose() * rho0 * evecs_;
  a = phases.asDiagonal() * a * phases.conjugate().asDiagonal();
  return evecs_ * a * evecs_.transpose();
}

TwoSiteState EdSolver::thermal_pair_state(double beta_s, int i, int j) const {
  if (i != cached_i_ || j != cached_j_) {
    pair_terms_.assign(dim_, Eigen::Matrix4cd::Zero());
    const long mi = 1L << (i - 1), mj = 1L << (j - 1);
    for (int k = 0; k < dim_; ++k) {
      Eigen::Matrix4cd r = Eigen::Matrix4cd::Zero();
      for (long s = 0; s < dim_; ++s) {
        const int a = (s & mi) ? 1 : 0;
        const int b = (s & mj) ? 1 : 0;
        for (int ap = 0; ap < 2; ++ap)
          for (int bp = 0; bp < 2; ++bp) {
            long sp = (s & ~mi & ~mj) | (ap ? mi : 0) | (bp ? mj : 0);
            r(2 * a + b, 2 * ap + bp) += evecs_(s, k) * evecs_(sp, k);
          }
      }
      pair_terms_[k] = r;
    }
    cached_i_ = i;
    cached_j_ = j;
  }
  VectorXd w = (-beta_s * (evals_.array() - evals_(0))).exp();
  w /= w.sum();
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  for (int k = 0; k < dim_; ++k) rho += w(k) * pair_terms_[k];
  return rho;
}

DenseState thermal_state(const SparseHamiltonian& H, double beta_s) {
  return EdSolver(H).thermal_state(beta_s);
}

DenseState evolve_closed(const DenseState& rho0, const SparseHamiltonian& H_post, double t) {
  return EdSolver(H_post).evolve(rho0, t);
}

TwoSiteState reduce_pair(const DenseState& rho, int i, int j) {
  const long dim = rho.rows();
  const int n = static_cast<int>(std::lround(std::log2(static_cast<double>(dim))));
  if ((1L << n) != dim) throw std::invalid_argument("reduce_pair: dimension not a power of 2");
  if (i == j || i < 1 || j < 1 || i > n || j > n)
    throw std::out_of_range("reduce_pair: invalid sites");
  const long mi = 1L << (i - 1), mj = 1L << (j - 1);
  TwoSiteState out = TwoSiteState::Zero();
  for (long s = 0; s < dim; ++s) {
    const int a = (s & mi) ? 1 : 0;
    const int b = (s & mj) ? 1 : 0;
    for (int ap = 0; ap < 2; ++ap)
      for (int bp = 0; bp < 2; ++bp) {
        const long sp = (s & ~mi & ~mj) | (ap ? mi : 0) | (bp ? mj : 0);
        out(2 * a + b, 2 * ap + bp) += rho(s, sp);
      }
  }
  return out;
}

}  // namespace atxy
