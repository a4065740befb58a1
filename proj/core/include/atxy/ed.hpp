#ifndef ATXY_ED_HPP
#define ATXY_ED_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "atxy/model.hpp"
#include "atxy/rdm.hpp"

// Exact diagonalization backend for finite chains (4 <= N <= 14, N even).
// Serves as the brute-force oracle for the free-fermion solver and as the
// Hamiltonian backend for the open-system integrator.

namespace atxy {

using DenseState = Eigen::MatrixXcd;
using SparseHamiltonian = Eigen::SparseMatrix<double>;

inline constexpr int kEdMaxSites = 14;

// H per the chain definition: bond prefactor J(1 +/- gamma)/4 on sigma^x
// sigma^x / sigma^y sigma^y, field prefactor h_i/2 with
// h_i = h1 + (-1)^i h2, 1-based sites, site N+1 == site 1.
// Basis: bit (i-1) of the index holds site i, bit value 0 = spin up.
SparseHamiltonian build_hamiltonian(const ModelParams& p, double h1, double h2);

// exp(-beta H)/Z via full spectral decomposition with ground-energy shift.
DenseState thermal_state(const SparseHamiltonian& H, double beta_s);

// U rho0 U^dagger with U = exp(-i H_post t).
DenseState evolve_closed(const DenseState& rho0, const SparseHamiltonian& H_post, double t);

// Partial trace onto sites (i, j), 1-based, i first tensor slot.
TwoSiteState reduce_pair(const DenseState& rho, int i, int j);

// Cached spectral decomposition; use for repeated thermal states, repeated
// evolution times, or beta scans of a pair reduction.
class EdSolver {
 public:
  explicit EdSolver(const SparseHamiltonian& H);

  const Eigen::VectorXd& eigenvalues() const { return evals_; }
  const Eigen::MatrixXd& eigenvectors() const { return evecs_; }
  double ground_energy() const { return evals_(0); }
  double ground_gap() const { return evals_(1) - evals_(0); }

  DenseState thermal_state(double beta_s) const;
  DenseState evolve(const DenseState& rho0, double t) const;

  // Thermal reduction onto a pair without forming the full state; the
  // per-eigenvector 4x4 contributions are cached, so beta scans are cheap.
  TwoSiteState thermal_pair_state(double beta_s, int i, int j) const;

 private:
  int dim_;
  Eigen::VectorXd evals_;
  Eigen::MatrixXd evecs_;
  mutable int cached_i_ = -1, cached_j_ = -1;
  mutable std::vector<Eigen::Matrix4cd> pair_terms_;
};

}  // namespace atxy

#endif
