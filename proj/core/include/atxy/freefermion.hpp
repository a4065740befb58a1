#ifndef ATXY_FREEFERMION_HPP
#define ATXY_FREEFERMION_HPP

#include <Eigen/Dense>

#include <memory>
#include <vector>

#include "atxy/correlators.hpp"
#include "atxy/model.hpp"

// Momentum-space solution of the chain after Jordan-Wigner and sublattice
// Fourier transforms. The quadratic Hamiltonian splits into independent
// blocks {a_p, b_p, a_{-p}, b_{-p}}; each block is treated exactly on its
// (at most 16-dimensional) Fock space.
//
// Finite chains resolve both fermion-parity sectors: the antiperiodic sector
// (half-odd-integer momenta) acts on even parity, the periodic sector
// (integer momenta) on odd parity, and observables combine the four
// parity-weighted traces. That reproduces exact diagonalization to machine
// precision at any even N. The thermodynamic proxy uses the antiperiodic
// sector alone with Wick contractions, converging exponentially in the grid
// size away from criticality.

namespace atxy {

enum class Sector { antiperiodic, periodic };

enum class BlockKind {
  four_mode,   // momenta {p, -p}, modes [a_p, b_p, a_{-p}, b_{-p}]
  self_hop,    // p = 0: modes [a, b], hopping only
  self_pair,   // p = M/2 (phi = pi/2): modes [a, b], pairing only
};

struct MomentumBlock {
  double p = 0.0;       // momentum index (integer or half-odd-integer)
  double phi = 0.0;     // 2 pi p / N
  BlockKind kind = BlockKind::four_mode;
  int n_modes = 4;
  Eigen::MatrixXcd h;   // Hermitian block operator on the 2^n_modes Fock space
};

// Momentum indices of a sector, M = N/2 values.
std::vector<double> momentum_indices(int N, Sector sector);

int block_count(int N, Sector sector);

// Block operator at the fields field_at(proto, t).
MomentumBlock build_block(const ModelParams& p, const FieldProtocol& proto, double t,
                          Sector sector, int block_index);

// exp(-beta_s H_p)/Tr[...] on the block Fock space (ground-energy shifted).
Eigen::MatrixXcd thermal_block_state(const MomentumBlock& block, double beta_s);

// U rho U^dagger with U = exp(-i H_post t).
Eigen::MatrixXcd evolve_block(const Eigen::MatrixXcd& state, const MomentumBlock& block_post,
                              double t);

// Exact finite-chain correlators for the nearest-neighbor pair
// (even_site, even_site + 1). Construction cost is per parameter set;
// at(beta, t) is cheap enough for dense scans.
class ExactChainCorrelators {
 public:
  ExactChainCorrelators(const ModelParams& p, const FieldProtocol& proto, int even_site = 2);
  ~ExactChainCorrelators();
  ExactChainCorrelators(ExactChainCorrelators&&) noexcept;

  CorrelatorSet at(double beta_s, double t) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Thermodynamic-limit proxy on a large momentum grid (sites divisible by 4).
class ProxyCorrelators {
 public:
  ProxyCorrelators(const ModelParams& p, const FieldProtocol& proto, int proxy_sites = 4096,
                   int even_site = 2);
  ~ProxyCorrelators();
  ProxyCorrelators(ProxyCorrelators&&) noexcept;

  int sites() const;
  CorrelatorSet at(double beta_s, double t) const;
  std::vector<CorrelatorSet> beta_scan(const std::vector<double>& betas, double t = 0.0) const;
  std::vector<CorrelatorSet> time_scan(double beta_s, const std::vector<double>& times) const;

  // Evaluate with automatic grid doubling until entries at sizes M and 2M
  // agree within tol.
  static CorrelatorSet converged(const ModelParams& p, const FieldProtocol& proto,
                                 double beta_s, double t, double tol = 1e-8,
                                 int start_sites = 4096, int max_sites = 32768);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot dispatcher: p.N == 0 selects the thermodynamic proxy (with the
// convergence check), a finite even N the exact two-sector path.
CorrelatorSet correlators(const ModelParams& p, const FieldProtocol& proto, double beta_s,
                          double t);

}  // namespace atxy

#endif
