#ifndef ATXY_OPENQUANTUM_HPP
#define ATXY_OPENQUANTUM_HPP

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "atxy/ed.hpp"

// Repeated-quantum-interaction open dynamics: a stream of fresh two-level
// bath qubits (H_E = B sigma^z, inverse temperature beta_E) couples to chosen
// "door" spins, yielding a Markovian master equation
//   drho/dt = -i[H, rho] + D(rho),
// integrated with fixed-step RK4.

namespace atxy {

// eta operators entering the dissipator. "ladder" uses
// eta^alpha = sigma^x + i(-1)^alpha sigma^y (raising/lowering operators),
// which yields a completely positive trace-preserving generator.
// "literal" uses eta^alpha = sigma^x + (-1)^alpha sigma^y, which preserves
// the trace but not Hermiticity term by term; it is kept for comparison.
enum class LadderChoice { ladder, literal };

enum class NoiseKind { dissipative, dephasing };

struct BathSpec {
  double beta_e = 10.0;  // environment inverse temperature, units 1/J
  double B = 1.0;        // bath qubit energy
  double k = 1.0;        // coupling constant (dimensionless)
  std::vector<int> doors = {1};
  bool include_absorption = false;  // i = 1 terms; negligible at beta_e B = 10
  NoiseKind noise_kind = NoiseKind::dissipative;
  double dephasing_rate = 1.0;  // used by the dephasing variant only

  double partition_function() const {
    return std::exp(beta_e * B) + std::exp(-beta_e * B);
  }
  // dissipation/absorption rate prefactors (2k/Z_E) e^{+-beta_e B}
  double rate_down() const { return 2.0 * k / partition_function() * std::exp(beta_e * B); }
  double rate_up() const { return 2.0 * k / partition_function() * std::exp(-beta_e * B); }
  double rate_dephasing() const {
    return 2.0 * dephasing_rate / partition_function() * std::exp(beta_e * B);
  }

  void validate(int n_sites) const;
};

// D(rho) for the given bath; dimensions of rho fix the register size.
DenseState dissipator(const DenseState& rho, const BathSpec& bath,
                      LadderChoice choice = LadderChoice::ladder);

// -i[H, rho] + D(rho)
DenseState rhs(const DenseState& rho, const SparseHamiltonian& H, const BathSpec& bath,
               LadderChoice choice = LadderChoice::ladder);

struct TrajectoryPoint {
  double t = 0.0;
  std::vector<double> pair_ln;
  double trace_err = 0.0;
  double min_eig = 0.0;
  bool min_eig_checked = false;
};

struct Trajectory {
  std::vector<std::pair<int, int>> pairs;
  std::vector<TrajectoryPoint> points;
  DenseState final_state;

  double max_ln(size_t pair_index) const;
  // total observed time with LN above the threshold
  double support_duration(size_t pair_index, double threshold) const;
  double final_ln(size_t pair_index) const;
  double worst_trace_err() const;
  double worst_min_eig() const;
};

struct IntegratorOptions {
  double dt = 1e-3;
  double observe_interval = 0.05;
  // min-eigenvalue diagnostic cadence in observations; 0 = auto
  // (every observation up to dim 256, every 20th above)
  int min_eig_stride = 0;
  double trace_tol = 1e-8;
  double positivity_tol = 1e-7;
  bool check_integrity = true;
};

// Thrown when trace or positivity drifts beyond tolerance; indicates the
// step size is too large for the requested accuracy.
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Trajectory integrate(const DenseState& rho0, const SparseHamiltonian& H, const BathSpec& bath,
                     LadderChoice choice, double t_final,
                     const std::vector<std::pair<int, int>>& observe_pairs,
                     const IntegratorOptions& opts = {});

}  // namespace atxy

#endif
