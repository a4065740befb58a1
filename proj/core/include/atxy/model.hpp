#ifndef ATXY_MODEL_HPP
#define ATXY_MODEL_HPP

#include <stdexcept>
#include <string>
#include <utility>

// Anisotropic XY chain in a uniform plus alternating transverse field.
// Units: J = 1 (energy), hbar = 1; times in units of hbar/J, inverse
// temperatures in units of 1/J. All user-facing parameters dimensionless.

namespace atxy {

struct ModelParams {
  double J = 1.0;        // exchange energy, fixed to 1 by convention
  double gamma = 0.5;    // xy anisotropy, gamma != 0
  double lambda1 = 0.0;  // uniform transverse field h1/J
  double lambda2 = 0.0;  // alternating transverse field h2/J
  int N = 0;             // site count (even, >= 4); 0 selects the thermodynamic proxy
  bool pbc = true;       // periodic boundary (always true in scope)

  void validate() const {
    if (gamma == 0.0) throw std::invalid_argument("ModelParams: gamma must be nonzero");
    if (N != 0 && (N < 4 || N % 2 != 0))
      throw std::invalid_argument("ModelParams: N must be even and >= 4");
    if (!pbc) throw std::invalid_argument("ModelParams: only periodic boundaries supported");
  }
};

// Sudden quench of the transverse fields: (h1_pre, h2_pre) for t <= 0,
// (h1_post, h2_post) for t > 0. Default post-quench fields are zero.
struct FieldProtocol {
  double h1_pre = 0.0;
  double h2_pre = 0.0;
  double h1_post = 0.0;
  double h2_post = 0.0;

  static FieldProtocol quench_to_zero(double h1, double h2) {
    return FieldProtocol{h1, h2, 0.0, 0.0};
  }
  static FieldProtocol hold(double h1, double h2) {
    return FieldProtocol{h1, h2, h1, h2};
  }
};

// (h1, h2) at time t.
std::pair<double, double> field_at(const FieldProtocol& proto, double t);

enum class Phase { PM_I, PM_II, AFM, BOUNDARY };

std::string to_string(Phase p);

// Phase label from the thermodynamic-limit boundaries
//   lambda1^2 = lambda2^2 + 1        (PM-I <-> AFM)
//   lambda2^2 = lambda1^2 + gamma^2  (PM-II <-> AFM)
// BOUNDARY is assigned within tolerance 1e-12 of either defining polynomial.
Phase classify_phase(const ModelParams& p);

// Non-negative root of the factorization surface
//   lambda1^2 = lambda2^2 + (1 - gamma^2).
// Throws std::domain_error when the radicand is negative (no real FS point).
double lambda1_on_fs(double gamma, double lambda2);

// Companion solve of the same surface for lambda2 given lambda1;
// requires lambda1^2 >= 1 - gamma^2.
double lambda2_on_fs(double gamma, double lambda1);

inline constexpr double kPhaseBoundaryTol = 1e-12;

}  // namespace atxy

#endif
