#ifndef ATXY_ENTANGLEMENT_HPP
#define ATXY_ENTANGLEMENT_HPP

#include <Eigen/Dense>

#include "atxy/rdm.hpp"

namespace atxy {

struct EntanglementValue {
  double negativity = 0.0;       // sum of |negative eigenvalues| of rho^(T_A)
  double log_negativity = 0.0;   // log2(2 N + 1)
};

enum class Subsystem { A, B };  // A = even-site qubit (first slot)

// Blockwise transpose over the chosen qubit. Hermitian, trace preserving.
TwoSiteState partial_transpose(const TwoSiteState& rho, Subsystem which = Subsystem::A);

// Negativity and logarithmic negativity of a two-qubit state. Partial-transpose
// eigenvalues in (-1e-12, 0) are treated as zero so that round-off does not
// pollute the zero-entanglement region maps.
EntanglementValue log_negativity(const TwoSiteState& rho);

inline constexpr double kNegativityEigTol = 1e-12;

}  // namespace atxy

#endif
