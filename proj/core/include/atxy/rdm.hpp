#ifndef ATXY_RDM_HPP
#define ATXY_RDM_HPP

#include <Eigen/Dense>

#include "atxy/correlators.hpp"

namespace atxy {

// 4x4 density operator of an even-odd qubit pair, even site first slot.
using TwoSiteState = Eigen::Matrix4cd;

// Pauli matrices in the (up, down) basis, sigma^z = diag(1, -1).
const Eigen::Matrix2cd& pauli_x();
const Eigen::Matrix2cd& pauli_y();
const Eigen::Matrix2cd& pauli_z();

// rho = (1/4)[I + mz_e sz(x)I + mz_o I(x)sz + sum_a T^aa sa(x)sa
//             + T^xy sx(x)sy + T^yx sy(x)sx].
// Eigenvalues in (-1e-6, 0) caused by upstream round-off are clipped to zero
// with renormalization; anything below -1e-6 throws std::runtime_error
// ("unphysical correlators"), since it signals an upstream bug.
TwoSiteState assemble(const CorrelatorSet& c);

// Inverse of assemble: Pauli expectations of an arbitrary two-site state.
CorrelatorSet extract(const TwoSiteState& rho);

inline constexpr double kUnphysicalTol = 1e-6;

}  // namespace atxy

#endif
