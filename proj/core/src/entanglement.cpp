#include "atxy/entanglement.hpp"

#include <cmath>

namespace atxy {

TwoSiteState partial_transpose(const TwoSiteState& rho, Subsystem which) {
  TwoSiteState out;
  // index (a, b) -> 2a + b, a = first qubit, b = second qubit
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int ap = 0; ap < 2; ++ap)
        for (int bp = 0; bp < 2; ++bp) {
          if (which == Subsystem::A)
            out(2 * a + b, 2 * ap + bp) = rho(2 * ap + b, 2 * a + bp);
          else
            out(2 * a + b, 2 * ap + bp) = rho(2 * a + bp, 2 * ap + b);
        }
  return out;
}

EntanglementValue log_negativity(const TwoSiteState& rho) {
  const TwoSiteState pt = partial_transpose(rho, Subsystem::A);
  Eigen::SelfAdjointEigenSolver<TwoSiteState> es(pt, Eigen::EigenvaluesOnly);
  double neg = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev < -kNegativityEigTol) neg += -ev;
  }
  EntanglementValue v;
  v.negativity = neg;
  v.log_negativity = std::log2(2.0 * neg + 1.0);
  return v;
}

}  // namespace atxy
