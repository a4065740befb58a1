#ifndef ATXY_CORRELATORS_HPP
#define ATXY_CORRELATORS_HPP

// Everything needed to assemble a nearest-neighbor even-odd two-site state:
// z magnetizations on the even and odd site and the two-site correlators
// T^{ab} = <sigma^a_e sigma^b_o>. The transverse magnetizations and the
// remaining mixed correlators vanish identically for the states in scope.

namespace atxy {

struct CorrelatorSet {
  double mz_e = 0.0;
  double mz_o = 0.0;
  double txx = 0.0;
  double tyy = 0.0;
  double tzz = 0.0;
  double txy = 0.0;  // <sigma^x_e sigma^y_o>, nonzero only for t > 0
  double tyx = 0.0;  // <sigma^y_e sigma^x_o>, nonzero only for t > 0

  double max_abs() const;
};

}  // namespace atxy

#endif
