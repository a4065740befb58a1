#include "atxy/model.hpp"

#include <cmath>

namespace atxy {

std::pair<double, double> field_at(const FieldProtocol& proto, double t) {
  if (t <= 0.0) return {proto.h1_pre, proto.h2_pre};
  return {proto.h1_post, proto.h2_post};
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::PM_I: return "PM-I";
    case Phase::PM_II: return "PM-II";
    case Phase::AFM: return "AFM";
    case Phase::BOUNDARY: return "BOUNDARY";
  }
  return "?";
}

Phase classify_phase(const ModelParams& p) {
  p.validate();
  const double l1s = p.lambda1 * p.lambda1;
  const double l2s = p.lambda2 * p.lambda2;
  const double g2 = p.gamma * p.gamma;
  const double f_pm1 = l1s - (l2s + 1.0);   // > 0 in PM-I
  const double f_pm2 = l2s - (l1s + g2);    // > 0 in PM-II
  if (std::abs(f_pm1) <= kPhaseBoundaryTol || std::abs(f_pm2) <= kPhaseBoundaryTol)
    return Phase::BOUNDARY;
  if (f_pm1 > 0.0) return Phase::PM_I;
  if (f_pm2 > 0.0) return Phase::PM_II;
  return Phase::AFM;
}

double lambda1_on_fs(double gamma, double lambda2) {
  const double radicand = lambda2 * lambda2 + 1.0 - gamma * gamma;
  if (radicand < 0.0)
    throw std::domain_error("lambda1_on_fs: no real factorization point, "
                            "lambda2^2 + 1 - gamma^2 < 0");
  return std::sqrt(radicand);
}

double lambda2_on_fs(double gamma, double lambda1) {
  const double radicand = lambda1 * lambda1 - (1.0 - gamma * gamma);
  if (radicand < 0.0)
    throw std::domain_error("lambda2_on_fs: no real factorization point, "
                            "lambda1^2 - 1 + gamma^2 < 0");
  return std::sqrt(radicand);
}

}  // namespace atxy
