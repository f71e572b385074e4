#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace posekit {

/// Scalar function of a flat input vector, used by the finite-difference
/// harness. The span passed in is a scratch copy the harness may perturb.
using ScalarFn = std::function<double(std::span<const double>)>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

/// Central finite differences against an analytic gradient. Per component:
///   rel_err = |a - fd| / max(1e-12, |a| + |fd|)
GradCheckReport check_gradient(const ScalarFn& f, std::span<const double> x,
                               std::span<const double> analytic_grad, double eps);

/// One differentiable operation verified over random trials.
struct GradSuiteEntry {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// Runs finite-difference checks on every differentiable head and loss:
/// softargmax_1d (K in {4, 16, 64}), softargmax_2d (8x8), decode_depth,
/// loss_phi / loss_theta (sampled away from their kinks by at least 1e-4),
/// bce_visibility, and uncertainty_total (w.r.t. losses and u parameters).
std::vector<GradSuiteEntry> run_gradcheck_suite(int trials, double eps, double tolerance,
                                                std::uint64_t seed);

}  // namespace posekit
