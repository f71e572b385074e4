#include "posekit/orientation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace posekit {

double wrap_degrees(double deg) {
  if (!std::isfinite(deg)) {
    throw std::invalid_argument("wrap_degrees: non-finite angle");
  }
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) {
    r += 360.0;
  }
  // fmod can land exactly on 360 after the correction when deg is a tiny
  // negative number; fold it back onto 0.
  if (r >= 360.0) {
    r = 0.0;
  }
  return r;
}

SphericalOrientation::SphericalOrientation(double theta, double phi) {
  if (!std::isfinite(theta) || theta < 0.0 || theta > 180.0) {
    throw std::invalid_argument("SphericalOrientation: polar angle must be in [0, 180], got " +
                                std::to_string(theta));
  }
  theta_deg = theta;
  phi_deg = wrap_degrees(phi);
}

UnitAngle::UnitAngle(double v, AngleKind k) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
    throw std::invalid_argument("UnitAngle: value must be in [0, 1], got " + std::to_string(v));
  }
  value = v;
  kind = k;
}

std::pair<UnitAngle, UnitAngle> normalize(const SphericalOrientation& o) {
  return {UnitAngle(o.theta_deg / 180.0, AngleKind::Polar),
          UnitAngle(o.phi_deg / 360.0, AngleKind::Azimuthal)};
}

SphericalOrientation to_degrees(const UnitAngle& theta, const UnitAngle& phi) {
  if (theta.kind != AngleKind::Polar || phi.kind != AngleKind::Azimuthal) {
    throw std::invalid_argument("to_degrees: expected (polar, azimuthal) pair");
  }
  return SphericalOrientation(theta.value * 180.0, phi.value == 1.0 ? 0.0 : phi.value * 360.0);
}

double circular_distance_unit(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b)) {
    throw std::invalid_argument("circular_distance_unit: non-finite input");
  }
  if (a < 0.0 || a > 1.0 || b < 0.0 || b > 1.0) {
    throw std::invalid_argument("circular_distance_unit: inputs must be in [0, 1]");
  }
  const double d = std::abs(a - b);
  return std::min(d, 1.0 - d);
}

double circular_distance_deg(double a_deg, double b_deg) {
  const double a = wrap_degrees(a_deg);
  const double b = wrap_degrees(b_deg);
  const double d = std::abs(a - b);
  return std::min(d, 360.0 - d);
}

SphericalOrientation flip_orientation(const SphericalOrientation& o) {
  const double phi = o.phi_deg == 0.0 ? 0.0 : 360.0 - o.phi_deg;
  return SphericalOrientation(o.theta_deg, phi);
}

}  // namespace posekit
