#pragma once

#include <utility>

namespace posekit {

/// Which kind of angle a normalized value represents. Azimuthal values live
/// on a circle (0 and 1 are the same direction), polar values are linear.
enum class AngleKind { Azimuthal, Polar };

/// Body or head orientation as spherical angles on the unit sphere.
/// theta_deg is the polar angle in [0, 180]; phi_deg the azimuth in [0, 360).
/// Azimuth inputs outside [0, 360) are reduced mod 360 at construction;
/// polar inputs outside [0, 180] are rejected.
struct SphericalOrientation {
  double theta_deg = 0.0;
  double phi_deg = 0.0;

  SphericalOrientation() = default;
  SphericalOrientation(double theta, double phi);
};

/// An angle normalized to [0, 1]. Azimuthal values treat 0 and 1 as the
/// same direction; polar values do not wrap.
struct UnitAngle {
  double value = 0.0;
  AngleKind kind = AngleKind::Polar;

  UnitAngle() = default;
  UnitAngle(double v, AngleKind k);
};

/// Map degrees to unit-normalized angles: theta/180, phi/360.
std::pair<UnitAngle, UnitAngle> normalize(const SphericalOrientation& o);

/// Inverse of normalize. A unit azimuth of exactly 1 maps back to 0 degrees.
SphericalOrientation to_degrees(const UnitAngle& theta, const UnitAngle& phi);

/// min(1 - |a-b|, |a-b|) for a, b in [0, 1]. Result in [0, 0.5], symmetric.
double circular_distance_unit(double a, double b);

/// Shortest angular distance between two azimuths in degrees. Inputs are
/// reduced mod 360; result in [0, 180].
double circular_distance_deg(double a_deg, double b_deg);

/// Mirror about the sagittal plane: phi -> (360 - phi) mod 360, theta kept.
/// Involution: flip(flip(o)) == o.
SphericalOrientation flip_orientation(const SphericalOrientation& o);

/// Reduce any finite angle in degrees into [0, 360).
double wrap_degrees(double deg);

}  // namespace posekit
