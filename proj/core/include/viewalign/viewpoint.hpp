// Copyright 2026 The viewalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <iosfwd>

namespace viewalign {

/// Wraps an angle in degrees into (-180, 180]. Throws std::invalid_argument
/// for non-finite input.
double wrap_angle(double degrees);

/// Object pose seen from a camera on a sphere around the origin.
///
/// All three angles are degrees in (-180, 180]; the constructor wraps its
/// arguments, so every Viewpoint value is normalized.
class Viewpoint {
 public:
  constexpr Viewpoint() = default;
  Viewpoint(double azimuth, double elevation, double tilt);

  double azimuth() const { return azimuth_; }
  double elevation() const { return elevation_; }
  double tilt() const { return tilt_; }

  std::array<double, 3> angles() const { return {azimuth_, elevation_, tilt_}; }

  friend bool operator==(const Viewpoint&, const Viewpoint&) = default;

 private:
  double azimuth_ = 0.0;
  double elevation_ = 0.0;
  double tilt_ = 0.0;
};

/// Per-axis wrapped signed difference between two viewpoints.
class ViewpointDelta {
 public:
  constexpr ViewpointDelta() = default;
  ViewpointDelta(double d_azimuth, double d_elevation, double d_tilt);

  double d_azimuth() const { return d_azimuth_; }
  double d_elevation() const { return d_elevation_; }
  double d_tilt() const { return d_tilt_; }

  std::array<double, 3> components() const { return {d_azimuth_, d_elevation_, d_tilt_}; }
  double operator[](int axis) const { return components()[static_cast<std::size_t>(axis)]; }

  ViewpointDelta operator-() const;

  friend bool operator==(const ViewpointDelta&, const ViewpointDelta&) = default;

 private:
  double d_azimuth_ = 0.0;
  double d_elevation_ = 0.0;
  double d_tilt_ = 0.0;
};

/// wrap(b - a) per axis, so that apply_delta(a, delta(a, b)) == b.
ViewpointDelta delta(const Viewpoint& a, const Viewpoint& b);

Viewpoint apply_delta(const Viewpoint& a, const ViewpointDelta& d);

/// Row-major 3x3 rotation.
struct RotationMatrix {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }

  static RotationMatrix identity() { return {}; }
  static RotationMatrix about_x(double degrees);
  static RotationMatrix about_y(double degrees);
  static RotationMatrix about_z(double degrees);

  RotationMatrix transposed() const;
  double trace() const { return m[0] + m[4] + m[8]; }
  double determinant() const;
  std::array<double, 3> apply(const std::array<double, 3>& p) const;

  friend RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b);
};

// Camera convention used by every module:
//
//   world:  x right, y up, the object's front faces +z
//   camera: x right, y up, z towards the viewer; depth = distance - z_cam
//   world-to-camera rotation  R = Rz(tilt) * Rx(elevation) * Ry(azimuth)
//
// with right-handed active elementary rotations. Positive elevation places
// the camera above the object and positive azimuth turns the object's +x
// side away from the viewer.
RotationMatrix to_rotation(const Viewpoint& v);

/// Angle of the relative rotation R_a^T R_b, in degrees in [0, 180].
double geodesic_distance(const Viewpoint& a, const Viewpoint& b);

std::ostream& operator<<(std::ostream& os, const Viewpoint& v);
std::ostream& operator<<(std::ostream& os, const ViewpointDelta& d);

}  // namespace viewalign
