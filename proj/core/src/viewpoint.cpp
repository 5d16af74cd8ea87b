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

#include "viewalign/viewpoint.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace viewalign {
namespace {

double radians(double degrees) { return degrees * std::numbers::pi / 180.0; }

}  // namespace

double wrap_angle(double degrees) {
  if (!std::isfinite(degrees)) {
    throw std::invalid_argument("wrap_angle: non-finite angle");
  }
  double r = std::fmod(degrees, 360.0);
  if (r <= -180.0) {
    r += 360.0;
  } else if (r > 180.0) {
    r -= 360.0;
  }
  // Normalize -0 so equal viewpoints compare and print identically.
  return r == 0.0 ? 0.0 : r;
}

Viewpoint::Viewpoint(double azimuth, double elevation, double tilt)
    : azimuth_(wrap_angle(azimuth)), elevation_(wrap_angle(elevation)), tilt_(wrap_angle(tilt)) {}

ViewpointDelta::ViewpointDelta(double d_azimuth, double d_elevation, double d_tilt)
    : d_azimuth_(wrap_angle(d_azimuth)),
      d_elevation_(wrap_angle(d_elevation)),
      d_tilt_(wrap_angle(d_tilt)) {}

ViewpointDelta ViewpointDelta::operator-() const {
  return {-d_azimuth_, -d_elevation_, -d_tilt_};
}

ViewpointDelta delta(const Viewpoint& a, const Viewpoint& b) {
  return {b.azimuth() - a.azimuth(), b.elevation() - a.elevation(), b.tilt() - a.tilt()};
}

Viewpoint apply_delta(const Viewpoint& a, const ViewpointDelta& d) {
  return {a.azimuth() + d.d_azimuth(), a.elevation() + d.d_elevation(), a.tilt() + d.d_tilt()};
}

RotationMatrix RotationMatrix::about_x(double degrees) {
  const double c = std::cos(radians(degrees));
  const double s = std::sin(radians(degrees));
  return {{1, 0, 0, 0, c, -s, 0, s, c}};
}

RotationMatrix RotationMatrix::about_y(double degrees) {
  const double c = std::cos(radians(degrees));
  const double s = std::sin(radians(degrees));
  return {{c, 0, s, 0, 1, 0, -s, 0, c}};
}

RotationMatrix RotationMatrix::about_z(double degrees) {
  const double c = std::cos(radians(degrees));
  const double s = std::sin(radians(degrees));
  return {{c, -s, 0, s, c, 0, 0, 0, 1}};
}

RotationMatrix RotationMatrix::transposed() const {
  RotationMatrix t;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
  }
  return t;
}

double RotationMatrix::determinant() const {
  const auto& a = *this;
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

std::array<double, 3> RotationMatrix::apply(const std::array<double, 3>& p) const {
  return {m[0] * p[0] + m[1] * p[1] + m[2] * p[2],
          m[3] * p[0] + m[4] * p[1] + m[5] * p[2],
          m[6] * p[0] + m[7] * p[1] + m[8] * p[2]};
}

RotationMatrix operator*(const RotationMatrix& a, const RotationMatrix& b) {
  RotationMatrix out;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      out(r, c) = a(r, 0) * b(0, c) + a(r, 1) * b(1, c) + a(r, 2) * b(2, c);
    }
  }
  return out;
}

RotationMatrix to_rotation(const Viewpoint& v) {
  return RotationMatrix::about_z(v.tilt()) * RotationMatrix::about_x(v.elevation()) *
         RotationMatrix::about_y(v.azimuth());
}

double geodesic_distance(const Viewpoint& a, const Viewpoint& b) {
  const RotationMatrix rel = to_rotation(a).transposed() * to_rotation(b);
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

std::ostream& operator<<(std::ostream& os, const Viewpoint& v) {
  return os << '(' << v.azimuth() << ", " << v.elevation() << ", " << v.tilt() << ')';
}

std::ostream& operator<<(std::ostream& os, const ViewpointDelta& d) {
  return os << "d(" << d.d_azimuth() << ", " << d.d_elevation() << ", " << d.d_tilt() << ')';
}

}  // namespace viewalign
