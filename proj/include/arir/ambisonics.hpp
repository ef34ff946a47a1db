/*
Copyright 2026 The arir Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#ifndef ARIR_AMBISONICS_HPP_
#define ARIR_AMBISONICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "arir/errors.hpp"

namespace arir {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat34 = Eigen::Matrix<double, 3, 4>;
using ShVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr int kMaxOrder = 7;

// Number of ACN channels of a full-sphere expansion of order |order|.
constexpr int sh_channels(int order) { return (order + 1) * (order + 1); }

constexpr int acn_index(int degree, int m) { return degree * degree + degree + m; }

// Degree l of the ACN channel |acn|.
inline int acn_degree(int acn) {
  return static_cast<int>(std::floor(std::sqrt(static_cast<double>(acn))));
}

// Unit direction in the right-handed frame: +x front, +y left, +z up.
class Direction {
 public:
  Direction() : v_(1.0, 0.0, 0.0) {}

  // Normalizes |v|. Throws GeometryError for a zero or non-finite vector.
  static Direction from_vector(const Vec3& v) {
    const double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw GeometryError("direction from zero or non-finite vector");
    }
    return Direction(v / norm);
  }

  // Takes |v| as is; for values that are already unit vectors, e.g. when
  // loading stored data, so that no rounding is introduced.
  static Direction from_unit(const Vec3& v) {
    if (!v.allFinite() || std::abs(v.norm() - 1.0) > 1e-9) {
      throw GeometryError("direction is not a unit vector");
    }
    return Direction(v);
  }

  static Direction from_angles(double azimuth, double zenith) {
    return Direction(Vec3(std::cos(azimuth) * std::sin(zenith),
                          std::sin(azimuth) * std::sin(zenith),
                          std::cos(zenith)));
  }

  const Vec3& vec() const { return v_; }
  double x() const { return v_.x(); }
  double y() const { return v_.y(); }
  double z() const { return v_.z(); }

  // atan2(y, x) in (-pi, pi]; 0 at the poles.
  double azimuth() const {
    if (v_.x() == 0.0 && v_.y() == 0.0) return 0.0;
    return std::atan2(v_.y(), v_.x());
  }

  // arccos(z) in [0, pi].
  double zenith() const { return std::acos(std::clamp(v_.z(), -1.0, 1.0)); }

  double angle_to(const Direction& other) const {
    return std::atan2(v_.cross(other.v_).norm(), v_.dot(other.v_));
  }

 private:
  explicit Direction(const Vec3& unit) : v_(unit) {}

  Vec3 v_;
};

// Real spherical harmonics, ACN order, orthonormal (N3D) normalization,
// no Condon-Shortley phase. Supports 0 <= order <= kMaxOrder.
inline ShVector real_sh(int order, const Direction& dir) {
  if (order < 0 || order > kMaxOrder) {
    throw ConfigError("spherical harmonic order must be in [0, 7]");
  }
  ShVector y(sh_channels(order));
  const double x = dir.x();
  const double yy = dir.y();
  const double cos_zen = std::clamp(dir.z(), -1.0, 1.0);
  const double sin_zen = std::hypot(x, yy);
  const double cos_az = sin_zen > 0.0 ? x / sin_zen : 1.0;
  const double sin_az = sin_zen > 0.0 ? yy / sin_zen : 0.0;

  // cos(m az), sin(m az) by angle addition.
  std::array<double, kMaxOrder + 1> cos_m{};
  std::array<double, kMaxOrder + 1> sin_m{};
  cos_m[0] = 1.0;
  sin_m[0] = 0.0;
  for (int m = 1; m <= order; ++m) {
    cos_m[m] = cos_m[m - 1] * cos_az - sin_m[m - 1] * sin_az;
    sin_m[m] = sin_m[m - 1] * cos_az + cos_m[m - 1] * sin_az;
  }

  // Associated Legendre functions without Condon-Shortley phase,
  // legendre[l][m] = P_l^m(cos zenith).
  std::array<std::array<double, kMaxOrder + 1>, kMaxOrder + 1> legendre{};
  legendre[0][0] = 1.0;
  for (int m = 1; m <= order; ++m) {
    legendre[m][m] = legendre[m - 1][m - 1] * (2.0 * m - 1.0) * sin_zen;
  }
  for (int m = 0; m < order; ++m) {
    legendre[m + 1][m] = cos_zen * (2.0 * m + 1.0) * legendre[m][m];
  }
  for (int m = 0; m <= order; ++m) {
    for (int l = m + 2; l <= order; ++l) {
      legendre[l][m] = ((2.0 * l - 1.0) * cos_zen * legendre[l - 1][m] -
                        (l + m - 1.0) * legendre[l - 2][m]) /
                       (l - m);
    }
  }

  for (int l = 0; l <= order; ++l) {
    for (int m = 0; m <= l; ++m) {
      // (l-m)!/(l+m)!
      double factorial_ratio = 1.0;
      for (int k = l - m + 1; k <= l + m; ++k) factorial_ratio /= k;
      const double norm =
          std::sqrt((2.0 * l + 1.0) / (4.0 * kPi) * factorial_ratio);
      const double base = norm * legendre[l][m];
      if (m == 0) {
        y(acn_index(l, 0)) = base;
      } else {
        y(acn_index(l, m)) = std::numbers::sqrt2 * base * cos_m[m];
        y(acn_index(l, -m)) = std::numbers::sqrt2 * base * sin_m[m];
      }
    }
  }
  return y;
}

inline Mat3 rotation_z(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return r;
}

// Positive angles tilt a vector in the xz-plane towards larger zenith.
inline Mat3 rotation_y(double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  Mat3 r;
  r << c, 0.0, s,
       0.0, 1.0, 0.0,
       -s, 0.0, c;
  return r;
}

// Four unit directions of a regular tetrahedron, one per column. Column 0 is
// the look direction of the set.
struct SteeringSet {
  Mat34 directions;

  Direction column(int i) const {
    return Direction::from_vector(directions.col(i));
  }
};

inline SteeringSet tetrahedron_prototype() {
  SteeringSet set;
  const double third = 1.0 / 3.0;
  set.directions << 1.0, -third, -third, -third,
                    0.0, std::sqrt(2.0 / 3.0), 0.0, -std::sqrt(2.0 / 3.0),
                    0.0, std::sqrt(2.0 / 9.0), -std::sqrt(8.0 / 9.0),
                    std::sqrt(2.0 / 9.0);
  return set;
}

// Rotates the prototype so that its first column points at |look|. The
// prototype's +x column sits at zenith pi/2, so the tilt is (zenith - pi/2).
inline SteeringSet steer_tetrahedron(const Direction& look) {
  static const SteeringSet prototype = tetrahedron_prototype();
  const Mat3 rotation = rotation_z(look.azimuth()) *
                        rotation_y(look.zenith() - kPi / 2.0);
  SteeringSet set;
  set.directions = rotation * prototype.directions;
  return set;
}

// (N+1)^2 x 4 matrix whose columns are real_sh(order, column i of |set|).
inline Eigen::MatrixXd sh_reencode_matrix(const SteeringSet& set, int order) {
  Eigen::MatrixXd y(sh_channels(order), 4);
  for (int i = 0; i < 4; ++i) {
    y.col(i) = real_sh(order, set.column(i));
  }
  return y;
}

// Per-channel SN3D -> N3D factors, sqrt(2l + 1) for the degree l of each
// ACN channel up to |order|.
inline Eigen::VectorXd sn3d_to_n3d_gains(int order) {
  Eigen::VectorXd gains(sh_channels(order));
  for (int acn = 0; acn < gains.size(); ++acn) {
    gains(acn) = std::sqrt(2.0 * acn_degree(acn) + 1.0);
  }
  return gains;
}

}  // namespace arir

#endif  // ARIR_AMBISONICS_HPP_
