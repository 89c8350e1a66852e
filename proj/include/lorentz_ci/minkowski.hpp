#pragma once

// Linear algebra of R^{2,1} with signature (+,+,-), z timelike.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <utility>

#include "lorentz_ci/error.hpp"

namespace lorentz_ci {

struct MinkVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static MinkVector checked(double x, double y, double z) {
    if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
      throw Error(ErrorCode::InvalidArgument, "non-finite MinkVector coordinate");
    }
    return {x, y, z};
  }

  bool is_finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }

  MinkVector& operator+=(const MinkVector& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  MinkVector& operator-=(const MinkVector& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  MinkVector& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }
};

inline MinkVector operator+(MinkVector a, const MinkVector& b) { return a += b; }
inline MinkVector operator-(MinkVector a, const MinkVector& b) { return a -= b; }
inline MinkVector operator-(const MinkVector& a) { return {-a.x, -a.y, -a.z}; }
inline MinkVector operator*(double s, MinkVector a) { return a *= s; }
inline MinkVector operator*(MinkVector a, double s) { return a *= s; }
inline MinkVector operator/(MinkVector a, double s) { return a *= (1.0 / s); }

inline double lorentz_dot(const MinkVector& a, const MinkVector& b) {
  return a.x * b.x + a.y * b.y - a.z * b.z;
}

inline double euclid_dot(const MinkVector& a, const MinkVector& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

inline MinkVector euclid_cross(const MinkVector& a, const MinkVector& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double euclid_norm(const MinkVector& a) { return std::sqrt(euclid_dot(a, a)); }

/// Level r = sqrt(z^2 - x^2 - y^2) of a point of the solid future cone; empty
/// outside the open cone (the outside-marker).
inline std::optional<double> cone_level(const MinkVector& p) {
  if (!(p.z > 0.0)) return std::nullopt;
  // (z-x)(z+x) - y^2 keeps precision for points far out on the hyperboloid
  const double q = (p.z - p.x) * (p.z + p.x) - p.y * p.y;
  if (!(q > 0.0)) return std::nullopt;
  return std::sqrt(q);
}

inline bool in_future_cone(const MinkVector& p) { return cone_level(p).has_value(); }

/// Radial projection onto the Klein disc {z = 1}.
inline std::pair<double, double> klein_project(const MinkVector& p) {
  if (!(p.z > 0.0)) throw Error(ErrorCode::NonPositiveHeight, "klein_project needs z > 0");
  return {p.x / p.z, p.y / p.z};
}

/// Point of the unit hyperboloid above a Klein-disc point.
inline MinkVector klein_lift(double qx, double qy) {
  const double s = 1.0 - qx * qx - qy * qy;
  if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "Klein point outside the unit disc");
  const double z = 1.0 / std::sqrt(s);
  return {qx * z, qy * z, z};
}

/// Future-pointing unit timelike normal of the spacelike plane spanned by u1, u2.
inline MinkVector timelike_unit_normal(const MinkVector& u1, const MinkVector& u2) {
  const double g11 = lorentz_dot(u1, u1);
  const double g12 = lorentz_dot(u1, u2);
  const double g22 = lorentz_dot(u2, u2);
  const double gram = g11 * g22 - g12 * g12;
  if (!(g11 > 0.0) || !(gram > 1e-12)) {
    throw Error(ErrorCode::DegenerateTangentPlane, "tangent plane is not spacelike");
  }
  // J (u1 x u2) is Lorentz-orthogonal to both: <J c, a> = c . a
  const MinkVector c = euclid_cross(u1, u2);
  MinkVector n{c.x, c.y, -c.z};
  const double nn = lorentz_dot(n, n);
  n *= 1.0 / std::sqrt(-nn);
  if (n.z < 0.0) n = -n;
  return n;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 mat3_identity() { return {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}; }

inline Mat3 mat3_mul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return c;
}

inline MinkVector mat3_apply(const Mat3& m, const MinkVector& v) {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
          m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

inline double mat3_det(const Mat3& m) {
  return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
         m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
         m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
}

inline double mat3_max_abs_diff(const Mat3& a, const Mat3& b) {
  double d = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(a[i][j] - b[i][j]));
  return d;
}

/// Element of SO°(2,1). The invariants (m^T J m = J, det m = 1, future
/// preserving) are checked on construction from a raw matrix.
class Isometry21 {
 public:
  Isometry21() : m_(mat3_identity()) {}

  static Isometry21 from_matrix(const Mat3& m, double tol = 1e-12) {
    const Isometry21 g(m);
    const double scale = std::max(1.0, g.max_entry() * g.max_entry());
    if (g.lorentz_defect() > tol * scale) {
      throw Error(ErrorCode::InvalidArgument, "matrix does not preserve the Minkowski form");
    }
    if (std::abs(mat3_det(m) - 1.0) > tol * scale) {
      throw Error(ErrorCode::InvalidArgument, "matrix determinant is not 1");
    }
    if (!(m[2][2] > 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "matrix reverses time orientation");
    }
    return g;
  }

  static Isometry21 rotation(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return Isometry21(Mat3{{{c, -s, 0}, {s, c, 0}, {0, 0, 1}}});
  }

  /// Boost along x with the given rapidity.
  static Isometry21 boost_x(double rapidity) {
    const double c = std::cosh(rapidity), s = std::sinh(rapidity);
    return Isometry21(Mat3{{{c, 0, s}, {0, 1, 0}, {s, 0, c}}});
  }

  const Mat3& matrix() const { return m_; }

  MinkVector apply(const MinkVector& v) const { return mat3_apply(m_, v); }
  MinkVector operator()(const MinkVector& v) const { return apply(v); }

  Isometry21 operator*(const Isometry21& o) const { return Isometry21(mat3_mul(m_, o.m_)); }

  /// Exact inverse J m^T J.
  Isometry21 inverse() const {
    Mat3 r{};
    static constexpr double sig[3] = {1.0, 1.0, -1.0};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r[i][j] = sig[i] * m_[j][i] * sig[j];
    return Isometry21(r);
  }

  /// max |m^T J m - J| entrywise.
  double lorentz_defect() const {
    static constexpr double sig[3] = {1.0, 1.0, -1.0};
    double d = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += m_[k][i] * sig[k] * m_[k][j];
        d = std::max(d, std::abs(s - (i == j ? sig[i] : 0.0)));
      }
    }
    return d;
  }

  double max_entry() const {
    double d = 0.0;
    for (const auto& row : m_)
      for (double v : row) d = std::max(d, std::abs(v));
    return d;
  }

  double trace() const { return m_[0][0] + m_[1][1] + m_[2][2]; }

 private:
  explicit Isometry21(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// R(theta) B(rapidity) R(theta)^{-1}: a boost along the direction at angle theta.
inline Isometry21 boost_rotation(double axis_angle, double rapidity) {
  return Isometry21::rotation(axis_angle) * Isometry21::boost_x(rapidity) *
         Isometry21::rotation(-axis_angle);
}

/// Projective action of g on the Klein disc.
inline std::pair<double, double> klein_action(const Isometry21& g, double qx, double qy) {
  return klein_project(g.apply(MinkVector{qx, qy, 1.0}));
}

}  // namespace lorentz_ci
