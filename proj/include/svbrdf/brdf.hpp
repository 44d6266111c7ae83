#pragma once

// Disney-style BRDF without subsurface, clearcoat and sheen lobes:
// a retro-reflective diffuse term plus an anisotropic GGX specular lobe.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cmath>
#include <numbers>

#include "svbrdf/error.hpp"
#include "svbrdf/geometry.hpp"

namespace svbrdf {

using Rgb = Eigen::Array3d;

struct DisneyParams {
  Rgb base_color{0.5, 0.5, 0.5};
  double metallic = 0.0;  ///< 0 or 1, tagged per sample
  double specular = 0.5;
  double specular_tint = 0.0;
  double roughness = 0.5;
  double anisotropic = 0.0;
  double aniso_axis = 0.0;  ///< tangent azimuth / 2pi
};

struct ShadingFrame {
  Vec3 n{0.0, 0.0, 1.0};
  Vec3 t{1.0, 0.0, 0.0};
  Vec3 b{0.0, 1.0, 0.0};

  static ShadingFrame from_normal_tangent(const Vec3& n, const Vec3& t) { return {n, t, n.cross(t)}; }
};

inline constexpr double kAlphaFloor = 0.001;
inline constexpr double kGrayCardAlbedo = 0.18;

/// BRDF of an 18% Lambertian gray card.
inline constexpr double lambertian_reference() noexcept { return kGrayCardAlbedo / std::numbers::pi; }

namespace detail {

inline double pow5(double x) noexcept {
  const double x2 = x * x;
  return x2 * x2 * x;
}

}  // namespace detail

/// Anisotropic roughness axes (alpha_x along t, alpha_y along b).
inline std::pair<double, double> anisotropic_alphas(double roughness, double anisotropic) noexcept {
  const double aspect = std::sqrt(1.0 - 0.9 * anisotropic);
  const double r2 = roughness * roughness;
  return {std::max(kAlphaFloor, r2 / aspect), std::max(kAlphaFloor, r2 * aspect)};
}

/// Specular colour at normal incidence.
inline Rgb specular_base_color(const DisneyParams& p) noexcept {
  const double lum = 0.3 * p.base_color[0] + 0.6 * p.base_color[1] + 0.1 * p.base_color[2];
  const Rgb tint = lum > 1e-6 ? Rgb(p.base_color / lum) : Rgb(1.0, 1.0, 1.0);
  const Rgb nonmetal = 0.08 * p.specular * (tint * p.specular_tint + (1.0 - p.specular_tint));
  return nonmetal * (1.0 - p.metallic) + p.base_color * p.metallic;
}

/// Reflectance (1/sr) for light direction l and view direction v, both unit
/// and pointing away from the surface. Below-hemisphere inputs give zero.
inline Rgb eval_disney(const DisneyParams& p, const ShadingFrame& frame, const Vec3& l, const Vec3& v) noexcept {
  const double ln = l.dot(frame.n);
  const double vn = v.dot(frame.n);
  if (ln <= 0.0 || vn <= 0.0) return Rgb::Zero();

  const Vec3 h = (l + v).normalized();
  const double lh = l.dot(h);
  const double hn = h.dot(frame.n);

  const double fd90 = 0.5 + 2.0 * lh * lh * p.roughness;
  const double diffuse_shape =
      (1.0 + (fd90 - 1.0) * detail::pow5(1.0 - ln)) * (1.0 + (fd90 - 1.0) * detail::pow5(1.0 - vn));
  const Rgb f_diff = p.base_color * ((1.0 - p.metallic) / std::numbers::pi * diffuse_shape);

  const auto [ax, ay] = anisotropic_alphas(p.roughness, p.anisotropic);
  const double ht = h.dot(frame.t) / ax;
  const double hb = h.dot(frame.b) / ay;
  const double denom = ht * ht + hb * hb + hn * hn;
  const double d_s = 1.0 / (std::numbers::pi * ax * ay * denom * denom);

  const double schlick = detail::pow5(1.0 - lh);
  const Rgb f_s = (1.0 - schlick) * specular_base_color(p) + schlick;

  const double lt = ax * l.dot(frame.t), lb = ay * l.dot(frame.b);
  const double vt = ax * v.dot(frame.t), vb = ay * v.dot(frame.b);
  const double g_s = 1.0 / (ln + std::sqrt(lt * lt + lb * lb + ln * ln)) / (vn + std::sqrt(vt * vt + vb * vb + vn * vn));

  return f_diff + d_s * g_s * f_s;
}

/// Unit tangent perpendicular to n whose azimuth is aniso_axis * 2pi.
inline Vec3 tangent_from_axis(const Vec3& n, double aniso_axis) {
  if (!(n.z() > 0.0)) throw InvalidInputError("tangent construction needs a normal with positive z");
  const double phi = aniso_axis * 2.0 * std::numbers::pi;
  const double cp = std::cos(phi), sp = std::sin(phi);
  const double proj = n.x() * cp + n.y() * sp;
  const double len = std::sqrt(proj * proj + n.z() * n.z());
  const double sin_t = n.z() / len;
  const double cos_t = -proj / len;
  return {sin_t * cp, sin_t * sp, cos_t};
}

}  // namespace svbrdf
