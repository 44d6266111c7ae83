#pragma once

// Normalized capture frame: the material lies in z = 0, the camera sits at
// (0, 0, 1) looking down -z, and one pixel step is pixel_pitch units in x/y.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "svbrdf/error.hpp"
#include "svbrdf/image.hpp"

namespace svbrdf {

using Vec3 = Eigen::Vector3d;

/// Diagonal of 135-format film in millimetres.
inline constexpr double kFilmDiagonalMm = 43.3;

struct CameraSpec {
  double f35_mm = 0.0;  ///< 35 mm equivalent focal length
  int image_width = 0;
  int image_height = 0;
  static constexpr double d35_mm = kFilmDiagonalMm;

  void validate() const {
    if (!(f35_mm > 0.0) || !std::isfinite(f35_mm)) throw InvalidInputError("f35 must be positive");
    if (image_width < 2 || image_height < 2) throw InvalidInputError("image dimensions must be at least 2x2");
  }
};

struct SceneGeometry {
  Vec3 camera_pos{0.0, 0.0, 1.0};
  Vec3 light_pos{0.0, 0.0, 1.0};  ///< z is always 1
  double pixel_pitch = 0.0;       ///< normalized units per pixel
  double r_perp = 0.0;            ///< physical camera-to-plane distance (m)
  double light_intensity = 0.0;   ///< E in the normalized frame

  void validate() const {
    if (!(pixel_pitch > 0.0)) throw InvalidInputError("pixel pitch must be positive");
    if (!(r_perp > 0.0)) throw InvalidInputError("r_perp must be positive");
    if (!(light_intensity >= 0.0)) throw InvalidInputError("light intensity must be non-negative");
    if (std::abs(light_pos.z() - 1.0) > 1e-12) throw InvalidInputError("light must lie in the z = 1 plane");
  }
};

struct PixelIndex {
  int row = 0;
  int col = 0;
};

/// Diagonal half angle of view in radians.
inline double half_aov(const CameraSpec& camera) {
  if (!(camera.f35_mm > 0.0)) throw InvalidInputError("f35 must be positive");
  return std::atan(CameraSpec::d35_mm / (2.0 * camera.f35_mm));
}

/// Normalized-frame distance covered by one pixel.
inline double pixel_pitch(const CameraSpec& camera) {
  camera.validate();
  const double diag_px = std::hypot(static_cast<double>(camera.image_width), static_cast<double>(camera.image_height));
  return CameraSpec::d35_mm / (camera.f35_mm * diag_px);
}

/// Pixel centre on the z = 0 plane; image centre is the origin, +col is +x, +row is -y.
inline Vec3 pixel_to_world(double row, double col, int rows, int cols, double pitch) noexcept {
  return {(col - 0.5 * (cols - 1)) * pitch, (0.5 * (rows - 1) - row) * pitch, 0.0};
}

inline Vec3 pixel_to_world(PixelIndex pixel, const CameraSpec& camera, double pitch) {
  if (pixel.row < 0 || pixel.col < 0 || pixel.row >= camera.image_height || pixel.col >= camera.image_width) {
    throw InvalidInputError("pixel outside image bounds");
  }
  return pixel_to_world(pixel.row, pixel.col, camera.image_height, camera.image_width, pitch);
}

/// Inverse of pixel_to_world; returns continuous (row, col).
inline Eigen::Vector2d world_to_pixel(const Vec3& p, int rows, int cols, double pitch) noexcept {
  return {0.5 * (rows - 1) - p.y() / pitch, p.x() / pitch + 0.5 * (cols - 1)};
}

/// Light position from a point-lit photo: intensity-weighted centroid of the
/// brightest 10% of pixels (by count), lifted to z = 1.
inline Vec3 estimate_light_position(const ImageD& gray, const CameraSpec& camera, double pitch) {
  if (gray.channels() != 1) throw InvalidInputError("light estimation expects a single-channel image");
  if (gray.rows() != camera.image_height || gray.cols() != camera.image_width) {
    throw InvalidInputError("light estimation image does not match camera dimensions");
  }
  const std::size_t n = gray.pixel_count();
  if (n == 0) throw DegenerateInputError("empty image");
  const auto [lo, hi] = std::minmax_element(gray.data().begin(), gray.data().end());
  if (*hi - *lo <= 0.0) throw DegenerateInputError("constant image carries no light position");

  const std::size_t take = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take - 1), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const double va = gray.at_pixel(a), vb = gray.at_pixel(b);
                     return va != vb ? va > vb : a < b;
                   });

  double wsum = 0.0, row = 0.0, col = 0.0;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t p = order[i];
    const double w = std::max(0.0, gray.at_pixel(p));
    wsum += w;
    row += w * static_cast<double>(p / static_cast<std::size_t>(gray.cols()));
    col += w * static_cast<double>(p % static_cast<std::size_t>(gray.cols()));
  }
  if (!(wsum > 0.0)) throw DegenerateInputError("brightest pixels have zero intensity");
  Vec3 pos = pixel_to_world(row / wsum, col / wsum, gray.rows(), gray.cols(), pitch);
  pos.z() = 1.0;
  return pos;
}

struct IncidentGeometry {
  Vec3 to_light;         ///< unit vector from the surface point toward the light
  Vec3 to_camera;        ///< unit vector from the surface point toward the camera
  double distance = 0;   ///< surface point to light
  double cos_incident = 0;  ///< n . to_light, unclamped
};

inline IncidentGeometry incident_geometry(const Vec3& p, const SceneGeometry& geom, const Vec3& normal) {
  const Vec3 dl = geom.light_pos - p;
  const double r = dl.norm();
  if (!(r > 1e-12)) throw DegenerateInputError("surface point coincides with the light");
  const Vec3 dv = geom.camera_pos - p;
  const double rv = dv.norm();
  if (!(rv > 1e-12)) throw DegenerateInputError("surface point coincides with the camera");
  IncidentGeometry out;
  out.to_light = dl / r;
  out.to_camera = dv / rv;
  out.distance = r;
  out.cos_incident = normal.dot(out.to_light);
  return out;
}

}  // namespace svbrdf
