#pragma once

// Height from shading with the dark-is-deep curve, accumulated over several
// Gaussian scales, then normals by Sobel gradients.

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "svbrdf/error.hpp"
#include "svbrdf/geometry.hpp"
#include "svbrdf/image.hpp"

namespace svbrdf {

inline constexpr double kShadingClamp = 1e-3;

/// Single-channel shading S = gray(ambient) / gray(baseColor), rescaled to mean 0.5
/// and clamped below at kShadingClamp.
inline ImageD shading_image(const ImageD& ambient, const ImageD& base_color) {
  if (!ambient.same_size(base_color)) throw InvalidInputError("ambient and baseColor sizes differ");
  const ImageD ga = to_gray(ambient);
  const ImageD gb = to_gray(base_color);
  double max_b = 0.0;
  for (double v : gb.data()) max_b = std::max(max_b, v);
  if (!(max_b > 0.0)) throw DegenerateInputError("baseColor is black everywhere");

  ImageD s(ga.rows(), ga.cols(), 1);
  double sum = 0.0;
  for (std::size_t p = 0; p < s.pixel_count(); ++p) {
    s.at_pixel(p) = std::max(0.0, ga.at_pixel(p)) / std::max(gb.at_pixel(p), kShadingClamp);
    sum += s.at_pixel(p);
  }
  const double mean = sum / static_cast<double>(s.pixel_count());
  if (!(mean > 0.0)) throw DegenerateInputError("ambient image is black everywhere");
  for (double& v : s.data()) v = std::max(kShadingClamp, v * (0.5 / mean));
  return s;
}

/// Dark-is-deep depth of a shading value: pits of cylinders below 1/2,
/// hemisphere protrusions above. Input clamped to [kShadingClamp, 1].
inline double depth_curve(double s) noexcept {
  s = std::clamp(s, kShadingClamp, 1.0);
  return s <= 0.5 ? std::sqrt(1.0 / s - 1.0) : 2.0 * (1.0 - s);
}

struct HeightField {
  ImageD depth;
  double sigma = 0.5;
  std::vector<double> radii;
};

/// d = sigma * sum_i r_i (D(l_i) - 1) with l_i = 0.5 S_i / S_{i+1} on all but the
/// coarsest level and l_N = S_N, S_i being S blurred at radius r_i.
inline HeightField multiscale_depth(const ImageD& shading, double sigma, std::vector<double> radii = {1.0, 2.0, 4.0, 8.0}) {
  if (shading.channels() != 1) throw InvalidInputError("shading image must be single-channel");
  if (radii.empty()) throw InvalidInputError("at least one depth scale is required");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (!(radii[i] > radii[i - 1])) throw InvalidInputError("depth scales must be ascending");

  std::vector<ImageD> levels;
  levels.reserve(radii.size());
  for (double r : radii) levels.push_back(gaussian_blur(shading, r));

  HeightField field;
  field.sigma = sigma;
  field.radii = radii;
  field.depth = ImageD(shading.rows(), shading.cols(), 1, 0.0);
  const std::size_t n = radii.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < shading.pixel_count(); ++p) {
      const double l = i + 1 < n ? 0.5 * levels[i].at_pixel(p) / std::max(levels[i + 1].at_pixel(p), kShadingClamp)
                                 : levels[i].at_pixel(p);
      field.depth.at_pixel(p) += radii[i] * (depth_curve(l) - 1.0);
    }
  }
  for (double& v : field.depth.data()) v *= sigma;
  return field;
}

/// Unit normals (x, y, z per pixel, world frame) of the depth field:
/// n ~ (dd/dx, dd/dy, 1) with x along columns and y up the image.
/// Gradients are in pixel units, so the pitch only documents the frame.
inline ImageD normals_from_depth(const HeightField& field, double /*pixel_pitch*/ = 1.0) {
  const ImageD dx = sobel_cols(field.depth);
  const ImageD drow = sobel_rows(field.depth);
  ImageD n(field.depth.rows(), field.depth.cols(), 3);
  for (std::size_t p = 0; p < n.pixel_count(); ++p) {
    const Eigen::Vector3d v = Eigen::Vector3d(dx.at_pixel(p), -drow.at_pixel(p), 1.0).normalized();
    for (int ch = 0; ch < 3; ++ch) n.at_pixel(p, ch) = v(ch);
  }
  return n;
}

/// Shading -> depth -> normals in one step.
inline ImageD normals_from_shading(const ImageD& ambient, const ImageD& base_color, double sigma,
                                   HeightField* field_out = nullptr) {
  HeightField field = multiscale_depth(shading_image(ambient, base_color), sigma);
  ImageD normals = normals_from_depth(field);
  if (field_out) *field_out = std::move(field);
  return normals;
}

}  // namespace svbrdf
