#pragma once

// Synthetic capture sessions with known ground truth: piecewise-constant
// materials on a Voronoi layout, smooth shading bumps, a point-lit radiance
// map and matching LDR photos.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "svbrdf/fitting.hpp"
#include "svbrdf/heightfield.hpp"
#include "svbrdf/radiometry.hpp"

namespace svbrdf {

/// 8-bit rendering of a radiance map through g^-1 at the given exposure.
/// Zero radiance maps to 0; values are rounded and clamped to [0, 255].
inline Image8 radiance_to_ldr(const ImageD& radiance, double exposure, const ResponseCurve& curve) {
  if (radiance.channels() != 3) throw InvalidInputError("radiance map must be RGB");
  Image8 out(radiance.rows(), radiance.cols(), 3);
  for (std::size_t p = 0; p < radiance.pixel_count(); ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      const double l = radiance.at_pixel(p, ch) * exposure;
      const double z = l > 0.0 ? curve.pixel_value(std::log(l), ch) : 0.0;
      out.at_pixel(p, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(z), 0L, 255L));
    }
  }
  return out;
}

/// Forward render of a solution mapped to an 8-bit preview.
inline Image8 render_preview(const MaterialSolution& sol, const SceneGeometry& geom, double exposure,
                             const ResponseCurve& curve) {
  return radiance_to_ldr(render_forward(sol, geom), exposure, curve);
}

struct SynthSpec {
  int rows = 256;
  int cols = 256;
  std::uint64_t seed = 1;
  double roughness = 0.3;
  bool metallic = false;
  double bump_amplitude = 0.2;   ///< peak deviation of the shading field from 0.5
  double height_sigma = 0.5;
  double cell_px = 24.0;         ///< typical Voronoi cell diameter
  double f35_mm = 26.0;
  double r_perp_m = 0.30;
  Vec3 light_pos{0.08, 0.05, 1.0};
  double light_intensity = 10.0;
  double photo_gamma = 2.2;
  std::vector<ClusterParams> materials;  ///< empty = built-in four-material palette
};

struct SynthScene {
  ImageD ambient;          ///< RGB in linear units, baseColor times shading / 0.5
  ImageD point_radiance;   ///< RGB target radiance
  ImageD shading;          ///< true shading field, mean 0.5
  MaterialSolution truth;  ///< labels are material ids, clusters the material table
  CameraSpec camera;
  SceneGeometry geom;
  ResponseCurve curve;
  double exposure = 1.0;   ///< capture exposure of point_photo
  Image8 point_photo;
  Image8 ambient_photo;
};

inline std::vector<ClusterParams> default_synth_materials() {
  auto make = [](double r, double g, double b, double spec, double tint, double aniso, double axis) {
    ClusterParams p;
    p.base_color = Rgb(r, g, b);
    p.specular = spec;
    p.specular_tint = tint;
    p.anisotropic = aniso;
    p.aniso_axis = axis;
    return p;
  };
  return {make(0.70, 0.25, 0.15, 0.6, 0.3, 0.0, 0.0), make(0.20, 0.45, 0.70, 0.4, 0.0, 0.6, 0.15),
          make(0.80, 0.75, 0.40, 0.8, 0.5, 0.0, 0.0), make(0.35, 0.60, 0.30, 0.5, 0.2, 0.8, 0.35)};
}

inline SynthScene synth_generate(const SynthSpec& spec) {
  if (spec.rows < 40 || spec.cols < 40) throw InvalidInputError("synthetic scenes need at least 40x40 pixels");
  const auto materials = spec.materials.empty() ? default_synth_materials() : spec.materials;
  const int m = static_cast<int>(materials.size());
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  SynthScene s;
  s.camera = {spec.f35_mm, spec.cols, spec.rows};
  s.geom.pixel_pitch = pixel_pitch(s.camera);
  s.geom.light_pos = spec.light_pos;
  s.geom.r_perp = spec.r_perp_m;
  s.geom.light_intensity = spec.light_intensity;

  // Voronoi layout; material ids cycle over sites so every material appears.
  const int sites = std::max(m, static_cast<int>(spec.rows * spec.cols / (spec.cell_px * spec.cell_px)));
  std::vector<std::array<double, 2>> site_pos(static_cast<std::size_t>(sites));
  std::vector<int> site_mat(static_cast<std::size_t>(sites));
  for (int i = 0; i < sites; ++i) {
    site_pos[static_cast<std::size_t>(i)] = {uni(rng) * spec.rows, uni(rng) * spec.cols};
    site_mat[static_cast<std::size_t>(i)] = i % m;
  }
  std::shuffle(site_mat.begin(), site_mat.end(), rng);

  // Smooth shading bumps with zero-mean, normalized to mean 0.5.
  const int blobs = std::max(4, sites / 2);
  ImageD bumps(spec.rows, spec.cols, 1, 0.0);
  for (int b = 0; b < blobs; ++b) {
    const double cr = uni(rng) * spec.rows, cc = uni(rng) * spec.cols;
    const double radius = (0.3 + 0.7 * uni(rng)) * spec.cell_px * 0.5;
    const double sign = uni(rng) < 0.5 ? -1.0 : 1.0;
    for (int r = 0; r < spec.rows; ++r) {
      for (int c = 0; c < spec.cols; ++c) {
        const double d2 = ((r - cr) * (r - cr) + (c - cc) * (c - cc)) / (radius * radius);
        if (d2 < 16.0) bumps(r, c) += sign * std::exp(-0.5 * d2);
      }
    }
  }
  double peak = 0.0;
  for (double v : bumps.data()) peak = std::max(peak, std::abs(v));
  s.shading = ImageD(spec.rows, spec.cols, 1, 0.5);
  if (peak > 0.0 && spec.bump_amplitude > 0.0) {
    double mean = 0.0;
    for (std::size_t p = 0; p < bumps.pixel_count(); ++p) {
      s.shading.at_pixel(p) = 0.5 + spec.bump_amplitude * bumps.at_pixel(p) / peak;
      mean += s.shading.at_pixel(p);
    }
    mean /= static_cast<double>(bumps.pixel_count());
    for (double& v : s.shading.data()) v *= 0.5 / mean;
  }

  DisneyParams base;
  base.roughness = spec.roughness;
  base.metallic = spec.metallic ? 1.0 : 0.0;
  s.truth = MaterialSolution::uniform(spec.rows, spec.cols, base);
  s.truth.k = m;
  s.truth.clusters = materials;
  s.truth.labels.resize(s.truth.base_color.pixel_count());
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int i = 0; i < sites; ++i) {
        const auto& sp = site_pos[static_cast<std::size_t>(i)];
        const double d = (r - sp[0]) * (r - sp[0]) + (c - sp[1]) * (c - sp[1]);
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      s.truth.labels[static_cast<std::size_t>(r) * spec.cols + c] = site_mat[static_cast<std::size_t>(best)];
    }
  }

  HeightField field = multiscale_depth(s.shading, spec.height_sigma);
  s.truth.normals = normals_from_depth(field);
  s.truth.height = std::move(field.depth);
  s.truth.scatter_clusters();

  s.ambient = ImageD(spec.rows, spec.cols, 3);
  for (std::size_t p = 0; p < s.ambient.pixel_count(); ++p)
    for (int ch = 0; ch < 3; ++ch)
      s.ambient.at_pixel(p, ch) = s.truth.base_color.at_pixel(p, ch) * s.shading.at_pixel(p) / 0.5;

  s.point_radiance = render_forward(s.truth, s.geom);

  s.curve = ResponseCurve::from_gamma(spec.photo_gamma);
  double max_l = 0.0;
  for (double v : s.point_radiance.data()) max_l = std::max(max_l, v);
  s.exposure = max_l > 0.0 ? 0.8 / max_l : 1.0;
  s.point_photo = radiance_to_ldr(s.point_radiance, s.exposure, s.curve);
  s.ambient_photo = Image8(spec.rows, spec.cols, 3);
  for (std::size_t i = 0; i < s.ambient.data().size(); ++i)
    s.ambient_photo.data()[i] = static_cast<std::uint8_t>(std::clamp(std::lround(255.0 * s.ambient.data()[i]), 0L, 255L));
  return s;
}

}  // namespace svbrdf
