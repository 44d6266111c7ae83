#pragma once

// Inverse rendering under a single point light. The driver alternates
// height-map normals, a global roughness fit on the normalized highlight
// distribution, per-cluster parameter fits and map blurring.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "svbrdf/brdf.hpp"
#include "svbrdf/clustering.hpp"
#include "svbrdf/error.hpp"
#include "svbrdf/geometry.hpp"
#include "svbrdf/heightfield.hpp"
#include "svbrdf/image.hpp"
#include "svbrdf/optimize.hpp"
#include "svbrdf/parallel.hpp"

namespace svbrdf {

inline constexpr double kMinRoughness = 0.001;

/// The spatially varying parameters shared by one cluster.
struct ClusterParams {
  Rgb base_color{0.5, 0.5, 0.5};
  double specular = 0.5;
  double specular_tint = 0.0;
  double anisotropic = 0.0;
  double aniso_axis = 0.0;
  bool flagged = false;  ///< last fit failed and the previous values were kept

  static constexpr std::size_t kCount = 7;
  std::array<double, kCount> to_array() const {
    return {base_color[0], base_color[1], base_color[2], specular, specular_tint, anisotropic, aniso_axis};
  }
  static ClusterParams from_array(std::span<const double> x) {
    ClusterParams p;
    p.base_color = Rgb(x[0], x[1], x[2]);
    p.specular = x[3];
    p.specular_tint = x[4];
    p.anisotropic = x[5];
    p.aniso_axis = x[6];
    return p;
  }
};

struct MaterialSolution {
  int rows = 0;
  int cols = 0;
  ImageD base_color;     ///< RGB
  ImageD specular;       ///< 1 channel each from here
  ImageD specular_tint;
  ImageD anisotropic;
  ImageD aniso_axis;
  ImageD normals;        ///< unit xyz
  ImageD tangents;       ///< unit xyz
  ImageD height;         ///< depth field behind the normals (may be empty)
  double roughness = 0.5;
  double metallic = 0.0;
  int k = 0;
  std::vector<int> labels;              ///< per pixel, empty when unclustered
  std::vector<ClusterParams> clusters;  ///< per-cluster values (next initial guesses)

  /// Uniform material with upward normals.
  static MaterialSolution uniform(int rows, int cols, const DisneyParams& p) {
    MaterialSolution s;
    s.rows = rows;
    s.cols = cols;
    s.base_color = ImageD(rows, cols, 3);
    for (std::size_t q = 0; q < s.base_color.pixel_count(); ++q)
      for (int ch = 0; ch < 3; ++ch) s.base_color.at_pixel(q, ch) = p.base_color[ch];
    s.specular = ImageD(rows, cols, 1, p.specular);
    s.specular_tint = ImageD(rows, cols, 1, p.specular_tint);
    s.anisotropic = ImageD(rows, cols, 1, p.anisotropic);
    s.aniso_axis = ImageD(rows, cols, 1, p.aniso_axis);
    s.normals = ImageD(rows, cols, 3, 0.0);
    for (std::size_t q = 0; q < s.normals.pixel_count(); ++q) s.normals.at_pixel(q, 2) = 1.0;
    s.roughness = p.roughness;
    s.metallic = p.metallic;
    s.update_tangents();
    return s;
  }

  Vec3 normal(std::size_t p) const { return {normals.at_pixel(p, 0), normals.at_pixel(p, 1), normals.at_pixel(p, 2)}; }
  Vec3 tangent(std::size_t p) const { return {tangents.at_pixel(p, 0), tangents.at_pixel(p, 1), tangents.at_pixel(p, 2)}; }

  DisneyParams params_at(std::size_t p) const {
    DisneyParams d;
    d.base_color = Rgb(base_color.at_pixel(p, 0), base_color.at_pixel(p, 1), base_color.at_pixel(p, 2));
    d.metallic = metallic;
    d.specular = specular.at_pixel(p);
    d.specular_tint = specular_tint.at_pixel(p);
    d.roughness = roughness;
    d.anisotropic = anisotropic.at_pixel(p);
    d.aniso_axis = aniso_axis.at_pixel(p);
    return d;
  }

  void set_normals(ImageD n) {
    normals = std::move(n);
    update_tangents();
  }

  /// Rebuilds the tangent map from normals and the anisoAxis map.
  void update_tangents() {
    tangents = ImageD(rows, cols, 3);
    for (std::size_t p = 0; p < tangents.pixel_count(); ++p) {
      const Vec3 t = tangent_from_axis(normal(p), aniso_axis.at_pixel(p));
      for (int ch = 0; ch < 3; ++ch) tangents.at_pixel(p, ch) = t(ch);
    }
  }

  /// Writes the per-cluster table into the parameter maps.
  void scatter_clusters() {
    if (labels.size() != static_cast<std::size_t>(rows) * cols) throw InvalidInputError("solution has no label map");
    for (std::size_t p = 0; p < labels.size(); ++p) {
      const auto& c = clusters[static_cast<std::size_t>(labels[p])];
      for (int ch = 0; ch < 3; ++ch) base_color.at_pixel(p, ch) = c.base_color[ch];
      specular.at_pixel(p) = c.specular;
      specular_tint.at_pixel(p) = c.specular_tint;
      anisotropic.at_pixel(p) = c.anisotropic;
      aniso_axis.at_pixel(p) = c.aniso_axis;
    }
    update_tangents();
  }

  /// Per-cluster means of the current maps become the cluster table.
  void gather_cluster_means() {
    if (labels.size() != static_cast<std::size_t>(rows) * cols) throw InvalidInputError("solution has no label map");
    std::vector<std::array<double, ClusterParams::kCount>> sums(static_cast<std::size_t>(k));
    for (auto& s : sums) s.fill(0.0);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t p = 0; p < labels.size(); ++p) {
      auto& s = sums[static_cast<std::size_t>(labels[p])];
      ++counts[static_cast<std::size_t>(labels[p])];
      s[0] += base_color.at_pixel(p, 0);
      s[1] += base_color.at_pixel(p, 1);
      s[2] += base_color.at_pixel(p, 2);
      s[3] += specular.at_pixel(p);
      s[4] += specular_tint.at_pixel(p);
      s[5] += anisotropic.at_pixel(p);
      s[6] += aniso_axis.at_pixel(p);
    }
    clusters.resize(static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < clusters.size(); ++j) {
      if (counts[j] == 0) continue;
      for (double& v : sums[j]) v /= static_cast<double>(counts[j]);
      const bool flagged = clusters[j].flagged;
      clusters[j] = ClusterParams::from_array(sums[j]);
      clusters[j].flagged = flagged;
    }
  }
};

// ---------------------------------------------------------------------------
// Forward model

/// Per-pixel lighting terms that do not depend on the material.
struct PixelLighting {
  Vec3 to_light;
  Vec3 to_camera;
  double irradiance_scale = 0.0;  ///< E / r^2
};

inline PixelLighting pixel_lighting(std::size_t p, int rows, int cols, const SceneGeometry& geom) {
  const auto r = static_cast<int>(p / static_cast<std::size_t>(cols));
  const auto c = static_cast<int>(p % static_cast<std::size_t>(cols));
  const Vec3 pos = pixel_to_world(r, c, rows, cols, geom.pixel_pitch);
  const auto ig = incident_geometry(pos, geom, Vec3::UnitZ());
  return {ig.to_light, ig.to_camera, geom.light_intensity / (ig.distance * ig.distance)};
}

/// Radiance of one pixel: f * E / r^2 * max(cos theta_i, 0).
inline Rgb shade_pixel(const DisneyParams& params, const ShadingFrame& frame, const PixelLighting& light) {
  const double cos_i = frame.n.dot(light.to_light);
  if (cos_i <= 0.0) return Rgb::Zero();
  return eval_disney(params, frame, light.to_light, light.to_camera) * (light.irradiance_scale * cos_i);
}

inline ImageD render_forward(const MaterialSolution& sol, const SceneGeometry& geom) {
  ImageD out(sol.rows, sol.cols, 3);
  parallel_for(static_cast<std::size_t>(sol.rows), [&](std::size_t r) {
    for (int c = 0; c < sol.cols; ++c) {
      const std::size_t p = r * static_cast<std::size_t>(sol.cols) + static_cast<std::size_t>(c);
      const auto light = pixel_lighting(p, sol.rows, sol.cols, geom);
      const auto frame = ShadingFrame::from_normal_tangent(sol.normal(p), sol.tangent(p));
      const Rgb l = shade_pixel(sol.params_at(p), frame, light);
      for (int ch = 0; ch < 3; ++ch) out.at_pixel(p, ch) = l[ch];
    }
  });
  return out;
}

inline double pseudo_huber(double residual, double delta) {
  if (!(delta > 0.0)) throw InvalidInputError("Pseudo-Huber delta must be positive");
  const double q = residual / delta;
  return delta * delta * (std::sqrt(1.0 + q * q) - 1.0);
}

// ---------------------------------------------------------------------------
// Global roughness

/// -sum target_hat * log(rendered_hat) over grayscale maps normalized to unit sum.
inline double cross_entropy(const ImageD& target, const ImageD& rendered) {
  const ImageD gt = to_gray(target), gr = to_gray(rendered);
  double st = 0.0, sr = 0.0;
  for (std::size_t p = 0; p < gt.pixel_count(); ++p) {
    st += std::max(0.0, gt.at_pixel(p));
    sr += std::max(0.0, gr.at_pixel(p));
  }
  if (!(st > 0.0)) throw InvalidInputError("target radiance has no energy");
  if (!(sr > 0.0)) return 1e3;  // nothing rendered: worse than any attainable value
  double h = 0.0;
  for (std::size_t p = 0; p < gt.pixel_count(); ++p) {
    const double q = std::max(0.0, gt.at_pixel(p)) / st;
    if (q <= 0.0) continue;
    const double r = std::max(std::max(0.0, gr.at_pixel(p)) / sr, 1e-300);
    h -= q * std::log(r);
  }
  return h;
}

/// Entropy of the normalized grayscale target; cross_entropy - this is the KL divergence.
inline double target_entropy(const ImageD& target) { return cross_entropy(target, target); }

struct RoughnessFit {
  double roughness = 0.5;
  double objective = 0.0;
  MinimizeResult optimizer;
};

inline RoughnessFit fit_global_roughness(const MaterialSolution& sol, const ImageD& target, const SceneGeometry& geom,
                                         double tol, int max_iterations = 50) {
  if (!target.same_size(sol.base_color)) throw InvalidInputError("target and solution sizes differ");
  MaterialSolution trial = sol;
  // The target entropy is a constant offset; removing it leaves the minimizer
  // unchanged and makes the relative stopping tolerance meaningful.
  const double offset = target_entropy(target);
  const Objective f = [&](std::span<const double> x) {
    trial.roughness = x[0];
    return cross_entropy(target, render_forward(trial, geom)) - offset;
  };
  const std::array<double, 1> lo{kMinRoughness}, hi{1.0};
  MinimizeOptions opt;
  opt.ftol = tol;
  opt.max_iterations = max_iterations;
  RoughnessFit out;
  out.optimizer = minimize_bounded(f, {std::clamp(sol.roughness, kMinRoughness, 1.0)}, lo, hi, opt);
  if (!out.optimizer.ok()) throw FitError("global roughness optimization failed");
  out.roughness = out.optimizer.x[0];
  out.objective = out.optimizer.value + offset;
  return out;
}

// ---------------------------------------------------------------------------
// Per-cluster fit

/// Pixels of one cluster with everything the objective needs precomputed.
struct ClusterSamples {
  std::vector<PixelLighting> lighting;
  std::vector<Vec3> normals;
  std::vector<Rgb> target;
};

inline ClusterSamples gather_cluster(int cluster_id, const MaterialSolution& sol, const ImageD& target,
                                     const SceneGeometry& geom) {
  ClusterSamples s;
  for (std::size_t p = 0; p < sol.labels.size(); ++p) {
    if (sol.labels[p] != cluster_id) continue;
    s.lighting.push_back(pixel_lighting(p, sol.rows, sol.cols, geom));
    s.normals.push_back(sol.normal(p));
    s.target.emplace_back(target.at_pixel(p, 0), target.at_pixel(p, 1), target.at_pixel(p, 2));
  }
  return s;
}

/// Mean over the cluster of the channel-summed Pseudo-Huber residual.
inline double cluster_objective(const ClusterParams& c, const ClusterSamples& s, double roughness, double metallic,
                                double huber_delta) {
  DisneyParams p;
  p.base_color = c.base_color;
  p.specular = c.specular;
  p.specular_tint = c.specular_tint;
  p.anisotropic = c.anisotropic;
  p.aniso_axis = c.aniso_axis;
  p.roughness = roughness;
  p.metallic = metallic;
  double loss = 0.0;
  for (std::size_t i = 0; i < s.normals.size(); ++i) {
    const Vec3& n = s.normals[i];
    const auto frame = ShadingFrame::from_normal_tangent(n, tangent_from_axis(n, c.aniso_axis));
    const Rgb l = shade_pixel(p, frame, s.lighting[i]);
    for (int ch = 0; ch < 3; ++ch) loss += pseudo_huber(l[ch] - s.target[i][ch], huber_delta);
  }
  return loss / static_cast<double>(s.normals.size());
}

struct ClusterFit {
  ClusterParams params;
  double initial_objective = 0.0;
  double objective = 0.0;
  MinimizeResult optimizer;
};

/// Fits the seven cluster scalars in [0,1] starting from sol.clusters[cluster_id].
/// Before optimizing, a handful of anisotropy axes are probed (the axis has no
/// gradient while anisotropic is 0) and the best probe seeds the optimizer when
/// it beats the given start.
inline ClusterFit fit_cluster_params(int cluster_id, const MaterialSolution& sol, const ImageD& target,
                                     const SceneGeometry& geom, double tol, double huber_delta, int max_iterations = 100) {
  if (cluster_id < 0 || cluster_id >= static_cast<int>(sol.clusters.size())) throw InvalidInputError("cluster id out of range");
  const ClusterSamples samples = gather_cluster(cluster_id, sol, target, geom);
  if (samples.normals.empty()) throw InvalidInputError("cannot fit an empty cluster");

  const ClusterParams start = sol.clusters[static_cast<std::size_t>(cluster_id)];
  const Objective f = [&](std::span<const double> x) {
    return cluster_objective(ClusterParams::from_array(x), samples, sol.roughness, sol.metallic, huber_delta);
  };

  ClusterFit out;
  out.params = start;
  auto x0 = start.to_array();
  out.initial_objective = f(x0);

  auto best = x0;
  double best_value = out.initial_objective;
  for (double axis : {0.0, 0.125, 0.25, 0.375}) {
    auto probe = x0;
    probe[5] = std::max(probe[5], 0.5);
    probe[6] = axis;
    const double v = f(probe);
    if (v < best_value) {
      best_value = v;
      best = probe;
    }
  }

  const std::array<double, ClusterParams::kCount> lo{0, 0, 0, 0, 0, 0, 0}, hi{1, 1, 1, 1, 1, 1, 1};
  MinimizeOptions opt;
  opt.ftol = tol;
  opt.max_iterations = max_iterations;
  out.optimizer = minimize_bounded(f, std::vector<double>(best.begin(), best.end()), lo, hi, opt);
  if (!out.optimizer.ok()) {
    out.params.flagged = true;
    out.objective = out.initial_objective;
    return out;
  }
  out.params = ClusterParams::from_array(out.optimizer.x);
  out.objective = out.optimizer.value;
  return out;
}

// ---------------------------------------------------------------------------
// Blur and reseed

/// Blurs every spatially varying map and reseeds the cluster table with the
/// per-cluster means of the blurred maps.
inline MaterialSolution blur_and_reseed(MaterialSolution sol, double sigma) {
  if (sigma < 0.0) throw InvalidInputError("blur sigma must be non-negative");
  if (sigma > 0.0) {
    sol.base_color = gaussian_blur(sol.base_color, sigma);
    sol.specular = gaussian_blur(sol.specular, sigma);
    sol.specular_tint = gaussian_blur(sol.specular_tint, sigma);
    sol.anisotropic = gaussian_blur(sol.anisotropic, sigma);
    sol.aniso_axis = gaussian_blur(sol.aniso_axis, sigma);
    sol.update_tangents();
  }
  if (!sol.labels.empty()) sol.gather_cluster_means();
  return sol;
}

// ---------------------------------------------------------------------------
// Driver

struct FitConfig {
  int n_iters = 5;
  std::vector<double> blur_sigmas;  ///< pixels, one per iteration, strictly decreasing
  std::vector<double> tolerances;   ///< optimizer relative tolerance, one per iteration
  int k = 500;
  double gamma_scale = 1.0;
  double height_sigma = 0.5;
  double huber_delta = 0.1;
  std::uint64_t seed = 0;
  int max_cluster_iterations = 100;
  int max_roughness_iterations = 50;
  KPrototypesOptions clustering;

  /// Blur sigma 16 * 2^(1-i) px at 256 px (scaled with the larger image side) and
  /// tolerance 1e-2 * 10^-(i-1) floored at 1e-6, for i = 1..n.
  static FitConfig defaults(int rows, int cols, int n_iters = 5) {
    FitConfig c;
    c.n_iters = n_iters;
    const double scale = std::max(rows, cols) / 256.0;
    for (int i = 1; i <= n_iters; ++i) {
      c.blur_sigmas.push_back(16.0 * std::pow(2.0, 1 - i) * scale);
      c.tolerances.push_back(std::max(1e-6, 1e-2 * std::pow(10.0, -(i - 1))));
    }
    return c;
  }

  void validate() const {
    if (n_iters < 1) throw InvalidInputError("n_iters must be at least 1");
    if (static_cast<int>(blur_sigmas.size()) != n_iters || static_cast<int>(tolerances.size()) != n_iters) {
      throw InvalidInputError("schedules must have n_iters entries");
    }
    for (std::size_t i = 1; i < blur_sigmas.size(); ++i)
      if (!(blur_sigmas[i] < blur_sigmas[i - 1])) throw InvalidInputError("blur schedule must be strictly decreasing");
    for (double s : blur_sigmas)
      if (s < 0.0) throw InvalidInputError("blur sigmas must be non-negative");
    for (double t : tolerances)
      if (!(t > 0.0)) throw InvalidInputError("tolerances must be positive");
    if (k < 1) throw InvalidInputError("k must be positive");
    if (!(gamma_scale >= 0.0)) throw InvalidInputError("gamma scale must be non-negative");
    if (!(huber_delta > 0.0)) throw InvalidInputError("Pseudo-Huber delta must be positive");
  }
};

struct StageReport {
  int iteration = 0;      ///< 1-based; 0 for clustering
  std::string stage;      ///< "cluster", "heightfield", "global", "clusters", "blur"
  double objective = 0.0;
  double seconds = 0.0;
  int flagged_clusters = 0;
  const MaterialSolution* solution = nullptr;  ///< state after the stage, valid during the callback
};

using StageCallback = std::function<void(const StageReport&)>;

struct PipelineResult {
  MaterialSolution solution;
  ClusterModel clusters;
  std::vector<double> residual_history;  ///< full-image residual after each per-cluster stage
  std::vector<double> roughness_history;
};

/// Mean channel-summed Pseudo-Huber residual over all pixels.
inline double image_residual(const ImageD& rendered, const ImageD& target, double huber_delta) {
  double s = 0.0;
  for (std::size_t p = 0; p < rendered.pixel_count(); ++p)
    for (int ch = 0; ch < 3; ++ch) s += pseudo_huber(rendered.at_pixel(p, ch) - target.at_pixel(p, ch), huber_delta);
  return s / static_cast<double>(rendered.pixel_count());
}

inline PipelineResult run_pipeline(const ImageD& ambient, const ImageD& target, const SceneGeometry& geom,
                                   const FitConfig& config, bool metallic, const StageCallback& report = {}) {
  config.validate();
  geom.validate();
  if (ambient.channels() != 3 || target.channels() != 3) throw InvalidInputError("ambient and target must be RGB");
  if (!ambient.same_size(target)) throw InvalidInputError("ambient and target sizes differ");

  using clock = std::chrono::steady_clock;
  PipelineResult out;
  auto emit = [&](int it, const char* stage, double objective, clock::time_point t0, int flagged = 0) {
    if (!report) return;
    report({it, stage, objective, std::chrono::duration<double>(clock::now() - t0).count(), flagged, &out.solution});
  };

  auto t0 = clock::now();
  const auto features = extract_features(ambient, config.seed);
  const double gamma = default_gamma(features) * config.gamma_scale;
  out.clusters = kprototypes_fit(features, config.k, gamma, config.seed, config.clustering);
  emit(0, "cluster", out.clusters.cost_history.empty() ? 0.0 : out.clusters.cost_history.back(), t0);

  DisneyParams init;
  init.metallic = metallic ? 1.0 : 0.0;
  init.specular = 0.5;
  init.roughness = 0.5;
  init.specular_tint = 0.0;
  init.anisotropic = 0.0;
  init.aniso_axis = 0.0;
  MaterialSolution& sol = out.solution;
  sol = MaterialSolution::uniform(ambient.rows(), ambient.cols(), init);
  for (std::size_t i = 0; i < sol.base_color.data().size(); ++i)
    sol.base_color.data()[i] = std::clamp(ambient.data()[i], 0.0, 1.0);
  sol.k = config.k;
  sol.labels = out.clusters.labels;
  sol.gather_cluster_means();

  for (int it = 1; it <= config.n_iters; ++it) {
    const double tol = config.tolerances[static_cast<std::size_t>(it - 1)];

    t0 = clock::now();
    try {
      HeightField field;
      sol.set_normals(normals_from_shading(ambient, sol.base_color, config.height_sigma, &field));
      sol.height = std::move(field.depth);
    } catch (const Error& e) {
      throw FitError(std::string("heightfield stage, iteration ") + std::to_string(it) + ": " + e.what());
    }
    emit(it, "heightfield", 0.0, t0);

    t0 = clock::now();
    try {
      const auto rf = fit_global_roughness(sol, target, geom, tol, config.max_roughness_iterations);
      sol.roughness = rf.roughness;
      out.roughness_history.push_back(rf.roughness);
      emit(it, "global", rf.objective, t0);
    } catch (const Error& e) {
      throw FitError(std::string("global stage, iteration ") + std::to_string(it) + ": " + e.what());
    }

    t0 = clock::now();
    std::vector<ClusterFit> fits(static_cast<std::size_t>(sol.k));
    std::vector<char> occupied(static_cast<std::size_t>(sol.k), 0);
    for (int l : sol.labels) occupied[static_cast<std::size_t>(l)] = 1;
    parallel_for(fits.size(), [&](std::size_t j) {
      if (!occupied[j]) return;
      fits[j] = fit_cluster_params(static_cast<int>(j), sol, target, geom, tol, config.huber_delta,
                                   config.max_cluster_iterations);
    });
    int flagged = 0;
    for (std::size_t j = 0; j < fits.size(); ++j) {
      if (!occupied[j]) continue;
      sol.clusters[j] = fits[j].params;
      flagged += fits[j].params.flagged;
    }
    sol.scatter_clusters();
    const double residual = image_residual(render_forward(sol, geom), target, config.huber_delta);
    out.residual_history.push_back(residual);
    emit(it, "clusters", residual, t0, flagged);

    t0 = clock::now();
    sol = blur_and_reseed(std::move(sol), config.blur_sigmas[static_cast<std::size_t>(it - 1)]);
    emit(it, "blur", 0.0, t0);
  }
  return out;
}

}  // namespace svbrdf
