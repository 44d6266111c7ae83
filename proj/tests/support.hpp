#pragma once

// Independent oracles and scene builders shared by the unit tests and the
// acceptance runner. Nothing here calls the code path it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "svbrdf/brdf.hpp"
#include "svbrdf/clustering.hpp"
#include "svbrdf/geometry.hpp"
#include "svbrdf/image.hpp"
#include "svbrdf/radiometry.hpp"

namespace svbrdf::testing {

inline Vec3 random_hemisphere(std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec3 v;
  do {
    v = Vec3(g(rng), g(rng), std::abs(g(rng)));
  } while (v.z() < 0.05 || v.norm() < 1e-6);
  return v.normalized();
}

inline DisneyParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DisneyParams p;
  p.base_color = Rgb(u(rng), u(rng), u(rng));
  p.specular = u(rng);
  p.specular_tint = u(rng);
  p.roughness = 0.05 + 0.95 * u(rng);
  p.anisotropic = u(rng);
  p.aniso_axis = u(rng);
  return p;
}

/// Metallic specular lobe written out directly: anisotropic GGX D, separable
/// Smith G folded with the 1/(4 l.n v.n) factor, Schlick Fresnel towards baseColor.
inline Rgb metal_specular_lobe(const DisneyParams& p, const Vec3& n, const Vec3& t, const Vec3& l, const Vec3& v) {
  const Vec3 b = n.cross(t);
  const double aspect = std::sqrt(1.0 - 0.9 * p.anisotropic);
  const double ax = std::max(0.001, p.roughness * p.roughness / aspect);
  const double ay = std::max(0.001, p.roughness * p.roughness * aspect);
  const Vec3 h = (l + v).normalized();
  const double q = std::pow(h.dot(t) / ax, 2) + std::pow(h.dot(b) / ay, 2) + std::pow(h.dot(n), 2);
  const double d = 1.0 / (3.14159265358979323846 * ax * ay * q * q);
  auto g1 = [&](const Vec3& w) {
    return 1.0 / (w.dot(n) + std::sqrt(std::pow(ax * w.dot(t), 2) + std::pow(ay * w.dot(b), 2) + std::pow(w.dot(n), 2)));
  };
  const double s = std::pow(1.0 - l.dot(h), 5);
  return Rgb(d * g1(l) * g1(v) * ((1.0 - s) * p.base_color + s));
}

/// Smooth random texture: white noise box-blurred twice, stretched to 0..255.
inline Image8 textured_image(int rows, int cols, std::uint64_t seed, int blur = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> a(static_cast<std::size_t>(rows) * cols), b(a.size());
  for (double& v : a) v = u(rng);
  for (int pass = 0; pass < 2; ++pass) {
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double s = 0;
        int n = 0;
        for (int dr = -blur; dr <= blur; ++dr)
          for (int dc = -blur; dc <= blur; ++dc) {
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= rows || cc >= cols) continue;
            s += a[static_cast<std::size_t>(rr) * cols + cc];
            ++n;
          }
        b[static_cast<std::size_t>(r) * cols + c] = s / n;
      }
    a.swap(b);
  }
  const auto [lo, hi] = std::minmax_element(a.begin(), a.end());
  Image8 img(rows, cols, 3);
  for (std::size_t p = 0; p < a.size(); ++p) {
    const auto v = static_cast<std::uint8_t>(std::lround(255.0 * (a[p] - *lo) / (*hi - *lo)));
    for (int ch = 0; ch < 3; ++ch) img.at_pixel(p, ch) = v;
  }
  return img;
}

/// Sets a fraction of pixels to pure black or white.
inline void salt_and_pepper(Image8& img, double fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    if (u(rng) >= fraction) continue;
    const std::uint8_t v = u(rng) < 0.5 ? 0 : 255;
    for (int ch = 0; ch < img.channels(); ++ch) img.at_pixel(p, ch) = v;
  }
}

/// Exhaustive full-resolution median-threshold-bitmap search. Returns the
/// correction (dx, dy) minimizing disagreeing bits over the overlap, where
/// img shifted by (dx, dy) is compared with ref.
inline Shift mtb_bruteforce(const Image8& ref, const Image8& img, int max_shift, double exclusion = 4.0) {
  auto bitmap = [&](const Image8& im, std::vector<int>& bits, std::vector<int>& keep) {
    std::vector<double> g(im.pixel_count());
    for (std::size_t p = 0; p < g.size(); ++p)
      g[p] = (54.0 * im.at_pixel(p, 0) + 183.0 * im.at_pixel(p, 1) + 19.0 * im.at_pixel(p, 2)) / 256.0;
    std::vector<double> sorted = g;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    bits.resize(g.size());
    keep.resize(g.size());
    for (std::size_t p = 0; p < g.size(); ++p) {
      bits[p] = g[p] > median;
      keep[p] = std::abs(g[p] - median) > exclusion;
    }
  };
  std::vector<int> rb, rk, ib, ik;
  bitmap(ref, rb, rk);
  bitmap(img, ib, ik);
  const int rows = ref.rows(), cols = ref.cols();
  Shift best{};
  double best_cost = std::numeric_limits<double>::infinity();
  for (int dy = -max_shift; dy <= max_shift; ++dy)
    for (int dx = -max_shift; dx <= max_shift; ++dx) {
      long diff = 0, overlap = 0;
      for (int r = 0; r < rows; ++r) {
        const int sr = r - dy;
        if (sr < 0 || sr >= rows) continue;
        for (int c = 0; c < cols; ++c) {
          const int sc = c - dx;
          if (sc < 0 || sc >= cols) continue;
          const std::size_t a = static_cast<std::size_t>(r) * cols + c, b = static_cast<std::size_t>(sr) * cols + sc;
          ++overlap;
          diff += (rb[a] != ib[b]) && rk[a] && ik[b];
        }
      }
      const double cost = static_cast<double>(diff) / static_cast<double>(overlap);
      const int norm = dx * dx + dy * dy, best_norm = best.dx * best.dx + best.dy * best.dy;
      if (cost < best_cost || (cost == best_cost && norm < best_norm)) {
        best_cost = cost;
        best = {dx, dy};
      }
    }
  return best;
}

/// Camera model for synthetic exposure stacks: Z = clip(round(255 * (L t)^(1/gamma))).
struct SyntheticCamera {
  double gamma = 1.0;
  int pixel(double exposure_value) const {
    const double z = 255.0 * std::pow(std::max(exposure_value, 0.0), 1.0 / gamma);
    return static_cast<int>(std::clamp(std::lround(z), 0L, 255L));
  }
  double true_g(int z) const { return gamma * std::log(z / 255.0); }
};

struct ResponseStack {
  std::vector<ImageD> cards;     ///< 15 x 20 samples per exposure
  std::vector<double> exposures;
};

/// Eight exposures one stop apart of a 15 x 20 card with log-uniform radiance.
inline ResponseStack response_stack(const SyntheticCamera& cam, std::uint64_t seed, int frames = 8) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(std::log(0.004), std::log(1.0));
  ResponseStack s;
  std::vector<double> radiance(static_cast<std::size_t>(kCardRows) * kCardCols * 3);
  for (double& v : radiance) v = std::exp(u(rng));
  for (int j = 0; j < frames; ++j) {
    const double t = std::pow(2.0, j - frames / 2 + 1);
    s.exposures.push_back(t);
    ImageD card(kCardRows, kCardCols, 3);
    for (std::size_t i = 0; i < radiance.size(); ++i) card.data()[i] = cam.pixel(radiance[i] * t);
    s.cards.push_back(std::move(card));
  }
  return s;
}

/// Largest deviation between a recovered curve and the truth over [lo, hi],
/// after removing the best additive gauge (mean difference).
inline double curve_error(const ResponseCurve& curve, int ch, const std::function<double(int)>& truth, int lo = 20, int hi = 235) {
  double mean = 0.0;
  for (int z = lo; z <= hi; ++z) mean += curve.g[ch][z] - truth(z);
  mean /= (hi - lo + 1);
  double worst = 0.0;
  for (int z = lo; z <= hi; ++z) worst = std::max(worst, std::abs(curve.g[ch][z] - truth(z) - mean));
  return worst;
}

inline bool curve_monotone(const ResponseCurve& curve, int ch, int lo = 20, int hi = 235) {
  for (int z = lo; z < hi; ++z)
    if (curve.g[ch][z + 1] < curve.g[ch][z]) return false;
  return true;
}

/// Radiance of a flat 18% gray card under a point light, written out from
/// the rendering equation independently of the fitting renderer.
inline ImageD gray_card_radiance(int rows, int cols, const SceneGeometry& g) {
  ImageD out(rows, cols, 3);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const double x = (c - 0.5 * (cols - 1)) * g.pixel_pitch;
      const double y = (0.5 * (rows - 1) - r) * g.pixel_pitch;
      const double dx = g.light_pos.x() - x, dy = g.light_pos.y() - y, dz = g.light_pos.z();
      const double r2 = dx * dx + dy * dy + dz * dz;
      const double cos_i = dz / std::sqrt(r2);
      const double l = 0.18 / 3.14159265358979323846 * g.light_intensity / r2 * cos_i;
      for (int ch = 0; ch < 3; ++ch) out(r, c, ch) = l;
    }
  return out;
}

/// Plain Lloyd k-means on the numeric part, from the given initial centres,
/// iterated until the labels stop changing.
inline std::vector<int> lloyd_reference(const std::vector<PixelFeature>& pts, std::vector<std::array<double, 3>> centres,
                                        int max_iterations = 100) {
  const int k = static_cast<int>(centres.size());
  std::vector<int> labels(pts.size(), -1);
  for (int it = 0; it < max_iterations; ++it) {
    std::vector<int> next(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        double d = 0;
        for (int a = 0; a < 3; ++a) d += std::pow(pts[i].numeric[a] - centres[j][a], 2);
        if (d < best) {
          best = d;
          next[i] = j;
        }
      }
    }
    if (next == labels) break;
    labels = next;
    for (int j = 0; j < k; ++j) {
      std::array<double, 3> s{};
      int n = 0;
      for (std::size_t i = 0; i < pts.size(); ++i)
        if (labels[i] == j) {
          for (int a = 0; a < 3; ++a) s[a] += pts[i].numeric[a];
          ++n;
        }
      if (n > 0)
        for (int a = 0; a < 3; ++a) centres[j][a] = s[a] / n;
    }
  }
  return labels;
}

/// Cost of a partition with each cluster represented by its optimal prototype:
/// the numeric mean and the per-bit majority vote. Empty clusters are infeasible.
inline double partition_cost(const std::vector<PixelFeature>& pts, const std::vector<int>& labels, int k, double gamma) {
  double cost = 0;
  for (int j = 0; j < k; ++j) {
    std::vector<const PixelFeature*> members;
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (labels[i] == j) members.push_back(&pts[i]);
    if (members.empty()) return std::numeric_limits<double>::infinity();
    std::array<double, 3> mean{};
    for (auto* m : members)
      for (int d = 0; d < 3; ++d) mean[d] += m->numeric[d] / static_cast<double>(members.size());
    for (auto* m : members)
      for (int d = 0; d < 3; ++d) cost += std::pow(m->numeric[d] - mean[d], 2);
    for (int b = 0; b < kBriefBits; ++b) {
      int ones = 0;
      for (auto* m : members) ones += m->bits.test(b);
      cost += gamma * std::min<int>(ones, static_cast<int>(members.size()) - ones);
    }
  }
  return cost;
}

}  // namespace svbrdf::testing
