#pragma once

// Pixel quantization over mixed features: three decorrelated colour values
// plus a 160-bit multi-scale BRIEF descriptor, clustered by k-prototypes.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "svbrdf/error.hpp"
#include "svbrdf/image.hpp"
#include "svbrdf/parallel.hpp"

namespace svbrdf {

inline constexpr int kBriefBits = 160;

/// 160 categorical bits packed into three words; bits 160..191 stay zero.
struct BitDescriptor {
  std::array<std::uint64_t, 3> words{};

  bool test(int i) const noexcept { return (words[i >> 6] >> (i & 63)) & 1u; }
  void set(int i, bool v) noexcept {
    const std::uint64_t mask = std::uint64_t{1} << (i & 63);
    if (v) words[i >> 6] |= mask;
    else words[i >> 6] &= ~mask;
  }
  friend bool operator==(const BitDescriptor&, const BitDescriptor&) = default;
};

inline int hamming_distance(const BitDescriptor& a, const BitDescriptor& b) noexcept {
  return std::popcount(a.words[0] ^ b.words[0]) + std::popcount(a.words[1] ^ b.words[1]) +
         std::popcount(a.words[2] ^ b.words[2]);
}

struct PixelFeature {
  std::array<double, 3> numeric{};
  BitDescriptor bits;
};

/// Squared Euclidean distance of the numeric parts plus gamma times the Hamming
/// distance of the bit parts.
inline double mixed_distance(const PixelFeature& a, const PixelFeature& b, double gamma) noexcept {
  double d = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double t = a.numeric[i] - b.numeric[i];
    d += t * t;
  }
  return d + gamma * hamming_distance(a.bits, b.bits);
}

// ---------------------------------------------------------------------------
// Colour decorrelation

struct PcaResult {
  ImageD channels;                ///< projections of mean-centred RGB, descending variance
  Eigen::Matrix3d components;     ///< row i is the i-th principal axis
  Eigen::Vector3d eigenvalues;    ///< descending
  Eigen::Vector3d mean;
};

inline PcaResult pca_channels(const ImageD& rgb) {
  if (rgb.channels() != 3) throw InvalidInputError("PCA expects an RGB image");
  const std::size_t n = rgb.pixel_count();
  if (n < 2) throw DegenerateInputError("PCA needs at least two pixels");

  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (std::size_t p = 0; p < n; ++p) mean += Eigen::Vector3d(rgb.at_pixel(p, 0), rgb.at_pixel(p, 1), rgb.at_pixel(p, 2));
  mean /= static_cast<double>(n);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t p = 0; p < n; ++p) {
    const Eigen::Vector3d d = Eigen::Vector3d(rgb.at_pixel(p, 0), rgb.at_pixel(p, 1), rgb.at_pixel(p, 2)) - mean;
    cov += d * d.transpose();
  }
  cov /= static_cast<double>(n);
  if (!(cov.trace() > 1e-14)) throw DegenerateInputError("constant image has no colour variance");

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  PcaResult out;
  out.mean = mean;
  for (int i = 0; i < 3; ++i) {
    Eigen::Vector3d axis = eig.eigenvectors().col(2 - i);
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis(big) < 0.0) axis = -axis;  // sign fixed for determinism
    out.components.row(i) = axis.transpose();
    out.eigenvalues(i) = std::max(0.0, eig.eigenvalues()(2 - i));
  }
  out.channels = ImageD(rgb.rows(), rgb.cols(), 3);
  for (std::size_t p = 0; p < n; ++p) {
    const Eigen::Vector3d d = Eigen::Vector3d(rgb.at_pixel(p, 0), rgb.at_pixel(p, 1), rgb.at_pixel(p, 2)) - mean;
    const Eigen::Vector3d y = out.components * d;
    for (int ch = 0; ch < 3; ++ch) out.channels.at_pixel(p, ch) = y(ch);
  }
  return out;
}

// ---------------------------------------------------------------------------
// BRIEF

struct BriefScale {
  int bits;
  int window;
  double blur_sigma;
};

/// Coarse-to-fine scales; bit counts sum to 160.
inline constexpr std::array<BriefScale, 3> kBriefScales{{{48, 33, 4.0}, {80, 17, 2.0}, {32, 5, 0.0}}};

struct BriefPair {
  int ax, ay, bx, by;
};

/// Fixed comparison pattern for one scale: offsets uniform over the window,
/// never comparing a point with itself.
inline std::vector<BriefPair> brief_pattern(const BriefScale& scale, std::uint64_t seed, int scale_index) {
  std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(scale_index + 1)));
  const int half = scale.window / 2;
  std::uniform_int_distribution<int> off(-half, half);
  std::vector<BriefPair> pairs;
  pairs.reserve(static_cast<std::size_t>(scale.bits));
  while (static_cast<int>(pairs.size()) < scale.bits) {
    BriefPair p{off(rng), off(rng), off(rng), off(rng)};
    if (p.ax == p.bx && p.ay == p.by) continue;
    pairs.push_back(p);
  }
  return pairs;
}

/// Per-pixel 160-bit descriptors of a single channel: bit = 1 iff the smoothed
/// value at the first point of a pair is strictly less than at the second.
inline std::vector<BitDescriptor> brief_features(const ImageD& channel, std::uint64_t seed) {
  if (channel.channels() != 1) throw InvalidInputError("BRIEF expects a single channel");
  const int largest = kBriefScales[0].window;
  if (channel.rows() <= largest || channel.cols() <= largest) {
    throw InvalidInputError("image must exceed the largest BRIEF window");
  }
  const int rows = channel.rows(), cols = channel.cols();
  std::vector<BitDescriptor> out(channel.pixel_count());
  int bit_offset = 0;
  for (int s = 0; s < static_cast<int>(kBriefScales.size()); ++s) {
    const auto& scale = kBriefScales[static_cast<std::size_t>(s)];
    const ImageD smooth = gaussian_blur(channel, scale.blur_sigma);
    const auto pairs = brief_pattern(scale, seed, s);
    parallel_for(static_cast<std::size_t>(rows), [&](std::size_t r_idx) {
      const int r = static_cast<int>(r_idx);
      for (int c = 0; c < cols; ++c) {
        auto& desc = out[static_cast<std::size_t>(r) * cols + c];
        for (int b = 0; b < scale.bits; ++b) {
          const auto& pr = pairs[static_cast<std::size_t>(b)];
          const double va = smooth(reflect_index(r + pr.ay, rows), reflect_index(c + pr.ax, cols));
          const double vb = smooth(reflect_index(r + pr.by, rows), reflect_index(c + pr.bx, cols));
          if (va < vb) desc.set(bit_offset + b, true);
        }
      }
    });
    bit_offset += scale.bits;
  }
  return out;
}

/// Mixed features for every pixel of an RGB image (BRIEF on the first principal channel).
inline std::vector<PixelFeature> extract_features(const ImageD& rgb, std::uint64_t seed) {
  const PcaResult pca = pca_channels(rgb);
  ImageD first(rgb.rows(), rgb.cols(), 1);
  for (std::size_t p = 0; p < rgb.pixel_count(); ++p) first.at_pixel(p) = pca.channels.at_pixel(p, 0);
  const auto bits = brief_features(first, seed);
  std::vector<PixelFeature> features(rgb.pixel_count());
  for (std::size_t p = 0; p < features.size(); ++p) {
    for (int ch = 0; ch < 3; ++ch) features[p].numeric[static_cast<std::size_t>(ch)] = pca.channels.at_pixel(p, ch);
    features[p].bits = bits[p];
  }
  return features;
}

/// Mean standard deviation of the numeric attributes divided by the bit length.
inline double default_gamma(const std::vector<PixelFeature>& features) {
  if (features.size() < 2) throw InvalidInputError("default gamma needs at least two pixels");
  const double n = static_cast<double>(features.size());
  double total = 0.0;
  for (int i = 0; i < 3; ++i) {
    double mean = 0.0;
    for (const auto& f : features) mean += f.numeric[static_cast<std::size_t>(i)];
    mean /= n;
    double var = 0.0;
    for (const auto& f : features) {
      const double d = f.numeric[static_cast<std::size_t>(i)] - mean;
      var += d * d;
    }
    total += std::sqrt(var / n);
  }
  return total / 3.0 / kBriefBits;
}

// ---------------------------------------------------------------------------
// k-prototypes

struct ClusterModel {
  int k = 0;
  double gamma = 0.0;
  std::vector<PixelFeature> centers;
  std::vector<int> labels;           ///< one per input pixel
  std::vector<double> cost_history;  ///< fit-set cost after every centre update
  int iterations = 0;
  bool converged = false;
};

struct KPrototypesOptions {
  int max_iterations = 50;
  std::size_t max_fit_samples = 200000;
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline int nearest_center(const PixelFeature& x, const std::vector<PixelFeature>& centers, double gamma, double* dist) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const double d = mixed_distance(x, centers[j], gamma);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  if (dist) *dist = best_d;
  return best;
}

}  // namespace detail

/// k-means++ seeding under mixed_distance. Returns indices into `points`.
/// The first index is rng() % n; each further index is drawn with probability
/// proportional to the distance to its nearest chosen centre, by scanning the
/// cumulative sum against uniform01(rng) * total.
inline std::vector<std::size_t> kmeanspp_seed(const std::vector<PixelFeature>& points, int k, double gamma,
                                              std::mt19937_64& rng) {
  const std::size_t n = points.size();
  std::vector<std::size_t> chosen;
  chosen.push_back(static_cast<std::size_t>(rng() % n));
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = mixed_distance(points[i], points[chosen[0]], gamma);
  while (static_cast<int>(chosen.size()) < k) {
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    std::size_t pick = n - 1;
    if (total > 0.0) {
      const double u = detail::uniform01(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist[i];
        if (acc > u) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<std::size_t>(rng() % n);
    }
    chosen.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) dist[i] = std::min(dist[i], mixed_distance(points[i], points[pick], gamma));
  }
  return chosen;
}

/// Sum of mixed distances from each point to its labelled centre.
inline double clustering_cost(const std::vector<PixelFeature>& points, const std::vector<int>& labels,
                              const std::vector<PixelFeature>& centers, double gamma) {
  double c = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) c += mixed_distance(points[i], centers[static_cast<std::size_t>(labels[i])], gamma);
  return c;
}

namespace detail {

/// Gives every empty cluster the point currently farthest from its own centre.
inline void fill_empty_clusters(const std::vector<PixelFeature>& points, std::vector<int>& labels,
                                std::vector<PixelFeature>& centers, double gamma) {
  const int k = static_cast<int>(centers.size());
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (int l : labels) ++counts[static_cast<std::size_t>(l)];
  for (int j = 0; j < k; ++j) {
    if (counts[static_cast<std::size_t>(j)] > 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (counts[static_cast<std::size_t>(labels[i])] <= 1) continue;
      const double d = mixed_distance(points[i], centers[static_cast<std::size_t>(labels[i])], gamma);
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far_d < 0.0) throw InvalidInputError("not enough points to populate every cluster");
    --counts[static_cast<std::size_t>(labels[far])];
    labels[far] = j;
    counts[static_cast<std::size_t>(j)] = 1;
    centers[static_cast<std::size_t>(j)] = points[far];
  }
}

/// Numeric mean and per-bit majority; a tied bit keeps its previous value.
inline void update_centers(const std::vector<PixelFeature>& points, const std::vector<int>& labels,
                           std::vector<PixelFeature>& centers) {
  const std::size_t k = centers.size();
  std::vector<std::array<double, 3>> sums(k, {0.0, 0.0, 0.0});
  std::vector<std::array<int, kBriefBits>> ones(k);
  for (auto& o : ones) o.fill(0);
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto j = static_cast<std::size_t>(labels[i]);
    ++counts[j];
    for (int d = 0; d < 3; ++d) sums[j][static_cast<std::size_t>(d)] += points[i].numeric[static_cast<std::size_t>(d)];
    for (int b = 0; b < kBriefBits; ++b) ones[j][static_cast<std::size_t>(b)] += points[i].bits.test(b);
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (counts[j] == 0) continue;
    for (int d = 0; d < 3; ++d) centers[j].numeric[static_cast<std::size_t>(d)] = sums[j][static_cast<std::size_t>(d)] / counts[j];
    for (int b = 0; b < kBriefBits; ++b) {
      const int twice = 2 * ones[j][static_cast<std::size_t>(b)];
      if (twice > counts[j]) centers[j].bits.set(b, true);
      else if (twice < counts[j]) centers[j].bits.set(b, false);
    }
  }
}

}  // namespace detail

/// Assigns every point to its nearest centre (lowest index on ties).
inline std::vector<int> assign_labels(const std::vector<PixelFeature>& points, const std::vector<PixelFeature>& centers,
                                      double gamma) {
  std::vector<int> labels(points.size());
  parallel_for(points.size(), [&](std::size_t i) { labels[i] = detail::nearest_center(points[i], centers, gamma, nullptr); });
  return labels;
}

/// k-prototypes with k-means++ seeding. Centres are fitted on at most
/// max_fit_samples randomly chosen points, then every point is assigned.
inline ClusterModel kprototypes_fit(const std::vector<PixelFeature>& features, int k, double gamma, std::uint64_t seed,
                                    const KPrototypesOptions& opt = {}) {
  if (k < 1) throw InvalidInputError("cluster count must be positive");
  if (static_cast<std::size_t>(k) > features.size()) throw InvalidInputError("more clusters than pixels");
  if (!(gamma >= 0.0)) throw InvalidInputError("gamma must be non-negative");

  std::mt19937_64 rng(seed);
  std::vector<PixelFeature> sample_storage;
  const std::vector<PixelFeature>* fit_set = &features;
  if (features.size() > opt.max_fit_samples && opt.max_fit_samples >= static_cast<std::size_t>(k)) {
    std::vector<std::size_t> idx(features.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < opt.max_fit_samples; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(opt.max_fit_samples);
    std::sort(idx.begin(), idx.end());
    sample_storage.reserve(idx.size());
    for (std::size_t i : idx) sample_storage.push_back(features[i]);
    fit_set = &sample_storage;
  }
  const auto& pts = *fit_set;

  ClusterModel model;
  model.k = k;
  model.gamma = gamma;
  for (std::size_t i : kmeanspp_seed(pts, k, gamma, rng)) model.centers.push_back(pts[i]);

  std::vector<int> labels;
  for (int it = 0; it < opt.max_iterations; ++it) {
    auto next = assign_labels(pts, model.centers, gamma);
    detail::fill_empty_clusters(pts, next, model.centers, gamma);
    if (it > 0 && next == labels) {
      model.converged = true;
      break;
    }
    labels = std::move(next);
    detail::update_centers(pts, labels, model.centers);
    model.cost_history.push_back(clustering_cost(pts, labels, model.centers, gamma));
    model.iterations = it + 1;
  }

  model.labels = assign_labels(features, model.centers, gamma);
  detail::fill_empty_clusters(features, model.labels, model.centers, gamma);
  return model;
}

}  // namespace svbrdf
