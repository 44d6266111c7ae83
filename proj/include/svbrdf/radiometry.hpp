#pragma once

// Radiometric calibration: camera response recovery from a displayed colour
// card, exposure fusion into linear radiance, exposure-stack alignment and
// absolute light intensity from a gray card.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "svbrdf/brdf.hpp"
#include "svbrdf/error.hpp"
#include "svbrdf/geometry.hpp"
#include "svbrdf/image.hpp"

namespace svbrdf {

inline constexpr int kZLevels = 256;
inline constexpr int kZMax = 255;
inline constexpr int kGaugeLevel = 127;
inline constexpr int kCardRows = 15;
inline constexpr int kCardCols = 20;

/// Inverse camera response: g(Z) = ln(L * t) per colour channel.
struct ResponseCurve {
  std::array<std::array<double, kZLevels>, 3> g{};

  double log_exposure(int z, int ch) const noexcept { return g[ch][static_cast<std::size_t>(std::clamp(z, 0, kZMax))]; }

  /// Continuous pixel value whose g equals log_exposure, by inverting the
  /// running-max (monotone) envelope of the table with linear interpolation.
  double pixel_value(double log_exposure_value, int ch) const noexcept {
    const auto& t = g[ch];
    if (!(log_exposure_value > t[0])) return 0.0;  // also catches -inf and NaN
    double prev = t[0];
    for (int z = 1; z < kZLevels; ++z) {
      const double cur = std::max(prev, t[z]);
      if (log_exposure_value <= cur) {
        if (cur <= prev) return static_cast<double>(z);
        return (z - 1) + (log_exposure_value - prev) / (cur - prev);
      }
      prev = cur;
    }
    return static_cast<double>(kZMax);
  }

  /// g(Z) = gamma * ln(Z / 255), with g(0) extrapolated to keep the table finite.
  static ResponseCurve from_gamma(double gamma) {
    ResponseCurve c;
    for (int ch = 0; ch < 3; ++ch) {
      for (int z = 1; z < kZLevels; ++z) c.g[ch][z] = gamma * std::log(z / 255.0);
      c.g[ch][0] = 2.0 * c.g[ch][1] - c.g[ch][2];
    }
    return c;
  }
};

struct ExposureStack {
  std::vector<Image8> images;     ///< 8-bit RGB, identical dimensions
  std::vector<double> exposures;  ///< seconds, strictly positive

  void validate(std::size_t min_images = 1) const {
    if (images.size() < min_images) throw InvalidInputError("exposure stack has too few images");
    if (images.size() != exposures.size()) throw InvalidInputError("exposure count does not match image count");
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (!(exposures[i] > 0.0)) throw InvalidInputError("exposure times must be positive");
      if (images[i].channels() != 3) throw InvalidInputError("exposure stack images must be RGB");
      if (!images[i].same_shape(images.front())) throw InvalidInputError("exposure stack images differ in size");
    }
  }
};

/// Debevec-style hat weight with a floor of 1 at the extremes.
inline double hat_weight(int z) noexcept { return std::max(1, std::min(z, kZMax - z)); }

using WeightFn = std::function<double(int)>;

/// Random colour card of rows x cols uniform tiles, tile_px square pixels each.
inline Image8 generate_color_card(int rows, int cols, int tile_px, std::uint64_t seed) {
  if (tile_px < 1 || rows < 1 || cols < 1) throw InvalidInputError("colour card needs positive tile size and counts");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, 255);
  Image8 img(rows * tile_px, cols * tile_px, 3);
  for (int tr = 0; tr < rows; ++tr) {
    for (int tc = 0; tc < cols; ++tc) {
      std::array<std::uint8_t, 3> color{};
      for (auto& v : color) v = static_cast<std::uint8_t>(dist(rng));
      for (int r = tr * tile_px; r < (tr + 1) * tile_px; ++r)
        for (int c = tc * tile_px; c < (tc + 1) * tile_px; ++c)
          for (int ch = 0; ch < 3; ++ch) img(r, c, ch) = color[ch];
    }
  }
  return img;
}

inline Image8 generate_color_card(int tile_px, std::uint64_t seed) {
  return generate_color_card(kCardRows, kCardCols, tile_px, seed);
}

/// Block-average a card photo down to 15 rows x 20 cols. Block edges sit at
/// floor(i * size / cells), so every source pixel lands in exactly one cell.
template <class T>
ImageD downsample_card(const Image<T>& photo, int out_rows = kCardRows, int out_cols = kCardCols) {
  if (photo.rows() < out_rows || photo.cols() < out_cols) throw InvalidInputError("card photo smaller than the card grid");
  ImageD out(out_rows, out_cols, photo.channels());
  for (int i = 0; i < out_rows; ++i) {
    const int r0 = static_cast<int>(static_cast<long long>(i) * photo.rows() / out_rows);
    const int r1 = static_cast<int>(static_cast<long long>(i + 1) * photo.rows() / out_rows);
    for (int j = 0; j < out_cols; ++j) {
      const int c0 = static_cast<int>(static_cast<long long>(j) * photo.cols() / out_cols);
      const int c1 = static_cast<int>(static_cast<long long>(j + 1) * photo.cols() / out_cols);
      const double count = static_cast<double>((r1 - r0) * (c1 - c0));
      for (int ch = 0; ch < photo.channels(); ++ch) {
        double sum = 0.0;
        for (int r = r0; r < r1; ++r)
          for (int c = c0; c < c1; ++c) sum += static_cast<double>(photo(r, c, ch));
        out(i, j, ch) = sum / count;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Median threshold bitmap alignment

struct Shift {
  int dx = 0;
  int dy = 0;
  friend bool operator==(const Shift&, const Shift&) = default;
};

namespace detail {

struct MtbLevel {
  int rows = 0, cols = 0;
  std::vector<std::uint8_t> threshold;  ///< 1 where value > median
  std::vector<std::uint8_t> keep;       ///< 1 where |value - median| > exclusion
};

inline ImageD mtb_gray(const Image8& img) {
  ImageD out(img.rows(), img.cols(), 1);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    if (img.channels() >= 3) {
      out.at_pixel(p) = (54.0 * img.at_pixel(p, 0) + 183.0 * img.at_pixel(p, 1) + 19.0 * img.at_pixel(p, 2)) / 256.0;
    } else {
      out.at_pixel(p) = img.at_pixel(p, 0);
    }
  }
  return out;
}

inline ImageD halve(const ImageD& img) {
  ImageD out(img.rows() / 2, img.cols() / 2, 1);
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c)
      out(r, c) = 0.25 * (img(2 * r, 2 * c) + img(2 * r + 1, 2 * c) + img(2 * r, 2 * c + 1) + img(2 * r + 1, 2 * c + 1));
  return out;
}

inline MtbLevel make_mtb_level(const ImageD& gray, double exclusion) {
  MtbLevel lvl;
  lvl.rows = gray.rows();
  lvl.cols = gray.cols();
  std::vector<double> values(gray.data().begin(), gray.data().end());
  auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  const double median = *mid;
  lvl.threshold.resize(gray.pixel_count());
  lvl.keep.resize(gray.pixel_count());
  for (std::size_t p = 0; p < gray.pixel_count(); ++p) {
    const double v = gray.at_pixel(p);
    lvl.threshold[p] = v > median;
    lvl.keep[p] = std::abs(v - median) > exclusion;
  }
  return lvl;
}

/// Fraction of overlapping, non-excluded pixels whose bits disagree when img is
/// translated by (dx, dy).
inline double mtb_cost(const MtbLevel& ref, const MtbLevel& img, int dx, int dy) {
  std::size_t diff = 0, overlap = 0;
  const int r_begin = std::max(0, dy), r_end = std::min(ref.rows, img.rows + dy);
  const int c_begin = std::max(0, dx), c_end = std::min(ref.cols, img.cols + dx);
  for (int r = r_begin; r < r_end; ++r) {
    const std::size_t ref_row = static_cast<std::size_t>(r) * ref.cols;
    const std::size_t img_row = static_cast<std::size_t>(r - dy) * img.cols;
    for (int c = c_begin; c < c_end; ++c) {
      const std::size_t a = ref_row + c, b = img_row + (c - dx);
      ++overlap;
      diff += (ref.threshold[a] ^ img.threshold[b]) & ref.keep[a] & img.keep[b];
    }
  }
  return overlap ? static_cast<double>(diff) / static_cast<double>(overlap) : 1.0;
}

}  // namespace detail

/// Integer translation for each image that aligns it with images[0]; applying
/// shift_image(images[i], s.dx, s.dy) brings it onto the reference.
inline std::vector<Shift> mtb_align(std::span<const Image8> images, int max_shift, double exclusion = 4.0) {
  std::vector<Shift> shifts(images.size());
  if (images.empty() || max_shift <= 0) return shifts;

  constexpr int kMinCoarse = 32;
  int levels = 0;
  {
    int rows = images[0].rows(), cols = images[0].cols();
    while ((1 << levels) < max_shift && std::min(rows, cols) / 2 >= kMinCoarse) {
      rows /= 2;
      cols /= 2;
      ++levels;
    }
  }

  auto build_pyramid = [&](const Image8& img) {
    std::vector<detail::MtbLevel> pyr;
    ImageD g = detail::mtb_gray(img);
    for (int l = 0; l <= levels; ++l) {
      pyr.push_back(detail::make_mtb_level(g, exclusion));
      if (l < levels) g = detail::halve(g);
    }
    return pyr;
  };

  const auto ref = build_pyramid(images[0]);
  auto better = [](double cost, Shift s, double best_cost, Shift best) {
    if (cost != best_cost) return cost < best_cost;
    const int n = s.dx * s.dx + s.dy * s.dy, nb = best.dx * best.dx + best.dy * best.dy;
    if (n != nb) return n < nb;
    return s.dy != best.dy ? s.dy < best.dy : s.dx < best.dx;
  };

  for (std::size_t i = 1; i < images.size(); ++i) {
    if (!images[i].same_size(images[0])) throw InvalidInputError("cannot align images of different sizes");
    const auto pyr = build_pyramid(images[i]);
    const int coarse_radius = (max_shift + (1 << levels) - 1) >> levels;
    Shift cur{};
    for (int l = levels; l >= 0; --l) {
      const int radius = l == levels ? coarse_radius : 1;
      const Shift center = l == levels ? Shift{} : Shift{2 * cur.dx, 2 * cur.dy};
      const int limit = (max_shift + (1 << l) - 1) >> l;
      Shift best = center;
      double best_cost = std::numeric_limits<double>::infinity();
      for (int dy = center.dy - radius; dy <= center.dy + radius; ++dy) {
        for (int dx = center.dx - radius; dx <= center.dx + radius; ++dx) {
          if (std::abs(dx) > limit || std::abs(dy) > limit) continue;
          const double cost = detail::mtb_cost(ref[l], pyr[l], dx, dy);
          if (better(cost, {dx, dy}, best_cost, best)) {
            best_cost = cost;
            best = {dx, dy};
          }
        }
      }
      cur = best;
    }
    cur.dx = std::clamp(cur.dx, -max_shift, max_shift);
    cur.dy = std::clamp(cur.dy, -max_shift, max_shift);
    shifts[i] = cur;
  }
  return shifts;
}

inline std::vector<Shift> mtb_align(const ExposureStack& stack, int max_shift, double exclusion = 4.0) {
  return mtb_align(std::span<const Image8>(stack.images), max_shift, exclusion);
}

/// Applies mtb_align shifts in place.
inline void apply_shifts(ExposureStack& stack, std::span<const Shift> shifts) {
  for (std::size_t i = 0; i < stack.images.size() && i < shifts.size(); ++i) {
    if (shifts[i].dx != 0 || shifts[i].dy != 0) stack.images[i] = shift_image(stack.images[i], shifts[i].dx, shifts[i].dy);
  }
}

// ---------------------------------------------------------------------------
// Response recovery

/// One channel of the least-squares response solve.
/// z holds cells x exposures integer pixel values, row-major by cell.
inline std::array<double, kZLevels> solve_response_channel(std::span<const int> z, std::size_t cells,
                                                            std::span<const double> exposures, double lambda,
                                                            const WeightFn& weight = hat_weight) {
  const std::size_t p = exposures.size();
  if (p < 2) throw InvalidInputError("response recovery needs at least two exposures");
  if (z.size() != cells * p) throw InvalidInputError("sample table size does not match cells x exposures");
  for (double t : exposures)
    if (!(t > 0.0)) throw InvalidInputError("exposure times must be positive");

  // Without a cell observed at two different values the slope of g is unconstrained.
  bool linked = false;
  for (std::size_t i = 0; i < cells && !linked; ++i) {
    for (std::size_t j = 1; j < p; ++j) {
      if (z[i * p + j] != z[i * p]) {
        linked = true;
        break;
      }
    }
  }
  if (!linked) throw CalibrationError("response system is rank deficient: no sample changes value across exposures");

  const std::size_t n = kZLevels + cells;
  Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd atb = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));

  for (std::size_t i = 0; i < cells; ++i) {
    const auto e = static_cast<Eigen::Index>(kZLevels + i);
    for (std::size_t j = 0; j < p; ++j) {
      const int zij = std::clamp(z[i * p + j], 0, kZMax);
      const double w = weight(zij);
      const double w2 = w * w;
      const double rhs = std::log(exposures[j]);
      ata(zij, zij) += w2;
      ata(e, e) += w2;
      ata(zij, e) -= w2;
      ata(e, zij) -= w2;
      atb(zij) += w2 * rhs;
      atb(e) -= w2 * rhs;
    }
  }
  for (int k = 1; k < kZMax; ++k) {
    const double w = lambda * weight(k);
    const double w2 = w * w;
    const int idx[3] = {k - 1, k, k + 1};
    const double coef[3] = {1.0, -2.0, 1.0};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) ata(idx[a], idx[b]) += w2 * coef[a] * coef[b];
  }
  ata(kGaugeLevel, kGaugeLevel) += 1.0;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(ata);
  if (ldlt.info() != Eigen::Success) throw CalibrationError("response normal equations could not be factored");
  const Eigen::VectorXd x = ldlt.solve(atb);
  if (!x.allFinite()) throw CalibrationError("response solve produced non-finite values");

  std::array<double, kZLevels> g{};
  for (int k = 0; k < kZLevels; ++k) g[k] = x(k) - x(kGaugeLevel);
  return g;
}

/// Response curve from downsampled card photos (one per exposure, values 0..255).
inline ResponseCurve solve_response(std::span<const ImageD> cards, std::span<const double> exposures,
                                    double lambda = 100.0, const WeightFn& weight = hat_weight) {
  if (cards.size() != exposures.size()) throw InvalidInputError("card count does not match exposure count");
  if (cards.size() < 2) throw InvalidInputError("response recovery needs at least two exposures");
  for (const auto& c : cards) {
    if (!c.same_shape(cards.front()) || c.channels() != 3) throw InvalidInputError("card samples must be RGB grids of equal size");
  }
  const std::size_t cells = cards.front().pixel_count();
  const std::size_t p = cards.size();
  ResponseCurve curve;
  std::vector<int> z(cells * p);
  for (int ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < cells; ++i)
      for (std::size_t j = 0; j < p; ++j)
        z[i * p + j] = std::clamp(static_cast<int>(std::lround(cards[j].at_pixel(i, ch))), 0, kZMax);
    curve.g[ch] = solve_response_channel(z, cells, exposures, lambda, weight);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Radiance fusion

/// Exposure-normalized radiance: ln L = sum w(Z)(g(Z) - ln t) / sum w(Z).
/// Pixels clipped high in every frame use the shortest exposure, pixels
/// clipped low in every frame use the longest.
inline ImageD merge_radiance(const ExposureStack& stack, const ResponseCurve& curve, const WeightFn& weight = hat_weight) {
  if (stack.images.empty()) throw InvalidInputError("cannot merge an empty exposure stack");
  stack.validate(1);
  const auto& first = stack.images.front();
  const std::size_t frames = stack.images.size();
  std::vector<double> log_t(frames);
  for (std::size_t j = 0; j < frames; ++j) log_t[j] = std::log(stack.exposures[j]);
  const auto shortest = static_cast<std::size_t>(std::min_element(stack.exposures.begin(), stack.exposures.end()) - stack.exposures.begin());
  const auto longest = static_cast<std::size_t>(std::max_element(stack.exposures.begin(), stack.exposures.end()) - stack.exposures.begin());

  ImageD out(first.rows(), first.cols(), 3);
  for (std::size_t p = 0; p < first.pixel_count(); ++p) {
    for (int ch = 0; ch < 3; ++ch) {
      bool all_high = true, all_low = true;
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < frames; ++j) {
        const int z = stack.images[j].at_pixel(p, ch);
        all_high = all_high && z >= kZMax;
        all_low = all_low && z <= 0;
        const double w = weight(z);
        num += w * (curve.log_exposure(z, ch) - log_t[j]);
        den += w;
      }
      double ln_l;
      if (frames > 1 && all_high) {
        ln_l = curve.log_exposure(stack.images[shortest].at_pixel(p, ch), ch) - log_t[shortest];
      } else if (frames > 1 && all_low) {
        ln_l = curve.log_exposure(stack.images[longest].at_pixel(p, ch), ch) - log_t[longest];
      } else {
        ln_l = num / den;
      }
      out.at_pixel(p, ch) = std::exp(ln_l);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Light intensity

/// E from a radiance map of a flat 18% gray card: per-pixel
/// L r^2 / (f_gray cos) averaged over the central half of each dimension.
inline double gray_card_intensity(const ImageD& gray_radiance, const SceneGeometry& geom) {
  if (gray_radiance.empty()) throw InvalidInputError("empty gray-card radiance map");
  if (!(geom.pixel_pitch > 0.0)) throw InvalidInputError("pixel pitch must be positive");
  const int rows = gray_radiance.rows(), cols = gray_radiance.cols();
  const int r0 = rows / 4, r1 = std::max(r0 + 1, rows - rows / 4);
  const int c0 = cols / 4, c1 = std::max(c0 + 1, cols - cols / 4);
  const Vec3 up(0.0, 0.0, 1.0);
  const double f = lambertian_reference();

  double sum = 0.0;
  std::size_t count = 0;
  for (int r = r0; r < r1; ++r) {
    for (int c = c0; c < c1; ++c) {
      const Vec3 p = pixel_to_world(r, c, rows, cols, geom.pixel_pitch);
      const auto ig = incident_geometry(p, geom, up);
      if (ig.cos_incident <= 0.0) continue;
      double l = 0.0;
      for (int ch = 0; ch < gray_radiance.channels(); ++ch) l += gray_radiance(r, c, ch);
      l /= gray_radiance.channels();
      sum += l * ig.distance * ig.distance / (f * ig.cos_incident);
      ++count;
    }
  }
  if (count == 0) throw CalibrationError("no gray-card pixel faces the light");
  return sum / static_cast<double>(count);
}

/// Rescale a gray-card intensity to a sample shot at a different camera height.
inline double scale_intensity(double e_gray, double r_gray, double r_sample) {
  if (!(r_gray > 0.0) || !(r_sample > 0.0)) throw InvalidInputError("camera distances must be positive");
  const double ratio = r_gray / r_sample;
  return e_gray * ratio * ratio;
}

}  // namespace svbrdf
