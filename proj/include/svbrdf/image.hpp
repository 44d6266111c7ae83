#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "svbrdf/error.hpp"

namespace svbrdf {

/// Row-major multi-channel raster. Pixel (row, col) channel ch lives at
/// data[(row * cols + col) * channels + ch].
template <class T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int rows, int cols, int channels = 1, T fill = T{})
      : rows_(rows), cols_(cols), channels_(channels) {
    if (rows < 0 || cols < 0 || channels < 1) {
      throw InvalidInputError("image dimensions must be non-negative with at least one channel");
    }
    data_.assign(static_cast<std::size_t>(rows) * cols * channels, fill);
  }

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(rows_) * cols_; }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int row, int col, int ch = 0) noexcept {
    return data_[(static_cast<std::size_t>(row) * cols_ + col) * channels_ + ch];
  }
  const T& operator()(int row, int col, int ch = 0) const noexcept {
    return data_[(static_cast<std::size_t>(row) * cols_ + col) * channels_ + ch];
  }

  /// Flat pixel access (index = row * cols + col).
  T& at_pixel(std::size_t pixel, int ch = 0) noexcept { return data_[pixel * channels_ + ch]; }
  const T& at_pixel(std::size_t pixel, int ch = 0) const noexcept { return data_[pixel * channels_ + ch]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_ && channels_ == other.channels_;
  }
  template <class U>
  bool same_size(const Image<U>& other) const noexcept {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using ImageD = Image<double>;
using Image8 = Image<std::uint8_t>;
using Image16 = Image<std::uint16_t>;

/// Grayscale weights shared by every "convert to gray" step of the pipeline
/// (same luminance weights the BRDF tint uses).
inline constexpr double kGrayR = 0.3;
inline constexpr double kGrayG = 0.6;
inline constexpr double kGrayB = 0.1;

inline double gray_value(double r, double g, double b) noexcept { return kGrayR * r + kGrayG * g + kGrayB * b; }

template <class T>
ImageD to_gray(const Image<T>& img) {
  ImageD out(img.rows(), img.cols(), 1);
  if (img.channels() == 1) {
    for (std::size_t p = 0; p < img.pixel_count(); ++p) out.at_pixel(p) = static_cast<double>(img.at_pixel(p));
    return out;
  }
  if (img.channels() < 3) throw InvalidInputError("to_gray expects 1 or 3+ channels");
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    out.at_pixel(p) = gray_value(img.at_pixel(p, 0), img.at_pixel(p, 1), img.at_pixel(p, 2));
  }
  return out;
}

template <class T>
ImageD to_double(const Image<T>& img, double scale = 1.0) {
  ImageD out(img.rows(), img.cols(), img.channels());
  auto src = img.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]) * scale;
  return out;
}

/// Mean of one channel.
inline double channel_mean(const ImageD& img, int ch = 0) {
  if (img.pixel_count() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t p = 0; p < img.pixel_count(); ++p) sum += img.at_pixel(p, ch);
  return sum / static_cast<double>(img.pixel_count());
}

/// Mirror index into [0, n) without repeating the edge sample (…c b | a b c … ).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Normalized 1-D Gaussian taps with radius ceil(4 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = w;
    sum += w;
  }
  for (double& w : k) w /= sum;
  return k;
}

/// Separable Gaussian blur of every channel with mirrored borders. sigma <= 0 is the identity.
inline ImageD gaussian_blur(const ImageD& img, double sigma) {
  if (sigma <= 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int rows = img.rows(), cols = img.cols(), chans = img.channels();

  ImageD tmp(rows, cols, chans);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (int ch = 0; ch < chans; ++ch) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j) acc += k[j + radius] * img(r, reflect_index(c + j, cols), ch);
        tmp(r, c, ch) = acc;
      }
    }
  }
  ImageD out(rows, cols, chans);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (int ch = 0; ch < chans; ++ch) {
        double acc = 0.0;
        for (int j = -radius; j <= radius; ++j) acc += k[j + radius] * tmp(reflect_index(r + j, rows), c, ch);
        out(r, c, ch) = acc;
      }
    }
  }
  return out;
}

/// Horizontal (+col) Sobel derivative normalized by 1/8, mirrored borders.
inline ImageD sobel_cols(const ImageD& img) {
  ImageD out(img.rows(), img.cols(), img.channels());
  for (int r = 0; r < img.rows(); ++r) {
    const int ru = reflect_index(r - 1, img.rows()), rd = reflect_index(r + 1, img.rows());
    for (int c = 0; c < img.cols(); ++c) {
      const int cl = reflect_index(c - 1, img.cols()), cr = reflect_index(c + 1, img.cols());
      for (int ch = 0; ch < img.channels(); ++ch) {
        const double v = (img(ru, cr, ch) - img(ru, cl, ch)) + 2.0 * (img(r, cr, ch) - img(r, cl, ch)) +
                         (img(rd, cr, ch) - img(rd, cl, ch));
        out(r, c, ch) = v / 8.0;
      }
    }
  }
  return out;
}

/// Vertical (+row, i.e. downward) Sobel derivative normalized by 1/8, mirrored borders.
inline ImageD sobel_rows(const ImageD& img) {
  ImageD out(img.rows(), img.cols(), img.channels());
  for (int r = 0; r < img.rows(); ++r) {
    const int ru = reflect_index(r - 1, img.rows()), rd = reflect_index(r + 1, img.rows());
    for (int c = 0; c < img.cols(); ++c) {
      const int cl = reflect_index(c - 1, img.cols()), cr = reflect_index(c + 1, img.cols());
      for (int ch = 0; ch < img.channels(); ++ch) {
        const double v = (img(rd, cl, ch) - img(ru, cl, ch)) + 2.0 * (img(rd, c, ch) - img(ru, c, ch)) +
                         (img(rd, cr, ch) - img(ru, cr, ch));
        out(r, c, ch) = v / 8.0;
      }
    }
  }
  return out;
}

/// Integer translation: out(r, c) = in(r - dy, c - dx), edge samples replicated.
template <class T>
Image<T> shift_image(const Image<T>& img, int dx, int dy) {
  Image<T> out(img.rows(), img.cols(), img.channels());
  for (int r = 0; r < img.rows(); ++r) {
    const int sr = std::clamp(r - dy, 0, img.rows() - 1);
    for (int c = 0; c < img.cols(); ++c) {
      const int sc = std::clamp(c - dx, 0, img.cols() - 1);
      for (int ch = 0; ch < img.channels(); ++ch) out(r, c, ch) = img(sr, sc, ch);
    }
  }
  return out;
}

}  // namespace svbrdf
