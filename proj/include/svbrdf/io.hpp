#pragma once

// File formats: 8/16-bit PNG (and JPEG input) through OpenCV, float32 EXR
// through OpenEXR, response curves as CSV and calibration records as JSON.

#include <ImfChannelList.h>
#include <ImfFrameBuffer.h>
#include <ImfHeader.h>
#include <ImfInputFile.h>
#include <ImfOutputFile.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "svbrdf/error.hpp"
#include "svbrdf/geometry.hpp"
#include "svbrdf/image.hpp"
#include "svbrdf/radiometry.hpp"

namespace svbrdf::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

namespace detail {

template <class T>
constexpr int cv_depth() {
  if constexpr (std::is_same_v<T, std::uint8_t>) return CV_8U;
  else return CV_16U;
}

/// OpenCV matrix (BGR order) -> Image with RGB order.
template <class T>
Image<T> from_mat(const cv::Mat& mat) {
  const int ch = mat.channels();
  Image<T> out(mat.rows, mat.cols, ch);
  for (int r = 0; r < mat.rows; ++r) {
    const T* row = mat.ptr<T>(r);
    for (int c = 0; c < mat.cols; ++c)
      for (int k = 0; k < ch; ++k) out(r, c, k) = row[c * ch + (ch >= 3 && k < 3 ? 2 - k : k)];
  }
  return out;
}

template <class T>
cv::Mat to_mat(const Image<T>& img) {
  const int ch = img.channels();
  cv::Mat mat(img.rows(), img.cols(), CV_MAKETYPE(cv_depth<T>(), ch));
  for (int r = 0; r < img.rows(); ++r) {
    T* row = mat.ptr<T>(r);
    for (int c = 0; c < img.cols(); ++c)
      for (int k = 0; k < ch; ++k) row[c * ch + (ch >= 3 && k < 3 ? 2 - k : k)] = img(r, c, k);
  }
  return mat;
}

template <class T>
Image<T> read_with_depth(const fs::path& path, int flags) {
  if (!fs::exists(path)) throw IoError("file not found: " + path.string());
  cv::Mat mat;
  try {
    mat = cv::imread(path.string(), flags);
  } catch (const cv::Exception& e) {
    throw IoError("cannot decode " + path.string() + ": " + e.what());
  }
  if (mat.empty()) throw IoError("cannot decode " + path.string());
  if (mat.depth() != cv_depth<T>()) {
    cv::Mat converted;
    const double scale = cv_depth<T>() == CV_8U ? (mat.depth() == CV_16U ? 1.0 / 257.0 : 1.0) : (mat.depth() == CV_8U ? 257.0 : 1.0);
    mat.convertTo(converted, cv_depth<T>(), scale);
    mat = converted;
  }
  return from_mat<T>(mat);
}

template <class T>
void write_png(const fs::path& path, const Image<T>& img) {
  if (img.empty()) throw IoError("refusing to write an empty image to " + path.string());
  if (img.channels() != 1 && img.channels() != 3 && img.channels() != 4)
    throw IoError("PNG output needs 1, 3 or 4 channels: " + path.string());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), to_mat(img));
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

}  // namespace detail

/// 8-bit RGB image from PNG or JPEG; grayscale files are expanded to RGB.
inline Image8 read_image8(const fs::path& path) { return detail::read_with_depth<std::uint8_t>(path, cv::IMREAD_COLOR); }

/// 16-bit image with its stored channel count (1 or 3).
inline Image16 read_png16(const fs::path& path) { return detail::read_with_depth<std::uint16_t>(path, cv::IMREAD_UNCHANGED); }

inline void write_png8(const fs::path& path, const Image8& img) { detail::write_png(path, img); }
inline void write_png16(const fs::path& path, const Image16& img) { detail::write_png(path, img); }

// ---------------------------------------------------------------------------
// Map encodings

/// [0,1] values -> round(x * 65535); values outside [0,1] are clamped.
inline Image16 encode_unit(const ImageD& img) {
  Image16 out(img.rows(), img.cols(), img.channels());
  for (std::size_t i = 0; i < img.data().size(); ++i)
    out.data()[i] = static_cast<std::uint16_t>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * 65535.0));
  return out;
}

inline ImageD decode_unit(const Image16& img) {
  ImageD out(img.rows(), img.cols(), img.channels());
  for (std::size_t i = 0; i < img.data().size(); ++i) out.data()[i] = img.data()[i] / 65535.0;
  return out;
}

/// Unit vectors in [-1,1] -> (v + 1) / 2 in 16 bits.
inline Image16 encode_signed(const ImageD& img) {
  ImageD shifted(img.rows(), img.cols(), img.channels());
  for (std::size_t i = 0; i < img.data().size(); ++i) shifted.data()[i] = 0.5 * (img.data()[i] + 1.0);
  return encode_unit(shifted);
}

inline ImageD decode_signed(const Image16& img) {
  ImageD out = decode_unit(img);
  for (double& v : out.data()) v = 2.0 * v - 1.0;
  return out;
}

/// Decoded vectors renormalized to unit length.
inline ImageD decode_directions(const Image16& img) {
  ImageD out = decode_signed(img);
  if (out.channels() != 3) throw IoError("direction maps must have three channels");
  for (std::size_t p = 0; p < out.pixel_count(); ++p) {
    const Vec3 v(out.at_pixel(p, 0), out.at_pixel(p, 1), out.at_pixel(p, 2));
    const double n = v.norm();
    if (n > 0.0)
      for (int ch = 0; ch < 3; ++ch) out.at_pixel(p, ch) = v(ch) / n;
  }
  return out;
}

inline void write_unit_png(const fs::path& path, const ImageD& img) { write_png16(path, encode_unit(img)); }
inline ImageD read_unit_png(const fs::path& path) { return decode_unit(read_png16(path)); }

// ---------------------------------------------------------------------------
// EXR

/// Float32 EXR with channel Y (1 channel) or R, G, B (3 channels).
inline void write_exr(const fs::path& path, const ImageD& img) {
  if (img.empty()) throw IoError("refusing to write an empty image to " + path.string());
  if (img.channels() != 1 && img.channels() != 3) throw IoError("EXR output needs 1 or 3 channels: " + path.string());
  const int rows = img.rows(), cols = img.cols(), ch = img.channels();
  std::vector<float> buf(img.data().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(img.data()[i]);
  static const char* kRgb[] = {"R", "G", "B"};
  try {
    Imf::Header header(cols, rows);
    Imf::FrameBuffer fb;
    const std::size_t xs = sizeof(float) * static_cast<std::size_t>(ch);
    const std::size_t ys = xs * static_cast<std::size_t>(cols);
    for (int k = 0; k < ch; ++k) {
      const char* name = ch == 1 ? "Y" : kRgb[k];
      header.channels().insert(name, Imf::Channel(Imf::FLOAT));
      fb.insert(name, Imf::Slice(Imf::FLOAT, reinterpret_cast<char*>(buf.data() + k), xs, ys));
    }
    Imf::OutputFile file(path.string().c_str(), header);
    file.setFrameBuffer(fb);
    file.writePixels(rows);
  } catch (const std::exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
}

inline ImageD read_exr(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("file not found: " + path.string());
  try {
    Imf::InputFile file(path.string().c_str());
    const auto dw = file.header().dataWindow();
    const int cols = dw.max.x - dw.min.x + 1;
    const int rows = dw.max.y - dw.min.y + 1;
    const auto& channels = file.header().channels();
    std::vector<std::string> names;
    if (channels.findChannel("R") && channels.findChannel("G") && channels.findChannel("B")) names = {"R", "G", "B"};
    else if (channels.findChannel("Y")) names = {"Y"};
    else throw IoError("EXR has neither Y nor RGB channels");
    const int ch = static_cast<int>(names.size());
    std::vector<float> buf(static_cast<std::size_t>(rows) * cols * ch);
    const std::size_t xs = sizeof(float) * static_cast<std::size_t>(ch);
    const std::size_t ys = xs * static_cast<std::size_t>(cols);
    char* base = reinterpret_cast<char*>(buf.data()) - dw.min.x * static_cast<std::ptrdiff_t>(xs) - dw.min.y * static_cast<std::ptrdiff_t>(ys);
    Imf::FrameBuffer fb;
    for (int k = 0; k < ch; ++k)
      fb.insert(names[static_cast<std::size_t>(k)].c_str(), Imf::Slice(Imf::FLOAT, base + k * sizeof(float), xs, ys));
    file.setFrameBuffer(fb);
    file.readPixels(dw.min.y, dw.max.y);
    ImageD out(rows, cols, ch);
    for (std::size_t i = 0; i < buf.size(); ++i) out.data()[i] = buf[i];
    return out;
  } catch (const IoError&) {
    throw;
  } catch (const std::exception& e) {
    throw IoError("cannot read " + path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// JSON and text

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": malformed JSON: " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << std::setw(2) << doc << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

/// 256 rows "Z,g_R,g_G,g_B" after a header line.
inline void write_curve_csv(const fs::path& path, const ResponseCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "Z,g_R,g_G,g_B\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (int z = 0; z < kZLevels; ++z) out << z << ',' << curve.g[0][z] << ',' << curve.g[1][z] << ',' << curve.g[2][z] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline ResponseCurve read_curve_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  ResponseCurve curve;
  std::vector<bool> seen(kZLevels, false);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == 'Z') continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": not a number: " + cell);
      }
    }
    if (v.size() != 4) throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
    const int z = static_cast<int>(v[0]);
    if (z < 0 || z > kZMax || z != v[0]) throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": Z out of range");
    for (int ch = 0; ch < 3; ++ch) curve.g[ch][z] = v[static_cast<std::size_t>(ch) + 1];
    seen[static_cast<std::size_t>(z)] = true;
  }
  for (int z = 0; z < kZLevels; ++z)
    if (!seen[static_cast<std::size_t>(z)]) throw SchemaError(path.string() + ": missing row for Z = " + std::to_string(z));
  return curve;
}

// ---------------------------------------------------------------------------
// Calibration record

/// Result of gray-card calibration, valid for one camera setting.
struct CalibrationRecord {
  int version = 1;
  double e_gray = 0.0;            ///< light intensity in the gray card's normalized frame
  double r_gray_m = 0.0;          ///< camera-to-card distance
  std::vector<double> exposures;  ///< seconds, gray-card stack
  Vec3 light_pos{0.0, 0.0, 1.0};  ///< normalized frame of the gray-card shot
  std::string iso;                ///< capture tags that must match the sample session
  std::string white_balance;

  json to_json() const {
    return {{"version", version},
            {"E_gray", e_gray},
            {"r_gray_m", r_gray_m},
            {"exposures_s", exposures},
            {"light_position", {light_pos.x(), light_pos.y(), light_pos.z()}},
            {"iso", iso},
            {"white_balance", white_balance}};
  }

  static CalibrationRecord from_json(const json& j, const std::string& where = "calibration record") {
    auto need = [&](const char* key) -> const json& {
      if (!j.contains(key)) throw SchemaError(where + ": missing field '" + key + "'");
      return j.at(key);
    };
    CalibrationRecord r;
    try {
      r.version = j.value("version", 1);
      r.e_gray = need("E_gray").get<double>();
      r.r_gray_m = need("r_gray_m").get<double>();
      r.exposures = j.value("exposures_s", std::vector<double>{});
      if (j.contains("light_position")) {
        const auto v = j.at("light_position").get<std::vector<double>>();
        if (v.size() != 3) throw SchemaError(where + ": field 'light_position' needs 3 numbers");
        r.light_pos = Vec3(v[0], v[1], v[2]);
      }
      r.iso = j.value("iso", std::string{});
      r.white_balance = j.value("white_balance", std::string{});
    } catch (const json::type_error& e) {
      throw SchemaError(where + ": wrong type: " + e.what());
    }
    if (!(r.e_gray > 0.0)) throw SchemaError(where + ": field 'E_gray' must be positive");
    if (!(r.r_gray_m > 0.0)) throw SchemaError(where + ": field 'r_gray_m' must be positive");
    return r;
  }
};

}  // namespace svbrdf::io
