#pragma once

// Capture sessions and result bundles: the JSON config that ties photos and
// calibration artifacts together, its validation, and the on-disk layout of
// recovered maps.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "svbrdf/fitting.hpp"
#include "svbrdf/io.hpp"
#include "svbrdf/radiometry.hpp"

namespace svbrdf {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kSessionVersion = 1;
inline constexpr int kBundleVersion = 1;
inline constexpr int kMtbMaxShift = 32;

/// Fit settings carried by a session; CLI flags override individual fields.
struct FitSettings {
  int k = 500;
  double gamma_scale = 1.0;
  double height_sigma = 0.5;
  int n_iters = 5;
  std::uint64_t seed = 0;
};

/// Everything a fit needs, as written in the session config. Relative paths
/// are resolved against the config file's directory.
///
/// {
///   "version": 1,
///   "f35_mm": 26.0,                     // 35 mm equivalent focal length
///   "r_perp_m": 0.30,                   // camera-to-sample distance in metres
///   "ambient_image": "ambient.png",
///   "point_images": ["p0.png", ...],    // or "point_radiance": "target.exr"
///   "exposures_s": [0.01, ...],         // one per point image, seconds
///   "response_curve": "curve.csv",
///   "calibration": "calibration.json",
///   "metallic": false,
///   "iso": "100", "white_balance": "daylight",
///   "light_position": [x, y],           // optional, normalized frame
///   "fit": {"k": 500, "gamma_scale": 1, "height_sigma": 0.5, "n_iters": 5, "seed": 0},
///   "output_dir": "out"
/// }
struct SessionConfig {
  fs::path base_dir;
  double f35_mm = 0.0;
  double r_perp_m = 0.0;
  fs::path ambient_image;
  std::vector<fs::path> point_images;
  std::optional<fs::path> point_radiance;
  std::vector<double> exposures;
  fs::path response_curve;
  fs::path calibration;
  bool metallic = false;
  std::string iso;
  std::string white_balance;
  std::optional<Eigen::Vector2d> light_xy;
  FitSettings fit;
  fs::path output_dir;

  static SessionConfig from_json(const json& j, const fs::path& base_dir, const std::string& where = "session config") {
    if (!j.is_object()) throw SchemaError(where + ": top level must be an object");
    auto need = [&](const char* key) -> const json& {
      if (!j.contains(key)) throw SchemaError(where + ": missing field '" + std::string(key) + "'");
      return j.at(key);
    };
    auto number = [&](const json& v, const char* key) {
      if (!v.is_number()) throw SchemaError(where + ": field '" + std::string(key) + "' must be a number");
      return v.get<double>();
    };
    auto path = [&](const json& v, const char* key) {
      if (!v.is_string()) throw SchemaError(where + ": field '" + std::string(key) + "' must be a path string");
      const fs::path p = v.get<std::string>();
      return p.is_absolute() ? p : base_dir / p;
    };
    auto text = [&](const char* key) {
      if (!j.contains(key)) return std::string{};
      if (!j.at(key).is_string()) throw SchemaError(where + ": field '" + std::string(key) + "' must be a string");
      return j.at(key).get<std::string>();
    };

    const int version = j.contains("version") ? static_cast<int>(number(j.at("version"), "version")) : kSessionVersion;
    if (version != kSessionVersion)
      throw SchemaError(where + ": unsupported version " + std::to_string(version) + " (expected " + std::to_string(kSessionVersion) + ")");

    SessionConfig c;
    c.base_dir = base_dir;
    c.f35_mm = number(need("f35_mm"), "f35_mm");
    c.r_perp_m = number(need("r_perp_m"), "r_perp_m");
    c.ambient_image = path(need("ambient_image"), "ambient_image");
    c.response_curve = path(need("response_curve"), "response_curve");
    c.calibration = path(need("calibration"), "calibration");
    if (j.contains("point_radiance")) c.point_radiance = path(j.at("point_radiance"), "point_radiance");
    if (j.contains("point_images")) {
      const auto& list = j.at("point_images");
      if (!list.is_array()) throw SchemaError(where + ": field 'point_images' must be an array");
      for (const auto& v : list) c.point_images.push_back(path(v, "point_images"));
    }
    if (j.contains("exposures_s")) {
      const auto& list = j.at("exposures_s");
      if (!list.is_array()) throw SchemaError(where + ": field 'exposures_s' must be an array");
      for (const auto& v : list) c.exposures.push_back(number(v, "exposures_s"));
    }
    if (j.contains("metallic")) {
      if (!j.at("metallic").is_boolean()) throw SchemaError(where + ": field 'metallic' must be true or false");
      c.metallic = j.at("metallic").get<bool>();
    }
    c.iso = text("iso");
    c.white_balance = text("white_balance");
    if (j.contains("light_position")) {
      const auto& v = j.at("light_position");
      if (!v.is_array() || v.size() < 2 || !v[0].is_number() || !v[1].is_number())
        throw SchemaError(where + ": field 'light_position' must be [x, y]");
      c.light_xy = Eigen::Vector2d(v[0].get<double>(), v[1].get<double>());
    }
    if (j.contains("fit")) {
      const auto& f = j.at("fit");
      if (!f.is_object()) throw SchemaError(where + ": field 'fit' must be an object");
      if (f.contains("k")) c.fit.k = static_cast<int>(number(f.at("k"), "fit.k"));
      if (f.contains("gamma_scale")) c.fit.gamma_scale = number(f.at("gamma_scale"), "fit.gamma_scale");
      if (f.contains("height_sigma")) c.fit.height_sigma = number(f.at("height_sigma"), "fit.height_sigma");
      if (f.contains("n_iters")) c.fit.n_iters = static_cast<int>(number(f.at("n_iters"), "fit.n_iters"));
      if (f.contains("seed")) {
        if (!f.at("seed").is_number_unsigned()) throw SchemaError(where + ": field 'fit.seed' must be a non-negative integer");
        c.fit.seed = f.at("seed").get<std::uint64_t>();
      }
    }
    c.output_dir = j.contains("output_dir") ? path(j.at("output_dir"), "output_dir") : base_dir / "out";
    c.validate(where);
    return c;
  }

  static SessionConfig load(const fs::path& file) {
    const json j = io::read_json(file);
    return from_json(j, file.has_parent_path() ? file.parent_path() : fs::path("."), file.string());
  }

  void validate(const std::string& where = "session config") const {
    if (!(f35_mm > 0.0)) throw SchemaError(where + ": field 'f35_mm' must be positive");
    if (!(r_perp_m > 0.0)) throw SchemaError(where + ": field 'r_perp_m' must be positive");
    if (!point_radiance && point_images.empty())
      throw SchemaError(where + ": one of 'point_images' or 'point_radiance' is required");
    if (!point_images.empty() && exposures.size() != point_images.size())
      throw SchemaError(where + ": 'exposures_s' has " + std::to_string(exposures.size()) + " entries but 'point_images' has " +
                        std::to_string(point_images.size()));
    for (double t : exposures)
      if (!(t > 0.0)) throw SchemaError(where + ": field 'exposures_s' entries must be positive");
    if (fit.k < 1) throw SchemaError(where + ": field 'fit.k' must be positive");
    if (fit.n_iters < 1) throw SchemaError(where + ": field 'fit.n_iters' must be at least 1");
    if (!(fit.gamma_scale >= 0.0)) throw SchemaError(where + ": field 'fit.gamma_scale' must be non-negative");
    if (!(fit.height_sigma >= 0.0)) throw SchemaError(where + ": field 'fit.height_sigma' must be non-negative");
    auto exists = [&](const fs::path& p, const char* key) {
      if (!fs::exists(p)) throw SchemaError(where + ": field '" + std::string(key) + "' refers to missing file " + p.string());
    };
    exists(ambient_image, "ambient_image");
    exists(response_curve, "response_curve");
    exists(calibration, "calibration");
    if (point_radiance) exists(*point_radiance, "point_radiance");
    for (const auto& p : point_images) exists(p, "point_images");
  }
};

/// A decoded, aligned and calibrated capture.
struct Session {
  SessionConfig config;
  CameraSpec camera;
  SceneGeometry geom;
  ResponseCurve curve;
  io::CalibrationRecord calibration;
  ImageD ambient;                  ///< RGB in [0,1]
  ImageD target;                   ///< merged point-lit radiance
  std::vector<Shift> alignment;    ///< per point image, applied before merging
  double preview_exposure = 1.0;   ///< exposure that maps the target's peak to ~80% of g's range
};

inline Session load_session(const SessionConfig& config) {
  Session s;
  s.config = config;
  s.curve = io::read_curve_csv(config.response_curve);
  s.calibration = io::CalibrationRecord::from_json(io::read_json(config.calibration), config.calibration.string());
  auto tag_mismatch = [](const std::string& a, const std::string& b) { return !a.empty() && !b.empty() && a != b; };
  if (tag_mismatch(s.calibration.iso, config.iso))
    throw CalibrationError("calibration ISO '" + s.calibration.iso + "' does not match session ISO '" + config.iso + "'");
  if (tag_mismatch(s.calibration.white_balance, config.white_balance))
    throw CalibrationError("calibration white balance '" + s.calibration.white_balance + "' does not match session '" +
                           config.white_balance + "'");

  const Image8 ambient8 = io::read_image8(config.ambient_image);
  s.ambient = to_double(ambient8);
  for (double& v : s.ambient.data()) v /= 255.0;

  if (config.point_radiance) {
    s.target = io::read_exr(*config.point_radiance);
    if (s.target.channels() != 3) throw SchemaError("point radiance must be an RGB EXR: " + config.point_radiance->string());
  } else {
    ExposureStack stack;
    for (const auto& p : config.point_images) stack.images.push_back(io::read_image8(p));
    stack.exposures = config.exposures;
    stack.validate(1);
    if (stack.images.size() > 1) {
      s.alignment = mtb_align(stack, kMtbMaxShift);
      apply_shifts(stack, s.alignment);
    } else {
      s.alignment.assign(1, Shift{});
    }
    s.target = merge_radiance(stack, s.curve);
  }
  if (!s.target.same_size(s.ambient)) throw SchemaError("ambient and point images differ in size");

  s.camera = {config.f35_mm, s.ambient.cols(), s.ambient.rows()};
  s.camera.validate();
  s.geom.pixel_pitch = pixel_pitch(s.camera);
  s.geom.r_perp = config.r_perp_m;
  s.geom.light_intensity = scale_intensity(s.calibration.e_gray, s.calibration.r_gray_m, config.r_perp_m);
  if (config.light_xy) {
    s.geom.light_pos = Vec3(config.light_xy->x(), config.light_xy->y(), 1.0);
  } else {
    // The light sits at a fixed physical offset from the camera, so its
    // normalized xy scales with the inverse camera distance.
    const double ratio = s.calibration.r_gray_m / config.r_perp_m;
    s.geom.light_pos = Vec3(s.calibration.light_pos.x() * ratio, s.calibration.light_pos.y() * ratio, 1.0);
  }
  s.geom.validate();

  double max_l = 0.0;
  for (double v : s.target.data())
    if (std::isfinite(v)) max_l = std::max(max_l, v);
  const double top = std::exp(s.curve.log_exposure(kZMax, 0));
  s.preview_exposure = max_l > 0.0 ? 0.8 * top / max_l : 1.0;
  return s;
}

inline Session load_session(const fs::path& config_file) { return load_session(SessionConfig::load(config_file)); }

// ---------------------------------------------------------------------------
// Result bundle

/// Global values stored next to the maps.
struct BundleMetadata {
  int version = kBundleVersion;
  double light_intensity = 0.0;
  double r_perp_m = 0.0;
  double pixel_pitch = 0.0;
  double f35_mm = 0.0;
  Vec3 light_pos{0.0, 0.0, 1.0};
  double preview_exposure = 1.0;

  SceneGeometry geometry() const {
    SceneGeometry g;
    g.light_pos = light_pos;
    g.pixel_pitch = pixel_pitch;
    g.r_perp = r_perp_m;
    g.light_intensity = light_intensity;
    return g;
  }
};

struct SvbrdfBundle {
  MaterialSolution solution;
  BundleMetadata meta;
};

namespace bundle_files {
inline constexpr const char* kBaseColor = "basecolor.png";
inline constexpr const char* kSpecular = "specular.png";
inline constexpr const char* kSpecularTint = "specular_tint.png";
inline constexpr const char* kAnisotropic = "anisotropic.png";
inline constexpr const char* kAnisoAxis = "aniso_axis.png";
inline constexpr const char* kNormals = "normals.png";
inline constexpr const char* kTangents = "tangents.png";
inline constexpr const char* kHeight = "height.exr";
inline constexpr const char* kLabels = "labels.png";
inline constexpr const char* kMetadata = "bundle.json";
}  // namespace bundle_files

inline void export_bundle(const SvbrdfBundle& bundle, const fs::path& dir) {
  namespace bf = bundle_files;
  const auto& sol = bundle.solution;
  io::ensure_directory(dir);
  io::write_unit_png(dir / bf::kBaseColor, sol.base_color);
  io::write_unit_png(dir / bf::kSpecular, sol.specular);
  io::write_unit_png(dir / bf::kSpecularTint, sol.specular_tint);
  io::write_unit_png(dir / bf::kAnisotropic, sol.anisotropic);
  io::write_unit_png(dir / bf::kAnisoAxis, sol.aniso_axis);
  io::write_png16(dir / bf::kNormals, io::encode_signed(sol.normals));
  io::write_png16(dir / bf::kTangents, io::encode_signed(sol.tangents));
  if (!sol.height.empty()) io::write_exr(dir / bf::kHeight, sol.height);
  if (!sol.labels.empty()) {
    if (sol.k > 65536) throw IoError("label map supports at most 65536 clusters");
    Image16 labels(sol.rows, sol.cols, 1);
    for (std::size_t p = 0; p < sol.labels.size(); ++p) labels.at_pixel(p) = static_cast<std::uint16_t>(sol.labels[p]);
    io::write_png16(dir / bf::kLabels, labels);
  }

  json clusters = json::array();
  for (const auto& c : sol.clusters) {
    clusters.push_back({{"base_color", {c.base_color[0], c.base_color[1], c.base_color[2]}},
                        {"specular", c.specular},
                        {"specular_tint", c.specular_tint},
                        {"anisotropic", c.anisotropic},
                        {"aniso_axis", c.aniso_axis},
                        {"flagged", c.flagged}});
  }
  const auto& m = bundle.meta;
  const json doc = {{"version", m.version},
                    {"rows", sol.rows},
                    {"cols", sol.cols},
                    {"roughness", sol.roughness},
                    {"metallic", sol.metallic},
                    {"E", m.light_intensity},
                    {"r_perp_m", m.r_perp_m},
                    {"pixel_pitch", m.pixel_pitch},
                    {"f35_mm", m.f35_mm},
                    {"light_position", {m.light_pos.x(), m.light_pos.y(), m.light_pos.z()}},
                    {"preview_exposure", m.preview_exposure},
                    {"k", sol.k},
                    {"clusters", clusters}};
  io::write_json(dir / bf::kMetadata, doc);
}

inline SvbrdfBundle import_bundle(const fs::path& dir) {
  namespace bf = bundle_files;
  const fs::path meta_path = dir / bf::kMetadata;
  const json doc = io::read_json(meta_path);
  const std::string where = meta_path.string();
  auto need = [&](const char* key) -> const json& {
    if (!doc.contains(key)) throw SchemaError(where + ": missing field '" + std::string(key) + "'");
    return doc.at(key);
  };

  SvbrdfBundle b;
  auto& sol = b.solution;
  auto& m = b.meta;
  try {
    m.version = need("version").get<int>();
    if (m.version != kBundleVersion) throw SchemaError(where + ": unsupported bundle version " + std::to_string(m.version));
    sol.rows = need("rows").get<int>();
    sol.cols = need("cols").get<int>();
    sol.roughness = need("roughness").get<double>();
    sol.metallic = need("metallic").get<double>();
    m.light_intensity = need("E").get<double>();
    m.r_perp_m = need("r_perp_m").get<double>();
    m.pixel_pitch = need("pixel_pitch").get<double>();
    m.f35_mm = doc.value("f35_mm", 0.0);
    const auto lp = need("light_position").get<std::vector<double>>();
    if (lp.size() != 3) throw SchemaError(where + ": field 'light_position' needs 3 numbers");
    m.light_pos = Vec3(lp[0], lp[1], lp[2]);
    m.preview_exposure = doc.value("preview_exposure", 1.0);
    sol.k = doc.value("k", 0);
    if (doc.contains("clusters")) {
      for (const auto& c : doc.at("clusters")) {
        ClusterParams p;
        const auto bc = c.at("base_color").get<std::vector<double>>();
        if (bc.size() != 3) throw SchemaError(where + ": cluster base_color needs 3 numbers");
        p.base_color = Rgb(bc[0], bc[1], bc[2]);
        p.specular = c.at("specular").get<double>();
        p.specular_tint = c.at("specular_tint").get<double>();
        p.anisotropic = c.at("anisotropic").get<double>();
        p.aniso_axis = c.at("aniso_axis").get<double>();
        p.flagged = c.value("flagged", false);
        sol.clusters.push_back(p);
      }
    }
  } catch (const json::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }

  auto check = [&](const ImageD& img, const char* name, int channels) {
    if (img.rows() != sol.rows || img.cols() != sol.cols || img.channels() != channels)
      throw SchemaError((dir / name).string() + ": size or channel count does not match bundle metadata");
  };
  sol.base_color = io::read_unit_png(dir / bf::kBaseColor);
  check(sol.base_color, bf::kBaseColor, 3);
  sol.specular = io::read_unit_png(dir / bf::kSpecular);
  check(sol.specular, bf::kSpecular, 1);
  sol.specular_tint = io::read_unit_png(dir / bf::kSpecularTint);
  check(sol.specular_tint, bf::kSpecularTint, 1);
  sol.anisotropic = io::read_unit_png(dir / bf::kAnisotropic);
  check(sol.anisotropic, bf::kAnisotropic, 1);
  sol.aniso_axis = io::read_unit_png(dir / bf::kAnisoAxis);
  check(sol.aniso_axis, bf::kAnisoAxis, 1);
  sol.normals = io::decode_directions(io::read_png16(dir / bf::kNormals));
  check(sol.normals, bf::kNormals, 3);
  sol.tangents = io::decode_directions(io::read_png16(dir / bf::kTangents));
  check(sol.tangents, bf::kTangents, 3);
  if (fs::exists(dir / bf::kHeight)) {
    sol.height = io::read_exr(dir / bf::kHeight);
    check(sol.height, bf::kHeight, 1);
  }
  if (fs::exists(dir / bf::kLabels)) {
    const Image16 labels = io::read_png16(dir / bf::kLabels);
    if (labels.rows() != sol.rows || labels.cols() != sol.cols || labels.channels() != 1)
      throw SchemaError((dir / bf::kLabels).string() + ": size does not match bundle metadata");
    sol.labels.resize(labels.pixel_count());
    for (std::size_t p = 0; p < labels.pixel_count(); ++p) sol.labels[p] = labels.at_pixel(p);
  }
  return b;
}

}  // namespace svbrdf
