// svbrdf: command-line front end for calibration, fitting, previews and
// synthetic test sessions.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svbrdf/io.hpp"
#include "svbrdf/session.hpp"
#include "svbrdf/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace svbrdf;

namespace {

enum ExitCode : int { kOk = 0, kValidation = 2, kCalibration = 3, kFit = 4 };

/// Diagnostics as JSON lines on stdout, mirrored to a file when one is open.
class Diagnostics {
 public:
  void open(const fs::path& path) {
    file_.open(path);
    if (!file_) throw IoError("cannot write " + path.string());
  }
  void emit(const json& record) {
    const std::string line = record.dump();
    std::cout << line << '\n' << std::flush;
    if (file_) file_ << line << '\n' << std::flush;
  }

 private:
  std::ofstream file_;
};

std::vector<fs::path> path_list(const json& j, const char* key, const fs::path& base, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).empty())
    throw SchemaError(where + ": field '" + std::string(key) + "' must be a non-empty array of paths");
  std::vector<fs::path> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_string()) throw SchemaError(where + ": field '" + std::string(key) + "' must contain path strings");
    const fs::path p = v.get<std::string>();
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

std::vector<double> number_list(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array()) throw SchemaError(where + ": missing field '" + std::string(key) + "'");
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) throw SchemaError(where + ": field '" + std::string(key) + "' must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

double positive_number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw SchemaError(where + ": missing field '" + std::string(key) + "'");
  if (!j.at(key).is_number() || !(j.at(key).get<double>() > 0.0))
    throw SchemaError(where + ": field '" + std::string(key) + "' must be a positive number");
  return j.at(key).get<double>();
}

fs::path config_base(const fs::path& config) { return config.has_parent_path() ? config.parent_path() : fs::path("."); }

ExposureStack load_stack(const std::vector<fs::path>& images, const std::vector<double>& exposures, const std::string& where) {
  if (images.size() != exposures.size())
    throw SchemaError(where + ": 'exposures_s' has " + std::to_string(exposures.size()) + " entries but there are " +
                      std::to_string(images.size()) + " images");
  ExposureStack stack;
  for (const auto& p : images) stack.images.push_back(io::read_image8(p));
  stack.exposures = exposures;
  stack.validate(1);
  return stack;
}

// ---------------------------------------------------------------------------
// calibrate-response
//
// { "card_images": [...], "exposures_s": [...], "lambda": 100 }

void calibrate_response(const fs::path& config, const fs::path& out_dir, Diagnostics& diag) {
  const json j = io::read_json(config);
  const std::string where = config.string();
  const auto images = path_list(j, "card_images", config_base(config), where);
  ExposureStack stack = load_stack(images, number_list(j, "exposures_s", where), where);
  if (stack.images.size() < 2) throw SchemaError(where + ": response recovery needs at least two exposures");
  const double lambda = j.value("lambda", 100.0);
  if (!(lambda > 0.0)) throw SchemaError(where + ": field 'lambda' must be positive");

  const auto shifts = mtb_align(stack, kMtbMaxShift);
  apply_shifts(stack, shifts);
  std::vector<ImageD> cards;
  for (const auto& img : stack.images) cards.push_back(downsample_card(img));
  const ResponseCurve curve = solve_response(cards, stack.exposures, lambda);

  io::ensure_directory(out_dir);
  io::write_curve_csv(out_dir / "curve.csv", curve);
  json shift_list = json::array();
  for (const auto& s : shifts) shift_list.push_back({s.dx, s.dy});
  diag.emit({{"command", "calibrate-response"}, {"frames", stack.images.size()}, {"shifts", shift_list},
             {"curve", (out_dir / "curve.csv").string()}});
}

// ---------------------------------------------------------------------------
// calibrate-gray
//
// { "gray_images": [...], "exposures_s": [...], "response_curve": "curve.csv",
//   "f35_mm": 26, "r_gray_m": 0.3, "light_position": [x, y] (optional),
//   "iso": "...", "white_balance": "..." }

void calibrate_gray(const fs::path& config, const fs::path& out_dir, Diagnostics& diag) {
  const json j = io::read_json(config);
  const std::string where = config.string();
  const fs::path base = config_base(config);
  const auto images = path_list(j, "gray_images", base, where);
  ExposureStack stack = load_stack(images, number_list(j, "exposures_s", where), where);
  if (!j.contains("response_curve") || !j.at("response_curve").is_string())
    throw SchemaError(where + ": missing field 'response_curve'");
  fs::path curve_path = j.at("response_curve").get<std::string>();
  if (curve_path.is_relative()) curve_path = base / curve_path;
  const ResponseCurve curve = io::read_curve_csv(curve_path);

  io::CalibrationRecord rec;
  const double f35 = positive_number(j, "f35_mm", where);
  rec.r_gray_m = positive_number(j, "r_gray_m", where);
  rec.exposures = stack.exposures;
  rec.iso = j.value("iso", std::string{});
  rec.white_balance = j.value("white_balance", std::string{});

  if (stack.images.size() > 1) apply_shifts(stack, mtb_align(stack, kMtbMaxShift));
  const ImageD radiance = merge_radiance(stack, curve);
  CameraSpec camera{f35, radiance.cols(), radiance.rows()};
  camera.validate();
  SceneGeometry geom;
  geom.pixel_pitch = pixel_pitch(camera);
  geom.r_perp = rec.r_gray_m;
  geom.light_intensity = 1.0;
  if (j.contains("light_position")) {
    const auto v = j.at("light_position").get<std::vector<double>>();
    if (v.size() < 2) throw SchemaError(where + ": field 'light_position' must be [x, y]");
    geom.light_pos = Vec3(v[0], v[1], 1.0);
  } else {
    geom.light_pos = estimate_light_position(to_gray(radiance), camera, geom.pixel_pitch);
  }
  rec.light_pos = geom.light_pos;
  rec.e_gray = gray_card_intensity(radiance, geom);
  if (!(rec.e_gray > 0.0) || !std::isfinite(rec.e_gray)) throw CalibrationError("gray card gave a non-positive intensity");

  io::ensure_directory(out_dir);
  io::write_json(out_dir / "calibration.json", rec.to_json());
  diag.emit({{"command", "calibrate-gray"}, {"E_gray", rec.e_gray},
             {"light_position", {rec.light_pos.x(), rec.light_pos.y(), rec.light_pos.z()}},
             {"record", (out_dir / "calibration.json").string()}});
}

// ---------------------------------------------------------------------------
// fit

struct FitOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<double> gamma_scale;
  std::optional<double> height_sigma;
  std::optional<int> iters;
  bool debug_dumps = false;
};

void apply_overrides(SessionConfig& cfg, const FitOverrides& o) {
  if (o.seed) cfg.fit.seed = *o.seed;
  if (o.k) cfg.fit.k = *o.k;
  if (o.gamma_scale) cfg.fit.gamma_scale = *o.gamma_scale;
  if (o.height_sigma) cfg.fit.height_sigma = *o.height_sigma;
  if (o.iters) cfg.fit.n_iters = *o.iters;
  if (cfg.fit.k < 1) throw SchemaError("--k must be positive");
  if (cfg.fit.n_iters < 1) throw SchemaError("--iters must be at least 1");
  if (!(cfg.fit.gamma_scale >= 0.0)) throw SchemaError("--gamma-scale must be non-negative");
  if (!(cfg.fit.height_sigma >= 0.0)) throw SchemaError("--height-sigma must be non-negative");
}

BundleMetadata metadata_of(const Session& s) {
  BundleMetadata m;
  m.light_intensity = s.geom.light_intensity;
  m.r_perp_m = s.geom.r_perp;
  m.pixel_pitch = s.geom.pixel_pitch;
  m.f35_mm = s.camera.f35_mm;
  m.light_pos = s.geom.light_pos;
  m.preview_exposure = s.preview_exposure;
  return m;
}

void fit(const fs::path& config, std::optional<fs::path> out_dir, const FitOverrides& overrides, Diagnostics& diag) {
  SessionConfig cfg = SessionConfig::load(config);
  apply_overrides(cfg, overrides);
  const fs::path out = out_dir.value_or(cfg.output_dir);
  const Session session = load_session(cfg);
  io::ensure_directory(out);
  diag.open(out / "diagnostics.jsonl");
  diag.emit({{"command", "fit"}, {"stage", "session"}, {"rows", session.ambient.rows()}, {"cols", session.ambient.cols()},
             {"E", session.geom.light_intensity},
             {"light_position", {session.geom.light_pos.x(), session.geom.light_pos.y(), session.geom.light_pos.z()}}});

  FitConfig fc = FitConfig::defaults(session.ambient.rows(), session.ambient.cols(), cfg.fit.n_iters);
  fc.k = cfg.fit.k;
  fc.gamma_scale = cfg.fit.gamma_scale;
  fc.height_sigma = cfg.fit.height_sigma;
  fc.seed = cfg.fit.seed;

  const BundleMetadata meta = metadata_of(session);
  const auto report = [&](const StageReport& r) {
    diag.emit({{"iteration", r.iteration}, {"stage", r.stage}, {"objective", r.objective}, {"seconds", r.seconds},
               {"flagged_clusters", r.flagged_clusters}});
    if (overrides.debug_dumps && r.solution && (r.stage == "clusters" || r.stage == "blur")) {
      const fs::path dump = out / "debug" / ("iter" + std::to_string(r.iteration) + "_" + r.stage);
      export_bundle({*r.solution, meta}, dump);
    }
  };
  const PipelineResult result = run_pipeline(session.ambient, session.target, session.geom, fc, cfg.metallic, report);

  export_bundle({result.solution, meta}, out);
  io::write_exr(out / "target_radiance.exr", session.target);
  io::write_png8(out / "preview.png", render_preview(result.solution, session.geom, session.preview_exposure, session.curve));
  diag.emit({{"command", "fit"}, {"stage", "done"}, {"roughness", result.solution.roughness},
             {"residual_history", result.residual_history}, {"bundle", out.string()}});
}

// ---------------------------------------------------------------------------
// render-preview

struct PreviewOptions {
  fs::path bundle;
  std::optional<fs::path> curve;
  std::optional<double> exposure;
  std::vector<double> light_xy;
  std::optional<double> intensity;
};

void preview(const PreviewOptions& o, const fs::path& out_file, Diagnostics& diag) {
  const SvbrdfBundle b = import_bundle(o.bundle);
  SceneGeometry geom = b.meta.geometry();
  if (!o.light_xy.empty()) {
    if (o.light_xy.size() != 2) throw SchemaError("--light expects two numbers");
    geom.light_pos = Vec3(o.light_xy[0], o.light_xy[1], 1.0);
  }
  if (o.intensity) geom.light_intensity = *o.intensity;
  geom.validate();
  const ResponseCurve curve = o.curve ? io::read_curve_csv(*o.curve) : ResponseCurve::from_gamma(2.2);
  const double exposure = o.exposure.value_or(b.meta.preview_exposure);
  if (!(exposure > 0.0)) throw SchemaError("--exposure must be positive");
  if (out_file.has_parent_path()) io::ensure_directory(out_file.parent_path());
  io::write_png8(out_file, render_preview(b.solution, geom, exposure, curve));
  diag.emit({{"command", "render-preview"}, {"exposure", exposure}, {"image", out_file.string()}});
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  int size = 256;
  double bump_amplitude = SynthSpec{}.bump_amplitude;
};

Image8 photo_at(const ImageD& radiance, double exposure, const ResponseCurve& curve) {
  return radiance_to_ldr(radiance, exposure, curve);
}

void synth(const fs::path& out, std::uint64_t seed, const SynthOptions& o, Diagnostics& diag) {
  SynthSpec spec;
  spec.rows = spec.cols = o.size;
  spec.seed = seed;
  spec.bump_amplitude = o.bump_amplitude;
  const SynthScene scene = synth_generate(spec);
  io::ensure_directory(out);
  io::ensure_directory(out / "calibration");

  // Colour card stack for calibrate-response: card values act as linear radiance.
  const Image8 card = generate_color_card(8, seed);
  ImageD card_radiance = to_double(card);
  for (double& v : card_radiance.data()) v = (v + 1.0) / 256.0;
  json card_cfg = {{"card_images", json::array()}, {"exposures_s", json::array()}, {"lambda", 100.0}};
  for (int i = 0; i < 8; ++i) {
    const double t = std::pow(2.0, i - 5);
    const std::string name = "calibration/card_" + std::to_string(i) + ".png";
    io::write_png8(out / name, photo_at(card_radiance, t, scene.curve));
    card_cfg["card_images"].push_back(name);
    card_cfg["exposures_s"].push_back(t);
  }
  io::write_json(out / "calibrate_response.json", card_cfg);

  // Gray-card stack for calibrate-gray, shot at the sample distance.
  MaterialSolution gray = MaterialSolution::uniform(spec.rows, spec.cols, DisneyParams{});
  ImageD gray_radiance(spec.rows, spec.cols, 3);
  for (std::size_t p = 0; p < gray_radiance.pixel_count(); ++p) {
    const auto light = pixel_lighting(p, spec.rows, spec.cols, scene.geom);
    const double cos_i = std::max(0.0, light.to_light.z());
    for (int ch = 0; ch < 3; ++ch) gray_radiance.at_pixel(p, ch) = lambertian_reference() * light.irradiance_scale * cos_i;
  }
  double gray_max = 0.0;
  for (double v : gray_radiance.data()) gray_max = std::max(gray_max, v);
  json gray_cfg = {{"gray_images", json::array()}, {"exposures_s", json::array()}, {"response_curve", "calibration/curve.csv"},
                   {"f35_mm", spec.f35_mm}, {"r_gray_m", spec.r_perp_m}, {"iso", "100"}, {"white_balance", "daylight"}};
  for (int i = 0; i < 3; ++i) {
    const double t = 0.8 / gray_max * std::pow(4.0, i - 1);
    const std::string name = "calibration/gray_" + std::to_string(i) + ".png";
    io::write_png8(out / name, photo_at(gray_radiance, t, scene.curve));
    gray_cfg["gray_images"].push_back(name);
    gray_cfg["exposures_s"].push_back(t);
  }
  io::write_json(out / "calibrate_gray.json", gray_cfg);

  // Sample captures: ambient photo, float radiance and a 3-frame point stack.
  io::write_png8(out / "ambient.png", scene.ambient_photo);
  io::write_exr(out / "point_radiance.exr", scene.point_radiance);
  io::write_curve_csv(out / "curve.csv", scene.curve);
  io::CalibrationRecord rec;
  rec.e_gray = spec.light_intensity;
  rec.r_gray_m = spec.r_perp_m;
  rec.light_pos = spec.light_pos;
  rec.iso = "100";
  rec.white_balance = "daylight";
  io::write_json(out / "calibration.json", rec.to_json());
  json stack_images = json::array(), stack_exposures = json::array();
  for (int i = 0; i < 3; ++i) {
    const double t = scene.exposure * std::pow(4.0, i - 1);
    const std::string name = "point_" + std::to_string(i) + ".png";
    io::write_png8(out / name, photo_at(scene.point_radiance, t, scene.curve));
    stack_images.push_back(name);
    stack_exposures.push_back(t);
  }

  const json fit_block = {{"k", 16}, {"gamma_scale", 1.0}, {"height_sigma", spec.height_sigma}, {"n_iters", 5}, {"seed", seed}};
  json session = {{"version", kSessionVersion},
                  {"f35_mm", spec.f35_mm},
                  {"r_perp_m", spec.r_perp_m},
                  {"ambient_image", "ambient.png"},
                  {"point_radiance", "point_radiance.exr"},
                  {"response_curve", "curve.csv"},
                  {"calibration", "calibration.json"},
                  {"metallic", spec.metallic},
                  {"iso", "100"},
                  {"white_balance", "daylight"},
                  {"fit", fit_block},
                  {"output_dir", "fit"}};
  io::write_json(out / "session.json", session);
  session.erase("point_radiance");
  session["point_images"] = stack_images;
  session["exposures_s"] = stack_exposures;
  session["output_dir"] = "fit_stack";
  io::write_json(out / "session_stack.json", session);
  // Same stack, but through the artifacts produced by calibrate-response and
  // calibrate-gray run with --out <dir>/calibration. The solved curve has its
  // own gauge, so E and the merged radiance share one unknown scale that
  // cancels in the fit.
  session["response_curve"] = "calibration/curve.csv";
  session["calibration"] = "calibration/calibration.json";
  session["output_dir"] = "fit_calibrated";
  io::write_json(out / "session_calibrated.json", session);

  BundleMetadata meta;
  meta.light_intensity = scene.geom.light_intensity;
  meta.r_perp_m = scene.geom.r_perp;
  meta.pixel_pitch = scene.geom.pixel_pitch;
  meta.f35_mm = spec.f35_mm;
  meta.light_pos = scene.geom.light_pos;
  meta.preview_exposure = scene.exposure;
  export_bundle({scene.truth, meta}, out / "truth");
  diag.emit({{"command", "synth"}, {"seed", seed}, {"size", spec.rows}, {"exposure", scene.exposure}, {"out", out.string()}});
}

// ---------------------------------------------------------------------------
// cluster-debug

void cluster_debug(const fs::path& config, std::optional<fs::path> out_dir, const FitOverrides& overrides, Diagnostics& diag) {
  SessionConfig cfg = SessionConfig::load(config);
  apply_overrides(cfg, overrides);
  const fs::path out = out_dir.value_or(cfg.output_dir);
  const Image8 ambient8 = io::read_image8(cfg.ambient_image);
  ImageD ambient = to_double(ambient8);
  for (double& v : ambient.data()) v /= 255.0;

  const auto t0 = std::chrono::steady_clock::now();
  const auto features = extract_features(ambient, cfg.fit.seed);
  const double gamma = default_gamma(features) * cfg.fit.gamma_scale;
  const ClusterModel model = kprototypes_fit(features, cfg.fit.k, gamma, cfg.fit.seed);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // Each cluster painted with its mean ambient colour, plus the raw label map.
  std::vector<std::array<double, 3>> sums(static_cast<std::size_t>(model.k), {0.0, 0.0, 0.0});
  std::vector<std::size_t> counts(static_cast<std::size_t>(model.k), 0);
  for (std::size_t p = 0; p < model.labels.size(); ++p) {
    const auto l = static_cast<std::size_t>(model.labels[p]);
    ++counts[l];
    for (int ch = 0; ch < 3; ++ch) sums[l][static_cast<std::size_t>(ch)] += ambient8.at_pixel(p, ch);
  }
  Image8 painted(ambient8.rows(), ambient8.cols(), 3);
  Image16 labels(ambient8.rows(), ambient8.cols(), 1);
  for (std::size_t p = 0; p < model.labels.size(); ++p) {
    const auto l = static_cast<std::size_t>(model.labels[p]);
    labels.at_pixel(p) = static_cast<std::uint16_t>(l);
    for (int ch = 0; ch < 3; ++ch)
      painted.at_pixel(p, ch) = static_cast<std::uint8_t>(std::lround(sums[l][static_cast<std::size_t>(ch)] / static_cast<double>(counts[l])));
  }
  io::ensure_directory(out);
  io::write_png8(out / "clusters.png", painted);
  io::write_png16(out / "labels.png", labels);
  diag.emit({{"command", "cluster-debug"}, {"k", model.k}, {"gamma", model.gamma}, {"iterations", model.iterations},
             {"converged", model.converged}, {"cost_history", model.cost_history}, {"cluster_sizes", counts},
             {"seconds", seconds}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially varying BRDF capture from a flash photo and an ambient photo"};
  app.require_subcommand(1);

  fs::path config, out;
  std::uint64_t seed = 1;
  FitOverrides overrides;
  PreviewOptions preview_opts;
  SynthOptions synth_opts;
  std::optional<std::string> out_opt;

  auto add_fit_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Session config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_opt, "Output directory (defaults to the config's output_dir)");
    sub->add_option("--seed", overrides.seed, "Clustering seed");
    sub->add_option("--k", overrides.k, "Number of clusters");
    sub->add_option("--gamma-scale", overrides.gamma_scale, "Multiplier on the default texture weight");
    sub->add_option("--height-sigma", overrides.height_sigma, "Height-map scaling factor");
  };

  auto* cmd_resp = app.add_subcommand("calibrate-response", "Recover the camera response curve from colour-card photos");
  cmd_resp->add_option("--config", config, "Card stack config (JSON)")->required()->check(CLI::ExistingFile);
  cmd_resp->add_option("--out", out, "Output directory")->required();

  auto* cmd_gray = app.add_subcommand("calibrate-gray", "Measure the light intensity from gray-card photos");
  cmd_gray->add_option("--config", config, "Gray-card config (JSON)")->required()->check(CLI::ExistingFile);
  cmd_gray->add_option("--out", out, "Output directory")->required();

  auto* cmd_fit = app.add_subcommand("fit", "Recover svBRDF maps for a capture session");
  add_fit_flags(cmd_fit);
  cmd_fit->add_option("--iters", overrides.iters, "Number of outer iterations");
  cmd_fit->add_flag("--debug-dumps", overrides.debug_dumps, "Write intermediate maps after every iteration");

  auto* cmd_prev = app.add_subcommand("render-preview", "Render a bundle to an 8-bit image through the response curve");
  cmd_prev->add_option("--bundle", preview_opts.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  cmd_prev->add_option("--curve", preview_opts.curve, "Response curve CSV (default: gamma 2.2)");
  cmd_prev->add_option("--exposure", preview_opts.exposure, "Exposure multiplier (default: stored in the bundle)");
  cmd_prev->add_option("--light", preview_opts.light_xy, "Light position x y in the normalized frame")->expected(2);
  cmd_prev->add_option("--intensity", preview_opts.intensity, "Light intensity E");
  cmd_prev->add_option("--out", out, "Output PNG")->required();

  auto* cmd_synth = app.add_subcommand("synth", "Write a synthetic session with known ground truth");
  cmd_synth->add_option("--out", out, "Output directory")->required();
  cmd_synth->add_option("--seed", seed, "Generator seed");
  cmd_synth->add_option("--size", synth_opts.size, "Image side in pixels")->check(CLI::Range(40, 4096));
  cmd_synth->add_option("--bump", synth_opts.bump_amplitude, "Shading bump amplitude")->check(CLI::Range(0.0, 0.45));

  auto* cmd_cluster = app.add_subcommand("cluster-debug", "Cluster the ambient image and write the label maps");
  add_fit_flags(cmd_cluster);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  Diagnostics diag;
  try {
    const std::optional<fs::path> out_dir = out_opt ? std::optional<fs::path>(*out_opt) : std::nullopt;
    if (*cmd_resp) calibrate_response(config, out, diag);
    else if (*cmd_gray) calibrate_gray(config, out, diag);
    else if (*cmd_fit) fit(config, out_dir, overrides, diag);
    else if (*cmd_prev) preview(preview_opts, out, diag);
    else if (*cmd_synth) synth(out, seed, synth_opts, diag);
    else if (*cmd_cluster) cluster_debug(config, out_dir, overrides, diag);
    return kOk;
  } catch (const CalibrationError& e) {
    std::cerr << "calibration error: " << e.what() << '\n';
    return kCalibration;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kFit;
  } catch (const DegenerateInputError& e) {
    const bool calibrating = *cmd_resp || *cmd_gray;
    std::cerr << (calibrating ? "calibration error: " : "fit error: ") << e.what() << '\n';
    return calibrating ? kCalibration : kFit;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
}
