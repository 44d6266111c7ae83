// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "support.hpp"
#include "svbrdf/brdf.hpp"
#include "svbrdf/clustering.hpp"
#include "svbrdf/fitting.hpp"
#include "svbrdf/geometry.hpp"
#include "svbrdf/heightfield.hpp"
#include "svbrdf/radiometry.hpp"
#include "svbrdf/synth.hpp"

using namespace svbrdf;
using namespace svbrdf::testing;

namespace {

using clock_type = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(clock_type::time_point t0) { return std::chrono::duration<double>(clock_type::now() - t0).count(); }

ShadingFrame frame_for(const Vec3& n, double axis) { return ShadingFrame::from_normal_tangent(n, tangent_from_axis(n, axis)); }

// ---------------------------------------------------------------------------

Outcome criterion_brdf() {
  Outcome o;
  const auto t0 = clock_type::now();
  DisneyParams p;
  p.base_color = Rgb(0.5, 0.5, 0.5);
  p.metallic = 0.0;
  p.specular = 0.5;
  p.specular_tint = 0.0;
  p.roughness = 0.5;
  p.anisotropic = 0.0;
  const Vec3 n = Vec3::UnitZ();
  const Rgb hand = eval_disney(p, frame_for(n, 0.0), n, n);
  double err = 0;
  for (int ch = 0; ch < 3; ++ch) err = std::max(err, std::abs(hand[ch] - 0.210084));
  o.check(err < 1e-6, "hand value |f-0.210084|=" + fmt("%.2e", err));

  std::mt19937_64 rng(1);
  double metal = 0, tangent = 0, flip = 0, recip = 0;
  for (int i = 0; i < 500; ++i) {
    DisneyParams q = random_params(rng);
    const Vec3 nn = random_hemisphere(rng);
    const Vec3 l = random_hemisphere(rng), v = random_hemisphere(rng);
    const Vec3 t = tangent_from_axis(nn, q.aniso_axis);
    const auto frame = ShadingFrame::from_normal_tangent(nn, t);
    auto rel = [](double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a)); };

    DisneyParams m = q;
    m.metallic = 1.0;
    if (l.dot(nn) > 0 && v.dot(nn) > 0) {
      const Rgb f = eval_disney(m, frame, l, v), s = metal_specular_lobe(m, nn, t, l, v);
      for (int ch = 0; ch < 3; ++ch) metal = std::max(metal, rel(f[ch], s[ch]));
    }
    DisneyParams iso = q;
    iso.anisotropic = 0.0;
    const Rgb a = eval_disney(iso, frame_for(nn, 0.0), l, v), b = eval_disney(iso, frame_for(nn, 0.37), l, v);
    const Rgb c = eval_disney(q, frame, l, v), d = eval_disney(q, ShadingFrame::from_normal_tangent(nn, -t), l, v);
    const Rgb e = eval_disney(q, frame, v, l);
    for (int ch = 0; ch < 3; ++ch) {
      tangent = std::max(tangent, rel(a[ch], b[ch]));
      flip = std::max(flip, rel(c[ch], d[ch]));
      recip = std::max(recip, rel(c[ch], e[ch]));
    }
  }
  o.check(metal < 1e-10, "metallic=1 equals pure specular lobe (rel " + fmt("%.1e", metal) + ")");
  o.check(tangent <= 1e-12, "isotropic tangent invariance " + fmt("%.1e", tangent));
  o.check(flip <= 1e-12, "t->-t " + fmt("%.1e", flip));
  o.check(recip <= 1e-12, "reciprocity " + fmt("%.1e", recip));
  const double s = seconds_since(t0);
  o.check(s < 1.0, "runtime " + fmt("%.3fs", s));
  return o;
}

Outcome criterion_geometry() {
  Outcome o;
  const double a = std::abs(half_aov({43.3, 100, 100}) - std::atan(0.5));
  o.check(a < 1e-9, "f35=43.3 -> atan(0.5), err " + fmt("%.1e", a));
  const double q = std::abs(half_aov({21.65, 100, 100}) - std::numbers::pi / 4);
  o.check(q < 1e-9, "f35=21.65 -> pi/4, err " + fmt("%.1e", q));
  const double d = std::abs(pixel_pitch({43.3, 1000, 1000}) - 1.0 / (1000.0 * std::sqrt(2.0)));
  o.check(d < 1e-9, "1000x1000 pitch " + fmt("%.7e", pixel_pitch({43.3, 1000, 1000})) + ", err " + fmt("%.1e", d));
  return o;
}

Outcome criterion_depth_curve() {
  Outcome o;
  const double left = std::sqrt(1.0 / 0.5 - 1.0), right = 2.0 * (1.0 - 0.5);
  o.check(std::abs(depth_curve(0.5) - 1.0) < 1e-12 && left == right, "D(0.5)=1 on both branches");
  const double jump = std::abs(depth_curve(std::nextafter(0.5, 0.0)) - depth_curve(std::nextafter(0.5, 1.0)));
  o.check(jump < 1e-12, "continuity at 0.5 " + fmt("%.1e", jump));
  o.check(std::abs(depth_curve(1.0)) < 1e-12, "D(1)=0");
  const double e = std::abs(depth_curve(0.25) - std::sqrt(3.0));
  o.check(e < 1e-12, "D(0.25)=sqrt(3), err " + fmt("%.1e", e));
  return o;
}

Outcome criterion_response() {
  Outcome o;
  const auto t0 = clock_type::now();
  for (double gamma : {1.0, 2.2}) {
    const SyntheticCamera cam{gamma};
    const auto s = response_stack(cam, gamma == 1.0 ? 5 : 6);
    const ResponseCurve c = solve_response(s.cards, s.exposures);
    double worst = 0;
    bool mono = true;
    for (int ch = 0; ch < 3; ++ch) {
      worst = std::max(worst, curve_error(c, ch, [&](int z) { return cam.true_g(z); }));
      mono = mono && curve_monotone(c, ch);
    }
    o.check(worst < 0.05, "gamma " + fmt("%.1f", gamma) + " max gauge-free error " + fmt("%.4f", worst));
    o.check(mono, "gamma " + fmt("%.1f", gamma) + " monotone on [20,235]");
  }
  const double s = seconds_since(t0);
  o.check(s < 10.0, "runtime " + fmt("%.2fs", s));
  return o;
}

Outcome criterion_gray_card() {
  Outcome o;
  SceneGeometry g;
  g.pixel_pitch = pixel_pitch({26.0, 300, 200});
  g.light_pos = Vec3(0.05, -0.03, 1.0);
  g.r_perp = 0.3;
  g.light_intensity = 10.0;
  ImageD l = gray_card_radiance(200, 300, g);
  const double clean = gray_card_intensity(l, g);
  o.check(std::abs(clean - 10.0) / 10.0 < 0.01, "noiseless E=" + fmt("%.6f", clean));
  std::mt19937_64 rng(4);
  std::normal_distribution<double> noise(1.0, 0.01);
  for (double& v : l.data()) v *= noise(rng);
  const double noisy = gray_card_intensity(l, g);
  o.check(std::abs(noisy - 10.0) / 10.0 < 0.03, "1% noise E=" + fmt("%.6f", noisy));
  return o;
}

std::vector<PixelFeature> random_features(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::vector<PixelFeature> pts(n);
  for (auto& f : pts) {
    for (double& v : f.numeric) v = g(rng);
    for (int b = 0; b < kBriefBits; ++b) f.bits.set(b, coin(rng));
  }
  return pts;
}

Outcome criterion_clustering() {
  Outcome o;
  int monotone = 0;
  for (std::uint64_t inst = 0; inst < 10; ++inst) {
    const auto pts = random_features(5000, 100 + inst);
    const auto m = kprototypes_fit(pts, 8, default_gamma(pts), inst);
    bool ok = !m.cost_history.empty();
    for (std::size_t i = 1; i < m.cost_history.size(); ++i) ok = ok && m.cost_history[i] <= m.cost_history[i - 1];
    monotone += ok;
  }
  o.check(monotone == 10, std::to_string(monotone) + "/10 instances with non-increasing cost");

  // gamma = 0 against a plain Lloyd iteration from the same seeding.
  {
    const auto pts = random_features(100, 7);
    const std::uint64_t seed = 3;
    const auto m = kprototypes_fit(pts, 4, 0.0, seed);
    std::mt19937_64 rng(seed);
    std::vector<std::array<double, 3>> centres;
    for (std::size_t i : kmeanspp_seed(pts, 4, 0.0, rng)) centres.push_back(pts[i].numeric);
    const auto labels = lloyd_reference(pts, centres);
    o.check(labels == m.labels, "gamma=0 labels match reference k-means");
  }

  // Two blobs: exhaustive search over all 2-partitions.
  {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 0.3);
    std::bernoulli_distribution coin(0.2);
    std::vector<PixelFeature> pts;
    for (int i = 0; i < 16; ++i) {
      PixelFeature f;
      f.numeric = {(i < 8 ? -1.5 : 1.5) + g(rng), g(rng), g(rng)};
      for (int b = 0; b < kBriefBits; ++b) f.bits.set(b, coin(rng) != (i < 8 && b < 60));
      pts.push_back(f);
    }
    const double gamma = default_gamma(pts);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_labels;
    for (int mask = 1; mask < (1 << 15); ++mask) {  // point 0 fixed in part 0
      std::vector<int> labels(16, 0);
      for (int i = 1; i < 16; ++i) labels[i] = (mask >> (i - 1)) & 1;
      const double c = partition_cost(pts, labels, 2, gamma);
      if (c < best) {
        best = c;
        best_labels = labels;
      }
    }
    const auto m = kprototypes_fit(pts, 2, gamma, 1);
    std::vector<int> got = m.labels;
    if (got[0] != 0)
      for (int& l : got) l = 1 - l;
    o.check(got == best_labels, "two-blob labels equal brute-force optimum");
  }
  return o;
}

Outcome criterion_mtb() {
  Outcome o;
  const Image8 ref = textured_image(256, 256, 31);
  const std::vector<std::pair<int, int>> shifts{{16, -16}, {-16, 16}, {16, 16}, {-16, -16}, {-13, 7},
                                                {5, -11},  {0, 16},   {-16, 0},  {1, -1},   {9, 3}};
  int exact = 0;
  std::string misses;
  for (std::size_t i = 0; i < shifts.size(); ++i) {
    const auto [dx, dy] = shifts[i];
    Image8 moved = shift_image(ref, dx, dy);
    salt_and_pepper(moved, 0.05, 500 + i);
    const std::vector<Image8> imgs{ref, moved};
    const Shift s = mtb_align(imgs, 16)[1];
    if (s == Shift{-dx, -dy}) ++exact;
    else misses += " (" + std::to_string(dx) + "," + std::to_string(dy) + ")";
  }
  o.check(exact == static_cast<int>(shifts.size()),
          std::to_string(exact) + "/" + std::to_string(shifts.size()) + " shifts exact with 5% salt-and-pepper" + misses);
  return o;
}

Outcome criterion_heightfield() {
  Outcome o;
  const HeightField flat = multiscale_depth(ImageD(64, 64, 1, 0.5), 0.5);
  double dmax = 0, nerr = 0;
  for (double v : flat.depth.data()) dmax = std::max(dmax, std::abs(v));
  const ImageD nf = normals_from_depth(flat);
  for (std::size_t p = 0; p < nf.pixel_count(); ++p)
    nerr = std::max({nerr, std::abs(nf.at_pixel(p, 0)), std::abs(nf.at_pixel(p, 1)), std::abs(nf.at_pixel(p, 2) - 1.0)});
  o.check(dmax < 1e-12 && nerr < 1e-12, "constant S: |d|max " + fmt("%.1e", dmax) + ", normal err " + fmt("%.1e", nerr));

  HeightField ramp;
  ramp.depth = ImageD(32, 32, 1);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) ramp.depth(r, c) = 0.3 * c + 0.1 * r;
  const ImageD nr = normals_from_depth(ramp);
  const Vec3 expect = Vec3(0.3, -0.1, 1.0).normalized();
  double rerr = 0;
  for (int r = 1; r < 31; ++r)
    for (int c = 1; c < 31; ++c)
      for (int ch = 0; ch < 3; ++ch) rerr = std::max(rerr, std::abs(nr(r, c, ch) - expect(ch)));
  o.check(rerr < 1e-6, "ramp interior normal err " + fmt("%.1e", rerr));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  ImageD base(48, 48, 3);
  for (double& v : base.data()) v = u(rng);
  const ImageD up = normals_from_shading(base, base, 0.5);
  double uerr = 0;
  for (std::size_t p = 0; p < up.pixel_count(); ++p) uerr = std::max(uerr, std::abs(up.at_pixel(p, 2) - 1.0));
  o.check(uerr < 1e-12, "ambient = baseColor gives upward normals, err " + fmt("%.1e", uerr));
  return o;
}

// ---------------------------------------------------------------------------
// End-to-end roundtrip, shared by the last two criteria.

struct Roundtrip {
  SynthScene scene;
  PipelineResult result;
  double seconds = 0.0;
};

const Roundtrip& roundtrip() {
  static const Roundtrip rt = [] {
    Roundtrip r;
    const auto t0 = clock_type::now();
    SynthSpec spec;
    spec.rows = 256;
    spec.cols = 256;
    spec.seed = 7;
    spec.roughness = 0.3;
    spec.metallic = false;
    r.scene = synth_generate(spec);
    FitConfig cfg = FitConfig::defaults(spec.rows, spec.cols, 5);
    cfg.k = 16;
    cfg.seed = 3;
    r.result = run_pipeline(r.scene.ambient, r.scene.point_radiance, r.scene.geom, cfg, false);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return rt;
}

/// Truth material holding the most pixels of each recovered cluster.
std::vector<int> majority_material(const MaterialSolution& sol, const MaterialSolution& truth) {
  const int m = static_cast<int>(truth.clusters.size());
  std::vector<std::vector<int>> counts(static_cast<std::size_t>(sol.k), std::vector<int>(static_cast<std::size_t>(m), 0));
  for (std::size_t p = 0; p < sol.labels.size(); ++p) ++counts[sol.labels[p]][truth.labels[p]];
  std::vector<int> out(static_cast<std::size_t>(sol.k), -1);
  for (int j = 0; j < sol.k; ++j) {
    const auto& c = counts[static_cast<std::size_t>(j)];
    if (*std::max_element(c.begin(), c.end()) > 0) out[static_cast<std::size_t>(j)] = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
  }
  return out;
}

Outcome criterion_roundtrip() {
  Outcome o;
  const auto& rt = roundtrip();
  const auto& sol = rt.result.solution;
  const auto& truth = rt.scene.truth;

  double se = 0;
  for (std::size_t i = 0; i < sol.base_color.data().size(); ++i) se += std::pow(sol.base_color.data()[i] - truth.base_color.data()[i], 2);
  const double rmse = std::sqrt(se / static_cast<double>(sol.base_color.data().size()));
  o.check(rmse < 0.05, "baseColor RMSE " + fmt("%.4f", rmse));

  const double rough = std::abs(sol.roughness - 0.3);
  o.check(rough < 0.05, "roughness " + fmt("%.4f", sol.roughness) + " (err " + fmt("%.4f", rough) + ")");

  double ang = 0;
  for (std::size_t p = 0; p < sol.normals.pixel_count(); ++p) ang += std::acos(std::clamp(sol.normal(p).dot(truth.normal(p)), -1.0, 1.0));
  ang = ang / static_cast<double>(sol.normals.pixel_count()) * 180.0 / std::numbers::pi;
  o.check(ang < 5.0, "normal mean angular error " + fmt("%.3f deg", ang));

  // anisoAxis per recovered cluster against the truth material it mostly covers.
  const auto major = majority_material(sol, truth);
  double axis_err = 0;
  int aniso_clusters = 0;
  for (int j = 0; j < sol.k; ++j) {
    const int mj = major[static_cast<std::size_t>(j)];
    if (mj < 0 || truth.clusters[static_cast<std::size_t>(mj)].anisotropic <= 0.3) continue;
    ++aniso_clusters;
    const double d = std::fmod(std::abs(sol.clusters[static_cast<std::size_t>(j)].aniso_axis - truth.clusters[static_cast<std::size_t>(mj)].aniso_axis), 0.5);
    axis_err = std::max(axis_err, std::min(d, 0.5 - d));
  }
  o.check(aniso_clusters > 0 && axis_err < 0.05,
          "anisoAxis max error (mod 0.5) " + fmt("%.4f", axis_err) + " over " + std::to_string(aniso_clusters) + " anisotropic clusters");

  const ImageD rerender = render_forward(sol, rt.scene.geom);
  const double sat = std::exp(rt.scene.curve.log_exposure(kZMax, 0)) / rt.scene.exposure;
  double num = 0, den = 0;
  for (std::size_t p = 0; p < rerender.pixel_count(); ++p) {
    bool saturated = false;
    for (int ch = 0; ch < 3; ++ch) saturated = saturated || rt.scene.point_radiance.at_pixel(p, ch) >= sat;
    if (saturated) continue;
    for (int ch = 0; ch < 3; ++ch) {
      num += std::pow(rerender.at_pixel(p, ch) - rt.scene.point_radiance.at_pixel(p, ch), 2);
      den += std::pow(rt.scene.point_radiance.at_pixel(p, ch), 2);
    }
  }
  const double rel = std::sqrt(num / den);
  o.check(rel < 0.10, "rerender relative RMSE " + fmt("%.4f", rel));
  o.check(rt.seconds < 600.0, "runtime " + fmt("%.1fs", rt.seconds));
  return o;
}

Outcome criterion_highlight_guard() {
  Outcome o;
  const auto& rt = roundtrip();
  const auto& sol = rt.result.solution;
  const auto& g = rt.scene.geom;
  const int rows = sol.rows, cols = sol.cols;

  // Specular-spot region: pixels whose flat-surface half vector puts the true
  // isotropic GGX lobe above half of its peak value.
  const double a2 = std::pow(std::max(kAlphaFloor, 0.3 * 0.3), 2);
  auto ggx = [&](double cos_h) {
    const double q = cos_h * cos_h * (a2 - 1.0) + 1.0;
    return a2 / (std::numbers::pi * q * q);
  };
  const double peak = ggx(1.0);
  std::vector<char> spot(static_cast<std::size_t>(rows) * cols, 0);
  int spot_pixels = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Vec3 x = pixel_to_world(r, c, rows, cols, g.pixel_pitch);
      const Vec3 h = ((g.light_pos - x).normalized() + (Vec3::UnitZ() - x).normalized()).normalized();
      if (ggx(h.z()) >= 0.5 * peak) {
        spot[static_cast<std::size_t>(r) * cols + c] = 1;
        ++spot_pixels;
      }
    }

  // Pixels next to a cluster boundary carry blurred neighbour colours and are
  // not evidence of a highlight; they are left out of the maximum.
  auto interior = [&](int r, int c) {
    const int l = sol.labels[static_cast<std::size_t>(r) * cols + c];
    for (int dr = -2; dr <= 2; ++dr)
      for (int dc = -2; dc <= 2; ++dc) {
        const int rr = std::clamp(r + dr, 0, rows - 1), cc = std::clamp(c + dc, 0, cols - 1);
        if (sol.labels[static_cast<std::size_t>(rr) * cols + cc] != l) return false;
      }
    return true;
  };

  std::vector<std::array<double, 3>> mean(static_cast<std::size_t>(sol.k), {0, 0, 0});
  std::vector<int> count(static_cast<std::size_t>(sol.k), 0);
  for (std::size_t p = 0; p < sol.labels.size(); ++p) {
    ++count[sol.labels[p]];
    for (int ch = 0; ch < 3; ++ch) mean[sol.labels[p]][ch] += sol.base_color.at_pixel(p, ch);
  }
  for (int j = 0; j < sol.k; ++j)
    for (int ch = 0; ch < 3; ++ch)
      if (count[j] > 0) mean[j][ch] /= count[j];

  double excess = -1.0;
  int used = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const std::size_t p = static_cast<std::size_t>(r) * cols + c;
      if (!spot[p] || !interior(r, c)) continue;
      ++used;
      for (int ch = 0; ch < 3; ++ch) excess = std::max(excess, sol.base_color.at_pixel(p, ch) - mean[sol.labels[p]][ch]);
    }
  o.check(spot_pixels > 0 && used > 0, "spot region " + std::to_string(spot_pixels) + " px, " + std::to_string(used) + " away from cluster edges");
  o.check(used > 0 && excess < 0.05, "max baseColor excess over cluster mean " + fmt("%.4f", excess));
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, criterion_brdf},       {2, criterion_geometry},  {3, criterion_depth_curve},   {4, criterion_response},
      {5, criterion_gray_card},  {6, criterion_clustering}, {7, criterion_mtb},           {8, criterion_heightfield},
      {9, criterion_roundtrip},  {10, criterion_highlight_guard}};
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("CRITERION %2d: %s  %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
