#include "synth/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>

#include "numerics/params.hpp"

namespace tgpt::synth {
namespace {

using anno::PointStatus;
using anno::Scenario;
using anno::Vec2;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * nn::unit_uniform(rng);
}

// Multi-octave lattice value noise, contrast-stretched into [0, 1].
class ValueNoise {
 public:
  explicit ValueNoise(std::uint64_t seed) : seed_(splitmix(seed ^ 0x7e57u)) {}

  double operator()(double u, double v) const {
    static constexpr std::array<double, 4> kCell = {32.0, 16.0, 8.0, 4.0};
    static constexpr std::array<double, 4> kAmp = {0.45, 0.28, 0.17, 0.10};
    double acc = 0.0;
    for (std::size_t o = 0; o < kCell.size(); ++o) {
      const double fx = u / kCell[o], fy = v / kCell[o];
      const double ix = std::floor(fx), iy = std::floor(fy);
      const double sx = smooth(fx - ix), sy = smooth(fy - iy);
      const auto x0 = static_cast<std::int64_t>(ix), y0 = static_cast<std::int64_t>(iy);
      const double a = lattice(o, x0, y0), b = lattice(o, x0 + 1, y0);
      const double c = lattice(o, x0, y0 + 1), d = lattice(o, x0 + 1, y0 + 1);
      acc += kAmp[o] * ((a + (b - a) * sx) * (1 - sy) + (c + (d - c) * sx) * sy);
    }
    return std::clamp(0.5 + 1.8 * (acc - 0.5), 0.0, 1.0);
  }

 private:
  static double smooth(double t) { return t * t * (3.0 - 2.0 * t); }
  double lattice(std::size_t octave, std::int64_t x, std::int64_t y) const {
    std::uint64_t h = seed_ ^ (octave * 0xA24BAED4963EE407ull);
    h = splitmix(h ^ static_cast<std::uint64_t>(x) * 0x9FB21C651E98DF25ull);
    h = splitmix(h ^ static_cast<std::uint64_t>(y) * 0xC13FA9A902A6328Full);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
  }

  std::uint64_t seed_;
};

struct Kernel {
  double cx, cy, vx, vy, sigma, ax, ay, period, phase;

  Vec2 displacement(Vec2 u, double t) const {
    const double s = std::sin(2 * std::numbers::pi * t / period + phase) - std::sin(phase);
    const double dx = u.x - (cx + vx * t), dy = u.y - (cy + vy * t);
    const double w = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
    return {ax * s * w, ay * s * w};
  }
};

struct Deformation {
  std::vector<Kernel> kernels;

  Vec2 displacement(Vec2 u, double t) const {
    Vec2 d{0, 0};
    for (const Kernel& k : kernels) {
      const Vec2 e = k.displacement(u, t);
      d.x += e.x;
      d.y += e.y;
    }
    return d;
  }
  // Solves u + D(u) = p by fixed-point iteration; D is a contraction here.
  Vec2 inverse(Vec2 p, double t) const {
    Vec2 u = p;
    for (int i = 0; i < 6; ++i) {
      const Vec2 d = displacement(u, t);
      u = {p.x - d.x, p.y - d.y};
    }
    return u;
  }
};

bool in_frame(Vec2 p, int w, int h) { return p.x >= 0.0 && p.x < w && p.y >= 0.0 && p.y < h; }

std::string slug(Scenario s) {
  std::string out;
  for (char c : anno::to_string(s)) out.push_back(c == ' ' ? '-' : static_cast<char>(std::tolower(c)));
  return out;
}

double instrument_speed(const ScenarioConfig& cfg, double bar_w) {
  return std::min((cfg.width - bar_w) / (cfg.n_frames - 1), 14.0 * cfg.intensity + 1.0);
}

}  // namespace

double SmokeBlob::density(Vec2 p) const {
  const double dx = p.x - cx, dy = p.y - cy;
  return peak * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
}

void validate_config(const ScenarioConfig& cfg) {
  auto bad = [](const std::string& m) { fail(ErrorCode::kInvalidConfig, m); };
  if (cfg.n_frames < 3) bad("n_frames must be >= 3");
  if (cfg.n_points < 1) bad("n_points must be >= 1");
  if (cfg.width < 64 || cfg.height < 64) bad("frames must be at least 64x64");
  if (!(cfg.intensity >= 0.0 && cfg.intensity <= 1.0)) bad("intensity must lie in [0, 1]");
  if (cfg.annotation_stride < 1) bad("annotation_stride must be >= 1");
}

double max_step(const ScenarioConfig& cfg) {
  const double jitter_amp = cfg.scenario == Scenario::kCameraJitter ? 8.0 * cfg.intensity : 0.0;
  return 16.0 * cfg.intensity + jitter_amp + (cfg.scenario == Scenario::kInstrumentOcclusion ? 1.0 : 0.0);
}

std::vector<int> annotated_frames(int n_frames, int stride) {
  std::vector<int> f;
  for (int i = 0; i < n_frames; i += stride) f.push_back(i);
  if (f.back() != n_frames - 1) f.push_back(n_frames - 1);
  return f;
}

std::string clip_id_for(const ScenarioConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(cfg.seed));
  return slug(cfg.scenario) + "-" + buf;
}

SynthClip gen_clip(const ScenarioConfig& cfg) {
  validate_config(cfg);
  std::mt19937_64 rng(splitmix(cfg.seed ^ (static_cast<std::uint64_t>(cfg.scenario) << 56)));
  const ValueNoise texture(cfg.seed);
  const int w = cfg.width, h = cfg.height, nf = cfg.n_frames;
  const double I = cfg.intensity;
  const Scenario sc = cfg.scenario;

  SynthClip clip;
  ScenarioGeometry& geo = clip.geometry;
  geo.instrument.assign(nf, std::nullopt);
  geo.reflections.assign(nf, {});
  geo.smoke.assign(nf, std::nullopt);
  geo.jitter.assign(nf, Vec2{0, 0});

  // ---- scenario geometry ---------------------------------------------------
  Deformation deform;
  double bar_w = 0.0, bar_h = 0.0, bar_cy = 0.0, bar_cx0 = 0.0, bar_speed = 0.0;
  if (sc == Scenario::kTissueDeformation) {
    for (int k = 0; k < 3; ++k) {
      Kernel kn{};
      kn.cx = uniform(rng, 0.2 * w, 0.8 * w);
      kn.cy = uniform(rng, 0.2 * h, 0.8 * h);
      kn.vx = uniform(rng, -0.8, 0.8);
      kn.vy = uniform(rng, -0.8, 0.8);
      kn.sigma = uniform(rng, 36.0, 56.0);
      const double amp = I * uniform(rng, 8.0, 14.0);
      const double ang = uniform(rng, 0.0, 2 * std::numbers::pi);
      kn.ax = amp * std::cos(ang);
      kn.ay = amp * std::sin(ang);
      kn.period = uniform(rng, 20.0, 32.0);
      kn.phase = uniform(rng, 0.0, 2 * std::numbers::pi);
      deform.kernels.push_back(kn);
    }
    geo.pull_speed = std::max(1.5 * I, 1e-3);
  } else if (sc == Scenario::kInstrumentOcclusion) {
    bar_w = 28.0 + 16.0 * I;
    bar_h = 0.55 * h;
    bar_cy = uniform(rng, 0.35 * h, 0.65 * h);
    bar_speed = instrument_speed(cfg, bar_w);
    const double travel = bar_speed * (nf - 1);
    bar_cx0 = uniform(rng, bar_w / 2, std::max(bar_w / 2, w - bar_w / 2 - travel));
    // Sway step stays under 1.6 * intensity px, inside the max_step budget.
    const double sway = 6.0 * I * std::min(1.0, nf / 24.0);
    for (int t = 0; t < nf; ++t) {
      const double cx = bar_cx0 + bar_speed * t;
      const double cy = bar_cy + sway * std::sin(2 * std::numbers::pi * t / nf);
      geo.instrument[t] = Rect{cx - bar_w / 2, cy - bar_h / 2, cx + bar_w / 2, cy + bar_h / 2};
    }
  } else if (sc == Scenario::kCameraJitter) {
    const double amp = 8.0 * I;
    for (int t = 1; t < nf; ++t) geo.jitter[t] = {uniform(rng, -amp, amp), uniform(rng, -amp, amp)};
  } else if (sc == Scenario::kSurfaceReflection) {
    const double scale = 0.6 + 0.8 * I;
    std::array<std::array<double, 4>, 2> path{};
    for (auto& p : path) p = {uniform(rng, 0.1 * w, 0.9 * w), uniform(rng, 0.1 * h, 0.9 * h),
                              uniform(rng, 0.1 * w, 0.9 * w), uniform(rng, 0.1 * h, 0.9 * h)};
    for (int t = 0; t < nf; ++t) {
      const double a = static_cast<double>(t) / (nf - 1);
      for (const auto& p : path) {
        geo.reflections[t].push_back(
            Ellipse{p[0] + (p[2] - p[0]) * a, p[1] + (p[3] - p[1]) * a, 22.0 * scale, 14.0 * scale});
      }
    }
  } else if (sc == Scenario::kCauterizationSmoke) {
    const double cx = uniform(rng, 0.3 * w, 0.7 * w), cy = uniform(rng, 0.3 * h, 0.7 * h);
    const double vx = uniform(rng, -1.0, 1.0), vy = uniform(rng, -1.0, 1.0);
    const double sigma = 30.0 + 20.0 * I;
    const double peak_max = std::min(1.0, 0.85 + 0.25 * I);
    const double ramp = 0.5 * (nf - 1);
    for (int t = 0; t < nf; ++t) {
      geo.smoke[t] = SmokeBlob{cx + vx * t, cy + vy * t, sigma, peak_max * std::min(1.0, t / ramp)};
    }
  }

  // ---- points ----------------------------------------------------------------
  const double margin = 24.0;
  const bool has_instrument_point = sc == Scenario::kInstrumentOcclusion && cfg.n_points >= 4;
  const int n_tissue = cfg.n_points - (has_instrument_point ? 1 : 0);
  std::vector<Vec2> anchors;
  while (static_cast<int>(anchors.size()) < n_tissue) {
    Vec2 p{uniform(rng, margin, w - margin), uniform(rng, margin, h - margin)};
    if (geo.instrument[0]) {
      Rect r = *geo.instrument[0];
      r.x0 -= 6;
      r.x1 += 6;
      r.y0 -= 6;
      r.y1 += 6;
      if (r.contains(p)) continue;
    }
    anchors.push_back(p);
  }
  anno::InstrumentMeta meta{static_cast<anno::InstrumentType>(rng() % anno::kInstrumentTypeCount), 0};
  const double tip_offset = bar_h / 2 - 10.0;
  constexpr double kTipRadius = 8.0;

  clip.dense_truth.assign(nf, std::vector<Vec2>(cfg.n_points));
  for (int t = 0; t < nf; ++t) {
    for (int i = 0; i < n_tissue; ++i) {
      Vec2 p = anchors[i];
      if (sc == Scenario::kTissueDeformation) {
        const Vec2 d = deform.displacement(p, t);
        p = {p.x + d.x, p.y + d.y};
      }
      p.x += geo.jitter[t].x;
      p.y += geo.jitter[t].y;
      clip.dense_truth[t][i] = p;
    }
    if (has_instrument_point) {
      const Rect& r = *geo.instrument[t];
      clip.dense_truth[t][cfg.n_points - 1] = {0.5 * (r.x0 + r.x1), 0.5 * (r.y0 + r.y1) + tip_offset};
    }
  }

  // ---- statuses ----------------------------------------------------------------
  clip.dense_status.assign(nf, std::vector<PointStatus>(cfg.n_points, PointStatus::kClearView));
  std::vector<std::vector<bool>> hidden(nf, std::vector<bool>(cfg.n_points, false));
  for (int t = 0; t < nf; ++t) {
    for (int i = 0; i < cfg.n_points; ++i) {
      const Vec2 p = clip.dense_truth[t][i];
      const Vec2 q{anno::quantize(p.x), anno::quantize(p.y)};
      const bool instrument_pt = has_instrument_point && i == cfg.n_points - 1;
      PointStatus s = PointStatus::kClearView;
      bool hide = false;
      if (!in_frame(q, w, h)) {
        s = PointStatus::kOutOfView;
        hide = true;
      } else if (instrument_pt) {
        s = PointStatus::kClearView;
      } else if (geo.instrument[t] && geo.instrument[t]->contains(p)) {
        s = PointStatus::kInstrumentObscuration;
        hide = true;
      } else if (geo.smoke[t] && geo.smoke[t]->density(p) > kSmokeVisibleDensity) {
        s = PointStatus::kSmokeObscuration;
        hide = geo.smoke[t]->density(p) > kSmokeHiddenDensity;
      } else if (std::any_of(geo.reflections[t].begin(), geo.reflections[t].end(),
                             [&](const Ellipse& e) { return e.level(p) <= 1.0; })) {
        s = PointStatus::kReflection;
      } else if (sc == Scenario::kTissueDeformation) {
        const Vec2 a = clip.dense_truth[t == 0 ? 1 : t][i];
        const Vec2 b = clip.dense_truth[t == 0 ? 0 : t - 1][i];
        if (std::hypot(a.x - b.x, a.y - b.y) > geo.pull_speed) s = PointStatus::kPulled;
      }
      clip.dense_status[t][i] = s;
      hidden[t][i] = hide;
    }
  }

  // ---- frames ----------------------------------------------------------------
  clip.frames.reserve(nf);
  for (int t = 0; t < nf; ++t) {
    Frame fr(w, h);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        Vec2 c{x + 0.5, y + 0.5};
        if (sc == Scenario::kTissueDeformation) c = deform.inverse(c, t);
        c.x -= geo.jitter[t].x;
        c.y -= geo.jitter[t].y;
        double v = texture(c.x, c.y);
        const Vec2 pc{x + 0.5, y + 0.5};
        if (geo.instrument[t] && geo.instrument[t]->contains(pc)) {
          const Rect& r = *geo.instrument[t];
          const double along = pc.y - r.y0, across = (pc.x - r.x0) / (r.x1 - r.x0);
          v = 0.12 + 0.06 * std::sin(2 * std::numbers::pi * along / 9.0) + 0.05 * across;
          // Bright jaw marker centred on the instrument tip.
          const double tx = 0.5 * (r.x0 + r.x1), ty = 0.5 * (r.y0 + r.y1) + tip_offset;
          const double d = std::hypot(pc.x - tx, pc.y - ty) / kTipRadius;
          if (d <= 1.0) v = 0.95 - 0.45 * d * d;
        }
        for (const Ellipse& e : geo.reflections[t]) {
          const double lv = e.level(pc);
          if (lv <= 0.6) {
            v = 1.0;
          } else if (lv <= 1.0) {
            v = std::min(1.0, v + (1.0 - lv) / 0.4);
          }
        }
        if (geo.smoke[t]) {
          const double d = geo.smoke[t]->density(pc);
          v = 0.5 + (v - 0.5) * (1.0 - I * d) + 0.5 * I * d;
        }
        fr.at(x, y) = std::clamp(v, 0.0, 1.0);
      }
    }
    clip.frames.push_back(std::move(fr));
  }

  // ---- annotation --------------------------------------------------------------
  anno::ClipAnnotation& a = clip.annotation;
  a.clip_id = clip_id_for(cfg);
  a.width = w;
  a.height = h;
  a.annotation_fps = 1.0;
  a.scenario = sc;
  a.frame_indices = annotated_frames(nf, cfg.annotation_stride);
  for (int i = 0; i < cfg.n_points; ++i) {
    anno::Track tr;
    const bool instrument_pt = has_instrument_point && i == cfg.n_points - 1;
    tr.type = instrument_pt ? anno::PointType::kInstrument : anno::PointType::kTissue;
    if (instrument_pt) tr.instrument = meta;
    for (int f : a.frame_indices) {
      anno::PointObservation ob;
      ob.status = clip.dense_status[f][i];
      if (!hidden[f][i]) {
        const Vec2 p = clip.dense_truth[f][i];
        ob.coord = Vec2{anno::quantize(p.x), anno::quantize(p.y)};
      }
      tr.observations.push_back(ob);
    }
    a.tracks.push_back(std::move(tr));
  }
  return clip;
}

SuiteSplit split_suite(std::uint64_t seed,
                       const std::vector<std::pair<anno::Scenario, int>>& counts,
                       const ScenarioConfig& base) {
  std::map<Scenario, int> by_scenario;
  for (const auto& [sc, n] : counts) {
    if (n < 5) {
      fail(ErrorCode::kTooFewClips, std::string(anno::to_string(sc)) + ": " + std::to_string(n) +
                                        " clips, need at least 5");
    }
    if (!by_scenario.emplace(sc, n).second) {
      fail(ErrorCode::kInvalidConfig, "scenario listed twice: " + std::string(anno::to_string(sc)));
    }
  }
  SuiteSplit split;
  for (const auto& [sc, n] : by_scenario) {
    std::vector<std::pair<std::uint64_t, ScenarioConfig>> ranked;
    for (int i = 0; i < n; ++i) {
      ScenarioConfig c = base;
      c.scenario = sc;
      c.seed = splitmix(splitmix(seed ^ (static_cast<std::uint64_t>(sc) + 1) * 0xD1B54A32D192ED03ull) +
                        static_cast<std::uint64_t>(i));
      ranked.emplace_back(splitmix(c.seed ^ 0x5eedull), c);
    }
    const int n_test = std::max(1, static_cast<int>(std::lround(n / 5.0)));
    std::vector<std::size_t> order(ranked.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return ranked[a].first < ranked[b].first; });
    std::vector<bool> is_test(ranked.size(), false);
    for (int k = 0; k < n_test; ++k) is_test[order[k]] = true;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      (is_test[i] ? split.test : split.train).push_back(ranked[i].second);
    }
  }
  return split;
}

}  // namespace tgpt::synth
