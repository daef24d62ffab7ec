// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/smoke_sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "desmoke/error.hpp"

namespace desmoke {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, int octave, std::int64_t ix, std::int64_t iy) {
  std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(octave) + 0x51ed27ull));
  h = mix(h ^ static_cast<std::uint64_t>(ix));
  h = mix(h ^ (static_cast<std::uint64_t>(iy) * 0x2545f4914f6cdd1dull));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(double x, double y, int octave, std::uint64_t seed) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
  const double tx = smooth(x - fx), ty = smooth(y - fy);
  const double a = lattice(seed, octave, ix, iy), b = lattice(seed, octave, ix + 1, iy);
  const double c = lattice(seed, octave, ix, iy + 1), d = lattice(seed, octave, ix + 1, iy + 1);
  return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

// Fractal sum in [0,1). Octave o halves the spacing and the amplitude.
double fbm(double x, double y, double spacing, int octaves, std::uint64_t seed) {
  double sum = 0.0, norm = 0.0, amp = 1.0, s = spacing;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(x / s, y / s, o, seed);
    norm += amp;
    amp *= 0.5;
    s *= 0.5;
  }
  return sum / norm;
}

template <std::size_t N>
nlohmann::json arr(const std::array<double, N>& a) {
  return nlohmann::json(std::vector<double>(a.begin(), a.end()));
}

template <std::size_t N>
std::array<double, N> arr_from(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  require(v.size() == N, ErrorCode::InvalidConfig, "smoke params: wrong array length");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

void SmokeParams::validate() const {
  for (double a : airlight)
    require(a >= 0.0 && a <= 1.0, ErrorCode::InvalidConfig, "airlight must lie in [0,1]");
  require(density_peak >= 0.0 && density_peak <= 1.0, ErrorCode::InvalidConfig,
          "density_peak must lie in [0,1]");
  require(noise_octaves >= 1, ErrorCode::InvalidConfig, "noise_octaves must be >= 1");
  require(noise_scale > 0.0, ErrorCode::InvalidConfig, "noise_scale must be > 0");
  for (int i = 0; i < 3; ++i)
    require(profile[i] < profile[i + 1], ErrorCode::InvalidConfig,
            "profile breakpoints must be increasing");
  require(heterogeneity >= 0.0, ErrorCode::InvalidConfig, "heterogeneity must be >= 0");
}

nlohmann::json to_json(const SmokeParams& p) {
  return {{"airlight", arr(p.airlight)},     {"density_peak", p.density_peak},
          {"noise_octaves", p.noise_octaves}, {"noise_scale", p.noise_scale},
          {"profile", arr(p.profile)},       {"drift", arr(p.drift)},
          {"heterogeneity", p.heterogeneity}, {"seed", p.seed}};
}

SmokeParams smoke_params_from_json(const nlohmann::json& j) {
  SmokeParams p;
  try {
    if (j.contains("airlight")) p.airlight = arr_from<3>(j.at("airlight"));
    p.density_peak = j.value("density_peak", p.density_peak);
    p.noise_octaves = j.value("noise_octaves", p.noise_octaves);
    p.noise_scale = j.value("noise_scale", p.noise_scale);
    if (j.contains("profile")) p.profile = arr_from<4>(j.at("profile"));
    if (j.contains("drift")) p.drift = arr_from<2>(j.at("drift"));
    p.heterogeneity = j.value("heterogeneity", p.heterogeneity);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("bad smoke params: ") + e.what());
  }
  p.validate();
  return p;
}

double temporal_profile(const SmokeParams& p, int frame_index) {
  const double k = frame_index;
  const auto& b = p.profile;
  if (k <= b[0] || k >= b[3]) return 0.0;
  if (k < b[1]) return (k - b[0]) / (b[1] - b[0]);
  if (k <= b[2]) return 1.0;
  return (b[3] - k) / (b[3] - b[2]);
}

Tensor transmission_field(const SmokeParams& p, int frame_index, int height, int width) {
  p.validate();
  require(height > 0 && width > 0, ErrorCode::InvalidArgument, "transmission size must be > 0");
  Tensor t(Shape{1, 1, height, width}, 1.0);
  const double level = p.density_peak * temporal_profile(p, frame_index);
  if (level == 0.0) return t;

  // Finer octaves drift a little faster so the texture evolves while moving.
  std::vector<double> n(static_cast<std::size_t>(height) * width);
  double amp_norm = 0.0;
  for (int o = 0; o < p.noise_octaves; ++o) amp_norm += std::ldexp(1.0, -o);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double sum = 0.0, amp = 1.0, s = p.noise_scale;
      for (int o = 0; o < p.noise_octaves; ++o) {
        const double speed = 1.0 + 0.25 * o;
        const double sx = x - p.drift[0] * speed * frame_index;
        const double sy = y - p.drift[1] * speed * frame_index;
        sum += amp * value_noise(sx / s, sy / s, o, p.seed);
        amp *= 0.5;
        s *= 0.5;
      }
      n[static_cast<std::size_t>(y) * width + x] = sum / amp_norm;
    }
  const auto [lo, hi] = std::minmax_element(n.begin(), n.end());
  const double nmin = *lo, range = *hi - *lo;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double u = range > 0.0 ? (n[i] - nmin) / range : 0.0;
    t.data()[i] = 1.0 - std::min(1.0, level * (1.0 + p.heterogeneity * u));
  }
  return t;
}

Clip synth_smoke(const Clip& clean, const SmokeParams& p, std::vector<Tensor>* transmissions) {
  p.validate();
  require(clean.size() >= 2, ErrorCode::InvalidClip, "synth_smoke needs at least 2 clean frames");
  const int H = clean.height(), W = clean.width();
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  if (transmissions) transmissions->clear();
  std::vector<Frame> smoky;
  smoky.reserve(clean.size() - 1);
  for (std::size_t k = 1; k < clean.size(); ++k) {
    const Tensor t = transmission_field(p, static_cast<int>(k) + 1, H, W);
    Tensor s = clean.frame(k).tensor();
    for (int c = 0; c < 3; ++c) {
      double* v = s.plane(0, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double ti = t.data()[i];
        v[i] = v[i] * ti + p.airlight[c] * (1.0 - ti);
      }
    }
    smoky.push_back(clamp_to_frame(std::move(s)));
    if (transmissions) transmissions->push_back(t);
  }
  return Clip(std::move(smoky), clean.frame(0), clean.id());
}

Clip synth_clean_clip(const SceneParams& p) {
  require(p.frames >= 1, ErrorCode::InvalidArgument, "scene needs at least one frame");
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const std::uint64_t s1 = rng(), s2 = rng(), s3 = rng(), s4 = rng();
  const double ox = 1000.0 * u01(rng), oy = 1000.0 * u01(rng);
  // Instrument: a bar entering from a random border point, sliding along its axis.
  const double angle = 2.0 * M_PI * u01(rng);
  const double ux = std::cos(angle), uy = std::sin(angle);
  const double base_x = p.width * 0.5 - ux * p.width * 0.6;
  const double base_y = p.height * 0.5 - uy * p.height * 0.6;
  const double tip0 = p.width * (0.45 + 0.2 * u01(rng));
  const double tip_speed = 1.5 * (u01(rng) < 0.5 ? -1.0 : 1.0);
  const double half_width = std::max(2.0, p.width / 16.0);

  std::vector<Frame> frames;
  for (int k = 0; k < p.frames; ++k) {
    Tensor img(Shape{1, 3, p.height, p.width});
    const double cx = ox + p.camera_velocity[0] * k, cy = oy + p.camera_velocity[1] * k;
    const double tip = tip0 + tip_speed * k;
    for (int y = 0; y < p.height; ++y)
      for (int x = 0; x < p.width; ++x) {
        const double wx = x + cx, wy = y + cy;
        const double n1 = fbm(wx, wy, 24.0, 4, s1);
        const double n2 = fbm(wx, wy, 12.0, 3, s2);
        const double n3 = fbm(wx, wy, 40.0, 2, s3);
        const double ve = fbm(wx, wy, 20.0, 3, s4);
        double r = 0.40 + 0.50 * n1;
        double g = 0.10 + 0.40 * n2 * n1;
        double b = 0.08 + 0.30 * n3 * n2;
        const double d = std::abs(ve - 0.5);
        if (d < 0.04) {
          const double f = 0.55 + 0.45 * d / 0.04;
          r *= f;
          g *= f;
          b = b * f + 0.05 * (1.0 - f);
        }
        if (n2 > 0.75) {
          const double s = 0.6 * (n2 - 0.75) / 0.25;
          r += (1.0 - r) * s;
          g += (1.0 - g) * s;
          b += (1.0 - b) * s;
        }
        if (p.instrument) {
          const double rx = x - base_x, ry = y - base_y;
          const double along = rx * ux + ry * uy;
          const double across = -rx * uy + ry * ux;
          if (along >= 0.0 && along <= tip && std::abs(across) <= half_width) {
            const double shade = 0.45 + 0.3 * (1.0 - std::abs(across) / half_width);
            r = shade;
            g = shade;
            b = shade + 0.03;
          }
        }
        img.at(0, 0, y, x) = r;
        img.at(0, 1, y, x) = g;
        img.at(0, 2, y, x) = b;
      }
    frames.push_back(clamp_to_frame(std::move(img)));
  }
  Frame ps = frames.front();
  return Clip(std::move(frames), std::move(ps), "scene_" + std::to_string(p.seed));
}

std::vector<std::filesystem::path> generate_clean_corpus(const std::filesystem::path& out_dir,
                                                         int count, const SceneParams& base) {
  require(count >= 1, ErrorCode::InvalidArgument, "corpus needs at least one clip");
  std::mt19937_64 rng(base.seed);
  std::uniform_real_distribution<double> vel(-1.0, 1.0);
  std::vector<std::filesystem::path> dirs;
  for (int i = 0; i < count; ++i) {
    SceneParams sp = base;
    sp.seed = rng();
    sp.camera_velocity = {vel(rng), vel(rng)};
    char name[32];
    std::snprintf(name, sizeof(name), "clip_%03d", i);
    Clip c = synth_clean_clip(sp);
    c.set_id(name);
    const auto dir = out_dir / name;
    save_clip(c, dir);
    dirs.push_back(dir);
  }
  return dirs;
}

BuildResult build_dataset(const std::filesystem::path& clean_root,
                          const std::filesystem::path& out_root, const SmokeParamsGrid& grid,
                          double split_ratio, std::uint64_t seed) {
  require(split_ratio >= 0.0 && split_ratio <= 1.0, ErrorCode::InvalidConfig,
          "split_ratio must lie in [0,1]");
  require(!grid.density_peaks.empty() && !grid.drifts.empty() && !grid.noise_scales.empty() &&
              !grid.profiles.empty(),
          ErrorCode::InvalidConfig, "every smoke grid field needs a value");
  std::error_code ec;
  require(std::filesystem::is_directory(clean_root, ec), ErrorCode::IOError,
          "clean root " + clean_root.string() + " is not a directory");
  std::vector<std::string> ids;
  for (const auto& e : std::filesystem::directory_iterator(clean_root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "ps.png"))
      ids.push_back(e.path().filename().string());
  std::sort(ids.begin(), ids.end());
  require(!ids.empty(), ErrorCode::InvalidDataset, "no clean clips under " + clean_root.string());

  std::mt19937_64 rng(seed);
  auto pick = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  for (const auto& id : ids) {
    const Clip clean = load_clip(clean_root / id);
    SmokeParams p;
    p.airlight = grid.airlight;
    p.noise_octaves = grid.noise_octaves;
    p.heterogeneity = grid.heterogeneity;
    p.density_peak = grid.density_peaks[pick(grid.density_peaks.size())];
    p.drift = grid.drifts[pick(grid.drifts.size())];
    p.noise_scale = grid.noise_scales[pick(grid.noise_scales.size())];
    p.profile = grid.profiles[pick(grid.profiles.size())];
    p.seed = rng();

    std::vector<Tensor> ts;
    Clip smoky = synth_smoke(clean, p, &ts);
    const auto smoky_dir = out_root / id / "smoky";
    save_clip(smoky, smoky_dir);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      std::string name = frame_filename(k + 1);
      name.replace(0, 6, "t_");
      write_png(smoky_dir / name, ts[k]);
    }
    nlohmann::json side = to_json(p);
    side["source"] = id;
    std::ofstream(smoky_dir / "params.json") << side.dump(2) << '\n';

    std::vector<Frame> gt(clean.frames().begin() + 1, clean.frames().end());
    save_clip(Clip(std::move(gt), clean.frame(0), id), out_root / id / "clean");
  }

  std::vector<std::size_t> order(ids.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::lround(split_ratio * ids.size()));
  std::vector<Split> split(ids.size(), Split::Test);
  for (std::size_t i = 0; i < n_train; ++i) split[order[i]] = Split::Train;

  BuildResult r;
  r.manifest = out_root / "manifest.tsv";
  for (std::size_t i = 0; i < ids.size(); ++i)
    r.entries.push_back({split[i], ids[i] + "/smoky"});
  write_manifest(r.manifest, r.entries);
  return r;
}

}  // namespace desmoke
