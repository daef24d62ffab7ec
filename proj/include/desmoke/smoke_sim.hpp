// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "desmoke/clip_io.hpp"
#include "desmoke/frame.hpp"

namespace desmoke {

/// Heterogeneous, drifting smoke composited with the scattering model
/// S = I * t + A * (1 - t).
struct SmokeParams {
  std::array<double, 3> airlight{0.85, 0.85, 0.88};
  double density_peak = 0.6;
  int noise_octaves = 4;
  double noise_scale = 32.0;  // lattice spacing of the coarsest octave, px
  /// Ramp start, ramp end, hold end, decay end as 1-based frame indices.
  /// The density scale is 0 up to the first breakpoint.
  std::array<double, 4> profile{1.0, 3.0, 8.0, 14.0};
  std::array<double, 2> drift{0.7, -0.4};  // px per frame
  /// Noise amplitude relative to the profile level L: per frame the density
  /// is min(1, L * (1 + heterogeneity * n)) with n rescaled onto [0,1], so
  /// the minimum density equals L.
  double heterogeneity = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const SmokeParams& p);
SmokeParams smoke_params_from_json(const nlohmann::json& j);

/// Temporal density scale in [0,1] at a 1-based frame index.
double temporal_profile(const SmokeParams& p, int frame_index);

/// Transmission map t = 1 - density for a 1-based frame index, (1,1,H,W).
Tensor transmission_field(const SmokeParams& p, int frame_index, int height, int width);

/// Keeps the first clean frame as the PS frame and smokes frames 2..N. The
/// result's frame k pairs with clean frame k + 1. When `transmissions` is
/// given it receives the t map used for every smoked frame.
Clip synth_smoke(const Clip& clean, const SmokeParams& p,
                 std::vector<Tensor>* transmissions = nullptr);

/// Procedural laparoscopy-like scene: coloured tissue texture with vessels,
/// global camera translation and an optional instrument moving on its own.
struct SceneParams {
  int height = 64;
  int width = 64;
  int frames = 11;
  std::array<double, 2> camera_velocity{0.5, 0.25};  // px per frame
  bool instrument = true;
  std::uint64_t seed = 7;
};

/// Frames I_1..I_N; the PS slot also holds I_1.
Clip synth_clean_clip(const SceneParams& p);

/// Writes `count` procedural clean clips as clip_000, clip_001, ... and
/// returns their directories.
std::vector<std::filesystem::path> generate_clean_corpus(const std::filesystem::path& out_dir,
                                                         int count, const SceneParams& base);

/// Candidate values; each clip draws one entry per field.
struct SmokeParamsGrid {
  std::vector<double> density_peaks{0.6};
  std::vector<std::array<double, 2>> drifts{{0.7, -0.4}, {-0.5, 0.3}, {0.2, 0.8}};
  std::vector<double> noise_scales{24.0, 32.0, 48.0};
  std::vector<std::array<double, 4>> profiles{{1.0, 3.0, 8.0, 14.0}};
  std::array<double, 3> airlight{0.85, 0.85, 0.88};
  int noise_octaves = 4;
  double heterogeneity = 0.5;
};

struct BuildResult {
  std::filesystem::path manifest;
  std::vector<ManifestEntry> entries;
};

/// Smokes every clip under `clean_root` into `out_root/<id>/smoky` (frames,
/// t_####.png, params.json) with the clean pairs in `out_root/<id>/clean`,
/// then writes `out_root/manifest.tsv` with a seeded train/test split.
BuildResult build_dataset(const std::filesystem::path& clean_root,
                          const std::filesystem::path& out_root, const SmokeParamsGrid& grid,
                          double split_ratio, std::uint64_t seed);

}  // namespace desmoke
