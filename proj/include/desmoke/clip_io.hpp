// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "desmoke/frame.hpp"

namespace desmoke {

namespace fs = std::filesystem;

// 8-bit PNG helpers. Channel count 1 stores a gray map, 3 stores RGB.
Tensor read_png(const fs::path& path, int channels = 3);
void write_png(const fs::path& path, const Tensor& image);

/// Reads `ps.png` plus `frame_0001.png ... frame_NNNN.png` from a directory.
/// Frames whose sides are not multiples of 4 are cropped at the bottom-right
/// and the clip is flagged.
Clip load_clip(const fs::path& dir);

/// Writes the layout read by load_clip. Existing frame files are replaced.
void save_clip(const Clip& clip, const fs::path& dir);

std::string frame_filename(std::size_t index_one_based);

enum class Split { Train, Test };
std::string_view split_name(Split s) noexcept;
Split parse_split(std::string_view s);

struct ManifestEntry {
  Split split = Split::Train;
  std::string path;  // relative to the manifest's directory
};

/// One `<split>\t<relative path>` entry per line.
std::vector<ManifestEntry> read_manifest(const fs::path& manifest);
void write_manifest(const fs::path& manifest, const std::vector<ManifestEntry>& entries);

struct Dataset {
  std::vector<Clip> clips;
  Split split = Split::Train;
  fs::path root_path;
};

/// Loads every clip of `split` listed in the manifest. Clip ids are the
/// manifest paths and must be unique.
Dataset load_dataset(const fs::path& manifest, Split split);

/// Clean frames paired index-for-index with a synthesized smoky clip, read
/// from the sibling `clean` directory when one exists.
std::optional<Clip> load_ground_truth(const fs::path& smoky_dir);

}  // namespace desmoke
