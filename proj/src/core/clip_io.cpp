// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/clip_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <regex>
#include <set>

#include "desmoke/error.hpp"

namespace desmoke {

namespace {

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Tensor read_png(const fs::path& path, int channels) {
  require(channels == 1 || channels == 3, ErrorCode::InvalidArgument,
          "read_png supports 1 or 3 channels");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    fail(ErrorCode::IOError, "cannot read " + path.string() + ": " + img.message);
  img.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    fail(ErrorCode::IOError, "cannot decode " + path.string() + ": " + img.message);
  }
  const int h = static_cast<int>(img.height);
  const int w = static_cast<int>(img.width);
  Tensor out(Shape{1, channels, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        out.at(0, c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * channels + c] / 255.0;
  return out;
}

void write_png(const fs::path& path, const Tensor& image) {
  require(image.n() == 1 && (image.c() == 1 || image.c() == 3), ErrorCode::InvalidArgument,
          "write_png expects (1,1|3,H,W), got " + image.shape().str());
  const int h = image.h(), w = image.w(), ch = image.c();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c)
        buf[(static_cast<std::size_t>(y) * w + x) * ch + c] = quantize(image.at(0, c, y, x));
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = ch == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    fail(ErrorCode::IOError, "cannot write " + path.string() + ": " + img.message);
}

std::string frame_filename(std::size_t index) {
  char name[32];
  std::snprintf(name, sizeof(name), "frame_%04zu.png", index);
  return name;
}

namespace {

// Crops to the largest multiple of 4 per side; returns true when it changed.
bool crop_to_multiple_of_4(Tensor& t) {
  const int h = t.h() - t.h() % 4;
  const int w = t.w() - t.w() % 4;
  if (h == t.h() && w == t.w()) return false;
  Tensor out(Shape{1, t.c(), h, w});
  for (int c = 0; c < t.c(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(0, c, y, x) = t.at(0, c, y, x);
  t = std::move(out);
  return true;
}

}  // namespace

Clip load_clip(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::IOError, "not a directory: " + dir.string());
  const fs::path ps_path = dir / "ps.png";
  require(fs::exists(ps_path), ErrorCode::MissingPSFrame, "missing ps.png in " + dir.string());

  static const std::regex pattern(R"(frame_(\d{4,})\.png)");
  std::set<std::size_t> indices;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) indices.insert(std::stoul(m[1].str()));
  }
  require(!indices.empty(), ErrorCode::InvalidClip, "no frames in " + dir.string());
  std::size_t expect = 1;
  for (std::size_t idx : indices) {
    require(idx == expect, ErrorCode::CorruptClip,
            "frame index gap in " + dir.string() + ": expected " + std::to_string(expect) +
                ", found " + std::to_string(idx));
    ++expect;
  }

  bool cropped = false;
  Tensor ps = read_png(ps_path);
  cropped |= crop_to_multiple_of_4(ps);
  std::vector<Frame> frames;
  frames.reserve(indices.size());
  for (std::size_t idx : indices) {
    Tensor t = read_png(dir / frame_filename(idx));
    cropped |= crop_to_multiple_of_4(t);
    require(t.h() == ps.h() && t.w() == ps.w(), ErrorCode::ShapeMismatch,
            "frame " + std::to_string(idx) + " size differs from ps.png in " + dir.string());
    frames.emplace_back(std::move(t));
  }
  Clip clip(std::move(frames), Frame(std::move(ps)), dir.filename().string());
  if (cropped) clip.mark_cropped();
  return clip;
}

void save_clip(const Clip& clip, const fs::path& dir) {
  require(clip.size() >= 1, ErrorCode::InvalidClip, "clip needs at least one frame");
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::IOError,
          "cannot create directory " + dir.string());
  // stale frames from a longer clip would break the index sequence
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("frame_", 0) == 0 && entry.path().extension() == ".png")
      fs::remove(entry.path());
  }
  write_png(dir / "ps.png", clip.ps_frame().tensor());
  for (std::size_t i = 0; i < clip.size(); ++i)
    write_png(dir / frame_filename(i + 1), clip.frame(i).tensor());
}

std::string_view split_name(Split s) noexcept { return s == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  fail(ErrorCode::InvalidDataset, "unknown split '" + std::string(s) + "'");
}

std::vector<ManifestEntry> read_manifest(const fs::path& manifest) {
  std::ifstream in(manifest);
  require(in.good(), ErrorCode::IOError, "cannot open manifest " + manifest.string());
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    require(tab != std::string::npos, ErrorCode::InvalidDataset,
            manifest.string() + ":" + std::to_string(lineno) + ": expected <split>\\t<path>");
    out.push_back({parse_split(line.substr(0, tab)), line.substr(tab + 1)});
  }
  return out;
}

void write_manifest(const fs::path& manifest, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(manifest, std::ios::trunc);
  require(out.good(), ErrorCode::IOError, "cannot write manifest " + manifest.string());
  for (const auto& e : entries) out << split_name(e.split) << '\t' << e.path << '\n';
  require(out.good(), ErrorCode::IOError, "write failed for " + manifest.string());
}

Dataset load_dataset(const fs::path& manifest, Split split) {
  Dataset ds;
  ds.split = split;
  ds.root_path = manifest.parent_path();
  std::set<std::string> seen;
  for (const auto& e : read_manifest(manifest)) {
    if (e.split != split) continue;
    require(seen.insert(e.path).second, ErrorCode::InvalidDataset,
            "duplicate clip id '" + e.path + "' in split " + std::string(split_name(split)));
    Clip c = load_clip(ds.root_path / e.path);
    c.set_id(e.path);
    ds.clips.push_back(std::move(c));
  }
  return ds;
}

std::optional<Clip> load_ground_truth(const fs::path& smoky_dir) {
  fs::path dir = smoky_dir.lexically_normal();
  if (!dir.has_filename()) dir = dir.parent_path();  // trailing separator
  const fs::path clean = dir.parent_path() / "clean";
  if (!fs::exists(clean / "ps.png")) return std::nullopt;
  return load_clip(clean);
}

}  // namespace desmoke
