// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "desmoke/error.hpp"

namespace desmoke {

namespace {

constexpr char kMagic[8] = {'D', 'S', 'M', 'K', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

float to_f32(double v) { return static_cast<float>(v); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  nlohmann::json manifest;
  manifest["format"] = "desmoke-checkpoint";
  manifest["version"] = 1;
  manifest["config"] = ckpt.config;
  manifest["iteration"] = ckpt.iteration;
  manifest["optimizer_steps"] = ckpt.optimizer_steps;
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : ckpt.tensors) {
    const Shape s = t.shape();
    entries.push_back({{"name", name},
                       {"shape", {s.n, s.c, s.h, s.w}},
                       {"offset", offset},
                       {"count", t.size()}});
    offset += t.size() * sizeof(float);
  }
  manifest["tensors"] = entries;
  const std::string text = manifest.dump();

  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), ErrorCode::IOError, "cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> buf;
  for (const auto& [name, t] : ckpt.tensors) {
    buf.resize(t.size());
    std::transform(t.vec().begin(), t.vec().end(), buf.begin(), to_f32);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  require(out.good(), ErrorCode::IOError, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::IOError, "cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  require(in.good() && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorCode::IOError,
          path.string() + " is not a desmoke checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  require(in.good() && len < (1u << 30), ErrorCode::IOError, "corrupt checkpoint header");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  require(in.good(), ErrorCode::IOError, "truncated checkpoint manifest");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::IOError, std::string("bad checkpoint manifest: ") + e.what());
  }
  Checkpoint ckpt;
  ckpt.config = manifest.value("config", nlohmann::json::object());
  ckpt.iteration = manifest.value("iteration", std::int64_t{0});
  ckpt.optimizer_steps =
      manifest.value("optimizer_steps", std::map<std::string, std::int64_t>{});
  const auto payload_start = in.tellg();
  std::vector<float> buf;
  for (const auto& e : manifest.at("tensors")) {
    const auto shape = e.at("shape").get<std::vector<int>>();
    require(shape.size() == 4, ErrorCode::IOError, "tensor shape must have 4 dims");
    const Shape s{shape[0], shape[1], shape[2], shape[3]};
    const auto count = e.at("count").get<std::uint64_t>();
    require(count == s.numel(), ErrorCode::IOError, "tensor count/shape mismatch");
    in.seekg(payload_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
    buf.resize(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)));
    require(in.good(), ErrorCode::IOError, "truncated checkpoint payload");
    ckpt.tensors.emplace(e.at("name").get<std::string>(),
                         Tensor(s, std::vector<double>(buf.begin(), buf.end())));
  }
  return ckpt;
}

nlohmann::json to_json(const NetworkConfig& c) {
  return {{"variant", variant_name(c.variant)},
          {"channels", c.channels},
          {"enc_blocks", c.enc_blocks},
          {"maskref_blocks", c.maskref_blocks},
          {"fusion_blocks", c.fusion_blocks},
          {"recon_blocks", c.recon_blocks},
          {"use_ref", c.use_ref},
          {"use_mask", c.use_mask},
          {"zero_init_final", c.zero_init_final},
          {"leaky_slope", c.leaky_slope}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  try {
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.channels = j.at("channels").get<int>();
    c.enc_blocks = j.at("enc_blocks").get<int>();
    c.maskref_blocks = j.at("maskref_blocks").get<int>();
    c.fusion_blocks = j.at("fusion_blocks").get<int>();
    c.recon_blocks = j.at("recon_blocks").get<int>();
    c.use_ref = j.value("use_ref", true);
    c.use_mask = j.value("use_mask", true);
    c.zero_init_final = j.value("zero_init_final", true);
    c.leaky_slope = j.value("leaky_slope", 0.1);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("bad network config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const DiscriminatorConfig& c) {
  return {{"base_channels", c.base_channels},
          {"input_size", c.input_size},
          {"leaky_slope", c.leaky_slope}};
}

DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  c.base_channels = j.value("base_channels", 64);
  c.input_size = j.value("input_size", 256);
  c.leaky_slope = j.value("leaky_slope", 0.2);
  c.validate();
  return c;
}

void store_parameters(Checkpoint& ckpt, const std::string& prefix, const nn::ParameterSet& params) {
  for (const auto& [name, p] : params.items()) ckpt.tensors[prefix + "/" + name] = p.value();
}

void restore_parameters(const Checkpoint& ckpt, const std::string& prefix,
                        const nn::ParameterSet& params) {
  for (const auto& [name, p] : params.items()) {
    auto it = ckpt.tensors.find(prefix + "/" + name);
    require(it != ckpt.tensors.end(), ErrorCode::InvalidConfig,
            "checkpoint lacks tensor " + prefix + "/" + name);
    require(it->second.shape() == p.value().shape(), ErrorCode::ShapeMismatch,
            "checkpoint tensor " + prefix + "/" + name + " has shape " + it->second.shape().str());
    nn::Var handle = p;  // shares the node
    handle.mutable_value() = it->second;
  }
}

void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const nn::Adam& opt) {
  ckpt.optimizer_steps[prefix] = opt.steps();
  for (const auto& [name, t] : opt.first_moments()) ckpt.tensors[prefix + "/m/" + name] = t;
  for (const auto& [name, t] : opt.second_moments()) ckpt.tensors[prefix + "/v/" + name] = t;
}

void restore_optimizer(const Checkpoint& ckpt, const std::string& prefix, nn::Adam& opt) {
  auto it = ckpt.optimizer_steps.find(prefix);
  opt.set_steps(it == ckpt.optimizer_steps.end() ? 0 : it->second);
  opt.first_moments().clear();
  opt.second_moments().clear();
  const std::string m = prefix + "/m/", v = prefix + "/v/";
  for (const auto& [name, t] : ckpt.tensors) {
    if (name.rfind(m, 0) == 0) opt.first_moments()[name.substr(m.size())] = t;
    if (name.rfind(v, 0) == 0) opt.second_moments()[name.substr(v.size())] = t;
  }
}

DesmokeNet load_generator(const Checkpoint& ckpt) {
  require(ckpt.config.contains("network"), ErrorCode::InvalidConfig,
          "checkpoint has no network config");
  DesmokeNet net(network_config_from_json(ckpt.config.at("network")), 0);
  restore_parameters(ckpt, "generator", net.parameters());
  return net;
}

std::uint64_t parameter_hash(const nn::ParameterSet& params) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& [name, p] : params.items())
    for (double v : p.value().vec()) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &v, sizeof(v));
      for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
      }
    }
  return h;
}

}  // namespace desmoke
