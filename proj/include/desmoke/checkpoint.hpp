// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "desmoke/desmoke_net.hpp"
#include "desmoke/layers.hpp"

namespace desmoke {

/// On disk: the 8-byte magic "DSMKCKPT", a little-endian u64 manifest
/// length, the JSON manifest, then every tensor as raw little-endian
/// float32 in manifest order. The manifest holds the config echo, the
/// iteration counter, optimizer step counts and, per tensor, its name,
/// shape, byte offset into the payload and element count.
struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::int64_t iteration = 0;
  std::map<std::string, std::int64_t> optimizer_steps;
  std::map<std::string, Tensor> tensors;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DiscriminatorConfig& cfg);
DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j);

/// Copies parameters into `ckpt.tensors` under "<prefix>/<name>".
void store_parameters(Checkpoint& ckpt, const std::string& prefix, const nn::ParameterSet& params);
/// Overwrites parameter values from "<prefix>/<name>"; every name must exist
/// with a matching shape.
void restore_parameters(const Checkpoint& ckpt, const std::string& prefix,
                        const nn::ParameterSet& params);

void store_optimizer(Checkpoint& ckpt, const std::string& prefix, const nn::Adam& opt);
void restore_optimizer(const Checkpoint& ckpt, const std::string& prefix, nn::Adam& opt);

/// Rebuilds a generator from a checkpoint's config echo and "generator/" tensors.
DesmokeNet load_generator(const Checkpoint& ckpt);

/// FNV-1a over the bytes of every parameter value, in order.
std::uint64_t parameter_hash(const nn::ParameterSet& params);

}  // namespace desmoke
