// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "desmoke/desmoke_net.hpp"
#include "desmoke/eval.hpp"
#include "desmoke/flow.hpp"
#include "desmoke/layers.hpp"
#include "desmoke/losses.hpp"
#include "desmoke/masked_ref.hpp"
#include "desmoke/smoke_sim.hpp"

namespace desmoke {

struct TrainConfig {
  int batch_size = 4;
  int crop = 256;
  bool flips = true;
  nn::AdamConfig adam;
  int iters = 100000;
  double lr_max = 1e-4;
  double lr_min = 1e-7;
  int finetune_iters = 40000;
  double finetune_lr0 = 5e-5;
  LossWeights weights;
  std::uint64_t seed = 0;
  int clip_sample_len = 5;
  double tau = 0.999;           // validity threshold of the aligned L1
  int checkpoint_interval = 10000;

  void validate(int patch_size) const;
};

struct DeployConfig {
  double ref_epsilon = 0.01;
  int chunk_len = 5;

  void validate() const;
};

struct SynthConfig {
  int clips = 20;
  int frames = 10;
  int height = 64;
  int width = 64;
  double split_ratio = 0.8;
  std::uint64_t seed = 1;
  bool instrument = true;
  SmokeParamsGrid grid;

  void validate() const;
};

struct EvalConfig {
  TargetMode mode = TargetMode::OriginalPS;
  double tau = kDefaultTau;
};

/// Everything a CLI run needs, one struct per section.
struct AppConfig {
  NetworkConfig network;
  DiscriminatorConfig discriminator;
  MaskGenConfig mask;
  FlowConfig flow;
  TrainConfig train;
  DeployConfig deploy;
  SynthConfig synth;
  EvalConfig eval;

  void validate() const;
};

/// Flat "section.key" -> scalar text.
using FlatConfig = std::map<std::string, std::string>;

/// Reads a YAML mapping of sections to scalar (or flow-sequence) values.
FlatConfig read_config_file(const std::filesystem::path& path);

/// Every recognized "section.key", in a stable order.
const std::vector<std::string>& config_keys();

/// DESMOKE_<SECTION>_<KEY> in upper case, e.g. DESMOKE_TRAIN_ITERS.
std::string env_var_name(const std::string& key);

/// Copies matching environment variables over `flat`.
void apply_env_overrides(FlatConfig& flat);

/// Applies `flat` over the defaults. "network.variant" loads its preset
/// first so the other network keys refine it. Unknown keys, unparsable
/// values and an invalid result raise InvalidConfig.
AppConfig build_config(const FlatConfig& flat);

/// File (when given), then environment, then validation.
AppConfig load_app_config(const std::optional<std::filesystem::path>& path);

nlohmann::json to_json(const AppConfig& cfg);

}  // namespace desmoke
