// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "desmoke/flow.hpp"
#include "desmoke/layers.hpp"
#include "desmoke/masked_ref.hpp"

namespace desmoke {

enum class Variant { Full, Small, Tiny };
std::string_view variant_name(Variant v) noexcept;
Variant parse_variant(std::string_view s);

struct NetworkConfig {
  Variant variant = Variant::Small;
  int channels = 32;
  int enc_blocks = 3;
  int maskref_blocks = 3;
  int fusion_blocks = 8;
  int recon_blocks = 3;
  bool use_ref = true;   // false drops the reference branch entirely
  bool use_mask = true;  // false keeps every warped reference feature
  bool zero_init_final = true;
  double leaky_slope = 0.1;

  static NetworkConfig full();
  static NetworkConfig small();
  /// Test-scale defaults; block counts and width stay configurable.
  static NetworkConfig tiny();
  void validate() const;
};

struct DiscriminatorConfig {
  int base_channels = 64;
  int input_size = 256;
  double leaky_slope = 0.2;

  void validate() const;
};

/// Hidden temporal features H_i (N,C,H/4,W/4) plus the smoky frame they
/// were computed from, needed to align them to the next frame.
struct RecurrentState {
  nn::Var features;
  Tensor frame;
  int frame_index = 0;
};

/// Encoded reference, computed once per clip and reused by every step.
struct RefContext {
  Tensor image;       // (N,3,H,W)
  nn::Var features;   // (N,C,H/4,W/4); undefined when use_ref is false
};

struct StepOptions {
  /// Replaces the generated masks (one per batch item).
  std::optional<std::vector<PatchMask>> forced_masks;
};

struct StepResult {
  nn::Var output;  // restored frame(s), (N,3,H,W), clamped to [0,1]
  RecurrentState state;
  std::vector<PatchMask> masks;  // M_i per batch item (empty without ref)
  nn::Var ref_features;          // F_{ref->i} before masking
};

class DesmokeNet {
 public:
  DesmokeNet(const NetworkConfig& cfg, std::uint64_t seed);

  const NetworkConfig& config() const noexcept { return cfg_; }

  enum class Stream { Smoky, Ref };
  /// Two stride-2 3x3 convolutions and residual blocks: (N,3,H,W) ->
  /// (N,C,H/4,W/4). The two streams have independent weights.
  nn::Var encode(const nn::Var& frames, Stream which) const;

  RefContext prepare_ref(const Tensor& ref) const;

  StepResult step(const Tensor& smoky, const RefContext& ref,
                  const std::optional<RecurrentState>& state, const FlowBackend& flow,
                  const MaskGenConfig& mask_cfg, const StepOptions& opts = {}) const;

  /// All trainable tensors, grouped under encoder_smoky, encoder_ref,
  /// fusion and reconstruction.
  nn::ParameterSet parameters() const;
  std::map<std::string, std::uint64_t> parameter_groups() const;

 private:
  struct Encoder {
    nn::Conv2d down1, down2;
    std::vector<nn::ResidualBlock> blocks;
    nn::ParameterSet parameters() const;
  };

  NetworkConfig cfg_;
  Encoder enc_smoky_;
  Encoder enc_ref_;
  nn::Conv2d fuse_reduce_;
  std::vector<nn::ResidualBlock> fusion_;
  std::vector<nn::ResidualBlock> recon_;
  nn::Conv2d up1_, up2_, final_;
};

/// Convenience single step on whole frames: encodes the reference itself.
StepResult step(const DesmokeNet& model, const Tensor& smoky, const Tensor& ref,
                const std::optional<RecurrentState>& state, const FlowBackend& flow,
                const MaskGenConfig& mask_cfg, const StepOptions& opts = {});

/// Sequential recurrence over `frames` (each (N,3,H,W)) with one reference.
std::vector<StepResult> run_clip(const DesmokeNet& model, const std::vector<Tensor>& frames,
                                 const Tensor& ref, const FlowBackend& flow,
                                 const MaskGenConfig& mask_cfg, const StepOptions& opts = {});

struct ClipRestoration {
  std::vector<Frame> frames;
  std::vector<PatchMask> masks;
};

/// Inference over a Clip without building a gradient graph.
ClipRestoration run_clip(const DesmokeNet& model, const Clip& clip, const Frame& ref,
                         const FlowBackend& flow, const MaskGenConfig& mask_cfg);

/// PatchGAN: 4x4 convolutions 3->c (s2), c->2c (s2, BN), 2c->4c (s2, BN),
/// 4c->8c (s1, BN), 8c->1 (s1), padding 1, leaky activations between.
class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed);

  const DiscriminatorConfig& config() const noexcept { return cfg_; }

  /// (N,3,S,S) -> (N,1,s,s) score map. When `trace` is given, receives the
  /// output shape of every layer.
  nn::Var operator()(const nn::Var& images, std::vector<Shape>* trace = nullptr) const;

  nn::ParameterSet parameters() const;

 private:
  DiscriminatorConfig cfg_;
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::BatchNorm2d> norms_;  // layers 2..4
};

}  // namespace desmoke
