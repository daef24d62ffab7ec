// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "desmoke/checkpoint.hpp"
#include "desmoke/clip_io.hpp"
#include "desmoke/config.hpp"
#include "desmoke/desmoke_net.hpp"
#include "desmoke/eval.hpp"

namespace desmoke {

/// lr(k) = lr_min + 0.5 (lr_max - lr_min) (1 + cos(pi k / K)).
double cosine_lr(std::int64_t k, std::int64_t total, double lr_max, double lr_min);

/// One training batch: N items, every tensor (N,3,crop,crop).
struct TrainSample {
  Tensor ps;
  std::vector<Tensor> frames;
  std::vector<std::size_t> clip_indices;
};

/// Seeded sampler: random clip, temporal window, crop and flips, with the
/// same crop and flips on the PS frame and every window frame.
class SampleStream {
 public:
  SampleStream(const Dataset& data, const TrainConfig& cfg);
  TrainSample next();

 private:
  const Dataset* data_;
  TrainConfig cfg_;
  int window_;
  std::mt19937_64 rng_;
};

struct IterationLog {
  std::int64_t iter = 0;  // 1-based within the phase
  double lr = 0.0;
  double rec = 0.0;
  double reg = 0.0;
  double gan_g = 0.0;
  double gan_d = 0.0;
  double total = 0.0;
};

struct TrainOptions {
  /// Receives checkpoints, `train_log.csv` and NaN dumps; nothing is
  /// written when empty.
  std::filesystem::path out_dir;
  /// Overrides the configured iteration count when set.
  std::optional<int> iters;
  /// Starting weights (generator, discriminator, optimizers) when set.
  const Checkpoint* init = nullptr;
  std::function<void(const IterationLog&)> on_iteration;
};

struct TrainResult {
  Checkpoint final;
  std::vector<IterationLog> log;
  std::size_t all_invalid_frames = 0;
  /// parameter_hash of the frozen enhancer before and after fine-tuning.
  std::uint64_t enhancer_hash_before = 0;
  std::uint64_t enhancer_hash_after = 0;
};

/// Generator plus discriminator with their optimizers.
class Trainer {
 public:
  Trainer(const AppConfig& cfg, std::shared_ptr<const FlowBackend> flow);

  /// Overwrites weights (and optimizer state unless `reset_optimizers`).
  void load(const Checkpoint& ckpt, bool reset_optimizers);
  Checkpoint snapshot(std::int64_t iteration) const;

  /// Generator update, then a discriminator update unless lambda_gan is 0.
  /// `target` replaces the PS frame as supervision and real sample; the
  /// reference input stays `sample.ps`.
  IterationLog step(const TrainSample& sample, const Tensor& target, double lr,
                    std::size_t* all_invalid = nullptr);

  const DesmokeNet& generator() const noexcept { return gen_; }
  const Discriminator& discriminator() const noexcept { return disc_; }
  const AppConfig& config() const noexcept { return cfg_; }
  const FlowBackend& flow() const noexcept { return *flow_; }

 private:
  AppConfig cfg_;
  std::shared_ptr<const FlowBackend> flow_;
  DesmokeNet gen_;
  Discriminator disc_;
  nn::Adam opt_g_;
  nn::Adam opt_d_;
};

/// Trains from scratch (or from `opts.init`) on the train split.
TrainResult train(const Dataset& data, const AppConfig& cfg,
                  std::shared_ptr<const FlowBackend> flow, const TrainOptions& opts = {});

/// Fine-tunes a pre-trained checkpoint with enhanced PS frames from a frozen
/// copy of it. Iterations restart at 0 and lr starts at finetune_lr0.
TrainResult finetune_star(const Checkpoint& pretrained, const Dataset& data, const AppConfig& cfg,
                          std::shared_ptr<const FlowBackend> flow,
                          const TrainOptions& opts = {});

/// Batched enhance_ps: step(model, ps, ps) without recurrent state.
Tensor enhance_ps_batch(const DesmokeNet& model, const Tensor& ps, const FlowBackend& flow,
                        const MaskGenConfig& mask_cfg);

/// Sequential deployment: every `chunk_len` frames the detector checks
/// whether the current frame can serve as reference.
class StreamProcessor {
 public:
  StreamProcessor(const DesmokeNet& model, const DeployConfig& deploy,
                  std::shared_ptr<const FlowBackend> flow, const MaskGenConfig& mask_cfg);

  Frame push(const Frame& frame);

  /// 0-based index of the reference used for each emitted frame.
  const std::vector<int>& ref_indices() const noexcept { return ref_indices_; }
  /// 0-based indices where the detector ran, and whether it fired there.
  const std::vector<int>& detector_frames() const noexcept { return detector_frames_; }
  const std::vector<bool>& detector_fired() const noexcept { return fired_; }
  const std::vector<double>& detector_residuals() const noexcept { return residuals_; }

 private:
  const DesmokeNet* model_;
  DeployConfig deploy_;
  std::shared_ptr<const FlowBackend> flow_;
  MaskGenConfig mask_cfg_;
  int index_ = 0;
  int ref_index_ = -1;
  RefContext ref_ctx_;
  std::optional<RecurrentState> state_;
  std::vector<int> ref_indices_;
  std::vector<int> detector_frames_;
  std::vector<bool> fired_;
  std::vector<double> residuals_;
};

struct StreamResult {
  std::vector<Frame> frames;
  std::vector<int> ref_indices;
  std::vector<int> detector_frames;
  std::vector<bool> detector_fired;
};

StreamResult process_stream(const DesmokeNet& model, const std::vector<Frame>& frames,
                            const DeployConfig& deploy, std::shared_ptr<const FlowBackend> flow,
                            const MaskGenConfig& mask_cfg);

/// Restores each clip (or passes it through when `model` is null, the
/// identity baseline) and scores it against the chosen targets.
EvalReport evaluate_dataset(const DesmokeNet* model, const Dataset& data, TargetMode mode,
                            const FlowBackend& flow, const MaskGenConfig& mask_cfg, double tau,
                            const DesmokeNet* target_model = nullptr);

}  // namespace desmoke
