// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "desmoke/autograd.hpp"
#include "desmoke/error.hpp"
#include "desmoke/losses.hpp"

namespace desmoke {

namespace {

Tensor crop_flip(const Tensor& img, int y0, int x0, int size, bool hflip, bool vflip) {
  Tensor out(Shape{1, img.c(), size, size});
  for (int c = 0; c < img.c(); ++c)
    for (int y = 0; y < size; ++y) {
      const int sy = y0 + (vflip ? size - 1 - y : y);
      for (int x = 0; x < size; ++x) {
        const int sx = x0 + (hflip ? size - 1 - x : x);
        out.at(0, c, y, x) = img.at(0, c, sy, sx);
      }
    }
  return out;
}

nn::Var zero_scalar() { return nn::Var(Tensor(Shape{1, 1, 1, 1}, 0.0)); }

double scalar(const nn::Var& v) { return v.value().data()[0]; }

// Decorrelates the sub-seeds drawn from one user seed (splitmix64 finalizer).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t x = seed ^ (salt * 0x9e3779b97f4a7c15ull);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

AppConfig with_checkpoint_architecture(AppConfig cfg, const Checkpoint& ckpt) {
  require(ckpt.config.contains("network"), ErrorCode::InvalidConfig,
          "pre-trained checkpoint has no network config");
  cfg.network = network_config_from_json(ckpt.config.at("network"));
  if (ckpt.config.contains("discriminator"))
    cfg.discriminator = discriminator_config_from_json(ckpt.config.at("discriminator"));
  return cfg;
}

TrainResult run_phase(Trainer& tr, const Dataset& data, int iters, double lr0,
                      const DesmokeNet* enhancer, const TrainOptions& opts) {
  const AppConfig& cfg = tr.config();
  const FlowBackend& flow = tr.flow();
  SampleStream samples(data, cfg.train);
  TrainResult result;

  std::ofstream csv;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    csv.open(opts.out_dir / "train_log.csv", std::ios::trunc);
    require(csv.good(), ErrorCode::IOError, "cannot write training log in " + opts.out_dir.string());
    csv << "iter,rec,reg,gan_g,gan_d,total\n";
    csv.precision(12);
  }

  for (int k = 0; k < iters; ++k) {
    const double lr = cosine_lr(k, iters, lr0, cfg.train.lr_min);
    const TrainSample sample = samples.next();
    const Tensor target = enhancer ? enhance_ps_batch(*enhancer, sample.ps, flow, cfg.mask)
                                   : sample.ps;
    IterationLog log;
    try {
      log = tr.step(sample, target, lr, &result.all_invalid_frames);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalError) throw;
      std::string where;
      if (!opts.out_dir.empty()) {
        Checkpoint dump = tr.snapshot(k);
        nlohmann::json clips = nlohmann::json::array();
        for (auto i : sample.clip_indices) clips.push_back(data.clips[i].id());
        dump.config["nan_dump"] = {{"iteration", k + 1}, {"lr", lr}, {"clips", clips}};
        save_checkpoint(opts.out_dir / "nan_dump.dsmk", dump);
        where = "; state dumped to " + (opts.out_dir / "nan_dump.dsmk").string();
      }
      fail(ErrorCode::NumericalError,
           "iteration " + std::to_string(k + 1) + ": " + e.what() + where);
    }
    log.iter = k + 1;
    if (csv.is_open())
      csv << log.iter << ',' << log.rec << ',' << log.reg << ',' << log.gan_g << ','
          << log.gan_d << ',' << log.total << '\n';
    if (opts.on_iteration) opts.on_iteration(log);
    result.log.push_back(log);
    if (!opts.out_dir.empty() && (k + 1) % cfg.train.checkpoint_interval == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%06d.dsmk", k + 1);
      save_checkpoint(opts.out_dir / name, tr.snapshot(k + 1));
    }
  }
  result.final = tr.snapshot(iters);
  if (!opts.out_dir.empty()) save_checkpoint(opts.out_dir / "final.dsmk", result.final);
  return result;
}

}  // namespace

double cosine_lr(std::int64_t k, std::int64_t total, double lr_max, double lr_min) {
  require(total > 0, ErrorCode::InvalidConfig, "cosine schedule needs at least one iteration");
  const double t = static_cast<double>(std::clamp<std::int64_t>(k, 0, total)) / total;
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(M_PI * t));
}

SampleStream::SampleStream(const Dataset& data, const TrainConfig& cfg)
    : data_(&data), cfg_(cfg), rng_(mix_seed(cfg.seed, 0xda7a)) {
  require(!data.clips.empty(), ErrorCode::InvalidDataset, "training split is empty");
  std::size_t shortest = data.clips.front().size();
  for (const auto& c : data.clips) {
    shortest = std::min(shortest, c.size());
    require(c.height() >= cfg.crop && c.width() >= cfg.crop, ErrorCode::InvalidConfig,
            "clip " + c.id() + " is smaller than the training crop");
  }
  window_ = static_cast<int>(std::min<std::size_t>(cfg.clip_sample_len, shortest));
}

TrainSample SampleStream::next() {
  std::vector<Tensor> ps_items;
  std::vector<std::vector<Tensor>> frame_items(window_);
  TrainSample s;
  for (int b = 0; b < cfg_.batch_size; ++b) {
    const auto ci = std::uniform_int_distribution<std::size_t>(0, data_->clips.size() - 1)(rng_);
    const Clip& clip = data_->clips[ci];
    const auto start = std::uniform_int_distribution<std::size_t>(0, clip.size() - window_)(rng_);
    const int y0 = std::uniform_int_distribution<int>(0, clip.height() - cfg_.crop)(rng_);
    const int x0 = std::uniform_int_distribution<int>(0, clip.width() - cfg_.crop)(rng_);
    bool hflip = false, vflip = false;
    if (cfg_.flips) {
      hflip = std::bernoulli_distribution(0.5)(rng_);
      vflip = std::bernoulli_distribution(0.5)(rng_);
    }
    ps_items.push_back(crop_flip(clip.ps_frame().tensor(), y0, x0, cfg_.crop, hflip, vflip));
    for (int i = 0; i < window_; ++i)
      frame_items[i].push_back(
          crop_flip(clip.frame(start + i).tensor(), y0, x0, cfg_.crop, hflip, vflip));
    s.clip_indices.push_back(ci);
  }
  s.ps = stack(ps_items);
  for (auto& f : frame_items) s.frames.push_back(stack(f));
  return s;
}

Trainer::Trainer(const AppConfig& cfg, std::shared_ptr<const FlowBackend> flow)
    : cfg_(cfg),
      flow_(std::move(flow)),
      gen_(cfg.network, mix_seed(cfg.train.seed, 0x9e4)),
      disc_(cfg.discriminator, mix_seed(cfg.train.seed, 0xd15c)),
      opt_g_(cfg.train.adam),
      opt_d_(cfg.train.adam) {
  require(flow_ != nullptr, ErrorCode::InvalidArgument, "trainer needs a flow backend");
  cfg_.train.validate(cfg_.mask.patch_size);
  require(cfg_.train.weights.lambda_gan == 0.0 || cfg_.discriminator.input_size == cfg_.train.crop,
          ErrorCode::InvalidConfig, "discriminator.input_size must equal train.crop");
}

void Trainer::load(const Checkpoint& ckpt, bool reset_optimizers) {
  restore_parameters(ckpt, "generator", gen_.parameters());
  restore_parameters(ckpt, "discriminator", disc_.parameters());
  if (reset_optimizers) {
    opt_g_ = nn::Adam(cfg_.train.adam);
    opt_d_ = nn::Adam(cfg_.train.adam);
  } else {
    restore_optimizer(ckpt, "optim_g", opt_g_);
    restore_optimizer(ckpt, "optim_d", opt_d_);
  }
}

Checkpoint Trainer::snapshot(std::int64_t iteration) const {
  Checkpoint c;
  c.config = to_json(cfg_);
  c.iteration = iteration;
  store_parameters(c, "generator", gen_.parameters());
  store_parameters(c, "discriminator", disc_.parameters());
  store_optimizer(c, "optim_g", opt_g_);
  store_optimizer(c, "optim_d", opt_d_);
  return c;
}

IterationLog Trainer::step(const TrainSample& sample, const Tensor& target, double lr,
                           std::size_t* all_invalid) {
  require(target.shape() == sample.ps.shape(), ErrorCode::ShapeMismatch,
          "training target " + target.shape().str() + " vs PS " + sample.ps.shape().str());
  const TrainConfig& tc = cfg_.train;
  const bool adversarial = tc.weights.lambda_gan > 0.0;
  IterationLog log;
  log.lr = lr;

  nn::ParameterSet gp = gen_.parameters();
  nn::ParameterSet dp = disc_.parameters();
  gp.zero_grad();
  dp.zero_grad();

  const auto results = run_clip(gen_, sample.frames, sample.ps, *flow_, cfg_.mask);
  std::vector<nn::Var> outputs;
  for (const auto& r : results) outputs.push_back(r.output);

  RecLossStats stats;
  const nn::Var rec = rec_loss(outputs, target, *flow_, tc.tau, &stats);
  if (all_invalid) *all_invalid += stats.all_invalid_frames;

  nn::Var reg = zero_scalar();
  if (cfg_.network.use_ref) {
    std::vector<nn::Var> terms;
    for (const auto& r : results) terms.push_back(reg_loss(r.masks, r.ref_features));
    const std::vector<double> ones(terms.size(), 1.0);
    reg = nn::weighted_sum(terms, ones);
  }

  nn::Var gan_g = zero_scalar();
  if (adversarial) gan_g = gan_g_loss(disc_(nn::concat_batch(outputs)));

  const nn::Var total = total_loss(rec, reg, gan_g, tc.weights);
  nn::backward(total);
  opt_g_.step(gp, lr);

  log.rec = scalar(rec);
  log.reg = scalar(reg);
  log.gan_g = scalar(gan_g);
  log.total = scalar(total);

  if (adversarial) {
    dp.zero_grad();
    std::vector<nn::Var> fakes;
    for (const auto& o : outputs) fakes.push_back(o.detach());
    const nn::Var real = disc_(nn::Var(target));
    const nn::Var fake = disc_(nn::concat_batch(fakes));
    const nn::Var gan_d = gan_d_loss(real, fake);
    log.gan_d = scalar(gan_d);
    require(std::isfinite(log.gan_d), ErrorCode::NumericalError, "non-finite discriminator loss");
    nn::backward(gan_d);
    opt_d_.step(dp, lr);
  }
  return log;
}

TrainResult train(const Dataset& data, const AppConfig& cfg,
                  std::shared_ptr<const FlowBackend> flow, const TrainOptions& opts) {
  require(!data.clips.empty(), ErrorCode::InvalidDataset, "training split is empty");
  Trainer tr(cfg, std::move(flow));
  if (opts.init) tr.load(*opts.init, false);
  return run_phase(tr, data, opts.iters.value_or(cfg.train.iters), cfg.train.lr_max, nullptr,
                   opts);
}

TrainResult finetune_star(const Checkpoint& pretrained, const Dataset& data, const AppConfig& cfg,
                          std::shared_ptr<const FlowBackend> flow, const TrainOptions& opts) {
  require(!data.clips.empty(), ErrorCode::InvalidDataset, "training split is empty");
  const AppConfig c2 = with_checkpoint_architecture(cfg, pretrained);
  const DesmokeNet frozen = load_generator(pretrained);
  const std::uint64_t before = parameter_hash(frozen.parameters());

  Trainer tr(c2, std::move(flow));
  tr.load(pretrained, true);
  TrainResult r = run_phase(tr, data, opts.iters.value_or(c2.train.finetune_iters),
                            c2.train.finetune_lr0, &frozen, opts);
  r.enhancer_hash_before = before;
  r.enhancer_hash_after = parameter_hash(frozen.parameters());
  return r;
}

Tensor enhance_ps_batch(const DesmokeNet& model, const Tensor& ps, const FlowBackend& flow,
                        const MaskGenConfig& mask_cfg) {
  nn::NoGradGuard no_grad;
  return step(model, ps, ps, std::nullopt, flow, mask_cfg).output.value();
}

StreamProcessor::StreamProcessor(const DesmokeNet& model, const DeployConfig& deploy,
                                 std::shared_ptr<const FlowBackend> flow,
                                 const MaskGenConfig& mask_cfg)
    : model_(&model), deploy_(deploy), flow_(std::move(flow)), mask_cfg_(mask_cfg) {
  deploy_.validate();
  mask_cfg_.validate();
  require(flow_ != nullptr, ErrorCode::InvalidArgument, "stream needs a flow backend");
}

Frame StreamProcessor::push(const Frame& frame) {
  nn::NoGradGuard no_grad;
  const Tensor& x = frame.tensor();
  if (index_ % deploy_.chunk_len == 0) {
    const Tensor self = enhance_ps_batch(*model_, x, *flow_, mask_cfg_);
    double residual = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) residual += std::abs(x.data()[i] - self.data()[i]);
    residual /= static_cast<double>(x.size());
    const bool fired = residual < deploy_.ref_epsilon;
    detector_frames_.push_back(index_);
    fired_.push_back(fired);
    residuals_.push_back(residual);
    if (fired) {
      ref_index_ = index_;
      ref_ctx_ = model_->prepare_ref(x);
    }
  }
  if (ref_index_ < 0) {  // provisional reference until the detector fires
    ref_index_ = index_;
    ref_ctx_ = model_->prepare_ref(x);
  }
  if (state_)
    require(state_->frame.shape() == x.shape(), ErrorCode::StateMismatch,
            "stream frame size changed mid-stream");
  StepResult r = model_->step(x, ref_ctx_, state_, *flow_, mask_cfg_);
  state_ = std::move(r.state);
  ref_indices_.push_back(ref_index_);
  ++index_;
  return clamp_to_frame(r.output.value());
}

StreamResult process_stream(const DesmokeNet& model, const std::vector<Frame>& frames,
                            const DeployConfig& deploy, std::shared_ptr<const FlowBackend> flow,
                            const MaskGenConfig& mask_cfg) {
  require(!frames.empty(), ErrorCode::InvalidInput, "stream needs at least one frame");
  StreamProcessor proc(model, deploy, std::move(flow), mask_cfg);
  StreamResult r;
  for (const auto& f : frames) r.frames.push_back(proc.push(f));
  r.ref_indices = proc.ref_indices();
  r.detector_frames = proc.detector_frames();
  r.detector_fired = proc.detector_fired();
  return r;
}

EvalReport evaluate_dataset(const DesmokeNet* model, const Dataset& data, TargetMode mode,
                            const FlowBackend& flow, const MaskGenConfig& mask_cfg, double tau,
                            const DesmokeNet* target_model) {
  std::vector<FrameScore> scores;
  for (const auto& clip : data.clips) {
    std::vector<Frame> results =
        model ? run_clip(*model, clip, clip.ps_frame(), flow, mask_cfg).frames : clip.frames();
    std::optional<Clip> gt;
    if (mode == TargetMode::SyntheticGT) gt = load_ground_truth(data.root_path / clip.id());
    const auto targets = make_eval_targets(clip, mode, target_model ? target_model : model,
                                           gt ? &*gt : nullptr, flow, mask_cfg);
    auto s = score_clip(clip.id(), results, targets, flow, tau);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  return aggregate(mode, std::move(scores));
}

}  // namespace desmoke
