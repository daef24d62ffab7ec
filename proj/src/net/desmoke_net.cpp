// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/desmoke_net.hpp"

#include "desmoke/error.hpp"

namespace desmoke {

using nn::Var;

std::string_view variant_name(Variant v) noexcept {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Small: return "small";
    case Variant::Tiny: return "tiny";
  }
  return "small";
}

Variant parse_variant(std::string_view s) {
  if (s == "full") return Variant::Full;
  if (s == "small") return Variant::Small;
  if (s == "tiny") return Variant::Tiny;
  fail(ErrorCode::InvalidConfig, "unknown network variant '" + std::string(s) + "'");
}

NetworkConfig NetworkConfig::full() {
  NetworkConfig c;
  c.variant = Variant::Full;
  c.channels = 64;
  c.enc_blocks = 5;
  c.maskref_blocks = 5;
  c.fusion_blocks = 60;
  c.recon_blocks = 5;
  return c;
}

NetworkConfig NetworkConfig::small() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::tiny() {
  NetworkConfig c;
  c.variant = Variant::Tiny;
  c.channels = 16;
  c.enc_blocks = 1;
  c.maskref_blocks = 1;
  c.fusion_blocks = 2;
  c.recon_blocks = 1;
  return c;
}

void NetworkConfig::validate() const {
  require(channels >= 8, ErrorCode::InvalidConfig, "net.channels must be >= 8");
  require(enc_blocks >= 1 && maskref_blocks >= 1 && fusion_blocks >= 1 && recon_blocks >= 1,
          ErrorCode::InvalidConfig, "every block count must be >= 1");
  require(leaky_slope >= 0.0, ErrorCode::InvalidConfig, "net.leaky_slope must be >= 0");
}

void DiscriminatorConfig::validate() const {
  require(base_channels >= 1, ErrorCode::InvalidConfig, "disc.base_channels must be >= 1");
  // four valid layers must leave at least one output cell
  require(input_size >= 24, ErrorCode::InvalidConfig, "disc.input_size must be >= 24");
}

nn::ParameterSet DesmokeNet::Encoder::parameters() const {
  nn::ParameterSet ps;
  ps.append("down1", down1.parameters());
  ps.append("down2", down2.parameters());
  for (std::size_t i = 0; i < blocks.size(); ++i)
    ps.append("blocks." + std::to_string(i), blocks[i].parameters());
  return ps;
}

DesmokeNet::DesmokeNet(const NetworkConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  const int C = cfg_.channels;
  auto make_encoder = [&](int blocks) {
    Encoder e;
    e.down1 = nn::Conv2d(3, C, 3, 2, 1, rng);
    e.down2 = nn::Conv2d(C, C, 3, 2, 1, rng);
    for (int i = 0; i < blocks; ++i) e.blocks.emplace_back(C, rng);
    return e;
  };
  enc_smoky_ = make_encoder(cfg_.enc_blocks);
  if (cfg_.use_ref) enc_ref_ = make_encoder(cfg_.maskref_blocks);
  fuse_reduce_ = nn::Conv2d((cfg_.use_ref ? 3 : 2) * C, C, 3, 1, 1, rng);
  for (int i = 0; i < cfg_.fusion_blocks; ++i) fusion_.emplace_back(C, rng);
  for (int i = 0; i < cfg_.recon_blocks; ++i) recon_.emplace_back(C, rng);
  up1_ = nn::Conv2d(C, 4 * C, 3, 1, 1, rng);
  up2_ = nn::Conv2d(C, 4 * C, 3, 1, 1, rng);
  final_ = nn::Conv2d(C, 3, 3, 1, 1, rng, cfg_.zero_init_final ? 0.0 : 0.1);
}

Var DesmokeNet::encode(const Var& frames, Stream which) const {
  const Shape s = frames.shape();
  require(s.c == 3 && s.h % 4 == 0 && s.w % 4 == 0 && s.h > 0 && s.w > 0,
          ErrorCode::ShapeMismatch, "encode expects (N,3,H,W) with H,W divisible by 4, got " + s.str());
  require(which == Stream::Smoky || cfg_.use_ref, ErrorCode::InvalidConfig,
          "model was built without a reference branch");
  const Encoder& e = which == Stream::Smoky ? enc_smoky_ : enc_ref_;
  Var x = nn::leaky_relu(e.down1(frames), cfg_.leaky_slope);
  x = nn::leaky_relu(e.down2(x), cfg_.leaky_slope);
  for (const auto& b : e.blocks) x = b(x);
  return x;
}

RefContext DesmokeNet::prepare_ref(const Tensor& ref) const {
  RefContext ctx;
  ctx.image = ref;
  if (cfg_.use_ref) ctx.features = encode(Var(ref), Stream::Ref);
  return ctx;
}

StepResult DesmokeNet::step(const Tensor& smoky, const RefContext& ref,
                            const std::optional<RecurrentState>& state, const FlowBackend& flow,
                            const MaskGenConfig& mask_cfg, const StepOptions& opts) const {
  const Shape s = smoky.shape();
  require(s.c == 3, ErrorCode::ShapeMismatch, "step expects RGB frames, got " + s.str());
  const int N = s.n, h = s.h / 4, w = s.w / 4;
  const Var x(smoky);
  StepResult res;

  std::vector<Var> parts{encode(x, Stream::Smoky)};

  if (cfg_.use_ref) {
    require(ref.image.shape() == s, ErrorCode::ShapeMismatch,
            "reference " + ref.image.shape().str() + " vs frames " + s.str());
    if (opts.forced_masks)
      require(opts.forced_masks->size() == static_cast<std::size_t>(N), ErrorCode::InvalidArgument,
              "one forced mask per batch item");
    Tensor flows(Shape{N, 2, s.h, s.w});
    Tensor mask_map(Shape{N, 1, h, w});
    for (int n = 0; n < N; ++n) {
      const Tensor ref_n = ref.image.item(n);
      const Tensor smoky_n = smoky.item(n);
      PatchMask m;
      Tensor f;
      if (opts.forced_masks) {
        f = estimate_flow(flow, smoky_n, ref_n).uv;
        m = (*opts.forced_masks)[n];
      } else if (!cfg_.use_mask) {
        f = estimate_flow(flow, smoky_n, ref_n).uv;
        m = PatchMask::for_image(s.h, s.w, mask_cfg.patch_size, 1);
      } else {
        MaskResult g = generate_mask(ref_n, smoky_n, flow, mask_cfg);
        f = std::move(g.flow);
        m = std::move(g.mask);
      }
      flows.set_item(n, f);
      mask_map.set_item(n, expand_mask(m, h, w));
      res.masks.push_back(std::move(m));
    }
    res.ref_features = nn::warp(ref.features, resize_flow(flows, h, w));
    parts.push_back(nn::mul_map(res.ref_features, mask_map));
  }

  Var hidden;
  if (state) {
    const Shape hs = state->features.shape();
    require(hs == Shape{N, cfg_.channels, h, w} && state->frame.shape() == s,
            ErrorCode::StateMismatch,
            "recurrent state " + hs.str() + " does not fit frames " + s.str());
    const Tensor t_flow = estimate_flow_batch(flow, smoky, state->frame);
    hidden = nn::warp(state->features, resize_flow(t_flow, h, w));
  } else {
    hidden = Var(Tensor(Shape{N, cfg_.channels, h, w}, 0.0));
  }
  parts.push_back(hidden);

  Var fused = nn::leaky_relu(fuse_reduce_(nn::concat_channels(parts)), cfg_.leaky_slope);
  for (const auto& b : fusion_) fused = b(fused);
  res.state = RecurrentState{fused, smoky, state ? state->frame_index + 1 : 1};

  Var r = fused;
  for (const auto& b : recon_) r = b(r);
  r = nn::leaky_relu(nn::pixel_shuffle(up1_(r), 2), cfg_.leaky_slope);
  r = nn::leaky_relu(nn::pixel_shuffle(up2_(r), 2), cfg_.leaky_slope);
  r = final_(r);
  res.output = nn::clamp01(nn::add(r, x));
  return res;
}

nn::ParameterSet DesmokeNet::parameters() const {
  nn::ParameterSet ps;
  ps.append("encoder_smoky", enc_smoky_.parameters());
  if (cfg_.use_ref) ps.append("encoder_ref", enc_ref_.parameters());
  nn::ParameterSet fusion;
  fusion.append("reduce", fuse_reduce_.parameters());
  for (std::size_t i = 0; i < fusion_.size(); ++i)
    fusion.append("blocks." + std::to_string(i), fusion_[i].parameters());
  ps.append("fusion", fusion);
  nn::ParameterSet recon;
  for (std::size_t i = 0; i < recon_.size(); ++i)
    recon.append("blocks." + std::to_string(i), recon_[i].parameters());
  recon.append("up1", up1_.parameters());
  recon.append("up2", up2_.parameters());
  recon.append("final", final_.parameters());
  ps.append("reconstruction", recon);
  return ps;
}

std::map<std::string, std::uint64_t> DesmokeNet::parameter_groups() const {
  std::map<std::string, std::uint64_t> groups;
  const nn::ParameterSet params = parameters();
  for (const auto& [name, p] : params.items())
    groups[name.substr(0, name.find('.'))] += p.value().size();
  return groups;
}

StepResult step(const DesmokeNet& model, const Tensor& smoky, const Tensor& ref,
                const std::optional<RecurrentState>& state, const FlowBackend& flow,
                const MaskGenConfig& mask_cfg, const StepOptions& opts) {
  return model.step(smoky, model.prepare_ref(ref), state, flow, mask_cfg, opts);
}

std::vector<StepResult> run_clip(const DesmokeNet& model, const std::vector<Tensor>& frames,
                                 const Tensor& ref, const FlowBackend& flow,
                                 const MaskGenConfig& mask_cfg, const StepOptions& opts) {
  require(!frames.empty(), ErrorCode::InvalidClip, "run_clip needs at least one frame");
  const RefContext ctx = model.prepare_ref(ref);
  std::vector<StepResult> out;
  out.reserve(frames.size());
  std::optional<RecurrentState> state;
  for (const auto& f : frames) {
    out.push_back(model.step(f, ctx, state, flow, mask_cfg, opts));
    state = out.back().state;
  }
  return out;
}

ClipRestoration run_clip(const DesmokeNet& model, const Clip& clip, const Frame& ref,
                         const FlowBackend& flow, const MaskGenConfig& mask_cfg) {
  require(ref.height() == clip.height() && ref.width() == clip.width(), ErrorCode::ShapeMismatch,
          "reference frame size differs from clip");
  nn::NoGradGuard no_grad;
  const RefContext ctx = model.prepare_ref(ref.tensor());
  ClipRestoration out;
  std::optional<RecurrentState> state;
  for (const auto& f : clip.frames()) {
    StepResult r = model.step(f.tensor(), ctx, state, flow, mask_cfg);
    out.frames.push_back(clamp_to_frame(r.output.value()));
    if (!r.masks.empty()) out.masks.push_back(std::move(r.masks.front()));
    state = std::move(r.state);
  }
  return out;
}

Discriminator::Discriminator(const DiscriminatorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  const int c = cfg_.base_channels;
  const int widths[6] = {3, c, 2 * c, 4 * c, 8 * c, 1};
  const int strides[5] = {2, 2, 2, 1, 1};
  for (int i = 0; i < 5; ++i) convs_.emplace_back(widths[i], widths[i + 1], 4, strides[i], 1, rng);
  for (int i = 1; i <= 3; ++i) norms_.emplace_back(widths[i + 1]);
}

Var Discriminator::operator()(const Var& images, std::vector<Shape>* trace) const {
  const Shape s = images.shape();
  require(s.c == 3 && s.h == cfg_.input_size && s.w == cfg_.input_size, ErrorCode::ShapeMismatch,
          "discriminator expects (N,3," + std::to_string(cfg_.input_size) + "," +
              std::to_string(cfg_.input_size) + "), got " + s.str());
  Var x = images;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = convs_[i](x);
    if (i >= 1 && i <= 3) x = norms_[i - 1](x);
    if (i + 1 < convs_.size()) x = nn::leaky_relu(x, cfg_.leaky_slope);
    if (trace) trace->push_back(x.shape());
  }
  return x;
}

nn::ParameterSet Discriminator::parameters() const {
  nn::ParameterSet ps;
  for (std::size_t i = 0; i < convs_.size(); ++i)
    ps.append("conv" + std::to_string(i), convs_[i].parameters());
  for (std::size_t i = 0; i < norms_.size(); ++i)
    ps.append("norm" + std::to_string(i + 1), norms_[i].parameters());
  return ps;
}

}  // namespace desmoke
