// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors

#include "desmoke/desmoke.h"

#include <cstring>
#include <memory>
#include <string>

#include "desmoke/checkpoint.hpp"
#include "desmoke/clip_io.hpp"
#include "desmoke/config.hpp"
#include "desmoke/error.hpp"
#include "desmoke/pipeline.hpp"
#include "desmoke/smoke_sim.hpp"

struct dsm_config {
  desmoke::FlatConfig flat;
  desmoke::AppConfig app;
};

struct dsm_clip {
  desmoke::Clip clip;
};

struct dsm_model {
  std::unique_ptr<desmoke::DesmokeNet> net;
};

namespace {

using desmoke::ErrorCode;

thread_local std::string g_last_error;

dsm_status to_status(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return DSM_ERR_INVALID_ARGUMENT;
    case ErrorCode::MissingPSFrame: return DSM_ERR_MISSING_PS_FRAME;
    case ErrorCode::CorruptClip: return DSM_ERR_CORRUPT_CLIP;
    case ErrorCode::ShapeMismatch: return DSM_ERR_SHAPE_MISMATCH;
    case ErrorCode::InvalidClip: return DSM_ERR_INVALID_CLIP;
    case ErrorCode::IOError: return DSM_ERR_IO;
    case ErrorCode::InvalidFlow: return DSM_ERR_INVALID_FLOW;
    case ErrorCode::InvalidConfig: return DSM_ERR_INVALID_CONFIG;
    case ErrorCode::InvalidInput: return DSM_ERR_INVALID_INPUT;
    case ErrorCode::NumericalError: return DSM_ERR_NUMERICAL;
    case ErrorCode::StateMismatch: return DSM_ERR_STATE_MISMATCH;
    case ErrorCode::InvalidDataset: return DSM_ERR_INVALID_DATASET;
    case ErrorCode::Undefined: return DSM_ERR_UNDEFINED;
  }
  return DSM_ERR_INTERNAL;
}

template <typename F>
dsm_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return DSM_OK;
  } catch (const desmoke::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return DSM_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DSM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return DSM_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  desmoke::require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

std::shared_ptr<const desmoke::FlowBackend> backend_for(const dsm_config* cfg) {
  return desmoke::make_flow_backend(cfg->app.flow);
}

}  // namespace

extern "C" {

const char* dsm_version(void) { return "0.3.0"; }

const char* dsm_last_error(void) { return g_last_error.c_str(); }

const char* dsm_status_name(dsm_status s) {
  switch (s) {
    case DSM_OK: return "Ok";
    case DSM_ERR_INVALID_ARGUMENT: return "InvalidArgument";
    case DSM_ERR_MISSING_PS_FRAME: return "MissingPSFrame";
    case DSM_ERR_CORRUPT_CLIP: return "CorruptClip";
    case DSM_ERR_SHAPE_MISMATCH: return "ShapeMismatch";
    case DSM_ERR_INVALID_CLIP: return "InvalidClip";
    case DSM_ERR_IO: return "IOError";
    case DSM_ERR_INVALID_FLOW: return "InvalidFlow";
    case DSM_ERR_INVALID_CONFIG: return "InvalidConfig";
    case DSM_ERR_INVALID_INPUT: return "InvalidInput";
    case DSM_ERR_NUMERICAL: return "NumericalError";
    case DSM_ERR_STATE_MISMATCH: return "StateMismatch";
    case DSM_ERR_INVALID_DATASET: return "InvalidDataset";
    case DSM_ERR_UNDEFINED: return "Undefined";
    case DSM_ERR_INTERNAL: return "Internal";
  }
  return "Unknown";
}

dsm_status dsm_config_load(const char* path, dsm_config** out) {
  return guarded([&] {
    need(out, "out");
    *out = nullptr;
    auto cfg = std::make_unique<dsm_config>();
    if (path) cfg->flat = desmoke::read_config_file(path);
    desmoke::apply_env_overrides(cfg->flat);
    cfg->app = desmoke::build_config(cfg->flat);
    *out = cfg.release();
  });
}

dsm_status dsm_config_set(dsm_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    need(cfg, "cfg");
    need(key, "key");
    need(value, "value");
    desmoke::FlatConfig flat = cfg->flat;
    flat[key] = value;
    desmoke::AppConfig app = desmoke::build_config(flat);
    cfg->flat = std::move(flat);
    cfg->app = std::move(app);
  });
}

dsm_status dsm_config_json(const dsm_config* cfg, char* buf, size_t buf_len, size_t* needed) {
  return guarded([&] {
    need(cfg, "cfg");
    const std::string text = desmoke::to_json(cfg->app).dump(2);
    if (needed) *needed = text.size() + 1;
    if (buf && buf_len > 0) {
      const std::size_t n = std::min(buf_len - 1, text.size());
      std::memcpy(buf, text.data(), n);
      buf[n] = '\0';
    }
  });
}

void dsm_config_free(dsm_config* cfg) { delete cfg; }

dsm_status dsm_clip_load(const char* dir, dsm_clip** out) {
  return guarded([&] {
    need(dir, "dir");
    need(out, "out");
    *out = new dsm_clip{desmoke::load_clip(dir)};
  });
}

dsm_status dsm_clip_save(const dsm_clip* clip, const char* dir) {
  return guarded([&] {
    need(clip, "clip");
    need(dir, "dir");
    desmoke::save_clip(clip->clip, dir);
  });
}

dsm_status dsm_clip_info(const dsm_clip* clip, size_t* frames, int* height, int* width) {
  return guarded([&] {
    need(clip, "clip");
    if (frames) *frames = clip->clip.size();
    if (height) *height = clip->clip.height();
    if (width) *width = clip->clip.width();
  });
}

dsm_status dsm_clip_frame(const dsm_clip* clip, size_t index, float* rgb, size_t len) {
  return guarded([&] {
    need(clip, "clip");
    need(rgb, "rgb");
    const auto& c = clip->clip;
    desmoke::require(index <= c.size(), ErrorCode::InvalidArgument, "frame index out of range");
    const desmoke::Tensor& t = index == c.size() ? c.ps_frame().tensor() : c.frame(index).tensor();
    desmoke::require(len >= t.size(), ErrorCode::InvalidArgument, "output buffer too small");
    for (std::size_t i = 0; i < t.size(); ++i) rgb[i] = static_cast<float>(t.data()[i]);
  });
}

void dsm_clip_free(dsm_clip* clip) { delete clip; }

dsm_status dsm_model_create(const dsm_config* cfg, uint64_t seed, dsm_model** out) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out, "out");
    *out = new dsm_model{std::make_unique<desmoke::DesmokeNet>(cfg->app.network, seed)};
  });
}

dsm_status dsm_model_load(const char* checkpoint, dsm_model** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    const auto ckpt = desmoke::load_checkpoint(checkpoint);
    *out = new dsm_model{std::make_unique<desmoke::DesmokeNet>(desmoke::load_generator(ckpt))};
  });
}

dsm_status dsm_model_parameter_count(const dsm_model* model, size_t* count) {
  return guarded([&] {
    need(model, "model");
    need(count, "count");
    *count = model->net->parameters().count();
  });
}

void dsm_model_free(dsm_model* model) { delete model; }

dsm_status dsm_synth(const dsm_config* cfg, const char* clean_root, const char* out_root) {
  return guarded([&] {
    need(cfg, "cfg");
    need(out_root, "out_root");
    const auto& s = cfg->app.synth;
    std::filesystem::path clean;
    if (clean_root) {
      clean = clean_root;
    } else {
      clean = std::filesystem::path(out_root) / "source_clean";
      desmoke::SceneParams scene;
      scene.height = s.height;
      scene.width = s.width;
      scene.frames = s.frames;
      scene.instrument = s.instrument;
      scene.seed = s.seed;
      desmoke::generate_clean_corpus(clean, s.clips, scene);
    }
    desmoke::build_dataset(clean, out_root, s.grid, s.split_ratio, s.seed);
  });
}

dsm_status dsm_train(const dsm_config* cfg, const char* manifest, const char* out_dir,
                     double* final_total) {
  return guarded([&] {
    need(cfg, "cfg");
    need(manifest, "manifest");
    cfg->app.validate();
    const auto data = desmoke::load_dataset(manifest, desmoke::Split::Train);
    desmoke::TrainOptions opts;
    if (out_dir) opts.out_dir = out_dir;
    const auto r = desmoke::train(data, cfg->app, backend_for(cfg), opts);
    if (final_total) *final_total = r.log.empty() ? 0.0 : r.log.back().total;
  });
}

dsm_status dsm_finetune_star(const dsm_config* cfg, const char* checkpoint, const char* manifest,
                             const char* out_dir, double* final_total) {
  return guarded([&] {
    need(cfg, "cfg");
    need(manifest, "manifest");
    desmoke::require(checkpoint != nullptr && *checkpoint != '\0', ErrorCode::InvalidConfig,
                     "finetune-star needs a pre-trained checkpoint");
    cfg->app.validate();
    const auto ckpt = desmoke::load_checkpoint(checkpoint);
    const auto data = desmoke::load_dataset(manifest, desmoke::Split::Train);
    desmoke::TrainOptions opts;
    if (out_dir) opts.out_dir = out_dir;
    const auto r = desmoke::finetune_star(ckpt, data, cfg->app, backend_for(cfg), opts);
    if (final_total) *final_total = r.log.empty() ? 0.0 : r.log.back().total;
  });
}

dsm_status dsm_infer_clip(const dsm_model* model, const dsm_config* cfg, const dsm_clip* clip,
                          const char* out_dir, const char* mask_dir) {
  return guarded([&] {
    need(model, "model");
    need(cfg, "cfg");
    need(clip, "clip");
    need(out_dir, "out_dir");
    const auto& c = clip->clip;
    auto r = desmoke::run_clip(*model->net, c, c.ps_frame(), *backend_for(cfg), cfg->app.mask);
    desmoke::save_clip(desmoke::Clip(std::move(r.frames), c.ps_frame(), c.id()), out_dir);
    if (mask_dir) {
      std::filesystem::create_directories(mask_dir);
      for (std::size_t i = 0; i < r.masks.size(); ++i) {
        std::string name = desmoke::frame_filename(i + 1);
        name.replace(0, 6, "mask_");
        desmoke::write_mask_png(std::filesystem::path(mask_dir) / name, r.masks[i]);
      }
    }
  });
}

dsm_status dsm_infer_stream(const dsm_model* model, const dsm_config* cfg, const dsm_clip* clip,
                            const char* out_dir, int* ref_indices) {
  return guarded([&] {
    need(model, "model");
    need(cfg, "cfg");
    need(clip, "clip");
    need(out_dir, "out_dir");
    const auto& c = clip->clip;
    auto r = desmoke::process_stream(*model->net, c.frames(), cfg->app.deploy, backend_for(cfg),
                                     cfg->app.mask);
    desmoke::save_clip(desmoke::Clip(std::move(r.frames), c.ps_frame(), c.id()), out_dir);
    if (ref_indices)
      for (std::size_t i = 0; i < r.ref_indices.size(); ++i) ref_indices[i] = r.ref_indices[i];
  });
}

dsm_status dsm_eval(const dsm_config* cfg, const dsm_model* model, const dsm_model* target_model,
                    const char* manifest, const char* split, const char* csv_path,
                    const char* json_path, double* psnr, double* ssim) {
  return guarded([&] {
    need(cfg, "cfg");
    need(manifest, "manifest");
    const auto which = desmoke::parse_split(split ? split : "test");
    const auto data = desmoke::load_dataset(manifest, which);
    desmoke::require(!data.clips.empty(), ErrorCode::InvalidDataset,
                     "split '" + std::string(desmoke::split_name(which)) + "' is empty");
    const auto flow = backend_for(cfg);
    const auto report = desmoke::evaluate_dataset(
        model ? model->net.get() : nullptr, data, cfg->app.eval.mode, *flow, cfg->app.mask,
        cfg->app.eval.tau, target_model ? target_model->net.get() : nullptr);
    if (csv_path) report.write_csv(csv_path);
    if (json_path) report.write_summary(json_path);
    if (psnr) *psnr = report.psnr;
    if (ssim) *ssim = report.ssim;
  });
}

}  // extern "C"
