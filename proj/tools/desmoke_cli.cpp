// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The desmoke Authors
//
// Command-line front end over the C API. Failures print one JSON line
// {"error": ..., "status": ..., "message": ...} on stderr and exit with the
// numeric status.

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "desmoke/desmoke.h"

namespace {

struct Failure {
  dsm_status status;
  std::string message;
};

void check(dsm_status s) {
  if (s != DSM_OK) throw Failure{s, dsm_last_error()};
}

template <typename T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  ~Handle() { Free(p); }
};

using ConfigHandle = Handle<dsm_config, dsm_config_free>;
using ModelHandle = Handle<dsm_model, dsm_model_free>;
using ClipHandle = Handle<dsm_clip, dsm_clip_free>;

void load_config(ConfigHandle& cfg, const std::string& path, const std::vector<std::string>& sets) {
  check(dsm_config_load(path.empty() ? nullptr : path.c_str(), &cfg.p));
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw Failure{DSM_ERR_INVALID_ARGUMENT, "--set expects key=value, got '" + kv + "'"};
    check(dsm_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
  }
}

void emit(const nlohmann::json& j) { std::cout << j.dump() << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised surgical video desmoking"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dsm_version());

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("-c,--config", config_path, "YAML config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", sets, "Override a config key, e.g. train.iters=2000");

  auto* synth = app.add_subcommand("synth", "Build a synthetic smoky dataset");
  std::string synth_out, synth_clean;
  synth->add_option("-o,--out", synth_out, "Output root")->required();
  synth->add_option("--clean", synth_clean, "Existing clean clips (default: procedural scenes)");

  auto* train = app.add_subcommand("train", "Train from scratch");
  std::string train_manifest, train_out;
  train->add_option("-m,--manifest", train_manifest, "Dataset manifest")->required();
  train->add_option("-o,--out", train_out, "Checkpoint and log directory")->required();

  auto* ft = app.add_subcommand("finetune-star", "Fine-tune on enhanced PS frames");
  std::string ft_ckpt, ft_manifest, ft_out;
  ft->add_option("--checkpoint", ft_ckpt, "Pre-trained checkpoint")->required();
  ft->add_option("-m,--manifest", ft_manifest, "Dataset manifest")->required();
  ft->add_option("-o,--out", ft_out, "Checkpoint and log directory")->required();

  auto* infer = app.add_subcommand("infer", "Desmoke a clip");
  std::string inf_ckpt, inf_clip, inf_out, inf_masks, inf_mode = "clip";
  infer->add_option("--checkpoint", inf_ckpt, "Model checkpoint")->required();
  infer->add_option("--clip", inf_clip, "Clip directory")->required();
  infer->add_option("-o,--out", inf_out, "Output clip directory")->required();
  infer->add_option("--mode", inf_mode, "clip or stream")->check(CLI::IsMember({"clip", "stream"}));
  infer->add_option("--masks", inf_masks, "Write per-frame patch masks here (clip mode)");

  auto* eval = app.add_subcommand("eval", "Aligned PSNR/SSIM report");
  std::string ev_manifest, ev_ckpt, ev_target_ckpt, ev_split = "test", ev_csv, ev_json, ev_mode;
  eval->add_option("-m,--manifest", ev_manifest, "Dataset manifest")->required();
  eval->add_option("--checkpoint", ev_ckpt, "Model (default: unprocessed input)");
  eval->add_option("--target-checkpoint", ev_target_ckpt, "Enhancer for enhanced-ps targets");
  eval->add_option("--target-mode", ev_mode, "original-ps, enhanced-ps or synthetic-gt");
  eval->add_option("--split", ev_split, "train or test")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("--csv", ev_csv, "Per-frame CSV path");
  eval->add_option("--json", ev_json, "Summary JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ConfigHandle cfg;
    load_config(cfg, config_path, sets);

    if (*synth) {
      check(dsm_synth(cfg.p, synth_clean.empty() ? nullptr : synth_clean.c_str(),
                      synth_out.c_str()));
      emit({{"command", "synth"}, {"manifest", synth_out + "/manifest.tsv"}});
    } else if (*train) {
      double total = 0.0;
      check(dsm_train(cfg.p, train_manifest.c_str(), train_out.c_str(), &total));
      emit({{"command", "train"}, {"final_total", total}, {"out", train_out}});
    } else if (*ft) {
      double total = 0.0;
      check(dsm_finetune_star(cfg.p, ft_ckpt.c_str(), ft_manifest.c_str(), ft_out.c_str(), &total));
      emit({{"command", "finetune-star"}, {"final_total", total}, {"out", ft_out}});
    } else if (*infer) {
      ModelHandle model;
      ClipHandle clip;
      check(dsm_model_load(inf_ckpt.c_str(), &model.p));
      check(dsm_clip_load(inf_clip.c_str(), &clip.p));
      nlohmann::json out{{"command", "infer"}, {"mode", inf_mode}, {"out", inf_out}};
      if (inf_mode == "stream") {
        std::size_t frames = 0;
        check(dsm_clip_info(clip.p, &frames, nullptr, nullptr));
        std::vector<int> refs(frames);
        check(dsm_infer_stream(model.p, cfg.p, clip.p, inf_out.c_str(), refs.data()));
        out["ref_indices"] = refs;
      } else {
        check(dsm_infer_clip(model.p, cfg.p, clip.p, inf_out.c_str(),
                             inf_masks.empty() ? nullptr : inf_masks.c_str()));
      }
      emit(out);
    } else if (*eval) {
      if (!ev_mode.empty()) check(dsm_config_set(cfg.p, "eval.target_mode", ev_mode.c_str()));
      ModelHandle model, target;
      if (!ev_ckpt.empty()) check(dsm_model_load(ev_ckpt.c_str(), &model.p));
      if (!ev_target_ckpt.empty()) check(dsm_model_load(ev_target_ckpt.c_str(), &target.p));
      double psnr = 0.0, ssim = 0.0;
      check(dsm_eval(cfg.p, model.p, target.p, ev_manifest.c_str(), ev_split.c_str(),
                     ev_csv.empty() ? nullptr : ev_csv.c_str(),
                     ev_json.empty() ? nullptr : ev_json.c_str(), &psnr, &ssim));
      emit({{"command", "eval"}, {"psnr", psnr}, {"ssim", ssim}});
    }
  } catch (const Failure& f) {
    std::cerr << nlohmann::json{{"error", dsm_status_name(f.status)},
                                {"status", static_cast<int>(f.status)},
                                {"message", f.message}}
                     .dump()
              << std::endl;
    return static_cast<int>(f.status);
  }
  return 0;
}
