/* SPDX-License-Identifier: Apache-2.0
 * Copyright 2026 The desmoke Authors
 *
 * Exercises the shared library strictly through its C header.
 */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "desmoke/desmoke.h"

static int failures = 0;

#define EXPECT(cond)                                                     \
  do {                                                                   \
    if (!(cond)) {                                                       \
      fprintf(stderr, "%s:%d: expectation failed: %s (last error: %s)\n", \
              __FILE__, __LINE__, #cond, dsm_last_error());             \
      ++failures;                                                        \
    }                                                                    \
  } while (0)

#define EXPECT_OK(call) EXPECT((call) == DSM_OK)

int main(int argc, char** argv) {
  if (argc < 2) {
    fprintf(stderr, "usage: %s <scratch-dir>\n", argv[0]);
    return 2;
  }
  char root[1024], path[1200], path2[1200];
  snprintf(root, sizeof root, "%s", argv[1]);

  EXPECT(strlen(dsm_version()) > 0);
  EXPECT(strcmp(dsm_status_name(DSM_ERR_INVALID_CONFIG), "InvalidConfig") == 0);
  EXPECT(strcmp(dsm_status_name(DSM_ERR_MISSING_PS_FRAME), "MissingPSFrame") == 0);

  dsm_config* cfg = NULL;
  EXPECT_OK(dsm_config_load(NULL, &cfg));
  EXPECT(dsm_config_set(cfg, "train.no_such_key", "1") == DSM_ERR_INVALID_CONFIG);
  EXPECT(strlen(dsm_last_error()) > 0);
  EXPECT(dsm_config_set(cfg, "mask.epsilon", "2") == DSM_ERR_INVALID_CONFIG);
  const char* sets[][2] = {{"network.variant", "tiny"}, {"network.channels", "8"},
                           {"synth.clips", "3"},        {"synth.frames", "4"},
                           {"synth.height", "32"},      {"synth.width", "32"},
                           {"synth.split_ratio", "0.67"}, {"flow.search_radius", "3"},
                           {"discriminator.base_channels", "4"},
                           {"discriminator.input_size", "32"}, {"train.crop", "32"},
                           {"train.batch_size", "1"}, {"train.iters", "2"},
                           {"train.finetune_iters", "1"}, {"train.clip_sample_len", "2"},
                           {"eval.target_mode", "synthetic-gt"}};
  for (size_t i = 0; i < sizeof sets / sizeof sets[0]; ++i)
    EXPECT_OK(dsm_config_set(cfg, sets[i][0], sets[i][1]));

  size_t needed = 0;
  EXPECT_OK(dsm_config_json(cfg, NULL, 0, &needed));
  EXPECT(needed > 10);
  char* json = (char*)malloc(needed);
  EXPECT_OK(dsm_config_json(cfg, json, needed, &needed));
  EXPECT(strstr(json, "\"tiny\"") != NULL);
  free(json);

  dsm_model* model = NULL;
  size_t params = 0;
  EXPECT_OK(dsm_model_create(cfg, 1, &model));
  EXPECT_OK(dsm_model_parameter_count(model, &params));
  EXPECT(params > 1000);

  EXPECT_OK(dsm_synth(cfg, NULL, root));
  snprintf(path, sizeof path, "%s/manifest.tsv", root);

  /* the first clip of the sorted corpus */
  snprintf(path2, sizeof path2, "%s/clip_000/smoky", root);
  dsm_clip* clip = NULL;
  EXPECT_OK(dsm_clip_load(path2, &clip));
  size_t frames = 0;
  int h = 0, w = 0;
  EXPECT_OK(dsm_clip_info(clip, &frames, &h, &w));
  EXPECT(frames == 3 && h == 32 && w == 32);
  float* rgb = (float*)malloc(sizeof(float) * 3 * 32 * 32);
  EXPECT_OK(dsm_clip_frame(clip, frames, rgb, 3 * 32 * 32));
  EXPECT(dsm_clip_frame(clip, frames + 1, rgb, 3 * 32 * 32) == DSM_ERR_INVALID_ARGUMENT);
  EXPECT(dsm_clip_frame(clip, 0, rgb, 5) == DSM_ERR_INVALID_ARGUMENT);

  snprintf(path2, sizeof path2, "%s/out_clip", root);
  char masks[1200];
  snprintf(masks, sizeof masks, "%s/masks", root);
  EXPECT_OK(dsm_infer_clip(model, cfg, clip, path2, masks));
  dsm_clip* restored = NULL;
  EXPECT_OK(dsm_clip_load(path2, &restored));
  float* rgb2 = (float*)malloc(sizeof(float) * 3 * 32 * 32);
  EXPECT_OK(dsm_clip_frame(clip, 1, rgb, 3 * 32 * 32));
  EXPECT_OK(dsm_clip_frame(restored, 1, rgb2, 3 * 32 * 32));
  EXPECT(memcmp(rgb, rgb2, sizeof(float) * 3 * 32 * 32) == 0); /* identity at init */

  int refs[3] = {-1, -1, -1};
  snprintf(path2, sizeof path2, "%s/out_stream", root);
  EXPECT_OK(dsm_infer_stream(model, cfg, clip, path2, refs));
  EXPECT(refs[0] == 0 && refs[1] == 0 && refs[2] == 0);

  double psnr_id = 0.0, psnr_model = 0.0, ssim = 0.0;
  snprintf(path2, sizeof path2, "%s/eval.csv", root);
  EXPECT_OK(dsm_eval(cfg, NULL, NULL, path, "test", path2, NULL, &psnr_id, &ssim));
  EXPECT_OK(dsm_eval(cfg, model, NULL, path, "test", NULL, NULL, &psnr_model, NULL));
  EXPECT(psnr_id > 0.0 && psnr_id == psnr_model);
  EXPECT(ssim > 0.0 && ssim <= 1.0);
  EXPECT(dsm_eval(cfg, NULL, NULL, path, "val", NULL, NULL, NULL, NULL) != DSM_OK);

  double total = 0.0;
  snprintf(path2, sizeof path2, "%s/run", root);
  EXPECT_OK(dsm_train(cfg, path, path2, &total));
  EXPECT(total > 0.0);
  char ckpt[1300];
  snprintf(ckpt, sizeof ckpt, "%s/run/final.dsmk", root);
  dsm_model* trained = NULL;
  EXPECT_OK(dsm_model_load(ckpt, &trained));
  snprintf(path2, sizeof path2, "%s/run_star", root);
  EXPECT_OK(dsm_finetune_star(cfg, ckpt, path, path2, &total));
  EXPECT(dsm_finetune_star(cfg, NULL, path, path2, &total) == DSM_ERR_INVALID_CONFIG);

  dsm_clip* missing = NULL;
  snprintf(path2, sizeof path2, "%s/nowhere", root);
  EXPECT(dsm_clip_load(path2, &missing) == DSM_ERR_IO);
  EXPECT(missing == NULL);
  snprintf(path2, sizeof path2, "%s/source_clean/clip_000", root);
  EXPECT_OK(dsm_clip_load(path2, &missing));
  dsm_clip_free(missing);
  dsm_model* bogus = NULL;
  EXPECT(dsm_model_load(path, &bogus) != DSM_OK); /* a manifest is not a checkpoint */
  EXPECT(bogus == NULL);
  EXPECT(dsm_model_load(NULL, &bogus) == DSM_ERR_INVALID_ARGUMENT);

  free(rgb);
  free(rgb2);
  dsm_clip_free(clip);
  dsm_clip_free(restored);
  dsm_model_free(model);
  dsm_model_free(trained);
  dsm_config_free(cfg);
  dsm_config_free(NULL);

  if (failures) {
    fprintf(stderr, "%d C API expectation(s) failed\n", failures);
    return 1;
  }
  printf("C API checks passed\n");
  return 0;
}
