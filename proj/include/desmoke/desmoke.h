/* SPDX-License-Identifier: Apache-2.0
 * Copyright 2026 The desmoke Authors
 *
 * C interface of libdesmoke. Every function returns a dsm_status; on
 * failure dsm_last_error() describes the problem for the calling thread.
 * Handles are opaque and owned by the caller, who releases them with the
 * matching *_free function (NULL is accepted there).
 */
#ifndef DESMOKE_DESMOKE_H
#define DESMOKE_DESMOKE_H

#include <stddef.h>
#include <stdint.h>

#if defined(DESMOKE_BUILDING_LIBRARY)
#define DSM_API __attribute__((visibility("default")))
#else
#define DSM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dsm_status {
  DSM_OK = 0,
  DSM_ERR_INVALID_ARGUMENT = 1,
  DSM_ERR_MISSING_PS_FRAME = 2,
  DSM_ERR_CORRUPT_CLIP = 3,
  DSM_ERR_SHAPE_MISMATCH = 4,
  DSM_ERR_INVALID_CLIP = 5,
  DSM_ERR_IO = 6,
  DSM_ERR_INVALID_FLOW = 7,
  DSM_ERR_INVALID_CONFIG = 8,
  DSM_ERR_INVALID_INPUT = 9,
  DSM_ERR_NUMERICAL = 10,
  DSM_ERR_STATE_MISMATCH = 11,
  DSM_ERR_INVALID_DATASET = 12,
  DSM_ERR_UNDEFINED = 13,
  DSM_ERR_INTERNAL = 99
} dsm_status;

typedef struct dsm_config dsm_config;
typedef struct dsm_clip dsm_clip;
typedef struct dsm_model dsm_model;

/* Library version, e.g. "0.3.0". */
DSM_API const char* dsm_version(void);
/* Message of the last failure on this thread ("" when none). */
DSM_API const char* dsm_last_error(void);
/* Stable identifier such as "InvalidConfig". */
DSM_API const char* dsm_status_name(dsm_status status);

/* ---- configuration ---------------------------------------------------- */

/* Defaults, overlaid by the YAML file at `path` (may be NULL) and then by
 * DESMOKE_<SECTION>_<KEY> environment variables. */
DSM_API dsm_status dsm_config_load(const char* path, dsm_config** out);
/* Sets "section.key" from text; the full config is re-parsed. */
DSM_API dsm_status dsm_config_set(dsm_config* cfg, const char* key, const char* value);
/* Copies the resolved config as JSON into `buf` (NUL-terminated) and
 * stores the required size including the terminator in `needed`. */
DSM_API dsm_status dsm_config_json(const dsm_config* cfg, char* buf, size_t buf_len,
                                   size_t* needed);
DSM_API void dsm_config_free(dsm_config* cfg);

/* ---- clips ------------------------------------------------------------ */

DSM_API dsm_status dsm_clip_load(const char* dir, dsm_clip** out);
DSM_API dsm_status dsm_clip_save(const dsm_clip* clip, const char* dir);
DSM_API dsm_status dsm_clip_info(const dsm_clip* clip, size_t* frames, int* height, int* width);
/* Planar RGB float copy (3*H*W values) of frame `index`; index == frames
 * selects the PS frame. */
DSM_API dsm_status dsm_clip_frame(const dsm_clip* clip, size_t index, float* rgb, size_t len);
DSM_API void dsm_clip_free(dsm_clip* clip);

/* ---- models ----------------------------------------------------------- */

/* Fresh generator from the config's network section. */
DSM_API dsm_status dsm_model_create(const dsm_config* cfg, uint64_t seed, dsm_model** out);
DSM_API dsm_status dsm_model_load(const char* checkpoint, dsm_model** out);
DSM_API dsm_status dsm_model_parameter_count(const dsm_model* model, size_t* count);
DSM_API void dsm_model_free(dsm_model* model);

/* ---- workflows -------------------------------------------------------- */

/* Smokes the clean clips under `clean_root` into `out_root` and writes
 * out_root/manifest.tsv. With clean_root NULL a procedural clean corpus
 * sized by the synth section is generated under out_root/source_clean. */
DSM_API dsm_status dsm_synth(const dsm_config* cfg, const char* clean_root, const char* out_root);

/* Trains on the manifest's train split; writes checkpoints and
 * train_log.csv to out_dir. `final_total` (may be NULL) receives the last
 * iteration's total loss. */
DSM_API dsm_status dsm_train(const dsm_config* cfg, const char* manifest, const char* out_dir,
                             double* final_total);

DSM_API dsm_status dsm_finetune_star(const dsm_config* cfg, const char* checkpoint,
                                     const char* manifest, const char* out_dir,
                                     double* final_total);

/* Restores a clip with its own PS frame as reference. `mask_dir` (may be
 * NULL) receives mask_####.png per frame. */
DSM_API dsm_status dsm_infer_clip(const dsm_model* model, const dsm_config* cfg,
                                  const dsm_clip* clip, const char* out_dir, const char* mask_dir);

/* Treats the clip's frames as a live stream with reference detection.
 * `ref_indices` (may be NULL, else one slot per frame) receives the 0-based
 * reference index used for each frame. */
DSM_API dsm_status dsm_infer_stream(const dsm_model* model, const dsm_config* cfg,
                                    const dsm_clip* clip, const char* out_dir, int* ref_indices);

/* Scores the `split` ("train" or "test") of a manifest. `model` NULL scores
 * the unprocessed input. `target_model` supplies enhanced-ps targets and
 * defaults to `model`. csv_path / json_path / psnr / ssim may be NULL. */
DSM_API dsm_status dsm_eval(const dsm_config* cfg, const dsm_model* model,
                            const dsm_model* target_model, const char* manifest,
                            const char* split, const char* csv_path, const char* json_path,
                            double* psnr, double* ssim);

#ifdef __cplusplus
}
#endif

#endif /* DESMOKE_DESMOKE_H */
