/* SPDX-License-Identifier: Apache-2.0 */
/* Copyright 2026 The desmoke Authors */

/* Entry points an external optical-flow plugin exports for the `external`
 * flow backend. Images are planar float64, channel-major, values in [0,1].
 * The plugin returns the backward flow from `src` to `dst`: sampling `dst`
 * at (x + u, y + v) approximates `src` at (x, y). All functions return 0 on
 * success. */

#ifndef DESMOKE_FLOW_PLUGIN_H
#define DESMOKE_FLOW_PLUGIN_H

#ifdef __cplusplus
extern "C" {
#endif

typedef int (*desmoke_flow_open_fn)(const char* checkpoint_path, void** state);
typedef int (*desmoke_flow_estimate_fn)(void* state, const double* src, const double* dst,
                                        int channels, int height, int width, double* u,
                                        double* v);
typedef void (*desmoke_flow_close_fn)(void* state);

#define DESMOKE_FLOW_OPEN_SYMBOL "desmoke_flow_open"
#define DESMOKE_FLOW_ESTIMATE_SYMBOL "desmoke_flow_estimate"
#define DESMOKE_FLOW_CLOSE_SYMBOL "desmoke_flow_close"

#ifdef __cplusplus
}
#endif

#endif /* DESMOKE_FLOW_PLUGIN_H */
