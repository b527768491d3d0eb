/* Copyright 2026 The TopicDiff Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the TopicDiff library. A session collects a configuration
 * (file or JSON text, then flag overrides) and runs commands against it.
 * Functions return a td_status; on failure td_last_error() describes it.
 * Strings returned through char** are owned by the caller and released with
 * td_string_free().
 */

#ifndef TOPICDIFF_TOPICDIFF_H_
#define TOPICDIFF_TOPICDIFF_H_

#include <stddef.h>
#include <stdint.h>

#if defined(TOPICDIFF_BUILDING)
#define TD_API __attribute__((visibility("default")))
#else
#define TD_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct td_session td_session;

/* Values double as process exit codes. */
typedef enum td_status {
  TD_OK = 0,
  TD_ERROR = 1,          /* unexpected internal failure */
  TD_ERROR_CONFIG = 2,   /* bad usage, config or input data */
  TD_ERROR_TRAINING = 3, /* training diverged */
  TD_ERROR_ORACLE = 4    /* a diagnostic check failed */
} td_status;

TD_API const char* td_version(void);

TD_API td_status td_session_create(td_session** out);
TD_API void td_session_destroy(td_session* session);
/* Message of the last failed call on this session; "" after success. */
TD_API const char* td_last_error(const td_session* session);
/* Text printed by the last successful command. */
TD_API const char* td_last_output(const td_session* session);

TD_API td_status td_load_config_file(td_session* session, const char* path);
TD_API td_status td_load_config_json(td_session* session, const char* json_text);

TD_API td_status td_set_seed(td_session* session, uint64_t seed);
TD_API td_status td_set_no_tdb(td_session* session);
/* Subset of "avl", e.g. "av". */
TD_API td_status td_set_modalities(td_session* session, const char* subset);
TD_API td_status td_set_jobs(td_session* session, size_t jobs);
TD_API td_status td_set_out_dir(td_session* session, const char* dir);
/* "error", "info" or "debug"; process-wide. */
TD_API td_status td_set_log_level(td_session* session, const char* level);

/* Fully resolved configuration as JSON. */
TD_API td_status td_resolved_config(td_session* session, char** json_out);

TD_API td_status td_gen_data(td_session* session);
TD_API td_status td_train(td_session* session);
TD_API td_status td_ablate(td_session* session);
/* name: "grad-check", "sde-demo" or "dsm-oracle". */
TD_API td_status td_diag(td_session* session, const char* name);

TD_API void td_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* TOPICDIFF_TOPICDIFF_H_ */
