#ifndef FEDGAT_CAPI_H
#define FEDGAT_CAPI_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; the CLI uses them as exit codes. */
typedef enum {
  FEDGAT_OK = 0,
  FEDGAT_ERR_RUNTIME = 1,
  FEDGAT_ERR_CONFIG = 2,
  FEDGAT_ERR_DATASET = 3
} fedgat_status;

/* Opaque handle owning the last error message. Not thread-safe; use one
   context per thread. */
typedef struct fedgat_ctx fedgat_ctx;

fedgat_ctx* fedgat_ctx_new(void);
void fedgat_ctx_free(fedgat_ctx* ctx);

/* Message of the most recent failing call on this context, or "" if the
   last call succeeded. Owned by the context. */
const char* fedgat_last_error(const fedgat_ctx* ctx);

const char* fedgat_version(void);

/* Frees strings handed out through output parameters. */
void fedgat_string_free(char* s);

/* Loads and validates the config, applies FEDGAT_SEED / FEDGAT_OUTPUT_DIR
   overrides, trains, and writes all artifacts into the output directory. */
fedgat_status fedgat_run_experiment(fedgat_ctx* ctx, const char* config_path);

/* Runs every sweep cell, continuing past failures. On return *failed_cells
   (when non-NULL) holds the number of failed cells; any failure makes the
   status FEDGAT_ERR_RUNTIME. */
fedgat_status fedgat_run_sweep(fedgat_ctx* ctx, const char* spec_path,
                               const char* config_path, size_t* failed_cells);

/* Validates without running. On success and when resolved_json is non-NULL,
   *resolved_json receives the fully resolved config (free with
   fedgat_string_free). */
fedgat_status fedgat_validate_config(fedgat_ctx* ctx, const char* config_path,
                                     char** resolved_json);

/* Converts a raw propagation-tree directory plus label file into JSONL. */
fedgat_status fedgat_import_raw(fedgat_ctx* ctx, const char* tree_dir,
                                const char* label_file, const char* out_jsonl);

#ifdef __cplusplus
}
#endif

#endif /* FEDGAT_CAPI_H */
