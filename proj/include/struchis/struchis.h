#ifndef STRUCHIS_H
#define STRUCHIS_H

/* C interface to the heterogeneous multi-task GNN engine.
 *
 * Conventions:
 *   - Every fallible call returns a shis_status; SHIS_OK is 0.
 *   - On failure, shis_last_error() holds a message for the current thread
 *     until the next call on that thread.
 *   - Strings returned through char** out parameters are heap-allocated
 *     JSON or CSV documents; release them with shis_string_free().
 *   - Config arguments are file paths. Passing NULL where a config is
 *     optional selects the built-in default.
 *   - seed < 0 keeps the seed stored in the config file.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum shis_status {
  SHIS_OK = 0,
  SHIS_ERR_IO = 1,       /* missing or unreadable/unwritable file */
  SHIS_ERR_SCHEMA = 2,   /* malformed input data */
  SHIS_ERR_CONFIG = 3,   /* invalid configuration value */
  SHIS_ERR_CONTRACT = 4, /* caller broke an API precondition */
  SHIS_ERR_RUNTIME = 5   /* numerical or internal failure */
} shis_status;

/* Build version string (git describe). Static storage, do not free. */
const char* shis_version(void);

/* Message of the most recent failing call on this thread ("" if none).
 * Static storage, do not free. */
const char* shis_last_error(void);

void shis_string_free(char* s);

/* In-memory graph handle. */
typedef struct shis_graph shis_graph;

shis_status shis_graph_load(const char* dir, shis_graph** out);
void shis_graph_free(shis_graph* g);

/* Node type / relation / task inventory as a JSON object. */
shis_status shis_graph_info(const shis_graph* g, char** out_json);

/* Integrity findings as a JSON array (empty array = clean graph).
 * out_count, if non-NULL, receives the number of findings. */
shis_status shis_graph_validate(const shis_graph* g, char** out_json,
                                int* out_count);

/* Generates a synthetic benchmark graph into out_dir. config_path NULL
 * selects the two-task interference preset. out_json (optional) receives
 * the generated graph's inventory. */
shis_status shis_synth(const char* config_path, const char* out_dir,
                       int64_t seed, char** out_json);

/* Grid-search training; writes checkpoint and reports into out_dir.
 * train_config_path NULL uses default training settings. out_json
 * (optional) receives the test-split metrics. */
shis_status shis_train(const char* graph_dir, const char* model_config_path,
                       const char* train_config_path, const char* out_dir,
                       int64_t seed, char** out_json);

/* Re-evaluates a finished run directory on one split (train|val|test). */
shis_status shis_evaluate(const char* graph_dir, const char* run_dir,
                          const char* split, char** out_json);

/* Writes the attention importance CSV for one split of a finished run. */
shis_status shis_importance(const char* graph_dir, const char* run_dir,
                            const char* split, const char* out_csv);

/* Sharing-mask progression plus comparison variants; writes ablation.csv
 * and results.json into out_dir. */
shis_status shis_ablate(const char* graph_dir, const char* model_config_path,
                        const char* train_config_path, const char* out_dir,
                        int64_t seed, char** out_json);

/* Fixed-epoch timing of every variant; writes bench.csv into out_dir. */
shis_status shis_bench(const char* graph_dir, const char* model_config_path,
                       const char* train_config_path, const char* out_dir,
                       int epochs, int64_t seed, char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* STRUCHIS_H */
