#pragma once

#include <string>

#include "core/graph.hpp"
#include "core/model.hpp"
#include "core/synth.hpp"
#include "core/trainer.hpp"
#include "json.hpp"

namespace struchis {

// Shared command backends. Every function throws Error on failure; callers
// (CLI, C API) translate ErrorKind into exit codes / status codes.

nlohmann::json read_json_file(const std::string& path);

nlohmann::json graph_info(const HeteroGraph& g);

// Generates a synthetic benchmark graph into out_dir (graph files,
// ground_truth.json, manifest.json). Empty config json = the interference
// preset. seed_override < 0 keeps the config seed.
nlohmann::json run_synth(const nlohmann::json& config, const std::string& out_dir,
                         int64_t seed_override);

// Grid-search training. Writes manifest.json, model_config.json,
// train_config.json, grid_results.json, checkpoint.bin, train_log.jsonl and
// metrics.json (test split, best cell) into out_dir. Returns the test
// metrics. num_tasks may be omitted from the model config; it is filled from
// the graph.
nlohmann::json run_train(const std::string& graph_dir,
                         const nlohmann::json& model_json,
                         const nlohmann::json& train_json,
                         const std::string& out_dir, int64_t seed_override);

// Re-evaluates a finished run directory on one split of a graph. The split
// assignment is reconstructed from the stored train config.
nlohmann::json run_evaluate(const std::string& graph_dir,
                            const std::string& run_dir,
                            const std::string& split);

// Trace-on forward over one split; writes the attention importance CSV.
void run_importance(const std::string& graph_dir, const std::string& run_dir,
                    const std::string& split, const std::string& out_csv);

// Trains the sharing-mask progression plus the comparison variants on one
// graph and writes ablation.csv (setting,task,micro_f1,macro_f1),
// results.json and manifest.json.
nlohmann::json run_ablate(const std::string& graph_dir,
                          const nlohmann::json& model_json,
                          const nlohmann::json& train_json,
                          const std::string& out_dir, int64_t seed_override);

// Fixed-epoch wall-time measurement per variant; writes bench.csv
// (variant,epochs,seconds_per_epoch) and manifest.json.
nlohmann::json run_bench(const std::string& graph_dir,
                         const nlohmann::json& model_json,
                         const nlohmann::json& train_json,
                         const std::string& out_dir, int epochs,
                         int64_t seed_override);

}  // namespace struchis
