#pragma once

#include <array>
#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "json.hpp"

namespace struchis {

// Neighbor budgets as written in config files. Accepts a single integer
// (every type, every hop), a list (per hop, every type), or an object keyed
// by type name whose values are integers or per-hop lists.
struct BudgetSpec {
  nlohmann::json raw = 10;

  HopBudgets resolve(const GraphSchema& schema, int num_hops) const;
};

struct TrainConfig {
  int max_epochs = 200;
  int patience = 40;
  std::vector<double> lr_grid = {1e-2, 1e-3, 1e-4};
  std::vector<double> wd_grid = {0.0, 1e-4, 1e-3};
  int batch_targets = 128;  // 0 = train on the whole graph every epoch
  double pos_ratio = 0.5;
  BudgetSpec hop_budgets;
  std::string eval_metric = "macro_f1";
  int selection_task = -1;  // -1 = mean over served tasks
  std::array<double, 3> split_ratios = {0.6, 0.2, 0.2};
  uint64_t seed = 1;

  static TrainConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

// Strict-improvement stopper over "higher is better" scores. Epochs are
// 1-based; keeps the earliest best on ties; says stop once
// epoch - best_epoch >= patience.
struct EarlyStopper {
  int patience = 1;
  double best = -std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int epoch = 0;

  explicit EarlyStopper(int patience_) : patience(patience_) {}

  bool update(double score) {
    ++epoch;
    if (score > best) {
      best = score;
      best_epoch = epoch;
    }
    return epoch - best_epoch >= patience;
  }
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  MetricsReport val;
  double lr = 0;
  double wd = 0;
  double seconds = 0;

  nlohmann::json to_json(const GraphSchema& schema) const;
};

struct TrainResult {
  CheckpointData best_params;  // snapshot from the best epoch
  int best_epoch = 0;
  double best_score = 0;
  double lr = 0;
  double wd = 0;
  std::vector<EpochLog> log;
  double seconds_per_epoch = 0;  // mean wall time of the optimization step
};

// Graph copy whose targets are filtered to one split.
HeteroGraph restrict_targets(const HeteroGraph& g, const SplitAssignment& sp,
                             Split split);

TrainResult train_single(const HeteroGraph& g, const SplitAssignment& sp,
                         const ModelConfig& mc, const TrainConfig& tc,
                         double lr, double wd);

struct GridCell {
  double lr = 0;
  double wd = 0;
  double score = 0;
  int best_epoch = 0;
};

struct GridResult {
  TrainResult best;
  std::vector<GridCell> cells;

  nlohmann::json cells_to_json() const;
};

// One full training per (lr, wd) cell; the winner maximizes the selection
// score, ties broken by smaller lr, then smaller wd.
GridResult grid_search(const HeteroGraph& g, const SplitAssignment& sp,
                       const ModelConfig& mc, const TrainConfig& tc);

struct EvalOutput {
  MetricsReport report;
  AttentionTrace trace;
};

// Inference over one split's full target set. Neighborhoods are capped by
// hop_budgets scaled x4; batch_targets = 0 skips sampling entirely and
// evaluates on the whole graph.
EvalOutput evaluate_split(const HeteroGraph& g, const SplitAssignment& sp,
                          Split split, const ModelConfig& mc,
                          const TrainConfig& tc, const ParamStoreF& ps,
                          bool want_trace);

}  // namespace struchis
