#pragma once

#include <limits>
#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/mat.hpp"
#include "core/model.hpp"
#include "json.hpp"

namespace struchis {

// Predicted label sets. single_label: argmax, ties to the lowest class index,
// one label per row. multi_label: sigmoid(z) >= 0.5 per class, i.e. z >= 0.
std::vector<std::vector<int>> decode(const MatD& logits, const TaskSpec& spec);

struct F1Pair {
  double micro = 0;
  double macro = 0;
};

// micro: F1 from TP/FP/FN pooled over classes. macro: unweighted mean of
// per-class F1, where a class with an all-zero tally scores 0.
F1Pair f1_scores(const std::vector<std::vector<int>>& pred,
                 const std::vector<std::vector<int>>& truth,
                 const TaskSpec& spec);

// Mann-Whitney rank statistic: P(score_pos > score_neg) with ties counting
// one half. Both classes must be present.
double auc_score(const std::vector<double>& scores,
                 const std::vector<int>& labels);

// Area under the precision-recall step curve over descending-score
// thresholds, tied scores grouped at one threshold. Needs >= 1 positive.
double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels);

struct TaskMetrics {
  int n = 0;
  int positives = -1;  // binary tasks only, -1 otherwise
  double micro_f1 = 0;
  double macro_f1 = 0;
  // Binary single-label tasks only, scored by z1 - z0; NaN when undefined
  // (non-binary task, or a single-class target set).
  double auc = std::numeric_limits<double>::quiet_NaN();
  double ap = std::numeric_limits<double>::quiet_NaN();

  nlohmann::json to_json() const;
};

TaskMetrics evaluate_task(const MatD& logits,
                          const std::vector<Target>& targets,
                          const TaskSpec& spec);

struct MetricsReport {
  std::vector<std::pair<int, TaskMetrics>> tasks;  // (task id, metrics)

  const TaskMetrics& for_task(int task) const;
  // Named metric for model selection; task -1 averages over all entries.
  // Undefined values (NaN auc on a non-binary task) are an error here.
  double value(int task, const std::string& metric) const;
  nlohmann::json to_json(const GraphSchema& schema) const;
};

// CSV of attention weights, one row per alpha/beta trace record:
// task,layer,relation,kind,weight. Layer-l alpha rows measure l-hop
// structural patterns around the destination node; gate records are not
// exported (they live in the trace for diagnosis).
void export_importance(const AttentionTrace& trace, const GraphSchema& schema,
                       const std::string& path);

}  // namespace struchis
