#pragma once

#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/params.hpp"
#include "core/plan.hpp"
#include "core/tape.hpp"
#include "json.hpp"

namespace struchis {

// struchis: per-task backbones, relation-level gates on masked layers.
// stl: one backbone + one head for a single task.
// shared_backbone: one backbone, per-task heads, no gates.
// moe_experts: shared expert backbones mixed per task at the final layer.
// ablation_no_r: gates the per-task node embeddings after cross-relation
//   aggregation at every layer (no relation-level gating).
// ablation_no_r_no_l: independent backbones, one gate over final embeddings.
enum class Variant {
  struchis,
  stl,
  shared_backbone,
  moe_experts,
  ablation_no_r,
  ablation_no_r_no_l,
};

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& s);

// Experiment setting name: a plain variant name, or "struchis:" followed by
// one 0/1 mask bit per layer ("struchis:110").
std::pair<Variant, std::vector<bool>> parse_variant_setting(
    const std::string& name, int num_layers);

// force_own bypasses every task gate structurally: each task keeps its own
// stream untouched. Diagnostic mode; invalid for variants without task gates.
enum class GateMode { learned, force_own };

// Initial gate-bias logit a task gate puts on the task's own stream. At two
// tasks this starts the mixture near 0.88/0.12 instead of uniform.
constexpr double kOwnStreamGateLogit = 2.0;

struct ModelConfig {
  Variant variant = Variant::struchis;
  int num_tasks = 1;
  int num_layers = 2;
  int hidden_dim = 32;
  int attention_heads = 1;
  int head_hidden_layers = 2;
  bool attn_leaky = false;
  GateMode gate_mode = GateMode::learned;
  std::vector<bool> layer_share_mask;     // empty = share at every layer
  int stl_task = 0;                       // stl only
  int moe_num_experts = 3;                // moe_experts only
  std::vector<double> task_loss_weights;  // empty = all 1.0
  uint64_t seed = 1;

  bool share_at(int layer) const {
    return layer_share_mask.empty() || layer_share_mask[size_t(layer)];
  }
  double task_weight(int task) const {
    return task_loss_weights.empty() ? 1.0 : task_loss_weights[size_t(task)];
  }

  static ModelConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate(const GraphSchema& schema) const;
};

// Which backbone streams exist and which one feeds each task's head.
struct StreamLayout {
  std::vector<std::string> prefixes;  // parameter path prefix per stream
  std::vector<int> served_tasks;      // tasks with a head and a loss term
  bool streams_are_tasks = false;     // true when stream i belongs to task i

  int num_streams() const { return int(prefixes.size()); }
  // Stream whose final embedding feeds the task head; -1 when the head input
  // is a mixture (moe_experts, ablation_no_r_no_l with learned gates).
  int stream_for_task(int task) const;
  int serve_index(int task) const;  // position in served_tasks, -1 if absent

  Variant variant = Variant::struchis;
  int stl_task = 0;
};

StreamLayout stream_layout(const ModelConfig& cfg);

template <class T>
ParamStore<T> build_variant(const ModelConfig& cfg, const GraphSchema& schema);

// One attention or gate weight observed during a traced forward pass.
// task: owning task for gate records, backbone stream for alpha/beta.
// node: row within the node type the weight attaches to (the destination for
// alpha, the central node for beta and gates). relation: -1 when the record
// is not tied to a single relation. layer: -1 for output-stage gates. aux:
// source stream for gate records. Multi-head attention weights are recorded
// as the mean over heads.
struct TraceRecord {
  std::string kind;  // "alpha" | "beta" | "gate"
  int task = -1;
  int layer = -1;
  int relation = -1;
  int node = -1;
  int aux = -1;
  double weight = 0.0;
};

struct AttentionTrace {
  std::vector<TraceRecord> records;
};

// One forward/backward execution of a variant on one graph. Holds the tape;
// the config, graph, plan and parameters must outlive the run.
template <class T>
class ModelRun {
 public:
  ModelRun(const ModelConfig& cfg, const HeteroGraph& g, const GraphPlan& plan,
           const ParamStore<T>& ps);

  void forward(bool want_trace = false);

  // Tape id of [rows x num_classes] logits for rows of the task's target
  // type. forward() must have been called.
  int logits(int task, const std::vector<int>& rows);

  // Tape id of the 1x1 summed objective over all targets present in the
  // graph for the served tasks. Tasks without targets contribute nothing.
  int loss();

  void backward(int id) { tape_.backward(id); }

  Tape<T>& tape() { return tape_; }
  const StreamLayout& layout() const { return layout_; }
  const AttentionTrace& trace() const { return trace_; }
  // Gradient for parameter-store entry i after backward().
  const Mat<T>& param_grad(int entry) const {
    return tape_.grad(param_ids_[size_t(entry)]);
  }
  // Full-type final embedding feeding the task's head (tape id).
  int task_embed(int task) const;

 private:
  int pid(const std::string& path) const;
  int project_type(const std::string& pfx, int ty);
  int edge_embed(const std::string& pfx, int rel);
  int head(int task, int x);
  // nodes/rels map rows to node ids and relation ids (null = identity /
  // fixed_rel). per_column emits one record per (row, column) with aux = the
  // column; otherwise one record per row with the mean over columns.
  void record_trace(const char* kind, int task, int layer, int weights_id,
                    const IndexVec& nodes, const IndexVec& rels, int fixed_rel,
                    bool per_column);

  const ModelConfig& cfg_;
  const HeteroGraph& g_;
  const GraphPlan& plan_;
  const ParamStore<T>& ps_;
  StreamLayout layout_;
  Tape<T> tape_;
  std::vector<int> param_ids_;   // tape input per parameter entry
  std::vector<int> feat_ids_;    // tape input per node type
  std::vector<int> efeat_ids_;   // tape input per relation (-1 if featureless)
  std::vector<std::vector<int>> h_;  // [stream][type] current embeddings
  std::vector<int> task_embed_;      // [served] head input, full type
  AttentionTrace trace_;
  bool want_trace_ = false;
  bool ran_ = false;
};

// Summed objective helpers shared with tests: class-index labels for
// single-label tasks, 0/1 indicator matrix for multi-label tasks.
IndexVec single_label_vector(const std::vector<Target>& targets);
template <class T>
Mat<T> multi_label_matrix(const std::vector<Target>& targets, int num_classes);

std::vector<int> target_rows(const std::vector<Target>& targets);

}  // namespace struchis
