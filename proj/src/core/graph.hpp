#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "core/mat.hpp"

namespace struchis {

enum class TaskKind { single_label, multi_label };

const char* task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& s);

struct NodeTypeSpec {
  std::string name;
  int feature_dim = 0;
};

// Directed edge type. An undirected relation is modeled as two mirrored
// relations. edge_feature_dim == 0 means the relation carries no edge
// features.
struct RelationSpec {
  std::string name;
  int src_type = -1;
  int dst_type = -1;
  int edge_feature_dim = 0;
};

struct TaskSpec {
  std::string name;
  int target_type = -1;
  TaskKind kind = TaskKind::single_label;
  int num_classes = 2;
};

struct GraphSchema {
  std::vector<NodeTypeSpec> node_types;
  std::vector<RelationSpec> relations;
  std::vector<TaskSpec> tasks;

  int type_id(const std::string& name) const;
  int relation_id(const std::string& name) const;
  int task_id(const std::string& name) const;
};

// Instance data for one relation. src/dst are parallel arrays of node indices
// within the endpoint types; kept sorted by (dst, src) so that edges sharing a
// destination are contiguous.
struct RelationData {
  std::vector<int> src;
  std::vector<int> dst;
  MatD edge_features;  // [num_edges x edge_feature_dim], empty if featureless

  int num_edges() const { return int(dst.size()); }
};

// One labeled target. For single_label tasks y holds exactly one class id;
// for multi_label tasks y holds a strictly increasing set of class ids.
struct Target {
  int node_type = -1;
  int node = -1;
  std::vector<int> y;
};

struct HeteroGraph {
  GraphSchema schema;
  std::vector<MatD> node_features;           // per node type
  std::vector<RelationData> relations;       // per relation
  std::vector<std::vector<Target>> targets;  // per task

  int num_nodes(int type) const { return node_features[size_t(type)].rows; }
  int total_nodes() const;
  int total_edges() const;

  // Restores the canonical order: edges by (dst, src), targets by node.
  void canonicalize();
};

struct Finding {
  std::string code;
  std::string message;
  std::string where;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const { return findings.empty(); }
};

// In-memory invariant checks: endpoint ranges, canonical edge order,
// duplicate edges, finite features, label ranges and target types.
ValidationReport validate(const HeteroGraph& g);

// Directory layout: schema.json, nodes_<type>.jsonl, edges_<relation>.jsonl,
// labels_<task>.jsonl. Structural problems raise schema errors naming the
// offending file and line; findings-level issues are left to validate().
HeteroGraph load_graph(const std::string& dir);
void write_graph(const HeteroGraph& g, const std::string& dir);

enum class Split { train = 0, val = 1, test = 2 };

const char* split_name(Split s);

struct SplitAssignment {
  // Per task, per bucket: indices into graph.targets[task].
  std::vector<std::array<std::vector<int>, 3>> buckets;

  const std::vector<int>& rows(int task, Split s) const {
    return buckets[size_t(task)][size_t(s)];
  }
};

// Seeded random split per task. Bucket sizes: val and test get
// max(1, floor(n * ratio)), train takes the remainder. Requires at least 3
// labeled targets per task.
SplitAssignment split_targets(const HeteroGraph& g,
                              std::array<double, 3> ratios, uint64_t seed);

// Per-hop neighbor budgets, indexed by the node type being drawn.
struct HopBudgets {
  std::vector<std::vector<int>> per_type;  // [node_type][hop]

  static HopBudgets uniform(int num_types, int num_hops, int budget);
  int num_hops() const;
  int at(int type, int hop) const {
    return per_type[size_t(type)][size_t(hop)];
  }
  HopBudgets scaled(int factor) const;
};

// Epoch subgraph sampler. Draws round(batch_targets * pos_ratio) positive and
// the remaining negative targets for `task_id` from the given split bucket
// (without replacement; with replacement once a class is exhausted), then
// expands the neighborhood hop by hop. Within each hop every included node's
// in-neighbors per relation are drawn as a prefix of a per-(node, relation)
// seeded permutation, so raising budgets only ever grows the sample. The
// result is the induced subgraph on the sampled nodes; targets of other tasks
// that fall inside it (same split bucket) are retained.
HeteroGraph sample_subgraph(const HeteroGraph& g, const SplitAssignment& sp,
                            int task_id, Split split, int batch_targets,
                            double pos_ratio, const HopBudgets& budgets,
                            uint64_t seed);

// Inference subgraph holding the full target sets of every task for `split`,
// expanded with the given budgets (callers typically pass training budgets
// scaled x4).
HeteroGraph build_eval_graph(const HeteroGraph& g, const SplitAssignment& sp,
                             Split split, const HopBudgets& budgets,
                             uint64_t seed);

}  // namespace struchis
