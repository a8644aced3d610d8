#pragma once

#include <string>
#include <vector>

#include "core/graph.hpp"
#include "core/metrics.hpp"
#include "core/trainer.hpp"
#include "json.hpp"

namespace struchis {

// One planted task: its label is the sign of a weighted sum of per-relation
// group-mean features projected on that relation's hidden direction,
// thresholded so that about positive_rate of targets are positive, plus
// optional Gaussian noise. The group is the half of each target's neighbors
// whose marker feature matches the task's marker, so two tasks with opposite
// markers need opposite neighbor selections on the same relations: one
// shared attention function cannot serve both. label_fraction < 1 drops
// labels uniformly to make the task data-poor.
struct SynthTaskPlan {
  std::string name;
  std::vector<std::pair<std::string, double>> signals;  // (relation, weight)
  double positive_rate = 0.5;
  double label_fraction = 1.0;
  int marker = 1;  // which neighbor group carries the signal, +1 or -1
};

// Generator layout: node types {target, a, b, c}; featureless relations
// r_shared: a->target, r_task1: b->target, r_task2: c->target. Every target
// gets its own fresh neighbors_per_relation neighbors per relation with iid
// standard normal features, except the last feature dimension, which holds
// the neighbor's marker: +1 and -1 alternating within each target's block.
// The planted directions live in the remaining dimensions, so the marker
// only tells neighbors apart and never moves a label by itself.
struct SynthConfig {
  int num_targets = 1000;
  int neighbors_per_relation = 5;
  int feature_dim = 8;
  double noise_std = 0.0;
  std::vector<SynthTaskPlan> tasks;
  uint64_t seed = 1;

  static SynthConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;

  // Disjoint per-task relations plus one shared relation; the second task is
  // label-poor. The structural-interference benchmark configuration.
  static SynthConfig interference_default();
  // Identical signal plans for both tasks: sharing everything is optimal.
  static SynthConfig shared_default();
};

struct SynthOutput {
  HeteroGraph graph;
  nlohmann::json ground_truth;  // directions, thresholds, config snapshot
};

SynthOutput generate(const SynthConfig& cfg);

// Standard graph directory plus ground_truth.json.
void write_synth(const SynthOutput& out, const std::string& dir);

struct ExperimentCell {
  std::string variant;
  int task = -1;
  uint64_t seed = 0;
  TaskMetrics metrics;
};

// Mean gate weight a task's relation gates assign to one source stream,
// averaged over nodes and layers of one trained model.
struct GateDiag {
  uint64_t seed = 0;
  int task = -1;
  int relation = -1;
  int source = -1;
  double mean_weight = 0;
};

struct ExperimentResult {
  std::vector<std::string> variants;
  std::vector<ExperimentCell> cells;
  std::vector<GateDiag> gate_diags;
  nlohmann::json config;  // generator + model + trainer snapshot

  double mean_metric(const std::string& variant, int task,
                     const std::string& metric) const;
  double std_metric(const std::string& variant, int task,
                    const std::string& metric) const;
  double mean_gate(int task, int relation, int source) const;
  nlohmann::json summary(const GraphSchema& schema) const;
};

// Trains every variant on freshly generated graphs, one per seed, and
// collects test metrics. "stl" expands to one single-task run per task;
// "struchis" additionally records the trained gate mixture weights.
// Variant names may carry a layer mask suffix like "struchis:110".
ExperimentResult interference_experiment(const SynthConfig& scfg,
                                         const std::vector<std::string>& variants,
                                         const std::vector<uint64_t>& seeds,
                                         const ModelConfig& base_mc,
                                         const TrainConfig& base_tc);

// results.csv (variant,task,seed,micro_f1,macro_f1,auc,ap) + results.json.
void write_experiment(const ExperimentResult& res, const GraphSchema& schema,
                      const std::string& dir);

}  // namespace struchis
