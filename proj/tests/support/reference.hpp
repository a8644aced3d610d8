#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/graph.hpp"
#include "core/model.hpp"
#include "core/params.hpp"

namespace struchis::testsup {

// Parameter values keyed by path, double precision.
std::map<std::string, MatD> param_map(const ParamStoreD& ps);

struct RefForward {
  std::vector<std::vector<MatD>> h;  // [stream][node type] final embeddings
  std::map<int, MatD> logits;        // task -> [labeled targets x classes]
  double loss = 0;
};

// Straight-line reimplementation of the full forward pass with nested loops,
// sharing no code with the engine's tape. Pins the engine's numerics on
// small fixtures.
RefForward ref_forward(const ModelConfig& cfg, const HeteroGraph& g,
                       const std::map<std::string, MatD>& P);

// All-pairs probability that a positive outranks a negative, ties counted
// half. Quadratic on purpose.
double ref_auc(const std::vector<int>& labels,
               const std::vector<double>& scores);

// Average precision by sweeping a threshold through every distinct score.
double ref_ap(const std::vector<int>& labels,
              const std::vector<double>& scores);

// Early stopping replayed naively over a fixed score sequence. Returns
// {best_epoch, last_epoch_run}, both 1-based, under strict-improvement
// patience capped at max_epochs.
std::pair<int, int> ref_early_stop(const std::vector<double>& scores,
                                   int patience, int max_epochs);

// Expected number of parameter tensors for a variant, counted from the
// schema instead of walking the store.
int ref_param_entries(const ModelConfig& cfg, const GraphSchema& schema);

}  // namespace struchis::testsup
