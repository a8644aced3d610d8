#pragma once

#include "core/tape.hpp"

namespace struchis {

// Layer stages, expressed over an existing tape. These are the building
// blocks the model composes per (task, layer, relation); they carry no graph
// knowledge beyond the index wiring handed in.

// Per-edge message: transform the source node's previous-layer embedding.
// h_src_rows [m x d] gathered per edge, msg_w [d x d].
template <class T>
int message(Tape<T>& tp, int h_src_rows, int msg_w) {
  return tp.matmul(h_src_rows, msg_w);
}

struct RelationAggOut {
  int h_rel = -1;   // [groups x d] aggregated embedding per destination
  int alpha = -1;   // [m x heads] attention weights
};

// Attention-weighted aggregation of messages into each destination node.
// Scores come from [central || neighbor || edge] projected by attn_w and
// dotted against attn_a per head; the softmax runs within each destination's
// contiguous edge group. The neighbor rows enter the score concatenation
// untransformed. `attn_leaky` optionally bends scores with slope 0.2 before
// the softmax; the default path feeds them in unchanged.
template <class T>
RelationAggOut relation_aggregate(Tape<T>& tp, int central_rows,
                                  int neighbor_rows, int messages,
                                  int edge_rows, IndexVec group_offsets,
                                  int attn_w, int attn_a, int heads,
                                  bool attn_leaky) {
  int cat = tp.concat_rows({central_rows, neighbor_rows, edge_rows});
  int proj = tp.matmul(cat, attn_w);
  int logits = tp.head_scores(proj, attn_a, heads);
  if (attn_leaky) logits = tp.leaky_relu(logits, T(0.2));
  RelationAggOut out;
  out.alpha = tp.masked_softmax(logits, group_offsets);
  out.h_rel = tp.weighted_sum(out.alpha, messages, group_offsets);
  return out;
}

// Task-mixture weights from a selector embedding: softmax(selector . W + b).
// selector_rows [n x d], gate_w [d x K], gate_b [1 x K] -> [n x K].
template <class T>
int gate_weights(Tape<T>& tp, int selector_rows, int gate_w, int gate_b) {
  return tp.softmax_rows(tp.linear(selector_rows, gate_w, gate_b));
}

// Convex mixture of per-task embeddings under the gate weights.
template <class T>
int gate_combine(Tape<T>& tp, int weights, const std::vector<int>& parts) {
  return tp.mix_rows(weights, parts);
}

struct CrossAggOut {
  int h_out = -1;  // [n x d] next-layer embedding for the whole type
  int beta = -1;   // [slots x heads] relation attention weights
};

// Attention over the relations present at each node, followed by the
// residual connection and the leaky rectifier. Nodes without any incoming
// relation take the residual path alone: nonlinearity(h_prev).
// central_slot_rows/slot_rows [slots x d]; node_offsets groups slots by node;
// covered_nodes maps the grouped result back into the full type.
template <class T>
CrossAggOut cross_relation_aggregate(Tape<T>& tp, int h_prev_full,
                                     int central_slot_rows, int slot_rows,
                                     IndexVec node_offsets,
                                     IndexVec covered_nodes, int agg_w,
                                     int agg_b, int heads, T slope) {
  CrossAggOut out;
  int n_full = tp.val(h_prev_full).rows;
  if (covered_nodes->empty()) {
    out.h_out = tp.leaky_relu(h_prev_full, slope);
    return out;
  }
  int cat = tp.concat_rows({central_slot_rows, slot_rows});
  int proj = tp.matmul(cat, agg_w);
  int logits = tp.head_scores(proj, agg_b, heads);
  out.beta = tp.masked_softmax(logits, node_offsets);
  int agg = tp.weighted_sum(out.beta, slot_rows, node_offsets);
  int full = tp.scatter_rows(agg, covered_nodes, n_full);
  out.h_out = tp.leaky_relu(tp.add(full, h_prev_full), slope);
  return out;
}

}  // namespace struchis
