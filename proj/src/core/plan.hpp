#pragma once

#include "core/graph.hpp"
#include "core/tape.hpp"

namespace struchis {

// Message-passing wiring for one relation. Edges are in canonical (dst, src)
// order, so edges sharing a destination form one contiguous group.
struct RelationPlan {
  int relation = -1;
  int src_type = -1;
  int dst_type = -1;
  int num_edges = 0;
  int num_groups = 0;         // distinct destinations with >= 1 edge
  IndexVec edge_src;          // per edge: row in the source type
  IndexVec edge_dst;          // per edge: row in the destination type
  IndexVec group_offsets;     // CSR over edges, one span per group
  IndexVec group_dst;         // per group: destination node row
};

// Cross-relation wiring for one node type. A slot is one (node, present
// relation) pair, sorted by (node, relation id); slots of one node are
// contiguous.
struct TypePlan {
  int num_slots = 0;
  std::vector<int> rels_here;      // relation ids with edges into this type
  std::vector<int> stack_offsets;  // per rels_here: row base in the vstack
  IndexVec slot_node;              // per slot: node row
  IndexVec slot_rel;               // per slot: relation id
  IndexVec slot_stack_row;         // per slot: row in the vstacked group mats
  IndexVec node_offsets;           // CSR over slots per covered node
  IndexVec covered_nodes;          // node rows with >= 1 slot
};

struct GraphPlan {
  std::vector<RelationPlan> relations;  // aligned with schema.relations
  std::vector<TypePlan> types;          // aligned with schema.node_types

  static GraphPlan build(const HeteroGraph& g);
};

}  // namespace struchis
