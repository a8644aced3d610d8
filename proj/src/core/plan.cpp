#include "core/plan.hpp"

namespace struchis {

GraphPlan GraphPlan::build(const HeteroGraph& g) {
  GraphPlan plan;
  size_t num_types = g.schema.node_types.size();

  for (size_t r = 0; r < g.schema.relations.size(); ++r) {
    const RelationSpec& spec = g.schema.relations[r];
    const RelationData& rel = g.relations[r];
    RelationPlan rp;
    rp.relation = int(r);
    rp.src_type = spec.src_type;
    rp.dst_type = spec.dst_type;
    rp.num_edges = rel.num_edges();
    std::vector<int> offsets{0};
    std::vector<int> gdst;
    for (int i = 0; i < rp.num_edges; ++i) {
      int d = rel.dst[size_t(i)];
      if (i > 0 && rel.dst[size_t(i) - 1] > d)
        fail(ErrorKind::contract, "plan: edges of relation " + spec.name +
                                      " are not in canonical order");
      if (gdst.empty() || gdst.back() != d) {
        if (i > 0) offsets.push_back(i);
        gdst.push_back(d);
      }
    }
    if (rp.num_edges > 0) offsets.push_back(rp.num_edges);
    rp.num_groups = int(gdst.size());
    rp.edge_src = make_index(rel.src);
    rp.edge_dst = make_index(rel.dst);
    rp.group_offsets = make_index(std::move(offsets));
    rp.group_dst = make_index(std::move(gdst));
    plan.relations.push_back(std::move(rp));
  }

  for (size_t t = 0; t < num_types; ++t) {
    TypePlan tp;
    // group index per node for each relation landing on this type
    std::vector<std::pair<int, std::vector<int>>> rel_group_of_node;
    int stack_base = 0;
    for (const RelationPlan& rp : plan.relations) {
      if (rp.dst_type != int(t) || rp.num_edges == 0) continue;
      tp.rels_here.push_back(rp.relation);
      tp.stack_offsets.push_back(stack_base);
      std::vector<int> group_of(size_t(g.num_nodes(int(t))), -1);
      for (int gi = 0; gi < rp.num_groups; ++gi)
        group_of[size_t((*rp.group_dst)[size_t(gi)])] = gi;
      rel_group_of_node.push_back({rp.relation, std::move(group_of)});
      stack_base += rp.num_groups;
    }
    std::vector<int> slot_node, slot_rel, slot_stack, node_off, covered;
    node_off.push_back(0);
    for (int v = 0; v < g.num_nodes(int(t)); ++v) {
      int before = int(slot_node.size());
      for (size_t k = 0; k < rel_group_of_node.size(); ++k) {
        int gi = rel_group_of_node[k].second[size_t(v)];
        if (gi < 0) continue;
        slot_node.push_back(v);
        slot_rel.push_back(rel_group_of_node[k].first);
        slot_stack.push_back(tp.stack_offsets[k] + gi);
      }
      if (int(slot_node.size()) > before) {
        covered.push_back(v);
        node_off.push_back(int(slot_node.size()));
      }
    }
    tp.num_slots = int(slot_node.size());
    tp.slot_node = make_index(std::move(slot_node));
    tp.slot_rel = make_index(std::move(slot_rel));
    tp.slot_stack_row = make_index(std::move(slot_stack));
    tp.node_offsets = make_index(std::move(node_off));
    tp.covered_nodes = make_index(std::move(covered));
    plan.types.push_back(std::move(tp));
  }
  return plan;
}

}  // namespace struchis
