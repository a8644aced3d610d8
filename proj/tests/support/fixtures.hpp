#pragma once

#include "core/graph.hpp"

namespace struchis::testsup {

// 2 node types, 1 featureless relation, 3 edges, 1 binary task. The smallest
// graph the splitter accepts (3 labeled targets).
HeteroGraph tiny_graph();

// 6-node fixture exercising every structural branch at once:
//   user (3 nodes, feat 2), item (3 nodes, feat 3)
//   rates: item -> user with 2-dim edge features
//   follows: user -> user, featureless
//   churn: single_label/2 on user, tags: multi_label/2 on user
// user0 has two rates edges; user1 one rates and one follows edge; user2 is
// isolated (residual-only path). Every user is labeled in both tasks.
HeteroGraph hex_graph();

// tiny_graph with the target type widened to 10 nodes, labeled alternately.
// Big enough for a (6, 2, 2) split and for minibatch sampling.
HeteroGraph ten_targets_graph();

}  // namespace struchis::testsup
