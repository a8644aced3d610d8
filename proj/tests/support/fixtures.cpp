#include "support/fixtures.hpp"

namespace struchis::testsup {

HeteroGraph tiny_graph() {
  HeteroGraph g;
  g.schema.node_types = {{"u", 2}, {"v", 2}};
  g.schema.relations = {{"r", 0, 1, 0}};
  g.schema.tasks = {{"t", 1, TaskKind::single_label, 2}};

  MatD u(3, 2), v(3, 2);
  u.at(0, 0) = 1.0;  u.at(0, 1) = 0.0;
  u.at(1, 0) = 0.0;  u.at(1, 1) = 1.0;
  u.at(2, 0) = 0.5;  u.at(2, 1) = -0.5;
  v.at(0, 0) = 0.25; v.at(0, 1) = 0.75;
  v.at(1, 0) = -1.0; v.at(1, 1) = 0.5;
  v.at(2, 0) = 0.0;  v.at(2, 1) = 0.0;
  g.node_features = {std::move(u), std::move(v)};

  RelationData r;
  r.src = {0, 1, 2};
  r.dst = {0, 0, 1};
  g.relations = {std::move(r)};

  g.targets = {{{1, 0, {0}}, {1, 1, {1}}, {1, 2, {0}}}};
  g.canonicalize();
  return g;
}

HeteroGraph hex_graph() {
  HeteroGraph g;
  g.schema.node_types = {{"user", 2}, {"item", 3}};
  g.schema.relations = {{"rates", 1, 0, 2}, {"follows", 0, 0, 0}};
  g.schema.tasks = {{"churn", 0, TaskKind::single_label, 2},
                    {"tags", 0, TaskKind::multi_label, 2}};

  MatD user(3, 2), item(3, 3);
  user.at(0, 0) = 0.8;  user.at(0, 1) = -0.3;
  user.at(1, 0) = -0.5; user.at(1, 1) = 1.2;
  user.at(2, 0) = 0.1;  user.at(2, 1) = 0.4;
  item.at(0, 0) = 1.0;  item.at(0, 1) = 0.0;  item.at(0, 2) = -1.0;
  item.at(1, 0) = 0.2;  item.at(1, 1) = 0.9;  item.at(1, 2) = 0.3;
  item.at(2, 0) = -0.7; item.at(2, 1) = 0.5;  item.at(2, 2) = 0.6;
  g.node_features = {std::move(user), std::move(item)};

  RelationData rates;
  rates.src = {0, 1, 2};
  rates.dst = {0, 0, 1};
  rates.edge_features = MatD(3, 2);
  rates.edge_features.at(0, 0) = 0.5;  rates.edge_features.at(0, 1) = -0.2;
  rates.edge_features.at(1, 0) = 1.1;  rates.edge_features.at(1, 1) = 0.4;
  rates.edge_features.at(2, 0) = -0.6; rates.edge_features.at(2, 1) = 0.9;

  RelationData follows;
  follows.src = {0};
  follows.dst = {1};

  g.relations = {std::move(rates), std::move(follows)};

  g.targets = {
      {{0, 0, {0}}, {0, 1, {1}}, {0, 2, {0}}},
      {{0, 0, {0}}, {0, 1, {1}}, {0, 2, {0, 1}}},
  };
  g.canonicalize();
  return g;
}

HeteroGraph ten_targets_graph() {
  HeteroGraph g = tiny_graph();
  MatD v(10, 2);
  for (int i = 0; i < 10; ++i) v.at(i, 0) = 0.1 * i;
  g.node_features[1] = std::move(v);
  g.targets[0].clear();
  for (int i = 0; i < 10; ++i) g.targets[0].push_back({1, i, {i % 2}});
  return g;
}

}  // namespace struchis::testsup
