#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "core/trainer.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/reference.hpp"

using namespace struchis;
using namespace struchis::testsup;

namespace {

ModelConfig small_model(Variant v = Variant::struchis) {
  ModelConfig mc;
  mc.variant = v;
  mc.num_tasks = 2;
  mc.num_layers = 2;
  mc.hidden_dim = 4;
  mc.attention_heads = 1;
  mc.head_hidden_layers = 0;
  mc.seed = 7;
  return mc;
}

TrainConfig quick_train() {
  TrainConfig tc;
  tc.max_epochs = 4;
  tc.patience = 4;
  tc.lr_grid = {0.05};
  tc.wd_grid = {0.0};
  tc.batch_targets = 0;
  tc.seed = 7;
  return tc;
}

}  // namespace

TEST_CASE("early stopper matches the reference on random score streams") {
  Rng rng(2024);
  for (int it = 0; it < 400; ++it) {
    int patience = 1 + int(rng.index(5));
    int max_epochs = 1 + int(rng.index(30));
    std::vector<double> scores(static_cast<size_t>(max_epochs));
    for (double& s : scores) s = double(rng.index(6)) / 5.0;  // ties likely

    EarlyStopper stop(patience);
    int last = max_epochs;
    for (int e = 1; e <= max_epochs; ++e) {
      if (stop.update(scores[size_t(e - 1)])) {
        last = e;
        break;
      }
    }
    auto [ref_best, ref_last] = ref_early_stop(scores, patience, max_epochs);
    CHECK(stop.best_epoch == ref_best);
    CHECK(last == ref_last);
  }
}

TEST_CASE("budget spec accepts int, list and per-type object forms") {
  HeteroGraph g = hex_graph();
  BudgetSpec spec;

  spec.raw = 7;
  HopBudgets hb = spec.resolve(g.schema, 3);
  CHECK(hb.num_hops() == 3);
  CHECK(hb.at(0, 0) == 7);
  CHECK(hb.at(1, 2) == 7);

  spec.raw = nlohmann::json::array({5, 2});
  hb = spec.resolve(g.schema, 2);
  CHECK(hb.at(0, 0) == 5);
  CHECK(hb.at(1, 1) == 2);

  spec.raw = {{"user", 4}, {"item", nlohmann::json::array({1, 2})}};
  hb = spec.resolve(g.schema, 2);
  CHECK(hb.at(0, 0) == 4);
  CHECK(hb.at(0, 1) == 4);
  CHECK(hb.at(1, 0) == 1);
  CHECK(hb.at(1, 1) == 2);
}

TEST_CASE("budget spec rejects malformed forms") {
  HeteroGraph g = hex_graph();
  BudgetSpec spec;

  spec.raw = -1;
  CHECK_THROWS_AS(spec.resolve(g.schema, 2), Error);

  spec.raw = nlohmann::json::array({5, 2, 9});  // three hops, two wanted
  CHECK_THROWS_AS(spec.resolve(g.schema, 2), Error);

  spec.raw = {{"user", 4}};  // item missing
  CHECK_THROWS_AS(spec.resolve(g.schema, 2), Error);

  spec.raw = {{"user", 4}, {"item", 2}, {"ghost", 1}};
  CHECK_THROWS_AS(spec.resolve(g.schema, 2), Error);

  spec.raw = "ten";
  CHECK_THROWS_AS(spec.resolve(g.schema, 2), Error);
}

TEST_CASE("train config parsing is strict and round-trips") {
  nlohmann::json j = {{"max_epochs", 30},
                      {"patience", 5},
                      {"lr_grid", {0.01}},
                      {"wd_grid", {0.0, 0.001}},
                      {"batch_targets", 16},
                      {"eval_metric", "micro_f1"},
                      {"seed", 99}};
  TrainConfig tc = TrainConfig::from_json(j);
  CHECK(tc.max_epochs == 30);
  CHECK(tc.wd_grid == std::vector<double>{0.0, 0.001});
  CHECK(tc.eval_metric == "micro_f1");

  TrainConfig back = TrainConfig::from_json(tc.to_json());
  CHECK(back.to_json() == tc.to_json());

  j["mystery_knob"] = true;
  CHECK_THROWS_AS(TrainConfig::from_json(j), Error);
}

TEST_CASE("train config validation rejects bad values") {
  TrainConfig tc;
  tc.max_epochs = 0;
  CHECK_THROWS_AS(tc.validate(), Error);

  tc = TrainConfig();
  tc.lr_grid = {0.0};
  CHECK_THROWS_AS(tc.validate(), Error);

  tc = TrainConfig();
  tc.pos_ratio = 1.5;
  CHECK_THROWS_AS(tc.validate(), Error);

  tc = TrainConfig();
  tc.eval_metric = "f2";
  CHECK_THROWS_AS(tc.validate(), Error);

  // ratio sanity lives with the splitter, not the config struct
  HeteroGraph g = hex_graph();
  CHECK_THROWS_AS(split_targets(g, {0.5, 0.5, 0.5}, 1), Error);
}

TEST_CASE("restrict_targets keeps exactly one split bucket") {
  HeteroGraph g = ten_targets_graph();
  SplitAssignment sp = split_targets(g, {0.6, 0.2, 0.2}, 3);
  HeteroGraph val = restrict_targets(g, sp, Split::val);
  REQUIRE(val.targets.size() == g.targets.size());
  for (size_t t = 0; t < g.targets.size(); ++t) {
    const auto& rows = sp.rows(int(t), Split::val);
    REQUIRE(val.targets[t].size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      CHECK(val.targets[t][i].node == g.targets[t][size_t(rows[i])].node);
      CHECK(val.targets[t][i].y == g.targets[t][size_t(rows[i])].y);
    }
  }
  // node set untouched, only labels are filtered
  CHECK(val.node_features[0].rows == g.node_features[0].rows);
}

TEST_CASE("training runs, logs every epoch and snapshots the best") {
  HeteroGraph g = hex_graph();
  ModelConfig mc = small_model();
  TrainConfig tc = quick_train();
  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);

  TrainResult r = train_single(g, sp, mc, tc, 0.05, 0.0);
  REQUIRE(!r.log.empty());
  CHECK(int(r.log.size()) <= tc.max_epochs);
  for (size_t i = 0; i < r.log.size(); ++i) {
    CHECK(r.log[i].epoch == int(i) + 1);
    CHECK(std::isfinite(r.log[i].train_loss));
    CHECK(r.log[i].lr == 0.05);
    CHECK(r.log[i].wd == 0.0);
    CHECK(!r.log[i].val.tasks.empty());
  }
  CHECK(r.best_epoch >= 1);
  CHECK(r.best_epoch <= int(r.log.size()));
  CHECK(std::isfinite(r.best_score));
  CHECK(r.seconds_per_epoch >= 0.0);

  ParamStoreF ps = build_variant<float>(mc, g.schema);
  CHECK(r.best_params.entries.size() == ps.count());

  // same seeds, same data, no sampling: a rerun is identical
  TrainResult r2 = train_single(g, sp, mc, tc, 0.05, 0.0);
  REQUIRE(r2.log.size() == r.log.size());
  CHECK(r2.best_epoch == r.best_epoch);
  CHECK(r2.best_score == r.best_score);
  CHECK(r2.log.back().train_loss == r.log.back().train_loss);
  for (size_t i = 0; i < r.best_params.entries.size(); ++i)
    CHECK(r2.best_params.entries[i].second.d == r.best_params.entries[i].second.d);
}

TEST_CASE("minibatch training with sampling stays finite and deterministic") {
  HeteroGraph g = ten_targets_graph();
  ModelConfig mc = small_model();
  mc.num_tasks = int(g.schema.tasks.size());
  TrainConfig tc = quick_train();
  tc.batch_targets = 4;
  tc.hop_budgets.raw = 2;
  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);

  TrainResult a = train_single(g, sp, mc, tc, 0.05, 0.0);
  TrainResult b = train_single(g, sp, mc, tc, 0.05, 0.0);
  REQUIRE(a.log.size() == b.log.size());
  for (size_t i = 0; i < a.log.size(); ++i) {
    CHECK(std::isfinite(a.log[i].train_loss));
    CHECK(a.log[i].train_loss == b.log[i].train_loss);
  }
}

TEST_CASE("grid ties resolve to the smallest lr, then the smallest wd") {
  // Learning rates this small cannot move any argmax decision, so all four
  // cells score identically and only the tie-break picks the winner.
  HeteroGraph g = hex_graph();
  ModelConfig mc = small_model();
  TrainConfig tc = quick_train();
  tc.max_epochs = 2;
  tc.patience = 2;
  tc.lr_grid = {2e-12, 1e-12};
  tc.wd_grid = {0.125, 0.0};
  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);

  GridResult gr = grid_search(g, sp, mc, tc);
  REQUIRE(gr.cells.size() == 4);
  double first = gr.cells[0].score;
  for (const GridCell& c : gr.cells) CHECK(c.score == first);
  CHECK(gr.best.lr == 1e-12);
  CHECK(gr.best.wd == 0.0);
}

TEST_CASE("selecting on a task the variant does not serve is an error") {
  HeteroGraph g = hex_graph();
  ModelConfig mc = small_model(Variant::stl);
  mc.stl_task = 0;
  TrainConfig tc = quick_train();
  tc.selection_task = 1;
  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);
  CHECK_THROWS_AS(train_single(g, sp, mc, tc, 0.05, 0.0), Error);
}

TEST_CASE("split evaluation is deterministic and covers served tasks") {
  HeteroGraph g = ten_targets_graph();
  ModelConfig mc = small_model();
  mc.num_tasks = int(g.schema.tasks.size());
  TrainConfig tc = quick_train();
  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);
  ParamStoreF ps = build_variant<float>(mc, g.schema);

  EvalOutput a = evaluate_split(g, sp, Split::test, mc, tc, ps, false);
  EvalOutput b = evaluate_split(g, sp, Split::test, mc, tc, ps, false);
  CHECK(a.report.to_json(g.schema) == b.report.to_json(g.schema));
  CHECK(a.report.tasks.size() == g.schema.tasks.size());
  for (const auto& [task, m] : a.report.tasks) {
    CHECK(m.n == int(sp.rows(task, Split::test).size()));
  }
  CHECK(a.trace.records.empty());

  EvalOutput traced = evaluate_split(g, sp, Split::test, mc, tc, ps, true);
  CHECK(!traced.trace.records.empty());
}
