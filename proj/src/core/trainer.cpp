#include "core/trainer.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include "core/adam.hpp"

namespace struchis {

HopBudgets BudgetSpec::resolve(const GraphSchema& schema,
                               int num_hops) const {
  auto hops_from = [&](const nlohmann::json& v) -> std::vector<int> {
    std::vector<int> hops;
    if (v.is_number_integer()) {
      int b = v.get<int>();
      if (b < 0) fail(ErrorKind::config, "hop budget must be >= 0");
      hops.assign(size_t(num_hops), b);
    } else if (v.is_array()) {
      if (int(v.size()) != num_hops)
        fail(ErrorKind::config,
             "hop budget list length " + std::to_string(v.size()) +
                 " must equal num_layers " + std::to_string(num_hops));
      for (const auto& e : v) {
        if (!e.is_number_integer() || e.get<int>() < 0)
          fail(ErrorKind::config, "hop budgets must be integers >= 0");
        hops.push_back(e.get<int>());
      }
    } else {
      fail(ErrorKind::config,
           "hop_budgets entries must be an integer or a list");
    }
    return hops;
  };

  HopBudgets b;
  if (raw.is_object()) {
    for (const auto& item : raw.items())
      if (schema.type_id(item.key()) < 0)
        fail(ErrorKind::config,
             "hop_budgets names unknown node type " + item.key());
    for (const auto& nt : schema.node_types) {
      if (!raw.contains(nt.name))
        fail(ErrorKind::config, "hop_budgets is missing node type " + nt.name);
      b.per_type.push_back(hops_from(raw.at(nt.name)));
    }
  } else {
    std::vector<int> hops = hops_from(raw);
    b.per_type.assign(schema.node_types.size(), hops);
  }
  return b;
}

namespace {

template <class V>
V field(const nlohmann::json& j, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, std::string("train config: bad value for ") + key);
  }
}

}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object())
    fail(ErrorKind::config, "train config must be a JSON object");
  static const std::set<std::string> known = {
      "max_epochs", "patience",    "lr_grid",        "wd_grid",
      "batch_targets", "pos_ratio", "hop_budgets",   "eval_metric",
      "selection_task", "split_ratios", "seed"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      fail(ErrorKind::config, "train config: unknown field " + item.key());
  TrainConfig c;
  c.max_epochs = field(j, "max_epochs", c.max_epochs);
  c.patience = field(j, "patience", c.patience);
  c.lr_grid = field(j, "lr_grid", c.lr_grid);
  c.wd_grid = field(j, "wd_grid", c.wd_grid);
  c.batch_targets = field(j, "batch_targets", c.batch_targets);
  c.pos_ratio = field(j, "pos_ratio", c.pos_ratio);
  if (j.contains("hop_budgets")) c.hop_budgets.raw = j.at("hop_budgets");
  c.eval_metric = field(j, "eval_metric", c.eval_metric);
  if (j.contains("selection_task")) {
    const auto& st = j.at("selection_task");
    if (st.is_string() && st.get<std::string>() == "mean")
      c.selection_task = -1;
    else if (st.is_number_integer())
      c.selection_task = st.get<int>();
    else
      fail(ErrorKind::config,
           "train config: selection_task must be a task id or \"mean\"");
  }
  if (j.contains("split_ratios")) {
    auto v = field(j, "split_ratios", std::vector<double>{});
    if (v.size() != 3)
      fail(ErrorKind::config,
           "train config: split_ratios needs [train, val, test]");
    c.split_ratios = {v[0], v[1], v[2]};
  }
  c.seed = field<uint64_t>(j, "seed", c.seed);
  c.validate();
  return c;
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json j;
  j["max_epochs"] = max_epochs;
  j["patience"] = patience;
  j["lr_grid"] = lr_grid;
  j["wd_grid"] = wd_grid;
  j["batch_targets"] = batch_targets;
  j["pos_ratio"] = pos_ratio;
  j["hop_budgets"] = hop_budgets.raw;
  j["eval_metric"] = eval_metric;
  if (selection_task < 0)
    j["selection_task"] = "mean";
  else
    j["selection_task"] = selection_task;
  j["split_ratios"] = split_ratios;
  j["seed"] = seed;
  return j;
}

void TrainConfig::validate() const {
  if (max_epochs < 1) fail(ErrorKind::config, "max_epochs must be >= 1");
  if (patience < 1) fail(ErrorKind::config, "patience must be >= 1");
  if (lr_grid.empty() || wd_grid.empty())
    fail(ErrorKind::config, "lr_grid and wd_grid must be nonempty");
  for (double lr : lr_grid)
    if (!(lr > 0)) fail(ErrorKind::config, "learning rates must be > 0");
  for (double wd : wd_grid)
    if (!(wd >= 0)) fail(ErrorKind::config, "weight decay must be >= 0");
  if (batch_targets < 0)
    fail(ErrorKind::config, "batch_targets must be >= 0");
  if (!(pos_ratio >= 0 && pos_ratio <= 1))
    fail(ErrorKind::config, "pos_ratio must lie in [0, 1]");
  if (eval_metric != "micro_f1" && eval_metric != "macro_f1" &&
      eval_metric != "auc" && eval_metric != "ap")
    fail(ErrorKind::config, "unknown eval_metric: " + eval_metric);
  if (selection_task < -1)
    fail(ErrorKind::config, "selection_task must be a task id or \"mean\"");
}

nlohmann::json EpochLog::to_json(const GraphSchema& schema) const {
  nlohmann::json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["val"] = val.to_json(schema);
  j["lr"] = lr;
  j["wd"] = wd;
  j["seconds"] = seconds;
  return j;
}

HeteroGraph restrict_targets(const HeteroGraph& g, const SplitAssignment& sp,
                             Split split) {
  HeteroGraph out = g;
  for (size_t t = 0; t < g.targets.size(); ++t) {
    std::vector<Target> kept;
    for (int i : sp.rows(int(t), split))
      kept.push_back(g.targets[t][size_t(i)]);
    out.targets[t] = std::move(kept);
  }
  return out;
}

namespace {

double train_step(const HeteroGraph& batch, const GraphPlan& plan,
                  const ModelConfig& mc, ParamStoreF& ps, AdamF& opt,
                  std::vector<Mat<float>*>& prefs) {
  ModelRun<float> run(mc, batch, plan, ps);
  run.forward(false);
  int lid = run.loss();
  double loss = double(run.tape().val(lid).at(0, 0));
  if (!std::isfinite(loss))
    fail(ErrorKind::runtime, "non-finite training loss");
  run.backward(lid);
  std::vector<const Mat<float>*> grads;
  grads.reserve(ps.entries.size());
  for (size_t i = 0; i < ps.entries.size(); ++i)
    grads.push_back(&run.param_grad(int(i)));
  opt.step(prefs, grads);
  return loss;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

TrainResult train_single(const HeteroGraph& g, const SplitAssignment& sp,
                         const ModelConfig& mc, const TrainConfig& tc,
                         double lr, double wd) {
  mc.validate(g.schema);
  tc.validate();
  StreamLayout lay = stream_layout(mc);
  if (tc.selection_task >= 0 && lay.serve_index(tc.selection_task) < 0)
    fail(ErrorKind::config, "selection_task " +
                                std::to_string(tc.selection_task) +
                                " is not served by this model");

  ParamStoreF ps = build_variant<float>(mc, g.schema);
  AdamF opt;
  opt.lr = lr;
  opt.weight_decay = wd;
  std::vector<Mat<float>*> prefs;
  prefs.reserve(ps.entries.size());
  for (auto& e : ps.entries) prefs.push_back(&e.value);
  opt.init(prefs);

  HopBudgets budgets = tc.hop_budgets.resolve(g.schema, mc.num_layers);
  HeteroGraph full_train;
  GraphPlan full_plan;
  if (tc.batch_targets == 0) {
    full_train = restrict_targets(g, sp, Split::train);
    full_plan = GraphPlan::build(full_train);
  }

  TrainResult res;
  res.lr = lr;
  res.wd = wd;
  EarlyStopper stop(tc.patience);
  double step_seconds = 0;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    auto epoch_t0 = std::chrono::steady_clock::now();
    double train_loss = 0;
    double step_t = 0;
    try {
      if (tc.batch_targets == 0) {
        auto t0 = std::chrono::steady_clock::now();
        train_loss = train_step(full_train, full_plan, mc, ps, opt, prefs);
        step_t = seconds_since(t0);
      } else {
        int task =
            lay.served_tasks[size_t((epoch - 1) % int(lay.served_tasks.size()))];
        uint64_t es = splitmix64(tc.seed ^ splitmix64(uint64_t(epoch)));
        HeteroGraph batch = sample_subgraph(g, sp, task, Split::train,
                                            tc.batch_targets, tc.pos_ratio,
                                            budgets, es);
        GraphPlan plan = GraphPlan::build(batch);
        auto t0 = std::chrono::steady_clock::now();
        train_loss = train_step(batch, plan, mc, ps, opt, prefs);
        step_t = seconds_since(t0);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::runtime)
        fail(ErrorKind::runtime,
             std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                 ", lr " + std::to_string(lr) + ")");
      throw;
    }
    step_seconds += step_t;

    EvalOutput val = evaluate_split(g, sp, Split::val, mc, tc, ps, false);
    double score = val.report.value(tc.selection_task, tc.eval_metric);
    double prev_best = stop.best;
    bool stop_now = stop.update(score);
    if (score > prev_best) {
      res.best_params = checkpoint_from_store(ps);
      res.best_epoch = stop.best_epoch;
      res.best_score = score;
    }
    EpochLog el;
    el.epoch = epoch;
    el.train_loss = train_loss;
    el.val = std::move(val.report);
    el.lr = lr;
    el.wd = wd;
    el.seconds = seconds_since(epoch_t0);
    res.log.push_back(std::move(el));
    if (stop_now) break;
  }
  res.seconds_per_epoch = step_seconds / double(res.log.size());
  return res;
}

GridResult grid_search(const HeteroGraph& g, const SplitAssignment& sp,
                       const ModelConfig& mc, const TrainConfig& tc) {
  GridResult gr;
  bool have = false;
  for (double lr : tc.lr_grid)
    for (double wd : tc.wd_grid) {
      TrainResult r = train_single(g, sp, mc, tc, lr, wd);
      gr.cells.push_back({lr, wd, r.best_score, r.best_epoch});
      bool better =
          !have || r.best_score > gr.best.best_score ||
          (r.best_score == gr.best.best_score &&
           (lr < gr.best.lr || (lr == gr.best.lr && wd < gr.best.wd)));
      if (better) {
        gr.best = std::move(r);
        have = true;
      }
    }
  return gr;
}

nlohmann::json GridResult::cells_to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const GridCell& c : cells) {
    nlohmann::json j;
    j["lr"] = c.lr;
    j["wd"] = c.wd;
    j["score"] = c.score;
    j["best_epoch"] = c.best_epoch;
    arr.push_back(std::move(j));
  }
  return arr;
}

EvalOutput evaluate_split(const HeteroGraph& g, const SplitAssignment& sp,
                          Split split, const ModelConfig& mc,
                          const TrainConfig& tc, const ParamStoreF& ps,
                          bool want_trace) {
  HeteroGraph eg;
  if (tc.batch_targets == 0) {
    eg = restrict_targets(g, sp, split);
  } else {
    HopBudgets budgets =
        tc.hop_budgets.resolve(g.schema, mc.num_layers).scaled(4);
    eg = build_eval_graph(g, sp, split, budgets, tc.seed);
  }
  GraphPlan plan = GraphPlan::build(eg);
  ModelRun<float> run(mc, eg, plan, ps);
  run.forward(want_trace);

  EvalOutput out;
  StreamLayout lay = stream_layout(mc);
  for (int t : lay.served_tasks) {
    const std::vector<Target>& targets = eg.targets[size_t(t)];
    if (targets.empty())
      fail(ErrorKind::contract,
           "split " + std::string(split_name(split)) +
               " has no targets for task " + g.schema.tasks[size_t(t)].name);
    int lg = run.logits(t, target_rows(targets));
    MatD logits = cast_mat<double>(run.tape().val(lg));
    out.report.tasks.push_back(
        {t, evaluate_task(logits, targets, g.schema.tasks[size_t(t)])});
  }
  out.trace = run.trace();
  return out;
}

}  // namespace struchis
