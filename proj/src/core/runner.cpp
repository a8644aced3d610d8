#include "core/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "core/manifest.hpp"
#include "core/metrics.hpp"
#include "core/params.hpp"

namespace struchis {

namespace {

Split split_from_name(const std::string& s) {
  for (Split sp : {Split::train, Split::val, Split::test})
    if (s == split_name(sp)) return sp;
  fail(ErrorKind::config, "unknown split: " + s + " (train|val|test)");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::io, "cannot write " + path);
  f << text;
  if (!f) fail(ErrorKind::io, "short write to " + path);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string csv_num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Loads graph + stored configs of a finished training run and rebuilds the
// trained model. The split assignment is a pure function of (graph, ratios,
// seed), so evaluation sees the same buckets the run trained against.
struct LoadedRun {
  HeteroGraph g;
  ModelConfig mc;
  TrainConfig tc;
  SplitAssignment sp;
  ParamStoreF ps;
};

LoadedRun load_run(const std::string& graph_dir, const std::string& run_dir) {
  LoadedRun r;
  r.g = load_graph(graph_dir);
  r.mc = ModelConfig::from_json(read_json_file(run_dir + "/model_config.json"));
  r.tc = TrainConfig::from_json(read_json_file(run_dir + "/train_config.json"));
  r.mc.validate(r.g.schema);
  r.tc.validate();
  r.sp = split_targets(r.g, r.tc.split_ratios, r.tc.seed);
  r.ps = build_variant<float>(r.mc, r.g.schema);
  apply_checkpoint(r.ps, load_checkpoint(run_dir + "/checkpoint.bin"));
  return r;
}

struct ConfigPair {
  ModelConfig mc;
  TrainConfig tc;
};

ConfigPair parse_configs(const HeteroGraph& g, const nlohmann::json& model_json,
                         const nlohmann::json& train_json,
                         int64_t seed_override) {
  ConfigPair p;
  p.mc = ModelConfig::from_json(model_json);
  if (!model_json.contains("num_tasks"))
    p.mc.num_tasks = int(g.schema.tasks.size());
  p.tc = train_json.is_null() ? TrainConfig{}
                              : TrainConfig::from_json(train_json);
  if (seed_override >= 0) {
    p.mc.seed = uint64_t(seed_override);
    p.tc.seed = uint64_t(seed_override);
  }
  p.mc.validate(g.schema);
  p.tc.validate();
  return p;
}

}  // namespace

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::io, "cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(f, nullptr, false);
  if (j.is_discarded()) fail(ErrorKind::schema, "invalid JSON in " + path);
  return j;
}

nlohmann::json graph_info(const HeteroGraph& g) {
  nlohmann::json types = nlohmann::json::object();
  for (size_t i = 0; i < g.schema.node_types.size(); ++i) {
    const NodeTypeSpec& t = g.schema.node_types[i];
    types[t.name] = {{"count", g.num_nodes(int(i))},
                     {"feature_dim", t.feature_dim}};
  }
  nlohmann::json rels = nlohmann::json::object();
  for (size_t i = 0; i < g.schema.relations.size(); ++i) {
    const RelationSpec& r = g.schema.relations[i];
    rels[r.name] = {{"src", g.schema.node_types[size_t(r.src_type)].name},
                    {"dst", g.schema.node_types[size_t(r.dst_type)].name},
                    {"edges", g.relations[i].num_edges()},
                    {"edge_feature_dim", r.edge_feature_dim}};
  }
  nlohmann::json tasks = nlohmann::json::object();
  for (size_t i = 0; i < g.schema.tasks.size(); ++i) {
    const TaskSpec& t = g.schema.tasks[i];
    tasks[t.name] = {{"kind", task_kind_name(t.kind)},
                     {"num_classes", t.num_classes},
                     {"target_type", g.schema.node_types[size_t(t.target_type)].name},
                     {"labeled", g.targets[i].size()}};
  }
  return {{"node_types", types},
          {"relations", rels},
          {"tasks", tasks},
          {"total_nodes", g.total_nodes()},
          {"total_edges", g.total_edges()}};
}

nlohmann::json run_synth(const nlohmann::json& config,
                         const std::string& out_dir, int64_t seed_override) {
  SynthConfig sc = (config.is_null() || (config.is_object() && config.empty()))
                       ? SynthConfig::interference_default()
                       : SynthConfig::from_json(config);
  if (seed_override >= 0) sc.seed = uint64_t(seed_override);
  sc.validate();

  RunManifest man;
  man.command = "synth";
  man.config = sc.to_json();
  man.seed = sc.seed;
  man.started_at = timestamp_now();
  man.outputs = {"schema.json", "ground_truth.json"};
  SynthOutput out = generate(sc);
  for (const NodeTypeSpec& t : out.graph.schema.node_types)
    man.outputs.push_back("nodes_" + t.name + ".jsonl");
  for (const RelationSpec& r : out.graph.schema.relations)
    man.outputs.push_back("edges_" + r.name + ".jsonl");
  for (const TaskSpec& t : out.graph.schema.tasks)
    man.outputs.push_back("labels_" + t.name + ".jsonl");
  man.write(out_dir);

  write_synth(out, out_dir);
  man.finished_at = timestamp_now();
  man.write(out_dir);
  return graph_info(out.graph);
}

nlohmann::json run_train(const std::string& graph_dir,
                         const nlohmann::json& model_json,
                         const nlohmann::json& train_json,
                         const std::string& out_dir, int64_t seed_override) {
  HeteroGraph g = load_graph(graph_dir);
  auto [mc, tc] = parse_configs(g, model_json, train_json, seed_override);

  RunManifest man;
  man.command = "train";
  man.config = {{"graph", graph_dir},
                {"model", mc.to_json()},
                {"train", tc.to_json()}};
  man.seed = tc.seed;
  man.started_at = timestamp_now();
  man.outputs = {"model_config.json", "train_config.json",
                 "grid_results.json", "checkpoint.bin",
                 "train_log.jsonl",   "metrics.json"};
  man.write(out_dir);
  write_json(out_dir + "/model_config.json", mc.to_json());
  write_json(out_dir + "/train_config.json", tc.to_json());

  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);
  GridResult gr = grid_search(g, sp, mc, tc);

  save_checkpoint(out_dir + "/checkpoint.bin", gr.best.best_params);
  {
    std::string lines;
    for (const EpochLog& e : gr.best.log)
      lines += e.to_json(g.schema).dump() + "\n";
    write_text(out_dir + "/train_log.jsonl", lines);
  }
  write_json(out_dir + "/grid_results.json",
             {{"cells", gr.cells_to_json()},
              {"chosen",
               {{"lr", gr.best.lr},
                {"wd", gr.best.wd},
                {"score", gr.best.best_score},
                {"best_epoch", gr.best.best_epoch}}}});

  ParamStoreF ps = build_variant<float>(mc, g.schema);
  apply_checkpoint(ps, gr.best.best_params);
  EvalOutput ev = evaluate_split(g, sp, Split::test, mc, tc, ps, false);
  nlohmann::json metrics = {{"split", "test"},
                            {"metrics", ev.report.to_json(g.schema)}};
  write_json(out_dir + "/metrics.json", metrics);

  man.finished_at = timestamp_now();
  man.write(out_dir);
  return metrics;
}

nlohmann::json run_evaluate(const std::string& graph_dir,
                            const std::string& run_dir,
                            const std::string& split) {
  Split sp = split_from_name(split);
  LoadedRun r = load_run(graph_dir, run_dir);
  EvalOutput ev = evaluate_split(r.g, r.sp, sp, r.mc, r.tc, r.ps, false);
  return {{"split", split}, {"metrics", ev.report.to_json(r.g.schema)}};
}

void run_importance(const std::string& graph_dir, const std::string& run_dir,
                    const std::string& split, const std::string& out_csv) {
  Split sp = split_from_name(split);
  LoadedRun r = load_run(graph_dir, run_dir);
  EvalOutput ev = evaluate_split(r.g, r.sp, sp, r.mc, r.tc, r.ps, true);
  export_importance(ev.trace, r.g.schema, out_csv);
}

nlohmann::json run_ablate(const std::string& graph_dir,
                          const nlohmann::json& model_json,
                          const nlohmann::json& train_json,
                          const std::string& out_dir, int64_t seed_override) {
  HeteroGraph g = load_graph(graph_dir);
  auto [base_mc, tc] = parse_configs(g, model_json, train_json, seed_override);
  int L = base_mc.num_layers;
  int T = base_mc.num_tasks;

  // Sharing-depth progression first, then the structural comparisons.
  std::vector<std::string> settings;
  for (int k = 1; k <= L; ++k)
    settings.push_back("struchis:" + std::string(size_t(k), '1') +
                       std::string(size_t(L - k), '0'));
  settings.insert(settings.end(), {"ablation_no_r", "ablation_no_r_no_l",
                                   "stl", "shared_backbone"});

  RunManifest man;
  man.command = "ablate";
  man.config = {{"graph", graph_dir},
                {"model", base_mc.to_json()},
                {"train", tc.to_json()},
                {"settings", settings}};
  man.seed = tc.seed;
  man.started_at = timestamp_now();
  man.outputs = {"ablation.csv", "results.json"};
  man.write(out_dir);

  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);

  auto test_eval = [&](const ModelConfig& mc) {
    GridResult gr = grid_search(g, sp, mc, tc);
    ParamStoreF ps = build_variant<float>(mc, g.schema);
    apply_checkpoint(ps, gr.best.best_params);
    return evaluate_split(g, sp, Split::test, mc, tc, ps, false).report;
  };

  std::string csv = "setting,task,micro_f1,macro_f1\n";
  nlohmann::json rows = nlohmann::json::array();
  for (const std::string& name : settings) {
    auto [variant, mask] = parse_variant_setting(name, L);
    ModelConfig mc = base_mc;
    mc.variant = variant;
    mc.layer_share_mask = mask;
    nlohmann::json per_task = nlohmann::json::object();
    auto record = [&](int t, const TaskMetrics& m) {
      const std::string& tn = g.schema.tasks[size_t(t)].name;
      csv += name + "," + tn + "," + csv_num(m.micro_f1) + "," +
             csv_num(m.macro_f1) + "\n";
      per_task[tn] = m.to_json();
    };
    if (variant == Variant::stl) {
      for (int t = 0; t < T; ++t) {
        mc.stl_task = t;
        record(t, test_eval(mc).for_task(t));
      }
    } else {
      MetricsReport rep = test_eval(mc);
      for (int t = 0; t < T; ++t) record(t, rep.for_task(t));
    }
    rows.push_back({{"setting", name}, {"tasks", per_task}});
  }

  write_text(out_dir + "/ablation.csv", csv);
  nlohmann::json results = {{"config", man.config}, {"settings", rows}};
  write_json(out_dir + "/results.json", results);
  man.finished_at = timestamp_now();
  man.write(out_dir);
  return results;
}

nlohmann::json run_bench(const std::string& graph_dir,
                         const nlohmann::json& model_json,
                         const nlohmann::json& train_json,
                         const std::string& out_dir, int epochs,
                         int64_t seed_override) {
  if (epochs < 1) fail(ErrorKind::config, "bench needs epochs >= 1");
  HeteroGraph g = load_graph(graph_dir);
  auto [base_mc, tc] = parse_configs(g, model_json, train_json, seed_override);
  tc.max_epochs = epochs;
  tc.patience = epochs;  // no early stop: every variant pays the same count
  tc.lr_grid = {tc.lr_grid.front()};
  tc.wd_grid = {tc.wd_grid.front()};

  std::vector<std::string> variants = {"struchis",       "shared_backbone",
                                       "stl",            "moe_experts",
                                       "ablation_no_r",  "ablation_no_r_no_l"};

  RunManifest man;
  man.command = "bench-time";
  man.config = {{"graph", graph_dir},
                {"model", base_mc.to_json()},
                {"train", tc.to_json()},
                {"epochs", epochs}};
  man.seed = tc.seed;
  man.started_at = timestamp_now();
  man.outputs = {"bench.csv"};
  man.write(out_dir);

  SplitAssignment sp = split_targets(g, tc.split_ratios, tc.seed);

  std::string csv = "variant,epochs,seconds_per_epoch\n";
  nlohmann::json rows = nlohmann::json::array();
  for (const std::string& vn : variants) {
    ModelConfig mc = base_mc;
    mc.variant = variant_from_name(vn);
    mc.layer_share_mask.clear();
    mc.stl_task = 0;
    TrainResult tr =
        train_single(g, sp, mc, tc, tc.lr_grid.front(), tc.wd_grid.front());
    char buf[32];
    snprintf(buf, sizeof buf, "%.6f", tr.seconds_per_epoch);
    csv += vn + "," + std::to_string(tr.log.size()) + "," + buf + "\n";
    rows.push_back({{"variant", vn},
                    {"epochs", tr.log.size()},
                    {"seconds_per_epoch", tr.seconds_per_epoch}});
  }

  write_text(out_dir + "/bench.csv", csv);
  man.finished_at = timestamp_now();
  man.write(out_dir);
  return rows;
}

}  // namespace struchis
