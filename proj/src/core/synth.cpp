#include "core/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace struchis {

namespace {

const char* kRelations[] = {"r_shared", "r_task1", "r_task2"};
const char* kNeighborTypes[] = {"a", "b", "c"};

template <class V>
V field(const nlohmann::json& j, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, std::string("synth config: bad value for ") + key);
  }
}

}  // namespace

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object())
    fail(ErrorKind::config, "synth config must be a JSON object");
  static const std::set<std::string> known = {
      "num_targets", "neighbors_per_relation", "feature_dim",
      "noise_std",   "tasks",                  "seed"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      fail(ErrorKind::config, "synth config: unknown field " + item.key());
  SynthConfig c;
  c.num_targets = field(j, "num_targets", c.num_targets);
  c.neighbors_per_relation =
      field(j, "neighbors_per_relation", c.neighbors_per_relation);
  c.feature_dim = field(j, "feature_dim", c.feature_dim);
  c.noise_std = field(j, "noise_std", c.noise_std);
  c.seed = field<uint64_t>(j, "seed", c.seed);
  if (j.contains("tasks")) {
    if (!j.at("tasks").is_array())
      fail(ErrorKind::config, "synth config: tasks must be an array");
    c.tasks.clear();
    for (const auto& tj : j.at("tasks")) {
      SynthTaskPlan p;
      p.name = field<std::string>(tj, "name", "");
      if (tj.contains("signals")) {
        if (!tj.at("signals").is_object())
          fail(ErrorKind::config, "synth task signals must be an object");
        for (const auto& item : tj.at("signals").items())
          p.signals.push_back({item.key(), item.value().get<double>()});
      }
      p.positive_rate = field(tj, "positive_rate", p.positive_rate);
      p.label_fraction = field(tj, "label_fraction", p.label_fraction);
      p.marker = field(tj, "marker", p.marker);
      c.tasks.push_back(std::move(p));
    }
  }
  c.validate();
  return c;
}

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json j;
  j["num_targets"] = num_targets;
  j["neighbors_per_relation"] = neighbors_per_relation;
  j["feature_dim"] = feature_dim;
  j["noise_std"] = noise_std;
  j["seed"] = seed;
  j["tasks"] = nlohmann::json::array();
  for (const SynthTaskPlan& p : tasks) {
    nlohmann::json tj;
    tj["name"] = p.name;
    tj["signals"] = nlohmann::json::object();
    for (const auto& [rel, w] : p.signals) tj["signals"][rel] = w;
    tj["positive_rate"] = p.positive_rate;
    tj["label_fraction"] = p.label_fraction;
    tj["marker"] = p.marker;
    j["tasks"].push_back(std::move(tj));
  }
  return j;
}

void SynthConfig::validate() const {
  if (num_targets < 3) fail(ErrorKind::config, "num_targets must be >= 3");
  if (neighbors_per_relation < 2)
    fail(ErrorKind::config,
         "neighbors_per_relation must be >= 2 (both marker groups need a "
         "member)");
  if (feature_dim < 2)
    fail(ErrorKind::config,
         "feature_dim must be >= 2 (one dimension is the marker)");
  if (!(noise_std >= 0)) fail(ErrorKind::config, "noise_std must be >= 0");
  if (tasks.empty()) fail(ErrorKind::config, "synth config declares no tasks");
  std::set<std::string> names;
  for (const SynthTaskPlan& p : tasks) {
    if (p.name.empty()) fail(ErrorKind::config, "synth task without a name");
    if (!names.insert(p.name).second)
      fail(ErrorKind::config, "duplicate synth task name " + p.name);
    if (p.signals.empty())
      fail(ErrorKind::config, "synth task " + p.name + " has no signals");
    double sum = 0;
    for (const auto& [rel, w] : p.signals) {
      if (std::find(std::begin(kRelations), std::end(kRelations), rel) ==
          std::end(kRelations))
        fail(ErrorKind::config,
             "synth task " + p.name + " references unknown relation " + rel);
      if (!(w >= 0)) fail(ErrorKind::config, "signal weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      fail(ErrorKind::config,
           "signal weights for task " + p.name + " must sum to 1");
    if (!(p.positive_rate > 0 && p.positive_rate < 1))
      fail(ErrorKind::config, "positive_rate must lie in (0, 1)");
    if (!(p.label_fraction > 0 && p.label_fraction <= 1))
      fail(ErrorKind::config, "label_fraction must lie in (0, 1]");
    if (p.marker != 1 && p.marker != -1)
      fail(ErrorKind::config, "marker must be +1 or -1");
    int labeled = std::max(
        3, int(std::llround(p.label_fraction * double(num_targets))));
    if (labeled > num_targets)
      fail(ErrorKind::config,
           "task " + p.name + " cannot label more targets than exist");
  }
}

SynthConfig SynthConfig::interference_default() {
  SynthConfig c;
  c.num_targets = 1500;
  c.neighbors_per_relation = 4;
  c.feature_dim = 8;
  c.noise_std = 0.2;
  // opposite markers put the two signals on opposite neighbor groups of the
  // same relations, so a single shared attention policy must compromise
  c.tasks = {
      {"dense", {{"r_shared", 0.5}, {"r_task1", 0.5}}, 0.5, 1.0, 1},
      {"sparse", {{"r_shared", 0.5}, {"r_task2", 0.5}}, 0.5, 0.25, -1},
  };
  return c;
}

SynthConfig SynthConfig::shared_default() {
  SynthConfig c;
  c.num_targets = 1500;
  c.neighbors_per_relation = 4;
  c.feature_dim = 8;
  c.noise_std = 0.2;
  c.tasks = {
      {"first",
       {{"r_shared", 0.5}, {"r_task1", 0.25}, {"r_task2", 0.25}},
       0.5,
       1.0,
       1},
      {"second",
       {{"r_shared", 0.5}, {"r_task1", 0.25}, {"r_task2", 0.25}},
       0.5,
       1.0,
       1},
  };
  return c;
}

SynthOutput generate(const SynthConfig& cfg) {
  cfg.validate();
  const int n = cfg.num_targets;
  const int k = cfg.neighbors_per_relation;
  const int dim = cfg.feature_dim;

  SynthOutput out;
  GraphSchema& schema = out.graph.schema;
  schema.node_types.push_back({"target", dim});
  for (const char* t : kNeighborTypes) schema.node_types.push_back({t, dim});
  for (int r = 0; r < 3; ++r)
    schema.relations.push_back({kRelations[r], 1 + r, 0, 0});
  for (const SynthTaskPlan& p : cfg.tasks)
    schema.tasks.push_back({p.name, 0, TaskKind::single_label, 2});

  auto draw_feats = [&](const std::string& label, int rows, bool marked) {
    Rng rng(splitmix64(cfg.seed) ^ fnv1a64("synth/feat/" + label));
    MatD m(rows, dim);
    for (auto& v : m.d) v = rng.normal();
    // last column is the marker: +1 / -1 alternating within a target's block
    if (marked)
      for (int row = 0; row < rows; ++row)
        m.at(row, dim - 1) = (row % k) % 2 == 0 ? 1.0 : -1.0;
    return m;
  };
  out.graph.node_features.push_back(draw_feats("target", n, false));
  for (const char* t : kNeighborTypes)
    out.graph.node_features.push_back(draw_feats(t, n * k, true));

  for (int r = 0; r < 3; ++r) {
    RelationData rd;
    for (int v = 0; v < n; ++v)
      for (int i = 0; i < k; ++i) {
        rd.src.push_back(v * k + i);
        rd.dst.push_back(v);
      }
    out.graph.relations.push_back(std::move(rd));
  }

  // unit hidden direction per relation; the marker dimension carries no
  // direction mass, so group membership alone never moves a projection
  std::vector<std::vector<double>> dirs(3, std::vector<double>(size_t(dim)));
  for (int r = 0; r < 3; ++r) {
    Rng rng(splitmix64(cfg.seed) ^
            fnv1a64(std::string("synth/dir/") + kRelations[r]));
    double norm = 0;
    for (auto& v : dirs[size_t(r)]) v = rng.normal();
    dirs[size_t(r)][size_t(dim - 1)] = 0.0;
    for (double v : dirs[size_t(r)]) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : dirs[size_t(r)]) v /= norm;
  }

  // projected group-mean per (marker group, relation, target)
  auto group_proj = [&](int marker) {
    std::vector<std::vector<double>> proj(3,
                                          std::vector<double>(size_t(n), 0));
    for (int r = 0; r < 3; ++r) {
      const MatD& feats = out.graph.node_features[size_t(1 + r)];
      for (int v = 0; v < n; ++v) {
        double s = 0;
        int members = 0;
        for (int i = 0; i < k; ++i) {
          if ((i % 2 == 0 ? 1 : -1) != marker) continue;
          ++members;
          for (int c = 0; c < dim; ++c)
            s += feats.at(v * k + i, c) * dirs[size_t(r)][size_t(c)];
        }
        proj[size_t(r)][size_t(v)] = s / double(members);
      }
    }
    return proj;
  };
  std::vector<std::vector<double>> proj_pos = group_proj(1);
  std::vector<std::vector<double>> proj_neg = group_proj(-1);

  nlohmann::json thresholds = nlohmann::json::object();
  for (size_t t = 0; t < cfg.tasks.size(); ++t) {
    const SynthTaskPlan& p = cfg.tasks[t];
    const auto& proj = p.marker == 1 ? proj_pos : proj_neg;
    std::vector<double> clean(size_t(n), 0);
    for (const auto& [rel, w] : p.signals) {
      int r = schema.relation_id(rel);
      for (int v = 0; v < n; ++v) clean[size_t(v)] += w * proj[size_t(r)][size_t(v)];
    }
    // threshold at the k-th largest clean score: exact class balance at zero
    // noise, approximate otherwise
    int want_pos = std::max(1, int(std::llround(p.positive_rate * double(n))));
    std::vector<double> sorted = clean;
    std::nth_element(sorted.begin(), sorted.begin() + (want_pos - 1),
                     sorted.end(), std::greater<double>());
    double tau = sorted[size_t(want_pos - 1)];
    thresholds[p.name] = tau;

    Rng noise_rng(splitmix64(cfg.seed) ^ fnv1a64("synth/noise/" + p.name));
    std::vector<int> labels(static_cast<size_t>(n));
    for (int v = 0; v < n; ++v) {
      double score = clean[size_t(v)] - tau;
      if (cfg.noise_std > 0) score += cfg.noise_std * noise_rng.normal();
      labels[size_t(v)] = score >= 0 ? 1 : 0;
    }

    std::vector<int> labeled(static_cast<size_t>(n));
    std::iota(labeled.begin(), labeled.end(), 0);
    if (p.label_fraction < 1.0) {
      int m = std::max(3, int(std::llround(p.label_fraction * double(n))));
      Rng pick(splitmix64(cfg.seed) ^ fnv1a64("synth/labels/" + p.name));
      labeled = pick.perm_prefix(n, m);
      std::sort(labeled.begin(), labeled.end());
    }
    std::vector<Target> targets;
    for (int v : labeled) targets.push_back({0, v, {labels[size_t(v)]}});
    out.graph.targets.push_back(std::move(targets));
  }

  out.graph.canonicalize();

  nlohmann::json gt;
  gt["directions"] = nlohmann::json::object();
  for (int r = 0; r < 3; ++r) gt["directions"][kRelations[r]] = dirs[size_t(r)];
  gt["thresholds"] = thresholds;
  gt["config"] = cfg.to_json();
  out.ground_truth = gt;
  return out;
}

void write_synth(const SynthOutput& out, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_graph(out.graph, dir);
  std::ofstream f(dir + "/ground_truth.json");
  if (!f) fail(ErrorKind::io, "cannot write " + dir + "/ground_truth.json");
  f << out.ground_truth.dump(2) << '\n';
}

namespace {

struct RunOut {
  MetricsReport report;
  AttentionTrace trace;
};

RunOut run_one(const HeteroGraph& g, const SplitAssignment& sp,
               const ModelConfig& mc, const TrainConfig& tc, bool want_trace) {
  GridResult gr = grid_search(g, sp, mc, tc);
  ParamStoreF ps = build_variant<float>(mc, g.schema);
  apply_checkpoint(ps, gr.best.best_params);
  EvalOutput ev = evaluate_split(g, sp, Split::test, mc, tc, ps, want_trace);
  return {std::move(ev.report), std::move(ev.trace)};
}

double metric_value(const TaskMetrics& m, const std::string& metric) {
  double v;
  if (metric == "micro_f1")
    v = m.micro_f1;
  else if (metric == "macro_f1")
    v = m.macro_f1;
  else if (metric == "auc")
    v = m.auc;
  else if (metric == "ap")
    v = m.ap;
  else
    fail(ErrorKind::config, "unknown metric: " + metric);
  if (std::isnan(v))
    fail(ErrorKind::contract, "metric " + metric + " is undefined here");
  return v;
}

}  // namespace

ExperimentResult interference_experiment(
    const SynthConfig& scfg, const std::vector<std::string>& variants,
    const std::vector<uint64_t>& seeds, const ModelConfig& base_mc,
    const TrainConfig& base_tc) {
  if (seeds.size() < 3)
    fail(ErrorKind::config, "experiment needs at least 3 seeds");
  if (variants.empty())
    fail(ErrorKind::config, "experiment needs at least one variant");

  ExperimentResult res;
  res.variants = variants;
  res.config["generator"] = scfg.to_json();
  res.config["model"] = base_mc.to_json();
  res.config["trainer"] = base_tc.to_json();

  for (uint64_t seed : seeds) {
    SynthConfig sc = scfg;
    sc.seed = seed;
    SynthOutput so = generate(sc);
    const int T = int(so.graph.schema.tasks.size());
    SplitAssignment sp =
        split_targets(so.graph, base_tc.split_ratios, seed);
    TrainConfig tc = base_tc;
    tc.seed = seed;

    for (const std::string& vn : variants) {
      auto [variant, mask] = parse_variant_setting(vn, base_mc.num_layers);
      ModelConfig mc = base_mc;
      mc.variant = variant;
      mc.layer_share_mask = mask;
      mc.num_tasks = T;
      mc.seed = seed;
      if (variant == Variant::stl) {
        for (int t = 0; t < T; ++t) {
          mc.stl_task = t;
          RunOut ro = run_one(so.graph, sp, mc, tc, false);
          res.cells.push_back({vn, t, seed, ro.report.for_task(t)});
        }
        continue;
      }
      bool trace = variant == Variant::struchis;
      RunOut ro = run_one(so.graph, sp, mc, tc, trace);
      for (int t = 0; t < T; ++t)
        res.cells.push_back({vn, t, seed, ro.report.for_task(t)});
      if (trace) {
        std::map<std::tuple<int, int, int>, std::pair<double, long>> acc;
        for (const TraceRecord& r : ro.trace.records) {
          if (r.kind != "gate" || r.relation < 0) continue;
          auto& slot = acc[{r.task, r.relation, r.aux}];
          slot.first += r.weight;
          slot.second += 1;
        }
        for (const auto& [key, sum] : acc)
          res.gate_diags.push_back({seed, std::get<0>(key), std::get<1>(key),
                                    std::get<2>(key),
                                    sum.first / double(sum.second)});
      }
    }
  }
  return res;
}

double ExperimentResult::mean_metric(const std::string& variant, int task,
                                     const std::string& metric) const {
  double sum = 0;
  long count = 0;
  for (const ExperimentCell& c : cells)
    if (c.variant == variant && c.task == task) {
      sum += metric_value(c.metrics, metric);
      ++count;
    }
  if (count == 0)
    fail(ErrorKind::contract,
         "no cells for " + variant + " task " + std::to_string(task));
  return sum / double(count);
}

double ExperimentResult::std_metric(const std::string& variant, int task,
                                    const std::string& metric) const {
  std::vector<double> vals;
  for (const ExperimentCell& c : cells)
    if (c.variant == variant && c.task == task)
      vals.push_back(metric_value(c.metrics, metric));
  if (vals.empty())
    fail(ErrorKind::contract,
         "no cells for " + variant + " task " + std::to_string(task));
  if (vals.size() == 1) return 0;
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= double(vals.size());
  double ss = 0;
  for (double v : vals) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / double(vals.size() - 1));
}

double ExperimentResult::mean_gate(int task, int relation, int source) const {
  double sum = 0;
  long count = 0;
  for (const GateDiag& g : gate_diags)
    if (g.task == task && g.relation == relation && g.source == source) {
      sum += g.mean_weight;
      ++count;
    }
  if (count == 0) fail(ErrorKind::contract, "no gate records for that slice");
  return sum / double(count);
}

nlohmann::json ExperimentResult::summary(const GraphSchema& schema) const {
  nlohmann::json j;
  j["variants"] = nlohmann::json::object();
  std::set<int> task_ids;
  for (const ExperimentCell& c : cells) task_ids.insert(c.task);
  for (const std::string& vn : variants) {
    nlohmann::json vj = nlohmann::json::object();
    for (int t : task_ids) {
      nlohmann::json tj;
      for (const char* m : {"micro_f1", "macro_f1"}) {
        tj[m]["mean"] = mean_metric(vn, t, m);
        tj[m]["std"] = std_metric(vn, t, m);
      }
      vj[schema.tasks[size_t(t)].name] = std::move(tj);
    }
    j["variants"][vn] = std::move(vj);
  }
  if (!gate_diags.empty()) {
    std::set<std::tuple<int, int, int>> keys;
    for (const GateDiag& g : gate_diags)
      keys.insert({g.task, g.relation, g.source});
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [t, r, s] : keys) {
      nlohmann::json gj;
      gj["task"] = schema.tasks[size_t(t)].name;
      gj["relation"] = schema.relations[size_t(r)].name;
      gj["source"] = schema.tasks[size_t(s)].name;
      gj["mean_weight"] = mean_gate(t, r, s);
      arr.push_back(std::move(gj));
    }
    j["gate_mean_weights"] = std::move(arr);
  }
  return j;
}

void write_experiment(const ExperimentResult& res, const GraphSchema& schema,
                      const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(dir + "/results.csv");
  if (!csv) fail(ErrorKind::io, "cannot write " + dir + "/results.csv");
  csv << "variant,task,seed,micro_f1,macro_f1,auc,ap\n";
  for (const ExperimentCell& c : res.cells) {
    csv << c.variant << ',' << schema.tasks[size_t(c.task)].name << ','
        << c.seed << ',' << c.metrics.micro_f1 << ',' << c.metrics.macro_f1
        << ',';
    if (!std::isnan(c.metrics.auc)) csv << c.metrics.auc;
    csv << ',';
    if (!std::isnan(c.metrics.ap)) csv << c.metrics.ap;
    csv << '\n';
  }
  if (!csv) fail(ErrorKind::io, "failed writing " + dir + "/results.csv");

  nlohmann::json j;
  j["config"] = res.config;
  j["summary"] = res.summary(schema);
  j["cells"] = nlohmann::json::array();
  for (const ExperimentCell& c : res.cells) {
    nlohmann::json cj;
    cj["variant"] = c.variant;
    cj["task"] = schema.tasks[size_t(c.task)].name;
    cj["seed"] = c.seed;
    cj["metrics"] = c.metrics.to_json();
    j["cells"].push_back(std::move(cj));
  }
  std::ofstream jf(dir + "/results.json");
  if (!jf) fail(ErrorKind::io, "cannot write " + dir + "/results.json");
  jf << j.dump(2) << '\n';
}

}  // namespace struchis
