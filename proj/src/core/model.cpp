#include "core/model.hpp"

#include <algorithm>
#include <set>

#include "core/layers.hpp"

namespace struchis {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::struchis: return "struchis";
    case Variant::stl: return "stl";
    case Variant::shared_backbone: return "shared_backbone";
    case Variant::moe_experts: return "moe_experts";
    case Variant::ablation_no_r: return "ablation_no_r";
    case Variant::ablation_no_r_no_l: return "ablation_no_r_no_l";
  }
  fail(ErrorKind::contract, "unhandled variant value");
}

Variant variant_from_name(const std::string& s) {
  for (Variant v :
       {Variant::struchis, Variant::stl, Variant::shared_backbone,
        Variant::moe_experts, Variant::ablation_no_r,
        Variant::ablation_no_r_no_l})
    if (variant_name(v) == s) return v;
  fail(ErrorKind::config, "unknown variant: " + s);
}

std::pair<Variant, std::vector<bool>> parse_variant_setting(
    const std::string& name, int num_layers) {
  auto colon = name.find(':');
  if (colon == std::string::npos) return {variant_from_name(name), {}};
  Variant v = variant_from_name(name.substr(0, colon));
  if (v != Variant::struchis)
    fail(ErrorKind::config, "layer masks only apply to struchis: " + name);
  std::string bits = name.substr(colon + 1);
  if (int(bits.size()) != num_layers)
    fail(ErrorKind::config, "mask " + bits + " must have one bit per layer");
  std::vector<bool> mask;
  for (char c : bits) {
    if (c != '0' && c != '1')
      fail(ErrorKind::config, "mask bits must be 0 or 1: " + name);
    mask.push_back(c == '1');
  }
  return {v, mask};
}

namespace {

template <class V>
V field(const nlohmann::json& j, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::config, std::string("model config: bad value for ") + key);
  }
}

}  // namespace

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object())
    fail(ErrorKind::config, "model config must be a JSON object");
  static const std::set<std::string> known = {
      "variant",        "num_tasks",       "num_layers",
      "hidden_dim",     "attention_heads", "head_hidden_layers",
      "attn_leaky",     "gate_mode",       "layer_share_mask",
      "stl_task",       "moe_num_experts", "task_loss_weights",
      "seed"};
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      fail(ErrorKind::config, "model config: unknown field " + item.key());
  if (!j.contains("variant"))
    fail(ErrorKind::config, "model config: missing field variant");

  ModelConfig c;
  c.variant = variant_from_name(field<std::string>(j, "variant", ""));
  c.num_tasks = field(j, "num_tasks", c.num_tasks);
  c.num_layers = field(j, "num_layers", c.num_layers);
  c.hidden_dim = field(j, "hidden_dim", c.hidden_dim);
  c.attention_heads = field(j, "attention_heads", c.attention_heads);
  c.head_hidden_layers = field(j, "head_hidden_layers", c.head_hidden_layers);
  c.attn_leaky = field(j, "attn_leaky", c.attn_leaky);
  std::string gm = field<std::string>(j, "gate_mode", "learned");
  if (gm == "learned")
    c.gate_mode = GateMode::learned;
  else if (gm == "force_own")
    c.gate_mode = GateMode::force_own;
  else
    fail(ErrorKind::config, "model config: bad value for gate_mode: " + gm);
  c.layer_share_mask =
      field(j, "layer_share_mask", std::vector<bool>{});
  c.stl_task = field(j, "stl_task", c.stl_task);
  c.moe_num_experts = field(j, "moe_num_experts", c.moe_num_experts);
  c.task_loss_weights =
      field(j, "task_loss_weights", std::vector<double>{});
  c.seed = field<uint64_t>(j, "seed", c.seed);
  return c;
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["variant"] = variant_name(variant);
  j["num_tasks"] = num_tasks;
  j["num_layers"] = num_layers;
  j["hidden_dim"] = hidden_dim;
  j["attention_heads"] = attention_heads;
  j["head_hidden_layers"] = head_hidden_layers;
  j["attn_leaky"] = attn_leaky;
  j["gate_mode"] =
      gate_mode == GateMode::learned ? "learned" : "force_own";
  j["layer_share_mask"] = layer_share_mask;
  j["stl_task"] = stl_task;
  j["moe_num_experts"] = moe_num_experts;
  j["task_loss_weights"] = task_loss_weights;
  j["seed"] = seed;
  return j;
}

void ModelConfig::validate(const GraphSchema& schema) const {
  int T = int(schema.tasks.size());
  if (T == 0) fail(ErrorKind::config, "graph declares no tasks");
  if (num_tasks != T)
    fail(ErrorKind::config,
         "num_tasks " + std::to_string(num_tasks) +
             " does not match the graph's " + std::to_string(T) + " tasks");
  if (num_layers < 1) fail(ErrorKind::config, "num_layers must be >= 1");
  if (hidden_dim < 1) fail(ErrorKind::config, "hidden_dim must be >= 1");
  if (attention_heads < 1 || hidden_dim % attention_heads != 0)
    fail(ErrorKind::config, "attention_heads must divide hidden_dim");
  if (head_hidden_layers < 0)
    fail(ErrorKind::config, "head_hidden_layers must be >= 0");
  if (!layer_share_mask.empty()) {
    if (variant != Variant::struchis)
      fail(ErrorKind::config,
           "layer_share_mask only applies to variant struchis");
    if (int(layer_share_mask.size()) != num_layers)
      fail(ErrorKind::config,
           "layer_share_mask length " +
               std::to_string(layer_share_mask.size()) +
               " must equal num_layers " + std::to_string(num_layers));
    if (std::none_of(layer_share_mask.begin(), layer_share_mask.end(),
                     [](bool b) { return b; }))
      fail(ErrorKind::config,
           "struchis with an all-false layer_share_mask shares nothing; use "
           "variant ablation_no_r_no_l");
  }
  if (variant == Variant::stl && (stl_task < 0 || stl_task >= T))
    fail(ErrorKind::config, "stl_task out of range");
  if (variant == Variant::moe_experts && moe_num_experts < 1)
    fail(ErrorKind::config, "moe_num_experts must be >= 1");
  bool task_gated = variant == Variant::struchis ||
                    variant == Variant::ablation_no_r ||
                    variant == Variant::ablation_no_r_no_l;
  if (gate_mode == GateMode::force_own && !task_gated)
    fail(ErrorKind::config,
         "gate_mode force_own requires a task-gated variant");
  if (!task_loss_weights.empty()) {
    if (int(task_loss_weights.size()) != T)
      fail(ErrorKind::config, "task_loss_weights needs one value per task");
    for (double w : task_loss_weights)
      if (!std::isfinite(w) || w < 0)
        fail(ErrorKind::config, "task_loss_weights must be finite and >= 0");
  }
}

int StreamLayout::stream_for_task(int task) const {
  switch (variant) {
    case Variant::stl:
    case Variant::shared_backbone:
      return 0;
    case Variant::struchis:
    case Variant::ablation_no_r:
    case Variant::ablation_no_r_no_l:
      return task;
    case Variant::moe_experts:
      return -1;
  }
  return -1;
}

int StreamLayout::serve_index(int task) const {
  for (size_t i = 0; i < served_tasks.size(); ++i)
    if (served_tasks[i] == task) return int(i);
  return -1;
}

StreamLayout stream_layout(const ModelConfig& cfg) {
  StreamLayout lay;
  lay.variant = cfg.variant;
  lay.stl_task = cfg.stl_task;
  switch (cfg.variant) {
    case Variant::stl:
      lay.prefixes = {"task" + std::to_string(cfg.stl_task)};
      lay.served_tasks = {cfg.stl_task};
      break;
    case Variant::shared_backbone:
      lay.prefixes = {"task0"};
      for (int t = 0; t < cfg.num_tasks; ++t) lay.served_tasks.push_back(t);
      break;
    case Variant::moe_experts:
      for (int e = 0; e < cfg.moe_num_experts; ++e)
        lay.prefixes.push_back("expert" + std::to_string(e));
      for (int t = 0; t < cfg.num_tasks; ++t) lay.served_tasks.push_back(t);
      break;
    default:
      for (int t = 0; t < cfg.num_tasks; ++t) {
        lay.prefixes.push_back("task" + std::to_string(t));
        lay.served_tasks.push_back(t);
      }
      lay.streams_are_tasks = true;
      break;
  }
  return lay;
}

namespace {

using ParamFn =
    std::function<void(const std::string&, int, int, InitKind)>;

void for_each_param(const ModelConfig& cfg, const GraphSchema& schema,
                    const ParamFn& f) {
  const int d = cfg.hidden_dim;
  const int T = int(schema.tasks.size());
  StreamLayout lay = stream_layout(cfg);

  for (const auto& pfx : lay.prefixes) {
    for (const auto& nt : schema.node_types) {
      f(pfx + "/proj/node/" + nt.name + "/w", nt.feature_dim, d,
        InitKind::uniform_fanin);
      f(pfx + "/proj/node/" + nt.name + "/b", 1, d, InitKind::zero);
    }
    for (const auto& rs : schema.relations) {
      if (rs.edge_feature_dim > 0) {
        f(pfx + "/proj/edge/" + rs.name + "/w", rs.edge_feature_dim, d,
          InitKind::uniform_fanin);
        f(pfx + "/proj/edge/" + rs.name + "/b", 1, d, InitKind::zero);
      } else {
        // learned constant edge embedding, one row per relation
        f(pfx + "/proj/edge/" + rs.name + "/c", 1, d,
          InitKind::uniform_fanin);
      }
    }
    for (int l = 0; l < cfg.num_layers; ++l) {
      std::string lp = pfx + "/layer" + std::to_string(l);
      for (const auto& rs : schema.relations) {
        f(lp + "/mes/" + rs.name + "/w", d, d, InitKind::uniform_fanin);
        // scores act on [central || neighbor || edge]
        f(lp + "/rel_attn/" + rs.name + "/w", 3 * d, d,
          InitKind::uniform_fanin);
        f(lp + "/rel_attn/" + rs.name + "/a", 1, d, InitKind::uniform_fanin);
      }
      f(lp + "/agg/w", 2 * d, d, InitKind::uniform_fanin);
      f(lp + "/agg/b", 1, d, InitKind::uniform_fanin);
    }
  }

  // Task gate weights start at zero; the bias gets a positive logit on the
  // task's own stream (applied after init below). Without that anchor the
  // uniform mixture is a stable fixed point: every stream receives every
  // task's gradients, streams never specialize, and gates have nothing to
  // choose between.
  if (cfg.variant == Variant::struchis) {
    for (int t = 0; t < T; ++t)
      for (int l = 0; l < cfg.num_layers; ++l) {
        if (!cfg.share_at(l)) continue;
        for (const auto& rs : schema.relations) {
          std::string gp = "task" + std::to_string(t) + "/layer" +
                           std::to_string(l) + "/gate/" + rs.name;
          f(gp + "/w", d, T, InitKind::zero);
          f(gp + "/b", 1, T, InitKind::zero);
        }
      }
  } else if (cfg.variant == Variant::ablation_no_r) {
    for (int t = 0; t < T; ++t)
      for (int l = 0; l < cfg.num_layers; ++l) {
        std::string gp = "task" + std::to_string(t) + "/layer" +
                         std::to_string(l) + "/gate_node";
        f(gp + "/w", d, T, InitKind::zero);
        f(gp + "/b", 1, T, InitKind::zero);
      }
  } else if (cfg.variant == Variant::ablation_no_r_no_l) {
    for (int t = 0; t < T; ++t) {
      std::string gp = "task" + std::to_string(t) + "/final_gate";
      f(gp + "/w", d, T, InitKind::zero);
      f(gp + "/b", 1, T, InitKind::zero);
    }
  } else if (cfg.variant == Variant::moe_experts) {
    std::set<int> target_types;
    for (const auto& ts : schema.tasks) target_types.insert(ts.target_type);
    for (int ty : target_types) {
      const auto& nt = schema.node_types[size_t(ty)];
      f("moe/selector/" + nt.name + "/w", nt.feature_dim, d,
        InitKind::uniform_fanin);
      f("moe/selector/" + nt.name + "/b", 1, d, InitKind::zero);
    }
    for (int t = 0; t < T; ++t) {
      std::string gp = "task" + std::to_string(t) + "/moe_gate";
      f(gp + "/w", d, cfg.moe_num_experts, InitKind::zero);
      f(gp + "/b", 1, cfg.moe_num_experts, InitKind::zero);
    }
  }

  for (int t : lay.served_tasks) {
    std::string hp = "task" + std::to_string(t) + "/head";
    for (int k = 0; k < cfg.head_hidden_layers; ++k) {
      f(hp + "/fc" + std::to_string(k) + "/w", d, d, InitKind::uniform_fanin);
      f(hp + "/fc" + std::to_string(k) + "/b", 1, d, InitKind::zero);
    }
    f(hp + "/out/w", d, schema.tasks[size_t(t)].num_classes,
      InitKind::uniform_fanin);
    f(hp + "/out/b", 1, schema.tasks[size_t(t)].num_classes, InitKind::zero);
  }
}

}  // namespace

template <class T>
ParamStore<T> build_variant(const ModelConfig& cfg,
                            const GraphSchema& schema) {
  cfg.validate(schema);
  ParamStore<T> ps;
  for_each_param(cfg, schema,
                 [&](const std::string& path, int rows, int cols,
                     InitKind kind) { ps.add(path, rows, cols, kind, cfg.seed); });
  // Anchor every task gate on its own stream (see the note above the gate
  // block in for_each_param). Expert gates have no owned stream and stay flat.
  for (auto& e : ps.entries) {
    bool task_gate_bias = e.path.find("/gate/") != std::string::npos
                              ? e.path.size() >= 2 &&
                                    e.path.compare(e.path.size() - 2, 2, "/b") == 0
                              : e.path.ends_with("/gate_node/b") ||
                                    e.path.ends_with("/final_gate/b");
    if (!task_gate_bias || e.path.rfind("task", 0) != 0) continue;
    int t = std::atoi(e.path.c_str() + 4);
    if (t >= 0 && t < e.value.cols)
      e.value.at(0, t) = T(kOwnStreamGateLogit);
  }
  return ps;
}

template <class T>
ModelRun<T>::ModelRun(const ModelConfig& cfg, const HeteroGraph& g,
                      const GraphPlan& plan, const ParamStore<T>& ps)
    : cfg_(cfg), g_(g), plan_(plan), ps_(ps), layout_(stream_layout(cfg)) {
  cfg.validate(g.schema);
  param_ids_.reserve(ps.entries.size());
  for (const auto& e : ps.entries) param_ids_.push_back(tape_.input(e.value));
  feat_ids_.resize(g.schema.node_types.size());
  for (size_t ty = 0; ty < feat_ids_.size(); ++ty)
    feat_ids_[ty] = tape_.input(cast_mat<T>(g.node_features[ty]));
  efeat_ids_.assign(g.schema.relations.size(), -1);
  for (size_t r = 0; r < efeat_ids_.size(); ++r)
    if (g.schema.relations[r].edge_feature_dim > 0 &&
        g.relations[r].num_edges() > 0)
      efeat_ids_[r] = tape_.input(cast_mat<T>(g.relations[r].edge_features));
}

template <class T>
int ModelRun<T>::pid(const std::string& path) const {
  int i = ps_.id(path);
  if (i < 0) fail(ErrorKind::contract, "parameters are missing " + path);
  return param_ids_[size_t(i)];
}

template <class T>
int ModelRun<T>::project_type(const std::string& pfx, int ty) {
  const std::string& name = g_.schema.node_types[size_t(ty)].name;
  return tape_.linear(feat_ids_[size_t(ty)],
                      pid(pfx + "/proj/node/" + name + "/w"),
                      pid(pfx + "/proj/node/" + name + "/b"));
}

template <class T>
int ModelRun<T>::edge_embed(const std::string& pfx, int rel) {
  const RelationSpec& rs = g_.schema.relations[size_t(rel)];
  if (rs.edge_feature_dim > 0)
    return tape_.linear(efeat_ids_[size_t(rel)],
                        pid(pfx + "/proj/edge/" + rs.name + "/w"),
                        pid(pfx + "/proj/edge/" + rs.name + "/b"));
  return tape_.broadcast_row(pid(pfx + "/proj/edge/" + rs.name + "/c"),
                             g_.relations[size_t(rel)].num_edges());
}

template <class T>
void ModelRun<T>::record_trace(const char* kind, int task, int layer,
                               int weights_id, const IndexVec& nodes,
                               const IndexVec& rels, int fixed_rel,
                               bool per_column) {
  const Mat<T>& w = tape_.val(weights_id);
  for (int i = 0; i < w.rows; ++i) {
    int node = nodes ? (*nodes)[size_t(i)] : i;
    int rel = rels ? (*rels)[size_t(i)] : fixed_rel;
    if (per_column) {
      for (int j = 0; j < w.cols; ++j)
        trace_.records.push_back(
            {kind, task, layer, rel, node, j, double(w.at(i, j))});
    } else {
      double mean = 0;
      for (int j = 0; j < w.cols; ++j) mean += double(w.at(i, j));
      mean /= double(w.cols);
      trace_.records.push_back({kind, task, layer, rel, node, -1, mean});
    }
  }
}

template <class T>
void ModelRun<T>::forward(bool want_trace) {
  if (ran_) fail(ErrorKind::contract, "forward already ran on this tape");
  ran_ = true;
  want_trace_ = want_trace;
  const GraphSchema& schema = g_.schema;
  const int S = layout_.num_streams();
  const int NT = int(schema.node_types.size());
  const int NR = int(schema.relations.size());
  const T slope = T(0.01);

  std::vector<int> active;
  for (int r = 0; r < NR; ++r)
    if (plan_.relations[size_t(r)].num_edges > 0) active.push_back(r);

  h_.assign(size_t(S), std::vector<int>(size_t(NT), -1));
  std::vector<std::vector<int>> he(size_t(S), std::vector<int>(size_t(NR), -1));
  for (int s = 0; s < S; ++s) {
    const std::string& pfx = layout_.prefixes[size_t(s)];
    for (int ty = 0; ty < NT; ++ty) h_[size_t(s)][size_t(ty)] = project_type(pfx, ty);
    for (int r : active) he[size_t(s)][size_t(r)] = edge_embed(pfx, r);
  }

  const bool task_gates =
      layout_.streams_are_tasks && cfg_.gate_mode == GateMode::learned;

  for (int l = 0; l < cfg_.num_layers; ++l) {
    const std::string ln = "/layer" + std::to_string(l);

    std::vector<std::vector<int>> h_rel(size_t(S),
                                        std::vector<int>(size_t(NR), -1));
    for (int s = 0; s < S; ++s) {
      const std::string& pfx = layout_.prefixes[size_t(s)];
      for (int r : active) {
        const RelationPlan& rp = plan_.relations[size_t(r)];
        const std::string& rn = schema.relations[size_t(r)].name;
        int src_rows = tape_.gather_rows(h_[size_t(s)][size_t(rp.src_type)],
                                         rp.edge_src);
        int msgs = message(tape_, src_rows, pid(pfx + ln + "/mes/" + rn + "/w"));
        int central = tape_.gather_rows(h_[size_t(s)][size_t(rp.dst_type)],
                                        rp.edge_dst);
        RelationAggOut out = relation_aggregate(
            tape_, central, src_rows, msgs, he[size_t(s)][size_t(r)],
            rp.group_offsets, pid(pfx + ln + "/rel_attn/" + rn + "/w"),
            pid(pfx + ln + "/rel_attn/" + rn + "/a"), cfg_.attention_heads,
            cfg_.attn_leaky);
        h_rel[size_t(s)][size_t(r)] = out.h_rel;
        if (want_trace_)
          record_trace("alpha", s, l, out.alpha, rp.edge_dst, nullptr, r,
                       false);
      }
    }

    // relation-level selective sharing
    std::vector<std::vector<int>> mixed = h_rel;
    if (cfg_.variant == Variant::struchis && cfg_.share_at(l) && task_gates) {
      for (int t = 0; t < S; ++t) {
        for (int r : active) {
          const RelationPlan& rp = plan_.relations[size_t(r)];
          const std::string gp = "task" + std::to_string(t) + ln + "/gate/" +
                                 schema.relations[size_t(r)].name;
          int sel = tape_.gather_rows(h_[size_t(t)][size_t(rp.dst_type)],
                                      rp.group_dst);
          int w = gate_weights(tape_, sel, pid(gp + "/w"), pid(gp + "/b"));
          std::vector<int> parts;
          for (int j = 0; j < S; ++j) parts.push_back(h_rel[size_t(j)][size_t(r)]);
          mixed[size_t(t)][size_t(r)] = gate_combine(tape_, w, parts);
          if (want_trace_)
            record_trace("gate", t, l, w, rp.group_dst, nullptr, r, true);
        }
      }
    }

    std::vector<std::vector<int>> next(size_t(S),
                                       std::vector<int>(size_t(NT), -1));
    for (int s = 0; s < S; ++s) {
      const std::string& pfx = layout_.prefixes[size_t(s)];
      for (int ty = 0; ty < NT; ++ty) {
        const TypePlan& tpn = plan_.types[size_t(ty)];
        int h_prev = h_[size_t(s)][size_t(ty)];
        if (tpn.num_slots == 0) {
          next[size_t(s)][size_t(ty)] = tape_.leaky_relu(h_prev, slope);
          continue;
        }
        std::vector<int> stack_parts;
        for (int r : tpn.rels_here)
          stack_parts.push_back(mixed[size_t(s)][size_t(r)]);
        int stacked = stack_parts.size() == 1 ? stack_parts[0]
                                              : tape_.vconcat(stack_parts);
        int slot_rows = tape_.gather_rows(stacked, tpn.slot_stack_row);
        int central = tape_.gather_rows(h_prev, tpn.slot_node);
        CrossAggOut out = cross_relation_aggregate(
            tape_, h_prev, central, slot_rows, tpn.node_offsets,
            tpn.covered_nodes, pid(pfx + ln + "/agg/w"),
            pid(pfx + ln + "/agg/b"), cfg_.attention_heads, slope);
        next[size_t(s)][size_t(ty)] = out.h_out;
        if (want_trace_ && out.beta >= 0)
          record_trace("beta", s, l, out.beta, tpn.slot_node, tpn.slot_rel, -1,
                       false);
      }
    }

    // node-level selective sharing over the layer outputs
    if (cfg_.variant == Variant::ablation_no_r && task_gates) {
      std::vector<std::vector<int>> gated(size_t(S),
                                          std::vector<int>(size_t(NT), -1));
      for (int t = 0; t < S; ++t) {
        const std::string gp =
            "task" + std::to_string(t) + ln + "/gate_node";
        int gw = pid(gp + "/w"), gb = pid(gp + "/b");
        for (int ty = 0; ty < NT; ++ty) {
          int w = gate_weights(tape_, h_[size_t(t)][size_t(ty)], gw, gb);
          std::vector<int> parts;
          for (int j = 0; j < S; ++j) parts.push_back(next[size_t(j)][size_t(ty)]);
          gated[size_t(t)][size_t(ty)] = gate_combine(tape_, w, parts);
          if (want_trace_)
            record_trace("gate", t, l, w, nullptr, nullptr, -1, true);
        }
      }
      next = gated;
    }
    h_ = next;
  }

  task_embed_.assign(layout_.served_tasks.size(), -1);
  for (size_t i = 0; i < layout_.served_tasks.size(); ++i) {
    int t = layout_.served_tasks[i];
    int tt = schema.tasks[size_t(t)].target_type;
    switch (cfg_.variant) {
      case Variant::stl:
      case Variant::shared_backbone:
        task_embed_[i] = h_[0][size_t(tt)];
        break;
      case Variant::struchis:
      case Variant::ablation_no_r:
        task_embed_[i] = h_[size_t(t)][size_t(tt)];
        break;
      case Variant::ablation_no_r_no_l: {
        if (!task_gates) {
          task_embed_[i] = h_[size_t(t)][size_t(tt)];
          break;
        }
        const std::string gp = "task" + std::to_string(t) + "/final_gate";
        int w = gate_weights(tape_, h_[size_t(t)][size_t(tt)], pid(gp + "/w"),
                             pid(gp + "/b"));
        std::vector<int> parts;
        for (int j = 0; j < S; ++j) parts.push_back(h_[size_t(j)][size_t(tt)]);
        task_embed_[i] = gate_combine(tape_, w, parts);
        if (want_trace_)
          record_trace("gate", t, -1, w, nullptr, nullptr, -1, true);
        break;
      }
      case Variant::moe_experts: {
        const std::string& tn = schema.node_types[size_t(tt)].name;
        int sel = tape_.linear(feat_ids_[size_t(tt)],
                               pid("moe/selector/" + tn + "/w"),
                               pid("moe/selector/" + tn + "/b"));
        const std::string gp = "task" + std::to_string(t) + "/moe_gate";
        int w = gate_weights(tape_, sel, pid(gp + "/w"), pid(gp + "/b"));
        std::vector<int> parts;
        for (int j = 0; j < S; ++j) parts.push_back(h_[size_t(j)][size_t(tt)]);
        task_embed_[i] = gate_combine(tape_, w, parts);
        if (want_trace_)
          record_trace("gate", t, -1, w, nullptr, nullptr, -1, true);
        break;
      }
    }
  }
}

template <class T>
int ModelRun<T>::head(int task, int x) {
  const std::string hp = "task" + std::to_string(task) + "/head";
  for (int k = 0; k < cfg_.head_hidden_layers; ++k) {
    x = tape_.linear(x, pid(hp + "/fc" + std::to_string(k) + "/w"),
                     pid(hp + "/fc" + std::to_string(k) + "/b"));
    x = tape_.leaky_relu(x, T(0));
  }
  return tape_.linear(x, pid(hp + "/out/w"), pid(hp + "/out/b"));
}

template <class T>
int ModelRun<T>::task_embed(int task) const {
  int i = layout_.serve_index(task);
  if (i < 0)
    fail(ErrorKind::contract,
         "model does not serve task " + std::to_string(task));
  if (!ran_) fail(ErrorKind::contract, "forward has not run");
  return task_embed_[size_t(i)];
}

template <class T>
int ModelRun<T>::logits(int task, const std::vector<int>& rows) {
  int embed = task_embed(task);
  int x = tape_.gather_rows(embed, make_index(rows));
  return head(task, x);
}

template <class T>
int ModelRun<T>::loss() {
  int total = -1;
  for (int t : layout_.served_tasks) {
    const std::vector<Target>& targets = g_.targets[size_t(t)];
    if (targets.empty()) continue;
    int lg = logits(t, target_rows(targets));
    const TaskSpec& spec = g_.schema.tasks[size_t(t)];
    int lt = spec.kind == TaskKind::single_label
                 ? tape_.cross_entropy(lg, single_label_vector(targets))
                 : tape_.binary_cross_entropy(
                       lg, multi_label_matrix<T>(targets, spec.num_classes));
    double w = cfg_.task_weight(t);
    if (w != 1.0) lt = tape_.scale(lt, T(w));
    total = total < 0 ? lt : tape_.add(total, lt);
  }
  if (total < 0)
    fail(ErrorKind::contract,
         "no labeled targets in the graph for any served task");
  return total;
}

IndexVec single_label_vector(const std::vector<Target>& targets) {
  std::vector<int> y;
  y.reserve(targets.size());
  for (const Target& t : targets) {
    if (t.y.size() != 1)
      fail(ErrorKind::contract, "single-label target carries " +
                                    std::to_string(t.y.size()) + " labels");
    y.push_back(t.y[0]);
  }
  return make_index(std::move(y));
}

template <class T>
Mat<T> multi_label_matrix(const std::vector<Target>& targets,
                          int num_classes) {
  Mat<T> m(int(targets.size()), num_classes);
  for (size_t i = 0; i < targets.size(); ++i)
    for (int c : targets[i].y) {
      if (c < 0 || c >= num_classes)
        fail(ErrorKind::contract, "label class out of range");
      m.at(int(i), c) = T(1);
    }
  return m;
}

std::vector<int> target_rows(const std::vector<Target>& targets) {
  std::vector<int> rows;
  rows.reserve(targets.size());
  for (const Target& t : targets) rows.push_back(t.node);
  return rows;
}

template class ModelRun<float>;
template class ModelRun<double>;
template ParamStore<float> build_variant<float>(const ModelConfig&,
                                                const GraphSchema&);
template ParamStore<double> build_variant<double>(const ModelConfig&,
                                                  const GraphSchema&);
template Mat<float> multi_label_matrix<float>(const std::vector<Target>&, int);
template Mat<double> multi_label_matrix<double>(const std::vector<Target>&,
                                                int);

}  // namespace struchis
