#include "core/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "core/common.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace struchis {

const char* task_kind_name(TaskKind k) {
  return k == TaskKind::single_label ? "single_label" : "multi_label";
}

TaskKind task_kind_from_name(const std::string& s) {
  if (s == "single_label") return TaskKind::single_label;
  if (s == "multi_label") return TaskKind::multi_label;
  fail(ErrorKind::schema, "unknown task kind: " + s);
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

int GraphSchema::type_id(const std::string& name) const {
  for (size_t i = 0; i < node_types.size(); ++i)
    if (node_types[i].name == name) return int(i);
  return -1;
}

int GraphSchema::relation_id(const std::string& name) const {
  for (size_t i = 0; i < relations.size(); ++i)
    if (relations[i].name == name) return int(i);
  return -1;
}

int GraphSchema::task_id(const std::string& name) const {
  for (size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i].name == name) return int(i);
  return -1;
}

int HeteroGraph::total_nodes() const {
  int n = 0;
  for (const auto& f : node_features) n += f.rows;
  return n;
}

int HeteroGraph::total_edges() const {
  int n = 0;
  for (const auto& r : relations) n += r.num_edges();
  return n;
}

void HeteroGraph::canonicalize() {
  for (auto& rel : relations) {
    int m = rel.num_edges();
    std::vector<int> order(static_cast<size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (rel.dst[size_t(a)] != rel.dst[size_t(b)])
        return rel.dst[size_t(a)] < rel.dst[size_t(b)];
      if (rel.src[size_t(a)] != rel.src[size_t(b)])
        return rel.src[size_t(a)] < rel.src[size_t(b)];
      return a < b;
    });
    std::vector<int> nsrc(static_cast<size_t>(m)), ndst(static_cast<size_t>(m));
    MatD nfeat;
    bool feats = rel.edge_features.cols > 0;
    if (feats) nfeat = MatD(m, rel.edge_features.cols);
    for (int i = 0; i < m; ++i) {
      int o = order[size_t(i)];
      nsrc[size_t(i)] = rel.src[size_t(o)];
      ndst[size_t(i)] = rel.dst[size_t(o)];
      if (feats)
        for (int j = 0; j < rel.edge_features.cols; ++j)
          nfeat.at(i, j) = rel.edge_features.at(o, j);
    }
    rel.src = std::move(nsrc);
    rel.dst = std::move(ndst);
    if (feats) rel.edge_features = std::move(nfeat);
  }
  for (auto& ts : targets) {
    std::stable_sort(ts.begin(), ts.end(),
                     [](const Target& a, const Target& b) {
                       return a.node < b.node;
                     });
  }
}

// ---- validation -----------------------------------------------------------

ValidationReport validate(const HeteroGraph& g) {
  ValidationReport rep;
  auto add = [&](std::string code, std::string msg, std::string where) {
    rep.findings.push_back({std::move(code), std::move(msg), std::move(where)});
  };

  for (size_t t = 0; t < g.schema.node_types.size(); ++t) {
    const auto& spec = g.schema.node_types[t];
    const MatD& f = g.node_features[t];
    if (f.cols != spec.feature_dim)
      add("feature_dim_mismatch",
          "feature matrix has " + std::to_string(f.cols) +
              " columns, schema declares " + std::to_string(spec.feature_dim),
          "node type " + spec.name);
    if (!f.all_finite())
      add("nonfinite_feature", "feature matrix contains non-finite values",
          "node type " + spec.name);
  }

  for (size_t r = 0; r < g.schema.relations.size(); ++r) {
    const auto& spec = g.schema.relations[r];
    const auto& rel = g.relations[r];
    int ns = g.num_nodes(spec.src_type);
    int nd = g.num_nodes(spec.dst_type);
    bool sorted = true;
    for (int i = 0; i < rel.num_edges(); ++i) {
      int s = rel.src[size_t(i)];
      int d = rel.dst[size_t(i)];
      if (s < 0 || s >= ns || d < 0 || d >= nd) {
        add("dangling_endpoint",
            "edge " + std::to_string(i) + " (" + std::to_string(s) + "->" +
                std::to_string(d) + ") leaves node range",
            "relation " + spec.name);
        continue;
      }
      if (i > 0) {
        int ps = rel.src[size_t(i) - 1];
        int pd = rel.dst[size_t(i) - 1];
        if (pd > d || (pd == d && ps > s)) sorted = false;
        if (pd == d && ps == s)
          add("duplicate_edge",
              "edge " + std::to_string(s) + "->" + std::to_string(d) +
                  " appears more than once",
              "relation " + spec.name);
      }
    }
    if (!sorted)
      add("unsorted_edges", "edges are not in (dst, src) order",
          "relation " + spec.name);
    if (spec.edge_feature_dim > 0) {
      if (rel.edge_features.rows != rel.num_edges() ||
          rel.edge_features.cols != spec.edge_feature_dim)
        add("edge_feature_shape",
            "edge feature matrix is " + rel.edge_features.shape_str() +
                ", expected " + std::to_string(rel.num_edges()) + "x" +
                std::to_string(spec.edge_feature_dim),
            "relation " + spec.name);
      else if (!rel.edge_features.all_finite())
        add("nonfinite_feature",
            "edge feature matrix contains non-finite values",
            "relation " + spec.name);
    }
  }

  for (size_t t = 0; t < g.schema.tasks.size(); ++t) {
    const auto& spec = g.schema.tasks[t];
    std::unordered_set<int> seen;
    for (size_t i = 0; i < g.targets[t].size(); ++i) {
      const Target& tg = g.targets[t][i];
      if (tg.node_type != spec.target_type) {
        add("wrong_target_type",
            "target node " + std::to_string(tg.node) +
                " has node type id " + std::to_string(tg.node_type) +
                ", task targets type id " + std::to_string(spec.target_type),
            "task " + spec.name);
        continue;
      }
      if (tg.node < 0 || tg.node >= g.num_nodes(spec.target_type))
        add("dangling_target",
            "target node " + std::to_string(tg.node) + " leaves node range",
            "task " + spec.name);
      if (!seen.insert(tg.node).second)
        add("duplicate_label",
            "node " + std::to_string(tg.node) + " is labeled more than once",
            "task " + spec.name);
      if (spec.kind == TaskKind::single_label && tg.y.size() != 1)
        add("label_kind_mismatch",
            "single_label target must carry exactly one class",
            "task " + spec.name);
      for (size_t k = 0; k < tg.y.size(); ++k) {
        int y = tg.y[k];
        if (y < 0 || y >= spec.num_classes)
          add("label_out_of_range",
              "class " + std::to_string(y) + " outside 0.." +
                  std::to_string(spec.num_classes - 1),
              "task " + spec.name);
        if (k > 0 && tg.y[k - 1] >= y)
          add("label_kind_mismatch",
              "multi_label classes must be strictly increasing",
              "task " + spec.name);
      }
    }
  }
  return rep;
}

// ---- load / write ----------------------------------------------------------

namespace {

[[noreturn]] void at_line(const std::string& file, int line,
                          const std::string& msg) {
  fail(ErrorKind::schema, file + ":" + std::to_string(line) + ": " + msg);
}

json parse_line(const std::string& file, int line, const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) at_line(file, line, "malformed JSON");
  return j;
}

double finite_number(const json& v, const std::string& file, int line) {
  if (!v.is_number()) at_line(file, line, "expected a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) at_line(file, line, "non-finite number");
  return x;
}

int require_int(const json& j, const char* key, const std::string& file,
                int line) {
  if (!j.contains(key) || !j[key].is_number_integer())
    at_line(file, line, std::string("missing integer field \"") + key + "\"");
  return j[key].get<int>();
}

std::ifstream open_for_read(const fs::path& p) {
  std::ifstream in(p);
  if (!in) fail(ErrorKind::io, "cannot open " + p.string());
  return in;
}

}  // namespace

HeteroGraph load_graph(const std::string& dir) {
  fs::path root(dir);
  fs::path schema_path = root / "schema.json";
  if (!fs::exists(schema_path))
    fail(ErrorKind::io, "missing " + schema_path.string());

  json js;
  {
    std::ifstream in = open_for_read(schema_path);
    js = json::parse(in, nullptr, false);
    if (js.is_discarded())
      fail(ErrorKind::schema, schema_path.string() + ": malformed JSON");
  }

  HeteroGraph g;
  const std::string sfile = schema_path.string();
  if (!js.contains("node_types") || !js["node_types"].is_array() ||
      js["node_types"].empty())
    fail(ErrorKind::schema, sfile + ": \"node_types\" must be a nonempty array");
  for (const auto& nt : js["node_types"]) {
    NodeTypeSpec spec;
    spec.name = nt.value("name", std::string());
    spec.feature_dim = nt.value("feature_dim", -1);
    if (spec.name.empty() || spec.feature_dim < 1)
      fail(ErrorKind::schema, sfile + ": node type needs name and feature_dim");
    if (g.schema.type_id(spec.name) >= 0)
      fail(ErrorKind::schema, sfile + ": duplicate node type " + spec.name);
    g.schema.node_types.push_back(spec);
  }
  for (const auto& rl : js.value("relations", json::array())) {
    RelationSpec spec;
    spec.name = rl.value("name", std::string());
    spec.src_type = g.schema.type_id(rl.value("src", std::string()));
    spec.dst_type = g.schema.type_id(rl.value("dst", std::string()));
    spec.edge_feature_dim = rl.value("edge_feature_dim", 0);
    if (spec.name.empty() || spec.src_type < 0 || spec.dst_type < 0)
      fail(ErrorKind::schema,
           sfile + ": relation " + spec.name + " has unknown endpoint type");
    if (spec.edge_feature_dim < 0)
      fail(ErrorKind::schema, sfile + ": negative edge_feature_dim");
    if (g.schema.relation_id(spec.name) >= 0)
      fail(ErrorKind::schema, sfile + ": duplicate relation " + spec.name);
    g.schema.relations.push_back(spec);
  }
  for (const auto& tk : js.value("tasks", json::array())) {
    TaskSpec spec;
    spec.name = tk.value("name", std::string());
    spec.target_type = g.schema.type_id(tk.value("target_type", std::string()));
    spec.kind = task_kind_from_name(tk.value("kind", std::string()));
    spec.num_classes = tk.value("num_classes", -1);
    if (spec.name.empty() || spec.target_type < 0 || spec.num_classes < 2)
      fail(ErrorKind::schema,
           sfile + ": task " + spec.name + " needs target_type and >=2 classes");
    if (g.schema.task_id(spec.name) >= 0)
      fail(ErrorKind::schema, sfile + ": duplicate task " + spec.name);
    g.schema.tasks.push_back(spec);
  }

  // Node files. Ids must be a dense 0..n-1 cover; rows land at their id.
  for (const auto& spec : g.schema.node_types) {
    fs::path p = root / ("nodes_" + spec.name + ".jsonl");
    std::ifstream in = open_for_read(p);
    std::string text;
    std::vector<std::vector<double>> rows;
    std::vector<int> ids;
    int line = 0;
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) continue;
      json j = parse_line(p.string(), line, text);
      int id = require_int(j, "id", p.string(), line);
      if (!j.contains("x") || !j["x"].is_array())
        at_line(p.string(), line, "missing feature array \"x\"");
      if (int(j["x"].size()) != spec.feature_dim)
        at_line(p.string(), line,
                "feature length " + std::to_string(j["x"].size()) +
                    " != feature_dim " + std::to_string(spec.feature_dim));
      std::vector<double> x;
      x.reserve(j["x"].size());
      for (const auto& v : j["x"])
        x.push_back(finite_number(v, p.string(), line));
      ids.push_back(id);
      rows.push_back(std::move(x));
    }
    int n = int(rows.size());
    std::vector<bool> seen(size_t(n), false);
    MatD feats(n, spec.feature_dim);
    for (int i = 0; i < n; ++i) {
      int id = ids[size_t(i)];
      if (id < 0 || id >= n || seen[size_t(id)])
        fail(ErrorKind::schema,
             p.string() + ": node ids must be a dense unique 0.." +
                 std::to_string(n - 1) + " cover (got " + std::to_string(id) +
                 ")");
      seen[size_t(id)] = true;
      for (int j = 0; j < spec.feature_dim; ++j)
        feats.at(id, j) = rows[size_t(i)][size_t(j)];
    }
    g.node_features.push_back(std::move(feats));
  }

  // Edge files.
  for (const auto& spec : g.schema.relations) {
    fs::path p = root / ("edges_" + spec.name + ".jsonl");
    std::ifstream in = open_for_read(p);
    RelationData rel;
    std::vector<std::vector<double>> feats;
    std::string text;
    int line = 0;
    int ns = g.num_nodes(spec.src_type);
    int nd = g.num_nodes(spec.dst_type);
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) continue;
      json j = parse_line(p.string(), line, text);
      int s = require_int(j, "src", p.string(), line);
      int d = require_int(j, "dst", p.string(), line);
      if (s < 0 || s >= ns)
        at_line(p.string(), line,
                "src " + std::to_string(s) + " outside node range of type " +
                    g.schema.node_types[size_t(spec.src_type)].name);
      if (d < 0 || d >= nd)
        at_line(p.string(), line,
                "dst " + std::to_string(d) + " outside node range of type " +
                    g.schema.node_types[size_t(spec.dst_type)].name);
      rel.src.push_back(s);
      rel.dst.push_back(d);
      if (spec.edge_feature_dim > 0) {
        if (!j.contains("x") || !j["x"].is_array() ||
            int(j["x"].size()) != spec.edge_feature_dim)
          at_line(p.string(), line,
                  "edge feature array \"x\" of length " +
                      std::to_string(spec.edge_feature_dim) + " required");
        std::vector<double> x;
        for (const auto& v : j["x"])
          x.push_back(finite_number(v, p.string(), line));
        feats.push_back(std::move(x));
      } else if (j.contains("x")) {
        at_line(p.string(), line, "relation declares no edge features");
      }
    }
    if (spec.edge_feature_dim > 0) {
      rel.edge_features = MatD(rel.num_edges(), spec.edge_feature_dim);
      for (int i = 0; i < rel.num_edges(); ++i)
        for (int j = 0; j < spec.edge_feature_dim; ++j)
          rel.edge_features.at(i, j) = feats[size_t(i)][size_t(j)];
    }
    g.relations.push_back(std::move(rel));
  }

  // Label files.
  for (const auto& spec : g.schema.tasks) {
    fs::path p = root / ("labels_" + spec.name + ".jsonl");
    std::ifstream in = open_for_read(p);
    std::vector<Target> ts;
    std::string text;
    int line = 0;
    int n = g.num_nodes(spec.target_type);
    while (std::getline(in, text)) {
      ++line;
      if (text.empty()) continue;
      json j = parse_line(p.string(), line, text);
      Target tg;
      tg.node_type = spec.target_type;
      tg.node = require_int(j, "node", p.string(), line);
      if (tg.node < 0 || tg.node >= n)
        at_line(p.string(), line,
                "node " + std::to_string(tg.node) +
                    " outside node range of target type");
      if (!j.contains("y")) at_line(p.string(), line, "missing label \"y\"");
      const json& y = j["y"];
      if (spec.kind == TaskKind::single_label) {
        if (!y.is_number_integer())
          at_line(p.string(), line, "single_label task needs an integer y");
        tg.y.push_back(y.get<int>());
      } else {
        if (!y.is_array())
          at_line(p.string(), line, "multi_label task needs an array y");
        for (const auto& v : y) {
          if (!v.is_number_integer())
            at_line(p.string(), line, "multi_label classes must be integers");
          tg.y.push_back(v.get<int>());
        }
        std::sort(tg.y.begin(), tg.y.end());
        if (std::adjacent_find(tg.y.begin(), tg.y.end()) != tg.y.end())
          at_line(p.string(), line, "duplicate class in multi_label y");
      }
      for (int c : tg.y)
        if (c < 0 || c >= spec.num_classes)
          at_line(p.string(), line,
                  "class " + std::to_string(c) + " outside 0.." +
                      std::to_string(spec.num_classes - 1));
      ts.push_back(std::move(tg));
    }
    g.targets.push_back(std::move(ts));
  }

  g.canonicalize();
  return g;
}

void write_graph(const HeteroGraph& g, const std::string& dir) {
  fs::path root(dir);
  std::error_code ec;
  fs::create_directories(root, ec);

  json js;
  js["node_types"] = json::array();
  for (const auto& nt : g.schema.node_types)
    js["node_types"].push_back(
        {{"name", nt.name}, {"feature_dim", nt.feature_dim}});
  js["relations"] = json::array();
  for (const auto& rl : g.schema.relations)
    js["relations"].push_back(
        {{"name", rl.name},
         {"src", g.schema.node_types[size_t(rl.src_type)].name},
         {"dst", g.schema.node_types[size_t(rl.dst_type)].name},
         {"edge_feature_dim", rl.edge_feature_dim}});
  js["tasks"] = json::array();
  for (const auto& tk : g.schema.tasks)
    js["tasks"].push_back(
        {{"name", tk.name},
         {"target_type", g.schema.node_types[size_t(tk.target_type)].name},
         {"kind", task_kind_name(tk.kind)},
         {"num_classes", tk.num_classes}});
  {
    std::ofstream out(root / "schema.json");
    if (!out) fail(ErrorKind::io, "cannot write " + (root / "schema.json").string());
    out << js.dump(2) << "\n";
  }

  for (size_t t = 0; t < g.schema.node_types.size(); ++t) {
    const auto& spec = g.schema.node_types[t];
    std::ofstream out(root / ("nodes_" + spec.name + ".jsonl"));
    if (!out) fail(ErrorKind::io, "cannot write nodes_" + spec.name);
    const MatD& f = g.node_features[t];
    for (int i = 0; i < f.rows; ++i) {
      json j;
      j["id"] = i;
      j["x"] = json::array();
      for (int c = 0; c < f.cols; ++c) j["x"].push_back(f.at(i, c));
      out << j.dump() << "\n";
    }
  }

  for (size_t r = 0; r < g.schema.relations.size(); ++r) {
    const auto& spec = g.schema.relations[r];
    const auto& rel = g.relations[r];
    std::ofstream out(root / ("edges_" + spec.name + ".jsonl"));
    if (!out) fail(ErrorKind::io, "cannot write edges_" + spec.name);
    for (int i = 0; i < rel.num_edges(); ++i) {
      json j;
      j["src"] = rel.src[size_t(i)];
      j["dst"] = rel.dst[size_t(i)];
      if (spec.edge_feature_dim > 0) {
        j["x"] = json::array();
        for (int c = 0; c < spec.edge_feature_dim; ++c)
          j["x"].push_back(rel.edge_features.at(i, c));
      }
      out << j.dump() << "\n";
    }
  }

  for (size_t t = 0; t < g.schema.tasks.size(); ++t) {
    const auto& spec = g.schema.tasks[t];
    std::ofstream out(root / ("labels_" + spec.name + ".jsonl"));
    if (!out) fail(ErrorKind::io, "cannot write labels_" + spec.name);
    for (const Target& tg : g.targets[t]) {
      json j;
      j["node"] = tg.node;
      if (spec.kind == TaskKind::single_label)
        j["y"] = tg.y.at(0);
      else
        j["y"] = tg.y;
      out << j.dump() << "\n";
    }
  }
}

// ---- splits ----------------------------------------------------------------

SplitAssignment split_targets(const HeteroGraph& g,
                              std::array<double, 3> ratios, uint64_t seed) {
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0 ||
      std::abs(sum - 1.0) > 1e-9)
    fail(ErrorKind::config, "split ratios must be nonnegative and sum to 1");
  SplitAssignment sp;
  for (size_t t = 0; t < g.schema.tasks.size(); ++t) {
    int n = int(g.targets[t].size());
    if (n < 3)
      fail(ErrorKind::config, "task " + g.schema.tasks[t].name + " has " +
                                  std::to_string(n) +
                                  " labeled targets; need at least 3");
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(splitmix64(seed) ^ fnv1a64("split/" + g.schema.tasks[t].name));
    rng.shuffle(order);
    int n_val = std::max(1, int(std::floor(double(n) * ratios[1])));
    int n_test = std::max(1, int(std::floor(double(n) * ratios[2])));
    int n_train = n - n_val - n_test;
    if (n_train < 1)
      fail(ErrorKind::config,
           "split leaves no training targets for task " +
               g.schema.tasks[t].name);
    std::array<std::vector<int>, 3> buckets;
    for (int i = 0; i < n; ++i) {
      int bucket = i < n_train ? 0 : (i < n_train + n_val ? 1 : 2);
      buckets[size_t(bucket)].push_back(order[size_t(i)]);
    }
    for (auto& b : buckets) std::sort(b.begin(), b.end());
    sp.buckets.push_back(std::move(buckets));
  }
  return sp;
}

// ---- hop budgets -----------------------------------------------------------

HopBudgets HopBudgets::uniform(int num_types, int num_hops, int budget) {
  HopBudgets hb;
  hb.per_type.assign(size_t(num_types),
                     std::vector<int>(size_t(num_hops), budget));
  return hb;
}

int HopBudgets::num_hops() const {
  return per_type.empty() ? 0 : int(per_type[0].size());
}

HopBudgets HopBudgets::scaled(int factor) const {
  HopBudgets hb = *this;
  for (auto& row : hb.per_type)
    for (auto& b : row) {
      long long v = (long long)(b) * factor;
      b = v > INT32_MAX ? INT32_MAX : int(v);
    }
  return hb;
}

// ---- sampling ---------------------------------------------------------------

namespace {

// In-adjacency per relation: for each destination node the sorted unique
// source nodes.
struct InAdjacency {
  std::vector<int> offsets;    // per dst node, CSR into neighbors
  std::vector<int> neighbors;  // source node ids
};

InAdjacency build_in_adjacency(const RelationData& rel, int num_dst) {
  InAdjacency adj;
  adj.offsets.assign(size_t(num_dst) + 1, 0);
  // Edges are sorted by (dst, src); duplicates collapse here.
  std::vector<int> uniq_src, uniq_dst;
  for (int i = 0; i < rel.num_edges(); ++i) {
    if (i > 0 && rel.dst[size_t(i)] == rel.dst[size_t(i) - 1] &&
        rel.src[size_t(i)] == rel.src[size_t(i) - 1])
      continue;
    uniq_src.push_back(rel.src[size_t(i)]);
    uniq_dst.push_back(rel.dst[size_t(i)]);
  }
  for (int d : uniq_dst) adj.offsets[size_t(d) + 1]++;
  for (size_t i = 1; i < adj.offsets.size(); ++i)
    adj.offsets[i] += adj.offsets[i - 1];
  adj.neighbors.resize(uniq_src.size());
  std::vector<int> cursor(adj.offsets.begin(), adj.offsets.end() - 1);
  for (size_t i = 0; i < uniq_src.size(); ++i)
    adj.neighbors[size_t(cursor[size_t(uniq_dst[i])]++)] = uniq_src[i];
  return adj;
}

// Expands `included` (per-type node sets) hop by hop. Each hop visits every
// included node and draws up to budget in-neighbors per relation as a prefix
// of a seeded per-(node, relation) permutation. The permutation never depends
// on the hop or the budget, which makes the sample monotone in the budgets.
void expand_neighborhood(const HeteroGraph& g,
                         const std::vector<InAdjacency>& adj,
                         const HopBudgets& budgets, uint64_t seed,
                         std::vector<std::set<int>>& included) {
  int hops = budgets.num_hops();
  for (int hop = 0; hop < hops; ++hop) {
    std::vector<std::vector<int>> added(g.schema.node_types.size());
    for (size_t r = 0; r < g.schema.relations.size(); ++r) {
      const auto& spec = g.schema.relations[r];
      const InAdjacency& a = adj[r];
      int b = budgets.at(spec.src_type, hop);
      if (b <= 0) continue;
      for (int v : included[size_t(spec.dst_type)]) {
        int begin = a.offsets[size_t(v)];
        int deg = a.offsets[size_t(v) + 1] - begin;
        if (deg == 0) continue;
        if (b >= deg) {
          for (int i = begin; i < begin + deg; ++i)
            added[size_t(spec.src_type)].push_back(a.neighbors[size_t(i)]);
          continue;
        }
        Rng rng(splitmix64(seed) ^ splitmix64(uint64_t(r) * 0x9e3779b9ull) ^
                splitmix64(uint64_t(v) + 0x51ed2701ull));
        for (int i : rng.perm_prefix(deg, b))
          added[size_t(spec.src_type)].push_back(
              a.neighbors[size_t(begin + i)]);
      }
    }
    for (size_t t = 0; t < added.size(); ++t)
      for (int v : added[t]) included[t].insert(v);
  }
}

// Induced subgraph on the included node sets, with targets remapped.
// `keep_targets[task]` lists rows of g.targets[task] to carry over verbatim
// (the sampled batch, possibly with repeats); other tasks keep the rows from
// `other_rows[task]` whose nodes landed in the sample.
HeteroGraph induce(const HeteroGraph& g,
                   const std::vector<std::set<int>>& included,
                   const std::vector<std::vector<int>>& target_rows) {
  HeteroGraph out;
  out.schema = g.schema;

  std::vector<std::vector<int>> remap(g.schema.node_types.size());
  for (size_t t = 0; t < included.size(); ++t) {
    remap[t].assign(size_t(g.num_nodes(int(t))), -1);
    MatD feats(int(included[t].size()), g.schema.node_types[t].feature_dim);
    int at = 0;
    for (int v : included[t]) {
      remap[t][size_t(v)] = at;
      for (int c = 0; c < feats.cols; ++c)
        feats.at(at, c) = g.node_features[t].at(v, c);
      ++at;
    }
    out.node_features.push_back(std::move(feats));
  }

  for (size_t r = 0; r < g.schema.relations.size(); ++r) {
    const auto& spec = g.schema.relations[r];
    const auto& rel = g.relations[r];
    RelationData nrel;
    std::vector<int> keep;
    for (int i = 0; i < rel.num_edges(); ++i) {
      int s = remap[size_t(spec.src_type)][size_t(rel.src[size_t(i)])];
      int d = remap[size_t(spec.dst_type)][size_t(rel.dst[size_t(i)])];
      if (s < 0 || d < 0) continue;
      nrel.src.push_back(s);
      nrel.dst.push_back(d);
      keep.push_back(i);
    }
    if (spec.edge_feature_dim > 0) {
      nrel.edge_features = MatD(int(keep.size()), spec.edge_feature_dim);
      for (size_t i = 0; i < keep.size(); ++i)
        for (int c = 0; c < spec.edge_feature_dim; ++c)
          nrel.edge_features.at(int(i), c) =
              rel.edge_features.at(keep[i], c);
    }
    out.relations.push_back(std::move(nrel));
  }

  for (size_t t = 0; t < g.schema.tasks.size(); ++t) {
    int tt = g.schema.tasks[t].target_type;
    std::vector<Target> ts;
    for (int row : target_rows[t]) {
      Target tg = g.targets[t][size_t(row)];
      tg.node = remap[size_t(tt)][size_t(tg.node)];
      if (tg.node < 0)
        fail(ErrorKind::contract, "induce: target node missing from sample");
      ts.push_back(std::move(tg));
    }
    out.targets.push_back(std::move(ts));
  }
  // Remapping preserves relative node order, so edges stay (dst, src) sorted
  // but batch target rows may repeat; only targets need re-sorting for
  // canonical form, and the batch order is meaningful, so leave them.
  return out;
}

bool is_positive(const TaskSpec& spec, const Target& t) {
  if (spec.kind == TaskKind::single_label) return t.y.at(0) == 1;
  return !t.y.empty();
}

}  // namespace

HeteroGraph sample_subgraph(const HeteroGraph& g, const SplitAssignment& sp,
                            int task_id, Split split, int batch_targets,
                            double pos_ratio, const HopBudgets& budgets,
                            uint64_t seed) {
  if (task_id < 0 || size_t(task_id) >= g.schema.tasks.size())
    fail(ErrorKind::contract, "sample_subgraph: bad task id");
  if (batch_targets < 1)
    fail(ErrorKind::contract, "sample_subgraph: batch_targets must be >= 1");
  if (pos_ratio < 0.0 || pos_ratio > 1.0)
    fail(ErrorKind::config, "sample_subgraph: pos_ratio must be in [0, 1]");
  if (int(budgets.per_type.size()) != int(g.schema.node_types.size()))
    fail(ErrorKind::contract, "sample_subgraph: budgets do not match schema");

  const TaskSpec& tspec = g.schema.tasks[size_t(task_id)];
  const std::vector<int>& rows = sp.rows(task_id, split);
  std::vector<int> pos, neg;
  for (int row : rows) {
    (is_positive(tspec, g.targets[size_t(task_id)][size_t(row)]) ? pos : neg)
        .push_back(row);
  }
  int want_pos = int(std::llround(double(batch_targets) * pos_ratio));
  int want_neg = batch_targets - want_pos;
  if (want_pos > 0 && pos.empty())
    fail(ErrorKind::config, "sample_subgraph: task " + tspec.name +
                                " has no positive targets in the " +
                                split_name(split) + " split");
  if (want_neg > 0 && neg.empty())
    fail(ErrorKind::config, "sample_subgraph: task " + tspec.name +
                                " has no negative targets in the " +
                                split_name(split) + " split");

  Rng rng(splitmix64(seed) ^ fnv1a64("batch/" + tspec.name));
  auto draw = [&](std::vector<int>& pool, int want) {
    std::vector<int> out;
    if (want <= 0) return out;
    if (want <= int(pool.size())) {
      for (int i : rng.perm_prefix(int(pool.size()), want))
        out.push_back(pool[size_t(i)]);
    } else {
      out = pool;  // take all, then oversample with replacement
      for (int i = int(pool.size()); i < want; ++i)
        out.push_back(pool[size_t(rng.index(pool.size()))]);
    }
    return out;
  };
  std::vector<int> batch = draw(pos, want_pos);
  for (int r : draw(neg, want_neg)) batch.push_back(r);

  std::vector<std::set<int>> included(g.schema.node_types.size());
  for (int row : batch)
    included[size_t(tspec.target_type)].insert(
        g.targets[size_t(task_id)][size_t(row)].node);
  std::vector<InAdjacency> adj;
  for (size_t r = 0; r < g.schema.relations.size(); ++r)
    adj.push_back(build_in_adjacency(
        g.relations[r], g.num_nodes(g.schema.relations[r].dst_type)));
  expand_neighborhood(g, adj, budgets, seed, included);

  std::vector<std::vector<int>> target_rows(g.schema.tasks.size());
  target_rows[size_t(task_id)] = batch;
  for (size_t t = 0; t < g.schema.tasks.size(); ++t) {
    if (int(t) == task_id) continue;
    int tt = g.schema.tasks[t].target_type;
    for (int row : sp.rows(int(t), split)) {
      int node = g.targets[t][size_t(row)].node;
      if (included[size_t(tt)].count(node)) target_rows[t].push_back(row);
    }
  }
  return induce(g, included, target_rows);
}

HeteroGraph build_eval_graph(const HeteroGraph& g, const SplitAssignment& sp,
                             Split split, const HopBudgets& budgets,
                             uint64_t seed) {
  std::vector<std::set<int>> included(g.schema.node_types.size());
  std::vector<std::vector<int>> target_rows(g.schema.tasks.size());
  for (size_t t = 0; t < g.schema.tasks.size(); ++t) {
    int tt = g.schema.tasks[t].target_type;
    for (int row : sp.rows(int(t), split)) {
      included[size_t(tt)].insert(g.targets[t][size_t(row)].node);
      target_rows[t].push_back(row);
    }
  }
  std::vector<InAdjacency> adj;
  for (size_t r = 0; r < g.schema.relations.size(); ++r)
    adj.push_back(build_in_adjacency(
        g.relations[r], g.num_nodes(g.schema.relations[r].dst_type)));
  expand_neighborhood(g, adj, budgets, seed, included);
  return induce(g, included, target_rows);
}

}  // namespace struchis
