#include "support/reference.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace struchis::testsup {

std::map<std::string, MatD> param_map(const ParamStoreD& ps) {
  std::map<std::string, MatD> out;
  for (const auto& e : ps.entries) out[e.path] = e.value;
  return out;
}

namespace {

const MatD& P(const std::map<std::string, MatD>& m, const std::string& path) {
  auto it = m.find(path);
  if (it == m.end()) fail(ErrorKind::contract, "reference: missing " + path);
  return it->second;
}

MatD mm(const MatD& A, const MatD& B) {
  MatD out(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      double a = A.at(i, k);
      for (int j = 0; j < B.cols; ++j) out.at(i, j) += a * B.at(k, j);
    }
  return out;
}

MatD lin(const MatD& X, const MatD& W, const MatD& b) {
  MatD out = mm(X, W);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) += b.at(0, j);
  return out;
}

double leaky(double x, double slope) { return x >= 0 ? x : slope * x; }

std::vector<double> softmax(std::vector<double> v) {
  double mx = *std::max_element(v.begin(), v.end());
  double sum = 0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
  return v;
}

// Row of [left || right...] times W, where W has sum-of-part-widths rows.
std::vector<double> concat_proj(const std::vector<const double*>& parts,
                                const std::vector<int>& widths, const MatD& W) {
  std::vector<double> out(size_t(W.cols), 0.0);
  int row = 0;
  for (size_t p = 0; p < parts.size(); ++p)
    for (int k = 0; k < widths[p]; ++k, ++row)
      for (int j = 0; j < W.cols; ++j)
        out[size_t(j)] += parts[p][k] * W.at(row, j);
  return out;
}

struct Streams {
  std::vector<std::string> prefixes;
  std::vector<int> served;
  bool tasks_are_streams = false;
};

Streams streams_of(const ModelConfig& cfg) {
  Streams s;
  switch (cfg.variant) {
    case Variant::stl:
      s.prefixes = {"task" + std::to_string(cfg.stl_task)};
      s.served = {cfg.stl_task};
      s.tasks_are_streams = true;
      break;
    case Variant::shared_backbone:
      s.prefixes = {"task0"};
      for (int t = 0; t < cfg.num_tasks; ++t) s.served.push_back(t);
      break;
    case Variant::moe_experts:
      for (int e = 0; e < cfg.moe_num_experts; ++e)
        s.prefixes.push_back("expert" + std::to_string(e));
      for (int t = 0; t < cfg.num_tasks; ++t) s.served.push_back(t);
      break;
    default:
      for (int t = 0; t < cfg.num_tasks; ++t) {
        s.prefixes.push_back("task" + std::to_string(t));
        s.served.push_back(t);
      }
      s.tasks_are_streams = true;
      break;
  }
  return s;
}

}  // namespace

RefForward ref_forward(const ModelConfig& cfg, const HeteroGraph& g,
                       const std::map<std::string, MatD>& Pm) {
  const GraphSchema& sc = g.schema;
  const Streams st = streams_of(cfg);
  const int S = int(st.prefixes.size());
  const int NT = int(sc.node_types.size());
  const int NR = int(sc.relations.size());
  const int d = cfg.hidden_dim;
  const int H = cfg.attention_heads;
  const int seg = d / H;
  const bool task_gates =
      st.tasks_are_streams && cfg.gate_mode == GateMode::learned;

  // input projections
  std::vector<std::vector<MatD>> h(static_cast<size_t>(S));
  std::vector<std::vector<MatD>> ee(static_cast<size_t>(S), std::vector<MatD>(static_cast<size_t>(NR)));
  for (int s = 0; s < S; ++s) {
    const std::string& pfx = st.prefixes[size_t(s)];
    for (int ty = 0; ty < NT; ++ty) {
      const std::string& tn = sc.node_types[size_t(ty)].name;
      h[size_t(s)].push_back(lin(g.node_features[size_t(ty)],
                                 P(Pm, pfx + "/proj/node/" + tn + "/w"),
                                 P(Pm, pfx + "/proj/node/" + tn + "/b")));
    }
    for (int r = 0; r < NR; ++r) {
      const RelationData& rd = g.relations[size_t(r)];
      if (rd.num_edges() == 0) continue;
      const RelationSpec& rs = sc.relations[size_t(r)];
      if (rs.edge_feature_dim > 0) {
        ee[size_t(s)][size_t(r)] =
            lin(rd.edge_features, P(Pm, pfx + "/proj/edge/" + rs.name + "/w"),
                P(Pm, pfx + "/proj/edge/" + rs.name + "/b"));
      } else {
        const MatD& c = P(Pm, pfx + "/proj/edge/" + rs.name + "/c");
        MatD e(rd.num_edges(), d);
        for (int i = 0; i < e.rows; ++i)
          for (int j = 0; j < d; ++j) e.at(i, j) = c.at(0, j);
        ee[size_t(s)][size_t(r)] = std::move(e);
      }
    }
  }

  for (int l = 0; l < cfg.num_layers; ++l) {
    const std::string ln = "/layer" + std::to_string(l);

    // per-relation attention aggregation, dense per destination node
    std::vector<std::vector<MatD>> h_rel(
        static_cast<size_t>(S), std::vector<MatD>(static_cast<size_t>(NR)));
    std::vector<std::vector<bool>> covered(static_cast<size_t>(NR));
    for (int r = 0; r < NR; ++r)
      covered[size_t(r)].assign(
          size_t(g.num_nodes(sc.relations[size_t(r)].dst_type)), false);

    for (int s = 0; s < S; ++s) {
      const std::string& pfx = st.prefixes[size_t(s)];
      for (int r = 0; r < NR; ++r) {
        const RelationData& rd = g.relations[size_t(r)];
        int m = rd.num_edges();
        if (m == 0) continue;
        const RelationSpec& rs = sc.relations[size_t(r)];
        const MatD& hs = h[size_t(s)][size_t(rs.src_type)];
        const MatD& hd = h[size_t(s)][size_t(rs.dst_type)];
        const MatD& Wm = P(Pm, pfx + ln + "/mes/" + rs.name + "/w");
        const MatD& Wa = P(Pm, pfx + ln + "/rel_attn/" + rs.name + "/w");
        const MatD& Aa = P(Pm, pfx + ln + "/rel_attn/" + rs.name + "/a");

        MatD msg(m, d), score(m, H);
        for (int e = 0; e < m; ++e) {
          const double* xs = hs.row(rd.src[size_t(e)]);
          for (int j = 0; j < d; ++j) {
            double acc = 0;
            for (int k = 0; k < d; ++k) acc += xs[k] * Wm.at(k, j);
            msg.at(e, j) = acc;
          }
          std::vector<double> y = concat_proj(
              {hd.row(rd.dst[size_t(e)]), xs, ee[size_t(s)][size_t(r)].row(e)},
              {d, d, d}, Wa);
          for (int hh = 0; hh < H; ++hh) {
            double acc = 0;
            for (int j = hh * seg; j < (hh + 1) * seg; ++j)
              acc += Aa.at(0, j) * y[size_t(j)];
            score.at(e, hh) = cfg.attn_leaky ? leaky(acc, 0.2) : acc;
          }
        }

        MatD out(g.num_nodes(rs.dst_type), d);
        for (int e = 0; e < m;) {
          int v = rd.dst[size_t(e)];
          int end = e;
          while (end < m && rd.dst[size_t(end)] == v) ++end;
          covered[size_t(r)][size_t(v)] = true;
          for (int hh = 0; hh < H; ++hh) {
            std::vector<double> lg;
            for (int i = e; i < end; ++i) lg.push_back(score.at(i, hh));
            std::vector<double> al = softmax(lg);
            for (int i = e; i < end; ++i)
              for (int j = hh * seg; j < (hh + 1) * seg; ++j)
                out.at(v, j) += al[size_t(i - e)] * msg.at(i, j);
          }
          e = end;
        }
        h_rel[size_t(s)][size_t(r)] = std::move(out);
      }
    }

    // relation-wise gating over the streams' relation embeddings
    std::vector<std::vector<MatD>> mixed = h_rel;
    if (cfg.variant == Variant::struchis && cfg.share_at(l) && task_gates) {
      for (int t = 0; t < S; ++t) {
        for (int r = 0; r < NR; ++r) {
          if (g.relations[size_t(r)].num_edges() == 0) continue;
          const RelationSpec& rs = sc.relations[size_t(r)];
          const MatD& Wg = P(Pm, "task" + std::to_string(t) + ln + "/gate/" +
                                     rs.name + "/w");
          const MatD& bg = P(Pm, "task" + std::to_string(t) + ln + "/gate/" +
                                     rs.name + "/b");
          MatD out = h_rel[size_t(t)][size_t(r)];
          for (int v = 0; v < out.rows; ++v) {
            if (!covered[size_t(r)][size_t(v)]) continue;
            std::vector<double> z(size_t(S), 0.0);
            const double* sel = h[size_t(t)][size_t(rs.dst_type)].row(v);
            for (int j = 0; j < S; ++j) {
              double acc = bg.at(0, j);
              for (int k = 0; k < d; ++k) acc += sel[k] * Wg.at(k, j);
              z[size_t(j)] = acc;
            }
            std::vector<double> w = softmax(z);
            for (int j = 0; j < d; ++j) {
              double acc = 0;
              for (int k = 0; k < S; ++k)
                acc += w[size_t(k)] * h_rel[size_t(k)][size_t(r)].at(v, j);
              out.at(v, j) = acc;
            }
          }
          mixed[size_t(t)][size_t(r)] = std::move(out);
        }
      }
    }

    // cross-relation attention + residual + nonlinearity
    std::vector<std::vector<MatD>> next(static_cast<size_t>(S));
    for (int s = 0; s < S; ++s) {
      const std::string& pfx = st.prefixes[size_t(s)];
      const MatD& Wc = P(Pm, pfx + ln + "/agg/w");
      const MatD& bc = P(Pm, pfx + ln + "/agg/b");
      for (int ty = 0; ty < NT; ++ty) {
        const MatD& hp = h[size_t(s)][size_t(ty)];
        MatD out(hp.rows, d);
        for (int v = 0; v < hp.rows; ++v) {
          std::vector<const MatD*> parts;
          for (int r = 0; r < NR; ++r)
            if (sc.relations[size_t(r)].dst_type == ty &&
                g.relations[size_t(r)].num_edges() > 0 &&
                covered[size_t(r)][size_t(v)])
              parts.push_back(&mixed[size_t(s)][size_t(r)]);
          if (parts.empty()) {
            for (int j = 0; j < d; ++j)
              out.at(v, j) = leaky(hp.at(v, j), 0.01);
            continue;
          }
          int np = int(parts.size());
          MatD sl(np, H);
          for (int p = 0; p < np; ++p) {
            std::vector<double> y =
                concat_proj({hp.row(v), parts[size_t(p)]->row(v)}, {d, d}, Wc);
            for (int hh = 0; hh < H; ++hh) {
              double acc = 0;
              for (int j = hh * seg; j < (hh + 1) * seg; ++j)
                acc += bc.at(0, j) * y[size_t(j)];
              sl.at(p, hh) = acc;
            }
          }
          std::vector<double> agg(size_t(d), 0.0);
          for (int hh = 0; hh < H; ++hh) {
            std::vector<double> lg;
            for (int p = 0; p < np; ++p) lg.push_back(sl.at(p, hh));
            std::vector<double> be = softmax(lg);
            for (int p = 0; p < np; ++p)
              for (int j = hh * seg; j < (hh + 1) * seg; ++j)
                agg[size_t(j)] += be[size_t(p)] * parts[size_t(p)]->at(v, j);
          }
          for (int j = 0; j < d; ++j)
            out.at(v, j) = leaky(agg[size_t(j)] + hp.at(v, j), 0.01);
        }
        next[size_t(s)].push_back(std::move(out));
      }
    }

    // node-level gating over the layer outputs
    if (cfg.variant == Variant::ablation_no_r && task_gates) {
      std::vector<std::vector<MatD>> gated(static_cast<size_t>(S));
      for (int t = 0; t < S; ++t) {
        const MatD& Wg =
            P(Pm, "task" + std::to_string(t) + ln + "/gate_node/w");
        const MatD& bg =
            P(Pm, "task" + std::to_string(t) + ln + "/gate_node/b");
        for (int ty = 0; ty < NT; ++ty) {
          const MatD& sel = h[size_t(t)][size_t(ty)];
          MatD out(sel.rows, d);
          for (int v = 0; v < sel.rows; ++v) {
            std::vector<double> z(size_t(S), 0.0);
            for (int j = 0; j < S; ++j) {
              double acc = bg.at(0, j);
              for (int k = 0; k < d; ++k) acc += sel.at(v, k) * Wg.at(k, j);
              z[size_t(j)] = acc;
            }
            std::vector<double> w = softmax(z);
            for (int j = 0; j < d; ++j) {
              double acc = 0;
              for (int k = 0; k < S; ++k)
                acc += w[size_t(k)] * next[size_t(k)][size_t(ty)].at(v, j);
              out.at(v, j) = acc;
            }
          }
          gated[size_t(t)].push_back(std::move(out));
        }
      }
      next = std::move(gated);
    }
    h = std::move(next);
  }

  // per-task output embedding
  RefForward rf;
  std::map<int, MatD> embed;
  for (int t : st.served) {
    int tt = sc.tasks[size_t(t)].target_type;
    switch (cfg.variant) {
      case Variant::stl:
      case Variant::shared_backbone:
        embed[t] = h[0][size_t(tt)];
        break;
      case Variant::struchis:
      case Variant::ablation_no_r:
        embed[t] = h[size_t(t)][size_t(tt)];
        break;
      case Variant::ablation_no_r_no_l: {
        if (!task_gates) {
          embed[t] = h[size_t(t)][size_t(tt)];
          break;
        }
        const MatD& Wg =
            P(Pm, "task" + std::to_string(t) + "/final_gate/w");
        const MatD& bg =
            P(Pm, "task" + std::to_string(t) + "/final_gate/b");
        const MatD& sel = h[size_t(t)][size_t(tt)];
        MatD out(sel.rows, d);
        for (int v = 0; v < sel.rows; ++v) {
          std::vector<double> z(size_t(S), 0.0);
          for (int j = 0; j < S; ++j) {
            double acc = bg.at(0, j);
            for (int k = 0; k < d; ++k) acc += sel.at(v, k) * Wg.at(k, j);
            z[size_t(j)] = acc;
          }
          std::vector<double> w = softmax(z);
          for (int j = 0; j < d; ++j) {
            double acc = 0;
            for (int k = 0; k < S; ++k)
              acc += w[size_t(k)] * h[size_t(k)][size_t(tt)].at(v, j);
            out.at(v, j) = acc;
          }
        }
        embed[t] = std::move(out);
        break;
      }
      case Variant::moe_experts: {
        const std::string& tn = sc.node_types[size_t(tt)].name;
        MatD sel = lin(g.node_features[size_t(tt)],
                       P(Pm, "moe/selector/" + tn + "/w"),
                       P(Pm, "moe/selector/" + tn + "/b"));
        const MatD& Wg = P(Pm, "task" + std::to_string(t) + "/moe_gate/w");
        const MatD& bg = P(Pm, "task" + std::to_string(t) + "/moe_gate/b");
        MatD out(sel.rows, d);
        for (int v = 0; v < sel.rows; ++v) {
          std::vector<double> z(size_t(S), 0.0);
          for (int j = 0; j < S; ++j) {
            double acc = bg.at(0, j);
            for (int k = 0; k < d; ++k) acc += sel.at(v, k) * Wg.at(k, j);
            z[size_t(j)] = acc;
          }
          std::vector<double> w = softmax(z);
          for (int j = 0; j < d; ++j) {
            double acc = 0;
            for (int k = 0; k < S; ++k)
              acc += w[size_t(k)] * h[size_t(k)][size_t(tt)].at(v, j);
            out.at(v, j) = acc;
          }
        }
        embed[t] = std::move(out);
        break;
      }
    }
  }

  // heads and losses over labeled targets
  double loss = 0;
  bool any = false;
  for (int t : st.served) {
    const std::vector<Target>& targets = g.targets[size_t(t)];
    if (targets.empty()) continue;
    any = true;
    const TaskSpec& spec = sc.tasks[size_t(t)];
    MatD x(int(targets.size()), d);
    for (size_t i = 0; i < targets.size(); ++i)
      for (int j = 0; j < d; ++j)
        x.at(int(i), j) = embed[t].at(targets[i].node, j);
    const std::string hp = "task" + std::to_string(t) + "/head";
    for (int k = 0; k < cfg.head_hidden_layers; ++k) {
      x = lin(x, P(Pm, hp + "/fc" + std::to_string(k) + "/w"),
              P(Pm, hp + "/fc" + std::to_string(k) + "/b"));
      for (double& v : x.d) v = std::max(v, 0.0);
    }
    MatD z = lin(x, P(Pm, hp + "/out/w"), P(Pm, hp + "/out/b"));

    double lt = 0;
    if (spec.kind == TaskKind::single_label) {
      for (int i = 0; i < z.rows; ++i) {
        double mx = z.at(i, 0);
        for (int j = 1; j < z.cols; ++j) mx = std::max(mx, z.at(i, j));
        double sum = 0;
        for (int j = 0; j < z.cols; ++j) sum += std::exp(z.at(i, j) - mx);
        lt += mx + std::log(sum) - z.at(i, targets[size_t(i)].y[0]);
      }
      lt /= z.rows;
    } else {
      for (int i = 0; i < z.rows; ++i)
        for (int j = 0; j < z.cols; ++j) {
          double zv = z.at(i, j);
          bool pos = std::find(targets[size_t(i)].y.begin(),
                               targets[size_t(i)].y.end(),
                               j) != targets[size_t(i)].y.end();
          lt += std::max(zv, 0.0) - zv * (pos ? 1.0 : 0.0) +
                std::log1p(std::exp(-std::abs(zv)));
        }
      lt /= double(z.rows) * z.cols;
    }
    loss += cfg.task_weight(t) * lt;
    rf.logits[t] = std::move(z);
  }
  if (!any) fail(ErrorKind::contract, "reference: no labeled targets");

  rf.h = std::move(h);
  rf.loss = loss;
  return rf;
}

double ref_auc(const std::vector<int>& labels,
               const std::vector<double>& scores) {
  double wins = 0;
  long np = 0, nn = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) ++np;
    else ++nn;
  }
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / (double(np) * double(nn));
}

double ref_ap(const std::vector<int>& labels,
              const std::vector<double>& scores) {
  std::set<double, std::greater<double>> cuts(scores.begin(), scores.end());
  long npos = std::count(labels.begin(), labels.end(), 1);
  double ap = 0;
  long prev_tp = 0;
  for (double c : cuts) {
    long tp = 0, seen = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < c) continue;
      ++seen;
      if (labels[i] == 1) ++tp;
    }
    ap += (double(tp - prev_tp) / double(npos)) * (double(tp) / double(seen));
    prev_tp = tp;
  }
  return ap;
}

std::pair<int, int> ref_early_stop(const std::vector<double>& scores,
                                   int patience, int max_epochs) {
  double best = -std::numeric_limits<double>::infinity();
  int best_epoch = 0, last = 0;
  for (int e = 1; e <= max_epochs && e <= int(scores.size()); ++e) {
    last = e;
    if (scores[size_t(e) - 1] > best) {
      best = scores[size_t(e) - 1];
      best_epoch = e;
    }
    if (e - best_epoch >= patience) break;
  }
  return {best_epoch, last};
}

int ref_param_entries(const ModelConfig& cfg, const GraphSchema& schema) {
  const int NT = int(schema.node_types.size());
  const int NR = int(schema.relations.size());
  const int L = cfg.num_layers;
  const Streams st = streams_of(cfg);
  const int S = int(st.prefixes.size());

  int featured = 0;
  for (const RelationSpec& r : schema.relations)
    if (r.edge_feature_dim > 0) ++featured;
  // node proj w+b; edge proj w+b or lone constant; per layer: mes,
  // rel_attn w+a per relation, agg w+b
  int per_stream = 2 * NT + 2 * featured + (NR - featured) +
                   L * (3 * NR + 2);
  int n = S * per_stream;

  int masked = 0;
  for (int l = 0; l < L; ++l)
    if (cfg.share_at(l)) ++masked;
  switch (cfg.variant) {
    case Variant::struchis:
      n += cfg.num_tasks * masked * NR * 2;
      break;
    case Variant::ablation_no_r:
      n += cfg.num_tasks * L * 2;
      break;
    case Variant::ablation_no_r_no_l:
      n += cfg.num_tasks * 2;
      break;
    case Variant::moe_experts: {
      std::set<int> tts;
      for (const TaskSpec& t : schema.tasks) tts.insert(t.target_type);
      n += int(tts.size()) * 2 + cfg.num_tasks * 2;
      break;
    }
    default:
      break;
  }
  for (size_t i = 0; i < st.served.size(); ++i)
    n += cfg.head_hidden_layers * 2 + 2;
  return n;
}

}  // namespace struchis::testsup
