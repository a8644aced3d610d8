#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace struchis {

std::vector<std::vector<int>> decode(const MatD& logits,
                                     const TaskSpec& spec) {
  if (logits.cols != spec.num_classes)
    fail(ErrorKind::contract,
         "decode: logit width " + std::to_string(logits.cols) +
             " does not match " + std::to_string(spec.num_classes) +
             " classes");
  std::vector<std::vector<int>> out(static_cast<size_t>(logits.rows));
  for (int i = 0; i < logits.rows; ++i) {
    if (spec.kind == TaskKind::single_label) {
      int best = 0;
      for (int c = 1; c < logits.cols; ++c)
        if (logits.at(i, c) > logits.at(i, best)) best = c;
      out[size_t(i)] = {best};
    } else {
      for (int c = 0; c < logits.cols; ++c)
        if (logits.at(i, c) >= 0) out[size_t(i)].push_back(c);
    }
  }
  return out;
}

F1Pair f1_scores(const std::vector<std::vector<int>>& pred,
                 const std::vector<std::vector<int>>& truth,
                 const TaskSpec& spec) {
  if (pred.size() != truth.size())
    fail(ErrorKind::contract, "f1_scores: prediction/truth length mismatch");
  const int C = spec.num_classes;
  std::vector<long> tp(size_t(C), 0), fp(size_t(C), 0), fn(size_t(C), 0);
  for (size_t i = 0; i < pred.size(); ++i) {
    for (int c : pred[i])
      if (std::find(truth[i].begin(), truth[i].end(), c) != truth[i].end())
        ++tp[size_t(c)];
      else
        ++fp[size_t(c)];
    for (int c : truth[i])
      if (std::find(pred[i].begin(), pred[i].end(), c) == pred[i].end())
        ++fn[size_t(c)];
  }
  long TP = 0, FP = 0, FN = 0;
  double macro = 0;
  for (int c = 0; c < C; ++c) {
    TP += tp[size_t(c)];
    FP += fp[size_t(c)];
    FN += fn[size_t(c)];
    double denom = double(2 * tp[size_t(c)] + fp[size_t(c)] + fn[size_t(c)]);
    macro += denom == 0 ? 0.0 : 2.0 * double(tp[size_t(c)]) / denom;
  }
  F1Pair f;
  double denom = double(2 * TP + FP + FN);
  f.micro = denom == 0 ? 0.0 : 2.0 * double(TP) / denom;
  f.macro = macro / double(C);
  return f;
}

namespace {

// (score, label) pairs sorted descending by score; ties broken by original
// index so the order is total and documented.
std::vector<int> descending_order(const std::vector<double>& scores) {
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return scores[size_t(a)] > scores[size_t(b)];
  });
  return idx;
}

void check_binary_labels(const std::vector<double>& scores,
                         const std::vector<int>& labels, const char* who) {
  if (scores.size() != labels.size())
    fail(ErrorKind::contract,
         std::string(who) + ": score/label length mismatch");
  if (scores.empty()) fail(ErrorKind::contract, std::string(who) + ": empty");
  for (int y : labels)
    if (y != 0 && y != 1)
      fail(ErrorKind::contract, std::string(who) + ": labels must be 0/1");
}

}  // namespace

double auc_score(const std::vector<double>& scores,
                 const std::vector<int>& labels) {
  check_binary_labels(scores, labels, "auc");
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  long n_neg = long(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    fail(ErrorKind::contract, "auc: needs both classes present");
  std::vector<int> idx = descending_order(scores);
  // average rank per tie group, ranks 1..n over ascending scores
  double rank_sum_pos = 0;
  size_t i = 0;
  const size_t n = idx.size();
  while (i < n) {
    size_t j = i;
    while (j < n && scores[size_t(idx[j])] == scores[size_t(idx[i])]) ++j;
    // descending positions i..j-1 hold ascending ranks n-j+1..n-i
    double avg_rank = (double(n - j + 1) + double(n - i)) / 2.0;
    for (size_t k = i; k < j; ++k)
      if (labels[size_t(idx[k])] == 1) rank_sum_pos += avg_rank;
    i = j;
  }
  return (rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0) /
         (double(n_pos) * double(n_neg));
}

double average_precision(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  check_binary_labels(scores, labels, "average_precision");
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  if (n_pos == 0)
    fail(ErrorKind::contract, "average_precision: no positive labels");
  std::vector<int> idx = descending_order(scores);
  double ap = 0;
  long tp = 0, seen = 0;
  size_t i = 0;
  const size_t n = idx.size();
  while (i < n) {
    size_t j = i;
    long group_tp = 0;
    while (j < n && scores[size_t(idx[j])] == scores[size_t(idx[i])]) {
      if (labels[size_t(idx[j])] == 1) ++group_tp;
      ++j;
    }
    tp += group_tp;
    seen += long(j - i);
    double precision = double(tp) / double(seen);
    double recall_step = double(group_tp) / double(n_pos);
    ap += recall_step * precision;
    i = j;
  }
  return ap;
}

nlohmann::json TaskMetrics::to_json() const {
  nlohmann::json j;
  j["n"] = n;
  if (positives >= 0) j["positives"] = positives;
  j["micro_f1"] = micro_f1;
  j["macro_f1"] = macro_f1;
  j["auc"] = std::isnan(auc) ? nlohmann::json() : nlohmann::json(auc);
  j["ap"] = std::isnan(ap) ? nlohmann::json() : nlohmann::json(ap);
  return j;
}

TaskMetrics evaluate_task(const MatD& logits,
                          const std::vector<Target>& targets,
                          const TaskSpec& spec) {
  if (int(targets.size()) != logits.rows)
    fail(ErrorKind::contract, "evaluate_task: logit/target count mismatch");
  if (targets.empty())
    fail(ErrorKind::contract, "evaluate_task: no targets for " + spec.name);
  TaskMetrics m;
  m.n = int(targets.size());
  std::vector<std::vector<int>> truth(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) truth[i] = targets[i].y;
  F1Pair f = f1_scores(decode(logits, spec), truth, spec);
  m.micro_f1 = f.micro;
  m.macro_f1 = f.macro;
  if (spec.kind == TaskKind::single_label && spec.num_classes == 2) {
    std::vector<double> scores(targets.size());
    std::vector<int> labels(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
      scores[i] = logits.at(int(i), 1) - logits.at(int(i), 0);
      labels[i] = targets[i].y[0];
    }
    m.positives = int(std::count(labels.begin(), labels.end(), 1));
    if (m.positives > 0 && m.positives < m.n) {
      m.auc = auc_score(scores, labels);
      m.ap = average_precision(scores, labels);
    }
  }
  return m;
}

const TaskMetrics& MetricsReport::for_task(int task) const {
  for (const auto& [t, m] : tasks)
    if (t == task) return m;
  fail(ErrorKind::contract,
       "metrics report has no task " + std::to_string(task));
}

double MetricsReport::value(int task, const std::string& metric) const {
  auto pick = [&](const TaskMetrics& m) -> double {
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
  };
  if (task >= 0) return pick(for_task(task));
  if (tasks.empty()) fail(ErrorKind::contract, "metrics report is empty");
  double sum = 0;
  for (const auto& [t, m] : tasks) sum += pick(m);
  return sum / double(tasks.size());
}

nlohmann::json MetricsReport::to_json(const GraphSchema& schema) const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [t, m] : tasks)
    j[schema.tasks[size_t(t)].name] = m.to_json();
  return j;
}

void export_importance(const AttentionTrace& trace, const GraphSchema& schema,
                       const std::string& path) {
  if (trace.records.empty())
    fail(ErrorKind::contract, "importance export needs a nonempty trace");
  std::ofstream out(path);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << "task,layer,relation,kind,weight\n";
  for (const TraceRecord& r : trace.records) {
    if (r.kind != "alpha" && r.kind != "beta") continue;
    const std::string& rel = r.relation >= 0
                                 ? schema.relations[size_t(r.relation)].name
                                 : std::string("-");
    out << r.task << ',' << r.layer << ',' << rel << ',' << r.kind << ','
        << r.weight << '\n';
  }
  if (!out) fail(ErrorKind::io, "failed writing " + path);
}

}  // namespace struchis
