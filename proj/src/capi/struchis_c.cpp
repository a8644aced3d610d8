#include "struchis/struchis.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "core/manifest.hpp"
#include "core/runner.hpp"

using namespace struchis;

struct shis_graph {
  HeteroGraph g;
};

namespace {

thread_local std::string t_last_error;

shis_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::io: return SHIS_ERR_IO;
    case ErrorKind::schema: return SHIS_ERR_SCHEMA;
    case ErrorKind::config: return SHIS_ERR_CONFIG;
    case ErrorKind::contract: return SHIS_ERR_CONTRACT;
    case ErrorKind::runtime: return SHIS_ERR_RUNTIME;
  }
  return SHIS_ERR_RUNTIME;
}

template <class F>
shis_status guarded(F&& f) {
  t_last_error.clear();
  try {
    f();
    return SHIS_OK;
  } catch (const Error& e) {
    t_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return SHIS_ERR_RUNTIME;
  } catch (...) {
    t_last_error = "unknown failure";
    return SHIS_ERR_RUNTIME;
  }
}

shis_status contract_violation(const char* msg) {
  t_last_error = msg;
  return SHIS_ERR_CONTRACT;
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void emit(char** out, const nlohmann::json& j) {
  if (out) *out = dup_string(j.dump(2));
}

// NULL config path = empty json (callee picks its default).
nlohmann::json config_at(const char* path) {
  if (!path || !*path) return nlohmann::json();
  return read_json_file(path);
}

}  // namespace

extern "C" {

const char* shis_version(void) {
  static const std::string v = version_string();
  return v.c_str();
}

const char* shis_last_error(void) { return t_last_error.c_str(); }

void shis_string_free(char* s) { std::free(s); }

shis_status shis_graph_load(const char* dir, shis_graph** out) {
  if (!dir || !out) return contract_violation("shis_graph_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new shis_graph{load_graph(dir)}; });
}

void shis_graph_free(shis_graph* g) { delete g; }

shis_status shis_graph_info(const shis_graph* g, char** out_json) {
  if (!g || !out_json)
    return contract_violation("shis_graph_info: null argument");
  return guarded([&] { emit(out_json, graph_info(g->g)); });
}

shis_status shis_graph_validate(const shis_graph* g, char** out_json,
                                int* out_count) {
  if (!g || !out_json)
    return contract_violation("shis_graph_validate: null argument");
  return guarded([&] {
    ValidationReport rep = validate(g->g);
    nlohmann::json arr = nlohmann::json::array();
    for (const Finding& f : rep.findings)
      arr.push_back({{"code", f.code},
                     {"message", f.message},
                     {"where", f.where}});
    if (out_count) *out_count = int(rep.findings.size());
    emit(out_json, arr);
  });
}

shis_status shis_synth(const char* config_path, const char* out_dir,
                       int64_t seed, char** out_json) {
  if (!out_dir) return contract_violation("shis_synth: null out_dir");
  return guarded(
      [&] { emit(out_json, run_synth(config_at(config_path), out_dir, seed)); });
}

shis_status shis_train(const char* graph_dir, const char* model_config_path,
                       const char* train_config_path, const char* out_dir,
                       int64_t seed, char** out_json) {
  if (!graph_dir || !model_config_path || !out_dir)
    return contract_violation("shis_train: null argument");
  return guarded([&] {
    emit(out_json, run_train(graph_dir, read_json_file(model_config_path),
                             config_at(train_config_path), out_dir, seed));
  });
}

shis_status shis_evaluate(const char* graph_dir, const char* run_dir,
                          const char* split, char** out_json) {
  if (!graph_dir || !run_dir || !split)
    return contract_violation("shis_evaluate: null argument");
  return guarded(
      [&] { emit(out_json, run_evaluate(graph_dir, run_dir, split)); });
}

shis_status shis_importance(const char* graph_dir, const char* run_dir,
                            const char* split, const char* out_csv) {
  if (!graph_dir || !run_dir || !split || !out_csv)
    return contract_violation("shis_importance: null argument");
  return guarded([&] { run_importance(graph_dir, run_dir, split, out_csv); });
}

shis_status shis_ablate(const char* graph_dir, const char* model_config_path,
                        const char* train_config_path, const char* out_dir,
                        int64_t seed, char** out_json) {
  if (!graph_dir || !model_config_path || !out_dir)
    return contract_violation("shis_ablate: null argument");
  return guarded([&] {
    emit(out_json, run_ablate(graph_dir, read_json_file(model_config_path),
                              config_at(train_config_path), out_dir, seed));
  });
}

shis_status shis_bench(const char* graph_dir, const char* model_config_path,
                       const char* train_config_path, const char* out_dir,
                       int epochs, int64_t seed, char** out_json) {
  if (!graph_dir || !model_config_path || !out_dir)
    return contract_violation("shis_bench: null argument");
  return guarded([&] {
    emit(out_json, run_bench(graph_dir, read_json_file(model_config_path),
                             config_at(train_config_path), out_dir, epochs,
                             seed));
  });
}

}  // extern "C"
