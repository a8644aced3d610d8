// Command-line front end. Links only the C API; every exit path goes
// through the shared status-to-exit-code mapping so scripted callers get a
// stable contract: 0 success, 1 validation findings, 2 usage or config
// problem, 3 runtime abort.

#include <cstdint>
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "struchis/struchis.h"

namespace {

int exit_code(shis_status st) {
  switch (st) {
    case SHIS_OK: return 0;
    case SHIS_ERR_IO:
    case SHIS_ERR_SCHEMA:
    case SHIS_ERR_CONFIG:
    case SHIS_ERR_CONTRACT: return 2;
    case SHIS_ERR_RUNTIME: return 3;
  }
  return 3;
}

int finish(shis_status st) {
  if (st != SHIS_OK) fprintf(stderr, "error: %s\n", shis_last_error());
  return exit_code(st);
}

void print_and_free(char* json) {
  if (!json) return;
  printf("%s\n", json);
  shis_string_free(json);
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int cmd_validate(const std::string& graph_dir) {
  shis_graph* g = nullptr;
  shis_status st = shis_graph_load(graph_dir.c_str(), &g);
  if (st != SHIS_OK) return finish(st);
  char* json = nullptr;
  int count = 0;
  st = shis_graph_validate(g, &json, &count);
  shis_graph_free(g);
  if (st != SHIS_OK) return finish(st);
  print_and_free(json);
  if (count > 0) {
    fprintf(stderr, "%d finding(s)\n", count);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task heterogeneous GNN engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", shis_version());

  std::string graph_dir, run_dir, model_path, train_path, config_path;
  std::string out_dir, out_csv, split = "test";
  int64_t seed = -1;
  int epochs = 5;

  CLI::App* validate = app.add_subcommand("validate", "Check a graph directory");
  validate->add_option("graph_dir", graph_dir, "graph directory")->required();

  CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic benchmark graph");
  synth->add_option("--config", config_path, "synthesis config (default: interference preset)");
  synth->add_option("--out", out_dir, "output graph directory")->required();
  synth->add_option("--seed", seed, "seed override");

  auto train_like = [&](const char* name, const char* desc) {
    CLI::App* c = app.add_subcommand(name, desc);
    c->add_option("--graph", graph_dir, "graph directory")->required();
    c->add_option("--model", model_path, "model config file")->required();
    c->add_option("--train", train_path, "training config file (default settings if omitted)");
    c->add_option("--out", out_dir, "output directory")->required();
    c->add_option("--seed", seed, "seed override");
    return c;
  };
  CLI::App* train = train_like("train", "Grid-search training run");
  CLI::App* ablate = train_like("ablate", "Sharing-mask progression and comparison variants");
  CLI::App* bench = train_like("bench-time", "Per-epoch wall time for every variant");
  bench->add_option("--epochs", epochs, "epochs per variant (default 5)");

  CLI::App* evaluate = app.add_subcommand("evaluate", "Re-evaluate a finished run");
  evaluate->add_option("--graph", graph_dir, "graph directory")->required();
  evaluate->add_option("--run", run_dir, "run directory")->required();
  evaluate->add_option("--split", split, "train|val|test (default test)");

  CLI::App* importance = app.add_subcommand("importance", "Export attention importance CSV");
  importance->add_option("--graph", graph_dir, "graph directory")->required();
  importance->add_option("--run", run_dir, "run directory")->required();
  importance->add_option("--split", split, "train|val|test (default test)");
  importance->add_option("--out", out_csv, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  char* json = nullptr;
  if (validate->parsed()) return cmd_validate(graph_dir);
  if (synth->parsed()) {
    shis_status st = shis_synth(opt(config_path), out_dir.c_str(), seed, &json);
    print_and_free(json);
    return finish(st);
  }
  if (train->parsed()) {
    shis_status st = shis_train(graph_dir.c_str(), model_path.c_str(),
                                opt(train_path), out_dir.c_str(), seed, &json);
    print_and_free(json);
    return finish(st);
  }
  if (ablate->parsed()) {
    shis_status st = shis_ablate(graph_dir.c_str(), model_path.c_str(),
                                 opt(train_path), out_dir.c_str(), seed, &json);
    print_and_free(json);
    return finish(st);
  }
  if (bench->parsed()) {
    shis_status st = shis_bench(graph_dir.c_str(), model_path.c_str(),
                                opt(train_path), out_dir.c_str(), epochs, seed,
                                &json);
    print_and_free(json);
    return finish(st);
  }
  if (evaluate->parsed()) {
    shis_status st = shis_evaluate(graph_dir.c_str(), run_dir.c_str(),
                                   split.c_str(), &json);
    print_and_free(json);
    return finish(st);
  }
  if (importance->parsed()) {
    shis_status st = shis_importance(graph_dir.c_str(), run_dir.c_str(),
                                     split.c_str(), out_csv.c_str());
    if (st == SHIS_OK) printf("wrote %s\n", out_csv.c_str());
    return finish(st);
  }
  return 2;
}
