#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "fedgat/capi.h"

int main(int argc, char** argv) {
  CLI::App app{"Federated bidirectional graph-attention rumor detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fedgat_version());

  std::string config_path;
  std::string spec_path;
  std::string tree_dir;
  std::string label_file;
  std::string out_jsonl;

  CLI::App* run = app.add_subcommand(
      "run", "Run one experiment and write its artifacts");
  run->add_option("config", config_path, "experiment config (JSON)")
      ->required();

  CLI::App* sweep =
      app.add_subcommand("sweep", "Run a parameter sweep of experiments");
  sweep->add_option("spec", spec_path, "sweep spec (JSON)")->required();
  sweep->add_option("config", config_path, "base experiment config (JSON)")
      ->required();

  CLI::App* validate = app.add_subcommand(
      "validate", "Validate a config and print the resolved document");
  validate->add_option("config", config_path, "experiment config (JSON)")
      ->required();

  CLI::App* import_raw = app.add_subcommand(
      "import-raw", "Convert a raw tree directory and label file to JSONL");
  import_raw->add_option("tree_dir", tree_dir, "directory of tree files")
      ->required();
  import_raw->add_option("label_file", label_file, "label:event_id lines")
      ->required();
  import_raw->add_option("out", out_jsonl, "output JSONL path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : FEDGAT_ERR_CONFIG;  // help/version exit clean
  }

  fedgat_ctx* ctx = fedgat_ctx_new();
  fedgat_status status = FEDGAT_OK;
  if (run->parsed()) {
    status = fedgat_run_experiment(ctx, config_path.c_str());
  } else if (sweep->parsed()) {
    size_t failed = 0;
    status = fedgat_run_sweep(ctx, spec_path.c_str(), config_path.c_str(),
                              &failed);
  } else if (validate->parsed()) {
    char* resolved = nullptr;
    status = fedgat_validate_config(ctx, config_path.c_str(), &resolved);
    if (status == FEDGAT_OK && resolved != nullptr) {
      std::fputs(resolved, stdout);
      fedgat_string_free(resolved);
    }
  } else if (import_raw->parsed()) {
    status = fedgat_import_raw(ctx, tree_dir.c_str(), label_file.c_str(),
                               out_jsonl.c_str());
  }

  if (status != FEDGAT_OK) {
    std::fprintf(stderr, "error: %s\n", fedgat_last_error(ctx));
  }
  fedgat_ctx_free(ctx);
  return status;
}
