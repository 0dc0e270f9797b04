#include "fedgat/capi.h"

#include <cstring>
#include <exception>
#include <string>

#include "fedgat/dataset.hpp"
#include "fedgat/errors.hpp"
#include "fedgat/experiment.hpp"

struct fedgat_ctx {
  std::string last_error;
};

namespace {

// Runs `body`, storing any error message on the context and mapping the
// exception type to a status code.
template <typename Fn>
fedgat_status guarded(fedgat_ctx* ctx, Fn&& body) {
  if (ctx == nullptr) return FEDGAT_ERR_RUNTIME;
  ctx->last_error.clear();
  try {
    return body();
  } catch (const fedgat::ConfigError& e) {
    ctx->last_error = e.what();
    return FEDGAT_ERR_CONFIG;
  } catch (const fedgat::DatasetError& e) {
    ctx->last_error = e.what();
    return FEDGAT_ERR_DATASET;
  } catch (const std::exception& e) {
    ctx->last_error = e.what();
    return FEDGAT_ERR_RUNTIME;
  } catch (...) {
    ctx->last_error = "unknown failure";
    return FEDGAT_ERR_RUNTIME;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

fedgat_ctx* fedgat_ctx_new(void) { return new fedgat_ctx(); }

void fedgat_ctx_free(fedgat_ctx* ctx) { delete ctx; }

const char* fedgat_last_error(const fedgat_ctx* ctx) {
  return ctx == nullptr ? "" : ctx->last_error.c_str();
}

const char* fedgat_version(void) { return "1.0.0"; }

void fedgat_string_free(char* s) { delete[] s; }

fedgat_status fedgat_run_experiment(fedgat_ctx* ctx, const char* config_path) {
  return guarded(ctx, [&]() -> fedgat_status {
    if (config_path == nullptr) {
      throw fedgat::ConfigError("config path is NULL");
    }
    fedgat::ExperimentConfig cfg =
        fedgat::load_experiment_config(config_path);
    fedgat::apply_env_overrides(cfg);
    fedgat::run_experiment(cfg);
    return FEDGAT_OK;
  });
}

fedgat_status fedgat_run_sweep(fedgat_ctx* ctx, const char* spec_path,
                               const char* config_path,
                               size_t* failed_cells) {
  return guarded(ctx, [&]() -> fedgat_status {
    if (spec_path == nullptr || config_path == nullptr) {
      throw fedgat::ConfigError("spec or config path is NULL");
    }
    const fedgat::SweepSpec spec = fedgat::load_sweep_spec(spec_path);
    fedgat::ExperimentConfig base =
        fedgat::load_experiment_config(config_path);
    fedgat::apply_env_overrides(base);
    const fedgat::SweepResult result = fedgat::run_sweep(spec, base);
    if (failed_cells != nullptr) *failed_cells = result.failed;
    if (result.failed > 0) {
      ctx->last_error =
          std::to_string(result.failed) + " of " +
          std::to_string(result.cells.size()) + " sweep cells failed";
      return FEDGAT_ERR_RUNTIME;
    }
    return FEDGAT_OK;
  });
}

fedgat_status fedgat_validate_config(fedgat_ctx* ctx, const char* config_path,
                                     char** resolved_json) {
  return guarded(ctx, [&]() -> fedgat_status {
    if (config_path == nullptr) {
      throw fedgat::ConfigError("config path is NULL");
    }
    const fedgat::ExperimentConfig cfg =
        fedgat::load_experiment_config(config_path);
    if (resolved_json != nullptr) {
      *resolved_json = copy_string(fedgat::experiment_config_json(cfg));
    }
    return FEDGAT_OK;
  });
}

fedgat_status fedgat_import_raw(fedgat_ctx* ctx, const char* tree_dir,
                                const char* label_file,
                                const char* out_jsonl) {
  return guarded(ctx, [&]() -> fedgat_status {
    if (tree_dir == nullptr || label_file == nullptr || out_jsonl == nullptr) {
      throw fedgat::ConfigError("import-raw path is NULL");
    }
    const auto events = fedgat::load_raw_dataset(tree_dir, label_file);
    if (events.empty()) {
      throw fedgat::DatasetError("no usable events under " +
                                 std::string(tree_dir));
    }
    fedgat::write_events_jsonl(events, out_jsonl);
    return FEDGAT_OK;
  });
}

}  // extern "C"
