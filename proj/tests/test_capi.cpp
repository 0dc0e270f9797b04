#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "fedgat/capi.h"
#include "fedgat/dataset.hpp"
#include "json.hpp"
#include "synthetic.hpp"

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("fedgat_capi_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static std::size_t& counter() {
    static std::size_t n = 0;
    return n;
  }
};

struct Ctx {
  fedgat_ctx* ptr;
  Ctx() : ptr(fedgat_ctx_new()) {}
  ~Ctx() { fedgat_ctx_free(ptr); }
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << content;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Config text for a small run over `jsonl`, writing into `out`.
std::string config_text(const std::string& jsonl, const std::string& out) {
  nlohmann::json cfg;
  cfg["datasets"] = {{{"name", "synthetic"}, {"jsonl", jsonl}}};
  cfg["split"] = {{"train", 0.6}, {"val", 0.2}, {"test", 0.2}};
  cfg["federated"] = {{"clients", 2}, {"sampled", 2}, {"local_epochs", 1},
                      {"rounds", 2}};
  cfg["model"] = {{"heads", 2}, {"hidden_dim", 4}};
  cfg["features"] = {{"vocab_size", 64}};
  cfg["seed"] = 7;
  cfg["output_dir"] = out;
  return cfg.dump();
}

fs::path make_jsonl(const fs::path& dir, std::uint64_t seed) {
  const auto events = synth::make_events(20, seed);
  const fs::path path = dir / "events.jsonl";
  fedgat::write_events_jsonl(events, path.string());
  return path;
}

int run_cli(const std::string& args) {
  const std::string command = std::string(FEDGAT_CLI_PATH) + " " + args;
  const int raw = std::system(command.c_str());
  REQUIRE(raw != -1);
  return WEXITSTATUS(raw);
}

// A raw Twitter-style layout with two valid events.
void write_raw_layout(const fs::path& dir) {
  fs::create_directories(dir / "trees");
  write_file(dir / "label.txt", "false:e1\ntrue:e2\n");
  write_file(dir / "source_tweets.txt",
             "e1\tbreaking story spreading fast\ne2\tofficial statement out\n");
  write_file(dir / "trees" / "e1.txt",
             "['ROOT', 'ROOT', '0']->['u1', 'e1', '0']\n"
             "['u1', 'e1', '0']->['u2', 'p2', '1.5']\n");
  write_file(dir / "trees" / "e2.txt",
             "['ROOT', 'ROOT', '0']->['u3', 'e2', '0']\n"
             "['u3', 'e2', '0']->['u4', 'p4', '2.0']\n"
             "['u4', 'p4', '2.0']->['u5', 'p5', '3.0']\n");
}

}  // namespace

TEST_CASE("version and context basics") {
  CHECK(std::string(fedgat_version()) == "1.0.0");
  Ctx ctx;
  REQUIRE(ctx.ptr != nullptr);
  CHECK(std::string(fedgat_last_error(ctx.ptr)).empty());
  CHECK(std::string(fedgat_last_error(nullptr)).empty());
}

TEST_CASE("validate returns the resolved config") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, R"({"datasets": [{"name": "d", "jsonl": "d.jsonl"}]})");

  Ctx ctx;
  char* resolved = nullptr;
  CHECK(fedgat_validate_config(ctx.ptr, cfg.string().c_str(), &resolved) ==
        FEDGAT_OK);
  REQUIRE(resolved != nullptr);
  const std::string text(resolved);
  fedgat_string_free(resolved);
  CHECK(text.find("\"format_version\": 1") != std::string::npos);
  CHECK(text.find("\"vocab_size\": 5000") != std::string::npos);
  CHECK(std::string(fedgat_last_error(ctx.ptr)).empty());

  CHECK(fedgat_validate_config(ctx.ptr, cfg.string().c_str(), nullptr) ==
        FEDGAT_OK);
}

TEST_CASE("validate reports config errors with field paths") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, R"({"datasets": [{"name": "d", "jsonl": "d.jsonl"}],
                      "federated": {"clients": 2, "sampled": 5}})");

  Ctx ctx;
  char* resolved = nullptr;
  CHECK(fedgat_validate_config(ctx.ptr, cfg.string().c_str(), &resolved) ==
        FEDGAT_ERR_CONFIG);
  CHECK(resolved == nullptr);
  const std::string error = fedgat_last_error(ctx.ptr);
  CHECK(error.find("federated.sampled") != std::string::npos);

  CHECK(fedgat_validate_config(
            ctx.ptr, (tmp.path / "absent.json").string().c_str(), nullptr) ==
        FEDGAT_ERR_CONFIG);
  CHECK(fedgat_validate_config(ctx.ptr, nullptr, nullptr) ==
        FEDGAT_ERR_CONFIG);
}

TEST_CASE("run produces artifacts through the C boundary") {
  TempDir tmp;
  const fs::path jsonl = make_jsonl(tmp.path, 21);
  const fs::path out = tmp.path / "run";
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, config_text(jsonl.string(), out.string()));

  Ctx ctx;
  CHECK(fedgat_run_experiment(ctx.ptr, cfg.string().c_str()) == FEDGAT_OK);
  for (const char* name :
       {"config.resolved.json", "history.jsonl", "loss_curve.csv",
        "metrics.json", "metrics.txt", "checkpoint.bin"}) {
    CHECK_MESSAGE(fs::exists(out / name), name);
  }
}

TEST_CASE("run maps dataset failures to the dataset status") {
  TempDir tmp;
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, config_text((tmp.path / "absent.jsonl").string(),
                              (tmp.path / "run").string()));
  Ctx ctx;
  CHECK(fedgat_run_experiment(ctx.ptr, cfg.string().c_str()) ==
        FEDGAT_ERR_DATASET);
  CHECK_FALSE(std::string(fedgat_last_error(ctx.ptr)).empty());
}

TEST_CASE("environment overrides steer runs through the C boundary") {
  TempDir tmp;
  const fs::path jsonl = make_jsonl(tmp.path, 23);
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, config_text(jsonl.string(), (tmp.path / "ignored").string()));

  const fs::path redirected = tmp.path / "redirected";
  ::setenv("FEDGAT_OUTPUT_DIR", redirected.string().c_str(), 1);
  ::setenv("FEDGAT_SEED", "99", 1);
  Ctx ctx;
  const fedgat_status status =
      fedgat_run_experiment(ctx.ptr, cfg.string().c_str());
  ::unsetenv("FEDGAT_OUTPUT_DIR");
  ::unsetenv("FEDGAT_SEED");
  REQUIRE(status == FEDGAT_OK);
  CHECK(fs::exists(redirected / "checkpoint.bin"));
  CHECK_FALSE(fs::exists(tmp.path / "ignored"));
  const auto resolved =
      nlohmann::json::parse(slurp(redirected / "config.resolved.json"));
  CHECK(resolved.at("seed") == 99);
}

TEST_CASE("sweep reports cell failures in the status") {
  TempDir tmp;
  const fs::path jsonl = make_jsonl(tmp.path, 25);
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, config_text(jsonl.string(), (tmp.path / "sweep").string()));

  const fs::path good_spec = tmp.path / "good.json";
  write_file(good_spec,
             R"({"parameter": "lambda", "values": [0.2], "repetitions": 1})");
  Ctx ctx;
  size_t failed = 123;
  CHECK(fedgat_run_sweep(ctx.ptr, good_spec.string().c_str(),
                         cfg.string().c_str(), &failed) == FEDGAT_OK);
  CHECK(failed == 0);
  CHECK(fs::exists(tmp.path / "sweep" / "combined.csv"));

  const fs::path bad_spec = tmp.path / "bad.json";
  write_file(bad_spec,
             R"({"parameter": "m&k",
                 "values": [{"m": 2, "k": 2}, {"m": 40, "k": 40}],
                 "repetitions": 1})");
  CHECK(fedgat_run_sweep(ctx.ptr, bad_spec.string().c_str(),
                         cfg.string().c_str(), &failed) == FEDGAT_ERR_RUNTIME);
  CHECK(failed == 1);
  CHECK_FALSE(std::string(fedgat_last_error(ctx.ptr)).empty());
}

TEST_CASE("import-raw converts tree layouts to JSONL") {
  TempDir tmp;
  write_raw_layout(tmp.path);
  const fs::path out = tmp.path / "events.jsonl";

  Ctx ctx;
  CHECK(fedgat_import_raw(ctx.ptr, (tmp.path / "trees").string().c_str(),
                          (tmp.path / "label.txt").string().c_str(),
                          out.string().c_str()) == FEDGAT_OK);
  const auto events = fedgat::read_events_jsonl(out.string());
  REQUIRE(events.size() == 2);
  CHECK(events[0].event_id == "e1");
  CHECK(events[0].label == fedgat::Label::FR);
  CHECK(events[1].posts.size() == 3);

  CHECK(fedgat_import_raw(ctx.ptr, (tmp.path / "trees").string().c_str(),
                          (tmp.path / "absent.txt").string().c_str(),
                          out.string().c_str()) == FEDGAT_ERR_DATASET);
}

TEST_CASE("the CLI wires verbs to the C API") {
  TempDir tmp;
  const fs::path jsonl = make_jsonl(tmp.path, 27);
  const fs::path out = tmp.path / "run";
  const fs::path cfg = tmp.path / "cfg.json";
  write_file(cfg, config_text(jsonl.string(), out.string()));

  CHECK(run_cli("validate " + cfg.string() + " > " +
                (tmp.path / "resolved.json").string()) == 0);
  const auto resolved =
      nlohmann::json::parse(slurp(tmp.path / "resolved.json"));
  CHECK(resolved.at("format_version") == 1);

  CHECK(run_cli("run " + cfg.string() + " 2> /dev/null") == 0);
  CHECK(fs::exists(out / "metrics.json"));

  write_raw_layout(tmp.path);
  CHECK(run_cli("import-raw " + (tmp.path / "trees").string() + " " +
                (tmp.path / "label.txt").string() + " " +
                (tmp.path / "imported.jsonl").string() + " 2> /dev/null") ==
        0);
  CHECK(fs::exists(tmp.path / "imported.jsonl"));

  const fs::path bad_cfg = tmp.path / "bad.json";
  write_file(bad_cfg, R"({"datasets": [{"name": "d", "jsonl": "d.jsonl"}],
                          "federated": {"lambda": 2.0}})");
  CHECK(run_cli("validate " + bad_cfg.string() + " 2> /dev/null") == 2);

  write_file(tmp.path / "missing_data.json",
             config_text((tmp.path / "absent.jsonl").string(),
                         (tmp.path / "x").string()));
  CHECK(run_cli("run " + (tmp.path / "missing_data.json").string() +
                " 2> /dev/null") == 3);

  CHECK(run_cli("bogus-verb 2> /dev/null") == 2);
  CHECK(run_cli("--version > /dev/null") == 0);
}
