#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "support.hpp"
#include "taskforge/cli.hpp"
#include "taskforge/dataset.hpp"
#include "taskforge/error.hpp"
#include "taskforge/task_ops.hpp"

using namespace taskforge;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).generic_string()] = ss.str();
  }
  return out;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("fixtures twice give identical trees") {
    testing::TempDir dir("cli_fx");
    REQUIRE(run({"fixtures", "--seed", "0", "--side", "32", "--records", "5", "--out", (dir / "a").string()}).code == 0);
    auto a = tree(dir / "a");
    fs::remove_all(dir / "a");
    REQUIRE(run({"fixtures", "--seed", "0", "--side", "32", "--records", "5", "--out", (dir / "a").string()}).code == 0);
    CHECK(a.size() == 1 + 5 + 5 + 1);
    CHECK(a == tree(dir / "a"));
    run({"fixtures", "--seed", "1", "--side", "32", "--records", "5", "--out", (dir / "c").string()});
    CHECK(a != tree(dir / "c"));
  }

  TEST_CASE("budget over the hard maximum names image_budget") {
    testing::TempDir dir("cli_budget");
    auto r = run({"sample", "--budget", "31", "--out", (dir / "x").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("image_budget") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "x"));
  }

  TEST_CASE("usage errors exit 2") {
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"sample", "--no-such-flag"}).code == 2);
    CHECK(run({"sample", "--budget", "many"}).code == 2);
  }

  TEST_CASE("validation failures name their field") {
    testing::TempDir dir("cli_valid");
    std::string out = (dir / "o").string();
    CHECK(run({"mask", "--p", "1.5", "--out", out}).err.find("masking.p") != std::string::npos);
    CHECK(run({"mask", "--strategy", "blocks", "--out", out}).err.find("masking.strategy") != std::string::npos);
    CHECK(run({"tokenize", "--k", "0", "--out", out}).err.find("masking.k") != std::string::npos);
    CHECK(run({"sample", "--t-max", "16", "--out", out}).err.find("t_max") != std::string::npos);
    CHECK(run({"enrich", "--out", out}).err.find("paths.datasets") != std::string::npos);
    CHECK(run({"fixtures"}).err.find("paths.output") != std::string::npos);
    // 30 images at a 20x20 grid overflow the context window.
    auto r = run({"tokenize", "--grid", "20", "--out", out});
    CHECK(r.code == 1);
    CHECK(r.err.find("image_budget") != std::string::npos);
  }

  TEST_CASE("enrich writes one file per task variant") {
    testing::TempDir dir("cli_enrich");
    run({"fixtures", "--side", "48", "--records", "2", "--out", (dir / "fx").string()});
    auto r = run({"enrich", "--dataset", (dir / "fx").string(), "--side", "48", "--record", "r1", "--out",
                  (dir / "en").string()});
    REQUIRE(r.code == 0);
    RngState vr(0);
    std::size_t pngs = 0;
    for (const auto& e : fs::directory_iterator(dir / "en")) pngs += e.path().extension() == ".png";
    CHECK(pngs == enumerate_task_variants(48, vr).size());
    CHECK(run({"enrich", "--dataset", (dir / "fx").string(), "--record", "nope", "--out", (dir / "x").string()})
              .err.find("data.record") != std::string::npos);
  }

  TEST_CASE("config file with flag overrides, written back as the effective config") {
    testing::TempDir dir("cli_config");
    RunConfig c;
    c.data.side = 32;
    c.data.fixture_records = 3;
    c.seed = 9;
    save_run_config(c, dir / "cfg.json");
    REQUIRE(run({"fixtures", "--config", (dir / "cfg.json").string(), "--records", "4", "--out",
                 (dir / "o").string()}).code == 0);
    RunConfig eff = load_run_config(dir / "o" / "effective_config.json");
    CHECK(eff.seed == 9);
    CHECK(eff.data.side == 32);
    CHECK(eff.data.fixture_records == 4);
    CHECK(load_dataset(dir / "o" / "manifest.json", 32).records.size() == 4);
  }

  TEST_CASE("environment variable supplies the default config") {
    testing::TempDir dir("cli_env");
    RunConfig c;
    c.data.side = 32;
    c.data.fixture_records = 2;
    save_run_config(c, dir / "cfg.json");
    setenv(kConfigEnv, (dir / "cfg.json").c_str(), 1);
    auto r = run({"fixtures", "--out", (dir / "o").string()});
    unsetenv(kConfigEnv);
    REQUIRE(r.code == 0);
    CHECK(load_run_config(dir / "o" / "effective_config.json").data.fixture_records == 2);
  }

  TEST_CASE("config round trip") {
    RunConfig c;
    c.seed = 123456789012345ull;
    c.paths.datasets = {"a/manifest.json", "b"};
    c.paths.output = "out";
    c.codec.kind = "identity";
    c.masking.p = 0.3;
    c.masking.strategy = "mixed";
    c.balance.recolor = true;
    c.eval.predictor = "tokens";
    CHECK(run_config_from_json(to_json(c)) == c);
    testing::TempDir dir("cli_rt");
    save_run_config(c, dir / "c.json");
    CHECK(load_run_config(dir / "c.json") == c);
  }

  TEST_CASE("bad config files") {
    CHECK_THROWS_AS(run_config_from_json(Json{{"sampler", {{"budget", 3}}}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(Json{{"extra", 1}}), ConfigError);
    CHECK_THROWS_AS(run_config_from_json(Json{{"sampler", {{"t_max", "x"}}}}), ConfigError);
    testing::TempDir dir("cli_badcfg");
    std::ofstream(dir / "c.json") << "{ not json";
    auto r = run({"fixtures", "--config", (dir / "c.json").string(), "--out", (dir / "o").string()});
    CHECK(r.code == 1);
  }

  TEST_CASE("whole pipeline reruns byte-identically") {
    testing::TempDir dir("cli_det");
    auto pipeline = [&](const fs::path& root) {
      std::string fx = (root / "fx").string(), b = (root / "bundles").string();
      std::vector<std::vector<std::string>> cmds{
          {"fixtures", "--seed", "3", "--side", "48", "--records", "10", "--out", fx},
          {"enrich", "--seed", "3", "--dataset", fx, "--side", "48", "--record", "r0", "--out", (root / "en").string()},
          {"sample", "--seed", "3", "--dataset", fx, "--side", "48", "--count", "6", "--out", b},
          {"train-codebook", "--seed", "3", "--dataset", fx, "--side", "48", "--vocab", "16", "--patch", "4",
           "--max-images", "12", "--iterations", "3", "--recolor", "--out", (root / "cb").string()},
          {"tokenize", "--bundles", b, "--codebook", (root / "cb" / "codebook.tfcb").string(), "--patch", "4",
           "--out", (root / "tok").string()},
          {"mask", "--seed", "3", "--tokens", (root / "tok" / "tokens.tfts").string(), "--strategy", "mixed",
           "--n-images", "2", "--out", (root / "mask").string()},
          {"eval-codebook", "--seed", "3", "--dataset", fx, "--side", "48",
           "--codebook", (root / "cb" / "codebook.tfcb").string(), "--samples", "2", "--out", (root / "ub").string()},
          {"eval-preds", "--seed", "3", "--bundles", b, "--out", (root / "ev").string()},
          {"eval-preds", "--bundles", b, "--predictor", "tokens", "--predictions",
           (root / "tok" / "tokens.tfts").string(), "--codebook", (root / "cb" / "codebook.tfcb").string(), "--out",
           (root / "evt").string()},
          {"preview", "--bundles", b + "/bundle_0000", "--out", (root / "pv").string()},
      };
      for (const auto& c : cmds) {
        auto r = run(c);
        INFO(c[0] << ": " << r.err);
        REQUIRE(r.code == 0);
      }
    };
    pipeline(dir.path());
    auto first = tree(dir.path());
    for (const auto& e : fs::directory_iterator(dir.path())) fs::remove_all(e.path());
    pipeline(dir.path());
    auto second = tree(dir.path());
    REQUIRE(first.size() == second.size());
    for (const auto& [path, bytes] : first) {
      INFO(path);
      CHECK(bytes == second[path]);
    }
  }
}
