#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <doctest.h>

#include "vatlas/config.hpp"
#include "vatlas/errors.hpp"
#include "vatlas/manifest.hpp"
#include "vatlas/pipeline.hpp"

using namespace vatlas;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const char* tag) {
  fs::path dir = fs::temp_directory_path() /
                 ("vatlas_test_" + std::string(tag) + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  return dir;
}

// Small scene + tiny networks so synth/decompose-level stage mechanics run in
// well under a second.
PipelineConfig tiny_config() {
  PipelineConfig cfg;
  cfg.atlas_size = 16;
  cfg.scene.width = 24;
  cfg.scene.height = 16;
  cfg.scene.frames = 3;
  cfg.scene.sprite_size = 8;
  cfg.scene.motion = MotionKind::Linear;
  cfg.scene.vel_x = 1.0;
  cfg.scene.vel_y = 0.0;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(VATLAS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("the canonical config serialization round-trips") {
  const PipelineConfig cfg = default_config();
  const std::string canon = config_to_json(cfg);
  const PipelineConfig parsed = parse_config(canon);
  CHECK(config_to_json(parsed) == canon);
  CHECK(parsed.scene.width == cfg.scene.width);
  CHECK(parsed.uv.weights.offset == cfg.uv.weights.offset);
  CHECK(parsed.edit.mode == cfg.edit.mode);
}

TEST_CASE("malformed configs are rejected with named errors") {
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"no_such_key": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"scene": {"typo_key": 1}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"scene": {"background": "plaid"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"scene": {"motion": "sideways"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"edit": {"mode": "surreal"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"edit": {"bg_strength": 0.0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"edit": {"bg_strength": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"decompose": {"iterations": -3}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"uv_optimize": {"weights": {"rgb": -1.0}}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"atlas_size": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": "words"})"), ConfigError);
  // Valid partial overrides keep the remaining defaults.
  const PipelineConfig cfg = parse_config(R"({"scene": {"frames": 4}})");
  CHECK(cfg.scene.frames == 4);
  CHECK(cfg.scene.width == default_config().scene.width);
}

TEST_CASE("the hash helpers match the published constants") {
  CHECK(fnv1a("", 0) == 0xcbf29ce484222325ull);
  const char a = 'a';
  CHECK(fnv1a(&a, 1) == 0xaf63dc4c8601ec8cull);
  CHECK(hash_string("") == "cbf29ce484222325");
  CHECK(hash_string("a") == "af63dc4c8601ec8c");
  CHECK(hash_string("ab") != hash_string("ba"));
}

TEST_CASE("manifests round trip through disk atomically") {
  fs::path dir = fresh_dir("manifest");
  fs::create_directories(dir);
  RunManifest m;
  m.config_hash = "0123456789abcdef";
  StageRecord rec;
  rec.completed = true;
  rec.wall_ms = 123.5;
  rec.outputs = {"frames_src/frame_000.png", "metrics/eval.csv"};
  rec.input_hashes = {{"config.json", "aaaa"}, {"frames_src/frame_000.png", "bbbb"}};
  m.stages["synth"] = rec;
  m.stages["eval"] = StageRecord{};

  const fs::path path = dir / "manifest.json";
  save_manifest(path, m);
  CHECK(!fs::exists(path.string() + ".tmp"));
  RunManifest back = load_manifest(path);
  CHECK(back.version == m.version);
  CHECK(back.config_hash == m.config_hash);
  REQUIRE(back.stages.count("synth") == 1);
  CHECK(back.stages["synth"].completed);
  CHECK(back.stages["synth"].wall_ms == doctest::Approx(123.5));
  CHECK(back.stages["synth"].outputs == rec.outputs);
  CHECK(back.stages["synth"].input_hashes == rec.input_hashes);
  CHECK(back.stage_done("synth"));
  CHECK(!back.stage_done("eval"));
  CHECK(!back.stage_done("render"));

  // Missing file -> defaults.
  RunManifest empty = load_manifest(dir / "nonexistent.json");
  CHECK(empty.stages.empty());
  fs::remove_all(dir);
}

TEST_CASE("file hashing is deterministic and content sensitive") {
  fs::path dir = fresh_dir("hash");
  fs::create_directories(dir);
  std::ofstream(dir / "a.bin", std::ios::binary) << "payload";
  std::ofstream(dir / "b.bin", std::ios::binary) << "payloae";
  CHECK(hash_file(dir / "a.bin") == hash_file(dir / "a.bin"));
  CHECK(hash_file(dir / "a.bin") != hash_file(dir / "b.bin"));
  CHECK(hash_file(dir / "a.bin").size() == 16);
  fs::remove_all(dir);
}

TEST_CASE("stage runs record outputs, skip when complete, and honor force") {
  const PipelineConfig cfg = tiny_config();
  fs::path dir = fresh_dir("stage");

  run_stage(cfg, dir, Stage::Synth);
  CHECK(fs::exists(dir / "config.json"));
  for (int k = 0; k < 3; ++k) {
    CHECK(fs::exists(dir / "frames_src" / ("frame_00" + std::to_string(k) + ".png")));
    CHECK(fs::exists(dir / "masks_src" / ("mask_00" + std::to_string(k) + ".png")));
  }
  RunManifest m = load_manifest(dir / "manifest.json");
  CHECK(m.stage_done("synth"));
  CHECK(m.config_hash == hash_string(config_to_json(cfg)));
  CHECK(m.stages["synth"].wall_ms >= 0.0);
  CHECK(m.stages["synth"].outputs.size() >= 6);

  // A completed stage is skipped: a deleted output is not regenerated.
  fs::remove(dir / "frames_src" / "frame_001.png");
  run_stage(cfg, dir, Stage::Synth);
  CHECK(!fs::exists(dir / "frames_src" / "frame_001.png"));

  // force re-runs it.
  run_stage(cfg, dir, Stage::Synth, /*force=*/true);
  CHECK(fs::exists(dir / "frames_src" / "frame_001.png"));
  fs::remove_all(dir);
}

TEST_CASE("a changed config is refused unless forced") {
  const PipelineConfig cfg = tiny_config();
  fs::path dir = fresh_dir("cfgmismatch");
  run_stage(cfg, dir, Stage::Synth);

  PipelineConfig other = cfg;
  other.seed = cfg.seed + 1;
  CHECK_THROWS_AS(run_stage(other, dir, Stage::Synth), ConfigError);

  // Forcing adopts the new config and re-runs from scratch.
  fs::remove(dir / "frames_src" / "frame_000.png");
  run_stage(other, dir, Stage::Synth, /*force=*/true);
  CHECK(fs::exists(dir / "frames_src" / "frame_000.png"));
  RunManifest m = load_manifest(dir / "manifest.json");
  CHECK(m.config_hash == hash_string(config_to_json(other)));
  CHECK(parse_config(slurp(dir / "config.json")).seed == other.seed);
  fs::remove_all(dir);
}

TEST_CASE("stages with missing inputs fail with the dedicated error") {
  const PipelineConfig cfg = tiny_config();
  fs::path dir = fresh_dir("missing");
  CHECK_THROWS_AS(run_stage(cfg, dir, Stage::Decompose), MissingInputError);
  RunManifest m = load_manifest(dir / "manifest.json");
  CHECK(!m.stage_done("decompose"));
  fs::remove_all(dir);
}

TEST_CASE("stage names cover the full order") {
  const std::vector<Stage>& order = all_stages();
  REQUIRE(order.size() == 7);
  CHECK(std::string(stage_name(order.front())) == "synth");
  CHECK(std::string(stage_name(order.back())) == "eval");
}

TEST_CASE("the command line maps error classes to exit codes") {
  fs::path dir = fresh_dir("cli");

  CHECK(run_cli("--definitely-not-a-flag") == 2);
  CHECK(run_cli("synth") == 2);  // --run is required

  // Missing input from a prior stage.
  fs::path miss = dir / "miss";
  CHECK(run_cli("render --run " + miss.string()) == 3);

  // A malformed config file.
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"unknown": 1})";
  CHECK(run_cli("synth --run " + (dir / "r").string() + " --config " +
                (dir / "bad.json").string()) == 2);

  // print-config emits the canonical default serialization.
  const fs::path out = dir / "default.json";
  const std::string cmd =
      std::string(VATLAS_CLI_PATH) + " print-config > " + out.string() + " 2>/dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(slurp(out) == config_to_json(default_config()));
  fs::remove_all(dir);
}

TEST_CASE("the cli runs a real stage and exits cleanly") {
  fs::path dir = fresh_dir("clirun");
  fs::create_directories(dir);
  const PipelineConfig cfg = tiny_config();
  save_config(dir / "cfg.json", cfg);
  const fs::path run = dir / "run";
  CHECK(run_cli("synth --run " + run.string() + " --config " + (dir / "cfg.json").string()) == 0);
  CHECK(fs::exists(run / "frames_src" / "frame_000.png"));

  // The --seed override changes the scene, so the unforced re-run refuses.
  CHECK(run_cli("synth --run " + run.string() + " --config " + (dir / "cfg.json").string() +
                " --seed 99") == 2);
  fs::remove_all(dir);
}

TEST_CASE("the denoiser corpus is deterministic and conditioned") {
  DenoiserConfig net;
  net.image_size = 8;
  net.cond.text_dim = 8;
  net.cond.image_dim = 8;
  net.cond.patch = 4;
  std::vector<DenoiserExample> a = make_texture_corpus(net, 2, 123);
  std::vector<DenoiserExample> b = make_texture_corpus(net, 2, 123);
  REQUIRE(a.size() == 8);  // 3 background classes + object crops, 2 each
  REQUIRE(b.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].z0.rows == 1);
    CHECK(a[i].z0.cols == 8 * 8 * 3);
    CHECK(a[i].z0.d == b[i].z0.d);
    for (double v : a[i].z0.d) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    double text_norm = 0.0;
    for (int j = 0; j < a[i].ctx.text.cols; ++j)
      text_norm += a[i].ctx.text.at(0, j) * a[i].ctx.text.at(0, j);
    CHECK(text_norm == doctest::Approx(1.0).epsilon(1e-9));
  }
  std::vector<DenoiserExample> c = make_texture_corpus(net, 2, 124);
  CHECK(c[0].z0.d != a[0].z0.d);
}
