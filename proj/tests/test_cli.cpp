// End-to-end tests of the command-line binary: exit-code taxonomy, rerun
// byte-identity of every artifact, chance-level scores from an untrained
// model, constant heatmaps when spatial attention is switched off, and the
// gradient-check subcommand.

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "tclsta/bytes.hpp"
#include "tclsta/data.hpp"
#include "tclsta/model.hpp"
#include "tclsta/model_io.hpp"

using namespace tclsta;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("tclsta_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(TCLSTA_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult result;
  char buf[512];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) result.output.append(buf, n);
  const int status = ::pclose(pipe);
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

// One shared tiny configuration keeps every CLI run under a second.
const char* kTinyConfig = R"({
  "data": {"num_classes": 3, "train_per_class": 5, "test_per_class": 3, "frames": 5,
           "grid_rows": 3, "grid_cols": 3, "channels": 5, "signal_frames": 2, "seed": 11},
  "model": {"lstm_hidden": 8, "collab_hidden": 5, "collab_segments": 4},
  "train": {"learning_rate": 0.05, "max_iterations": 40, "batch_size": 5,
            "eval_interval": 20, "seed": 11}
})";

std::filesystem::path write_tiny_config(const TempDir& dir) {
  const std::filesystem::path p = dir.path / "config.json";
  detail::write_file_bytes(p.string(), kTinyConfig);
  return p;
}

// Runs gen-data -> train -> collab -> fuse -> eval under `root`, returning the
// paths of every produced artifact.
struct PipelinePaths {
  std::filesystem::path manifest, stage1, stage2, weights, report;
};

PipelinePaths run_pipeline(const std::filesystem::path& config,
                           const std::filesystem::path& root) {
  PipelinePaths p;
  p.manifest = root / "data" / "manifest.json";
  p.stage1 = root / "stage1.tclm";
  p.stage2 = root / "stage2.tclm";
  p.weights = root / "weights.json";
  p.report = root / "report.json";
  const std::string cfg = " --config " + quoted(config) + " ";
  REQUIRE(run_cli("gen-data" + cfg + "--out-dir " + quoted(root / "data") +
                  " --no-timestamp").code == 0);
  REQUIRE(run_cli("train" + cfg + "--data " + quoted(p.manifest) + " --stream both --out " +
                  quoted(p.stage1)).code == 0);
  REQUIRE(run_cli("collab" + cfg + "--data " + quoted(p.manifest) + " --checkpoints " +
                  quoted(p.stage1) + " --out " + quoted(p.stage2)).code == 0);
  REQUIRE(run_cli("fuse" + cfg + "--data " + quoted(p.manifest) + " --checkpoints " +
                  quoted(p.stage2) + " --out " + quoted(p.weights) + " --no-timestamp").code == 0);
  REQUIRE(run_cli("eval --data " + quoted(p.manifest) + " --checkpoints " + quoted(p.stage2) +
                  " --weights " + quoted(p.weights) + " --report " + quoted(p.report) +
                  " --no-timestamp").code == 0);
  return p;
}

std::string file_bytes(const std::filesystem::path& p) {
  return detail::read_file_bytes(p.string());
}

// An initialized but never-trained two-stream checkpoint.
std::filesystem::path write_untrained_bundle(const TempDir& dir, const ModelConfig& mcfg,
                                             bool spatial_attention) {
  CheckpointBundle b;
  b.config = mcfg;
  b.static_model = make_stream_model(mcfg, 101, spatial_attention, true);
  b.motion_model = make_stream_model(mcfg, 202, spatial_attention, true);
  b.has_static = b.has_motion = true;
  const std::filesystem::path p = dir.path / "untrained.tclm";
  save_bundle(p.string(), b);
  return p;
}

}  // namespace

TEST_CASE("usage problems exit with code 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("no-such-subcommand").code == 2);
  CHECK(run_cli("train --data x.json --out y.tclm --stream sideways").code == 2);
  CHECK(run_cli("eval --data x.json").code == 2);  // missing required flags
  CHECK(run_cli("--help").code == 0);
}

TEST_CASE("missing input files exit with code 3") {
  TempDir dir;
  const auto r1 = run_cli("train --data " + quoted(dir.path / "absent" / "manifest.json") +
                          " --stream both --out " + quoted(dir.path / "out.tclm"));
  CHECK(r1.code == 3);
  CHECK(r1.output.find("error: manifest-not-found") != std::string::npos);

  const auto cfg = write_tiny_config(dir);
  REQUIRE(run_cli("gen-data --config " + quoted(cfg) + " --out-dir " +
                  quoted(dir.path / "data") + " --no-timestamp").code == 0);
  const auto r2 = run_cli("eval --data " + quoted(dir.path / "data" / "manifest.json") +
                          " --checkpoints " + quoted(dir.path / "absent.tclm") + " --report " +
                          quoted(dir.path / "report.json"));
  CHECK(r2.code == 3);
  CHECK(r2.output.find("error: file-not-found") != std::string::npos);
}

TEST_CASE("validation problems exit with code 4") {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  REQUIRE(run_cli("gen-data --config " + quoted(cfg) + " --out-dir " +
                  quoted(dir.path / "data") + " --no-timestamp").code == 0);
  const auto manifest = dir.path / "data" / "manifest.json";

  const std::filesystem::path garbage = dir.path / "garbage.tclm";
  detail::write_file_bytes(garbage.string(), "not a checkpoint");
  const auto r1 = run_cli("eval --data " + quoted(manifest) + " --checkpoints " +
                          quoted(garbage) + " --report " + quoted(dir.path / "r.json"));
  CHECK(r1.code == 4);
  CHECK(r1.output.find("error: corrupt-file") != std::string::npos);

  const std::filesystem::path typo = dir.path / "typo.json";
  detail::write_file_bytes(typo.string(), R"({"trian": {}})");
  const auto r2 = run_cli("train --config " + quoted(typo) + " --data " + quoted(manifest) +
                          " --stream both --out " + quoted(dir.path / "o.tclm"));
  CHECK(r2.code == 4);
  CHECK(r2.output.find("error: bad-config") != std::string::npos);

  const auto r3 = run_cli("gen-data --config " + quoted(typo) + " --out-dir " +
                          quoted(dir.path / "d2"));
  CHECK(r3.code == 4);
}

TEST_CASE("pipeline reruns produce byte-identical artifacts") {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  const PipelinePaths a = run_pipeline(cfg, dir.path / "run1");
  const PipelinePaths b = run_pipeline(cfg, dir.path / "run2");

  CHECK(file_bytes(a.manifest) == file_bytes(b.manifest));
  CHECK(file_bytes(a.manifest.parent_path() / "videos" / "v0000.fvs") ==
        file_bytes(b.manifest.parent_path() / "videos" / "v0000.fvs"));
  CHECK(file_bytes(a.stage1) == file_bytes(b.stage1));
  CHECK(file_bytes(a.stage2) == file_bytes(b.stage2));
  CHECK(file_bytes(a.weights) == file_bytes(b.weights));
  CHECK(file_bytes(a.report) == file_bytes(b.report));

  const json report = json::parse(file_bytes(a.report));
  CHECK(report.contains("timestamp") == false);
  CHECK(report.contains("config"));
  CHECK(report["config"].contains("model"));
  CHECK(report["accuracy"].get<double>() >= 0.0);
  CHECK(report["confusion"].size() == 3);
}

TEST_CASE("an untrained model scores near chance level") {
  TempDir dir;
  SyntheticConfig dcfg;
  dcfg.num_classes = 5;
  dcfg.train_per_class = 1;
  dcfg.test_per_class = 8;  // 40 test videos
  dcfg.frames = 5;
  dcfg.grid_rows = 3;
  dcfg.grid_cols = 3;
  dcfg.channels = 6;
  dcfg.signal_frames = 2;
  dcfg.seed = 21;
  write_dataset((dir.path / "data").string(), generate_synthetic(dcfg));

  ModelConfig mcfg;
  mcfg.num_classes = 5;
  mcfg.channels = 6;
  mcfg.cam_channels = 6;
  mcfg.lstm_hidden = 8;
  mcfg.collab_hidden = 5;
  mcfg.collab_segments = 4;
  const auto ckpt = write_untrained_bundle(dir, mcfg, true);

  const auto report_path = dir.path / "report.json";
  const auto r = run_cli("eval --data " + quoted(dir.path / "data" / "manifest.json") +
                         " --checkpoints " + quoted(ckpt) + " --report " + quoted(report_path));
  REQUIRE(r.code == 0);
  const json report = json::parse(file_bytes(report_path));
  const double accuracy = report["accuracy"].get<double>();
  CHECK(accuracy <= 0.45);  // chance level is 0.2 on five balanced categories
  CHECK(report.contains("timestamp"));  // only --no-timestamp suppresses it
}

TEST_CASE("export-attention writes constant heatmaps when spatial attention is off") {
  TempDir dir;
  const auto cfg = write_tiny_config(dir);
  REQUIRE(run_cli("gen-data --config " + quoted(cfg) + " --out-dir " +
                  quoted(dir.path / "data") + " --no-timestamp").code == 0);

  ModelConfig mcfg;
  mcfg.num_classes = 3;
  mcfg.channels = 5;
  mcfg.cam_channels = 5;
  mcfg.lstm_hidden = 8;
  mcfg.collab_hidden = 5;
  mcfg.collab_segments = 4;
  const auto ckpt = write_untrained_bundle(dir, mcfg, /*spatial_attention=*/false);

  const auto out = dir.path / "attn";
  const auto r = run_cli("export-attention --data " + quoted(dir.path / "data" / "manifest.json") +
                         " --checkpoints " + quoted(ckpt) + " --video-id 0 --out " + quoted(out) +
                         " --no-timestamp");
  REQUIRE(r.code == 0);

  const std::string pgm = file_bytes(out / "static_frame00.pgm");
  const std::string header = "P2\n3 3\n255\n";
  REQUIRE(pgm.rfind(header, 0) == 0);
  std::size_t cells = 0;
  for (std::size_t pos = header.size(); pos < pgm.size();) {  // payload after the header
    const std::size_t next = pgm.find_first_of(" \n", pos);
    REQUIRE(pgm.substr(pos, next - pos) == "255");
    ++cells;
    pos = next + 1;
  }
  CHECK(cells == 9);

  const json attn = json::parse(file_bytes(out / "attention.json"));
  REQUIRE(attn["streams"].contains("static"));
  REQUIRE(attn["streams"].contains("motion"));
  const auto& weights = attn["streams"]["static"]["temporal_weights"];
  REQUIRE(weights.size() == 5);
  double total = 0.0;
  for (const auto& w : weights) total += w.get<double>();
  CHECK(total == Catch::Approx(1.0).margin(1e-12));
  CHECK(attn["streams"]["static"]["spatial_maps"].size() == 5);
  CHECK(attn["streams"]["static"]["spatial_maps"][0].size() == 3);

  const auto r_missing =
      run_cli("export-attention --data " + quoted(dir.path / "data" / "manifest.json") +
              " --checkpoints " + quoted(ckpt) + " --video-id 9999 --out " + quoted(out));
  CHECK(r_missing.code == 4);
}

TEST_CASE("gradcheck subcommand passes with the default seed") {
  const auto r = run_cli("gradcheck --seeds 1");
  CHECK(r.code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);
}
