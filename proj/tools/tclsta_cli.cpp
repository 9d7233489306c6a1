// Command-line front end for the two-stream activation-grid classifier:
// dataset generation, staged training (per-stream, then collaborative),
// fusion-weight learning, evaluation, the ablation table, attention export,
// and the finite-difference gradient check.
//
// Configuration precedence is flags > JSON config file > built-in defaults,
// and every JSON report embeds the effective configuration. Outputs are
// byte-identical across reruns with the same inputs and seed once the
// optional timestamp field is suppressed with --no-timestamp.
//
// Exit codes: 0 success, 2 usage error, 3 missing file, 4 validation or
// data error (one `error: <category>: <detail>` line on stderr).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tclsta/bytes.hpp"
#include "tclsta/data.hpp"
#include "tclsta/gradcheck.hpp"
#include "tclsta/model.hpp"
#include "tclsta/model_io.hpp"
#include "tclsta/pipeline.hpp"

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON plumbing

json parse_json_file(const std::string& path) {
  const std::string bytes = tclsta::detail::read_file_bytes(path);
  json j = json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) tclsta::fail("corrupt-file", path + ": not valid JSON");
  return j;
}

std::uint64_t json_u64(const json& v, const std::string& where) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0)
    return static_cast<std::uint64_t>(v.get<std::int64_t>());
  tclsta::fail("bad-config", where + ": expected a non-negative integer");
}

std::size_t json_size(const json& v, const std::string& where) {
  const std::uint64_t u = json_u64(v, where);
  if (u > (1ull << 32)) tclsta::fail("bad-config", where + ": value is implausibly large");
  return static_cast<std::size_t>(u);
}

double json_f64(const json& v, const std::string& where) {
  if (!v.is_number()) tclsta::fail("bad-config", where + ": expected a number");
  return v.get<double>();
}

bool json_bool(const json& v, const std::string& where) {
  if (!v.is_boolean()) tclsta::fail("bad-config", where + ": expected true or false");
  return v.get<bool>();
}

void reject_unknown_keys(const json& section, std::initializer_list<const char*> known,
                         const std::string& where) {
  if (!section.is_object()) tclsta::fail("bad-config", where + ": expected a JSON object");
  for (const auto& item : section.items()) {
    if (std::none_of(known.begin(), known.end(),
                     [&](const char* k) { return item.key() == k; }))
      tclsta::fail("bad-config", where + ": unknown key '" + item.key() + "'");
  }
}

// A single config file can drive the whole pipeline; each subcommand applies
// only the sections it uses, but typos anywhere are rejected.
json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = parse_json_file(path);
  reject_unknown_keys(j, {"data", "model", "train", "fusion"}, path);
  return j;
}

void apply_data_section(const json& s, tclsta::SyntheticConfig& cfg) {
  reject_unknown_keys(s,
                      {"num_classes", "train_per_class", "val_per_class", "test_per_class",
                       "frames", "grid_rows", "grid_cols", "channels", "signal_frames",
                       "block_rows", "block_cols", "signal_amplitude", "noise_sigma", "seed"},
                      "data");
  if (s.contains("num_classes")) cfg.num_classes = json_size(s["num_classes"], "data.num_classes");
  if (s.contains("train_per_class"))
    cfg.train_per_class = json_size(s["train_per_class"], "data.train_per_class");
  if (s.contains("val_per_class"))
    cfg.val_per_class = json_size(s["val_per_class"], "data.val_per_class");
  if (s.contains("test_per_class"))
    cfg.test_per_class = json_size(s["test_per_class"], "data.test_per_class");
  if (s.contains("frames")) cfg.frames = json_size(s["frames"], "data.frames");
  if (s.contains("grid_rows")) cfg.grid_rows = json_size(s["grid_rows"], "data.grid_rows");
  if (s.contains("grid_cols")) cfg.grid_cols = json_size(s["grid_cols"], "data.grid_cols");
  if (s.contains("channels")) cfg.channels = json_size(s["channels"], "data.channels");
  if (s.contains("signal_frames"))
    cfg.signal_frames = json_size(s["signal_frames"], "data.signal_frames");
  if (s.contains("block_rows")) cfg.block_rows = json_size(s["block_rows"], "data.block_rows");
  if (s.contains("block_cols")) cfg.block_cols = json_size(s["block_cols"], "data.block_cols");
  if (s.contains("signal_amplitude"))
    cfg.signal_amplitude = json_f64(s["signal_amplitude"], "data.signal_amplitude");
  if (s.contains("noise_sigma")) cfg.noise_sigma = json_f64(s["noise_sigma"], "data.noise_sigma");
  if (s.contains("seed")) cfg.seed = json_u64(s["seed"], "data.seed");
}

void apply_model_section(const json& s, tclsta::ModelConfig& cfg) {
  reject_unknown_keys(s,
                      {"num_classes", "channels", "cam_channels", "lstm_hidden", "collab_hidden",
                       "collab_segments", "collab_rounds"},
                      "model");
  if (s.contains("num_classes")) cfg.num_classes = json_size(s["num_classes"], "model.num_classes");
  if (s.contains("channels")) cfg.channels = json_size(s["channels"], "model.channels");
  if (s.contains("cam_channels"))
    cfg.cam_channels = json_size(s["cam_channels"], "model.cam_channels");
  if (s.contains("lstm_hidden")) cfg.lstm_hidden = json_size(s["lstm_hidden"], "model.lstm_hidden");
  if (s.contains("collab_hidden"))
    cfg.collab_hidden = json_size(s["collab_hidden"], "model.collab_hidden");
  if (s.contains("collab_segments"))
    cfg.collab_segments = json_size(s["collab_segments"], "model.collab_segments");
  if (s.contains("collab_rounds"))
    cfg.collab_rounds = json_size(s["collab_rounds"], "model.collab_rounds");
}

void apply_train_section(const json& s, tclsta::TrainConfig& cfg) {
  reject_unknown_keys(s,
                      {"learning_rate", "momentum", "weight_decay", "batch_size", "max_iterations",
                       "lr_drop_factor", "patience", "max_drops", "eval_interval", "seed",
                       "finetune_streams"},
                      "train");
  if (s.contains("learning_rate"))
    cfg.learning_rate = json_f64(s["learning_rate"], "train.learning_rate");
  if (s.contains("momentum")) cfg.momentum = json_f64(s["momentum"], "train.momentum");
  if (s.contains("weight_decay"))
    cfg.weight_decay = json_f64(s["weight_decay"], "train.weight_decay");
  if (s.contains("batch_size")) cfg.batch_size = json_size(s["batch_size"], "train.batch_size");
  if (s.contains("max_iterations"))
    cfg.max_iterations = json_size(s["max_iterations"], "train.max_iterations");
  if (s.contains("lr_drop_factor"))
    cfg.lr_drop_factor = json_f64(s["lr_drop_factor"], "train.lr_drop_factor");
  if (s.contains("patience")) cfg.patience = json_size(s["patience"], "train.patience");
  if (s.contains("max_drops")) cfg.max_drops = json_size(s["max_drops"], "train.max_drops");
  if (s.contains("eval_interval"))
    cfg.eval_interval = json_size(s["eval_interval"], "train.eval_interval");
  if (s.contains("seed")) cfg.seed = json_u64(s["seed"], "train.seed");
  if (s.contains("finetune_streams"))
    cfg.finetune_streams = json_bool(s["finetune_streams"], "train.finetune_streams");
}

void apply_fusion_section(const json& s, double& lambda, double& epsilon) {
  reject_unknown_keys(s, {"lambda", "epsilon"}, "fusion");
  if (s.contains("lambda")) lambda = json_f64(s["lambda"], "fusion.lambda");
  if (s.contains("epsilon")) epsilon = json_f64(s["epsilon"], "fusion.epsilon");
}

// ---------------------------------------------------------------------------
// effective-config echoes

json data_json(const tclsta::SyntheticConfig& c) {
  return json{{"num_classes", c.num_classes},
              {"train_per_class", c.train_per_class},
              {"val_per_class", c.val_per_class},
              {"test_per_class", c.test_per_class},
              {"frames", c.frames},
              {"grid_rows", c.grid_rows},
              {"grid_cols", c.grid_cols},
              {"channels", c.channels},
              {"signal_frames", c.signal_frames},
              {"block_rows", c.block_rows},
              {"block_cols", c.block_cols},
              {"signal_amplitude", c.signal_amplitude},
              {"noise_sigma", c.noise_sigma},
              {"seed", c.seed}};
}

json model_json(const tclsta::ModelConfig& c) {
  return json{{"num_classes", c.num_classes},     {"channels", c.channels},
              {"cam_channels", c.cam_channels},   {"lstm_hidden", c.lstm_hidden},
              {"collab_hidden", c.collab_hidden}, {"collab_segments", c.collab_segments},
              {"collab_rounds", c.collab_rounds}};
}

json train_json(const tclsta::TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"momentum", c.momentum},
              {"weight_decay", c.weight_decay},
              {"batch_size", c.batch_size},
              {"max_iterations", c.max_iterations},
              {"lr_drop_factor", c.lr_drop_factor},
              {"patience", c.patience},
              {"max_drops", c.max_drops},
              {"eval_interval", c.eval_interval},
              {"seed", c.seed},
              {"finetune_streams", c.finetune_streams}};
}

// ---------------------------------------------------------------------------
// report and artifact helpers

std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void ensure_parent(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_report(const std::string& path, json report, bool no_timestamp) {
  if (!no_timestamp) report["timestamp"] = utc_timestamp();
  ensure_parent(path);
  tclsta::detail::write_file_bytes(path, report.dump(2) + "\n");
}

void echo_config(const json& config) {
  std::printf("effective config: %s\n", config.dump().c_str());
}

tclsta::ModelConfig infer_model_config(const tclsta::Dataset& data) {
  tclsta::ModelConfig m;
  int max_label = -1;
  std::size_t channels = 0;
  auto scan = [&](const std::vector<tclsta::VideoSample>& split) {
    for (const tclsta::VideoSample& v : split) {
      max_label = std::max(max_label, v.label);
      if (channels == 0 && !v.static_frames.empty()) channels = v.static_frames[0].channels;
    }
  };
  scan(data.train);
  scan(data.val);
  scan(data.test);
  if (max_label < 0 || channels == 0)
    tclsta::fail("bad-config", "cannot infer model dimensions from an empty dataset");
  m.num_classes = static_cast<std::size_t>(max_label) + 1;
  m.channels = channels;
  m.cam_channels = channels;
  return m;
}

void require_streams(const tclsta::CheckpointBundle& b) {
  if (!b.has_static || !b.has_motion)
    tclsta::fail("bad-config", "this command needs a checkpoint holding both trained streams");
}

// Scores for one split: collaborative refinement when the checkpoint carries
// the collaborative module, otherwise the raw per-stream head averages.
std::vector<tclsta::StreamScores> score_split(const tclsta::CheckpointBundle& b,
                                              const std::vector<tclsta::VideoSample>& split) {
  std::vector<tclsta::StreamScores> out;
  out.reserve(split.size());
  for (const tclsta::VideoSample& v : split)
    out.push_back(b.has_collab
                      ? tclsta::collab_scores(b.static_model, b.motion_model, b.collab, b.config, v)
                      : tclsta::sta_scores(b.static_model, b.motion_model, v));
  return out;
}

json weights_payload(const tclsta::FusionWeights& w) {
  json rows = json::array();
  for (const auto& pc : w.per_class) rows.push_back(json::array({pc[0], pc[1]}));
  return json{{"lambda", w.lambda}, {"epsilon", w.epsilon}, {"per_class", rows}};
}

tclsta::FusionWeights read_weights_file(const std::string& path) {
  const json j = parse_json_file(path);
  if (!j.is_object() || !j.contains("per_class") || !j["per_class"].is_array())
    tclsta::fail("corrupt-file", path + ": missing per-class weight rows");
  tclsta::FusionWeights w;
  for (const json& row : j["per_class"]) {
    if (!row.is_array() || row.size() != 2)
      tclsta::fail("corrupt-file", path + ": each weight row needs exactly two entries");
    w.per_class.push_back({json_f64(row[0], path), json_f64(row[1], path)});
  }
  if (w.per_class.empty()) tclsta::fail("corrupt-file", path + ": no weight rows");
  if (j.contains("lambda")) w.lambda = json_f64(j["lambda"], path);
  if (j.contains("epsilon")) w.epsilon = json_f64(j["epsilon"], path);
  return w;
}

json eval_payload(const tclsta::EvalReport& r) {
  return json{{"accuracy", r.accuracy},
              {"map", r.map_score},
              {"per_class_ap", r.per_class_ap},
              {"confusion", r.confusion},
              {"videos", r.videos}};
}

// Plain-ASCII grayscale rendering of one attention map, brightest cell = 255.
std::string pgm_text(const std::vector<double>& map, std::size_t rows, std::size_t cols) {
  double peak = 0.0;
  for (double v : map) peak = std::max(peak, v);
  std::string out = "P2\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = map[r * cols + c];
      const long pixel =
          peak > 0.0 ? std::clamp(std::lround(255.0 * v / peak), 0l, 255l) : 0l;
      out += std::to_string(pixel);
      out.push_back(c + 1 < cols ? ' ' : '\n');
    }
  }
  return out;
}

std::string ablation_text(const tclsta::AblationTable& table) {
  std::string out = "configuration                                    accuracy       map\n";
  char line[96];
  for (const tclsta::AblationRow& r : table.rows) {
    std::snprintf(line, sizeof line, "%-48s %8.3f %9.3f\n", r.name.c_str(), r.accuracy,
                  r.map_score);
    out += line;
  }
  return out;
}

const tclsta::VideoSample* find_video(const tclsta::Dataset& data, int id) {
  for (const auto* split : {&data.train, &data.val, &data.test})
    for (const tclsta::VideoSample& v : *split)
      if (v.id == id) return &v;
  return nullptr;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "two-stream activation-grid video classifier: synthetic data, staged "
      "training, per-category fusion, evaluation, and attention export"};
  app.require_subcommand(1);

  // Option storage shared across subcommands; one subcommand runs per
  // invocation, so overlapping fields cannot collide.
  struct {
    std::string config, data, out, out_dir, checkpoints, weights, report;
    std::string stream = "both";
    std::uint64_t seed = 1;
    double learning_rate = 0.0;
    std::size_t iterations = 0;
    double lambda = 5e-3;
    double epsilon = 0.0;
    int video_id = 0;
    std::size_t gradcheck_seeds = 3;
    bool finetune = false;
    bool no_timestamp = false;
  } o;
  int rc = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", o.config, "JSON config file (sections: data, model, train, fusion)");
    cmd->add_flag("--no-timestamp", o.no_timestamp, "omit the timestamp from JSON reports");
  };

  // ---- gen-data -----------------------------------------------------------
  CLI::App* gen = app.add_subcommand(
      "gen-data", "write a synthetic activation-grid dataset (binary videos + JSON manifest)");
  add_common(gen);
  gen->add_option("--out-dir", o.out_dir, "dataset output directory")->required();
  CLI::Option* gen_seed = gen->add_option("--seed", o.seed, "override the dataset seed");
  gen->callback([&] {
    const json file = load_config(o.config);
    tclsta::SyntheticConfig cfg;
    if (file.contains("data")) apply_data_section(file["data"], cfg);
    if (gen_seed->count() > 0) cfg.seed = o.seed;
    const tclsta::Dataset data = tclsta::generate_synthetic(cfg);
    const std::string manifest = tclsta::write_dataset(o.out_dir, data);
    const json config{{"data", data_json(cfg)}};
    json report{{"config", config},
                {"manifest", "manifest.json"},
                {"videos",
                 json{{"train", data.train.size()},
                      {"val", data.val.size()},
                      {"test", data.test.size()}}}};
    write_report((std::filesystem::path(o.out_dir) / "generation.json").string(), report,
                 o.no_timestamp);
    echo_config(config);
    std::printf("wrote %s (%zu train, %zu val, %zu test videos)\n", manifest.c_str(),
                data.train.size(), data.val.size(), data.test.size());
  });

  // ---- train --------------------------------------------------------------
  CLI::App* tr = app.add_subcommand("train", "stage 1: train the static and/or motion stream");
  add_common(tr);
  tr->add_option("--data", o.data, "dataset manifest")->required();
  tr->add_option("--stream", o.stream, "which stream(s) to train")
      ->check(CLI::IsMember({"static", "motion", "both"}));
  tr->add_option("--out", o.out, "output checkpoint path")->required();
  CLI::Option* tr_seed = tr->add_option("--seed", o.seed, "override the training seed");
  CLI::Option* tr_lr = tr->add_option("--lr", o.learning_rate, "override the learning rate");
  CLI::Option* tr_iters =
      tr->add_option("--iterations", o.iterations, "override the iteration count");
  tr->callback([&] {
    const json file = load_config(o.config);
    const tclsta::Dataset data = tclsta::load_dataset(o.data);
    tclsta::ModelConfig mcfg = infer_model_config(data);
    if (file.contains("model")) apply_model_section(file["model"], mcfg);
    tclsta::TrainConfig tcfg;
    if (file.contains("train")) apply_train_section(file["train"], tcfg);
    if (tr_seed->count() > 0) tcfg.seed = o.seed;
    if (tr_lr->count() > 0) tcfg.learning_rate = o.learning_rate;
    if (tr_iters->count() > 0) tcfg.max_iterations = o.iterations;
    mcfg.validate();
    tcfg.validate();

    tclsta::CheckpointBundle bundle;
    bundle.config = mcfg;
    if (o.stream == "static" || o.stream == "both") {
      tclsta::TrainLog log;
      bundle.static_model =
          tclsta::train_stream(data, tclsta::StreamKind::kStatic, mcfg, tcfg, true, true, &log);
      bundle.has_static = true;
      std::printf("static stream: final held-out accuracy %.3f\n",
                  log.held_out_accuracy.empty() ? 0.0 : log.held_out_accuracy.back());
    }
    if (o.stream == "motion" || o.stream == "both") {
      tclsta::TrainLog log;
      bundle.motion_model =
          tclsta::train_stream(data, tclsta::StreamKind::kMotion, mcfg, tcfg, true, true, &log);
      bundle.has_motion = true;
      std::printf("motion stream: final held-out accuracy %.3f\n",
                  log.held_out_accuracy.empty() ? 0.0 : log.held_out_accuracy.back());
    }
    ensure_parent(o.out);
    tclsta::save_bundle(o.out, bundle);
    echo_config(json{{"model", model_json(mcfg)}, {"train", train_json(tcfg)}, {"stream", o.stream}});
    std::printf("wrote %s\n", o.out.c_str());
  });

  // ---- collab -------------------------------------------------------------
  CLI::App* co = app.add_subcommand(
      "collab", "stage 2: train the collaborative module over a two-stream checkpoint");
  add_common(co);
  co->add_option("--data", o.data, "dataset manifest")->required();
  co->add_option("--checkpoints", o.checkpoints, "stage-1 checkpoint with both streams")
      ->required();
  co->add_option("--out", o.out, "output checkpoint path")->required();
  CLI::Option* co_seed = co->add_option("--seed", o.seed, "override the training seed");
  CLI::Option* co_fine =
      co->add_flag("--finetune", o.finetune, "also update the stream weights during stage 2");
  co->callback([&] {
    const json file = load_config(o.config);
    const tclsta::Dataset data = tclsta::load_dataset(o.data);
    tclsta::CheckpointBundle bundle = tclsta::load_bundle(o.checkpoints);
    require_streams(bundle);
    tclsta::TrainConfig tcfg;
    if (file.contains("train")) apply_train_section(file["train"], tcfg);
    if (co_seed->count() > 0) tcfg.seed = o.seed;
    if (co_fine->count() > 0) tcfg.finetune_streams = true;
    tcfg.validate();

    tclsta::TrainLog log;
    bundle.collab = tclsta::train_collaborative(data, bundle.static_model, bundle.motion_model,
                                                bundle.config, tcfg, &log);
    bundle.has_collab = true;
    ensure_parent(o.out);
    tclsta::save_bundle(o.out, bundle);
    echo_config(json{{"model", model_json(bundle.config)}, {"train", train_json(tcfg)}});
    std::printf("collaborative stage: final held-out accuracy %.3f\nwrote %s\n",
                log.held_out_accuracy.empty() ? 0.0 : log.held_out_accuracy.back(),
                o.out.c_str());
  });

  // ---- fuse ---------------------------------------------------------------
  CLI::App* fu = app.add_subcommand(
      "fuse", "learn per-category fusion weights from training-split scores");
  add_common(fu);
  fu->add_option("--data", o.data, "dataset manifest")->required();
  fu->add_option("--checkpoints", o.checkpoints, "trained checkpoint")->required();
  CLI::Option* fu_lambda =
      fu->add_option("--lambda", o.lambda, "cross-category score penalty weight");
  CLI::Option* fu_epsilon =
      fu->add_option("--epsilon", o.epsilon, "minimum weight floor for the weaker stream");
  fu->add_option("--out", o.out, "output weights JSON")->required();
  fu->callback([&] {
    const json file = load_config(o.config);
    double lambda = 5e-3, epsilon = 0.0;
    if (file.contains("fusion")) apply_fusion_section(file["fusion"], lambda, epsilon);
    if (fu_lambda->count() > 0) lambda = o.lambda;
    if (fu_epsilon->count() > 0) epsilon = o.epsilon;
    const tclsta::Dataset data = tclsta::load_dataset(o.data);
    const tclsta::CheckpointBundle bundle = tclsta::load_bundle(o.checkpoints);
    require_streams(bundle);
    const std::vector<tclsta::StreamScores> train_scores = score_split(bundle, data.train);
    const tclsta::FusionWeights w = tclsta::learn_weights(train_scores, lambda, epsilon);
    const json config{{"fusion", json{{"lambda", lambda}, {"epsilon", epsilon}}},
                      {"scores", bundle.has_collab ? "collaborative" : "stream"}};
    json report = weights_payload(w);
    report["config"] = config;
    write_report(o.out, report, o.no_timestamp);
    echo_config(config);
    std::printf("wrote %s (%zu categories)\n", o.out.c_str(), w.num_classes());
  });

  // ---- eval ---------------------------------------------------------------
  CLI::App* ev = app.add_subcommand("eval", "score the test split and write an evaluation report");
  add_common(ev);
  ev->add_option("--data", o.data, "dataset manifest")->required();
  ev->add_option("--checkpoints", o.checkpoints, "trained checkpoint")->required();
  ev->add_option("--weights", o.weights, "fusion weights JSON (uniform weights when omitted)");
  ev->add_option("--report", o.report, "output report JSON")->required();
  ev->callback([&] {
    load_config(o.config);  // validated for typos; eval itself has no tunables
    const tclsta::Dataset data = tclsta::load_dataset(o.data);
    const tclsta::CheckpointBundle bundle = tclsta::load_bundle(o.checkpoints);
    require_streams(bundle);
    const tclsta::FusionWeights w = o.weights.empty()
                                        ? tclsta::uniform_weights(bundle.config.num_classes)
                                        : read_weights_file(o.weights);
    std::vector<tclsta::VideoScore> scored;
    for (const tclsta::StreamScores& s : score_split(bundle, data.test))
      scored.push_back({s.video_id, s.label, tclsta::fused_scores(w, s)});
    const tclsta::EvalReport r = tclsta::evaluate_scores(scored, bundle.config.num_classes);
    const json config{{"model", model_json(bundle.config)},
                      {"scores", bundle.has_collab ? "collaborative" : "stream"},
                      {"weights_source", o.weights.empty() ? "uniform" : "file"}};
    json report = eval_payload(r);
    report["config"] = config;
    write_report(o.report, report, o.no_timestamp);
    echo_config(config);
    std::printf("accuracy %.3f  map %.3f  (%zu videos)\nwrote %s\n", r.accuracy, r.map_score,
                r.videos, o.report.c_str());
  });

  // ---- ablate -------------------------------------------------------------
  CLI::App* ab = app.add_subcommand(
      "ablate", "train every attention/collaboration/fusion variant and tabulate test accuracy");
  add_common(ab);
  ab->add_option("--data", o.data, "dataset manifest")->required();
  ab->add_option("--out", o.out, "output JSON path (aligned text lands next to it as .txt)")
      ->required();
  CLI::Option* ab_seed = ab->add_option("--seed", o.seed, "override the training seed");
  ab->callback([&] {
    const json file = load_config(o.config);
    const tclsta::Dataset data = tclsta::load_dataset(o.data);
    tclsta::ModelConfig mcfg = infer_model_config(data);
    if (file.contains("model")) apply_model_section(file["model"], mcfg);
    tclsta::TrainConfig tcfg;
    if (file.contains("train")) apply_train_section(file["train"], tcfg);
    if (ab_seed->count() > 0) tcfg.seed = o.seed;
    double lambda = 5e-3, epsilon = 0.0;
    if (file.contains("fusion")) apply_fusion_section(file["fusion"], lambda, epsilon);
    mcfg.validate();
    tcfg.validate();

    const tclsta::AblationTable table = tclsta::ablation_suite(data, mcfg, tcfg, lambda, epsilon);
    const json config{{"model", model_json(mcfg)},
                      {"train", train_json(tcfg)},
                      {"fusion", json{{"lambda", lambda}, {"epsilon", epsilon}}}};
    json rows = json::array();
    for (const tclsta::AblationRow& r : table.rows)
      rows.push_back(json{{"name", r.name}, {"accuracy", r.accuracy}, {"map", r.map_score}});
    write_report(o.out, json{{"config", config}, {"rows", rows}}, o.no_timestamp);

    std::filesystem::path text_path(o.out);
    text_path.replace_extension(".txt");
    if (text_path == std::filesystem::path(o.out)) text_path += ".table.txt";
    const std::string text = ablation_text(table);
    ensure_parent(text_path.string());
    tclsta::detail::write_file_bytes(text_path.string(), text);
    echo_config(config);
    std::printf("%swrote %s and %s\n", text.c_str(), o.out.c_str(), text_path.string().c_str());
  });

  // ---- export-attention ---------------------------------------------------
  CLI::App* ex = app.add_subcommand(
      "export-attention",
      "write one video's spatial attention maps (JSON + PGM) and temporal weights");
  add_common(ex);
  ex->add_option("--data", o.data, "dataset manifest")->required();
  ex->add_option("--checkpoints", o.checkpoints, "trained checkpoint")->required();
  ex->add_option("--video-id", o.video_id, "video to export")->required();
  ex->add_option("--out", o.out, "output directory")->required();
  ex->callback([&] {
    load_config(o.config);
    const tclsta::Dataset data = tclsta::load_dataset(o.data);
    const tclsta::CheckpointBundle bundle = tclsta::load_bundle(o.checkpoints);
    if (!bundle.has_static && !bundle.has_motion)
      tclsta::fail("bad-config", "the checkpoint holds no trained stream");
    const tclsta::VideoSample* v = find_video(data, o.video_id);
    if (v == nullptr)
      tclsta::fail("bad-config",
                   "no video with id " + std::to_string(o.video_id) + " in the dataset");
    const std::size_t rows = v->static_frames[0].rows;
    const std::size_t cols = v->static_frames[0].cols;
    std::filesystem::create_directories(o.out);

    json streams = json::object();
    std::size_t pgm_count = 0;
    auto export_stream = [&](const char* name, const tclsta::StreamModel& model,
                             tclsta::StreamKind kind) {
      const tclsta::StreamForward f =
          tclsta::stream_forward(model, tclsta::frames_of(*v, kind), -1);
      json maps = json::array();
      for (std::size_t t = 0; t < f.attention_maps.size(); ++t) {
        const std::vector<double>& map = f.attention_maps[t];
        json grid = json::array();
        for (std::size_t r = 0; r < rows; ++r)
          grid.push_back(std::vector<double>(map.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                             map.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols)));
        maps.push_back(grid);
        char file[64];
        std::snprintf(file, sizeof file, "%s_frame%02zu.pgm", name, t);
        tclsta::detail::write_file_bytes((std::filesystem::path(o.out) / file).string(),
                                         pgm_text(map, rows, cols));
        ++pgm_count;
      }
      streams[name] = json{{"attention_classes", f.attention_classes},
                           {"spatial_maps", maps},
                           {"temporal_scores", f.temporal_scores},
                           {"temporal_weights", f.temporal_weights}};
    };
    if (bundle.has_static) export_stream("static", bundle.static_model, tclsta::StreamKind::kStatic);
    if (bundle.has_motion) export_stream("motion", bundle.motion_model, tclsta::StreamKind::kMotion);

    const json config{{"model", model_json(bundle.config)}};
    json report{{"config", config},
                {"video_id", v->id},
                {"label", v->label},
                {"grid", json{{"rows", rows}, {"cols", cols}}},
                {"streams", streams}};
    write_report((std::filesystem::path(o.out) / "attention.json").string(), report,
                 o.no_timestamp);
    echo_config(config);
    std::printf("wrote attention.json and %zu PGM maps under %s\n", pgm_count, o.out.c_str());
  });

  // ---- gradcheck ----------------------------------------------------------
  CLI::App* gc = app.add_subcommand(
      "gradcheck", "compare every analytic gradient against central finite differences");
  gc->add_option("--seed", o.seed, "base seed for the random instances");
  gc->add_option("--seeds", o.gradcheck_seeds, "number of seeds per case");
  gc->callback([&] {
    const tclsta::GradCheckReport report =
        tclsta::run_gradient_suite(o.seed, o.gradcheck_seeds);
    for (const tclsta::GradCheckCase& c : report.cases)
      if (c.max_rel_error > report.tolerance)
        std::printf("FAIL %-32s max relative error %.3e\n", c.name.c_str(), c.max_rel_error);
    std::printf("gradient check: %zu cases x %zu seeds, worst relative error %.3e, tolerance "
                "%.1e: %s\n",
                report.cases.size(), report.seeds, report.worst, report.tolerance,
                report.pass() ? "PASS" : "FAIL");
    if (!report.pass()) rc = 4;
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const tclsta::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.category() == "file-not-found" || e.category() == "manifest-not-found" ? 3 : 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", e.what());
    return 4;
  }
  return rc;
}
