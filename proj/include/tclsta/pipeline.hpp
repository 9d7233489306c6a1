#pragma once

// Training loops (mini-batch SGD with momentum, weight decay, and a
// plateau-triggered learning-rate drop), the staged schedule (per-stream
// training, then collaborative refinement over frozen streams, then fusion
// weights), evaluation metrics, and the ablation suite.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tclsta/data.hpp"
#include "tclsta/fusion.hpp"
#include "tclsta/model.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  double weight_decay = 0.0001;
  std::size_t batch_size = 8;
  std::size_t max_iterations = 300;
  double lr_drop_factor = 10.0;  // divide the rate by this on plateau
  std::size_t patience = 200;    // iterations without held-out improvement before a drop
  std::size_t max_drops = 2;
  std::size_t eval_interval = 50;  // how often held-out accuracy is measured
  std::uint64_t seed = 1;
  bool finetune_streams = false;  // collaborative stage also updates stream weights

  void validate() const {
    if (learning_rate <= 0.0 || lr_drop_factor <= 1.0)
      fail("bad-config", "learning rate must be positive and the drop factor above 1");
    if (momentum < 0.0 || momentum >= 1.0) fail("bad-config", "momentum must be in [0, 1)");
    if (weight_decay < 0.0) fail("bad-config", "weight decay must be non-negative");
    if (batch_size == 0 || max_iterations == 0 || eval_interval == 0)
      fail("bad-config", "batch size, iteration count, and eval interval must be positive");
  }
};

// velocity ← momentum·velocity − lr·(grad + weight_decay·param);
// param ← param + velocity
inline void sgd_step(std::vector<Tensor>& params, std::vector<std::vector<double>>& velocity,
                     const TrainConfig& cfg, double learning_rate) {
  if (velocity.empty()) {
    velocity.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) velocity[i].assign(params[i].size(), 0.0);
  }
  if (velocity.size() != params.size())
    fail("shape-mismatch", "sgd_step: velocity entry count differs from parameter count");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    const std::vector<double>& g = p.grad();
    std::vector<double>& v = velocity[i];
    if (v.size() != p.size() || g.size() != p.size())
      fail("shape-mismatch", "sgd_step: gradient or velocity size differs from the parameter");
    std::vector<double>& values = p.mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      v[j] = cfg.momentum * v[j] - learning_rate * (g[j] + cfg.weight_decay * values[j]);
      values[j] += v[j];
    }
  }
}

struct TrainLog {
  std::vector<double> losses;             // per-iteration batch loss
  std::vector<double> held_out_accuracy;  // measured every eval_interval iterations
  std::size_t lr_drops = 0;
  double final_learning_rate = 0.0;
};

namespace detail {

// Shared mini-batch driver. Epoch order is a seeded shuffle; the rate drops
// by lr_drop_factor when the held-out accuracy has not improved for
// `patience` iterations, at most `max_drops` times.
inline void run_training(std::size_t num_train, const TrainConfig& cfg,
                         std::vector<Tensor> params,
                         const std::function<Tensor(const std::vector<std::size_t>&)>& batch_loss,
                         const std::function<double()>& held_out_accuracy, TrainLog* log) {
  cfg.validate();
  if (num_train == 0) fail("no-training-data", "training requires a non-empty train split");
  Rng shuffle_rng(derive_seed(cfg.seed, 0xB0));
  std::vector<std::size_t> order(num_train);
  for (std::size_t i = 0; i < num_train; ++i) order[i] = i;
  std::size_t cursor = num_train;  // forces a shuffle before the first batch

  std::vector<std::vector<double>> velocity;
  double lr = cfg.learning_rate;
  double best_accuracy = -1.0;
  std::size_t last_improved = 0;
  std::size_t drops = 0;

  for (std::size_t iter = 0; iter < cfg.max_iterations; ++iter) {
    std::vector<std::size_t> batch;
    for (std::size_t b = 0; b < std::min(cfg.batch_size, num_train); ++b) {
      if (cursor == num_train) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(order[cursor++]);
    }

    Tensor loss = batch_loss(batch);
    zero_grads(params);
    loss.backward();
    sgd_step(params, velocity, cfg, lr);
    if (log) log->losses.push_back(loss.scalar_value());

    if ((iter + 1) % cfg.eval_interval == 0) {
      const double acc = held_out_accuracy();
      if (log) log->held_out_accuracy.push_back(acc);
      if (acc > best_accuracy) {
        best_accuracy = acc;
        last_improved = iter;
      } else if (iter - last_improved >= cfg.patience && drops < cfg.max_drops) {
        lr /= cfg.lr_drop_factor;
        ++drops;
        last_improved = iter;
      }
    }
  }
  if (log) {
    log->lr_drops = drops;
    log->final_learning_rate = lr;
  }
}

}  // namespace detail

inline double stream_accuracy(const StreamModel& model, const std::vector<VideoSample>& videos,
                              StreamKind stream) {
  if (videos.empty()) return 0.0;
  std::size_t correct = 0;
  for (const VideoSample& v : videos) {
    StreamForward f = stream_forward(model, frames_of(v, stream), -1);
    if (argmax_value(f.probs()) == static_cast<std::size_t>(v.label)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(videos.size());
}

// Stage 1: trains one stream under the summed three-head cross-entropy loss.
// Uses the validation split for the plateau check when present, otherwise the
// training split.
inline StreamModel train_stream(const Dataset& data, StreamKind stream, const ModelConfig& mcfg,
                                const TrainConfig& tcfg, bool spatial_attention = true,
                                bool temporal_attention = true, TrainLog* log = nullptr) {
  mcfg.validate();
  if (data.train.empty()) fail("no-training-data", "train_stream needs training videos");
  const std::uint64_t init_seed =
      derive_seed(tcfg.seed, 0xA000 + (stream == StreamKind::kStatic ? 0 : 1));
  StreamModel model = make_stream_model(mcfg, init_seed, spatial_attention, temporal_attention);
  const std::vector<VideoSample>& held_out = data.val.empty() ? data.train : data.val;

  detail::run_training(
      data.train.size(), tcfg, model.parameters(),
      [&](const std::vector<std::size_t>& batch) {
        std::vector<Tensor> items;
        for (std::size_t idx : batch) {
          const VideoSample& v = data.train[idx];
          items.push_back(stream_forward(model, frames_of(v, stream), v.label).loss);
        }
        return mul_scalar(add_n(items), 1.0 / static_cast<double>(items.size()));
      },
      [&] { return stream_accuracy(model, held_out, stream); }, log);
  return model;
}

// Stage 2: trains the mutual-guidance module and its two heads on segment
// features from the (by default frozen) streams, under the summed two-head
// cross entropy. The alternation is unrolled for a fixed number of rounds so
// gradients pass through every refinement step.
inline CollabModel train_collaborative(const Dataset& data, StreamModel& static_model,
                                       StreamModel& motion_model, const ModelConfig& mcfg,
                                       const TrainConfig& tcfg, TrainLog* log = nullptr) {
  mcfg.validate();
  if (data.train.empty()) fail("no-training-data", "train_collaborative needs training videos");
  Rng init_rng(derive_seed(tcfg.seed, 0xC0));
  CollabModel collab =
      make_collab_model(mcfg.channels, mcfg.collab_hidden, mcfg.num_classes, init_rng);

  // ground-truth-guided attention during training, mirroring stage 1
  auto segments_for = [&](const VideoSample& v, StreamKind s) {
    const StreamModel& m = s == StreamKind::kStatic ? static_model : motion_model;
    Tensor seg = segment_matrix(stream_forward(m, frames_of(v, s), v.label).frame_features,
                                mcfg.collab_segments);
    return tcfg.finetune_streams ? seg : detach(seg);
  };

  std::vector<Tensor> frozen_static, frozen_motion;
  if (!tcfg.finetune_streams) {
    for (const VideoSample& v : data.train) {
      frozen_static.push_back(segments_for(v, StreamKind::kStatic));
      frozen_motion.push_back(segments_for(v, StreamKind::kMotion));
    }
  }

  std::vector<Tensor> params = collab.parameters();
  if (tcfg.finetune_streams) {
    for (const Tensor& t : static_model.parameters()) params.push_back(t);
    for (const Tensor& t : motion_model.parameters()) params.push_back(t);
  }

  auto video_loss = [&](std::size_t idx) {
    const VideoSample& v = data.train[idx];
    Tensor vs = tcfg.finetune_streams ? segments_for(v, StreamKind::kStatic) : frozen_static[idx];
    Tensor vm = tcfg.finetune_streams ? segments_for(v, StreamKind::kMotion) : frozen_motion[idx];
    CollabState state = collaborative_optimize(vs, vm, collab, mcfg.collab_rounds, /*tol=*/0.0);
    auto [ps, pm] = collab_heads(state, collab);
    const std::size_t lab = static_cast<std::size_t>(v.label);
    return add(cross_entropy(ps, lab), cross_entropy(pm, lab));
  };

  auto held_out_accuracy = [&] {
    const std::vector<VideoSample>& held_out = data.val.empty() ? data.train : data.val;
    std::size_t correct = 0;
    for (const VideoSample& v : held_out) {
      StreamScores s = collab_scores(static_model, motion_model, collab, mcfg, v);
      if (late_fusion(s) == static_cast<std::size_t>(v.label)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(held_out.size());
  };

  detail::run_training(
      data.train.size(), tcfg, params,
      [&](const std::vector<std::size_t>& batch) {
        std::vector<Tensor> items;
        for (std::size_t idx : batch) items.push_back(video_loss(idx));
        return mul_scalar(add_n(items), 1.0 / static_cast<double>(items.size()));
      },
      held_out_accuracy, log);
  return collab;
}

// ---------------------------------------------------------------------------
// evaluation

struct VideoScore {
  int id = 0;
  int label = 0;
  std::vector<double> scores;  // one fused score per category
};

struct EvalReport {
  double accuracy = 0.0;
  std::vector<std::vector<double>> confusion;  // row = true category, row-normalized
  double map_score = 0.0;
  std::vector<double> per_class_ap;
  std::size_t videos = 0;
};

// Average precision of one category's ranking: videos sorted by that
// category's score, descending, ties broken by ascending id; the mean of
// precision-at-rank over the category's videos.
inline double average_precision(const std::vector<VideoScore>& scored, std::size_t category) {
  std::vector<std::size_t> order(scored.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].scores[category] != scored[b].scores[category])
      return scored[a].scores[category] > scored[b].scores[category];
    return scored[a].id < scored[b].id;
  });
  double hits = 0.0, precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (static_cast<std::size_t>(scored[order[rank]].label) == category) {
      hits += 1.0;
      precision_sum += hits / static_cast<double>(rank + 1);
    }
  }
  return hits > 0.0 ? precision_sum / hits : 0.0;
}

inline EvalReport evaluate_scores(const std::vector<VideoScore>& scored,
                                  std::size_t num_classes) {
  if (scored.empty()) fail("no-test-data", "evaluate_scores over an empty split");
  if (num_classes == 0) fail("bad-config", "evaluate_scores needs at least one category");
  EvalReport report;
  report.videos = scored.size();
  report.confusion.assign(num_classes, std::vector<double>(num_classes, 0.0));
  std::vector<double> row_counts(num_classes, 0.0);
  std::size_t correct = 0;
  for (const VideoScore& s : scored) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= num_classes)
      fail("bad-label", "video " + std::to_string(s.id) + " has a label outside the range");
    if (s.scores.size() != num_classes)
      fail("shape-mismatch", "video " + std::to_string(s.id) + " has the wrong score width");
    const std::size_t predicted = argmax_value(s.scores);
    const std::size_t truth = static_cast<std::size_t>(s.label);
    if (predicted == truth) ++correct;
    report.confusion[truth][predicted] += 1.0;
    row_counts[truth] += 1.0;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(scored.size());
  for (std::size_t c = 0; c < num_classes; ++c)
    if (row_counts[c] > 0.0)
      for (double& x : report.confusion[c]) x /= row_counts[c];

  double ap_sum = 0.0;
  std::size_t ap_classes = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const bool present = row_counts[c] > 0.0;
    report.per_class_ap.push_back(present ? average_precision(scored, c) : 0.0);
    if (present) {
      ap_sum += report.per_class_ap.back();
      ++ap_classes;
    }
  }
  if (ap_classes == 0) fail("no-test-data", "no category has any test videos");
  report.map_score = ap_sum / static_cast<double>(ap_classes);
  return report;
}

// ---------------------------------------------------------------------------
// ablation suite

struct AblationRow {
  std::string name;
  double accuracy = 0.0;
  double map_score = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& name) const {
    for (const AblationRow& r : rows)
      if (r.name == name) return r;
    fail("bad-config", "no ablation row named '" + name + "'");
  }
};

namespace detail {

inline EvalReport eval_single_stream(const StreamModel& model,
                                     const std::vector<VideoSample>& test, StreamKind stream) {
  if (test.empty()) fail("no-test-data", "evaluation requires test videos");
  std::vector<VideoScore> scored;
  for (const VideoSample& v : test)
    scored.push_back({v.id, v.label, stream_forward(model, frames_of(v, stream), -1).probs()});
  return evaluate_scores(scored, model.num_classes());
}

inline EvalReport eval_fused(const std::vector<StreamScores>& test_scores,
                             const FusionWeights& weights, std::size_t num_classes) {
  if (test_scores.empty()) fail("no-test-data", "evaluation requires test videos");
  std::vector<VideoScore> scored;
  for (const StreamScores& s : test_scores)
    scored.push_back({s.video_id, s.label, fused_scores(weights, s)});
  return evaluate_scores(scored, num_classes);
}

}  // namespace detail

// Trained artifacts behind the final ablation rows, for callers that keep
// probing the models (attention statistics, exports).
struct AblationArtifacts {
  StreamModel full_static, full_motion;  // the both-attention pair
  CollabModel collab;
  FusionWeights adaptive;  // learned on the collaborative training scores
};

// Trains every attention variant of both streams from a shared initial seed,
// the collaborative stage on top of the fully attended pair, and adaptive
// fusion weights, then scores each configuration on the test split. Rows:
// each stream and the averaged two-stream combination under no attention,
// cell attention only, frame attention only, and both; then the
// collaborative and adaptive-fusion additions on the fully attended pair.
inline AblationTable ablation_suite(const Dataset& data, const ModelConfig& mcfg,
                                    const TrainConfig& tcfg, double lambda = 5e-3,
                                    double epsilon = 0.0,
                                    AblationArtifacts* artifacts = nullptr) {
  if (data.train.empty()) fail("no-training-data", "ablation_suite needs training videos");
  if (data.test.empty()) fail("no-test-data", "ablation_suite needs test videos");

  struct Variant {
    bool sa, ta;
    const char* suffix;
  };
  const Variant variants[] = {{false, false, ""},
                              {true, false, "+cell-attn"},
                              {false, true, "+frame-attn"},
                              {true, true, "+both-attn"}};

  AblationTable table;
  StreamModel full_static, full_motion;  // the both-attention pair, reused below
  std::vector<StreamModel> static_variants, motion_variants;
  for (const Variant& var : variants) {
    static_variants.push_back(
        train_stream(data, StreamKind::kStatic, mcfg, tcfg, var.sa, var.ta));
    motion_variants.push_back(
        train_stream(data, StreamKind::kMotion, mcfg, tcfg, var.sa, var.ta));
  }
  full_static = static_variants[3];
  full_motion = motion_variants[3];

  for (std::size_t i = 0; i < 4; ++i) {
    const Variant& var = variants[i];
    EvalReport rs = detail::eval_single_stream(static_variants[i], data.test, StreamKind::kStatic);
    table.rows.push_back({std::string("static") + var.suffix, rs.accuracy, rs.map_score});
    EvalReport rm = detail::eval_single_stream(motion_variants[i], data.test, StreamKind::kMotion);
    table.rows.push_back({std::string("motion") + var.suffix, rm.accuracy, rm.map_score});

    std::vector<StreamScores> test_scores;
    for (const VideoSample& v : data.test)
      test_scores.push_back(sta_scores(static_variants[i], motion_variants[i], v));
    EvalReport rt =
        detail::eval_fused(test_scores, uniform_weights(mcfg.num_classes), mcfg.num_classes);
    table.rows.push_back({std::string("two-stream") + var.suffix, rt.accuracy, rt.map_score});
  }

  // collaborative refinement and adaptive fusion on the fully attended pair
  CollabModel collab = train_collaborative(data, full_static, full_motion, mcfg, tcfg);
  std::vector<StreamScores> sta_train, sta_test, collab_train, collab_test;
  for (const VideoSample& v : data.train) {
    sta_train.push_back(sta_scores(full_static, full_motion, v));
    collab_train.push_back(collab_scores(full_static, full_motion, collab, mcfg, v));
  }
  for (const VideoSample& v : data.test) {
    sta_test.push_back(sta_scores(full_static, full_motion, v));
    collab_test.push_back(collab_scores(full_static, full_motion, collab, mcfg, v));
  }

  EvalReport r_cln =
      detail::eval_fused(collab_test, uniform_weights(mcfg.num_classes), mcfg.num_classes);
  table.rows.push_back({"two-stream+both-attn+collab", r_cln.accuracy, r_cln.map_score});

  FusionWeights awl = learn_weights(sta_train, lambda, epsilon);
  EvalReport r_awl = detail::eval_fused(sta_test, awl, mcfg.num_classes);
  table.rows.push_back({"two-stream+both-attn+adaptive-fusion", r_awl.accuracy, r_awl.map_score});

  FusionWeights awl_cln = learn_weights(collab_train, lambda, epsilon);
  EvalReport r_full = detail::eval_fused(collab_test, awl_cln, mcfg.num_classes);
  table.rows.push_back(
      {"two-stream+both-attn+collab+adaptive-fusion", r_full.accuracy, r_full.map_score});

  if (artifacts) {
    artifacts->full_static = full_static;
    artifacts->full_motion = full_motion;
    artifacts->collab = collab;
    artifacts->adaptive = awl_cln;
  }
  return table;
}

}  // namespace tclsta
