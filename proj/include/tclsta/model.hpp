#pragma once

// Full per-stream model (convolutional relevance head + LSTM + attention
// classifiers) and its composition with the collaborative module: forward
// passes, per-video score extraction, segment pooling, and attention
// localization statistics.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tclsta/collab.hpp"
#include "tclsta/data.hpp"
#include "tclsta/error.hpp"
#include "tclsta/fusion.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/spatial.hpp"
#include "tclsta/temporal.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

struct ModelConfig {
  std::size_t num_classes = 5;
  std::size_t channels = 16;       // input grid channels
  std::size_t cam_channels = 16;   // relevance-map channels from the conv layer
  std::size_t lstm_hidden = 32;
  std::size_t collab_hidden = 16;  // joint space of the mutual-guidance module
  std::size_t collab_segments = 8; // per-video segment count (clamped to T)
  std::size_t collab_rounds = 2;   // alternating refinement rounds

  void validate() const {
    if (num_classes == 0 || channels == 0 || cam_channels == 0 || lstm_hidden == 0 ||
        collab_hidden == 0 || collab_segments == 0 || collab_rounds == 0)
      fail("bad-config", "every model dimension must be positive");
  }
};

// one stream: spatial relevance head, sequence model, and the two temporal
// classification heads, plus the ablation switches
struct StreamModel {
  SpatialHead spatial;
  LstmParams lstm;
  TemporalHeads heads;
  bool use_spatial_attention = true;
  bool use_temporal_attention = true;

  std::size_t num_classes() const { return spatial.num_classes(); }
  std::size_t input_channels() const { return spatial.cam_kernels.shape()[2]; }

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out = spatial.parameters();
    for (const Tensor& t : lstm.parameters()) out.push_back(t);
    for (const Tensor& t : heads.parameters()) out.push_back(t);
    return out;
  }
};

// Initialization draws are consumed in a fixed order and do not depend on the
// attention switches, so every ablation variant starts from identical weights.
inline StreamModel make_stream_model(const ModelConfig& cfg, std::uint64_t seed,
                                     bool spatial_attention = true,
                                     bool temporal_attention = true) {
  cfg.validate();
  Rng rng(seed);
  StreamModel m;
  m.spatial = make_spatial_head(cfg.channels, cfg.cam_channels, cfg.num_classes, rng);
  m.lstm = make_lstm(cfg.channels, cfg.lstm_hidden, rng);
  m.heads = make_temporal_heads(cfg.channels, cfg.lstm_hidden, cfg.num_classes, rng);
  m.use_spatial_attention = spatial_attention;
  m.use_temporal_attention = temporal_attention;
  return m;
}

inline const std::vector<ActivationGrid>& frames_of(const VideoSample& v, StreamKind s) {
  return s == StreamKind::kStatic ? v.static_frames : v.motion_frames;
}

// Everything one forward pass produces. `loss` (sum of the spatial-head,
// pooled-feature-head, and final-state-head cross entropies, the spatial term
// averaged over frames) is only defined when a label was supplied.
struct StreamForward {
  Tensor loss;
  Tensor feature_probs;  // pooled-feature head distribution (num_classes)
  Tensor state_probs;    // final-state head distribution (num_classes)
  std::vector<Tensor> frame_features;              // per-frame attention-pooled features
  std::vector<std::vector<double>> attention_maps; // per-frame cell attention values
  std::vector<double> temporal_scores;             // raw per-frame relevance (pre-softmax)
  std::vector<double> temporal_weights;            // per-frame pooling weights
  std::vector<int> attention_classes;              // category driving each frame's map

  // final stream distribution: average of the two heads
  std::vector<double> probs() const {
    std::vector<double> out(feature_probs.size());
    for (std::size_t j = 0; j < out.size(); ++j)
      out[j] = 0.5 * (feature_probs.value(j) + state_probs.value(j));
    return out;
  }
};

// Runs one stream over a video. With label >= 0 the attention maps follow the
// ground-truth category and the three-part training loss is built; with
// label -1 each frame's map follows that frame's own predicted category and
// no loss is produced.
inline StreamForward stream_forward(const StreamModel& model,
                                    const std::vector<ActivationGrid>& frames, int label) {
  if (frames.empty()) fail("empty-vector", "stream_forward over zero frames");
  if (label >= static_cast<int>(model.num_classes()))
    fail("bad-label", "label " + std::to_string(label) + " outside the category range");
  StreamForward out;
  std::vector<Tensor> frame_losses;
  for (const ActivationGrid& g : frames) {
    Tensor grid = to_tensor(g);
    Tensor act = cam_activations(grid, model.spatial);
    Tensor logits = spatial_forward(act, model.spatial);
    const int cls = label >= 0 ? label : static_cast<int>(argmax_value(logits.values()));
    out.attention_classes.push_back(cls);
    Tensor attention = model.use_spatial_attention
                           ? normalize_attention(cam_map(act, model.spatial,
                                                         static_cast<std::size_t>(cls)).map)
                           : uniform_attention(g.cell_count());
    out.attention_maps.push_back(attention.values());
    out.frame_features.push_back(weighted_pool(grid, attention));
    if (label >= 0)
      frame_losses.push_back(cross_entropy(softmax(logits), static_cast<std::size_t>(label)));
  }

  HiddenStates hidden = lstm_forward(out.frame_features, model.lstm);
  AttendedSequence att;
  if (model.use_temporal_attention) {
    Tensor scores = temporal_scores(affinity(hidden.stacked));
    out.temporal_scores = scores.values();
    att = attend_features(out.frame_features, scores);
  } else {
    out.temporal_scores.assign(out.frame_features.size(), 0.0);
    att = uniform_attend(out.frame_features);
  }
  out.temporal_weights = att.weights.values();
  out.feature_probs =
      softmax(add(matvec(model.heads.feature_weights, att.pooled), model.heads.feature_bias));
  out.state_probs =
      softmax(add(matvec(model.heads.state_weights, hidden.last()), model.heads.state_bias));

  if (label >= 0) {
    const std::size_t lab = static_cast<std::size_t>(label);
    Tensor spatial_loss =
        mul_scalar(add_n(frame_losses), 1.0 / static_cast<double>(frame_losses.size()));
    out.loss = add(add(spatial_loss, cross_entropy(out.feature_probs, lab)),
                   cross_entropy(out.state_probs, lab));
  }
  return out;
}

// Splits T per-frame features into min(T, max_segments) contiguous chunks and
// mean-pools each, giving the (feature_dim x segments) matrix the
// collaborative module consumes. Gradients flow through when the inputs carry
// them.
inline Tensor segment_matrix(const std::vector<Tensor>& frame_features,
                             std::size_t max_segments) {
  if (frame_features.empty()) fail("empty-vector", "segment_matrix over zero frames");
  if (max_segments == 0) fail("bad-config", "segment_matrix needs at least one segment");
  const std::size_t frames = frame_features.size();
  const std::size_t segments = std::min(frames, max_segments);
  std::vector<Tensor> pooled;
  pooled.reserve(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t begin = s * frames / segments;
    const std::size_t end = (s + 1) * frames / segments;
    std::vector<Tensor> chunk(frame_features.begin() + static_cast<std::ptrdiff_t>(begin),
                              frame_features.begin() + static_cast<std::ptrdiff_t>(end));
    pooled.push_back(mul_scalar(add_n(chunk), 1.0 / static_cast<double>(end - begin)));
  }
  return stack_cols(pooled);
}

// Detached copy: same values, no gradient history. Used when the streams stay
// frozen during the collaborative stage.
inline Tensor detach(const Tensor& t) { return Tensor::from_values(t.shape(), t.values()); }

// ---------------------------------------------------------------------------
// per-video score extraction

inline StreamScores sta_scores(const StreamModel& static_model, const StreamModel& motion_model,
                               const VideoSample& v) {
  StreamScores s;
  s.video_id = v.id;
  s.label = v.label;
  s.rows[0] = stream_forward(static_model, v.static_frames, -1).probs();
  s.rows[1] = stream_forward(motion_model, v.motion_frames, -1).probs();
  return s;
}

inline StreamScores collab_scores(const StreamModel& static_model,
                                  const StreamModel& motion_model, const CollabModel& collab,
                                  const ModelConfig& cfg, const VideoSample& v) {
  StreamForward fs = stream_forward(static_model, v.static_frames, -1);
  StreamForward fm = stream_forward(motion_model, v.motion_frames, -1);
  Tensor vs = detach(segment_matrix(fs.frame_features, cfg.collab_segments));
  Tensor vm = detach(segment_matrix(fm.frame_features, cfg.collab_segments));
  CollabState state = collaborative_optimize(vs, vm, collab, cfg.collab_rounds, /*tol=*/0.0);
  auto [ps, pm] = collab_heads(state, collab);
  StreamScores s;
  s.video_id = v.id;
  s.label = v.label;
  s.rows[0] = ps.values();
  s.rows[1] = pm.values();
  return s;
}

// ---------------------------------------------------------------------------
// attention localization against the planted ground truth

struct AttentionStats {
  double spatial_planted_mean = 0.0;   // mean attention value on planted cells (uniform = 1)
  double temporal_planted_mass = 0.0;  // mean weight mass on planted frames
  double temporal_uniform_mass = 0.0;  // what uniform weighting would give those frames
  std::size_t videos = 0;
};

inline AttentionStats attention_localization(const StreamModel& model,
                                             const std::vector<VideoSample>& videos,
                                             StreamKind stream) {
  if (videos.empty()) fail("no-test-data", "attention_localization over an empty split");
  AttentionStats stats;
  for (const VideoSample& v : videos) {
    if (v.planted_frames.empty() || v.planted_cells.empty())
      fail("bad-config", "attention_localization needs planted ground truth");
    StreamForward f = stream_forward(model, frames_of(v, stream), -1);
    double spatial = 0.0;
    double temporal = 0.0;
    for (int frame : v.planted_frames) {
      const auto& map = f.attention_maps[static_cast<std::size_t>(frame)];
      for (int cell : v.planted_cells) spatial += map[static_cast<std::size_t>(cell)];
      temporal += f.temporal_weights[static_cast<std::size_t>(frame)];
    }
    stats.spatial_planted_mean +=
        spatial / static_cast<double>(v.planted_frames.size() * v.planted_cells.size());
    stats.temporal_planted_mass += temporal;
    stats.temporal_uniform_mass += static_cast<double>(v.planted_frames.size()) /
                                   static_cast<double>(frames_of(v, stream).size());
    ++stats.videos;
  }
  const double n = static_cast<double>(stats.videos);
  stats.spatial_planted_mean /= n;
  stats.temporal_planted_mass /= n;
  stats.temporal_uniform_mass /= n;
  return stats;
}

}  // namespace tclsta
