#pragma once

// Temporal attention over a sequence of per-frame feature vectors. An LSTM
// summarizes the sequence; the pairwise affinity of its hidden states yields
// per-frame relevance scores whose softmax weights the frame features into a
// single video-level feature. Two linear+softmax heads classify the pooled
// feature and the final hidden state.

#include <cstddef>
#include <utility>
#include <vector>

#include "tclsta/error.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

struct LstmParams {
  // gate order throughout: input, forget, output, candidate
  Tensor wx_input, wx_forget, wx_output, wx_cell;  // (hidden x in_dim)
  Tensor wh_input, wh_forget, wh_output, wh_cell;  // (hidden x hidden)
  Tensor b_input, b_forget, b_output, b_cell;      // (hidden)

  std::size_t hidden_size() const { return wx_input.shape()[0]; }
  std::size_t input_size() const { return wx_input.shape()[1]; }

  std::vector<Tensor> parameters() const {
    return {wx_input, wx_forget, wx_output, wx_cell, wh_input, wh_forget,
            wh_output, wh_cell, b_input,  b_forget, b_output, b_cell};
  }
};

// Uniform init in [-0.08, 0.08]; the forget-gate bias starts at 1 so early
// training does not wash out the cell state.
inline LstmParams make_lstm(std::size_t input_size, std::size_t hidden, Rng& rng) {
  if (input_size == 0 || hidden == 0) fail("bad-config", "lstm dimensions must be positive");
  auto init = [&rng](Shape shape) {
    std::vector<double> v(detail::shape_size(shape));
    for (double& x : v) x = rng.uniform(-0.08, 0.08);
    return Tensor::from_values(std::move(shape), std::move(v), true);
  };
  LstmParams p;
  p.wx_input = init({hidden, input_size});
  p.wx_forget = init({hidden, input_size});
  p.wx_output = init({hidden, input_size});
  p.wx_cell = init({hidden, input_size});
  p.wh_input = init({hidden, hidden});
  p.wh_forget = init({hidden, hidden});
  p.wh_output = init({hidden, hidden});
  p.wh_cell = init({hidden, hidden});
  p.b_input = init({hidden});
  p.b_forget = Tensor::full({hidden}, 1.0, true);
  p.b_output = init({hidden});
  p.b_cell = init({hidden});
  return p;
}

struct HiddenStates {
  std::vector<Tensor> steps;  // hidden vector per frame
  Tensor stacked;             // (hidden x frames), column t is steps[t]

  const Tensor& last() const { return steps.back(); }
};

inline HiddenStates lstm_forward(const std::vector<Tensor>& frames, const LstmParams& p) {
  if (frames.empty()) fail("empty-vector", "lstm_forward over zero frames");
  const std::size_t n = p.hidden_size();
  for (const Tensor& f : frames) {
    detail::check_vector(f, "lstm_forward");
    if (f.shape()[0] != p.input_size())
      fail("shape-mismatch", "lstm_forward: frame feature size " + std::to_string(f.shape()[0]) +
                                 " vs lstm input size " + std::to_string(p.input_size()));
  }
  Tensor h = Tensor::zeros({n});
  Tensor c = Tensor::zeros({n});
  HiddenStates out;
  out.steps.reserve(frames.size());
  for (const Tensor& x : frames) {
    Tensor gi = sigmoid(add(add(matvec(p.wx_input, x), matvec(p.wh_input, h)), p.b_input));
    Tensor gf = sigmoid(add(add(matvec(p.wx_forget, x), matvec(p.wh_forget, h)), p.b_forget));
    Tensor go = sigmoid(add(add(matvec(p.wx_output, x), matvec(p.wh_output, h)), p.b_output));
    Tensor gc = tanh(add(add(matvec(p.wx_cell, x), matvec(p.wh_cell, h)), p.b_cell));
    c = add(mul(gf, c), mul(gi, gc));
    h = mul(go, tanh(c));
    out.steps.push_back(h);
  }
  out.stacked = stack_cols(out.steps);
  return out;
}

// Pairwise frame affinity: tanh of the Gram matrix of hidden-state columns.
// Symmetric by construction (products commute and run in the same order).
inline Tensor affinity(const Tensor& hidden) {
  detail::check_matrix(hidden, "affinity");
  return tanh(matmul(transpose(hidden), hidden));
}

// Per-frame relevance: total affinity of each frame to the whole sequence
// (column sums of the affinity matrix).
inline Tensor temporal_scores(const Tensor& aff) {
  detail::check_matrix(aff, "temporal_scores");
  if (aff.shape()[0] != aff.shape()[1])
    fail("shape-mismatch", "temporal_scores: affinity matrix must be square");
  return sum_axis(aff, 0);
}

struct AttendedSequence {
  std::vector<Tensor> frames;  // per-frame features scaled by their weight
  Tensor pooled;               // sum of the weighted frames
  Tensor weights;              // softmax weights over frames
};

inline AttendedSequence attend_features(const std::vector<Tensor>& frames, const Tensor& scores) {
  if (frames.empty()) fail("empty-vector", "attend_features over zero frames");
  detail::check_vector(scores, "attend_features");
  if (scores.shape()[0] != frames.size())
    fail("shape-mismatch", "attend_features: " + std::to_string(scores.shape()[0]) + " scores for " +
                               std::to_string(frames.size()) + " frames");
  AttendedSequence out;
  out.weights = softmax(scores);
  out.frames.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t)
    out.frames.push_back(scale(frames[t], element(out.weights, t)));
  out.pooled = add_n(out.frames);
  return out;
}

// Ablation path: every frame weighted 1/T.
inline AttendedSequence uniform_attend(const std::vector<Tensor>& frames) {
  if (frames.empty()) fail("empty-vector", "uniform_attend over zero frames");
  const double w = 1.0 / static_cast<double>(frames.size());
  AttendedSequence out;
  out.weights = Tensor::full({frames.size()}, w);
  out.frames.reserve(frames.size());
  for (const Tensor& f : frames) out.frames.push_back(mul_scalar(f, w));
  out.pooled = add_n(out.frames);
  return out;
}

struct TemporalHeads {
  Tensor feature_weights, feature_bias;  // over the attention-pooled feature
  Tensor state_weights, state_bias;      // over the final hidden state

  std::vector<Tensor> parameters() const {
    return {feature_weights, feature_bias, state_weights, state_bias};
  }
};

inline TemporalHeads make_temporal_heads(std::size_t feature_dim, std::size_t hidden,
                                         std::size_t num_classes, Rng& rng) {
  if (feature_dim == 0 || hidden == 0 || num_classes == 0)
    fail("bad-config", "temporal head dimensions must be positive");
  auto glorot = [&rng](Shape shape, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(detail::shape_size(shape));
    for (double& x : v) x = rng.uniform(-limit, limit);
    return Tensor::from_values(std::move(shape), std::move(v), true);
  };
  TemporalHeads heads;
  heads.feature_weights = glorot({num_classes, feature_dim}, static_cast<double>(feature_dim),
                                 static_cast<double>(num_classes));
  heads.feature_bias = Tensor::zeros({num_classes}, true);
  heads.state_weights = glorot({num_classes, hidden}, static_cast<double>(hidden),
                               static_cast<double>(num_classes));
  heads.state_bias = Tensor::zeros({num_classes}, true);
  return heads;
}

// Runs the full attention path over the hidden states and returns the two
// head distributions (pooled-feature head, final-state head).
inline std::pair<Tensor, Tensor> temporal_heads(const std::vector<Tensor>& frames,
                                                const HiddenStates& hidden,
                                                const TemporalHeads& heads) {
  Tensor aff = affinity(hidden.stacked);
  Tensor scores = temporal_scores(aff);
  AttendedSequence att = attend_features(frames, scores);
  Tensor feature_probs =
      softmax(add(matvec(heads.feature_weights, att.pooled), heads.feature_bias));
  Tensor state_probs = softmax(add(matvec(heads.state_weights, hidden.last()), heads.state_bias));
  return {feature_probs, state_probs};
}

}  // namespace tclsta
