#pragma once

// Per-category fusion of the two stream score vectors. The weight vector for
// each category maximizes a linear margin objective (own-category score mass
// minus a penalty for mass the category attracts from other-category videos)
// over the 2-simplex, which a linear objective always solves at a vertex; an
// optional floor keeps both streams alive.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "tclsta/error.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

// Stacked per-video softmax scores: row 0 static stream, row 1 motion stream.
struct StreamScores {
  std::array<std::vector<double>, 2> rows;
  int video_id = 0;
  int label = -1;  // ground truth where known, -1 otherwise

  std::size_t num_classes() const { return rows[0].size(); }
};

struct FusionWeights {
  std::vector<std::array<double, 2>> per_class;  // (static weight, motion weight) per category
  double lambda = 5e-3;
  double epsilon = 0.0;

  std::size_t num_classes() const { return per_class.size(); }
};

namespace detail {

inline void check_scores(const std::vector<StreamScores>& scores, const char* op) {
  if (scores.empty()) fail("no-training-data", std::string(op) + ": empty score set");
  const std::size_t c = scores[0].num_classes();
  if (c == 0) fail("empty-vector", std::string(op) + ": zero-width score rows");
  for (const StreamScores& s : scores) {
    if (s.rows[0].size() != c || s.rows[1].size() != c)
      fail("shape-mismatch", std::string(op) + ": ragged score rows");
  }
}

}  // namespace detail

// Per-stream evidence for one category: summed own-category score mass of
// that category's videos minus lambda times the mass its column attracts from
// every other video.
inline std::array<double, 2> coefficient_vector(const std::vector<StreamScores>& train,
                                                std::size_t category, double lambda) {
  detail::check_scores(train, "coefficient_vector");
  if (category >= train[0].num_classes())
    fail("bad-class", "category " + std::to_string(category) + " outside score width");
  std::array<double, 2> q{0.0, 0.0};
  for (const StreamScores& s : train) {
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= s.num_classes())
      fail("bad-label", "training scores need labels inside the category range");
    const double sign = static_cast<std::size_t>(s.label) == category ? 1.0 : -lambda;
    q[0] += sign * s.rows[0][category];
    q[1] += sign * s.rows[1][category];
  }
  return q;
}

// Closed-form solution of the per-category linear program on the 2-simplex
// with floor eps: the better stream takes 1-eps, ties split evenly.
inline FusionWeights learn_weights(const std::vector<StreamScores>& train, double lambda,
                                   double epsilon) {
  detail::check_scores(train, "learn_weights");
  if (lambda < 0.0) fail("bad-config", "learn_weights: lambda must be non-negative");
  if (epsilon < 0.0 || epsilon >= 0.5) fail("bad-config", "learn_weights: epsilon must be in [0, 0.5)");
  FusionWeights w;
  w.lambda = lambda;
  w.epsilon = epsilon;
  const std::size_t classes = train[0].num_classes();
  w.per_class.resize(classes);
  for (std::size_t j = 0; j < classes; ++j) {
    const auto q = coefficient_vector(train, j, lambda);
    if (q[0] > q[1])
      w.per_class[j] = {1.0 - epsilon, epsilon};
    else if (q[0] < q[1])
      w.per_class[j] = {epsilon, 1.0 - epsilon};
    else
      w.per_class[j] = {0.5, 0.5};
  }
  return w;
}

inline FusionWeights uniform_weights(std::size_t classes) {
  FusionWeights w;
  w.per_class.assign(classes, {0.5, 0.5});
  return w;
}

// Weighted per-category score used for both prediction and ranking.
inline std::vector<double> fused_scores(const FusionWeights& w, const StreamScores& s) {
  if (w.num_classes() != s.num_classes())
    fail("shape-mismatch", "fused_scores: " + std::to_string(w.num_classes()) + " weight rows vs " +
                               std::to_string(s.num_classes()) + " score columns");
  std::vector<double> out(s.num_classes());
  for (std::size_t j = 0; j < out.size(); ++j)
    out[j] = w.per_class[j][0] * s.rows[0][j] + w.per_class[j][1] * s.rows[1][j];
  return out;
}

inline std::vector<double> averaged_scores(const StreamScores& s) {
  std::vector<double> out(s.num_classes());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = 0.5 * (s.rows[0][j] + s.rows[1][j]);
  return out;
}

// Category with the highest weighted score; ties break toward the smaller index.
inline std::size_t predict(const FusionWeights& w, const StreamScores& s) {
  return argmax_value(fused_scores(w, s));
}

// Plain stream averaging, the non-adaptive baseline.
inline std::size_t late_fusion(const StreamScores& s) {
  if (s.num_classes() == 0) fail("empty-vector", "late_fusion of zero categories");
  return argmax_value(averaged_scores(s));
}

// ---------------------------------------------------------------------------
// early fusion: a linear softmax classifier over the concatenated pooled
// features of the two streams

struct EarlyFusionModel {
  Tensor weights;  // (classes x 2 * feature_dim)
  Tensor bias;     // (classes)
};

inline std::size_t early_fusion_predict(const EarlyFusionModel& model,
                                        const std::vector<double>& feature) {
  if (model.weights.shape()[1] != feature.size())
    fail("shape-mismatch", "early_fusion_predict: feature size vs classifier width");
  Tensor x = Tensor::from_values({feature.size()}, feature);
  Tensor probs = softmax(add(matvec(model.weights, x), model.bias));
  return argmax_value(probs.values());
}

// Full-batch gradient training of the early-fusion classifier.
inline EarlyFusionModel train_early_fusion(const std::vector<std::vector<double>>& features,
                                           const std::vector<int>& labels, std::size_t classes,
                                           std::size_t iterations, double learning_rate,
                                           std::uint64_t seed) {
  if (features.empty()) fail("no-training-data", "train_early_fusion: empty feature set");
  if (features.size() != labels.size())
    fail("shape-mismatch", "train_early_fusion: feature/label count mismatch");
  if (classes == 0) fail("bad-config", "train_early_fusion: need at least one class");
  const std::size_t dim = features[0].size();
  for (const auto& f : features)
    if (f.size() != dim) fail("shape-mismatch", "train_early_fusion: ragged features");
  for (int l : labels)
    if (l < 0 || static_cast<std::size_t>(l) >= classes)
      fail("bad-label", "train_early_fusion: label outside class range");

  Rng rng(seed);
  const double limit = std::sqrt(6.0 / (static_cast<double>(dim) + static_cast<double>(classes)));
  std::vector<double> init(classes * dim);
  for (double& v : init) v = rng.uniform(-limit, limit);
  EarlyFusionModel model;
  model.weights = Tensor::from_values({classes, dim}, std::move(init), true);
  model.bias = Tensor::zeros({classes}, true);

  std::vector<Tensor> inputs;
  inputs.reserve(features.size());
  for (const auto& f : features) inputs.push_back(Tensor::from_values({dim}, f));

  for (std::size_t iter = 0; iter < iterations; ++iter) {
    model.weights.zero_grad();
    model.bias.zero_grad();
    std::vector<Tensor> losses;
    losses.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      Tensor probs = softmax(add(matvec(model.weights, inputs[i]), model.bias));
      losses.push_back(cross_entropy(probs, static_cast<std::size_t>(labels[i])));
    }
    Tensor loss = mul_scalar(add_n(losses), 1.0 / static_cast<double>(losses.size()));
    loss.backward();
    auto& wv = model.weights.mutable_values();
    const auto& wg = model.weights.grad();
    for (std::size_t i = 0; i < wv.size(); ++i) wv[i] -= learning_rate * wg[i];
    auto& bv = model.bias.mutable_values();
    const auto& bg = model.bias.grad();
    for (std::size_t i = 0; i < bv.size(); ++i) bv[i] -= learning_rate * bg[i];
  }
  return model;
}

}  // namespace tclsta
