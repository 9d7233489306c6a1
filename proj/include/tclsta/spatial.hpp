#pragma once

// Spatial attention over per-frame activation grids. A small 3x3 conv branch
// produces class-evidence activations; projecting them through the classifier
// weights of a GAP head gives a per-cell relevance map for one class, which is
// normalized and used to weight-pool the frame's features.

#include <cstddef>
#include <vector>

#include "tclsta/error.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

enum class StreamKind { kStatic, kMotion };

inline const char* stream_name(StreamKind s) {
  return s == StreamKind::kStatic ? "static" : "motion";
}

// Per-frame grid of channel activations; the stand-in for a backbone's final
// convolutional feature map. Row-major (row, col, channel).
struct ActivationGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  std::size_t cell_count() const { return rows * cols; }
  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return values[(r * cols + c) * channels + ch];
  }
  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return values[(r * cols + c) * channels + ch];
  }
};

inline Tensor to_tensor(const ActivationGrid& g) {
  if (g.values.size() != g.rows * g.cols * g.channels)
    fail("shape-mismatch", "activation grid storage does not match its dimensions");
  return Tensor::from_values({g.rows, g.cols, g.channels}, g.values);
}

// Conv branch plus GAP classifier head shared by the relevance-map machinery.
struct SpatialHead {
  Tensor cam_kernels;         // (3 x 3 x in_channels x map_channels)
  Tensor cam_bias;            // (map_channels)
  Tensor classifier_weights;  // (map_channels x num_classes)
  Tensor classifier_bias;     // (num_classes)

  std::size_t map_channels() const { return classifier_weights.shape()[0]; }
  std::size_t num_classes() const { return classifier_weights.shape()[1]; }

  std::vector<Tensor> parameters() const {
    return {cam_kernels, cam_bias, classifier_weights, classifier_bias};
  }
};

inline SpatialHead make_spatial_head(std::size_t in_channels, std::size_t map_channels,
                                     std::size_t num_classes, Rng& rng) {
  if (in_channels == 0 || map_channels == 0 || num_classes == 0)
    fail("bad-config", "spatial head dimensions must be positive");
  auto glorot = [&rng](Shape shape, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(detail::shape_size(shape));
    for (double& x : v) x = rng.uniform(-limit, limit);
    return Tensor::from_values(std::move(shape), std::move(v), true);
  };
  SpatialHead head;
  head.cam_kernels = glorot({3, 3, in_channels, map_channels},
                            9.0 * static_cast<double>(in_channels),
                            9.0 * static_cast<double>(map_channels));
  head.cam_bias = Tensor::zeros({map_channels}, true);
  head.classifier_weights = glorot({map_channels, num_classes},
                                   static_cast<double>(map_channels),
                                   static_cast<double>(num_classes));
  head.classifier_bias = Tensor::zeros({num_classes}, true);
  return head;
}

// Class-evidence activations for one frame.
inline Tensor cam_activations(const Tensor& grid, const SpatialHead& head) {
  return conv2d_3x3(grid, head.cam_kernels, head.cam_bias);
}

struct ClassRelevance {
  Tensor map;    // per-cell relevance, flattened row-major (cells)
  Tensor score;  // scalar; the sum of the map (class score before GAP scaling)
};

// Per-cell class relevance: each cell's channel vector projected through the
// classifier column of the requested class. The score is the plain sum of the
// map, so score == sum(map) holds exactly by construction.
inline ClassRelevance cam_map(const Tensor& activations, const SpatialHead& head,
                              std::size_t class_id) {
  detail::check_defined(activations, "cam_map");
  if (activations.shape().size() != 3)
    fail("shape-mismatch", "cam_map: activations must be rows x cols x channels");
  const std::size_t cells = activations.shape()[0] * activations.shape()[1];
  const std::size_t channels = activations.shape()[2];
  if (channels != head.map_channels())
    fail("shape-mismatch", "cam_map: activation channels " + std::to_string(channels) +
                               " vs classifier rows " + std::to_string(head.map_channels()));
  if (class_id >= head.num_classes())
    fail("bad-class", "class " + std::to_string(class_id) + " outside " +
                          std::to_string(head.num_classes()) + " classes");
  Tensor per_cell = reshape(activations, {cells, channels});
  Tensor column = slice_col(head.classifier_weights, class_id);
  ClassRelevance out;
  out.map = matvec(per_cell, column);
  out.score = sum(out.map);
  return out;
}

// Exponential normalization of a relevance map, rescaled so the normalized
// values sum to the cell count (uniform maps come out as all ones).
inline Tensor normalize_attention(const Tensor& raw_map) {
  detail::check_defined(raw_map, "normalize_attention");
  if (raw_map.size() == 0) fail("empty-vector", "normalize_attention of empty map");
  Tensor flat = raw_map.shape().size() == 1 ? raw_map : reshape(raw_map, {raw_map.size()});
  return mul_scalar(softmax(flat), static_cast<double>(raw_map.size()));
}

inline Tensor uniform_attention(std::size_t cells) {
  if (cells == 0) fail("empty-vector", "uniform_attention over zero cells");
  return Tensor::full({cells}, 1.0);
}

// Attention-weighted spatial pooling: out_d = (1/cells) * sum_cells a(cell) * f_d(cell).
// With an all-ones attention map this is exactly unweighted average pooling.
inline Tensor weighted_pool(const Tensor& features, const Tensor& attention) {
  detail::check_defined(features, "weighted_pool");
  detail::check_vector(attention, "weighted_pool");
  if (features.shape().size() != 3)
    fail("shape-mismatch", "weighted_pool: features must be rows x cols x channels");
  const std::size_t cells = features.shape()[0] * features.shape()[1];
  const std::size_t depth = features.shape()[2];
  if (attention.shape()[0] != cells)
    fail("shape-mismatch", "weighted_pool: attention covers " + std::to_string(attention.shape()[0]) +
                               " cells, features have " + std::to_string(cells));
  Tensor per_cell = reshape(features, {cells, depth});
  Tensor pooled = matvec(transpose(per_cell), attention);
  return mul_scalar(pooled, 1.0 / static_cast<double>(cells));
}

// GAP classifier logits over the class-evidence activations.
inline Tensor spatial_forward(const Tensor& activations, const SpatialHead& head) {
  detail::check_defined(activations, "spatial_forward");
  if (activations.shape().size() != 3)
    fail("shape-mismatch", "spatial_forward: activations must be rows x cols x channels");
  if (activations.shape()[2] != head.map_channels())
    fail("shape-mismatch", "spatial_forward: activation channels vs classifier rows");
  Tensor pooled = avg_pool_spatial(activations);
  return add(matvec(transpose(head.classifier_weights), pooled), head.classifier_bias);
}

}  // namespace tclsta
