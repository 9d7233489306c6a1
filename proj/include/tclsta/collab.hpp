#pragma once

// Static-motion collaborative refinement. Each stream's per-video segment
// features are merged by softmax coefficients; the merged feature of one
// stream guides the re-scoring of the other stream's segments, and the two
// directions alternate until the coefficients settle (or a fixed unroll count
// is reached while training through the loop).

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "tclsta/error.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

// One refinement direction: project segments and the guiding feature into a
// joint space, score each segment there.
struct GuideParams {
  Tensor segment_proj;  // (k x feature_dim), applied to the refined stream's segments
  Tensor guide_proj;    // (k x guide_dim), applied to the other stream's merged feature
  Tensor score_weights; // (k)

  std::vector<Tensor> parameters() const { return {segment_proj, guide_proj, score_weights}; }
};

struct CollabModel {
  GuideParams refine_motion;  // static merged feature guides the motion segments
  GuideParams refine_static;  // motion merged feature guides the static segments
  Tensor static_head_w, static_head_b;  // (classes x feature_dim), (classes)
  Tensor motion_head_w, motion_head_b;

  std::vector<Tensor> parameters() const {
    std::vector<Tensor> out = refine_motion.parameters();
    for (const Tensor& t : refine_static.parameters()) out.push_back(t);
    out.push_back(static_head_w);
    out.push_back(static_head_b);
    out.push_back(motion_head_w);
    out.push_back(motion_head_b);
    return out;
  }
};

inline CollabModel make_collab_model(std::size_t feature_dim, std::size_t joint_dim,
                                     std::size_t num_classes, Rng& rng) {
  if (feature_dim == 0 || joint_dim == 0 || num_classes == 0)
    fail("bad-config", "collaborative model dimensions must be positive");
  auto glorot = [&rng](Shape shape, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::vector<double> v(detail::shape_size(shape));
    for (double& x : v) x = rng.uniform(-limit, limit);
    return Tensor::from_values(std::move(shape), std::move(v), true);
  };
  auto direction = [&] {
    GuideParams p;
    p.segment_proj = glorot({joint_dim, feature_dim}, static_cast<double>(feature_dim),
                            static_cast<double>(joint_dim));
    p.guide_proj = glorot({joint_dim, feature_dim}, static_cast<double>(feature_dim),
                          static_cast<double>(joint_dim));
    p.score_weights = glorot({joint_dim}, static_cast<double>(joint_dim), 1.0);
    return p;
  };
  CollabModel m;
  m.refine_motion = direction();
  m.refine_static = direction();
  m.static_head_w = glorot({num_classes, feature_dim}, static_cast<double>(feature_dim),
                           static_cast<double>(num_classes));
  m.static_head_b = Tensor::zeros({num_classes}, true);
  m.motion_head_w = glorot({num_classes, feature_dim}, static_cast<double>(feature_dim),
                           static_cast<double>(num_classes));
  m.motion_head_b = Tensor::zeros({num_classes}, true);
  return m;
}

struct GuideResult {
  Tensor coefficients;  // softmax weights over segments
  Tensor merged;        // segment matrix times coefficients
};

// One guided re-scoring pass: segments (feature_dim x segment_count) scored
// under the influence of a guiding feature from the other stream.
inline GuideResult guide_step(const Tensor& segments, const Tensor& guide_feature,
                              const GuideParams& params) {
  detail::check_matrix(segments, "guide_step");
  detail::check_vector(guide_feature, "guide_step");
  if (params.segment_proj.shape()[1] != segments.shape()[0])
    fail("shape-mismatch", "guide_step: segment feature dim " + std::to_string(segments.shape()[0]) +
                               " vs projection " + detail::shape_str(params.segment_proj.shape()));
  if (params.guide_proj.shape()[1] != guide_feature.shape()[0])
    fail("shape-mismatch", "guide_step: guide feature dim " + std::to_string(guide_feature.shape()[0]) +
                               " vs projection " + detail::shape_str(params.guide_proj.shape()));
  Tensor joint = tanh(add_col_broadcast(matmul(params.segment_proj, segments),
                                        matvec(params.guide_proj, guide_feature)));
  GuideResult out;
  out.coefficients = softmax(matvec(transpose(joint), params.score_weights));
  out.merged = matvec(segments, out.coefficients);
  return out;
}

struct CollabState {
  Tensor static_coefficients;  // final segment weights, static stream
  Tensor motion_coefficients;
  Tensor static_feature;  // merged video feature per stream
  Tensor motion_feature;
  std::size_t rounds_run = 0;
};

// Alternating refinement. Starts from uniform static coefficients, then each
// round: merge static -> re-score motion -> merge motion -> re-score static.
// Stops early once both coefficient vectors move less than `tol` between
// rounds (pass tol = 0 to always run `max_rounds`, e.g. when training through
// the unrolled loop).
inline CollabState collaborative_optimize(const Tensor& static_segments,
                                          const Tensor& motion_segments, const CollabModel& model,
                                          std::size_t max_rounds, double tol = 1e-6) {
  detail::check_matrix(static_segments, "collaborative_optimize");
  detail::check_matrix(motion_segments, "collaborative_optimize");
  if (max_rounds == 0) fail("bad-config", "collaborative_optimize: max_rounds must be positive");
  if (static_segments.shape()[1] != motion_segments.shape()[1])
    fail("shape-mismatch", "collaborative_optimize: segment counts differ");
  const std::size_t segments = static_segments.shape()[1];

  Tensor z_static = Tensor::full({segments}, 1.0 / static_cast<double>(segments));
  Tensor z_motion;
  std::vector<double> prev_static, prev_motion;
  CollabState state;
  for (std::size_t round = 0; round < max_rounds; ++round) {
    Tensor merged_static = matvec(static_segments, z_static);
    GuideResult motion = guide_step(motion_segments, merged_static, model.refine_motion);
    z_motion = motion.coefficients;
    GuideResult stat = guide_step(static_segments, motion.merged, model.refine_static);
    z_static = stat.coefficients;
    state.rounds_run = round + 1;
    state.motion_feature = motion.merged;

    if (round > 0) {
      double delta = 0.0;
      for (std::size_t i = 0; i < segments; ++i) {
        delta = std::max(delta, std::fabs(z_static.value(i) - prev_static[i]));
        delta = std::max(delta, std::fabs(z_motion.value(i) - prev_motion[i]));
      }
      if (delta < tol) break;
    }
    prev_static = z_static.values();
    prev_motion = z_motion.values();
  }
  state.static_coefficients = z_static;
  state.motion_coefficients = z_motion;
  state.static_feature = matvec(static_segments, z_static);
  return state;
}

// Per-stream classification over the merged features.
inline std::pair<Tensor, Tensor> collab_heads(const CollabState& state, const CollabModel& model) {
  Tensor ps = softmax(add(matvec(model.static_head_w, state.static_feature), model.static_head_b));
  Tensor pm = softmax(add(matvec(model.motion_head_w, state.motion_feature), model.motion_head_b));
  return {ps, pm};
}

}  // namespace tclsta
