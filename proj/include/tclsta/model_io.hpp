#pragma once

// Mapping between in-memory models and checkpoint blocks. A checkpoint bundle
// holds the model dimensions, one or both trained streams, and optionally the
// collaborative module, all in one file.

#include <string>
#include <vector>

#include "tclsta/checkpoint.hpp"
#include "tclsta/collab.hpp"
#include "tclsta/model.hpp"

namespace tclsta {

inline bool has_block(const std::vector<NamedBlock>& blocks, const std::string& name) {
  for (const NamedBlock& b : blocks)
    if (b.name == name) return true;
  return false;
}

namespace detail {

inline Tensor tensor_from_block(const std::vector<NamedBlock>& blocks, const std::string& name) {
  const NamedBlock& b = find_block(blocks, name);
  return Tensor::from_values(b.shape, b.values, /*requires_grad=*/true);
}

inline double scalar_from(const std::vector<NamedBlock>& blocks, const std::string& name) {
  return scalar_from_block(find_block(blocks, name));
}

}  // namespace detail

inline void append_stream_blocks(std::vector<NamedBlock>& out, const std::string& prefix,
                                 const StreamModel& m) {
  out.push_back(block_from_tensor(prefix + "cam_kernels", m.spatial.cam_kernels));
  out.push_back(block_from_tensor(prefix + "cam_bias", m.spatial.cam_bias));
  out.push_back(block_from_tensor(prefix + "classifier_weights", m.spatial.classifier_weights));
  out.push_back(block_from_tensor(prefix + "classifier_bias", m.spatial.classifier_bias));
  out.push_back(block_from_tensor(prefix + "wx_input", m.lstm.wx_input));
  out.push_back(block_from_tensor(prefix + "wx_forget", m.lstm.wx_forget));
  out.push_back(block_from_tensor(prefix + "wx_output", m.lstm.wx_output));
  out.push_back(block_from_tensor(prefix + "wx_cell", m.lstm.wx_cell));
  out.push_back(block_from_tensor(prefix + "wh_input", m.lstm.wh_input));
  out.push_back(block_from_tensor(prefix + "wh_forget", m.lstm.wh_forget));
  out.push_back(block_from_tensor(prefix + "wh_output", m.lstm.wh_output));
  out.push_back(block_from_tensor(prefix + "wh_cell", m.lstm.wh_cell));
  out.push_back(block_from_tensor(prefix + "b_input", m.lstm.b_input));
  out.push_back(block_from_tensor(prefix + "b_forget", m.lstm.b_forget));
  out.push_back(block_from_tensor(prefix + "b_output", m.lstm.b_output));
  out.push_back(block_from_tensor(prefix + "b_cell", m.lstm.b_cell));
  out.push_back(block_from_tensor(prefix + "feature_weights", m.heads.feature_weights));
  out.push_back(block_from_tensor(prefix + "feature_bias", m.heads.feature_bias));
  out.push_back(block_from_tensor(prefix + "state_weights", m.heads.state_weights));
  out.push_back(block_from_tensor(prefix + "state_bias", m.heads.state_bias));
  out.push_back(scalar_block(prefix + "use_spatial_attention", m.use_spatial_attention ? 1.0 : 0.0));
  out.push_back(
      scalar_block(prefix + "use_temporal_attention", m.use_temporal_attention ? 1.0 : 0.0));
}

inline StreamModel stream_from_blocks(const std::vector<NamedBlock>& blocks,
                                      const std::string& prefix) {
  StreamModel m;
  m.spatial.cam_kernels = detail::tensor_from_block(blocks, prefix + "cam_kernels");
  m.spatial.cam_bias = detail::tensor_from_block(blocks, prefix + "cam_bias");
  m.spatial.classifier_weights = detail::tensor_from_block(blocks, prefix + "classifier_weights");
  m.spatial.classifier_bias = detail::tensor_from_block(blocks, prefix + "classifier_bias");
  m.lstm.wx_input = detail::tensor_from_block(blocks, prefix + "wx_input");
  m.lstm.wx_forget = detail::tensor_from_block(blocks, prefix + "wx_forget");
  m.lstm.wx_output = detail::tensor_from_block(blocks, prefix + "wx_output");
  m.lstm.wx_cell = detail::tensor_from_block(blocks, prefix + "wx_cell");
  m.lstm.wh_input = detail::tensor_from_block(blocks, prefix + "wh_input");
  m.lstm.wh_forget = detail::tensor_from_block(blocks, prefix + "wh_forget");
  m.lstm.wh_output = detail::tensor_from_block(blocks, prefix + "wh_output");
  m.lstm.wh_cell = detail::tensor_from_block(blocks, prefix + "wh_cell");
  m.lstm.b_input = detail::tensor_from_block(blocks, prefix + "b_input");
  m.lstm.b_forget = detail::tensor_from_block(blocks, prefix + "b_forget");
  m.lstm.b_output = detail::tensor_from_block(blocks, prefix + "b_output");
  m.lstm.b_cell = detail::tensor_from_block(blocks, prefix + "b_cell");
  m.heads.feature_weights = detail::tensor_from_block(blocks, prefix + "feature_weights");
  m.heads.feature_bias = detail::tensor_from_block(blocks, prefix + "feature_bias");
  m.heads.state_weights = detail::tensor_from_block(blocks, prefix + "state_weights");
  m.heads.state_bias = detail::tensor_from_block(blocks, prefix + "state_bias");
  m.use_spatial_attention = detail::scalar_from(blocks, prefix + "use_spatial_attention") != 0.0;
  m.use_temporal_attention = detail::scalar_from(blocks, prefix + "use_temporal_attention") != 0.0;
  return m;
}

inline void append_collab_blocks(std::vector<NamedBlock>& out, const CollabModel& m) {
  auto put_guide = [&](const std::string& prefix, const GuideParams& g) {
    out.push_back(block_from_tensor(prefix + "segment_proj", g.segment_proj));
    out.push_back(block_from_tensor(prefix + "guide_proj", g.guide_proj));
    out.push_back(block_from_tensor(prefix + "score_weights", g.score_weights));
  };
  put_guide("collab/refine_motion/", m.refine_motion);
  put_guide("collab/refine_static/", m.refine_static);
  out.push_back(block_from_tensor("collab/static_head_w", m.static_head_w));
  out.push_back(block_from_tensor("collab/static_head_b", m.static_head_b));
  out.push_back(block_from_tensor("collab/motion_head_w", m.motion_head_w));
  out.push_back(block_from_tensor("collab/motion_head_b", m.motion_head_b));
}

inline CollabModel collab_from_blocks(const std::vector<NamedBlock>& blocks) {
  auto get_guide = [&](const std::string& prefix) {
    GuideParams g;
    g.segment_proj = detail::tensor_from_block(blocks, prefix + "segment_proj");
    g.guide_proj = detail::tensor_from_block(blocks, prefix + "guide_proj");
    g.score_weights = detail::tensor_from_block(blocks, prefix + "score_weights");
    return g;
  };
  CollabModel m;
  m.refine_motion = get_guide("collab/refine_motion/");
  m.refine_static = get_guide("collab/refine_static/");
  m.static_head_w = detail::tensor_from_block(blocks, "collab/static_head_w");
  m.static_head_b = detail::tensor_from_block(blocks, "collab/static_head_b");
  m.motion_head_w = detail::tensor_from_block(blocks, "collab/motion_head_w");
  m.motion_head_b = detail::tensor_from_block(blocks, "collab/motion_head_b");
  return m;
}

struct CheckpointBundle {
  ModelConfig config;
  bool has_static = false, has_motion = false, has_collab = false;
  StreamModel static_model, motion_model;
  CollabModel collab;
};

inline void save_bundle(const std::string& path, const CheckpointBundle& bundle) {
  std::vector<NamedBlock> blocks;
  blocks.push_back(scalar_block("meta/num_classes", static_cast<double>(bundle.config.num_classes)));
  blocks.push_back(scalar_block("meta/channels", static_cast<double>(bundle.config.channels)));
  blocks.push_back(
      scalar_block("meta/cam_channels", static_cast<double>(bundle.config.cam_channels)));
  blocks.push_back(scalar_block("meta/lstm_hidden", static_cast<double>(bundle.config.lstm_hidden)));
  blocks.push_back(
      scalar_block("meta/collab_hidden", static_cast<double>(bundle.config.collab_hidden)));
  blocks.push_back(
      scalar_block("meta/collab_segments", static_cast<double>(bundle.config.collab_segments)));
  blocks.push_back(
      scalar_block("meta/collab_rounds", static_cast<double>(bundle.config.collab_rounds)));
  if (bundle.has_static) append_stream_blocks(blocks, "static/", bundle.static_model);
  if (bundle.has_motion) append_stream_blocks(blocks, "motion/", bundle.motion_model);
  if (bundle.has_collab) append_collab_blocks(blocks, bundle.collab);
  write_checkpoint(path, blocks);
}

inline CheckpointBundle load_bundle(const std::string& path) {
  const std::vector<NamedBlock> blocks = read_checkpoint(path);
  CheckpointBundle bundle;
  bundle.config.num_classes = static_cast<std::size_t>(detail::scalar_from(blocks, "meta/num_classes"));
  bundle.config.channels = static_cast<std::size_t>(detail::scalar_from(blocks, "meta/channels"));
  bundle.config.cam_channels =
      static_cast<std::size_t>(detail::scalar_from(blocks, "meta/cam_channels"));
  bundle.config.lstm_hidden =
      static_cast<std::size_t>(detail::scalar_from(blocks, "meta/lstm_hidden"));
  bundle.config.collab_hidden =
      static_cast<std::size_t>(detail::scalar_from(blocks, "meta/collab_hidden"));
  bundle.config.collab_segments =
      static_cast<std::size_t>(detail::scalar_from(blocks, "meta/collab_segments"));
  bundle.config.collab_rounds =
      static_cast<std::size_t>(detail::scalar_from(blocks, "meta/collab_rounds"));
  bundle.config.validate();
  bundle.has_static = has_block(blocks, "static/cam_kernels");
  bundle.has_motion = has_block(blocks, "motion/cam_kernels");
  bundle.has_collab = has_block(blocks, "collab/static_head_w");
  if (bundle.has_static) bundle.static_model = stream_from_blocks(blocks, "static/");
  if (bundle.has_motion) bundle.motion_model = stream_from_blocks(blocks, "motion/");
  if (bundle.has_collab) bundle.collab = collab_from_blocks(blocks);
  return bundle;
}

}  // namespace tclsta
