#pragma once

// The finite-difference gradient suite: every differentiable operation plus
// the three composed chains (cell-attention classification, frame-attention
// classification, unrolled collaborative refinement), each checked against
// central differences over several seeds. Shared by the command-line
// `gradcheck` subcommand and the acceptance harness.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tclsta/collab.hpp"
#include "tclsta/model.hpp"
#include "tclsta/rng.hpp"
#include "tclsta/spatial.hpp"
#include "tclsta/temporal.hpp"
#include "tclsta/tensor.hpp"

namespace tclsta {

struct GradCheckCase {
  std::string name;
  double max_rel_error = 0.0;  // worst over all seeds
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double worst = 0.0;
  double tolerance = 1e-4;
  std::size_t seeds = 0;

  bool pass() const { return worst <= tolerance; }
};

namespace detail {

struct GradCase {
  std::string name;
  // builds a scalar-valued function and the probe point from one rng draw
  std::function<std::pair<std::function<Tensor(const Tensor&)>, Tensor>(Rng&)> build;
};

inline Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor::from_values(std::move(shape), std::move(v));
}

inline std::vector<GradCase> elementary_cases() {
  using Fn = std::function<Tensor(const Tensor&)>;
  std::vector<GradCase> cases;
  auto with_partner = [](std::string name, auto make) {
    return GradCase{std::move(name), [make](Rng& rng) {
                      Tensor partner = random_tensor(rng, {4});
                      Tensor x = random_tensor(rng, {4});
                      Fn f = [partner, make](const Tensor& t) { return make(t, partner); };
                      return std::pair<Fn, Tensor>(f, x);
                    }};
  };
  cases.push_back(with_partner(
      "op/add", [](const Tensor& t, const Tensor& p) { return sum(add(t, p)); }));
  cases.push_back(with_partner(
      "op/sub", [](const Tensor& t, const Tensor& p) { return sum(sub(t, p)); }));
  cases.push_back(with_partner(
      "op/mul", [](const Tensor& t, const Tensor& p) { return sum(mul(t, p)); }));
  cases.push_back({"op/add_scalar", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {5});
                     Fn f = [](const Tensor& t) { return sum(mul(add_scalar(t, 0.7), t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/mul_scalar", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {5});
                     Fn f = [](const Tensor& t) { return sum(mul(mul_scalar(t, -1.3), t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/tanh", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {6});
                     Fn f = [](const Tensor& t) { return sum(tanh(t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/sigmoid", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {6});
                     Fn f = [](const Tensor& t) { return sum(sigmoid(t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/exp", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {6});
                     Fn f = [](const Tensor& t) { return sum(exp(t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/matmul_left", [](Rng& rng) {
                     Tensor b = random_tensor(rng, {3, 2});
                     Tensor x = random_tensor(rng, {4, 3});
                     Fn f = [b](const Tensor& t) { return sum(matmul(t, b)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/matmul_right", [](Rng& rng) {
                     Tensor a = random_tensor(rng, {2, 4});
                     Tensor x = random_tensor(rng, {4, 3});
                     Fn f = [a](const Tensor& t) { return sum(matmul(a, t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/matvec", [](Rng& rng) {
                     Tensor v = random_tensor(rng, {3});
                     Tensor x = random_tensor(rng, {4, 3});
                     Fn f = [v](const Tensor& t) { return sum(matvec(t, v)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/transpose", [](Rng& rng) {
                     Tensor a = random_tensor(rng, {3, 4});
                     Tensor x = random_tensor(rng, {3, 4});
                     Fn f = [a](const Tensor& t) { return sum(mul(transpose(t), transpose(a))); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/add_col_broadcast", [](Rng& rng) {
                     Tensor m = random_tensor(rng, {3, 4});
                     Tensor x = random_tensor(rng, {3});
                     Fn f = [m](const Tensor& t) { return sum(tanh(add_col_broadcast(m, t))); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/sum", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {7});
                     Fn f = [](const Tensor& t) { return sum(mul(t, t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/mean", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {7});
                     Fn f = [](const Tensor& t) { return mean(mul(t, t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/sum_axis0", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {3, 4});
                     Fn f = [](const Tensor& t) {
                       Tensor s = sum_axis(t, 0);
                       return sum(mul(s, s));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/sum_axis1", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {3, 4});
                     Fn f = [](const Tensor& t) {
                       Tensor s = sum_axis(t, 1);
                       return sum(mul(s, s));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/reshape", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {2, 6});
                     Fn f = [](const Tensor& t) {
                       Tensor r = reshape(t, {3, 4});
                       return sum(mul(r, r));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/concat", [](Rng& rng) {
                     Tensor other = random_tensor(rng, {3});
                     Tensor x = random_tensor(rng, {4});
                     Fn f = [other](const Tensor& t) {
                       Tensor c = concat({t, other});
                       return sum(mul(c, c));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/add_n", [](Rng& rng) {
                     Tensor a = random_tensor(rng, {4});
                     Tensor b = random_tensor(rng, {4});
                     Tensor x = random_tensor(rng, {4});
                     Fn f = [a, b](const Tensor& t) { return sum(mul(add_n({a, t, b, t}), t)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/stack_cols", [](Rng& rng) {
                     Tensor a = random_tensor(rng, {3});
                     Tensor x = random_tensor(rng, {3});
                     Fn f = [a](const Tensor& t) {
                       Tensor m = stack_cols({a, t, t});
                       return sum(mul(m, m));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/slice_col", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {3, 4});
                     Fn f = [](const Tensor& t) {
                       Tensor c = slice_col(t, 2);
                       return sum(mul(c, c));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/element_scale", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {5});
                     Fn f = [](const Tensor& t) { return sum(scale(t, element(t, 1))); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/softmax", [](Rng& rng) {
                     Tensor m = random_tensor(rng, {5});
                     Tensor x = random_tensor(rng, {5});
                     Fn f = [m](const Tensor& t) { return sum(mul(softmax(t), m)); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/cross_entropy", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {5});
                     Fn f = [](const Tensor& t) { return cross_entropy(softmax(t), 2); };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/conv_input", [](Rng& rng) {
                     Tensor k = random_tensor(rng, {3, 3, 2, 3}, 0.5);
                     Tensor b = random_tensor(rng, {3}, 0.5);
                     Tensor x = random_tensor(rng, {4, 4, 2});
                     Fn f = [k, b](const Tensor& t) {
                       Tensor y = conv2d_3x3(t, k, b);
                       return sum(mul(y, y));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/conv_kernels", [](Rng& rng) {
                     Tensor in = random_tensor(rng, {4, 4, 2});
                     Tensor b = random_tensor(rng, {3}, 0.5);
                     Tensor x = random_tensor(rng, {3, 3, 2, 3}, 0.5);
                     Fn f = [in, b](const Tensor& t) {
                       Tensor y = conv2d_3x3(in, t, b);
                       return sum(mul(y, y));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/conv_bias", [](Rng& rng) {
                     Tensor in = random_tensor(rng, {4, 4, 2});
                     Tensor k = random_tensor(rng, {3, 3, 2, 3}, 0.5);
                     Tensor x = random_tensor(rng, {3}, 0.5);
                     Fn f = [in, k](const Tensor& t) {
                       Tensor y = conv2d_3x3(in, k, t);
                       return sum(mul(y, y));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  cases.push_back({"op/avg_pool", [](Rng& rng) {
                     Tensor x = random_tensor(rng, {3, 4, 2});
                     Fn f = [](const Tensor& t) {
                       Tensor p = avg_pool_spatial(t);
                       return sum(mul(p, p));
                     };
                     return std::pair<Fn, Tensor>(f, x);
                   }});
  return cases;
}

// Cell-attention chain: conv activations -> class relevance map -> normalized
// attention -> weighted pooling -> linear head -> cross entropy.
inline std::vector<GradCase> spatial_chain_cases() {
  using Fn = std::function<Tensor(const Tensor&)>;
  struct Fixture {
    SpatialHead head;
    Tensor grid;
    Tensor head_w, head_b;
  };
  auto fixture = [](Rng& rng) {
    Fixture fx;
    fx.head = make_spatial_head(2, 3, 3, rng);
    fx.grid = random_tensor(rng, {3, 3, 2});
    fx.head_w = random_tensor(rng, {3, 2}, 0.7);
    fx.head_b = random_tensor(rng, {3}, 0.1);
    return fx;
  };
  auto chain = [](const Fixture& fx, const Tensor& grid, const Tensor& head_w) {
    Tensor act = cam_activations(grid, fx.head);
    Tensor spatial_logits = spatial_forward(act, fx.head);
    Tensor spatial_loss = cross_entropy(softmax(spatial_logits), 1);
    Tensor attention = normalize_attention(cam_map(act, fx.head, 1).map);
    Tensor pooled = weighted_pool(grid, attention);
    Tensor probs = softmax(add(matvec(head_w, pooled), fx.head_b));
    return add(spatial_loss, cross_entropy(probs, 1));
  };

  std::vector<GradCase> cases;
  cases.push_back({"chain/cell-attn/input", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) { return chain(fx, t, fx.head_w); };
                     return std::pair<Fn, Tensor>(f, fx.grid);
                   }});
  cases.push_back({"chain/cell-attn/conv_kernels", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.head.cam_kernels = t;
                       return chain(fy, fx.grid, fx.head_w);
                     };
                     return std::pair<Fn, Tensor>(f, fx.head.cam_kernels);
                   }});
  cases.push_back({"chain/cell-attn/classifier", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.head.classifier_weights = t;
                       return chain(fy, fx.grid, fx.head_w);
                     };
                     return std::pair<Fn, Tensor>(f, fx.head.classifier_weights);
                   }});
  cases.push_back({"chain/cell-attn/head", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) { return chain(fx, fx.grid, t); };
                     return std::pair<Fn, Tensor>(f, fx.head_w);
                   }});
  return cases;
}

// Frame-attention chain: LSTM -> affinity -> column scores -> softmax pooling
// -> linear head -> cross entropy.
inline std::vector<GradCase> temporal_chain_cases() {
  using Fn = std::function<Tensor(const Tensor&)>;
  struct Fixture {
    LstmParams lstm;
    TemporalHeads heads;
    std::vector<Tensor> frames;
  };
  auto fixture = [](Rng& rng) {
    Fixture fx;
    fx.lstm = make_lstm(3, 4, rng);
    fx.heads = make_temporal_heads(3, 4, 3, rng);
    for (int t = 0; t < 4; ++t) fx.frames.push_back(random_tensor(rng, {3}));
    return fx;
  };
  auto chain = [](const Fixture& fx) {
    HiddenStates hidden = lstm_forward(fx.frames, fx.lstm);
    AttendedSequence att =
        attend_features(fx.frames, temporal_scores(affinity(hidden.stacked)));
    Tensor pf = softmax(add(matvec(fx.heads.feature_weights, att.pooled), fx.heads.feature_bias));
    Tensor ps = softmax(add(matvec(fx.heads.state_weights, hidden.last()), fx.heads.state_bias));
    return add(cross_entropy(pf, 2), cross_entropy(ps, 2));
  };

  std::vector<GradCase> cases;
  cases.push_back({"chain/frame-attn/frame", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.frames[1] = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.frames[1]);
                   }});
  cases.push_back({"chain/frame-attn/wx_cell", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.lstm.wx_cell = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.lstm.wx_cell);
                   }});
  cases.push_back({"chain/frame-attn/wh_forget", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.lstm.wh_forget = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.lstm.wh_forget);
                   }});
  cases.push_back({"chain/frame-attn/head", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.heads.feature_weights = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.heads.feature_weights);
                   }});
  return cases;
}

// Collaborative chain: two rounds of alternating mutual guidance, unrolled,
// then both heads and their cross entropies.
inline std::vector<GradCase> collab_chain_cases() {
  using Fn = std::function<Tensor(const Tensor&)>;
  struct Fixture {
    CollabModel model;
    Tensor vs, vm;
  };
  auto fixture = [](Rng& rng) {
    Fixture fx;
    fx.model = make_collab_model(3, 4, 3, rng);
    fx.vs = random_tensor(rng, {3, 5});
    fx.vm = random_tensor(rng, {3, 5});
    return fx;
  };
  auto chain = [](const Fixture& fx) {
    CollabState state = collaborative_optimize(fx.vs, fx.vm, fx.model, 2, /*tol=*/0.0);
    auto [ps, pm] = collab_heads(state, fx.model);
    return add(cross_entropy(ps, 1), cross_entropy(pm, 1));
  };

  std::vector<GradCase> cases;
  cases.push_back({"chain/collab/static_segments", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.vs = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.vs);
                   }});
  cases.push_back({"chain/collab/motion_segments", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.vm = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.vm);
                   }});
  cases.push_back({"chain/collab/segment_proj", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.model.refine_motion.segment_proj = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.model.refine_motion.segment_proj);
                   }});
  cases.push_back({"chain/collab/score_weights", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.model.refine_static.score_weights = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.model.refine_static.score_weights);
                   }});
  cases.push_back({"chain/collab/head", [fixture, chain](Rng& rng) {
                     auto fx = fixture(rng);
                     Fn f = [fx, chain](const Tensor& t) {
                       Fixture fy = fx;
                       fy.model.static_head_w = t;
                       return chain(fy);
                     };
                     return std::pair<Fn, Tensor>(f, fx.model.static_head_w);
                   }});
  return cases;
}

}  // namespace detail

inline GradCheckReport run_gradient_suite(std::uint64_t base_seed, std::size_t num_seeds,
                                          double eps = 1e-5, double tolerance = 1e-4) {
  if (num_seeds == 0) fail("bad-config", "gradient suite needs at least one seed");
  std::vector<detail::GradCase> cases = detail::elementary_cases();
  for (auto& c : detail::spatial_chain_cases()) cases.push_back(std::move(c));
  for (auto& c : detail::temporal_chain_cases()) cases.push_back(std::move(c));
  for (auto& c : detail::collab_chain_cases()) cases.push_back(std::move(c));

  GradCheckReport report;
  report.tolerance = tolerance;
  report.seeds = num_seeds;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    GradCheckCase out{cases[ci].name, 0.0};
    for (std::size_t s = 0; s < num_seeds; ++s) {
      Rng rng(derive_seed(base_seed, 0xD00000ULL + ci * 1024 + s));
      auto [f, x] = cases[ci].build(rng);
      out.max_rel_error = std::max(out.max_rel_error, finite_diff_check(f, x, eps));
    }
    report.worst = std::max(report.worst, out.max_rel_error);
    report.cases.push_back(std::move(out));
  }
  return report;
}

}  // namespace tclsta
