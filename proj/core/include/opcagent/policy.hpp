#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "opcagent/encode.hpp"
#include "opcagent/graph.hpp"
#include "opcagent/modulator.hpp"

namespace opcagent {

// Layer sizes of the decision network.
//
//   node tensor (6 x d x d)
//     -> conv1: non-overlapping patch1 x patch1 patches, 6 -> channels1, tanh
//     -> conv2: non-overlapping patch2 x patch2 patches, channels1 -> channels2, tanh
//     -> dense flat -> embed_dim, tanh
//     -> sage_layers x [mean over neighbours, concat with self, dense 2*embed -> embed, tanh]
//     -> rnn_layers stacked tanh recurrences over nodes in segment order (hidden units)
//     -> dense hidden -> 5, softmax
struct PolicyShape {
  int feature_size = 128;
  int patch1 = 8;
  int channels1 = 8;
  int patch2 = 4;
  int channels2 = 16;
  int embed_dim = 256;
  int sage_layers = 2;
  int rnn_layers = 3;
  int hidden = 64;

  int grid1() const { return feature_size / patch1; }
  int grid2() const { return grid1() / patch2; }
  int patch1_dim() const { return patch1 * patch1 * 6; }
  int patch2_dim() const { return patch2 * patch2 * channels1; }
  int flat_dim() const { return grid2() * grid2() * channels2; }

  // 128 -> 8x8 then 4x4 patches, 64 -> 4x4 then 4x4, small toy sizes -> 2x2 twice.
  static PolicyShape for_feature_size(int size);
  void validate() const;  // throws ConfigError

  friend bool operator==(const PolicyShape&, const PolicyShape&) = default;
};

struct PolicyParams {
  PolicyShape shape;
  Eigen::MatrixXd conv1_w;  // channels1 x patch1_dim
  Eigen::VectorXd conv1_b;
  Eigen::MatrixXd conv2_w;  // channels2 x patch2_dim
  Eigen::VectorXd conv2_b;
  Eigen::MatrixXd embed_w;  // embed_dim x flat_dim
  Eigen::VectorXd embed_b;
  std::vector<Eigen::MatrixXd> sage_w;  // embed_dim x 2*embed_dim
  std::vector<Eigen::VectorXd> sage_b;
  std::vector<Eigen::MatrixXd> rnn_u;  // hidden x input
  std::vector<Eigen::MatrixXd> rnn_w;  // hidden x hidden
  std::vector<Eigen::VectorXd> rnn_b;
  Eigen::MatrixXd head_v;  // 5 x hidden
  Eigen::VectorXd head_c;

  static PolicyParams zeros(const PolicyShape& shape);

  // Calls fn(name, tensor) for every weight array in a fixed order; tensor is
  // an Eigen::MatrixXd or Eigen::VectorXd (const when *this is const).
  template <class Fn>
  void for_each(Fn&& fn) {
    visit(*this, fn);
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    visit(*this, fn);
  }

  std::size_t parameter_count() const;
  bool all_finite() const;
  // this += scale * other (shapes must match).
  void axpy(double scale, const PolicyParams& other);
  // Whether every entry of this + scale * other is finite.
  bool axpy_is_finite(double scale, const PolicyParams& other) const;
  double squared_norm() const;

  friend bool operator==(const PolicyParams& a, const PolicyParams& b);

private:
  template <class Self, class Fn>
  static void visit(Self& p, Fn& fn) {
    fn(std::string_view("conv1_w"), p.conv1_w);
    fn(std::string_view("conv1_b"), p.conv1_b);
    fn(std::string_view("conv2_w"), p.conv2_w);
    fn(std::string_view("conv2_b"), p.conv2_b);
    fn(std::string_view("embed_w"), p.embed_w);
    fn(std::string_view("embed_b"), p.embed_b);
    for (std::size_t k = 0; k < p.sage_w.size(); ++k) {
      fn(std::string_view(kSageW[k % kNames]), p.sage_w[k]);
      fn(std::string_view(kSageB[k % kNames]), p.sage_b[k]);
    }
    for (std::size_t l = 0; l < p.rnn_u.size(); ++l) {
      fn(std::string_view(kRnnU[l % kNames]), p.rnn_u[l]);
      fn(std::string_view(kRnnW[l % kNames]), p.rnn_w[l]);
      fn(std::string_view(kRnnB[l % kNames]), p.rnn_b[l]);
    }
    fn(std::string_view("head_v"), p.head_v);
    fn(std::string_view("head_c"), p.head_c);
  }

  static constexpr std::size_t kNames = 8;
  static constexpr const char* kSageW[kNames] = {"sage0_w", "sage1_w", "sage2_w", "sage3_w",
                                                 "sage4_w", "sage5_w", "sage6_w", "sage7_w"};
  static constexpr const char* kSageB[kNames] = {"sage0_b", "sage1_b", "sage2_b", "sage3_b",
                                                 "sage4_b", "sage5_b", "sage6_b", "sage7_b"};
  static constexpr const char* kRnnU[kNames] = {"rnn0_u", "rnn1_u", "rnn2_u", "rnn3_u",
                                                "rnn4_u", "rnn5_u", "rnn6_u", "rnn7_u"};
  static constexpr const char* kRnnW[kNames] = {"rnn0_w", "rnn1_w", "rnn2_w", "rnn3_w",
                                                "rnn4_w", "rnn5_w", "rnn6_w", "rnn7_w"};
  static constexpr const char* kRnnB[kNames] = {"rnn0_b", "rnn1_b", "rnn2_b", "rnn3_b",
                                                "rnn4_b", "rnn5_b", "rnn6_b", "rnn7_b"};
};

using PolicyGradient = PolicyParams;

// Weights uniform in +-sqrt(3 / fan_in), biases zero. Deterministic per seed.
PolicyParams init_params(const PolicyShape& shape, std::uint64_t seed);

// Node tensor reduced to its non-zero first-layer patches. Zero patches
// contribute only the conv1 bias, so they are skipped. Spacing channels
// (1, 2, 4, 5) are mapped v -> log(1 + 500 v) / log(501) on the way in.
struct EmbedInput {
  std::vector<int> patch_index;  // row-major position on the conv1 output grid
  Eigen::MatrixXd patches;       // patch1_dim x patch_index.size()
};

EmbedInput prepare_input(const NodeFeature& feature, const PolicyShape& shape);
std::vector<EmbedInput> prepare_inputs(std::span<const NodeFeature> features,
                                       const PolicyShape& shape);

// n x 5 row-stochastic matrix; row i is the movement distribution of node i.
struct ActionDistribution {
  Eigen::MatrixXd probs;

  int rows() const { return static_cast<int>(probs.rows()); }
  Preference row(int i) const;
};

ActionDistribution forward(std::span<const NodeFeature> features, const SegmentGraph& graph,
                           const PolicyParams& params);
ActionDistribution forward(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                           const PolicyParams& params);

// Gradient of coefficient * sum_i log pi(actions[i] | s) with respect to every
// parameter, by backpropagation through the head, the recurrence over the node
// sequence, the aggregation rounds, and the embedder. `actions` holds indices
// 0..4 into kMovements. Throws NumericError naming the layer that produced a
// non-finite value.
PolicyGradient logprob_grad(std::span<const NodeFeature> features, const SegmentGraph& graph,
                            const PolicyParams& params, std::span<const int> actions,
                            double coefficient);
PolicyGradient logprob_grad(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                            const PolicyParams& params, std::span<const int> actions,
                            double coefficient);

// sum_i log pi(actions[i] | s); the objective logprob_grad differentiates.
double logprob_sum(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                   const PolicyParams& params, std::span<const int> actions);

}  // namespace opcagent
