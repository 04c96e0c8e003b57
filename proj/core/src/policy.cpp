#include "opcagent/policy.hpp"

#include <cmath>
#include <random>
#include <string>

#include "opcagent/error.hpp"

namespace opcagent {

using Eigen::MatrixXd;
using Eigen::VectorXd;

PolicyShape PolicyShape::for_feature_size(int size) {
  PolicyShape s;
  s.feature_size = size;
  if (size >= 128) {
    s.patch1 = 8;
    s.patch2 = 4;
  } else if (size >= 32) {
    s.patch1 = 4;
    s.patch2 = 4;
  } else {
    s.patch1 = 2;
    s.patch2 = 2;
  }
  return s;
}

void PolicyShape::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("policy shape: " + what); };
  if (feature_size <= 0 || patch1 <= 0 || patch2 <= 0) fail("sizes must be positive");
  if (feature_size % patch1 != 0) fail("patch1 must divide the feature size");
  if (grid1() % patch2 != 0) fail("patch2 must divide the first-layer grid");
  if (channels1 <= 0 || channels2 <= 0 || embed_dim <= 0 || hidden <= 0) {
    fail("layer widths must be positive");
  }
  if (sage_layers < 0 || rnn_layers < 1) fail("need at least one recurrent layer");
  if (sage_layers > 8 || rnn_layers > 8) fail("at most 8 aggregation and recurrent layers");
}

PolicyParams PolicyParams::zeros(const PolicyShape& shape) {
  shape.validate();
  PolicyParams p;
  p.shape = shape;
  p.conv1_w = MatrixXd::Zero(shape.channels1, shape.patch1_dim());
  p.conv1_b = VectorXd::Zero(shape.channels1);
  p.conv2_w = MatrixXd::Zero(shape.channels2, shape.patch2_dim());
  p.conv2_b = VectorXd::Zero(shape.channels2);
  p.embed_w = MatrixXd::Zero(shape.embed_dim, shape.flat_dim());
  p.embed_b = VectorXd::Zero(shape.embed_dim);
  for (int k = 0; k < shape.sage_layers; ++k) {
    p.sage_w.push_back(MatrixXd::Zero(shape.embed_dim, 2 * shape.embed_dim));
    p.sage_b.push_back(VectorXd::Zero(shape.embed_dim));
  }
  for (int l = 0; l < shape.rnn_layers; ++l) {
    const int in = l == 0 ? shape.embed_dim : shape.hidden;
    p.rnn_u.push_back(MatrixXd::Zero(shape.hidden, in));
    p.rnn_w.push_back(MatrixXd::Zero(shape.hidden, shape.hidden));
    p.rnn_b.push_back(VectorXd::Zero(shape.hidden));
  }
  p.head_v = MatrixXd::Zero(kActionCount, shape.hidden);
  p.head_c = VectorXd::Zero(kActionCount);
  return p;
}

std::size_t PolicyParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

bool PolicyParams::all_finite() const {
  bool ok = true;
  for_each([&](std::string_view, const auto& t) { ok = ok && t.allFinite(); });
  return ok;
}

namespace {

// Flat list of tensor pointers for pairwise operations.
std::vector<Eigen::Map<VectorXd>> flat_views(PolicyParams& p) {
  std::vector<Eigen::Map<VectorXd>> out;
  p.for_each([&](std::string_view, auto& t) { out.emplace_back(t.data(), t.size()); });
  return out;
}

std::vector<Eigen::Map<const VectorXd>> flat_views(const PolicyParams& p) {
  std::vector<Eigen::Map<const VectorXd>> out;
  p.for_each([&](std::string_view, const auto& t) { out.emplace_back(t.data(), t.size()); });
  return out;
}

}  // namespace

void PolicyParams::axpy(double scale, const PolicyParams& other) {
  auto dst = flat_views(*this);
  auto src = flat_views(other);
  if (!(shape == other.shape) || dst.size() != src.size()) {
    throw ConfigError("parameter shapes differ");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].size() != src[i].size()) throw ConfigError("parameter shapes differ");
    dst[i] += scale * src[i];
  }
}

bool PolicyParams::axpy_is_finite(double scale, const PolicyParams& other) const {
  auto dst = flat_views(*this);
  auto src = flat_views(other);
  if (!(shape == other.shape) || dst.size() != src.size()) {
    throw ConfigError("parameter shapes differ");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].size() != src[i].size()) throw ConfigError("parameter shapes differ");
    if (!(dst[i] + scale * src[i]).allFinite()) return false;
  }
  return true;
}

double PolicyParams::squared_norm() const {
  double s = 0.0;
  for_each([&](std::string_view, const auto& t) { s += t.squaredNorm(); });
  return s;
}

bool operator==(const PolicyParams& a, const PolicyParams& b) {
  if (!(a.shape == b.shape)) return false;
  auto va = flat_views(a);
  auto vb = flat_views(b);
  if (va.size() != vb.size()) return false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].size() != vb[i].size() || va[i] != vb[i]) return false;
  }
  return true;
}

PolicyParams init_params(const PolicyShape& shape, std::uint64_t seed) {
  PolicyParams p = PolicyParams::zeros(shape);
  std::mt19937_64 rng(seed);
  // Unit-variance preserving uniform draw; biases start at zero.
  auto fill = [&](MatrixXd& w) {
    const double bound = std::sqrt(3.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  };
  fill(p.conv1_w);
  fill(p.conv2_w);
  fill(p.embed_w);
  for (auto& w : p.sage_w) fill(w);
  for (int l = 0; l < shape.rnn_layers; ++l) {
    fill(p.rnn_u[l]);
    fill(p.rnn_w[l]);
  }
  fill(p.head_v);
  return p;
}

namespace {

// Spacing channels hold width / 500 nm, so a 1 nm change in a gap moves the
// input by 0.002 next to 500 nm spans valued 1. The embedder reads them on a
// log scale that keeps 0 -> 0 and 1 -> 1 but spreads out small gaps.
double embed_value(int channel, double v) {
  if (channel % 3 == 0 || v <= 0.0) return v;
  static const double scale = 1.0 / std::log1p(kWindowNm);
  return std::log1p(kWindowNm * v) * scale;
}

}  // namespace

EmbedInput prepare_input(const NodeFeature& feature, const PolicyShape& shape) {
  if (feature.channels != 6 || feature.rows != shape.feature_size ||
      feature.cols != shape.feature_size) {
    throw ConfigError("node feature is " + std::to_string(feature.channels) + "x" +
                      std::to_string(feature.rows) + "x" + std::to_string(feature.cols) +
                      ", policy expects 6x" + std::to_string(shape.feature_size) + "x" +
                      std::to_string(shape.feature_size));
  }
  const int p1 = shape.patch1;
  const int g1 = shape.grid1();
  EmbedInput in;
  std::vector<double> buf(static_cast<std::size_t>(shape.patch1_dim()));
  std::vector<double> all;
  for (int pr = 0; pr < g1; ++pr) {
    for (int pc = 0; pc < g1; ++pc) {
      bool nonzero = false;
      std::size_t k = 0;
      for (int ch = 0; ch < 6; ++ch) {
        for (int i = 0; i < p1; ++i) {
          for (int j = 0; j < p1; ++j) {
            const double v = embed_value(ch, feature.at(ch, pr * p1 + i, pc * p1 + j));
            buf[k++] = v;
            nonzero = nonzero || v != 0.0;
          }
        }
      }
      if (!nonzero) continue;
      in.patch_index.push_back(pr * g1 + pc);
      all.insert(all.end(), buf.begin(), buf.end());
    }
  }
  in.patches = Eigen::Map<MatrixXd>(all.data(), shape.patch1_dim(),
                                    static_cast<Eigen::Index>(in.patch_index.size()));
  return in;
}

std::vector<EmbedInput> prepare_inputs(std::span<const NodeFeature> features,
                                       const PolicyShape& shape) {
  std::vector<EmbedInput> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(prepare_input(f, shape));
  return out;
}

Preference ActionDistribution::row(int i) const {
  Preference p{};
  for (int a = 0; a < kActionCount; ++a) p[static_cast<std::size_t>(a)] = probs(i, a);
  return p;
}

namespace {

void check_finite(const MatrixXd& m, const char* layer) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in layer ") + layer);
}

MatrixXd tanh_of(const MatrixXd& z) { return z.array().tanh().matrix(); }

// d tanh: upstream * (1 - y^2) where y = tanh(z).
MatrixXd tanh_back(const MatrixXd& upstream, const MatrixXd& y) {
  return (upstream.array() * (1.0 - y.array().square())).matrix();
}

struct NodeCache {
  MatrixXd a1;  // channels1 x grid1^2
  MatrixXd x2;  // patch2_dim x grid2^2
  MatrixXd a2;  // channels2 x grid2^2
};

struct Cache {
  std::vector<NodeCache> nodes;
  MatrixXd flat;                 // flat_dim x n
  std::vector<MatrixXd> h;       // embed/aggregation outputs, embed_dim x n, sage_layers + 1
  std::vector<MatrixXd> concat;  // 2*embed_dim x n per aggregation round
  std::vector<MatrixXd> r;       // recurrent outputs, hidden x n per layer
  MatrixXd probs;                // 5 x n
};

void check_inputs(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                  const PolicyParams& params) {
  const auto& s = params.shape;
  if (static_cast<int>(inputs.size()) != graph.node_count()) {
    throw ConfigError("policy got " + std::to_string(inputs.size()) + " node features for " +
                      std::to_string(graph.node_count()) + " graph nodes");
  }
  if (params.conv1_w.rows() != s.channels1 || params.conv1_w.cols() != s.patch1_dim() ||
      params.conv2_w.rows() != s.channels2 || params.conv2_w.cols() != s.patch2_dim() ||
      params.embed_w.rows() != s.embed_dim || params.embed_w.cols() != s.flat_dim() ||
      static_cast<int>(params.sage_w.size()) != s.sage_layers ||
      static_cast<int>(params.rnn_u.size()) != s.rnn_layers ||
      params.head_v.rows() != kActionCount || params.head_v.cols() != s.hidden) {
    throw ConfigError("policy parameters do not match their declared shape");
  }
  const int g1sq = s.grid1() * s.grid1();
  for (const auto& in : inputs) {
    if (in.patches.rows() != s.patch1_dim() ||
        in.patches.cols() != static_cast<Eigen::Index>(in.patch_index.size())) {
      throw ConfigError("prepared node input does not match the policy shape");
    }
    for (int idx : in.patch_index) {
      if (idx < 0 || idx >= g1sq) throw ConfigError("prepared node input index out of range");
    }
  }
}

MatrixXd aggregate(const MatrixXd& h, const SegmentGraph& graph) {
  MatrixXd g = MatrixXd::Zero(h.rows(), h.cols());
  for (int v = 0; v < graph.node_count(); ++v) {
    const auto& nb = graph.neighbors(v);
    if (nb.empty()) continue;
    for (int u : nb) g.col(v) += h.col(u);
    g.col(v) /= static_cast<double>(nb.size());
  }
  return g;
}

void embed_node(const EmbedInput& in, const PolicyParams& p, NodeCache& c,
                Eigen::Ref<VectorXd> flat_out) {
  const auto& s = p.shape;
  const int g1 = s.grid1();
  const int g2 = s.grid2();
  const int p2 = s.patch2;
  MatrixXd z1 = p.conv1_b.replicate(1, g1 * g1);
  if (!in.patch_index.empty()) {
    const MatrixXd active = p.conv1_w * in.patches;
    for (std::size_t j = 0; j < in.patch_index.size(); ++j) {
      z1.col(in.patch_index[j]) += active.col(static_cast<Eigen::Index>(j));
    }
  }
  c.a1 = tanh_of(z1);
  c.x2.resize(s.patch2_dim(), g2 * g2);
  for (int qr = 0; qr < g2; ++qr) {
    for (int qc = 0; qc < g2; ++qc) {
      const int col = qr * g2 + qc;
      int k = 0;
      for (int ch = 0; ch < s.channels1; ++ch) {
        for (int i = 0; i < p2; ++i) {
          for (int j = 0; j < p2; ++j) {
            c.x2(k++, col) = c.a1(ch, (qr * p2 + i) * g1 + (qc * p2 + j));
          }
        }
      }
    }
  }
  c.a2 = tanh_of((p.conv2_w * c.x2).colwise() + p.conv2_b);
  flat_out = Eigen::Map<const VectorXd>(c.a2.data(), c.a2.size());
}

Cache run_forward(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                  const PolicyParams& p) {
  check_inputs(inputs, graph, p);
  const auto& s = p.shape;
  const int n = graph.node_count();
  Cache c;
  c.nodes.resize(static_cast<std::size_t>(n));
  c.flat.resize(s.flat_dim(), n);
  for (int i = 0; i < n; ++i) {
    embed_node(inputs[static_cast<std::size_t>(i)], p, c.nodes[static_cast<std::size_t>(i)],
               c.flat.col(i));
  }
  check_finite(c.flat, "embed.conv");

  c.h.push_back(tanh_of((p.embed_w * c.flat).colwise() + p.embed_b));
  check_finite(c.h.back(), "embed.dense");

  for (int k = 0; k < s.sage_layers; ++k) {
    const MatrixXd& prev = c.h.back();
    MatrixXd cat(2 * s.embed_dim, n);
    cat.topRows(s.embed_dim) = prev;
    cat.bottomRows(s.embed_dim) = aggregate(prev, graph);
    MatrixXd next = tanh_of((p.sage_w[k] * cat).colwise() + p.sage_b[k]);
    check_finite(next, ("sage" + std::to_string(k)).c_str());
    c.concat.push_back(std::move(cat));
    c.h.push_back(std::move(next));
  }

  for (int l = 0; l < s.rnn_layers; ++l) {
    const MatrixXd& x = l == 0 ? c.h.back() : c.r.back();
    MatrixXd pre = (p.rnn_u[l] * x).colwise() + p.rnn_b[l];
    MatrixXd out(s.hidden, n);
    VectorXd state = VectorXd::Zero(s.hidden);
    for (int t = 0; t < n; ++t) {
      state = (pre.col(t) + p.rnn_w[l] * state).array().tanh().matrix();
      out.col(t) = state;
    }
    check_finite(out, ("rnn" + std::to_string(l)).c_str());
    c.r.push_back(std::move(out));
  }

  MatrixXd logits = (p.head_v * c.r.back()).colwise() + p.head_c;
  check_finite(logits, "head");
  c.probs.resize(kActionCount, n);
  for (int i = 0; i < n; ++i) {
    const double top = logits.col(i).maxCoeff();
    VectorXd e = (logits.col(i).array() - top).exp().matrix();
    c.probs.col(i) = e / e.sum();
  }
  return c;
}

void check_actions(std::span<const int> actions, int n) {
  if (static_cast<int>(actions.size()) != n) {
    throw ConfigError("expected " + std::to_string(n) + " actions, got " +
                      std::to_string(actions.size()));
  }
  for (int a : actions) {
    if (a < 0 || a >= kActionCount) throw ConfigError("action index out of range");
  }
}

}  // namespace

ActionDistribution forward(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                           const PolicyParams& params) {
  Cache c = run_forward(inputs, graph, params);
  return ActionDistribution{c.probs.transpose()};
}

ActionDistribution forward(std::span<const NodeFeature> features, const SegmentGraph& graph,
                           const PolicyParams& params) {
  const auto inputs = prepare_inputs(features, params.shape);
  return forward(std::span<const EmbedInput>(inputs), graph, params);
}

double logprob_sum(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                   const PolicyParams& params, std::span<const int> actions) {
  Cache c = run_forward(inputs, graph, params);
  check_actions(actions, graph.node_count());
  double s = 0.0;
  for (int i = 0; i < graph.node_count(); ++i) {
    s += std::log(c.probs(actions[static_cast<std::size_t>(i)], i));
  }
  return s;
}

PolicyGradient logprob_grad(std::span<const EmbedInput> inputs, const SegmentGraph& graph,
                            const PolicyParams& p, std::span<const int> actions,
                            double coefficient) {
  Cache c = run_forward(inputs, graph, p);
  const int n = graph.node_count();
  check_actions(actions, n);
  const auto& s = p.shape;
  PolicyGradient g = PolicyParams::zeros(s);
  if (n == 0) return g;

  // d/dlogits of coefficient * log softmax(logits)[a] = coefficient * (onehot(a) - probs).
  MatrixXd d_logits = -coefficient * c.probs;
  for (int i = 0; i < n; ++i) d_logits(actions[static_cast<std::size_t>(i)], i) += coefficient;
  g.head_v = d_logits * c.r.back().transpose();
  g.head_c = d_logits.rowwise().sum();
  MatrixXd d_up = p.head_v.transpose() * d_logits;

  for (int l = s.rnn_layers - 1; l >= 0; --l) {
    const MatrixXd& out = c.r[l];
    const MatrixXd& x = l == 0 ? c.h.back() : c.r[l - 1];
    MatrixXd d_pre(s.hidden, n);
    VectorXd carry = VectorXd::Zero(s.hidden);
    for (int t = n - 1; t >= 0; --t) {
      const VectorXd dh = d_up.col(t) + carry;
      d_pre.col(t) = (dh.array() * (1.0 - out.col(t).array().square())).matrix();
      carry = p.rnn_w[l].transpose() * d_pre.col(t);
    }
    if (n > 1) {
      g.rnn_w[l] = d_pre.rightCols(n - 1) * out.leftCols(n - 1).transpose();
    }
    g.rnn_u[l] = d_pre * x.transpose();
    g.rnn_b[l] = d_pre.rowwise().sum();
    d_up = p.rnn_u[l].transpose() * d_pre;
    check_finite(d_up, ("rnn" + std::to_string(l) + ".grad").c_str());
  }

  for (int k = s.sage_layers - 1; k >= 0; --k) {
    const MatrixXd d_z = tanh_back(d_up, c.h[k + 1]);
    g.sage_w[k] = d_z * c.concat[k].transpose();
    g.sage_b[k] = d_z.rowwise().sum();
    const MatrixXd d_cat = p.sage_w[k].transpose() * d_z;
    d_up = d_cat.topRows(s.embed_dim);
    for (int v = 0; v < n; ++v) {
      const auto& nb = graph.neighbors(v);
      if (nb.empty()) continue;
      const double w = 1.0 / static_cast<double>(nb.size());
      for (int u : nb) d_up.col(u) += w * d_cat.bottomRows(s.embed_dim).col(v);
    }
    check_finite(d_up, ("sage" + std::to_string(k) + ".grad").c_str());
  }

  const MatrixXd d_ze = tanh_back(d_up, c.h[0]);
  g.embed_w = d_ze * c.flat.transpose();
  g.embed_b = d_ze.rowwise().sum();
  const MatrixXd d_flat = p.embed_w.transpose() * d_ze;
  check_finite(d_flat, "embed.dense.grad");

  const int g1 = s.grid1();
  const int g2 = s.grid2();
  const int p2 = s.patch2;
  for (int i = 0; i < n; ++i) {
    const NodeCache& nc = c.nodes[static_cast<std::size_t>(i)];
    const EmbedInput& in = inputs[static_cast<std::size_t>(i)];
    const Eigen::Map<const MatrixXd> d_a2(d_flat.col(i).data(), s.channels2, g2 * g2);
    const MatrixXd d_z2 = tanh_back(d_a2, nc.a2);
    g.conv2_w.noalias() += d_z2 * nc.x2.transpose();
    g.conv2_b += d_z2.rowwise().sum();
    const MatrixXd d_x2 = p.conv2_w.transpose() * d_z2;
    MatrixXd d_a1(s.channels1, g1 * g1);
    for (int qr = 0; qr < g2; ++qr) {
      for (int qc = 0; qc < g2; ++qc) {
        const int col = qr * g2 + qc;
        int k = 0;
        for (int ch = 0; ch < s.channels1; ++ch) {
          for (int a = 0; a < p2; ++a) {
            for (int b = 0; b < p2; ++b) {
              d_a1(ch, (qr * p2 + a) * g1 + (qc * p2 + b)) = d_x2(k++, col);
            }
          }
        }
      }
    }
    const MatrixXd d_z1 = tanh_back(d_a1, nc.a1);
    g.conv1_b += d_z1.rowwise().sum();
    if (!in.patch_index.empty()) {
      MatrixXd active(s.channels1, static_cast<Eigen::Index>(in.patch_index.size()));
      for (std::size_t j = 0; j < in.patch_index.size(); ++j) {
        active.col(static_cast<Eigen::Index>(j)) = d_z1.col(in.patch_index[j]);
      }
      g.conv1_w.noalias() += active * in.patches.transpose();
    }
  }
  if (!g.all_finite()) throw NumericError("non-finite values in layer embed.conv.grad");
  return g;
}

PolicyGradient logprob_grad(std::span<const NodeFeature> features, const SegmentGraph& graph,
                            const PolicyParams& params, std::span<const int> actions,
                            double coefficient) {
  const auto inputs = prepare_inputs(features, params.shape);
  return logprob_grad(std::span<const EmbedInput>(inputs), graph, params, actions,
                      coefficient);
}

}  // namespace opcagent
