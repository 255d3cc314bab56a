#include "sparseworld/nn/layers.hpp"

#include <array>
#include <cmath>

#include "sparseworld/scene.hpp"

namespace sparseworld::nn {

Linear Linear::create(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
                      std::mt19937_64& rng, bool with_bias) {
  Linear l;
  l.weight = ps.add_xavier(name + ".w", in, out, rng);
  l.has_bias = with_bias;
  if (with_bias) l.bias = ps.add_constant(name + ".b", 1, out, 0.0);
  return l;
}

Linear Linear::zeros(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out) {
  Linear l;
  l.weight = ps.add_constant(name + ".w", in, out, 0.0);
  l.bias = ps.add_constant(name + ".b", 1, out, 0.0);
  return l;
}

Var Linear::operator()(Graph& g, Var x) const {
  Var y = g.matmul(x, g.param(weight));
  return has_bias ? g.add_row(y, g.param(bias)) : y;
}

LayerNorm LayerNorm::create(ParameterSet& ps, const std::string& name, Eigen::Index width) {
  return {ps.add_constant(name + ".gain", 1, width, 1.0), ps.add_constant(name + ".bias", 1, width, 0.0)};
}

Var LayerNorm::operator()(Graph& g, Var x) const { return g.layer_norm(x, g.param(gain), g.param(bias)); }

MultiHeadAttention MultiHeadAttention::create(ParameterSet& ps, const std::string& name, Eigen::Index width,
                                              int heads, std::mt19937_64& rng) {
  MultiHeadAttention a;
  a.q = Linear::create(ps, name + ".q", width, width, rng);
  a.k = Linear::create(ps, name + ".k", width, width, rng);
  a.v = Linear::create(ps, name + ".v", width, width, rng);
  a.o = Linear::create(ps, name + ".o", width, width, rng);
  a.heads = heads;
  return a;
}

Var MultiHeadAttention::operator()(Graph& g, Var x, Var memory, const Mask& mask) const {
  Var y = g.attention(q(g, x), k(g, memory), v(g, memory), mask, heads);
  return o(g, y);
}

Var MultiHeadAttention::grouped(Graph& g, Var x, Var memory, const Mask& mask, int group) const {
  Var y = g.grouped_attention(q(g, x), k(g, memory), v(g, memory), mask, group, heads);
  return o(g, y);
}

FeedForward FeedForward::create(ParameterSet& ps, const std::string& name, Eigen::Index width,
                                Eigen::Index hidden, std::mt19937_64& rng) {
  return {Linear::create(ps, name + ".up", width, hidden, rng), Linear::create(ps, name + ".down", hidden, width, rng)};
}

Var FeedForward::operator()(Graph& g, Var x) const { return down(g, g.gelu(up(g, x))); }

Matrix fourier_features(const Matrix& x, int n_freq) {
  const Eigen::Index d = x.cols();
  Matrix out(x.rows(), 2 * n_freq * d);
  for (int k = 0; k < n_freq; ++k) {
    const double w = std::ldexp(kPi, k);
    out.middleCols(2 * k * d, d) = (w * x.array()).sin().matrix();
    out.middleCols(2 * k * d + d, d) = (w * x.array()).cos().matrix();
  }
  return out;
}

}  // namespace sparseworld::nn
