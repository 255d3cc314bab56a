#pragma once

// Parameterized building blocks. Each layer registers its weights in a
// ParameterSet under a name prefix at construction and afterwards only holds
// indices into that set, so a layer can be applied to any Graph bound to a
// ParameterSet with the same layout.

#include <random>
#include <string>

#include "sparseworld/nn/graph.hpp"
#include "sparseworld/nn/params.hpp"

namespace sparseworld::nn {

struct Linear {
  std::size_t weight{0};  // in x out
  std::size_t bias{0};    // 1 x out
  bool has_bias{true};

  static Linear create(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out,
                       std::mt19937_64& rng, bool with_bias = true);
  /// Zero-initialized variant, used for output heads that must start as identity residuals.
  static Linear zeros(ParameterSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out);
  Var operator()(Graph& g, Var x) const;
};

struct LayerNorm {
  std::size_t gain{0};
  std::size_t bias{0};

  static LayerNorm create(ParameterSet& ps, const std::string& name, Eigen::Index width);
  Var operator()(Graph& g, Var x) const;
};

struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads{1};

  static MultiHeadAttention create(ParameterSet& ps, const std::string& name, Eigen::Index width, int heads,
                                   std::mt19937_64& rng);
  /// Queries from `x`, keys/values from `memory`; mask is rows(x) x rows(memory).
  Var operator()(Graph& g, Var x, Var memory, const Mask& mask) const;
  /// Query i attends only to memory rows [i*group, (i+1)*group).
  Var grouped(Graph& g, Var x, Var memory, const Mask& mask, int group) const;
};

struct FeedForward {
  Linear up, down;

  static FeedForward create(ParameterSet& ps, const std::string& name, Eigen::Index width, Eigen::Index hidden,
                            std::mt19937_64& rng);
  Var operator()(Graph& g, Var x) const;
};

/// [sin(2^k pi x), cos(2^k pi x)] for k = 0 .. n_freq-1, grouped by
/// frequency: all sines of frequency k, then all cosines, then k + 1.
Matrix fourier_features(const Matrix& x, int n_freq);

}  // namespace sparseworld::nn
