#include "sparseworld/nn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparseworld/errors.hpp"
#include "sparseworld/nn/params.hpp"

namespace sparseworld::nn {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

}  // namespace

Graph::Graph(const ParameterSet* params, bool record) : params_(params), record_(record) {
  nodes_.reserve(512);
  if (params_ != nullptr) param_vars_.assign(params_->count(), -1);
}

Var Graph::push(Matrix value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = record_ && needs_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <typename Derived>
void Graph::accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
  Node& n = node(v);
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Var Graph::constant(Matrix value) { return push(std::move(value), false); }

Var Graph::row(std::span<const double> values) {
  Matrix m(1, static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = values[i];
  return constant(std::move(m));
}

Var Graph::param(std::size_t index) {
  require(params_ != nullptr && index < param_vars_.size(), "parameter index out of range");
  if (param_vars_[index] >= 0) return Var{param_vars_[index]};
  Var v = push(params_->value(index), true);
  node(v).param = static_cast<int>(index);
  param_vars_[index] = v.id;
  return v;
}

void Graph::backward(Var loss) {
  require(value(loss).rows() == 1 && value(loss).cols() == 1, "backward requires a scalar loss");
  if (!record_) throw Error("backward on a graph built without recording");
  if (!needs(loss)) return;
  node(loss).grad = Matrix::Ones(1, 1);
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() != 0 && n.backward) n.backward();
  }
}

void Graph::accumulate_param_grads(Gradients& out) const {
  for (std::size_t p = 0; p < param_vars_.size(); ++p) {
    const int id = param_vars_[p];
    if (id < 0) continue;
    const Matrix& g = nodes_[static_cast<std::size_t>(id)].grad;
    if (g.size() == 0) continue;
    if (out[p].size() == 0) {
      out[p] = g;
    } else {
      out[p] += g;
    }
  }
}

Var Graph::add(Var a, Var b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "add: shape mismatch");
  Var out = push(value(a) + value(b), needs(a) || needs(b));
  if (needs(out)) {
    node(out).backward = [this, a, b, out] {
      accumulate(a, grad(out));
      accumulate(b, grad(out));
    };
  }
  return out;
}

Var Graph::sub(Var a, Var b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "sub: shape mismatch");
  Var out = push(value(a) - value(b), needs(a) || needs(b));
  if (needs(out)) {
    node(out).backward = [this, a, b, out] {
      accumulate(a, grad(out));
      accumulate(b, -grad(out));
    };
  }
  return out;
}

Var Graph::mul(Var a, Var b) {
  require(rows(a) == rows(b) && cols(a) == cols(b), "mul: shape mismatch");
  Var out = push(value(a).cwiseProduct(value(b)), needs(a) || needs(b));
  if (needs(out)) {
    node(out).backward = [this, a, b, out] {
      accumulate(a, grad(out).cwiseProduct(value(b)));
      accumulate(b, grad(out).cwiseProduct(value(a)));
    };
  }
  return out;
}

Var Graph::scale(Var a, double s) {
  Var out = push(value(a) * s, needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out, s] { accumulate(a, grad(out) * s); };
  }
  return out;
}

Var Graph::add_row(Var a, Var r) {
  require(rows(r) == 1 && cols(r) == cols(a), "add_row: shape mismatch");
  Matrix v = value(a);
  v.rowwise() += value(r).row(0);
  Var out = push(std::move(v), needs(a) || needs(r));
  if (needs(out)) {
    node(out).backward = [this, a, r, out] {
      accumulate(a, grad(out));
      if (needs(r)) accumulate(r, grad(out).colwise().sum());
    };
  }
  return out;
}

Var Graph::mul_row(Var a, Var r) {
  require(rows(r) == 1 && cols(r) == cols(a), "mul_row: shape mismatch");
  Matrix v = value(a);
  v.array().rowwise() *= value(r).row(0).array();
  Var out = push(std::move(v), needs(a) || needs(r));
  if (needs(out)) {
    node(out).backward = [this, a, r, out] {
      if (needs(a)) {
        Matrix ga = grad(out);
        ga.array().rowwise() *= value(r).row(0).array();
        accumulate(a, ga);
      }
      if (needs(r)) accumulate(r, grad(out).cwiseProduct(value(a)).colwise().sum());
    };
  }
  return out;
}

Var Graph::matmul(Var a, Var b) {
  require(cols(a) == rows(b), "matmul: inner dimension mismatch");
  Var out = push(value(a) * value(b), needs(a) || needs(b));
  if (needs(out)) {
    node(out).backward = [this, a, b, out] {
      if (needs(a)) accumulate(a, grad(out) * value(b).transpose());
      if (needs(b)) accumulate(b, value(a).transpose() * grad(out));
    };
  }
  return out;
}

Var Graph::matmul_nt(Var a, Var b) {
  require(cols(a) == cols(b), "matmul_nt: inner dimension mismatch");
  Var out = push(value(a) * value(b).transpose(), needs(a) || needs(b));
  if (needs(out)) {
    node(out).backward = [this, a, b, out] {
      if (needs(a)) accumulate(a, grad(out) * value(b));
      if (needs(b)) accumulate(b, grad(out).transpose() * value(a));
    };
  }
  return out;
}

Var Graph::gelu(Var a) {
  const Matrix& x = value(a);
  Matrix t = (kGeluC * (x.array() + 0.044715 * x.array().cube())).tanh().matrix();
  Matrix y = (0.5 * x.array() * (1.0 + t.array())).matrix();
  Var out = push(std::move(y), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out, t = std::move(t)] {
      const auto x = value(a).array();
      const auto th = t.array();
      const auto dinner = kGeluC * (1.0 + 3.0 * 0.044715 * x.square());
      const Matrix d = (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th.square()) * dinner).matrix();
      accumulate(a, grad(out).cwiseProduct(d));
    };
  }
  return out;
}

Var Graph::tanh(Var a) {
  Var out = push(value(a).array().tanh().matrix(), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out] {
      accumulate(a, (grad(out).array() * (1.0 - value(out).array().square())).matrix());
    };
  }
  return out;
}

Var Graph::sigmoid(Var a) {
  Var out = push((1.0 / (1.0 + (-value(a).array()).exp())).matrix(), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out] {
      const auto s = value(out).array();
      accumulate(a, (grad(out).array() * s * (1.0 - s)).matrix());
    };
  }
  return out;
}

Var Graph::layer_norm(Var x, Var gain, Var bias, double eps) {
  const Eigen::Index n = rows(x);
  const Eigen::Index c = cols(x);
  require(rows(gain) == 1 && cols(gain) == c && rows(bias) == 1 && cols(bias) == c, "layer_norm: shape mismatch");
  Matrix xhat(n, c);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = value(x).row(i).mean();
    const auto centered = value(x).row(i).array() - mean;
    const double var = centered.square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (centered * inv_std[i]).matrix();
  }
  Matrix y = xhat;
  y.array().rowwise() *= value(gain).row(0).array();
  y.rowwise() += value(bias).row(0);
  Var out = push(std::move(y), needs(x) || needs(gain) || needs(bias));
  if (needs(out)) {
    node(out).backward = [this, x, gain, bias, out, xhat = std::move(xhat), inv_std = std::move(inv_std)] {
      const Matrix& g = grad(out);
      if (needs(gain)) accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
      if (needs(bias)) accumulate(bias, g.colwise().sum());
      if (needs(x)) {
        Matrix gx = g;
        gx.array().rowwise() *= value(gain).row(0).array();
        Matrix dx(gx.rows(), gx.cols());
        for (Eigen::Index i = 0; i < gx.rows(); ++i) {
          const double mean_g = gx.row(i).mean();
          const double mean_gx = gx.row(i).dot(xhat.row(i)) / static_cast<double>(gx.cols());
          dx.row(i) = inv_std[i] * (gx.row(i).array() - mean_g - xhat.row(i).array() * mean_gx).matrix();
        }
        accumulate(x, dx);
      }
    };
  }
  return out;
}

Var Graph::normalize_rows(Var a) {
  const Eigen::VectorXd norms = value(a).rowwise().norm();
  require((norms.array() > 0.0).all(), "normalize_rows: zero row");
  Matrix y = value(a);
  for (Eigen::Index i = 0; i < y.rows(); ++i) y.row(i) /= norms[i];
  Var out = push(std::move(y), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out, norms] {
      const Matrix& g = grad(out);
      const Matrix& y = value(out);
      Matrix d(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        d.row(i) = (g.row(i) - y.row(i) * g.row(i).dot(y.row(i))) / norms[i];
      }
      accumulate(a, d);
    };
  }
  return out;
}

namespace {

// Masked softmax of one row in place; returns false when nothing is admissible.
template <typename Row, typename MaskRow>
bool masked_softmax_row(Row&& s, const MaskRow& m) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (m(j)) mx = std::max(mx, s(j));
  }
  if (!std::isfinite(mx)) {
    s.setZero();
    return false;
  }
  double total = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    s(j) = m(j) ? std::exp(s(j) - mx) : 0.0;
    total += s(j);
  }
  s /= total;
  return true;
}

}  // namespace

Var Graph::attention(Var q, Var k, Var v, const Mask& mask, int heads) {
  const Eigen::Index n = rows(q);
  const Eigen::Index m = rows(k);
  const Eigen::Index c = cols(q);
  require(cols(k) == c && cols(v) == c && rows(v) == m, "attention: q/k/v shape mismatch");
  require(mask.rows() == n && mask.cols() == m, "attention: mask shape mismatch");
  require(heads > 0 && c % heads == 0, "attention: width not divisible by heads");
  const Eigen::Index dh = c / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  Matrix y = Matrix::Zero(n, c);
  for (int h = 0; h < heads; ++h) {
    const Eigen::Index off = h * dh;
    Matrix s = value(q).middleCols(off, dh) * value(k).middleCols(off, dh).transpose() * scale_factor;
    for (Eigen::Index i = 0; i < n; ++i) masked_softmax_row(s.row(i), mask.row(i));
    y.middleCols(off, dh) = s * value(v).middleCols(off, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  Var out = push(std::move(y), needs(q) || needs(k) || needs(v));
  if (needs(out)) {
    node(out).backward = [this, q, k, v, out, heads, dh, scale_factor, probs = std::move(probs)] {
      const Matrix& g = grad(out);
      Matrix gq = Matrix::Zero(rows(q), cols(q));
      Matrix gk = Matrix::Zero(rows(k), cols(k));
      Matrix gv = Matrix::Zero(rows(v), cols(v));
      for (int h = 0; h < heads; ++h) {
        const Eigen::Index off = h * dh;
        const Matrix& p = probs[static_cast<std::size_t>(h)];
        const auto go = g.middleCols(off, dh);
        gv.middleCols(off, dh) += p.transpose() * go;
        Matrix dp = go * value(v).middleCols(off, dh).transpose();
        const Eigen::VectorXd rowdot = (dp.cwiseProduct(p)).rowwise().sum();
        Matrix ds = p.cwiseProduct(dp.colwise() - rowdot) * scale_factor;
        gq.middleCols(off, dh) += ds * value(k).middleCols(off, dh);
        gk.middleCols(off, dh) += ds.transpose() * value(q).middleCols(off, dh);
      }
      accumulate(q, gq);
      accumulate(k, gk);
      accumulate(v, gv);
    };
  }
  return out;
}

Var Graph::grouped_attention(Var q, Var k, Var v, const Mask& mask, int group, int heads) {
  const Eigen::Index n = rows(q);
  const Eigen::Index c = cols(q);
  require(group > 0 && rows(k) == n * group && rows(v) == n * group, "grouped_attention: key rows != n * group");
  require(cols(k) == c && cols(v) == c, "grouped_attention: width mismatch");
  require(mask.rows() == n && mask.cols() == group, "grouped_attention: mask shape mismatch");
  require(heads > 0 && c % heads == 0, "grouped_attention: width not divisible by heads");
  const Eigen::Index dh = c / heads;
  const double scale_factor = 1.0 / std::sqrt(static_cast<double>(dh));

  // probs(i, h * group + j)
  Matrix probs = Matrix::Zero(n, static_cast<Eigen::Index>(heads) * group);
  Matrix y = Matrix::Zero(n, c);
  Eigen::RowVectorXd s(group);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int h = 0; h < heads; ++h) {
      const Eigen::Index off = h * dh;
      for (int j = 0; j < group; ++j) {
        s[j] = value(q).row(i).segment(off, dh).dot(value(k).row(i * group + j).segment(off, dh)) * scale_factor;
      }
      masked_softmax_row(s, mask.row(i));
      probs.row(i).segment(static_cast<Eigen::Index>(h) * group, group) = s;
      for (int j = 0; j < group; ++j) {
        if (s[j] != 0.0) y.row(i).segment(off, dh) += s[j] * value(v).row(i * group + j).segment(off, dh);
      }
    }
  }
  Var out = push(std::move(y), needs(q) || needs(k) || needs(v));
  if (needs(out)) {
    node(out).backward = [this, q, k, v, out, heads, group, dh, scale_factor, probs = std::move(probs)] {
      const Matrix& g = grad(out);
      const Eigen::Index n = rows(q);
      Matrix gq = Matrix::Zero(n, cols(q));
      Matrix gk = Matrix::Zero(rows(k), cols(k));
      Matrix gv = Matrix::Zero(rows(v), cols(v));
      Eigen::RowVectorXd dp(group);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int h = 0; h < heads; ++h) {
          const Eigen::Index off = h * dh;
          const auto p = probs.row(i).segment(static_cast<Eigen::Index>(h) * group, group);
          const auto go = g.row(i).segment(off, dh);
          double rowdot = 0.0;
          for (int j = 0; j < group; ++j) {
            const Eigen::Index kr = i * group + j;
            gv.row(kr).segment(off, dh) += p[j] * go;
            dp[j] = go.dot(value(v).row(kr).segment(off, dh));
            rowdot += dp[j] * p[j];
          }
          for (int j = 0; j < group; ++j) {
            const double ds = p[j] * (dp[j] - rowdot) * scale_factor;
            if (ds == 0.0) continue;
            const Eigen::Index kr = i * group + j;
            gq.row(i).segment(off, dh) += ds * value(k).row(kr).segment(off, dh);
            gk.row(kr).segment(off, dh) += ds * value(q).row(i).segment(off, dh);
          }
        }
      }
      accumulate(q, gq);
      accumulate(k, gk);
      accumulate(v, gv);
    };
  }
  return out;
}

Var Graph::concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const Eigen::Index n = rows(parts.front());
  Eigen::Index total = 0;
  bool any = false;
  for (Var p : parts) {
    require(rows(p) == n, "concat_cols: row mismatch");
    total += cols(p);
    any = any || needs(p);
  }
  Matrix y(n, total);
  Eigen::Index off = 0;
  for (Var p : parts) {
    y.middleCols(off, cols(p)) = value(p);
    off += cols(p);
  }
  Var out = push(std::move(y), any);
  if (needs(out)) {
    std::vector<Var> ins(parts.begin(), parts.end());
    node(out).backward = [this, out, ins = std::move(ins)] {
      Eigen::Index off = 0;
      for (Var p : ins) {
        if (needs(p)) accumulate(p, grad(out).middleCols(off, cols(p)));
        off += cols(p);
      }
    };
  }
  return out;
}

Var Graph::concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const Eigen::Index c = cols(parts.front());
  Eigen::Index total = 0;
  bool any = false;
  for (Var p : parts) {
    require(cols(p) == c, "concat_rows: column mismatch");
    total += rows(p);
    any = any || needs(p);
  }
  Matrix y(total, c);
  Eigen::Index off = 0;
  for (Var p : parts) {
    y.middleRows(off, rows(p)) = value(p);
    off += rows(p);
  }
  Var out = push(std::move(y), any);
  if (needs(out)) {
    std::vector<Var> ins(parts.begin(), parts.end());
    node(out).backward = [this, out, ins = std::move(ins)] {
      Eigen::Index off = 0;
      for (Var p : ins) {
        if (needs(p)) accumulate(p, grad(out).middleRows(off, rows(p)));
        off += rows(p);
      }
    };
  }
  return out;
}

Var Graph::slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= cols(a), "slice_cols: out of range");
  Var out = push(value(a).middleCols(start, count), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out, start, count] {
      Matrix g = Matrix::Zero(rows(a), cols(a));
      g.middleCols(start, count) = grad(out);
      accumulate(a, g);
    };
  }
  return out;
}

Var Graph::slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count >= 0 && start + count <= rows(a), "slice_rows: out of range");
  Var out = push(value(a).middleRows(start, count), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out, start, count] {
      Matrix g = Matrix::Zero(rows(a), cols(a));
      g.middleRows(start, count) = grad(out);
      accumulate(a, g);
    };
  }
  return out;
}

Var Graph::gather_rows(Var a, std::span<const int> index) {
  Matrix y(static_cast<Eigen::Index>(index.size()), cols(a));
  for (std::size_t i = 0; i < index.size(); ++i) {
    require(index[i] >= 0 && index[i] < rows(a), "gather_rows: index out of range");
    y.row(static_cast<Eigen::Index>(i)) = value(a).row(index[i]);
  }
  Var out = push(std::move(y), needs(a));
  if (needs(out)) {
    std::vector<int> idx(index.begin(), index.end());
    node(out).backward = [this, a, out, idx = std::move(idx)] {
      Matrix g = Matrix::Zero(rows(a), cols(a));
      for (std::size_t i = 0; i < idx.size(); ++i) g.row(idx[i]) += grad(out).row(static_cast<Eigen::Index>(i));
      accumulate(a, g);
    };
  }
  return out;
}

Var Graph::sum(Var a) {
  Var out = push(Matrix::Constant(1, 1, value(a).sum()), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out] {
      accumulate(a, Matrix::Constant(rows(a), cols(a), grad(out)(0, 0)));
    };
  }
  return out;
}

Var Graph::weighted_sum(Var a, const Matrix& weights) {
  require(weights.rows() == rows(a) && weights.cols() == cols(a), "weighted_sum: shape mismatch");
  Var out = push(Matrix::Constant(1, 1, value(a).cwiseProduct(weights).sum()), needs(a));
  if (needs(out)) {
    node(out).backward = [this, a, out, weights] { accumulate(a, weights * grad(out)(0, 0)); };
  }
  return out;
}

Var Graph::smooth_l1(Var pred, const Matrix& target, const Matrix& weights, double beta) {
  require(target.rows() == rows(pred) && target.cols() == cols(pred), "smooth_l1: target shape mismatch");
  require(weights.rows() == rows(pred) && weights.cols() == cols(pred), "smooth_l1: weight shape mismatch");
  const Matrix diff = value(pred) - target;
  double total = 0.0;
  Matrix dloss(diff.rows(), diff.cols());
  for (Eigen::Index i = 0; i < diff.rows(); ++i) {
    for (Eigen::Index j = 0; j < diff.cols(); ++j) {
      const double d = diff(i, j);
      const double ad = std::abs(d);
      const double w = weights(i, j);
      if (ad < beta) {
        total += w * 0.5 * d * d / beta;
        dloss(i, j) = w * d / beta;
      } else {
        total += w * (ad - 0.5 * beta);
        dloss(i, j) = w * (d > 0.0 ? 1.0 : -1.0);
      }
    }
  }
  Var out = push(Matrix::Constant(1, 1, total), needs(pred));
  if (needs(out)) {
    node(out).backward = [this, pred, out, dloss = std::move(dloss)] { accumulate(pred, dloss * grad(out)(0, 0)); };
  }
  return out;
}

Var Graph::bce_with_logits(Var logits, const Matrix& target, const Matrix& weights) {
  require(target.rows() == rows(logits) && target.cols() == cols(logits), "bce: target shape mismatch");
  require(weights.rows() == rows(logits) && weights.cols() == cols(logits), "bce: weight shape mismatch");
  const Matrix& x = value(logits);
  double total = 0.0;
  Matrix dloss(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double z = x(i, j);
      const double t = target(i, j);
      // log(1 + exp(-|z|)) + max(z, 0) - z t
      total += weights(i, j) * (std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * t);
      const double s = 1.0 / (1.0 + std::exp(-z));
      dloss(i, j) = weights(i, j) * (s - t);
    }
  }
  Var out = push(Matrix::Constant(1, 1, total), needs(logits));
  if (needs(out)) {
    node(out).backward = [this, logits, out, dloss = std::move(dloss)] {
      accumulate(logits, dloss * grad(out)(0, 0));
    };
  }
  return out;
}

Var Graph::cross_entropy_rows(Var logits, std::span<const int> labels, std::span<const double> weights) {
  const Eigen::Index n = rows(logits);
  require(static_cast<Eigen::Index>(labels.size()) == n && static_cast<Eigen::Index>(weights.size()) == n,
          "cross_entropy_rows: label count mismatch");
  const Matrix& x = value(logits);
  Matrix probs(n, cols(logits));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mx = x.row(i).maxCoeff();
    const auto e = (x.row(i).array() - mx).exp();
    const double z = e.sum();
    probs.row(i) = (e / z).matrix();
    const int label = labels[static_cast<std::size_t>(i)];
    require(label >= 0 && label < cols(logits), "cross_entropy_rows: label out of range");
    total += weights[static_cast<std::size_t>(i)] * (std::log(z) + mx - x(i, label));
  }
  Var out = push(Matrix::Constant(1, 1, total), needs(logits));
  if (needs(out)) {
    std::vector<int> lab(labels.begin(), labels.end());
    std::vector<double> w(weights.begin(), weights.end());
    node(out).backward = [this, logits, out, probs = std::move(probs), lab = std::move(lab), w = std::move(w)] {
      Matrix d = probs;
      for (Eigen::Index i = 0; i < d.rows(); ++i) {
        d(i, lab[static_cast<std::size_t>(i)]) -= 1.0;
        d.row(i) *= w[static_cast<std::size_t>(i)];
      }
      accumulate(logits, d * grad(out)(0, 0));
    };
  }
  return out;
}

}  // namespace sparseworld::nn
