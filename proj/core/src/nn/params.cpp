#include "sparseworld/nn/params.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "sparseworld/errors.hpp"

namespace sparseworld::nn {

std::size_t ParameterSet::add(std::string name, Matrix value) {
  if (contains(name)) throw ValidationError("duplicate parameter name: " + name);
  entries_.push_back(Entry{std::move(name), std::move(value)});
  return entries_.size() - 1;
}

std::size_t ParameterSet::add_xavier(std::string name, Eigen::Index rows, Eigen::Index cols,
                                     std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return add(std::move(name), std::move(m));
}

std::size_t ParameterSet::add_constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value) {
  return add(std::move(name), Matrix::Constant(rows, cols, value));
}

std::size_t ParameterSet::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw ShapeMismatch("unknown parameter: " + std::string(name));
}

bool ParameterSet::contains(std::string_view name) const noexcept {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

Gradients ParameterSet::zero_gradients() const {
  Gradients g;
  g.reserve(entries_.size());
  for (const auto& e : entries_) g.push_back(Matrix::Zero(e.value.rows(), e.value.cols()));
  return g;
}

bool ParameterSet::all_finite() const {
  for (const auto& e : entries_) {
    if (!e.value.allFinite()) return false;
  }
  return true;
}

Eigen::VectorXd ParameterSet::to_flat() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(scalar_count()));
  Eigen::Index off = 0;
  for (const auto& e : entries_) {
    flat.segment(off, e.value.size()) = Eigen::Map<const Eigen::VectorXd>(e.value.data(), e.value.size());
    off += e.value.size();
  }
  return flat;
}

void ParameterSet::from_flat(const Eigen::VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(scalar_count())) throw ShapeMismatch("flat parameter size mismatch");
  Eigen::Index off = 0;
  for (auto& e : entries_) {
    Eigen::Map<Eigen::VectorXd>(e.value.data(), e.value.size()) = flat.segment(off, e.value.size());
    off += e.value.size();
  }
}

void ParameterSet::load_values(const ParameterSet& other) {
  for (auto& e : entries_) {
    const std::size_t j = other.index_of(e.name);
    const Matrix& v = other.value(j);
    if (v.rows() != e.value.rows() || v.cols() != e.value.cols()) {
      throw ShapeMismatch("parameter '" + e.name + "' has shape " + std::to_string(v.rows()) + "x" +
                          std::to_string(v.cols()) + ", expected " + std::to_string(e.value.rows()) + "x" +
                          std::to_string(e.value.cols()));
    }
    e.value = v;
  }
}

Eigen::VectorXd flatten(const Gradients& grads) {
  Eigen::Index total = 0;
  for (const auto& g : grads) total += g.size();
  Eigen::VectorXd flat(total);
  Eigen::Index off = 0;
  for (const auto& g : grads) {
    flat.segment(off, g.size()) = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    off += g.size();
  }
  return flat;
}

void add_into(Gradients& acc, const Gradients& g) {
  if (acc.size() != g.size()) throw ShapeMismatch("gradient list size mismatch");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (g[i].size() == 0) continue;
    if (acc[i].size() == 0) {
      acc[i] = g[i];
    } else {
      acc[i] += g[i];
    }
  }
}

void scale_gradients(Gradients& g, double s) {
  for (auto& m : g) m *= s;
}

void to_json(nlohmann::json& j, const ParameterSet& p) {
  j = nlohmann::json::array();
  for (const auto& e : p.entries()) {
    j.push_back({{"name", e.name},
                 {"rows", e.value.rows()},
                 {"cols", e.value.cols()},
                 {"values", std::vector<double>(e.value.data(), e.value.data() + e.value.size())}});
  }
}

ParameterSet parameters_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ValidationError("parameters must be a JSON array");
  ParameterSet p;
  for (const auto& e : j) {
    const auto rows = e.at("rows").get<Eigen::Index>();
    const auto cols = e.at("cols").get<Eigen::Index>();
    const auto values = e.at("values").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(values.size()) != rows * cols) {
      throw ShapeMismatch("parameter '" + e.at("name").get<std::string>() + "' value count mismatch");
    }
    Matrix m(rows, cols);
    std::copy(values.begin(), values.end(), m.data());
    p.add(e.at("name").get<std::string>(), std::move(m));
  }
  return p;
}

namespace {

bool has_prefix(const std::vector<std::string>& prefixes, const std::string& name) {
  if (prefixes.empty()) return true;
  for (const auto& p : prefixes) {
    if (name.rfind(p, 0) == 0) return true;
  }
  return false;
}

}  // namespace

bool SgdMomentum::trainable(const std::string& name) const { return has_prefix(prefixes_, name); }

void SgdMomentum::step(ParameterSet& params, const Gradients& grads) {
  if (grads.size() != params.count()) throw ShapeMismatch("gradient count does not match parameters");
  if (velocity_.empty()) velocity_ = params.zero_gradients();
  for (std::size_t i = 0; i < params.count(); ++i) {
    if (grads[i].size() == 0 || !trainable(params.name(i))) continue;
    velocity_[i] = momentum_ * velocity_[i] + grads[i];
    params.value(i) -= lr_ * velocity_[i];
  }
}

bool Adam::trainable(const std::string& name) const { return has_prefix(prefixes_, name); }

void Adam::step(ParameterSet& params, const Gradients& grads) {
  if (grads.size() != params.count()) throw ShapeMismatch("gradient count does not match parameters");
  if (m_.empty()) {
    m_ = params.zero_gradients();
    v_ = params.zero_gradients();
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.count(); ++i) {
    if (grads[i].size() == 0 || !trainable(params.name(i))) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    params.value(i).array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

double cosine_learning_rate(double base, double final_lr, int epoch, int epochs) noexcept {
  if (final_lr < 0.0 || epochs <= 1) return base;
  const double progress = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return final_lr + 0.5 * (base - final_lr) * (1.0 + std::cos(3.14159265358979323846 * progress));
}

}  // namespace sparseworld::nn
