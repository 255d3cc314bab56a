#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sparseworld/nn/graph.hpp"

namespace sparseworld::nn {

/// Ordered collection of named weight matrices.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Matrix value;
  };

  std::size_t add(std::string name, Matrix value);
  /// Uniform(-a, a) with a = sqrt(6 / (rows + cols)).
  std::size_t add_xavier(std::string name, Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);
  std::size_t add_constant(std::string name, Eigen::Index rows, Eigen::Index cols, double value);

  [[nodiscard]] std::size_t index_of(std::string_view name) const;
  [[nodiscard]] bool contains(std::string_view name) const noexcept;
  [[nodiscard]] const Matrix& value(std::size_t i) const { return entries_[i].value; }
  [[nodiscard]] Matrix& value(std::size_t i) { return entries_[i].value; }
  [[nodiscard]] const std::string& name(std::size_t i) const { return entries_[i].name; }
  [[nodiscard]] std::size_t count() const noexcept { return entries_.size(); }
  [[nodiscard]] std::size_t scalar_count() const noexcept;
  [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }

  [[nodiscard]] Gradients zero_gradients() const;
  [[nodiscard]] bool all_finite() const;

  /// Flattened copy in entry order; from_flat writes it back.
  [[nodiscard]] Eigen::VectorXd to_flat() const;
  void from_flat(const Eigen::VectorXd& flat);

  /// Copies values by name from `other`; throws ShapeMismatch when a name
  /// is missing or a shape differs.
  void load_values(const ParameterSet& other);

 private:
  std::vector<Entry> entries_;
};

Eigen::VectorXd flatten(const Gradients& grads);
void add_into(Gradients& acc, const Gradients& g);
void scale_gradients(Gradients& g, double s);

/// Cosine annealing from `base` at epoch 0 to `final_lr` at the last epoch.
/// A negative `final_lr` keeps the rate constant.
double cosine_learning_rate(double base, double final_lr, int epoch, int epochs) noexcept;

void to_json(nlohmann::json& j, const ParameterSet& p);
ParameterSet parameters_from_json(const nlohmann::json& j);

/// Stochastic gradient descent with classical momentum.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}
  void step(ParameterSet& params, const Gradients& grads);
  /// Restricts updates to entries whose name starts with one of `prefixes`.
  void set_trainable_prefixes(std::vector<std::string> prefixes) { prefixes_ = std::move(prefixes); }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }

 private:
  bool trainable(const std::string& name) const;

  double lr_;
  double momentum_;
  std::vector<std::string> prefixes_;
  std::vector<Matrix> velocity_;
};

class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParameterSet& params, const Gradients& grads);
  void set_trainable_prefixes(std::vector<std::string> prefixes) { prefixes_ = std::move(prefixes); }
  void set_learning_rate(double lr) noexcept { lr_ = lr; }

 private:
  bool trainable(const std::string& name) const;

  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long steps_{0};
  std::vector<std::string> prefixes_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

}  // namespace sparseworld::nn
