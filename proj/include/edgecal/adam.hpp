#pragma once

#include <string>
#include <vector>

#include "edgecal/matrix.hpp"
#include "edgecal/tape.hpp"

namespace edgecal {

// Per-parameter Adam moments.
struct AdamState {
  Matrix m;
  Matrix v;
  long step = 0;
};

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 5e-8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One Adam update. Decoupled weight decay (lr * wd * p) is applied before the
// adaptive step.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state,
               const AdamConfig& cfg);

// Ordered collection of named trainable matrices with optimizer state.
// Deterministic iteration order (insertion order) everywhere.
class ParamStore {
 public:
  void add(const std::string& name, Matrix value);
  Matrix& get(const std::string& name);
  const Matrix& get(const std::string& name) const;
  bool has(const std::string& name) const;

  size_t count() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  Matrix& value_at(size_t i) { return values_[i]; }
  const Matrix& value_at(size_t i) const { return values_[i]; }

  // Registers every parameter as a leaf on the tape; parallel to names().
  std::vector<Var> leaves(Tape& tape) const;
  // Applies one Adam step from the gradients of those leaves.
  void apply_gradients(const std::vector<Var>& leaves, const GradientStore& grads,
                       const AdamConfig& cfg);
  void reset_optimizer();

  bool operator==(const ParamStore& o) const {
    if (names_ != o.names_) return false;
    for (size_t i = 0; i < values_.size(); ++i)
      if (!values_[i].same_shape(o.values_[i]) ||
          values_[i].data != o.values_[i].data)
        return false;
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<AdamState> states_;
};

}  // namespace edgecal
