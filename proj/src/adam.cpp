#include "edgecal/adam.hpp"

#include <cmath>

#include "edgecal/error.hpp"

namespace edgecal {

void adam_step(Matrix& param, const Matrix& grad, AdamState& state,
               const AdamConfig& cfg) {
  if (!param.same_shape(grad))
    throw ContractError("adam_step: grad shape " + grad.shape_str() +
                        " does not match param " + param.shape_str());
  if (state.m.size() == 0) {
    state.m = Matrix(param.rows, param.cols, 0.0);
    state.v = Matrix(param.rows, param.cols, 0.0);
    state.step = 0;
  }
  if (!state.m.same_shape(param))
    throw ContractError("adam_step: optimizer state shape mismatch");

  state.step += 1;
  double b1t = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  double b2t = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < param.size(); ++i) {
    param.data[i] -= cfg.lr * cfg.weight_decay * param.data[i];
    double g = grad.data[i];
    state.m.data[i] = cfg.beta1 * state.m.data[i] + (1.0 - cfg.beta1) * g;
    state.v.data[i] = cfg.beta2 * state.v.data[i] + (1.0 - cfg.beta2) * g * g;
    double mhat = state.m.data[i] / b1t;
    double vhat = state.v.data[i] / b2t;
    param.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void ParamStore::add(const std::string& name, Matrix value) {
  if (has(name)) throw ContractError("duplicate parameter name: " + name);
  names_.push_back(name);
  values_.push_back(std::move(value));
  states_.emplace_back();
}

Matrix& ParamStore::get(const std::string& name) {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return values_[i];
  throw ContractError("unknown parameter: " + name);
}

const Matrix& ParamStore::get(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return values_[i];
  throw ContractError("unknown parameter: " + name);
}

bool ParamStore::has(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

std::vector<Var> ParamStore::leaves(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(values_.size());
  for (const Matrix& v : values_) out.push_back(tape.leaf(v));
  return out;
}

void ParamStore::apply_gradients(const std::vector<Var>& leaves,
                                 const GradientStore& grads,
                                 const AdamConfig& cfg) {
  if (leaves.size() != values_.size())
    throw ContractError("apply_gradients: leaf list does not match store");
  for (size_t i = 0; i < values_.size(); ++i)
    adam_step(values_[i], grads.grad(leaves[i]), states_[i], cfg);
}

void ParamStore::reset_optimizer() {
  for (auto& s : states_) s = AdamState();
}

}  // namespace edgecal
