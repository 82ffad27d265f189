#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "edgecal/graph.hpp"
#include "edgecal/matrix.hpp"
#include "edgecal/tape.hpp"

namespace testutil {

using edgecal::Matrix;
using edgecal::Rng;
using edgecal::Tape;
using edgecal::Var;

inline Matrix rand_mat(int rows, int cols, Rng& rng, double lo = -2.0,
                       double hi = 2.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

using BuildFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central finite differences against the tape gradient; returns the worst
// relative error across all input entries.
inline double fd_max_rel_error(const std::vector<Matrix>& inputs,
                               const BuildFn& build, double h = 1e-5) {
  Tape tape;
  std::vector<Var> leaves;
  for (const Matrix& m : inputs) leaves.push_back(tape.leaf(m));
  Var root = build(tape, leaves);
  edgecal::GradientStore grads = tape.backward(root);

  auto eval = [&](const std::vector<Matrix>& xs) {
    Tape t;
    std::vector<Var> ls;
    for (const Matrix& m : xs) ls.push_back(t.leaf(m));
    return t.value(build(t, ls)).scalar();
  };

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const Matrix& g = grads.grad(leaves[i]);
    for (size_t e = 0; e < inputs[i].size(); ++e) {
      std::vector<Matrix> xs = inputs;
      xs[i].data[e] += h;
      double up = eval(xs);
      xs[i].data[e] -= 2.0 * h;
      double dn = eval(xs);
      double fd = (up - dn) / (2.0 * h);
      double an = g.data[e];
      double denom = std::max({std::fabs(fd), std::fabs(an), 1e-8});
      worst = std::max(worst, std::fabs(fd - an) / denom);
    }
  }
  return worst;
}

// Same equal-width rule as the library: floor(c * n), last bin closed at 1.
inline int width_bin(double c, int n_bins) {
  int b = static_cast<int>(c * n_bins);
  return std::clamp(b, 0, n_bins - 1);
}

// Independent Eq.-2 style ECE: per-bin summed residuals, |.|, averaged by M.
inline double brute_force_ece(const std::vector<double>& conf,
                              const std::vector<int>& labels, int n_bins) {
  std::vector<double> resid(n_bins, 0.0);
  for (size_t i = 0; i < conf.size(); ++i)
    resid[width_bin(conf[i], n_bins)] += labels[i] - conf[i];
  double acc = 0.0;
  for (double r : resid) acc += std::fabs(r);
  return acc / static_cast<double>(conf.size());
}

}  // namespace testutil
