#include "edgecal/tape.hpp"

#include <cmath>
#include <utility>

#include "edgecal/error.hpp"

namespace edgecal {

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  // max(x,0) + log1p(exp(-|x|))
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

Matrix sigmoid(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data) v = stable_sigmoid(v);
  return out;
}

Matrix softplus(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data) v = stable_softplus(v);
  return out;
}

const Matrix& GradientStore::grad(Var v) const {
  auto it = grads.find(v.id);
  if (it == grads.end()) throw ContractError("no gradient recorded for node");
  return it->second;
}

void GradientStore::accumulate(const GradientStore& other) {
  for (const auto& [id, g] : other.grads) {
    auto it = grads.find(id);
    if (it == grads.end()) {
      grads.emplace(id, g);
    } else {
      if (!it->second.same_shape(g))
        throw DimensionError("gradient shape changed between passes");
      for (size_t i = 0; i < g.size(); ++i) it->second.data[i] += g.data[i];
    }
  }
}

int Tape::push(Matrix value, bool is_leaf, std::function<void(Tape&, int)> fwd,
               std::function<void(Tape&, int)> bwd) {
  Node n;
  n.value = std::move(value);
  n.is_leaf = is_leaf;
  n.forward = std::move(fwd);
  n.backward = std::move(bwd);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Matrix& Tape::grad_of(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() > 0)
    n.grad = Matrix(n.value.rows, n.value.cols, 0.0);
  return n.grad;
}

void Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw ContractError("Var does not belong to this tape");
}

void Tape::check_same_shape(Var a, Var b, const char* op) const {
  if (!nodes_[a.id].value.same_shape(nodes_[b.id].value))
    throw DimensionError(std::string(op) + " shape mismatch: " +
                         nodes_[a.id].value.shape_str() + " vs " +
                         nodes_[b.id].value.shape_str());
}

const Matrix& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

Var Tape::leaf(const Matrix& m) { return {push(m, true, nullptr, nullptr)}; }

Var Tape::constant(const Matrix& m) { return {push(m, false, nullptr, nullptr)}; }

Var Tape::matmul(Var a, Var b) {
  check(a);
  check(b);
  Matrix out = edgecal::matmul(nodes_[a.id].value, nodes_[b.id].value);
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib](Tape& t, int self) {
        t.nodes_[self].value = edgecal::matmul(t.nodes_[ia].value, t.nodes_[ib].value);
      },
      [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& av = t.nodes_[ia].value;
        const Matrix& bv = t.nodes_[ib].value;
        // dA += g * B^T
        Matrix& ga = t.grad_of(ia);
        for (int i = 0; i < av.rows; ++i)
          for (int k = 0; k < av.cols; ++k) {
            double acc = 0.0;
            for (int j = 0; j < bv.cols; ++j) acc += g.at(i, j) * bv.at(k, j);
            ga.at(i, k) += acc;
          }
        // dB += A^T * g
        Matrix& gb = t.grad_of(ib);
        for (int k = 0; k < av.cols; ++k)
          for (int i = 0; i < av.rows; ++i) {
            double aik = av.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < bv.cols; ++j) gb.at(k, j) += aik * g.at(i, j);
          }
      })};
}

Var Tape::spmm(const SparseMatrix& s, Var x) {
  check(x);
  Matrix out = s.multiply(nodes_[x.id].value);
  int ix = x.id;
  // The sparse operator outlives the tape in every call site (graph-owned);
  // captured by value to keep the tape self-contained.
  SparseMatrix sc = s;
  return {push(
      std::move(out), false,
      [sc, ix](Tape& t, int self) {
        t.nodes_[self].value = sc.multiply(t.nodes_[ix].value);
      },
      [sc, ix](Tape& t, int self) {
        Matrix gx = sc.multiply_transposed(t.nodes_[self].grad);
        Matrix& g = t.grad_of(ix);
        for (size_t i = 0; i < gx.size(); ++i) g.data[i] += gx.data[i];
      })};
}

Var Tape::add(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(a, b, "add");
  const Matrix& av = nodes_[a.id].value;
  const Matrix& bv = nodes_[b.id].value;
  Matrix out = av;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (size_t i = 0; i < v.size(); ++i) v.data[i] += t.nodes_[ib].value.data[i];
      },
      [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& ga = t.grad_of(ia);
        Matrix& gb = t.grad_of(ib);
        for (size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
      })};
}

Var Tape::sub(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(a, b, "sub");
  Matrix out = nodes_[a.id].value;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] -= nodes_[b.id].value.data[i];
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (size_t i = 0; i < v.size(); ++i) v.data[i] -= t.nodes_[ib].value.data[i];
      },
      [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& ga = t.grad_of(ia);
        Matrix& gb = t.grad_of(ib);
        for (size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] -= g.data[i];
        }
      })};
}

Var Tape::mul(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(a, b, "mul");
  Matrix out = nodes_[a.id].value;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] *= nodes_[b.id].value.data[i];
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (size_t i = 0; i < v.size(); ++i) v.data[i] *= t.nodes_[ib].value.data[i];
      },
      [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& av = t.nodes_[ia].value;
        const Matrix& bv = t.nodes_[ib].value;
        Matrix& ga = t.grad_of(ia);
        Matrix& gb = t.grad_of(ib);
        for (size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i] * bv.data[i];
          gb.data[i] += g.data[i] * av.data[i];
        }
      })};
}

Var Tape::scale(Var a, double c) {
  check(a);
  Matrix out = nodes_[a.id].value;
  for (double& v : out.data) v *= c;
  int ia = a.id;
  return {push(
      std::move(out), false,
      [ia, c](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (double& x : v.data) x *= c;
      },
      [ia, c](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i) ga.data[i] += c * g.data[i];
      })};
}

Var Tape::add_row_bias(Var x, Var bias) {
  check(x);
  check(bias);
  const Matrix& xv = nodes_[x.id].value;
  const Matrix& bv = nodes_[bias.id].value;
  if (bv.rows != 1 || bv.cols != xv.cols)
    throw DimensionError("add_row_bias: bias " + bv.shape_str() +
                         " incompatible with " + xv.shape_str());
  Matrix out = xv;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) += bv.at(0, j);
  int ix = x.id, ib = bias.id;
  return {push(
      std::move(out), false,
      [ix, ib](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ix].value;
        const Matrix& b = t.nodes_[ib].value;
        for (int i = 0; i < v.rows; ++i)
          for (int j = 0; j < v.cols; ++j) v.at(i, j) += b.at(0, j);
      },
      [ix, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& gx = t.grad_of(ix);
        Matrix& gb = t.grad_of(ib);
        for (size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i];
        for (int i = 0; i < g.rows; ++i)
          for (int j = 0; j < g.cols; ++j) gb.at(0, j) += g.at(i, j);
      })};
}

Var Tape::relu(Var a) {
  check(a);
  Matrix out = nodes_[a.id].value;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  int ia = a.id;
  return {push(
      std::move(out), false,
      [ia](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (double& x : v.data) x = x > 0.0 ? x : 0.0;
      },
      [ia](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& av = t.nodes_[ia].value;
        Matrix& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i)
          if (av.data[i] > 0.0) ga.data[i] += g.data[i];
      })};
}

Var Tape::sigmoid(Var a) {
  check(a);
  Matrix out = nodes_[a.id].value;
  for (double& v : out.data) v = stable_sigmoid(v);
  int ia = a.id;
  return {push(
      std::move(out), false,
      [ia](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (double& x : v.data) x = stable_sigmoid(x);
      },
      [ia](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& ov = t.nodes_[self].value;
        Matrix& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i) {
          double s = ov.data[i];
          ga.data[i] += g.data[i] * s * (1.0 - s);
        }
      })};
}

Var Tape::softplus(Var a) {
  check(a);
  Matrix out = nodes_[a.id].value;
  for (double& v : out.data) v = stable_softplus(v);
  int ia = a.id;
  return {push(
      std::move(out), false,
      [ia](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (double& x : v.data) x = stable_softplus(x);
      },
      [ia](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& av = t.nodes_[ia].value;
        Matrix& ga = t.grad_of(ia);
        for (size_t i = 0; i < g.size(); ++i)
          ga.data[i] += g.data[i] * stable_sigmoid(av.data[i]);
      })};
}

Var Tape::emin(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(a, b, "emin");
  Matrix out = nodes_[a.id].value;
  const Matrix& bv = nodes_[b.id].value;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::min(out.data[i], bv.data[i]);
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (size_t i = 0; i < v.size(); ++i)
          v.data[i] = std::min(v.data[i], t.nodes_[ib].value.data[i]);
      },
      [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& av = t.nodes_[ia].value;
        const Matrix& bv2 = t.nodes_[ib].value;
        Matrix& ga = t.grad_of(ia);
        Matrix& gb = t.grad_of(ib);
        for (size_t i = 0; i < g.size(); ++i) {
          if (av.data[i] <= bv2.data[i])
            ga.data[i] += g.data[i];
          else
            gb.data[i] += g.data[i];
        }
      })};
}

Var Tape::emax(Var a, Var b) {
  check(a);
  check(b);
  check_same_shape(a, b, "emax");
  Matrix out = nodes_[a.id].value;
  const Matrix& bv = nodes_[b.id].value;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] = std::max(out.data[i], bv.data[i]);
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        for (size_t i = 0; i < v.size(); ++i)
          v.data[i] = std::max(v.data[i], t.nodes_[ib].value.data[i]);
      },
      [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& av = t.nodes_[ia].value;
        const Matrix& bv2 = t.nodes_[ib].value;
        Matrix& ga = t.grad_of(ia);
        Matrix& gb = t.grad_of(ib);
        for (size_t i = 0; i < g.size(); ++i) {
          if (av.data[i] >= bv2.data[i])
            ga.data[i] += g.data[i];
          else
            gb.data[i] += g.data[i];
        }
      })};
}

Var Tape::hconcat(Var a, Var b) {
  check(a);
  check(b);
  const Matrix& av = nodes_[a.id].value;
  const Matrix& bv = nodes_[b.id].value;
  if (av.rows != bv.rows)
    throw DimensionError("hconcat row mismatch: " + av.shape_str() + " vs " +
                         bv.shape_str());
  auto build = [](const Matrix& x, const Matrix& y) {
    Matrix out(x.rows, x.cols + y.cols);
    for (int i = 0; i < x.rows; ++i) {
      for (int j = 0; j < x.cols; ++j) out.at(i, j) = x.at(i, j);
      for (int j = 0; j < y.cols; ++j) out.at(i, x.cols + j) = y.at(i, j);
    }
    return out;
  };
  Matrix out = build(av, bv);
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib, build](Tape& t, int self) {
        t.nodes_[self].value = build(t.nodes_[ia].value, t.nodes_[ib].value);
      },
      [ia, ib](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& ga = t.grad_of(ia);
        Matrix& gb = t.grad_of(ib);
        for (int i = 0; i < ga.rows; ++i) {
          for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += g.at(i, j);
          for (int j = 0; j < gb.cols; ++j) gb.at(i, j) += g.at(i, ga.cols + j);
        }
      })};
}

Var Tape::gather_rows(Var x, std::vector<int> idx) {
  check(x);
  const Matrix& xv = nodes_[x.id].value;
  for (int i : idx)
    if (i < 0 || i >= xv.rows) throw ContractError("gather_rows index out of range");
  auto build = [idx](const Matrix& m) {
    Matrix out(static_cast<int>(idx.size()), m.cols);
    for (size_t r = 0; r < idx.size(); ++r)
      for (int j = 0; j < m.cols; ++j)
        out.at(static_cast<int>(r), j) = m.at(idx[r], j);
    return out;
  };
  Matrix out = build(xv);
  int ix = x.id;
  return {push(
      std::move(out), false,
      [ix, build](Tape& t, int self) {
        t.nodes_[self].value = build(t.nodes_[ix].value);
      },
      [ix, idx](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& gx = t.grad_of(ix);
        for (size_t r = 0; r < idx.size(); ++r)
          for (int j = 0; j < g.cols; ++j)
            gx.at(idx[r], j) += g.at(static_cast<int>(r), j);
      })};
}

Var Tape::merge_rows(Var a, Var b, std::vector<int> idx_a,
                     std::vector<int> idx_b, int total_rows) {
  check(a);
  check(b);
  const Matrix& av = nodes_[a.id].value;
  const Matrix& bv = nodes_[b.id].value;
  if (av.cols != bv.cols) throw DimensionError("merge_rows column mismatch");
  if (static_cast<int>(idx_a.size()) != av.rows ||
      static_cast<int>(idx_b.size()) != bv.rows ||
      av.rows + bv.rows != total_rows)
    throw ContractError("merge_rows: index lists must partition the output rows");
  std::vector<char> seen(total_rows, 0);
  for (int i : idx_a) {
    if (i < 0 || i >= total_rows || seen[i]) throw ContractError("merge_rows: bad index");
    seen[i] = 1;
  }
  for (int i : idx_b) {
    if (i < 0 || i >= total_rows || seen[i]) throw ContractError("merge_rows: bad index");
    seen[i] = 1;
  }
  auto build = [idx_a, idx_b, total_rows](const Matrix& x, const Matrix& y) {
    Matrix out(total_rows, x.cols);
    for (size_t r = 0; r < idx_a.size(); ++r)
      for (int j = 0; j < x.cols; ++j)
        out.at(idx_a[r], j) = x.at(static_cast<int>(r), j);
    for (size_t r = 0; r < idx_b.size(); ++r)
      for (int j = 0; j < y.cols; ++j)
        out.at(idx_b[r], j) = y.at(static_cast<int>(r), j);
    return out;
  };
  Matrix out = build(av, bv);
  int ia = a.id, ib = b.id;
  return {push(
      std::move(out), false,
      [ia, ib, build](Tape& t, int self) {
        t.nodes_[self].value = build(t.nodes_[ia].value, t.nodes_[ib].value);
      },
      [ia, ib, idx_a, idx_b](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& ga = t.grad_of(ia);
        Matrix& gb = t.grad_of(ib);
        for (size_t r = 0; r < idx_a.size(); ++r)
          for (int j = 0; j < g.cols; ++j)
            ga.at(static_cast<int>(r), j) += g.at(idx_a[r], j);
        for (size_t r = 0; r < idx_b.size(); ++r)
          for (int j = 0; j < g.cols; ++j)
            gb.at(static_cast<int>(r), j) += g.at(idx_b[r], j);
      })};
}

Var Tape::div_const_by(Matrix numer, Var x) {
  check(x);
  const Matrix& xv = nodes_[x.id].value;
  if (!numer.same_shape(xv))
    throw DimensionError("div_const_by shape mismatch: " + numer.shape_str() +
                         " vs " + xv.shape_str());
  Matrix out = numer;
  for (size_t i = 0; i < out.size(); ++i) out.data[i] /= xv.data[i];
  int ix = x.id;
  return {push(
      std::move(out), false,
      [ix, numer](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = numer;
        for (size_t i = 0; i < v.size(); ++i) v.data[i] /= t.nodes_[ix].value.data[i];
      },
      [ix, numer](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& xv2 = t.nodes_[ix].value;
        Matrix& gx = t.grad_of(ix);
        for (size_t i = 0; i < g.size(); ++i)
          gx.data[i] -= g.data[i] * numer.data[i] / (xv2.data[i] * xv2.data[i]);
      })};
}

Var Tape::sum(Var a) {
  check(a);
  double s = 0.0;
  for (double v : nodes_[a.id].value.data) s += v;
  Matrix out(1, 1, s);
  int ia = a.id;
  return {push(
      std::move(out), false,
      [ia](Tape& t, int self) {
        double acc = 0.0;
        for (double v : t.nodes_[ia].value.data) acc += v;
        t.nodes_[self].value = Matrix(1, 1, acc);
      },
      [ia](Tape& t, int self) {
        double g = t.nodes_[self].grad.scalar();
        Matrix& ga = t.grad_of(ia);
        for (double& v : ga.data) v += g;
      })};
}

Var Tape::mean(Var a) {
  check(a);
  size_t n = nodes_[a.id].value.size();
  if (n == 0) throw ContractError("mean of empty matrix");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var Tape::row_sum(Var a) {
  check(a);
  const Matrix& av = nodes_[a.id].value;
  auto build = [](const Matrix& m) {
    Matrix out(m.rows, 1, 0.0);
    for (int i = 0; i < m.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < m.cols; ++j) acc += m.at(i, j);
      out.at(i, 0) = acc;
    }
    return out;
  };
  Matrix out = build(av);
  int ia = a.id;
  return {push(
      std::move(out), false,
      [ia, build](Tape& t, int self) {
        t.nodes_[self].value = build(t.nodes_[ia].value);
      },
      [ia](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        Matrix& ga = t.grad_of(ia);
        for (int i = 0; i < ga.rows; ++i)
          for (int j = 0; j < ga.cols; ++j) ga.at(i, j) += g.at(i, 0);
      })};
}

Var Tape::scale_var(Var a, Var s) {
  check(a);
  check(s);
  if (!nodes_[s.id].value.is_scalar())
    throw DimensionError("scale_var: scale must be 1x1");
  double sv = nodes_[s.id].value.scalar();
  Matrix out = nodes_[a.id].value;
  for (double& v : out.data) v *= sv;
  int ia = a.id, is = s.id;
  return {push(
      std::move(out), false,
      [ia, is](Tape& t, int self) {
        Matrix& v = t.nodes_[self].value;
        v = t.nodes_[ia].value;
        double c = t.nodes_[is].value.scalar();
        for (double& x : v.data) x *= c;
      },
      [ia, is](Tape& t, int self) {
        const Matrix& g = t.nodes_[self].grad;
        const Matrix& av = t.nodes_[ia].value;
        double c = t.nodes_[is].value.scalar();
        Matrix& ga = t.grad_of(ia);
        Matrix& gs = t.grad_of(is);
        double acc = 0.0;
        for (size_t i = 0; i < g.size(); ++i) {
          ga.data[i] += c * g.data[i];
          acc += g.data[i] * av.data[i];
        }
        gs.data[0] += acc;
      })};
}

Var Tape::bce_with_logits(Var logits, Matrix labels, bool mean_reduction) {
  check(logits);
  const Matrix& z = nodes_[logits.id].value;
  if (!labels.same_shape(z))
    throw DimensionError("bce_with_logits: labels " + labels.shape_str() +
                         " vs logits " + z.shape_str());
  auto eval = [labels, mean_reduction](const Matrix& zz) {
    double acc = 0.0;
    for (size_t i = 0; i < zz.size(); ++i) {
      double zi = zz.data[i], yi = labels.data[i];
      acc += std::max(zi, 0.0) - zi * yi + std::log1p(std::exp(-std::fabs(zi)));
    }
    if (mean_reduction) acc /= static_cast<double>(zz.size());
    return acc;
  };
  Matrix out(1, 1, eval(z));
  int iz = logits.id;
  return {push(
      std::move(out), false,
      [iz, eval](Tape& t, int self) {
        t.nodes_[self].value = Matrix(1, 1, eval(t.nodes_[iz].value));
      },
      [iz, labels, mean_reduction](Tape& t, int self) {
        double g = t.nodes_[self].grad.scalar();
        const Matrix& zz = t.nodes_[iz].value;
        double w = mean_reduction ? 1.0 / static_cast<double>(zz.size()) : 1.0;
        Matrix& gz = t.grad_of(iz);
        for (size_t i = 0; i < zz.size(); ++i)
          gz.data[i] += g * w * (stable_sigmoid(zz.data[i]) - labels.data[i]);
      })};
}

Var Tape::confidence_penalty(Var probs, Matrix labels) {
  check(probs);
  const Matrix& p = nodes_[probs.id].value;
  if (!labels.same_shape(p))
    throw DimensionError("confidence_penalty: labels " + labels.shape_str() +
                         " vs probs " + p.shape_str());
  if (p.size() == 0) throw ContractError("confidence_penalty of empty set");
  auto eval = [labels](const Matrix& pp) {
    double acc = 0.0;
    for (size_t i = 0; i < pp.size(); ++i)
      acc += -(2.0 * labels.data[i] - 1.0) * pp.data[i];
    return acc / static_cast<double>(pp.size());
  };
  Matrix out(1, 1, eval(p));
  int ip = probs.id;
  return {push(
      std::move(out), false,
      [ip, eval](Tape& t, int self) {
        t.nodes_[self].value = Matrix(1, 1, eval(t.nodes_[ip].value));
      },
      [ip, labels](Tape& t, int self) {
        double g = t.nodes_[self].grad.scalar();
        const Matrix& pp = t.nodes_[ip].value;
        double inv = 1.0 / static_cast<double>(pp.size());
        Matrix& gp = t.grad_of(ip);
        for (size_t i = 0; i < pp.size(); ++i)
          gp.data[i] += -g * inv * (2.0 * labels.data[i] - 1.0);
      })};
}

namespace {

int equal_width_bin(double c, int n_bins) {
  int b = static_cast<int>(c * n_bins);
  if (b >= n_bins) b = n_bins - 1;  // last bin closed at 1
  if (b < 0) b = 0;
  return b;
}

}  // namespace

Var Tape::ece_loss(Var probs, Matrix labels, int n_bins,
                   std::optional<std::vector<int>> fixed_bins) {
  check(probs);
  const Matrix& p = nodes_[probs.id].value;
  if (!labels.same_shape(p))
    throw DimensionError("ece_loss: labels " + labels.shape_str() + " vs probs " +
                         p.shape_str());
  if (p.size() == 0) throw ContractError("ece_loss of empty set");
  if (n_bins < 1) throw ContractError("ece_loss: need at least one bin");
  if (fixed_bins && fixed_bins->size() != p.size())
    throw ContractError("ece_loss: fixed bin assignment size mismatch");

  auto assign = [n_bins, fixed_bins](const Matrix& pp) {
    if (fixed_bins) return *fixed_bins;
    std::vector<int> bins(pp.size());
    for (size_t i = 0; i < pp.size(); ++i)
      bins[i] = equal_width_bin(pp.data[i], n_bins);
    return bins;
  };
  auto eval = [labels, n_bins, assign](const Matrix& pp) {
    std::vector<int> bins = assign(pp);
    std::vector<double> resid(n_bins, 0.0);
    for (size_t i = 0; i < pp.size(); ++i)
      resid[bins[i]] += labels.data[i] - pp.data[i];
    double acc = 0.0;
    for (double r : resid) acc += std::fabs(r);
    return acc / static_cast<double>(pp.size());
  };
  Matrix out(1, 1, eval(p));
  int ip = probs.id;
  return {push(
      std::move(out), false,
      [ip, eval](Tape& t, int self) {
        t.nodes_[self].value = Matrix(1, 1, eval(t.nodes_[ip].value));
      },
      [ip, labels, n_bins, assign](Tape& t, int self) {
        double g = t.nodes_[self].grad.scalar();
        const Matrix& pp = t.nodes_[ip].value;
        std::vector<int> bins = assign(pp);
        std::vector<double> resid(n_bins, 0.0);
        for (size_t i = 0; i < pp.size(); ++i)
          resid[bins[i]] += labels.data[i] - pp.data[i];
        double inv = 1.0 / static_cast<double>(pp.size());
        Matrix& gp = t.grad_of(ip);
        for (size_t i = 0; i < pp.size(); ++i) {
          double r = resid[bins[i]];
          double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
          // d|r|/dp_i = -sign(r), membership held constant
          gp.data[i] += -g * inv * s;
        }
      })};
}

GradientStore Tape::backward(Var root) {
  check(root);
  if (!nodes_[root.id].value.is_scalar())
    throw ContractError("backward root must be a scalar, got " +
                        nodes_[root.id].value.shape_str());
  for (Node& n : nodes_) n.grad = Matrix();
  grad_of(root.id).data[0] = 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, i);
  }
  GradientStore store;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf) {
      if (nodes_[i].grad.size() == 0)
        store.grads.emplace(static_cast<int>(i),
                            Matrix(nodes_[i].value.rows, nodes_[i].value.cols, 0.0));
      else
        store.grads.emplace(static_cast<int>(i), nodes_[i].grad);
    }
  }
  return store;
}

bool Tape::replay_forward() {
  bool identical = true;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.forward) continue;
    Matrix before = n.value;
    n.forward(*this, static_cast<int>(i));
    if (before.data != n.value.data || !before.same_shape(n.value))
      identical = false;
  }
  return identical;
}

}  // namespace edgecal
