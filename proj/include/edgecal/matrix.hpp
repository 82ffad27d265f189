#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace edgecal {

// Row-major dense matrix of doubles. Values with no tape attachment are
// immutable by convention and safe to share across threads.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0);

  double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

  size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool is_scalar() const { return rows == 1 && cols == 1; }
  double scalar() const { return data[0]; }
  bool all_finite() const;

  static Matrix identity(int n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);
  static Matrix column(const std::vector<double>& v);

  std::string shape_str() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);

// Compressed sparse row matrix with fixed structure; used for adjacency
// operators. Never recorded as a differentiable quantity.
struct SparseMatrix {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;   // size rows+1
  std::vector<int> col_idx;
  std::vector<double> vals;

  // y = S x
  Matrix multiply(const Matrix& x) const;
  // y = S^T x (scatter form)
  Matrix multiply_transposed(const Matrix& x) const;
};

}  // namespace edgecal
