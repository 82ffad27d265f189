#include "edgecal/matrix.hpp"

#include <cmath>

#include "edgecal/error.hpp"

namespace edgecal {

Matrix::Matrix(int r, int c, double fill)
    : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
  if (r < 0 || c < 0) throw DimensionError("negative matrix dimension");
}

bool Matrix::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix Matrix::identity(int n) {
  Matrix m(n, n, 0.0);
  for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix();
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size())
      throw DimensionError("ragged row list");
    for (size_t c = 0; c < rows[r].size(); ++c)
      m.at(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
  }
  return m;
}

Matrix Matrix::column(const std::vector<double>& v) {
  Matrix m(static_cast<int>(v.size()), 1);
  m.data = v;
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul shape mismatch: " + a.shape_str() + " * " +
                         b.shape_str());
  Matrix out(a.rows, b.cols, 0.0);
  // i-k-j order: streams over b's rows.
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.data[static_cast<size_t>(i) * a.cols];
    double* orow = &out.data[static_cast<size_t>(i) * b.cols];
    for (int k = 0; k < a.cols; ++k) {
      double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix SparseMatrix::multiply(const Matrix& x) const {
  if (cols != x.rows)
    throw DimensionError("spmm shape mismatch: sparse " + std::to_string(rows) +
                         "x" + std::to_string(cols) + " * " + x.shape_str());
  Matrix out(rows, x.cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    double* orow = &out.data[static_cast<size_t>(i) * x.cols];
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      double w = vals[p];
      const double* xrow = &x.data[static_cast<size_t>(col_idx[p]) * x.cols];
      for (int j = 0; j < x.cols; ++j) orow[j] += w * xrow[j];
    }
  }
  return out;
}

Matrix SparseMatrix::multiply_transposed(const Matrix& x) const {
  if (rows != x.rows)
    throw DimensionError("spmm^T shape mismatch");
  Matrix out(cols, x.cols, 0.0);
  for (int i = 0; i < rows; ++i) {
    const double* xrow = &x.data[static_cast<size_t>(i) * x.cols];
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      double w = vals[p];
      double* orow = &out.data[static_cast<size_t>(col_idx[p]) * x.cols];
      for (int j = 0; j < x.cols; ++j) orow[j] += w * xrow[j];
    }
  }
  return out;
}

}  // namespace edgecal
