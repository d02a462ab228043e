#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace causalmask {

// Row-major dense matrix of 64-bit floats. The whole toolkit runs at desk
// scale (n <= 8192, d <= 1024), so there are no sparse or blocked paths.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows_in);

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool same_shape(const DenseMatrix& other) const {
    return rows == other.rows && cols == other.cols;
  }
  bool operator==(const DenseMatrix& other) const = default;
};

// a[m×k] · b[k×n]
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// aᵀ · b for a[k×m], b[k×n]
DenseMatrix matmul_transpose_a(const DenseMatrix& a, const DenseMatrix& b);
// a · bᵀ for a[m×k], b[n×k]
DenseMatrix matmul_transpose_b(const DenseMatrix& a, const DenseMatrix& b);

DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double s);
void add_inplace(DenseMatrix& dst, const DenseMatrix& src);
void add_row_inplace(DenseMatrix& m, std::span<const double> v);
std::vector<double> column_sums(const DenseMatrix& m);
double sum(const DenseMatrix& m);

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> indices);

bool all_finite(const DenseMatrix& m);
// Throws PoisonedError naming `label` and the first non-finite entry.
void require_finite(const DenseMatrix& m, const char* label);

}  // namespace causalmask
