#include "causalmask/dense.hpp"

#include <cmath>
#include <string>

#include "causalmask/errors.hpp"

namespace causalmask {

namespace {

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes (" + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + ") and (" + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols) + ") differ");
  }
}

}  // namespace

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows_in) {
  DenseMatrix m;
  m.rows = rows_in.size();
  m.cols = rows_in.size() == 0 ? 0 : rows_in.begin()->size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& r : rows_in) {
    if (r.size() != m.cols) {
      throw DimensionError("from_rows: ragged row lengths");
    }
    m.data.insert(m.data.end(), r.begin(), r.end());
  }
  return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) {
    throw DimensionError("matmul: inner dims " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows));
  }
  DenseMatrix out(a.rows, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* out_row = out.data.data() + i * n;
    const double* a_row = a.data.data() + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a_row[k];
      const double* b_row = b.data.data() + k * n;
      for (std::size_t j = 0; j < n; ++j) {
        out_row[j] += aik * b_row[j];
      }
    }
  }
  return out;
}

DenseMatrix matmul_transpose_a(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows != b.rows) {
    throw DimensionError("matmul_transpose_a: inner dims " + std::to_string(a.rows) + " vs " +
                         std::to_string(b.rows));
  }
  DenseMatrix out(a.cols, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* a_row = a.data.data() + k * a.cols;
    const double* b_row = b.data.data() + k * n;
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = a_row[i];
      double* out_row = out.data.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        out_row[j] += aki * b_row[j];
      }
    }
  }
  return out;
}

DenseMatrix matmul_transpose_b(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.cols) {
    throw DimensionError("matmul_transpose_b: inner dims " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.cols));
  }
  DenseMatrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* a_row = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* b_row = b.data.data() + j * b.cols;
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) {
        acc += a_row[k] * b_row[k];
      }
      out.data[i * b.rows + j] = acc;
    }
  }
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      out.data[j * a.rows + i] = a.data[i * a.cols + j];
    }
  }
  return out;
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "hadamard");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = a.data[i] * b.data[i];
  }
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "add");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = a.data[i] + b.data[i];
  }
  return out;
}

DenseMatrix subtract(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "subtract");
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = a.data[i] - b.data[i];
  }
  return out;
}

DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    out.data[i] = a.data[i] * s;
  }
  return out;
}

void add_inplace(DenseMatrix& dst, const DenseMatrix& src) {
  require_same_shape(dst, src, "add_inplace");
  for (std::size_t i = 0; i < dst.data.size(); ++i) {
    dst.data[i] += src.data[i];
  }
}

void add_row_inplace(DenseMatrix& m, std::span<const double> v) {
  if (v.size() != m.cols) {
    throw DimensionError("add_row_inplace: vector length " + std::to_string(v.size()) +
                         " vs cols " + std::to_string(m.cols));
  }
  for (std::size_t i = 0; i < m.rows; ++i) {
    double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) {
      row[j] += v[j];
    }
  }
}

std::vector<double> column_sums(const DenseMatrix& m) {
  std::vector<double> out(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.data.data() + i * m.cols;
    for (std::size_t j = 0; j < m.cols; ++j) {
      out[j] += row[j];
    }
  }
  return out;
}

double sum(const DenseMatrix& m) {
  double acc = 0.0;
  for (double v : m.data) {
    acc += v;
  }
  return acc;
}

DenseMatrix gather_rows(const DenseMatrix& m, std::span<const std::size_t> indices) {
  DenseMatrix out(indices.size(), m.cols);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows) {
      throw DimensionError("gather_rows: index " + std::to_string(indices[i]) + " out of " +
                           std::to_string(m.rows));
    }
    const double* src = m.data.data() + indices[i] * m.cols;
    std::copy(src, src + m.cols, out.data.data() + i * m.cols);
  }
  return out;
}

bool all_finite(const DenseMatrix& m) {
  for (double v : m.data) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

void require_finite(const DenseMatrix& m, const char* label) {
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i])) {
      throw PoisonedError(std::string(label) + ": non-finite entry at (" +
                          std::to_string(i / m.cols) + "," + std::to_string(i % m.cols) + ")");
    }
  }
}

}  // namespace causalmask
