#pragma once

#include <cstddef>
#include <vector>

#include "neuralign/rng.hpp"

namespace neuralign {

// Dense row-major matrix of 64-bit floats. Signals follow the row-vector
// convention throughout: a length-n signal is a 1xn matrix and maps through
// weights on the right.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> d);

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::vector<double> d);

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double* row(std::size_t i) { return data.data() + i * cols; }
  const double* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

// Bitwise equality (distinguishes -0.0 from 0.0, treats equal NaN bits as equal).
bool bits_equal(const Matrix& a, const Matrix& b);

// Throws NumericError if any entry is NaN or infinite.
void ensure_finite(const Matrix& m, const char* what);

// Dense product. Accumulation order over the inner dimension is fixed
// (k = 0,1,...) for every output element, independent of kernel backend.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// out = a + b, out = a - b, elementwise
Matrix madd(const Matrix& a, const Matrix& b);
Matrix msub(const Matrix& a, const Matrix& b);
Matrix mscale(const Matrix& a, double s);
Matrix hadamard(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);

// (g'g + lambda I)^-1 g' via Cholesky of the normal equations.
// lambda == 0 additionally requires cond(g'g) < 1e12 (power-iteration
// estimate); otherwise a NumericError is raised. Non-SPD factorization
// failures are also reported, never silent.
Matrix ridge_pinv(const Matrix& g, double lambda);

// i.i.d. N(mean, std^2) entries, filled row-major in draw order.
Matrix gaussian(RngState& rng, std::size_t rows, std::size_t cols, double mean,
                double stddev);

}  // namespace neuralign
