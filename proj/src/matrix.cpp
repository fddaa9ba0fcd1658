#include "neuralign/matrix.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

#include "neuralign/errors.hpp"
#include "neuralign/kernels.hpp"

namespace neuralign {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d)
    : rows(r), cols(c), data(std::move(d)) {
  if (data.size() != rows * cols)
    throw std::invalid_argument("Matrix: data length does not match rows*cols");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
  return m;
}

Matrix Matrix::row_vector(std::vector<double> d) {
  const std::size_t n = d.size();
  return Matrix(1, n, std::move(d));
}

bool bits_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  return std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(double)) == 0;
}

void ensure_finite(const Matrix& m, const char* what) {
  for (double v : m.data)
    if (!std::isfinite(v))
      throw NumericError(std::string(what) + ": non-finite entry");
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: dimension mismatch");
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k)
      kern::axpy(ci, ai[k], b.row(k), b.cols);
  }
  ensure_finite(c, "matmul");
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Matrix madd(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("madd: shape mismatch");
  Matrix out(a.rows, a.cols);
  kern::add(out.data.data(), a.data.data(), b.data.data(), a.size());
  ensure_finite(out, "madd");
  return out;
}

Matrix msub(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("msub: shape mismatch");
  Matrix out(a.rows, a.cols);
  kern::sub(out.data.data(), a.data.data(), b.data.data(), a.size());
  ensure_finite(out, "msub");
  return out;
}

Matrix mscale(const Matrix& a, double s) {
  Matrix out = a;
  kern::scale(out.data.data(), s, out.size());
  ensure_finite(out, "mscale");
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("hadamard: shape mismatch");
  Matrix out(a.rows, a.cols);
  kern::mul(out.data.data(), a.data.data(), b.data.data(), a.size());
  ensure_finite(out, "hadamard");
  return out;
}

double frobenius_norm(const Matrix& a) {
  return std::sqrt(kern::sumsq(a.data.data(), a.size()));
}

namespace {

// Lower Cholesky factor of an SPD matrix; throws NumericError on a
// non-positive pivot.
Matrix cholesky(const Matrix& s) {
  const std::size_t n = s.rows;
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = s.at(i, j) - kern::dot(l.row(i), l.row(j), j);
      if (i == j) {
        if (acc <= 0.0 || !std::isfinite(acc))
          throw NumericError("ridge_pinv: factorization failed (matrix not SPD)");
        l.at(i, i) = std::sqrt(acc);
      } else {
        l.at(i, j) = acc / l.at(j, j);
      }
    }
  }
  return l;
}

// Solves (L L') X = B column by column.
Matrix cholesky_solve(const Matrix& l, const Matrix& b) {
  const std::size_t n = l.rows;
  Matrix x(n, b.cols);
  std::vector<double> col(n);
  for (std::size_t c = 0; c < b.cols; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = b.at(i, c);
      for (std::size_t j = 0; j < i; ++j) acc -= l.at(i, j) * col[j];
      col[i] = acc / l.at(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double acc = col[i];
      for (std::size_t j = i + 1; j < n; ++j) acc -= l.at(j, i) * col[j];
      col[i] = acc / l.at(i, i);
    }
    for (std::size_t i = 0; i < n; ++i) x.at(i, c) = col[i];
  }
  return x;
}

// 2-norm condition estimate of an SPD matrix: power iteration for the top
// eigenvalue, inverse iteration through the Cholesky factor for the bottom.
double spd_condition_estimate(const Matrix& s, const Matrix& l) {
  const std::size_t n = s.rows;
  Matrix v(n, 1);
  for (std::size_t i = 0; i < n; ++i) v.at(i, 0) = 1.0 / std::sqrt(double(n));

  double lo = 0.0, hi = 0.0;
  Matrix w = v;
  for (int it = 0; it < 40; ++it) {
    w = matmul(s, w);
    hi = frobenius_norm(w);
    if (hi == 0.0) return std::numeric_limits<double>::infinity();
    w = mscale(w, 1.0 / hi);
  }
  w = v;
  for (int it = 0; it < 40; ++it) {
    w = cholesky_solve(l, w);
    const double inv_norm = frobenius_norm(w);
    if (inv_norm == 0.0) return std::numeric_limits<double>::infinity();
    lo = 1.0 / inv_norm;
    w = mscale(w, 1.0 / inv_norm);
  }
  return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

}  // namespace

Matrix ridge_pinv(const Matrix& g, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("ridge_pinv: lambda must be >= 0");
  const Matrix gt = transpose(g);
  Matrix s = matmul(gt, g);
  for (std::size_t i = 0; i < s.rows; ++i) s.at(i, i) += lambda;
  const Matrix l = cholesky(s);
  if (lambda == 0.0) {
    const double cond = spd_condition_estimate(s, l);
    if (!(cond < 1e12))
      throw NumericError("ridge_pinv: ill-conditioned normal equations at lambda=0");
  }
  Matrix out = cholesky_solve(l, gt);
  ensure_finite(out, "ridge_pinv");
  return out;
}

Matrix gaussian(RngState& rng, std::size_t rows, std::size_t cols, double mean,
                double stddev) {
  if (stddev < 0.0) throw std::invalid_argument("gaussian: stddev must be >= 0");
  Matrix m(rows, cols);
  for (double& v : m.data) v = mean + stddev * rng.next_gaussian();
  ensure_finite(m, "gaussian");
  return m;
}

}  // namespace neuralign
