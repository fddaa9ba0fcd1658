#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "neuralign/matrix.hpp"
#include "neuralign/rng.hpp"

extern std::string g_test_argv0;

namespace testutil {

using neuralign::Matrix;

// The CLI binary is built into the same output directory as the tests.
inline std::filesystem::path cli_path() {
  return std::filesystem::absolute(std::filesystem::path(g_test_argv0)).parent_path() /
         "neuralign";
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("neuralign_test_" + tag + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Matrix random_matrix(neuralign::RngState& rng, std::size_t r, std::size_t c,
                            double scale = 1.0) {
  return neuralign::gaussian(rng, r, c, 0.0, scale);
}

// Independent triple-loop product (ijk order, scalar accumulation); the
// reference the production matmul is checked against to 0 ulp.
inline Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
      c.at(i, j) = acc;
    }
  return c;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
// Test-only oracle for singular values (via M'M) and rank checks.
inline std::vector<double> symmetric_eigenvalues(Matrix s) {
  const std::size_t n = s.rows;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s.at(p, q) * s.at(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(s.at(p, q)) < 1e-300) continue;
        const double theta = (s.at(q, q) - s.at(p, p)) / (2.0 * s.at(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double sip = s.at(i, p), siq = s.at(i, q);
          s.at(i, p) = c * sip - sn * siq;
          s.at(i, q) = sn * sip + c * siq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double spi = s.at(p, i), sqi = s.at(q, i);
          s.at(p, i) = c * spi - sn * sqi;
          s.at(q, i) = sn * spi + c * sqi;
        }
      }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = s.at(i, i);
  std::sort(eig.rbegin(), eig.rend());
  return eig;
}

// Singular values of m, descending, via one-sided Jacobi (column rotations
// until all column pairs are orthogonal; the norms are the singular values).
// Unlike the m'm route this resolves near-zero singular values to rounding
// level, which the rank tests rely on.
inline std::vector<double> singular_values(Matrix m) {
  const std::size_t n = m.cols;
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m.rows; ++i) {
          app += m.at(i, p) * m.at(i, p);
          aqq += m.at(i, q) * m.at(i, q);
          apq += m.at(i, p) * m.at(i, q);
        }
        if (std::abs(apq) <= 1e-30 * std::sqrt(app * aqq) || apq == 0.0) continue;
        rotated = true;
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < m.rows; ++i) {
          const double mp = m.at(i, p), mq = m.at(i, q);
          m.at(i, p) = c * mp - s * mq;
          m.at(i, q) = s * mp + c * mq;
        }
      }
    if (!rotated) break;
  }
  std::vector<double> sv(n);
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) acc += m.at(i, j) * m.at(i, j);
    sv[j] = std::sqrt(acc);
  }
  std::sort(sv.rbegin(), sv.rend());
  return sv;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
  return worst;
}

inline double rel_frobenius_diff(const Matrix& a, const Matrix& b) {
  using neuralign::frobenius_norm;
  using neuralign::msub;
  return frobenius_norm(msub(a, b)) / std::max(1e-300, frobenius_norm(b));
}

}  // namespace testutil
