#include "neuralign/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "neuralign/errors.hpp"
#include "neuralign/kernels.hpp"

namespace neuralign {

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw std::invalid_argument("pearson: need at least 2 samples");

  const double mx = kern::sum(x.data(), n) / double(n);
  const double my = kern::sum(y.data(), n) / double(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

void softmax_inplace(double* x, std::size_t n) {
  const double m = *std::max_element(x, x + n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - m);
    total += x[i];
  }
  for (std::size_t i = 0; i < n; ++i) x[i] /= total;
}

void log_softmax_inplace(double* x, std::size_t n) {
  const double m = *std::max_element(x, x + n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(x[i] - m);
  const double lse = m + std::log(total);
  for (std::size_t i = 0; i < n; ++i) x[i] -= lse;
}

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("softmax: empty input");
  std::vector<double> out(x.begin(), x.end());
  softmax_inplace(out.data(), out.size());
  return out;
}

double cosine_dissimilarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw std::invalid_argument("cosine_dissimilarity: length mismatch");
  const double nu = std::sqrt(kern::sumsq(u.data(), u.size()));
  const double nv = std::sqrt(kern::sumsq(v.data(), v.size()));
  if (nu == 0.0 || nv == 0.0)
    throw NumericError("cosine_dissimilarity: zero-norm input");
  return 1.0 - kern::dot(u.data(), v.data(), u.size()) / (nu * nv);
}

}  // namespace neuralign
