#pragma once

#include <optional>
#include <span>
#include <vector>

namespace neuralign {

// Pearson correlation in [-1, 1]. Returns nullopt when either input has zero
// variance (undefined correlation; the caller decides how to treat it).
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

// Max-subtracted softmax; output is positive and sums to 1 within 1e-12.
std::vector<double> softmax(std::span<const double> x);

// In-place row variants used by the loss pipeline.
void softmax_inplace(double* x, std::size_t n);
void log_softmax_inplace(double* x, std::size_t n);

// 1 - cos(u, v), in [0, 2]. Throws on zero-norm input.
double cosine_dissimilarity(std::span<const double> u, std::span<const double> v);

}  // namespace neuralign
