#pragma once

#include <string>
#include <utility>
#include <vector>

#include "neuralign/model.hpp"

namespace neuralign {

struct LossCoeffs {
  double alpha_rec = 1.0;
  double alpha_kl = 1e-3;
  double alpha_latent = 1e-3;

  bool operator==(const LossCoeffs&) const = default;
};

// The four components and their weighted total:
//   l_total = l_dec_proxy + alpha_rec*l_rec + alpha_kl*l_kl + alpha_la*l_latent
struct LossBreakdown {
  double l_rec = 0.0;
  double l_kl = 0.0;
  double l_latent = 0.0;
  double l_dec_proxy = 0.0;
  double l_total = 0.0;
  LossCoeffs coeffs;
};

// Matched cross-subject samples. Rows are pairs: F_N[i] was recorded under a
// stimulus similar to the one behind F_K[i].
struct PairedBatch {
  Matrix F_N;  // B x n
  Matrix F_K;  // B x k
  Matrix E_N;  // B x a
  Matrix E_K;  // B x a
  std::vector<std::size_t> novel_index;  // rows of the source sessions
  std::vector<std::size_t> known_index;

  std::size_t size() const { return F_N.rows; }
  void validate(const Dims& dims) const;
};

// Mean over the batch of per-sample squared Euclidean distance.
double loss_rec(const Matrix& f_hat, const Matrix& f_k);

// Rows softmax-normalized, then batch mean of KL(softmax(f_hat) || softmax(f_k)).
double loss_kl(const Matrix& f_hat, const Matrix& f_k);

// Entry (i, j) = cosine_dissimilarity(U_i, V_j).
Matrix dissimilarity_matrix(const Matrix& u, const Matrix& v);

// || R(embed(z_N), embed(z_K)) - R(E_N, E_K) ||^2 / B^2.
double loss_latent(const AlignmentModel& m, const Matrix& z_n, const Matrix& z_k,
                   const Matrix& e_n, const Matrix& e_k);

// Per-element MSE between proxy_decode(f_hat) and the novel stimulus embeddings.
double loss_dec_proxy(const AlignmentModel& m, const Matrix& f_hat, const Matrix& e_n);

// Full pipeline: encode -> modulate -> decode -> all four components.
LossBreakdown forward_loss(const AlignmentModel& m, const PairedBatch& batch,
                           const LossCoeffs& coeffs);

// Analytic gradients of l_total for every trainable block. The frozen decoder
// receives none (identically zero, see Gradients).
std::pair<LossBreakdown, Gradients> backward(const AlignmentModel& m,
                                             const PairedBatch& batch,
                                             const LossCoeffs& coeffs);

// Central-difference verification of backward() on a random subsample of at
// least 200 coordinates per block (all of them for smaller blocks). Returns
// max over sampled coordinates of |analytic - numeric| /
// max(1e-12, |analytic| + |numeric|). eps must lie in [1e-7, 1e-3].
double finite_diff_check(const AlignmentModel& m, const PairedBatch& batch,
                         const LossCoeffs& coeffs, double eps);

// Same check, reported per block (block name -> worst relative error).
std::vector<std::pair<std::string, double>> finite_diff_check_per_block(
    const AlignmentModel& m, const PairedBatch& batch, const LossCoeffs& coeffs,
    double eps);

}  // namespace neuralign
