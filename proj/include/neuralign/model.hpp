#pragma once

#include <cstdint>

#include "neuralign/matrix.hpp"
#include "neuralign/rng.hpp"

namespace neuralign {

struct Dims {
  std::size_t n = 0;  // novel-subject voxel count
  std::size_t k = 0;  // known-subject voxel count
  std::size_t h = 0;  // hidden (low-rank) size
  std::size_t a = 0;  // stimulus-embedding size
  std::size_t d_latentworld = 0;  // simulator latent size, bookkeeping only

  void validate() const;
  bool operator==(const Dims&) const = default;
};

// All learnable blocks plus the frozen proxy decoder. The transfer path is
// bias-free by construction; the mapper and embedder carry biases.
struct AlignmentModel {
  Dims dims;
  Matrix A;       // n x h
  Matrix B;       // h x k
  Matrix W_diff;  // a x 2h   mapper: stimulus difference -> (gamma | beta)
  Matrix b_diff;  // 1 x 2h
  Matrix W_f;     // h x h    functional embedder
  Matrix b_f;     // 1 x h
  Matrix W_dec;   // k x a    frozen; never receives updates

  void validate_shapes() const;
};

// One matrix per trainable block, shape-matched to AlignmentModel. The frozen
// decoder has no block here: its gradient is identically zero by construction.
struct Gradients {
  Matrix A, B, W_diff, b_diff, W_f, b_f;

  static Gradients zeros(const Dims& d);
};

// Gaussian(0, 1/sqrt(fan_in)) weights, zero biases, frozen decoder drawn at
// Gaussian(0, 1/sqrt(k)). Same seed, same model, bit for bit.
AlignmentModel init_model(const Dims& dims, RngState rng);

// z = F_N * A. Accepts a batch (B x n) and returns B x h.
Matrix encode_latent(const AlignmentModel& m, const Matrix& f_n);

// z * B -> known-subject voxel space (B x k).
Matrix decode_latent(const AlignmentModel& m, const Matrix& z);

// Complete inference path: F_N * A * B. No mapper, no embedder.
Matrix btm_apply(const AlignmentModel& m, const Matrix& f_n);

// Materializes the n x k transfer matrix A*B.
Matrix compose_btm(const AlignmentModel& m);

// Elementwise difference of two stimulus-embedding batches.
Matrix stimulus_difference(const Matrix& e_n, const Matrix& e_k);

// FiLM conditioning: z_diff = E_diff*W_diff + b_diff splits into scale gamma
// and shift beta; returns (1 + gamma) .* z_N + beta. A zero condition with
// zero bias is an exact identity.
Matrix film_modulate(const AlignmentModel& m, const Matrix& z_n, const Matrix& e_diff);

// Affine embedder z*W_f + b_f used by the latent alignment loss.
Matrix functional_embed(const AlignmentModel& m, const Matrix& z);

// F * W_dec through the frozen proxy decoder (gradients pass through it
// upstream, never into it).
Matrix proxy_decode(const AlignmentModel& m, const Matrix& f);

struct ParamCount {
  long long btm = 0;
  long long mapper = 0;
  long long embedder = 0;
  long long trainable_total = 0;
  long long decoder_frozen = 0;  // excluded from trainable_total
};

ParamCount param_count(const Dims& dims);

}  // namespace neuralign
