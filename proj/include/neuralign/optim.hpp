#pragma once

#include "neuralign/model.hpp"

namespace neuralign {

// One rate per parameter group: the transfer matrix (A, B), the mapper
// (W_diff, b_diff) and the embedder (W_f, b_f) are tuned independently.
struct LearningRates {
  double btm = 1e-5;
  double mapper = 1e-5;
  double embedder = 1e-5;

  bool operator==(const LearningRates&) const = default;
};

struct AdamState {
  Gradients m;  // first moments
  Gradients v;  // second moments
  long long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  LearningRates lr;

  static AdamState init(const Dims& dims, const LearningRates& lr);
};

// Standard bias-corrected Adam update applied in place. The frozen decoder
// block is untouched; t advances by exactly 1.
void adam_step(AlignmentModel& model, const Gradients& grads, AdamState& state);

}  // namespace neuralign
