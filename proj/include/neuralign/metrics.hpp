#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralign/matrix.hpp"
#include "neuralign/rng.hpp"

namespace neuralign {

// Per-voxel Pearson correlation between predicted and real target signals
// over shared-stimulus samples. Zero-variance voxels are excluded from the
// mean and counted.
struct FscResult {
  std::vector<double> per_voxel;  // NaN where undefined
  double mean = 0.0;
  std::size_t undefined_count = 0;
};

FscResult fsc(const Matrix& pred, const Matrix& target);

// TQ_i = sum_j |M_ij|: the L1 mass each source voxel sends into the target
// brain (row sums under the row-vector convention).
std::vector<double> tq(const Matrix& m);

// Top-1 retrieval rate: per trial, the true match plus (candidates-1)
// sampled distractors; success iff the true match has strictly the highest
// cosine similarity with the query. Averaged over queries x repeats.
double retrieval_top1(const Matrix& queries, const Matrix& gallery,
                      std::size_t candidates_per_trial, std::size_t repeats,
                      RngState rng);

struct TransferError {
  double model_error = 0.0;   // ||F_N M - F_K||_F / ||F_K||_F
  double oracle_error = 0.0;  // same with M*, NaN when no oracle is available
};

TransferError transfer_error(const Matrix& m, const Matrix* m_star,
                             const Matrix& eval_f_n, const Matrix& eval_f_k);

// Everything evaluate() reports; serializes to JSON and reloads equal.
struct MetricsReport {
  double fsc_mean = 0.0;
  std::vector<double> fsc_per_voxel;
  std::size_t fsc_undefined_count = 0;

  std::vector<double> tq_values;
  // conserved/variable block summaries; block sizes of 0 mean "no block info"
  std::size_t conserved_novel = 0;
  std::size_t conserved_known = 0;
  double tq_conserved_mean_dev = 0.0;  // mean |TQ_i - median TQ| over the block
  double tq_variable_mean_dev = 0.0;
  double fsc_conserved_mean = 0.0;
  double fsc_variable_mean = 0.0;

  double retrieval_top1_image = 0.0;
  double retrieval_top1_brain = 0.0;

  double transfer_relative_error = 0.0;
  double oracle_relative_error = 0.0;

  std::string history_ref;  // path of the loss-curve CSV, possibly empty

  void validate() const;
  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
  bool operator==(const MetricsReport&) const;
};

}  // namespace neuralign
