#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "neuralign/losses.hpp"
#include "neuralign/metrics.hpp"
#include "neuralign/model.hpp"
#include "neuralign/optim.hpp"
#include "neuralign/simdata.hpp"

namespace neuralign {

struct TrainConfig {
  std::size_t hidden_size = 32;
  std::optional<std::size_t> embedding_dim;  // must match the dataset when set
  LossCoeffs coeffs;                         // alpha_rec=1, alpha_kl=alpha_la=1e-3
  LearningRates lr{3e-4, 3e-4, 3e-4};        // desk-scale defaults
  std::size_t batch_size = 16;
  long long epochs = 200;
  long long eval_interval = 5;
  long long patience = 20;  // evaluations without fsc improvement before stopping
  std::uint64_t seed_init = 1;
  std::uint64_t seed_data = 2;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig&) const = default;
};

struct HistoryRow {
  long long epoch = 0;
  LossBreakdown loss;
  std::optional<double> fsc_mean;        // filled on eval epochs
  std::optional<double> transfer_error;  // filled on eval epochs when an oracle exists
};

// Complete, resumable training state. `model` is the state after `epoch`
// epochs; `best_*` tracks the checkpoint with the highest eval fsc seen.
struct Checkpoint {
  int format_version = 1;
  TrainConfig config;
  std::string novel_id;  // subject pair this transfer was trained on
  std::string known_id;
  AlignmentModel model;
  AdamState adam;
  long long epoch = 0;
  std::vector<HistoryRow> history;

  AlignmentModel best_model;  // dims all zero until the first evaluation
  long long best_epoch = -1;
  double best_fsc = 0.0;
  long long stale_evals = 0;
  bool early_stopped = false;

  // Returns best_model when an evaluation has happened, otherwise model.
  const AlignmentModel& selected_model() const;
};

// Header JSON at `path` (dims, block table, hyperparameters, history,
// payload checksum) plus a single little-endian float64 payload at
// `path + ".bin"` with blocks concatenated in header order. Bit-exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Everything train/evaluate needs besides the config: matched train sessions
// and a shared-stimulus eval split, plus optional world ground truth.
struct TrainData {
  SubjectSession novel_train;
  SubjectSession known_train;
  SubjectSession novel_eval;
  SubjectSession known_eval;
  Matrix oracle;  // n x k ground-truth transfer; may be empty
  std::size_t conserved_novel = 0;
  std::size_t conserved_known = 0;
  std::size_t latent_dim = 0;  // world bookkeeping, lands in Dims

  static TrainData from_dataset(const Dataset& ds, const std::string& novel_id,
                                const std::string& known_id, double oracle_lambda = 1e-8);
  void validate() const;
};

struct EvalOptions {
  const Matrix* oracle = nullptr;
  std::size_t conserved_novel = 0;
  std::size_t conserved_known = 0;
  std::size_t retrieval_candidates = 300;  // clamped to the eval-set size
  std::size_t retrieval_repeats = 30;
  std::uint64_t retrieval_seed = 0;
  std::string history_ref;
};

// Inference is the transfer matrix alone; the mapper and embedder never run.
MetricsReport evaluate(const AlignmentModel& model, const SubjectSession& novel_eval,
                       const SubjectSession& known_eval, const EvalOptions& opts);

struct TrainResult {
  Checkpoint checkpoint;
  MetricsReport report;  // full evaluation of the selected model
  bool diverged = false;
};

// Pairs once up front, shuffles pair order per epoch, and records one history
// row per epoch. Evaluates the transfer at the eval interval, tracking the
// best fsc. A non-finite loss aborts with the last finite epoch state.
// `pause_after_epoch` stops early without marking the run stopped, producing
// a checkpoint that resume() continues bit-identically.
TrainResult train(const TrainConfig& config, const TrainData& data,
                  std::optional<long long> pause_after_epoch = {});
TrainResult resume(const Checkpoint& start, const TrainData& data,
                   std::optional<long long> pause_after_epoch = {});

struct SweepRow {
  std::size_t hidden_size = 0;
  bool ok = false;
  std::string error;
  ParamCount params;
  double fsc_mean = 0.0;
  double transfer_err = 0.0;
  double oracle_err = 0.0;
  double retrieval_image = 0.0;
  double retrieval_brain = 0.0;
};

// One training run per hidden size under otherwise identical config/seeds.
// A failing size marks its row instead of aborting the sweep.
std::vector<SweepRow> rank_sweep(const TrainConfig& config,
                                 std::span<const std::size_t> hidden_sizes,
                                 const TrainData& data);

std::string history_csv(const std::vector<HistoryRow>& history);
std::string tq_csv(const std::vector<double>& tq_values);
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace neuralign
