#include "neuralign/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "neuralign/binio.hpp"
#include "neuralign/errors.hpp"
#include "neuralign/kernels.hpp"

using nlohmann::json;

namespace neuralign {

void TrainConfig::validate() const {
  if (hidden_size == 0) throw std::invalid_argument("TrainConfig: hidden_size must be >= 1");
  if (batch_size < 2)
    throw std::invalid_argument("TrainConfig: batch_size must be >= 2 (latent loss)");
  if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
  if (eval_interval < 1) throw std::invalid_argument("TrainConfig: eval_interval must be >= 1");
  if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
  if (coeffs.alpha_rec < 0.0 || coeffs.alpha_kl < 0.0 || coeffs.alpha_latent < 0.0)
    throw std::invalid_argument("TrainConfig: loss coefficients must be >= 0");
  if (lr.btm < 0.0 || lr.mapper < 0.0 || lr.embedder < 0.0)
    throw std::invalid_argument("TrainConfig: learning rates must be >= 0");
}

json TrainConfig::to_json() const {
  json j{{"hidden_size", hidden_size},
         {"alpha_rec", coeffs.alpha_rec},
         {"alpha_kl", coeffs.alpha_kl},
         {"alpha_latent", coeffs.alpha_latent},
         {"lr_btm", lr.btm},
         {"lr_mapper", lr.mapper},
         {"lr_embedder", lr.embedder},
         {"batch_size", batch_size},
         {"epochs", epochs},
         {"eval_interval", eval_interval},
         {"patience", patience},
         {"seed_init", seed_init},
         {"seed_data", seed_data}};
  if (embedding_dim) j["embedding_dim"] = *embedding_dim;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("hidden_size", c.hidden_size);
  get("alpha_rec", c.coeffs.alpha_rec);
  get("alpha_kl", c.coeffs.alpha_kl);
  get("alpha_latent", c.coeffs.alpha_latent);
  get("lr_btm", c.lr.btm);
  get("lr_mapper", c.lr.mapper);
  get("lr_embedder", c.lr.embedder);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("eval_interval", c.eval_interval);
  get("patience", c.patience);
  get("seed_init", c.seed_init);
  get("seed_data", c.seed_data);
  if (j.contains("embedding_dim"))
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.validate();
  return c;
}

const AlignmentModel& Checkpoint::selected_model() const {
  return best_epoch >= 0 ? best_model : model;
}

TrainData TrainData::from_dataset(const Dataset& ds, const std::string& novel_id,
                                  const std::string& known_id, double oracle_lambda) {
  const auto& novel = ds.subject(novel_id);
  const auto& known = ds.subject(known_id);
  TrainData d;
  d.novel_train = novel.train;
  d.known_train = known.train;
  d.novel_eval = novel.eval;
  d.known_eval = known.eval;
  d.conserved_novel = novel.conserved;
  d.conserved_known = known.conserved;
  const World world = generate_world(ds.world_spec);
  d.oracle = oracle_transfer(world, novel_id, known_id, oracle_lambda);
  d.latent_dim = ds.world_spec.latent_dim;
  return d;
}

void TrainData::validate() const {
  if (novel_train.F.rows == 0 || known_train.F.rows == 0)
    throw std::invalid_argument("TrainData: empty training session");
  if (novel_eval.F.rows < 2 || known_eval.F.rows < 2)
    throw std::invalid_argument("TrainData: eval split needs at least 2 samples");
  if (novel_eval.F.rows != known_eval.F.rows)
    throw std::invalid_argument("TrainData: eval splits differ in size");
  if (novel_eval.stimulus_ids != known_eval.stimulus_ids)
    throw std::invalid_argument("TrainData: eval split must share stimuli");
  if (novel_train.E.cols != known_train.E.cols)
    throw std::invalid_argument("TrainData: embedding widths differ");
  if (!oracle.empty() &&
      (oracle.rows != novel_train.F.cols || oracle.cols != known_train.F.cols))
    throw std::invalid_argument("TrainData: oracle shape mismatch");
}

MetricsReport evaluate(const AlignmentModel& model, const SubjectSession& novel_eval,
                       const SubjectSession& known_eval, const EvalOptions& opts) {
  if (novel_eval.F.rows != known_eval.F.rows || novel_eval.F.rows < 2)
    throw std::invalid_argument("evaluate: eval split empty or mismatched");
  if (!novel_eval.stimulus_ids.empty() &&
      novel_eval.stimulus_ids != known_eval.stimulus_ids)
    throw std::invalid_argument("evaluate: eval split must share stimuli");

  MetricsReport r;

  const Matrix pred = btm_apply(model, novel_eval.F);
  const FscResult f = fsc(pred, known_eval.F);
  r.fsc_mean = f.mean;
  r.fsc_per_voxel = f.per_voxel;
  r.fsc_undefined_count = f.undefined_count;

  const Matrix m = compose_btm(model);
  r.tq_values = tq(m);

  const Matrix* oracle = (opts.oracle && !opts.oracle->empty()) ? opts.oracle : nullptr;
  const TransferError te = transfer_error(m, oracle, novel_eval.F, known_eval.F);
  r.transfer_relative_error = te.model_error;
  r.oracle_relative_error = te.oracle_error;

  const Matrix decoded = proxy_decode(model, pred);
  const std::size_t candidates =
      std::min<std::size_t>(opts.retrieval_candidates, novel_eval.F.rows);
  r.retrieval_top1_image =
      retrieval_top1(decoded, novel_eval.E, candidates, opts.retrieval_repeats,
                     RngState(opts.retrieval_seed, 3000));
  r.retrieval_top1_brain =
      retrieval_top1(novel_eval.E, decoded, candidates, opts.retrieval_repeats,
                     RngState(opts.retrieval_seed, 3001));

  r.conserved_novel = opts.conserved_novel;
  r.conserved_known = opts.conserved_known;
  {
    std::vector<double> sorted = r.tq_values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const double median =
        n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    double dev_c = 0.0, dev_v = 0.0;
    std::size_t n_c = 0, n_v = 0;
    for (std::size_t i = 0; i < r.tq_values.size(); ++i) {
      const double d = std::abs(r.tq_values[i] - median);
      if (i < opts.conserved_novel) {
        dev_c += d;
        ++n_c;
      } else {
        dev_v += d;
        ++n_v;
      }
    }
    r.tq_conserved_mean_dev = n_c > 0 ? dev_c / double(n_c) : 0.0;
    r.tq_variable_mean_dev = n_v > 0 ? dev_v / double(n_v) : 0.0;
  }
  {
    double sum_c = 0.0, sum_v = 0.0;
    std::size_t n_c = 0, n_v = 0;
    for (std::size_t j = 0; j < r.fsc_per_voxel.size(); ++j) {
      const double v = r.fsc_per_voxel[j];
      if (std::isnan(v)) continue;
      if (j < opts.conserved_known) {
        sum_c += v;
        ++n_c;
      } else {
        sum_v += v;
        ++n_v;
      }
    }
    r.fsc_conserved_mean = n_c > 0 ? sum_c / double(n_c) : 0.0;
    r.fsc_variable_mean = n_v > 0 ? sum_v / double(n_v) : 0.0;
  }

  r.history_ref = opts.history_ref;
  r.validate();
  return r;
}

namespace {

// Known-subject ridge decoder F -> E, the frozen stand-in for a pretrained
// decoding stack. Scaled relative ridge keeps the normal equations SPD on
// noiseless data.
Matrix calibrate_proxy_decoder(const SubjectSession& known_train) {
  const Matrix& f = known_train.F;
  const double lam =
      1e-4 * kern::sumsq(f.data.data(), f.size()) / double(f.cols);
  return matmul(ridge_pinv(f, lam), known_train.E);
}

PairedBatch gather_batch(const TrainData& data, const std::vector<std::size_t>& pairing,
                         const std::vector<std::size_t>& order, std::size_t start,
                         std::size_t b) {
  PairedBatch batch;
  batch.F_N = Matrix(b, data.novel_train.F.cols);
  batch.F_K = Matrix(b, data.known_train.F.cols);
  batch.E_N = Matrix(b, data.novel_train.E.cols);
  batch.E_K = Matrix(b, data.known_train.E.cols);
  batch.novel_index.resize(b);
  batch.known_index.resize(b);
  for (std::size_t r = 0; r < b; ++r) {
    const std::size_t i = order[start + r];
    const std::size_t j = pairing[i];
    std::copy_n(data.novel_train.F.row(i), batch.F_N.cols, batch.F_N.row(r));
    std::copy_n(data.known_train.F.row(j), batch.F_K.cols, batch.F_K.row(r));
    std::copy_n(data.novel_train.E.row(i), batch.E_N.cols, batch.E_N.row(r));
    std::copy_n(data.known_train.E.row(j), batch.E_K.cols, batch.E_K.row(r));
    batch.novel_index[r] = i;
    batch.known_index[r] = j;
  }
  return batch;
}

EvalOptions eval_options_for(const TrainConfig& config, const TrainData& data,
                             std::string history_ref) {
  EvalOptions opts;
  opts.oracle = data.oracle.empty() ? nullptr : &data.oracle;
  opts.conserved_novel = data.conserved_novel;
  opts.conserved_known = data.conserved_known;
  opts.retrieval_seed = config.seed_init;
  opts.history_ref = std::move(history_ref);
  return opts;
}

struct LoopOutcome {
  Checkpoint state;
  bool diverged = false;
};

LoopOutcome train_loop(Checkpoint state, const TrainData& data,
                       std::optional<long long> pause_after_epoch) {
  const TrainConfig& cfg = state.config;
  const auto pairing = pair_by_similarity(data.novel_train, data.known_train);
  const std::size_t n_pairs = pairing.size();

  Checkpoint last_finite = state;

  while (!state.early_stopped && state.epoch < cfg.epochs) {
    if (pause_after_epoch && state.epoch >= *pause_after_epoch) break;
    const long long e = state.epoch + 1;

    std::vector<std::size_t> order(n_pairs);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngState shuffle_rng(cfg.seed_data, static_cast<std::uint64_t>(e));
    for (std::size_t i = 0; i + 1 < n_pairs; ++i) {
      const std::size_t j = i + shuffle_rng.next_u64() % (n_pairs - i);
      std::swap(order[i], order[j]);
    }

    double sum_rec = 0.0, sum_kl = 0.0, sum_latent = 0.0, sum_dec = 0.0;
    std::size_t batches = 0;
    bool numeric_failure = false;
    for (std::size_t start = 0; start + 2 <= n_pairs; start += cfg.batch_size) {
      const std::size_t b = std::min(cfg.batch_size, n_pairs - start);
      if (b < 2) break;
      const PairedBatch batch = gather_batch(data, pairing, order, start, b);
      try {
        const auto [loss, grads] = backward(state.model, batch, cfg.coeffs);
        if (!std::isfinite(loss.l_total)) {
          numeric_failure = true;
          break;
        }
        adam_step(state.model, grads, state.adam);
        sum_rec += loss.l_rec;
        sum_kl += loss.l_kl;
        sum_latent += loss.l_latent;
        sum_dec += loss.l_dec_proxy;
        ++batches;
      } catch (const NumericError&) {
        numeric_failure = true;
        break;
      }
    }
    if (numeric_failure) return {std::move(last_finite), true};

    HistoryRow row;
    row.epoch = e;
    row.loss.coeffs = cfg.coeffs;
    const double nb = double(std::max<std::size_t>(batches, 1));
    row.loss.l_rec = sum_rec / nb;
    row.loss.l_kl = sum_kl / nb;
    row.loss.l_latent = sum_latent / nb;
    row.loss.l_dec_proxy = sum_dec / nb;
    row.loss.l_total = row.loss.l_dec_proxy + cfg.coeffs.alpha_rec * row.loss.l_rec +
                       cfg.coeffs.alpha_kl * row.loss.l_kl +
                       cfg.coeffs.alpha_latent * row.loss.l_latent;

    state.epoch = e;

    const bool eval_now = (e % cfg.eval_interval == 0) || (e == cfg.epochs);
    if (eval_now) {
      const Matrix pred = btm_apply(state.model, data.novel_eval.F);
      const double f = fsc(pred, data.known_eval.F).mean;
      row.fsc_mean = f;
      if (!data.oracle.empty()) {
        const TransferError te = transfer_error(compose_btm(state.model), &data.oracle,
                                                data.novel_eval.F, data.known_eval.F);
        row.transfer_error = te.model_error;
      }
      if (state.best_epoch < 0 || f > state.best_fsc) {
        state.best_fsc = f;
        state.best_epoch = e;
        state.best_model = state.model;
        state.stale_evals = 0;
      } else if (++state.stale_evals >= cfg.patience) {
        state.early_stopped = true;
      }
    }
    state.history.push_back(std::move(row));
    last_finite = state;
  }
  return {std::move(state), false};
}

TrainResult finish(LoopOutcome out, const TrainData& data) {
  TrainResult res;
  res.diverged = out.diverged;
  res.report = evaluate(out.state.selected_model(), data.novel_eval, data.known_eval,
                        eval_options_for(out.state.config, data, ""));
  res.checkpoint = std::move(out.state);
  return res;
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainData& data,
                  std::optional<long long> pause_after_epoch) {
  config.validate();
  data.validate();
  if (config.embedding_dim && *config.embedding_dim != data.novel_train.E.cols)
    throw std::invalid_argument("train: config embedding_dim disagrees with data");

  Dims dims;
  dims.n = data.novel_train.F.cols;
  dims.k = data.known_train.F.cols;
  dims.h = config.hidden_size;
  dims.a = data.novel_train.E.cols;
  dims.d_latentworld = data.latent_dim;

  Checkpoint state;
  state.config = config;
  state.novel_id = data.novel_train.subject_id;
  state.known_id = data.known_train.subject_id;
  state.model = init_model(dims, RngState(config.seed_init, 0));
  state.model.W_dec = calibrate_proxy_decoder(data.known_train);
  state.adam = AdamState::init(dims, config.lr);

  return finish(train_loop(std::move(state), data, pause_after_epoch), data);
}

TrainResult resume(const Checkpoint& start, const TrainData& data,
                   std::optional<long long> pause_after_epoch) {
  data.validate();
  return finish(train_loop(start, data, pause_after_epoch), data);
}

std::vector<SweepRow> rank_sweep(const TrainConfig& config,
                                 std::span<const std::size_t> hidden_sizes,
                                 const TrainData& data) {
  std::vector<SweepRow> rows;
  for (const std::size_t h : hidden_sizes) {
    SweepRow row;
    row.hidden_size = h;
    try {
      TrainConfig c = config;
      c.hidden_size = h;
      const TrainResult res = train(c, data);
      Dims dims = res.checkpoint.model.dims;
      row.params = param_count(dims);
      row.fsc_mean = res.report.fsc_mean;
      row.transfer_err = res.report.transfer_relative_error;
      row.oracle_err = res.report.oracle_relative_error;
      row.retrieval_image = res.report.retrieval_top1_image;
      row.retrieval_brain = res.report.retrieval_top1_brain;
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::string out = "epoch,l_total,l_rec,l_kl,l_latent,l_dec,fsc_mean,transfer_error\n";
  for (const auto& row : history) {
    out += std::to_string(row.epoch);
    out += ',';
    out += format_double(row.loss.l_total);
    out += ',';
    out += format_double(row.loss.l_rec);
    out += ',';
    out += format_double(row.loss.l_kl);
    out += ',';
    out += format_double(row.loss.l_latent);
    out += ',';
    out += format_double(row.loss.l_dec_proxy);
    out += ',';
    if (row.fsc_mean) out += format_double(*row.fsc_mean);
    out += ',';
    if (row.transfer_error) out += format_double(*row.transfer_error);
    out += '\n';
  }
  return out;
}

std::string tq_csv(const std::vector<double>& tq_values) {
  std::string out = "voxel_index,tq\n";
  for (std::size_t i = 0; i < tq_values.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(tq_values[i]);
    out += '\n';
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "h,params_btm,params_mapper,params_embedder,params_trainable,fsc_mean,"
      "transfer_error,oracle_error,retrieval_top1_image,retrieval_top1_brain,status\n";
  for (const auto& r : rows) {
    std::ostringstream line;
    line << r.hidden_size << ',';
    if (r.ok) {
      line << r.params.btm << ',' << r.params.mapper << ',' << r.params.embedder << ','
           << r.params.trainable_total << ',' << format_double(r.fsc_mean) << ','
           << format_double(r.transfer_err) << ',' << format_double(r.oracle_err) << ','
           << format_double(r.retrieval_image) << ',' << format_double(r.retrieval_brain)
           << ",ok";
    } else {
      std::string msg = r.error;
      for (char& c : msg)
        if (c == ',' || c == '\n') c = ';';
      line << ",,,,,,,," << "failed:" << msg;
    }
    out += line.str();
    out += '\n';
  }
  return out;
}

}  // namespace neuralign
