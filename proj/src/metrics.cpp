#include "neuralign/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "neuralign/errors.hpp"
#include "neuralign/kernels.hpp"
#include "neuralign/stats.hpp"

using nlohmann::json;

namespace neuralign {

FscResult fsc(const Matrix& pred, const Matrix& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("fsc: shape mismatch");
  if (pred.rows < 2) throw std::invalid_argument("fsc: need at least 2 samples");

  const std::size_t s = pred.rows;
  const std::size_t k = pred.cols;
  FscResult out;
  out.per_voxel.assign(k, std::numeric_limits<double>::quiet_NaN());

  std::vector<double> x(s), y(s);
  double total = 0.0;
  std::size_t defined = 0;
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < s; ++i) {
      x[i] = pred.at(i, j);
      y[i] = target.at(i, j);
    }
    if (const auto r = pearson(x, y)) {
      out.per_voxel[j] = *r;
      total += *r;
      ++defined;
    } else {
      ++out.undefined_count;
    }
  }
  out.mean = defined > 0 ? total / double(defined) : 0.0;
  return out;
}

std::vector<double> tq(const Matrix& m) {
  std::vector<double> out(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const double* row = m.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) acc += std::abs(row[j]);
    out[i] = acc;
  }
  return out;
}

double retrieval_top1(const Matrix& queries, const Matrix& gallery,
                      std::size_t candidates_per_trial, std::size_t repeats,
                      RngState rng) {
  if (queries.rows != gallery.rows)
    throw std::invalid_argument("retrieval_top1: query/gallery row mismatch");
  if (queries.cols != gallery.cols)
    throw std::invalid_argument("retrieval_top1: width mismatch");
  if (candidates_per_trial == 0 || candidates_per_trial > gallery.rows)
    throw std::invalid_argument("retrieval_top1: invalid candidates_per_trial");
  if (repeats == 0) throw std::invalid_argument("retrieval_top1: repeats must be >= 1");

  const std::size_t g = gallery.rows;
  const std::size_t w = gallery.cols;

  std::vector<double> gnorm(g);
  for (std::size_t j = 0; j < g; ++j) {
    gnorm[j] = std::sqrt(kern::sumsq(gallery.row(j), w));
    if (gnorm[j] == 0.0) throw NumericError("retrieval_top1: zero-norm gallery row");
  }

  std::size_t hits = 0, trials = 0;
  std::vector<std::size_t> pool(g);
  for (std::size_t q = 0; q < queries.rows; ++q) {
    const double qn = std::sqrt(kern::sumsq(queries.row(q), w));
    if (qn == 0.0) throw NumericError("retrieval_top1: zero-norm query");
    const double sim_true =
        kern::dot(queries.row(q), gallery.row(q), w) / (qn * gnorm[q]);

    for (std::size_t rep = 0; rep < repeats; ++rep) {
      // distractor sample: distinct gallery rows excluding the true match
      for (std::size_t j = 0; j < g; ++j) pool[j] = j;
      std::swap(pool[q], pool[g - 1]);
      bool beaten = false;
      for (std::size_t c = 0; c + 1 < candidates_per_trial; ++c) {
        const std::size_t pick = c + rng.next_u64() % (g - 1 - c);
        std::swap(pool[c], pool[pick]);
        const std::size_t j = pool[c];
        const double sim =
            kern::dot(queries.row(q), gallery.row(j), w) / (qn * gnorm[j]);
        if (sim >= sim_true) beaten = true;
      }
      if (!beaten) ++hits;
      ++trials;
    }
  }
  return double(hits) / double(trials);
}

TransferError transfer_error(const Matrix& m, const Matrix* m_star,
                             const Matrix& eval_f_n, const Matrix& eval_f_k) {
  if (eval_f_n.cols != m.rows || m.cols != eval_f_k.cols ||
      eval_f_n.rows != eval_f_k.rows)
    throw std::invalid_argument("transfer_error: shape mismatch");

  const double denom = frobenius_norm(eval_f_k);
  if (denom == 0.0) throw NumericError("transfer_error: zero target norm");

  TransferError out;
  out.model_error = frobenius_norm(msub(matmul(eval_f_n, m), eval_f_k)) / denom;
  if (m_star != nullptr) {
    if (!m_star->same_shape(m))
      throw std::invalid_argument("transfer_error: oracle shape mismatch");
    out.oracle_error =
        frobenius_norm(msub(matmul(eval_f_n, *m_star), eval_f_k)) / denom;
  } else {
    out.oracle_error = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

void MetricsReport::validate() const {
  for (double r : fsc_per_voxel)
    if (!std::isnan(r) && (r < -1.0 || r > 1.0))
      throw NumericError("MetricsReport: fsc entry outside [-1, 1]");
  for (double t : tq_values)
    if (!(t >= 0.0)) throw NumericError("MetricsReport: negative TQ entry");
  auto frac = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!frac(retrieval_top1_image) || !frac(retrieval_top1_brain))
    throw NumericError("MetricsReport: retrieval fraction outside [0, 1]");
}

namespace {

json doubles_to_json(const std::vector<double>& v) {
  json arr = json::array();
  for (double x : v) {
    if (std::isnan(x))
      arr.push_back(nullptr);
    else
      arr.push_back(x);
  }
  return arr;
}

std::vector<double> doubles_from_json(const json& arr) {
  std::vector<double> v;
  v.reserve(arr.size());
  for (const auto& x : arr)
    v.push_back(x.is_null() ? std::numeric_limits<double>::quiet_NaN()
                            : x.get<double>());
  return v;
}

}  // namespace

json MetricsReport::to_json() const {
  return json{{"fsc_mean", fsc_mean},
              {"fsc_per_voxel", doubles_to_json(fsc_per_voxel)},
              {"fsc_undefined_count", fsc_undefined_count},
              {"tq", doubles_to_json(tq_values)},
              {"conserved_novel", conserved_novel},
              {"conserved_known", conserved_known},
              {"tq_conserved_mean_dev", tq_conserved_mean_dev},
              {"tq_variable_mean_dev", tq_variable_mean_dev},
              {"fsc_conserved_mean", fsc_conserved_mean},
              {"fsc_variable_mean", fsc_variable_mean},
              {"retrieval_top1_image", retrieval_top1_image},
              {"retrieval_top1_brain", retrieval_top1_brain},
              {"transfer_relative_error", transfer_relative_error},
              {"oracle_relative_error",
               std::isnan(oracle_relative_error) ? json(nullptr)
                                                 : json(oracle_relative_error)},
              {"history_ref", history_ref}};
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  r.fsc_mean = j.at("fsc_mean").get<double>();
  r.fsc_per_voxel = doubles_from_json(j.at("fsc_per_voxel"));
  r.fsc_undefined_count = j.at("fsc_undefined_count").get<std::size_t>();
  r.tq_values = doubles_from_json(j.at("tq"));
  r.conserved_novel = j.at("conserved_novel").get<std::size_t>();
  r.conserved_known = j.at("conserved_known").get<std::size_t>();
  r.tq_conserved_mean_dev = j.at("tq_conserved_mean_dev").get<double>();
  r.tq_variable_mean_dev = j.at("tq_variable_mean_dev").get<double>();
  r.fsc_conserved_mean = j.at("fsc_conserved_mean").get<double>();
  r.fsc_variable_mean = j.at("fsc_variable_mean").get<double>();
  r.retrieval_top1_image = j.at("retrieval_top1_image").get<double>();
  r.retrieval_top1_brain = j.at("retrieval_top1_brain").get<double>();
  r.transfer_relative_error = j.at("transfer_relative_error").get<double>();
  r.oracle_relative_error = j.at("oracle_relative_error").is_null()
                                ? std::numeric_limits<double>::quiet_NaN()
                                : j.at("oracle_relative_error").get<double>();
  r.history_ref = j.at("history_ref").get<std::string>();
  return r;
}

bool MetricsReport::operator==(const MetricsReport& o) const {
  auto deq = [](double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || a == b;
  };
  auto veq = [&](const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!deq(a[i], b[i])) return false;
    return true;
  };
  return deq(fsc_mean, o.fsc_mean) && veq(fsc_per_voxel, o.fsc_per_voxel) &&
         fsc_undefined_count == o.fsc_undefined_count && veq(tq_values, o.tq_values) &&
         conserved_novel == o.conserved_novel && conserved_known == o.conserved_known &&
         deq(tq_conserved_mean_dev, o.tq_conserved_mean_dev) &&
         deq(tq_variable_mean_dev, o.tq_variable_mean_dev) &&
         deq(fsc_conserved_mean, o.fsc_conserved_mean) &&
         deq(fsc_variable_mean, o.fsc_variable_mean) &&
         deq(retrieval_top1_image, o.retrieval_top1_image) &&
         deq(retrieval_top1_brain, o.retrieval_top1_brain) &&
         deq(transfer_relative_error, o.transfer_relative_error) &&
         deq(oracle_relative_error, o.oracle_relative_error) &&
         history_ref == o.history_ref;
}

}  // namespace neuralign
