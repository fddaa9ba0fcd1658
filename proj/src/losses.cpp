#include "neuralign/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "neuralign/errors.hpp"
#include "neuralign/kernels.hpp"
#include "neuralign/stats.hpp"

namespace neuralign {

void PairedBatch::validate(const Dims& dims) const {
  const std::size_t b = F_N.rows;
  if (b < 2)
    throw std::invalid_argument("PairedBatch: need at least 2 pairs");
  if (F_K.rows != b || E_N.rows != b || E_K.rows != b)
    throw std::invalid_argument("PairedBatch: inconsistent row counts");
  if (F_N.cols != dims.n || F_K.cols != dims.k || E_N.cols != dims.a ||
      E_K.cols != dims.a)
    throw std::invalid_argument("PairedBatch: widths do not match dims");
  if (!novel_index.empty() && novel_index.size() != b)
    throw std::invalid_argument("PairedBatch: novel_index length mismatch");
  if (!known_index.empty() && known_index.size() != b)
    throw std::invalid_argument("PairedBatch: known_index length mismatch");
}

double loss_rec(const Matrix& f_hat, const Matrix& f_k) {
  if (!f_hat.same_shape(f_k)) throw std::invalid_argument("loss_rec: shape mismatch");
  const Matrix r = msub(f_hat, f_k);
  return kern::sumsq(r.data.data(), r.size()) / double(r.rows);
}

namespace {

// KL of one sample: both rows are softmax-normalized; optionally emits
// p = softmax(f_hat_row) and r = log p - log q for the gradient.
double kl_row(const double* f_hat, const double* f_k, std::size_t n, double* p_out,
              double* r_out) {
  std::vector<double> lp(f_hat, f_hat + n);
  std::vector<double> lq(f_k, f_k + n);
  log_softmax_inplace(lp.data(), n);
  log_softmax_inplace(lq.data(), n);
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = std::exp(lp[i]);
    const double r = lp[i] - lq[i];
    kl += p * r;
    if (p_out) p_out[i] = p;
    if (r_out) r_out[i] = r;
  }
  return kl;
}

}  // namespace

double loss_kl(const Matrix& f_hat, const Matrix& f_k) {
  if (!f_hat.same_shape(f_k)) throw std::invalid_argument("loss_kl: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < f_hat.rows; ++i)
    total += kl_row(f_hat.row(i), f_k.row(i), f_hat.cols, nullptr, nullptr);
  return total / double(f_hat.rows);
}

namespace {

std::vector<double> row_norms(const Matrix& m, const char* what) {
  std::vector<double> norms(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    norms[i] = std::sqrt(kern::sumsq(m.row(i), m.cols));
    if (norms[i] == 0.0)
      throw NumericError(std::string(what) + ": zero-norm row");
  }
  return norms;
}

}  // namespace

Matrix dissimilarity_matrix(const Matrix& u, const Matrix& v) {
  if (u.cols != v.cols)
    throw std::invalid_argument("dissimilarity_matrix: width mismatch");
  const auto nu = row_norms(u, "dissimilarity_matrix");
  const auto nv = row_norms(v, "dissimilarity_matrix");
  Matrix d(u.rows, v.rows);
  for (std::size_t i = 0; i < u.rows; ++i)
    for (std::size_t j = 0; j < v.rows; ++j)
      d.at(i, j) = 1.0 - kern::dot(u.row(i), v.row(j), u.cols) / (nu[i] * nv[j]);
  return d;
}

double loss_latent(const AlignmentModel& m, const Matrix& z_n, const Matrix& z_k,
                   const Matrix& e_n, const Matrix& e_k) {
  if (z_n.rows < 2) throw std::invalid_argument("loss_latent: need B >= 2");
  const Matrix d_f = dissimilarity_matrix(functional_embed(m, z_n), functional_embed(m, z_k));
  const Matrix d_s = dissimilarity_matrix(e_n, e_k);
  const Matrix diff = msub(d_f, d_s);
  const double b = double(z_n.rows);
  return kern::sumsq(diff.data.data(), diff.size()) / (b * b);
}

double loss_dec_proxy(const AlignmentModel& m, const Matrix& f_hat, const Matrix& e_n) {
  const Matrix p = proxy_decode(m, f_hat);
  if (!p.same_shape(e_n)) throw std::invalid_argument("loss_dec_proxy: shape mismatch");
  const Matrix r = msub(p, e_n);
  return kern::sumsq(r.data.data(), r.size()) / double(r.size());
}

namespace {

struct ForwardContext {
  Matrix z_n;     // B x h
  Matrix e_diff;  // B x a
  Matrix z_diff;  // B x 2h  (gamma | beta) rows, bias included
  Matrix z_k;     // B x h
  Matrix f_hat;   // B x k
};

ForwardContext run_forward(const AlignmentModel& m, const PairedBatch& batch) {
  ForwardContext ctx;
  ctx.z_n = encode_latent(m, batch.F_N);
  ctx.e_diff = stimulus_difference(batch.E_N, batch.E_K);
  ctx.z_diff = matmul(ctx.e_diff, m.W_diff);
  for (std::size_t i = 0; i < ctx.z_diff.rows; ++i)
    kern::add(ctx.z_diff.row(i), ctx.z_diff.row(i), m.b_diff.row(0), ctx.z_diff.cols);
  const std::size_t h = m.dims.h;
  ctx.z_k = Matrix(ctx.z_n.rows, h);
  for (std::size_t i = 0; i < ctx.z_n.rows; ++i)
    kern::film(ctx.z_k.row(i), ctx.z_n.row(i), ctx.z_diff.row(i), ctx.z_diff.row(i) + h, h);
  ctx.f_hat = decode_latent(m, ctx.z_k);
  return ctx;
}

LossBreakdown combine(const AlignmentModel& m, const PairedBatch& batch,
                      const ForwardContext& ctx, const LossCoeffs& coeffs) {
  LossBreakdown out;
  out.coeffs = coeffs;
  out.l_rec = loss_rec(ctx.f_hat, batch.F_K);
  out.l_kl = loss_kl(ctx.f_hat, batch.F_K);
  out.l_latent = loss_latent(m, ctx.z_n, ctx.z_k, batch.E_N, batch.E_K);
  out.l_dec_proxy = loss_dec_proxy(m, ctx.f_hat, batch.E_N);
  out.l_total = out.l_dec_proxy + coeffs.alpha_rec * out.l_rec +
                coeffs.alpha_kl * out.l_kl + coeffs.alpha_latent * out.l_latent;
  return out;
}

}  // namespace

LossBreakdown forward_loss(const AlignmentModel& m, const PairedBatch& batch,
                           const LossCoeffs& coeffs) {
  batch.validate(m.dims);
  const ForwardContext ctx = run_forward(m, batch);
  return combine(m, batch, ctx, coeffs);
}

std::pair<LossBreakdown, Gradients> backward(const AlignmentModel& m,
                                             const PairedBatch& batch,
                                             const LossCoeffs& coeffs) {
  batch.validate(m.dims);
  const std::size_t b = batch.size();
  const std::size_t h = m.dims.h;
  const std::size_t k = m.dims.k;
  const std::size_t a = m.dims.a;
  const double bf = double(b);

  const ForwardContext ctx = run_forward(m, batch);
  const LossBreakdown loss = combine(m, batch, ctx, coeffs);

  Gradients g = Gradients::zeros(m.dims);

  // d l_total / d f_hat, accumulated over the three heads that touch it.
  Matrix g_hat(b, k);

  // reconstruction head: alpha_rec * (2/B) (f_hat - F_K)
  if (coeffs.alpha_rec != 0.0) {
    const Matrix r = msub(ctx.f_hat, batch.F_K);
    for (std::size_t i = 0; i < b; ++i)
      kern::axpy(g_hat.row(i), coeffs.alpha_rec * 2.0 / bf, r.row(i), k);
  }

  // KL head: per row, alpha_kl/B * p .* (r - kl)
  if (coeffs.alpha_kl != 0.0) {
    std::vector<double> p(k), r(k);
    for (std::size_t i = 0; i < b; ++i) {
      const double kl = kl_row(ctx.f_hat.row(i), batch.F_K.row(i), k, p.data(), r.data());
      double* gi = g_hat.row(i);
      const double c = coeffs.alpha_kl / bf;
      for (std::size_t j = 0; j < k; ++j) gi[j] += c * p[j] * (r[j] - kl);
    }
  }

  // decoder head: (2/(B*a)) (f_hat W_dec - E_N) W_dec'
  {
    Matrix pr = msub(proxy_decode(m, ctx.f_hat), batch.E_N);
    pr = mscale(pr, 2.0 / (bf * double(a)));
    g_hat = madd(g_hat, matmul(pr, transpose(m.W_dec)));
  }

  // latent alignment head: gradients wrt the embedded rows U = embed(z_N),
  // V = embed(z_K), pushed back through the embedder and both z paths.
  Matrix dz_n_embed(b, h);
  Matrix dz_k_embed(b, h);
  if (coeffs.alpha_latent != 0.0) {
    const Matrix u = functional_embed(m, ctx.z_n);
    const Matrix v = functional_embed(m, ctx.z_k);
    const auto nu = row_norms(u, "loss_latent");
    const auto nv = row_norms(v, "loss_latent");
    const Matrix d_s = dissimilarity_matrix(batch.E_N, batch.E_K);

    Matrix du(b, h), dv(b, h);
    const double c = coeffs.alpha_latent * 2.0 / (bf * bf);
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < b; ++j) {
        const double s = kern::dot(u.row(i), v.row(j), h) / (nu[i] * nv[j]);
        const double gd = c * ((1.0 - s) - d_s.at(i, j));
        // d(1 - s)/dU_i = s/|U_i|^2 U_i - V_j/(|U_i||V_j|), likewise for V_j
        kern::axpy(du.row(i), gd * s / (nu[i] * nu[i]), u.row(i), h);
        kern::axpy(du.row(i), -gd / (nu[i] * nv[j]), v.row(j), h);
        kern::axpy(dv.row(j), gd * s / (nv[j] * nv[j]), v.row(j), h);
        kern::axpy(dv.row(j), -gd / (nu[i] * nv[j]), u.row(i), h);
      }
    }

    g.W_f = madd(matmul(transpose(ctx.z_n), du), matmul(transpose(ctx.z_k), dv));
    for (std::size_t i = 0; i < b; ++i) {
      kern::add(g.b_f.row(0), g.b_f.row(0), du.row(i), h);
      kern::add(g.b_f.row(0), g.b_f.row(0), dv.row(i), h);
    }
    const Matrix wft = transpose(m.W_f);
    dz_n_embed = matmul(du, wft);
    dz_k_embed = matmul(dv, wft);
  }

  // decode: z_K feeds B and (via the embedder) the latent loss.
  const Matrix dz_k = madd(matmul(g_hat, transpose(m.B)), dz_k_embed);
  g.B = matmul(transpose(ctx.z_k), g_hat);

  // FiLM: z_K = (1 + gamma) .* z_N + beta
  Matrix dz_diff(b, 2 * h);
  Matrix dz_n = dz_n_embed;
  for (std::size_t i = 0; i < b; ++i) {
    const double* gamma = ctx.z_diff.row(i);
    const double* zki = dz_k.row(i);
    const double* zni = ctx.z_n.row(i);
    double* dgi = dz_diff.row(i);
    double* dni = dz_n.row(i);
    for (std::size_t j = 0; j < h; ++j) {
      dgi[j] = zki[j] * zni[j];        // d/d gamma
      dgi[h + j] = zki[j];             // d/d beta
      dni[j] += zki[j] * (1.0 + gamma[j]);
    }
  }
  g.W_diff = matmul(transpose(ctx.e_diff), dz_diff);
  for (std::size_t i = 0; i < b; ++i)
    kern::add(g.b_diff.row(0), g.b_diff.row(0), dz_diff.row(i), 2 * h);

  // encode
  g.A = matmul(transpose(batch.F_N), dz_n);

  return {loss, g};
}

namespace {

struct BlockRef {
  const char* name;
  Matrix AlignmentModel::* member;
  Matrix Gradients::* grad;
};

constexpr BlockRef kBlocks[] = {
    {"A", &AlignmentModel::A, &Gradients::A},
    {"B", &AlignmentModel::B, &Gradients::B},
    {"W_diff", &AlignmentModel::W_diff, &Gradients::W_diff},
    {"b_diff", &AlignmentModel::b_diff, &Gradients::b_diff},
    {"W_f", &AlignmentModel::W_f, &Gradients::W_f},
    {"b_f", &AlignmentModel::b_f, &Gradients::b_f},
};

}  // namespace

std::vector<std::pair<std::string, double>> finite_diff_check_per_block(
    const AlignmentModel& m, const PairedBatch& batch, const LossCoeffs& coeffs,
    double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3))
    throw std::invalid_argument("finite_diff_check: eps must be in [1e-7, 1e-3]");

  const auto [loss, grads] = backward(m, batch, coeffs);
  (void)loss;

  AlignmentModel probe = m;  // private copy; restored after each perturbation
  std::vector<std::pair<std::string, double>> out;
  constexpr std::size_t kMinCoords = 200;

  std::size_t block_index = 0;
  for (const auto& blk : kBlocks) {
    const Matrix& analytic = grads.*(blk.grad);
    Matrix& theta = probe.*(blk.member);
    const std::size_t total = theta.size();

    std::vector<std::size_t> coords;
    if (total <= kMinCoords) {
      coords.resize(total);
      for (std::size_t i = 0; i < total; ++i) coords[i] = i;
    } else {
      // deterministic distinct subsample
      std::vector<std::size_t> all(total);
      for (std::size_t i = 0; i < total; ++i) all[i] = i;
      RngState rng(0x66646368u, block_index);
      for (std::size_t i = 0; i < kMinCoords; ++i) {
        const std::size_t j = i + rng.next_u64() % (total - i);
        std::swap(all[i], all[j]);
      }
      coords.assign(all.begin(), all.begin() + kMinCoords);
    }

    double worst = 0.0;
    for (const std::size_t c : coords) {
      const double saved = theta.data[c];
      theta.data[c] = saved + eps;
      const double up = forward_loss(probe, batch, coeffs).l_total;
      theta.data[c] = saved - eps;
      const double down = forward_loss(probe, batch, coeffs).l_total;
      theta.data[c] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double ana = analytic.data[c];
      const double rel =
          std::abs(ana - numeric) / std::max(1e-12, std::abs(ana) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
    out.emplace_back(blk.name, worst);
    ++block_index;
  }
  return out;
}

double finite_diff_check(const AlignmentModel& m, const PairedBatch& batch,
                         const LossCoeffs& coeffs, double eps) {
  double worst = 0.0;
  for (const auto& [name, err] : finite_diff_check_per_block(m, batch, coeffs, eps))
    worst = std::max(worst, err);
  return worst;
}

}  // namespace neuralign
