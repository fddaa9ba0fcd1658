#include "neuralign/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "neuralign/kernels.hpp"

namespace neuralign {

void Dims::validate() const {
  if (n == 0 || k == 0 || h == 0 || a == 0)
    throw std::invalid_argument("Dims: n, k, h, a must all be >= 1");
}

void AlignmentModel::validate_shapes() const {
  dims.validate();
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows != r || m.cols != c)
      throw std::invalid_argument(std::string("AlignmentModel: bad shape for ") + name);
  };
  expect(A, dims.n, dims.h, "A");
  expect(B, dims.h, dims.k, "B");
  expect(W_diff, dims.a, 2 * dims.h, "W_diff");
  expect(b_diff, 1, 2 * dims.h, "b_diff");
  expect(W_f, dims.h, dims.h, "W_f");
  expect(b_f, 1, dims.h, "b_f");
  expect(W_dec, dims.k, dims.a, "W_dec");
}

Gradients Gradients::zeros(const Dims& d) {
  Gradients g;
  g.A = Matrix(d.n, d.h);
  g.B = Matrix(d.h, d.k);
  g.W_diff = Matrix(d.a, 2 * d.h);
  g.b_diff = Matrix(1, 2 * d.h);
  g.W_f = Matrix(d.h, d.h);
  g.b_f = Matrix(1, d.h);
  return g;
}

AlignmentModel init_model(const Dims& dims, RngState rng) {
  dims.validate();
  AlignmentModel m;
  m.dims = dims;
  m.A = gaussian(rng, dims.n, dims.h, 0.0, 1.0 / std::sqrt(double(dims.n)));
  m.B = gaussian(rng, dims.h, dims.k, 0.0, 1.0 / std::sqrt(double(dims.h)));
  m.W_diff = gaussian(rng, dims.a, 2 * dims.h, 0.0, 1.0 / std::sqrt(double(dims.a)));
  m.b_diff = Matrix(1, 2 * dims.h);
  m.W_f = gaussian(rng, dims.h, dims.h, 0.0, 1.0 / std::sqrt(double(dims.h)));
  m.b_f = Matrix(1, dims.h);
  m.W_dec = gaussian(rng, dims.k, dims.a, 0.0, 1.0 / std::sqrt(double(dims.k)));
  return m;
}

Matrix encode_latent(const AlignmentModel& m, const Matrix& f_n) {
  if (f_n.cols != m.dims.n)
    throw std::invalid_argument("encode_latent: expected width n");
  return matmul(f_n, m.A);
}

Matrix decode_latent(const AlignmentModel& m, const Matrix& z) {
  if (z.cols != m.dims.h)
    throw std::invalid_argument("decode_latent: expected width h");
  return matmul(z, m.B);
}

Matrix btm_apply(const AlignmentModel& m, const Matrix& f_n) {
  return decode_latent(m, encode_latent(m, f_n));
}

Matrix compose_btm(const AlignmentModel& m) { return matmul(m.A, m.B); }

Matrix stimulus_difference(const Matrix& e_n, const Matrix& e_k) {
  return msub(e_n, e_k);
}

Matrix film_modulate(const AlignmentModel& m, const Matrix& z_n, const Matrix& e_diff) {
  const std::size_t h = m.dims.h;
  if (z_n.cols != h) throw std::invalid_argument("film_modulate: expected width h");
  if (e_diff.cols != m.dims.a)
    throw std::invalid_argument("film_modulate: expected condition width a");
  if (e_diff.rows != z_n.rows)
    throw std::invalid_argument("film_modulate: batch size mismatch");

  Matrix z_diff = matmul(e_diff, m.W_diff);
  for (std::size_t i = 0; i < z_diff.rows; ++i)
    kern::add(z_diff.row(i), z_diff.row(i), m.b_diff.row(0), z_diff.cols);

  Matrix z_k(z_n.rows, h);
  for (std::size_t i = 0; i < z_n.rows; ++i) {
    const double* gamma = z_diff.row(i);
    const double* beta = z_diff.row(i) + h;
    kern::film(z_k.row(i), z_n.row(i), gamma, beta, h);
  }
  return z_k;
}

Matrix functional_embed(const AlignmentModel& m, const Matrix& z) {
  if (z.cols != m.dims.h)
    throw std::invalid_argument("functional_embed: expected width h");
  Matrix out = matmul(z, m.W_f);
  for (std::size_t i = 0; i < out.rows; ++i)
    kern::add(out.row(i), out.row(i), m.b_f.row(0), out.cols);
  return out;
}

Matrix proxy_decode(const AlignmentModel& m, const Matrix& f) {
  if (f.cols != m.dims.k)
    throw std::invalid_argument("proxy_decode: expected width k");
  return matmul(f, m.W_dec);
}

ParamCount param_count(const Dims& dims) {
  dims.validate();
  const auto n = static_cast<long long>(dims.n);
  const auto k = static_cast<long long>(dims.k);
  const auto h = static_cast<long long>(dims.h);
  const auto a = static_cast<long long>(dims.a);
  ParamCount p;
  p.btm = n * h + h * k;
  p.mapper = a * 2 * h + 2 * h;
  p.embedder = h * h + h;
  p.trainable_total = p.btm + p.mapper + p.embedder;
  p.decoder_frozen = k * a;
  return p;
}

}  // namespace neuralign
