#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "neuralign/errors.hpp"
#include "neuralign/losses.hpp"
#include "neuralign/stats.hpp"

using namespace neuralign;

namespace {

constexpr Dims kDims{6, 5, 3, 4, 0};

AlignmentModel gradcheck_model(std::uint64_t seed = 3) {
  return init_model(kDims, RngState(seed, 0));
}

PairedBatch random_batch(std::uint64_t seed, std::size_t b = 3) {
  PairedBatch pb;
  RngState r1(seed, 1), r2(seed, 2), r3(seed, 3), r4(seed, 4);
  pb.F_N = gaussian(r1, b, kDims.n, 0.0, 1.0);
  pb.F_K = gaussian(r2, b, kDims.k, 0.0, 1.0);
  pb.E_N = gaussian(r3, b, kDims.a, 0.0, 1.0);
  pb.E_K = gaussian(r4, b, kDims.a, 0.0, 1.0);
  return pb;
}

}  // namespace

TEST_CASE("loss_rec closed forms") {
  Matrix f(1, 2, {1, 0});
  CHECK(loss_rec(f, f) == 0.0);
  CHECK(loss_rec(f, Matrix(1, 2)) == 1.0);

  const Matrix fhat(2, 2, {1, 0, 0, 2});
  CHECK(loss_rec(fhat, Matrix(2, 2)) == 2.5);

  CHECK_THROWS_AS(loss_rec(f, Matrix(1, 3)), std::invalid_argument);
}

TEST_CASE("loss_rec quadratic scaling") {
  RngState rng(21, 0);
  const Matrix a = testutil::random_matrix(rng, 3, 7);
  const Matrix b = testutil::random_matrix(rng, 3, 7);
  const double base = loss_rec(a, b);
  // scale the residual by c: b + c*(a-b) vs b
  const double c = 3.25;
  const Matrix scaled = madd(b, mscale(msub(a, b), c));
  CHECK(loss_rec(scaled, b) == doctest::Approx(c * c * base).epsilon(1e-12));
}

TEST_CASE("loss_kl") {
  SUBCASE("identical rows give exactly zero") {
    RngState rng(22, 0);
    const Matrix f = testutil::random_matrix(rng, 4, 5);
    CHECK(loss_kl(f, f) == 0.0);
  }
  SUBCASE("closed form (ln 2, 0) vs (0, 0)") {
    const Matrix fhat(1, 2, {std::log(2.0), 0.0});
    const Matrix fk(1, 2, {0.0, 0.0});
    const double want = (2.0 / 3.0) * std::log((2.0 / 3.0) / 0.5) +
                        (1.0 / 3.0) * std::log((1.0 / 3.0) / 0.5);
    CHECK(loss_kl(fhat, fk) == doctest::Approx(want).epsilon(1e-12));
    CHECK(loss_kl(fhat, fk) == doctest::Approx(0.0566330122651).epsilon(1e-9));
  }
  SUBCASE("invariant to a shared additive constant") {
    RngState rng(22, 1);
    const Matrix a = testutil::random_matrix(rng, 3, 6);
    const Matrix b = testutil::random_matrix(rng, 3, 6);
    const double base = loss_kl(a, b);
    Matrix a2 = a, b2 = b;
    for (double& v : a2.data) v += 17.5;
    for (double& v : b2.data) v += 17.5;
    CHECK(std::abs(loss_kl(a2, b2) - base) < 1e-12);
  }
  SUBCASE("non-negative on random inputs") {
    RngState rng(22, 2);
    for (int trial = 0; trial < 25; ++trial) {
      const Matrix a = testutil::random_matrix(rng, 2, 9);
      const Matrix b = testutil::random_matrix(rng, 2, 9);
      CHECK(loss_kl(a, b) >= 0.0);
    }
  }
}

TEST_CASE("dissimilarity_matrix") {
  SUBCASE("zero diagonal for identical unit rows") {
    const Matrix u(2, 2, {1, 0, 0, 1});
    const Matrix d = dissimilarity_matrix(u, u);
    CHECK(d.at(0, 0) == 0.0);
    CHECK(d.at(1, 1) == 0.0);
    CHECK(d.at(0, 1) == 1.0);
    CHECK(d.at(1, 0) == 1.0);
  }
  SUBCASE("random entries match the per-entry oracle") {
    RngState rng(23, 0);
    const Matrix u = testutil::random_matrix(rng, 4, 6);
    const Matrix v = testutil::random_matrix(rng, 3, 6);
    const Matrix d = dissimilarity_matrix(u, v);
    REQUIRE(d.rows == 4);
    REQUIRE(d.cols == 3);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        const std::vector<double> ui(u.row(i), u.row(i) + 6);
        const std::vector<double> vj(v.row(j), v.row(j) + 6);
        CHECK(d.at(i, j) == doctest::Approx(cosine_dissimilarity(ui, vj)).epsilon(1e-14));
      }
  }
  SUBCASE("zero-norm row reported") {
    Matrix u(2, 2, {1, 0, 0, 0});
    CHECK_THROWS_AS(dissimilarity_matrix(u, u), NumericError);
  }
}

TEST_CASE("loss_latent") {
  SUBCASE("identity embedder on matching geometry gives zero") {
    // a == h == 3; embedder = identity; z equal to E on both sides
    AlignmentModel m = init_model({4, 4, 3, 3, 0}, RngState(24, 0));
    m.W_f = Matrix::identity(3);
    m.b_f = Matrix(1, 3);
    RngState rng(24, 1);
    const Matrix e_n = testutil::random_matrix(rng, 3, 3);
    const Matrix e_k = testutil::random_matrix(rng, 3, 3);
    CHECK(loss_latent(m, e_n, e_k, e_n, e_k) == 0.0);
  }
  SUBCASE("all-zero against all-one dissimilarity gives 1") {
    AlignmentModel m = init_model({4, 4, 2, 2, 0}, RngState(24, 2));
    m.W_f = Matrix::identity(2);
    m.b_f = Matrix(1, 2);
    // embeddings all along e1 -> D_f all zeros; stimuli orthogonal -> D_s all ones
    const Matrix z(2, 2, {1, 0, 1, 0});
    const Matrix e_n(2, 2, {1, 0, 1, 0});
    const Matrix e_k(2, 2, {0, 1, 0, 1});
    CHECK(loss_latent(m, z, z, e_n, e_k) == 1.0);
  }
  SUBCASE("random instance matches an independent evaluation") {
    const AlignmentModel m = gradcheck_model(25);
    RngState rng(25, 1);
    const Matrix z_n = testutil::random_matrix(rng, 3, 3);
    const Matrix z_k = testutil::random_matrix(rng, 3, 3);
    const Matrix e_n = testutil::random_matrix(rng, 3, 4);
    const Matrix e_k = testutil::random_matrix(rng, 3, 4);

    const Matrix u = functional_embed(m, z_n);
    const Matrix v = functional_embed(m, z_k);
    double want = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        const std::vector<double> ui(u.row(i), u.row(i) + 3);
        const std::vector<double> vj(v.row(j), v.row(j) + 3);
        const std::vector<double> ei(e_n.row(i), e_n.row(i) + 4);
        const std::vector<double> ej(e_k.row(j), e_k.row(j) + 4);
        const double diff = cosine_dissimilarity(ui, vj) - cosine_dissimilarity(ei, ej);
        want += diff * diff;
      }
    want /= 9.0;
    CHECK(loss_latent(m, z_n, z_k, e_n, e_k) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("loss_dec_proxy") {
  SUBCASE("exact decode gives zero") {
    AlignmentModel m = init_model({2, 3, 2, 3, 0}, RngState(26, 0));
    m.W_dec = Matrix::identity(3);
    RngState rng(26, 1);
    const Matrix f = testutil::random_matrix(rng, 2, 3);
    CHECK(loss_dec_proxy(m, f, f) == 0.0);
  }
  SUBCASE("zero decoder, unit target") {
    AlignmentModel m = init_model({2, 3, 2, 2, 0}, RngState(26, 2));
    m.W_dec = Matrix(3, 2);
    const Matrix f(1, 3, {4, 5, 6});
    const Matrix e(1, 2, {1, 0});
    CHECK(loss_dec_proxy(m, f, e) == 0.5);
  }
  SUBCASE("random instance matches oracle recomputation") {
    const AlignmentModel m = gradcheck_model(27);
    RngState rng(27, 1);
    const Matrix f = testutil::random_matrix(rng, 3, 5);
    const Matrix e = testutil::random_matrix(rng, 3, 4);
    const Matrix p = testutil::matmul_oracle(f, m.W_dec);
    double want = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double d = p.data[i] - e.data[i];
      want += d * d;
    }
    want /= double(p.size());
    CHECK(loss_dec_proxy(m, f, e) == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("forward_loss composition") {
  const AlignmentModel m = gradcheck_model();
  const PairedBatch pb = random_batch(30);

  SUBCASE("coefficient masking leaves only the decoder term") {
    const LossBreakdown l = forward_loss(m, pb, {0.0, 0.0, 0.0});
    CHECK(l.l_total == l.l_dec_proxy);
  }
  SUBCASE("default coefficients") {
    const LossCoeffs c;
    CHECK(c.alpha_rec == 1.0);
    CHECK(c.alpha_kl == 1e-3);
    CHECK(c.alpha_latent == 1e-3);
    const LossBreakdown l = forward_loss(m, pb, c);
    CHECK(l.l_total ==
          l.l_dec_proxy + 1.0 * l.l_rec + 1e-3 * l.l_kl + 1e-3 * l.l_latent);
  }
  SUBCASE("total recombines from the components") {
    const LossCoeffs c{0.7, 0.2, 0.05};
    const LossBreakdown l = forward_loss(m, pb, c);
    const double manual =
        l.l_dec_proxy + c.alpha_rec * l.l_rec + c.alpha_kl * l.l_kl +
        c.alpha_latent * l.l_latent;
    CHECK(std::abs(l.l_total - manual) < 1e-12);
    CHECK(l.l_rec >= 0.0);
    CHECK(l.l_kl >= 0.0);
    CHECK(l.l_latent >= 0.0);
    CHECK(l.l_dec_proxy >= 0.0);
  }
  SUBCASE("batch of one is rejected") {
    const PairedBatch one = random_batch(31, 1);
    CHECK_THROWS_AS(forward_loss(m, one, LossCoeffs{}), std::invalid_argument);
  }
}

TEST_CASE("backward closed forms") {
  // With only the reconstruction head active and a zero decoder, the B
  // gradient must be z_K' (2/B)(f_hat - F_K) exactly.
  AlignmentModel m = gradcheck_model(32);
  m.W_dec = Matrix(kDims.k, kDims.a);
  const PairedBatch pb = random_batch(32);
  const LossCoeffs coeffs{1.0, 0.0, 0.0};

  const auto [loss, g] = backward(m, pb, coeffs);
  (void)loss;

  const Matrix z_n = encode_latent(m, pb.F_N);
  const Matrix z_k = film_modulate(m, z_n, stimulus_difference(pb.E_N, pb.E_K));
  const Matrix f_hat = decode_latent(m, z_k);
  const Matrix want =
      matmul(transpose(z_k), mscale(msub(f_hat, pb.F_K), 2.0 / double(pb.size())));
  CHECK(testutil::max_abs_diff(g.B, want) < 1e-12);
}

TEST_CASE("gradients vanish off the active path") {
  const AlignmentModel m = gradcheck_model(33);
  const PairedBatch pb = random_batch(33);

  // alpha_latent = 0: embedder blocks receive exactly zero
  const auto [loss, g] = backward(m, pb, {1.0, 1e-3, 0.0});
  (void)loss;
  for (double v : g.W_f.data) CHECK(v == 0.0);
  for (double v : g.b_f.data) CHECK(v == 0.0);
  bool a_nonzero = false;
  for (double v : g.A.data) a_nonzero = a_nonzero || v != 0.0;
  CHECK(a_nonzero);
}

TEST_CASE("finite-difference gradient verification") {
  SUBCASE("quadratic-only configuration is near machine precision") {
    const AlignmentModel m = gradcheck_model(34);
    const PairedBatch pb = random_batch(34);
    CHECK(finite_diff_check(m, pb, {1.0, 0.0, 0.0}, 1e-5) < 1e-7);
  }
  SUBCASE("full default coefficients pass the 1e-5 gate") {
    const AlignmentModel m = gradcheck_model(35);
    const PairedBatch pb = random_batch(35);
    CHECK(finite_diff_check(m, pb, LossCoeffs{}, 1e-5) < 1e-5);
  }
  SUBCASE("per-block report covers every trainable block") {
    const AlignmentModel m = gradcheck_model(36);
    const PairedBatch pb = random_batch(36);
    const auto per_block = finite_diff_check_per_block(m, pb, LossCoeffs{}, 1e-5);
    REQUIRE(per_block.size() == 6);
    CHECK(per_block[0].first == "A");
    CHECK(per_block[5].first == "b_f");
    for (const auto& [name, err] : per_block) {
      CAPTURE(name);
      CHECK(err < 1e-5);
    }
  }
  SUBCASE("eps contract") {
    const AlignmentModel m = gradcheck_model(37);
    const PairedBatch pb = random_batch(37);
    CHECK_THROWS_AS(finite_diff_check(m, pb, LossCoeffs{}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(finite_diff_check(m, pb, LossCoeffs{}, 1e-8), std::invalid_argument);
  }
}
