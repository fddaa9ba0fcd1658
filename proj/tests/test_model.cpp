#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "neuralign/model.hpp"

using namespace neuralign;

namespace {

AlignmentModel small_model(std::uint64_t seed = 3) {
  return init_model({6, 5, 3, 4, 0}, RngState(seed, 0));
}

}  // namespace

TEST_CASE("init_model shapes and determinism") {
  const Dims dims{2, 3, 1, 2, 0};
  const AlignmentModel m = init_model(dims, RngState(1, 0));
  m.validate_shapes();
  CHECK(m.A.rows == 2);
  CHECK(m.A.cols == 1);
  CHECK(m.B.rows == 1);
  CHECK(m.B.cols == 3);
  CHECK(m.b_diff.cols == 2);
  CHECK(m.W_f.rows == 1);
  CHECK(m.W_dec.rows == 3);
  CHECK(m.W_dec.cols == 2);
  for (double v : m.b_diff.data) CHECK(v == 0.0);
  for (double v : m.b_f.data) CHECK(v == 0.0);

  const AlignmentModel m2 = init_model(dims, RngState(1, 0));
  CHECK(bits_equal(m.A, m2.A));
  CHECK(bits_equal(m.B, m2.B));
  CHECK(bits_equal(m.W_diff, m2.W_diff));
  CHECK(bits_equal(m.W_f, m2.W_f));
  CHECK(bits_equal(m.W_dec, m2.W_dec));
}

TEST_CASE("init_model fan-in scaling") {
  const Dims dims{400, 5, 8, 4, 0};
  const AlignmentModel m = init_model(dims, RngState(17, 0));
  double var = 0.0;
  for (double v : m.A.data) var += v * v;
  var /= double(m.A.size());
  const double want = 1.0 / std::sqrt(400.0);
  CHECK(std::abs(std::sqrt(var) - want) < 0.1 * want);
}

TEST_CASE("encode/decode/btm") {
  SUBCASE("identity encode") {
    AlignmentModel m = init_model({3, 4, 3, 2, 0}, RngState(2, 0));
    m.A = Matrix::identity(3);
    const Matrix f(1, 3, {1.5, -2.0, 0.25});
    CHECK(bits_equal(encode_latent(m, f), f));
  }
  SUBCASE("zero input, zero latent") {
    const AlignmentModel m = small_model();
    const Matrix z = encode_latent(m, Matrix(1, 6));
    for (double v : z.data) CHECK(v == 0.0);
    const Matrix out = decode_latent(m, Matrix(1, 3));
    for (double v : out.data) CHECK(v == 0.0);
    const Matrix y = btm_apply(m, Matrix(1, 6));
    for (double v : y.data) CHECK(v == 0.0);
  }
  SUBCASE("identity decode") {
    AlignmentModel m = init_model({2, 3, 3, 2, 0}, RngState(2, 1));
    m.B = Matrix::identity(3);
    const Matrix z(1, 3, {4, 5, 6});
    CHECK(bits_equal(decode_latent(m, z), z));
  }
  SUBCASE("random encode matches the oracle product") {
    const AlignmentModel m = small_model();
    RngState rng(5, 5);
    const Matrix f = testutil::random_matrix(rng, 2, 6);
    CHECK(bits_equal(encode_latent(m, f), testutil::matmul_oracle(f, m.A)));
  }
  SUBCASE("encode-then-decode equals F (A B)") {
    const AlignmentModel m = small_model();
    RngState rng(6, 6);
    const Matrix f = testutil::random_matrix(rng, 3, 6);
    const Matrix two_step = decode_latent(m, encode_latent(m, f));
    const Matrix one_step = matmul(f, compose_btm(m));
    CHECK(testutil::max_abs_diff(two_step, one_step) < 1e-10);
  }
  SUBCASE("identity transfer") {
    AlignmentModel m = init_model({3, 3, 3, 2, 0}, RngState(2, 2));
    m.A = Matrix::identity(3);
    m.B = Matrix::identity(3);
    const Matrix f(1, 3, {7, 8, 9});
    CHECK(bits_equal(btm_apply(m, f), f));
  }
  SUBCASE("dimension mismatch") {
    const AlignmentModel m = small_model();
    CHECK_THROWS_AS(encode_latent(m, Matrix(1, 7)), std::invalid_argument);
    CHECK_THROWS_AS(decode_latent(m, Matrix(1, 4)), std::invalid_argument);
  }
}

TEST_CASE("compose_btm") {
  SUBCASE("rank-1 outer product") {
    AlignmentModel m = init_model({2, 2, 1, 2, 0}, RngState(3, 0));
    m.A = Matrix(2, 1, {1, 2});
    m.B = Matrix(1, 2, {3, 4});
    const Matrix c = compose_btm(m);
    CHECK(c.at(0, 0) == 3.0);
    CHECK(c.at(0, 1) == 4.0);
    CHECK(c.at(1, 0) == 6.0);
    CHECK(c.at(1, 1) == 8.0);
  }
  SUBCASE("identity factors") {
    AlignmentModel m = init_model({3, 3, 3, 2, 0}, RngState(3, 1));
    m.A = Matrix::identity(3);
    m.B = Matrix::identity(3);
    CHECK(bits_equal(compose_btm(m), Matrix::identity(3)));
  }
  SUBCASE("numerical rank bounded by h") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const AlignmentModel m = init_model({7, 6, 2, 3, 0}, RngState(seed, 9));
      const auto sv = testutil::singular_values(compose_btm(m));
      REQUIRE(sv.size() >= 3);
      CHECK(sv[2] < 1e-8);  // (h+1)-th singular value
    }
  }
}

TEST_CASE("stimulus_difference") {
  const Matrix e1(1, 2, {1, 0});
  const Matrix e2(1, 2, {0, 1});
  const Matrix d = stimulus_difference(e1, e2);
  CHECK(d.at(0, 0) == 1.0);
  CHECK(d.at(0, 1) == -1.0);

  const Matrix zero = stimulus_difference(e1, e1);
  for (double v : zero.data) CHECK(v == 0.0);

  // antisymmetry
  const Matrix r = stimulus_difference(e2, e1);
  CHECK(r.at(0, 0) == -d.at(0, 0));
  CHECK(r.at(0, 1) == -d.at(0, 1));

  CHECK_THROWS_AS(stimulus_difference(e1, Matrix(1, 3)), std::invalid_argument);
}

TEST_CASE("film_modulate") {
  SUBCASE("shared stimulus with zero bias is an exact identity") {
    const AlignmentModel m = small_model();  // b_diff is zero after init
    RngState rng(8, 1);
    const Matrix z = testutil::random_matrix(rng, 2, 3);
    const Matrix e_diff(2, 4);
    CHECK(bits_equal(film_modulate(m, z, e_diff), z));
  }
  SUBCASE("zero latent passes the shift through") {
    AlignmentModel m = small_model();
    RngState rng(8, 2);
    m.b_diff = testutil::random_matrix(rng, 1, 6);
    const Matrix z(2, 3);
    const Matrix out = film_modulate(m, z, Matrix(2, 4));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        CHECK(out.at(i, j) == m.b_diff.at(0, 3 + j));
  }
  SUBCASE("random instance matches a hand-rolled oracle") {
    AlignmentModel m = small_model();
    RngState rng(8, 3);
    m.b_diff = testutil::random_matrix(rng, 1, 6);
    const Matrix z = testutil::random_matrix(rng, 3, 3);
    const Matrix e_diff = testutil::random_matrix(rng, 3, 4);
    const Matrix out = film_modulate(m, z, e_diff);

    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        double gamma = m.b_diff.at(0, j), beta = m.b_diff.at(0, 3 + j);
        for (std::size_t t = 0; t < 4; ++t) {
          gamma += e_diff.at(i, t) * m.W_diff.at(t, j);
          beta += e_diff.at(i, t) * m.W_diff.at(t, 3 + j);
        }
        CHECK(out.at(i, j) ==
              doctest::Approx((1.0 + gamma) * z.at(i, j) + beta).epsilon(1e-12));
      }
  }
}

TEST_CASE("functional_embed") {
  AlignmentModel m = small_model();
  SUBCASE("identity weights") {
    m.W_f = Matrix::identity(3);
    m.b_f = Matrix(1, 3);
    RngState rng(9, 0);
    const Matrix z = testutil::random_matrix(rng, 2, 3);
    CHECK(bits_equal(functional_embed(m, z), z));
  }
  SUBCASE("zero latent returns the bias") {
    RngState rng(9, 1);
    m.b_f = testutil::random_matrix(rng, 1, 3);
    const Matrix out = functional_embed(m, Matrix(2, 3));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(out.at(i, j) == m.b_f.at(0, j));
  }
  SUBCASE("affine property") {
    RngState rng(9, 2);
    m.b_f = testutil::random_matrix(rng, 1, 3);
    const Matrix z1 = testutil::random_matrix(rng, 1, 3);
    const Matrix z2 = testutil::random_matrix(rng, 1, 3);
    const Matrix lhs = msub(functional_embed(m, madd(z1, z2)), functional_embed(m, z2));
    const Matrix rhs = msub(functional_embed(m, z1), functional_embed(m, Matrix(1, 3)));
    CHECK(testutil::max_abs_diff(lhs, rhs) < 1e-12);
  }
}

TEST_CASE("proxy_decode") {
  const AlignmentModel m = small_model();
  SUBCASE("zero input") {
    const Matrix out = proxy_decode(m, Matrix(2, 5));
    for (double v : out.data) CHECK(v == 0.0);
  }
  SUBCASE("matches oracle") {
    RngState rng(10, 0);
    const Matrix f = testutil::random_matrix(rng, 3, 5);
    CHECK(bits_equal(proxy_decode(m, f), testutil::matmul_oracle(f, m.W_dec)));
  }
}

TEST_CASE("forward passes are linear in their primary input") {
  const AlignmentModel m = small_model(11);
  RngState rng(12, 0);
  const double alpha = 1.7;

  auto check_linear = [&](auto&& f, const Matrix& x) {
    const Matrix zero(x.rows, x.cols);
    const Matrix f0 = f(zero);
    const Matrix lhs = msub(f(mscale(x, alpha)), f0);
    const Matrix rhs = mscale(msub(f(x), f0), alpha);
    CHECK(testutil::max_abs_diff(lhs, rhs) < 1e-10);
  };

  check_linear([&](const Matrix& x) { return encode_latent(m, x); },
               testutil::random_matrix(rng, 2, 6));
  check_linear([&](const Matrix& x) { return decode_latent(m, x); },
               testutil::random_matrix(rng, 2, 3));
  check_linear([&](const Matrix& x) { return btm_apply(m, x); },
               testutil::random_matrix(rng, 2, 6));
  check_linear([&](const Matrix& x) { return functional_embed(m, x); },
               testutil::random_matrix(rng, 2, 3));
  check_linear([&](const Matrix& x) { return proxy_decode(m, x); },
               testutil::random_matrix(rng, 2, 5));
  const Matrix e_diff = testutil::random_matrix(rng, 2, 4);
  check_linear([&](const Matrix& x) { return film_modulate(m, x, e_diff); },
               testutil::random_matrix(rng, 2, 3));
}

TEST_CASE("inference path ignores mapper and embedder") {
  AlignmentModel m = small_model(13);
  RngState rng(13, 1);
  const Matrix f = testutil::random_matrix(rng, 3, 6);
  const Matrix before = btm_apply(m, f);
  const Matrix composed_before = compose_btm(m);

  m.W_diff = Matrix(4, 6);
  m.b_diff = Matrix(1, 6);
  m.W_f = Matrix(3, 3);
  m.b_f = Matrix(1, 3);
  CHECK(bits_equal(btm_apply(m, f), before));
  CHECK(bits_equal(compose_btm(m), composed_before));
}

TEST_CASE("param_count reproduces the published numbers") {
  const ParamCount big = param_count({15724, 14278, 4096, 768, 0});
  CHECK(big.btm == 122888192LL);
  CHECK(big.mapper == 6299648LL);     // a*2h + 2h at a=768, h=4096
  CHECK(big.embedder == 16781312LL);  // h^2 + h at h=4096
  CHECK(big.trainable_total == big.btm + big.mapper + big.embedder);
  CHECK(big.decoder_frozen == 14278LL * 768LL);

  const ParamCount tiny = param_count({2, 3, 1, 2, 0});
  CHECK(tiny.btm == 2 * 1 + 1 * 3);
  CHECK(tiny.mapper == 2 * 2 + 2);
  CHECK(tiny.embedder == 1 + 1);
}
