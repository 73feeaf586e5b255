#include <doctest.h>

#include "gmlp/error.hpp"
#include "gmlp/kernels.hpp"
#include "support.hpp"

using namespace gmlp;

namespace {

// Relative agreement between a backend and the scalar reference.
void check_close(std::span<const double> got, std::span<const double> want, double tol = 1e-12) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(std::abs(got[i] - want[i]) <= tol * std::max(1.0, std::abs(want[i])));
  }
}

void compare_tables(const kernels::KernelTable& k) {
  const kernels::KernelTable& ref = kernels::scalar_table();
  testing::Rng rng(11);
  const std::size_t dims[] = {1, 2, 3, 4, 5, 7, 8, 9, 16, 17, 33};
  for (std::size_t m : dims) {
    for (std::size_t n : dims) {
      for (std::size_t kk : {1ul, 3ul, 8ul, 13ul}) {
        const auto a = testing::random_vector(rng, m * kk);
        const auto b = testing::random_vector(rng, kk * n);
        const auto c0 = testing::random_vector(rng, m * n);
        auto c1 = c0, c2 = c0;
        ref.gemm_nn(m, n, kk, a.data(), b.data(), c1.data());
        k.gemm_nn(m, n, kk, a.data(), b.data(), c2.data());
        check_close(c2, c1);

        const auto at = testing::random_vector(rng, kk * m);
        c1 = c0, c2 = c0;
        ref.gemm_tn(m, n, kk, at.data(), b.data(), c1.data());
        k.gemm_tn(m, n, kk, at.data(), b.data(), c2.data());
        check_close(c2, c1);

        const auto bt = testing::random_vector(rng, n * kk);
        c1 = c0, c2 = c0;
        ref.gemm_nt(m, n, kk, a.data(), bt.data(), c1.data());
        k.gemm_nt(m, n, kk, a.data(), bt.data(), c2.data());
        check_close(c2, c1);
      }
    }
  }
  for (std::size_t n : {0ul, 1ul, 3ul, 4ul, 5ul, 8ul, 15ul, 16ul, 31ul, 100ul}) {
    const auto x = testing::random_vector(rng, n);
    const auto y = testing::random_vector(rng, n);
    std::vector<double> o1(n), o2(n);
    ref.add(n, x.data(), y.data(), o1.data());
    k.add(n, x.data(), y.data(), o2.data());
    check_close(o2, o1, 0.0);
    ref.mul(n, x.data(), y.data(), o1.data());
    k.mul(n, x.data(), y.data(), o2.data());
    check_close(o2, o1, 0.0);
    ref.scale(n, -1.5, x.data(), o1.data());
    k.scale(n, -1.5, x.data(), o2.data());
    check_close(o2, o1, 0.0);
    auto y1 = y, y2 = y;
    ref.axpy(n, 0.25, x.data(), y1.data());
    k.axpy(n, 0.25, x.data(), y2.data());
    check_close(y2, y1);
    CHECK(k.dot(n, x.data(), y.data()) == doctest::Approx(ref.dot(n, x.data(), y.data())).epsilon(1e-12));
    CHECK(k.sum(n, x.data()) == doctest::Approx(ref.sum(n, x.data())).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("scalar gemm matches a hand-computed product") {
  const double a[] = {1, 2, 3, 4, 5, 6};     // 2x3
  const double b[] = {7, 8, 9, 10, 11, 12};  // 3x2
  double c[] = {1, 1, 1, 1};
  kernels::scalar_table().gemm_nn(2, 2, 3, a, b, c);
  CHECK(c[0] == 59);
  CHECK(c[1] == 65);
  CHECK(c[2] == 140);
  CHECK(c[3] == 155);
}

TEST_CASE("every supported backend agrees with the scalar reference") {
  for (kernels::Backend b : kernels::supported_backends()) {
    CAPTURE(kernels::backend_name(b));
    kernels::set_backend(b);
    compare_tables(kernels::active());
  }
}

TEST_CASE("backend selection") {
  CHECK(kernels::backend_supported(kernels::Backend::scalar));
  kernels::set_backend(kernels::Backend::scalar);
  CHECK(kernels::active_backend() == kernels::Backend::scalar);
  for (kernels::Backend b : {kernels::Backend::avx2, kernels::Backend::neon}) {
    if (!kernels::backend_supported(b)) CHECK_THROWS_AS(kernels::set_backend(b), ContractError);
  }
  CHECK(kernels::backend_name(kernels::Backend::avx2) == "avx2");
}

TEST_CASE("model forward agrees across backends") {
  ModelConfig c;
  c.hidden = 24;
  c.spatial_dim = 12;
  c.channel_dim = 40;
  c.frames = 3;
  GraphMLPModel model(c);
  testing::Rng rng(3);
  const Tensor in = testing::random_tensor(rng, {2, 3, 17, 2});
  kernels::set_backend(kernels::Backend::scalar);
  const Tensor ref = forward(in, model);
  for (kernels::Backend b : kernels::supported_backends()) {
    kernels::set_backend(b);
    const Tensor y = forward(in, model);
    CHECK(testing::max_abs_diff(y.data(), ref.data()) < 1e-12);
  }
}
