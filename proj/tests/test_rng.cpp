#include <doctest.h>

#include "lsmd/rng.hpp"

using lsmd::CounterRng;
using lsmd::normal_icdf;

TEST_CASE("inverse normal cdf hits reference quantiles") {
  CHECK(normal_icdf(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(normal_icdf(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_icdf(0.025) == doctest::Approx(-1.9599639845400545).epsilon(1e-12));
  CHECK(normal_icdf(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normal_icdf(0.3) == doctest::Approx(-0.5244005127080409).epsilon(1e-12));
  // tail branches
  CHECK(normal_icdf(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-12));
  CHECK(normal_icdf(1e-12) == doctest::Approx(-7.034483825301131).epsilon(1e-12));
  // 1 - 1e-10 is not exactly representable; compare at reduced precision
  CHECK(normal_icdf(1.0 - 1e-10) == doctest::Approx(6.361340902404056).epsilon(1e-7));
}

TEST_CASE("counter stream is fixed and keyed") {
  CounterRng a(42);
  CHECK(a.next_u64() == 13679457532755275413ull);
  CHECK(a.next_u64() == 2949826092126892291ull);
  CHECK(a.next_u64() == 5139283748462763858ull);

  CounterRng b(42), c(43);
  CHECK(b.next_u64() == 13679457532755275413ull);
  CHECK(c.next_u64() != 13679457532755275413ull);
}

TEST_CASE("uniforms live strictly inside (0,1), normals have sane moments") {
  CounterRng rng(7);
  double sum = 0.0, sum2 = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = rng.next_uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    double z = normal_icdf(u);
    sum += z;
    sum2 += z * z;
  }
  CHECK(sum / n == doctest::Approx(0.0).epsilon(0.05));
  CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.05));
}
