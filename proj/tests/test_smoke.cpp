#include <doctest.h>

#include "fraclab/noise.hpp"

TEST_CASE("grid basics") {
  fraclab::TimeGrid g(0.5, 4);
  CHECK(g.horizon() == doctest::Approx(1.5));
}
