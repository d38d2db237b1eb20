#include <doctest.h>

#include <cmath>
#include <limits>

#include "fedhpc/errors.hpp"
#include "fedhpc/param_vector.hpp"

using namespace fedhpc;

TEST_CASE("ParamVector construction") {
  CHECK(ParamVector(3).dim() == 3);
  CHECK(ParamVector(2, 1.5)[1] == 1.5);
  CHECK_THROWS_AS(ParamVector(0), DimensionError);
  CHECK_THROWS_AS(ParamVector(std::vector<double>{}), DimensionError);
  CHECK(ParamVector().empty());
}

TEST_CASE("ParamVector arithmetic") {
  const ParamVector a{1.0, 2.0};
  const ParamVector b{3.0, -1.0};
  CHECK(a + b == ParamVector{4.0, 1.0});
  CHECK(a - b == ParamVector{-2.0, 3.0});
  CHECK(2.0 * a == ParamVector{2.0, 4.0});

  ParamVector c = a;
  c.axpy(0.5, b);
  CHECK(c == ParamVector{2.5, 1.5});

  CHECK(mix(ParamVector{0.0}, ParamVector{4.0}, 0.25) == ParamVector{1.0});
  CHECK(mix(a, b, 0.0) == a);
  CHECK(mix(a, b, 1.0) == b);

  CHECK_THROWS_AS(a + ParamVector{1.0}, DimensionError);
  CHECK_THROWS_AS(c.axpy(1.0, ParamVector{1.0, 2.0, 3.0}), DimensionError);
}

TEST_CASE("require_finite rejects NaN and infinity") {
  CHECK_NOTHROW(require_finite(ParamVector{1.0, 2.0}, "ok"));
  CHECK_THROWS_AS(require_finite(ParamVector{std::numeric_limits<double>::quiet_NaN()}, "nan"), NumericError);
  CHECK_THROWS_AS(require_finite(ParamVector{std::numeric_limits<double>::infinity()}, "inf"), NumericError);
}
