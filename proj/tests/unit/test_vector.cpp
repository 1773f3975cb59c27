#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "stylefuse/error.hpp"
#include "stylefuse/vector.hpp"

using namespace stylefuse;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::kInvalidArgument;  // sentinel: nothing thrown
}

}  // namespace

TEST(Vector, NormalizeYieldsUnitLength) {
  const std::vector<float> v{3.0f, 4.0f};
  const UnitVector u = normalize(std::span<const float>(v));
  EXPECT_NEAR(u.values()[0], 0.6f, 1e-7);
  EXPECT_NEAR(u.values()[1], 0.8f, 1e-7);
  EXPECT_NEAR(l2_norm(u.values()), 1.0, 1e-7);
}

TEST(Vector, ZeroVectorRejected) {
  const std::vector<float> z(8, 0.0f);
  EXPECT_EQ(code_of([&] { normalize(std::span<const float>(z)); }), Errc::kZeroVector);
}

TEST(Vector, NonFiniteEmbeddingRejected) {
  EXPECT_EQ(code_of([] { Embedding({1.0f, std::numeric_limits<float>::quiet_NaN()}); }),
            Errc::kNonFinite);
  EXPECT_EQ(code_of([] { Embedding({std::numeric_limits<float>::infinity()}); }),
            Errc::kNonFinite);
}

TEST(Vector, FromUnitChecksNorm) {
  const std::vector<float> ok{1.0f, 0.0f};
  EXPECT_NO_THROW(UnitVector::from_unit(ok));
  const std::vector<float> bad{1.1f, 0.0f};
  EXPECT_THROW(UnitVector::from_unit(bad), Error);
}

TEST(Vector, DotAccumulatesInDouble) {
  std::vector<float> a(1000, 1e-3f), b(1000, 1.0f);
  EXPECT_NEAR(dot(a, b), 1.0, 1e-6);
}

TEST(Error, MessageCarriesCodeName) {
  const Error e(Errc::kUnknownItem, "x");
  EXPECT_STREQ(e.what(), "UnknownItem: x");
  EXPECT_EQ(e.detail(), "x");
}
