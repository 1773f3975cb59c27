#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace stylefuse {

// Norms at or below this are treated as degenerate.
inline constexpr double kZeroNormThreshold = 1e-12;

// Raw encoder output. All coordinates are finite.
class Embedding {
 public:
  explicit Embedding(std::vector<float> values);

  std::span<const float> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }

 private:
  std::vector<float> values_;
};

// An L2-normalized embedding. Only constructible through normalize() or the
// checked from_unit(), so holding one means the norm is 1 within 1e-5.
class UnitVector {
 public:
  static UnitVector from_unit(std::span<const float> values);

  std::span<const float> values() const noexcept { return values_; }
  const float* data() const noexcept { return values_.data(); }
  std::size_t dim() const noexcept { return values_.size(); }

  friend bool operator==(const UnitVector&, const UnitVector&) = default;

 private:
  explicit UnitVector(std::vector<float> values) : values_(std::move(values)) {}

  friend UnitVector normalize(std::span<const double> values);
  friend UnitVector normalize(std::span<const float> values);

  std::vector<float> values_;
};

// Throws Errc::kZeroVector when the norm is <= 1e-12 and Errc::kNonFinite on
// NaN/Inf input.
UnitVector normalize(std::span<const float> values);
UnitVector normalize(std::span<const double> values);
UnitVector normalize(const Embedding& v);

// Double-precision accumulation. Throws kDimensionMismatch on length mismatch.
double dot(std::span<const float> a, std::span<const float> b);
double dot(const UnitVector& a, const UnitVector& b);

double l2_norm(std::span<const float> values);

}  // namespace stylefuse
