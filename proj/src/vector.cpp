#include "stylefuse/vector.hpp"

#include <cmath>
#include <string>

#include "stylefuse/error.hpp"

namespace stylefuse {
namespace {

template <typename T>
void require_finite(std::span<const T> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(Errc::kNonFinite, "non-finite coordinate at index " + std::to_string(i));
    }
  }
}

template <typename T>
std::vector<float> normalized_copy(std::span<const T> values) {
  require_finite(values);
  if (values.empty()) throw Error(Errc::kZeroVector, "empty vector");
  double sum = 0.0;
  for (T v : values) sum += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sum);
  if (!(norm > kZeroNormThreshold)) {
    throw Error(Errc::kZeroVector, "vector norm " + std::to_string(norm) + " is degenerate");
  }
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(values[i]) / norm);
  }
  return out;
}

}  // namespace

Embedding::Embedding(std::vector<float> values) : values_(std::move(values)) {
  require_finite(std::span<const float>(values_));
}

UnitVector UnitVector::from_unit(std::span<const float> values) {
  require_finite(values);
  const double norm = l2_norm(values);
  if (std::abs(norm - 1.0) > 1e-5) {
    throw Error(Errc::kInvalidArgument, "vector norm " + std::to_string(norm) + " is not unit");
  }
  return UnitVector(std::vector<float>(values.begin(), values.end()));
}

UnitVector normalize(std::span<const float> values) { return UnitVector(normalized_copy(values)); }

UnitVector normalize(std::span<const double> values) { return UnitVector(normalized_copy(values)); }

UnitVector normalize(const Embedding& v) { return normalize(v.values()); }

double dot(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::kDimensionMismatch,
                "dot of dims " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  }
  return sum;
}

double dot(const UnitVector& a, const UnitVector& b) { return dot(a.values(), b.values()); }

double l2_norm(std::span<const float> values) {
  double sum = 0.0;
  for (float v : values) sum += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sum);
}

}  // namespace stylefuse
