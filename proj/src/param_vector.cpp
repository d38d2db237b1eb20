#include "fedhpc/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedhpc/errors.hpp"

namespace fedhpc {

ParamVector::ParamVector(std::size_t dim, double fill) : values_(dim, fill) {
  if (dim == 0) throw DimensionError("ParamVector: dim must be positive");
}

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw DimensionError("ParamVector: dim must be positive");
}

ParamVector::ParamVector(std::initializer_list<double> values) : values_(values) {
  if (values_.empty()) throw DimensionError("ParamVector: dim must be positive");
}

bool ParamVector::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

void ParamVector::axpy(double scale, const ParamVector& other) {
  require_same_dim(*this, other, "axpy");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_dim(*this, other, "operator+=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_dim(*this, other, "operator-=");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double scale) noexcept {
  for (double& x : values_) x *= scale;
  return *this;
}

ParamVector operator+(ParamVector lhs, const ParamVector& rhs) { return lhs += rhs; }
ParamVector operator-(ParamVector lhs, const ParamVector& rhs) { return lhs -= rhs; }
ParamVector operator*(double scale, ParamVector v) { return v *= scale; }

ParamVector mix(const ParamVector& base, const ParamVector& target, double weight) {
  require_same_dim(base, target, "mix");
  ParamVector out = base;
  auto dst = out.values();
  auto src = target.values();
  const double keep = 1.0 - weight;
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = keep * dst[i] + weight * src[i];
  return out;
}

void require_same_dim(const ParamVector& a, const ParamVector& b, std::string_view context) {
  if (a.dim() != b.dim()) {
    throw DimensionError(std::string(context) + ": dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
  }
}

void require_finite(const ParamVector& v, std::string_view context) {
  if (!v.all_finite()) throw NumericError(std::string(context) + ": non-finite parameter value");
}

}  // namespace fedhpc
