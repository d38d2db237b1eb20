#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

namespace fedhpc {

/// Flat model parameters. The unit of aggregation and of transfer-size
/// accounting; every arithmetic helper requires matching dimensions.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0);
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::initializer_list<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  bool all_finite() const noexcept;

  // this += scale * other
  void axpy(double scale, const ParamVector& other);
  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double scale) noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

ParamVector operator+(ParamVector lhs, const ParamVector& rhs);
ParamVector operator-(ParamVector lhs, const ParamVector& rhs);
ParamVector operator*(double scale, ParamVector v);

// (1 - weight) * base + weight * target, computed per component.
ParamVector mix(const ParamVector& base, const ParamVector& target, double weight);

// Throws DimensionError naming `context` when dims differ.
void require_same_dim(const ParamVector& a, const ParamVector& b, std::string_view context);

// Throws NumericError naming `context` when any component is NaN or Inf.
void require_finite(const ParamVector& v, std::string_view context);

}  // namespace fedhpc
