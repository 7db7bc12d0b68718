#pragma once

#include <span>

namespace actuforge {

/// Fixed-point integer cost. Every double coefficient of a model is an
/// integer multiple of 2^exponent, so sums and comparisons of costs are
/// exact and independent of summation order.
using CostUnits = __int128;

class CostScale {
 public:
  /// Picks the coarsest exponent at which every value is representable.
  /// When the values span too many binary orders, the smallest ones are
  /// rounded and `exact()` reports false.
  static CostScale for_values(std::span<const double> values);
  static CostScale with_exponent(int exponent) { return CostScale(exponent, true); }

  CostUnits to_units(double value) const;
  double to_double(CostUnits units) const;

  int exponent() const { return exponent_; }
  bool exact() const { return exact_; }

 private:
  CostScale(int exponent, bool exact) : exponent_(exponent), exact_(exact) {}

  int exponent_ = 0;
  bool exact_ = true;
};

}  // namespace actuforge
