#include "actuforge/exact_cost.hpp"

#include <algorithm>
#include <climits>
#include <cmath>

#include "actuforge/errors.hpp"

namespace actuforge {
namespace {
// Leaves headroom for sums of up to 2^26 maximal terms below 2^127.
constexpr int kMaxSpanBits = 100;
}  // namespace

CostScale CostScale::for_values(std::span<const double> values) {
  int lowest = INT_MAX;
  int highest = INT_MIN;
  for (double v : values) {
    if (v == 0.0) continue;
    if (!std::isfinite(v)) throw SolverError("non-finite cost coefficient");
    int e = 0;
    (void)std::frexp(v, &e);
    lowest = std::min(lowest, e - 53);
    highest = std::max(highest, e);
  }
  if (lowest == INT_MAX) return CostScale(0, true);
  if (highest - lowest > kMaxSpanBits) return CostScale(highest - kMaxSpanBits, false);
  return CostScale(lowest, true);
}

CostUnits CostScale::to_units(double value) const {
  const double scaled = std::ldexp(value, -exponent_);
  const double rounded = std::nearbyint(scaled);
  if (exact_ && rounded != scaled) throw SolverError("cost coefficient not representable at scale");
  if (!(std::abs(rounded) < std::ldexp(1.0, 126))) throw SolverError("cost coefficient overflow");
  return static_cast<CostUnits>(rounded);
}

double CostScale::to_double(CostUnits units) const {
  return std::ldexp(static_cast<double>(units), exponent_);
}

}  // namespace actuforge
