#include "evopp/point_pattern.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "evopp/errors.hpp"

namespace evopp {

PointPattern::PointPattern(std::vector<double> times, double horizon)
    : times_(std::move(times)), horizon_(horizon) {
  if (!std::isfinite(horizon_) || horizon_ <= 0.0) {
    throw DataError("point pattern horizon must be positive and finite");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    const double t = times_[i];
    if (!std::isfinite(t) || t <= 0.0 || t > horizon_) {
      std::ostringstream msg;
      msg << "event " << i << " at t=" << t << " outside (0, " << horizon_ << "]";
      throw DataError(msg.str());
    }
    if (i > 0 && times_[i - 1] >= t) {
      std::ostringstream msg;
      msg << "event times must be strictly increasing; events " << i - 1 << " and " << i
          << " are " << times_[i - 1] << ", " << t;
      throw DataError(msg.str());
    }
  }
}

std::size_t PointPattern::count_in(double a, double b) const {
  if (!(a <= b)) {
    throw std::invalid_argument("count_in requires a <= b");
  }
  auto lo = std::upper_bound(times_.begin(), times_.end(), a);
  auto hi = std::upper_bound(times_.begin(), times_.end(), b);
  return static_cast<std::size_t>(hi - lo);
}

std::span<const double> PointPattern::history_before(double t) const {
  auto hi = std::lower_bound(times_.begin(), times_.end(), t);
  return {times_.data(), static_cast<std::size_t>(hi - times_.begin())};
}

}  // namespace evopp
