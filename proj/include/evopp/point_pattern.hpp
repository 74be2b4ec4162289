#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace evopp {

// Strictly increasing event times on (0, horizon]. Times are in hours
// throughout the library; ties are rejected at construction.
class PointPattern {
 public:
  PointPattern() = default;
  PointPattern(std::vector<double> times, double horizon);

  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] std::size_t size() const { return times_.size(); }
  [[nodiscard]] bool empty() const { return times_.empty(); }
  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] double operator[](std::size_t i) const { return times_[i]; }

  // Number of events in the half-open window (a, b].
  [[nodiscard]] std::size_t count_in(double a, double b) const;

  // Events strictly before t, as a view into the sorted times.
  [[nodiscard]] std::span<const double> history_before(double t) const;

 private:
  std::vector<double> times_;
  double horizon_ = 1.0;
};

}  // namespace evopp
