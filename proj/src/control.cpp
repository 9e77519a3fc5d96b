#include "ngrc_control/control.hpp"

#include <algorithm>

namespace ngrc {

TargetTrajectory TargetTrajectory::periodic(std::vector<double> values, std::size_t phase) {
  if (values.empty()) throw ConfigurationError("periodic target needs at least one value");
  return TargetTrajectory(Periodic{std::move(values), phase});
}

TargetTrajectory TargetTrajectory::piecewise(std::vector<std::pair<long, double>> segments) {
  if (segments.empty() || segments.front().first != 0) {
    throw ConfigurationError("piecewise target must start at iteration 0");
  }
  if (!std::is_sorted(segments.begin(), segments.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; })) {
    throw ConfigurationError("piecewise target segments must be sorted by start iteration");
  }
  return TargetTrajectory(Piecewise{std::move(segments)});
}

double TargetTrajectory::at(long i) const {
  if (i < 0) throw ConfigurationError("target queried at a negative iteration");
  struct Visitor {
    long i;
    double operator()(const Constant& c) const { return c.value; }
    double operator()(const Periodic& p) const {
      return p.values[(static_cast<std::size_t>(i) + p.phase) % p.values.size()];
    }
    double operator()(const Piecewise& p) const {
      // Last segment whose start is <= i.
      auto it = std::upper_bound(p.segments.begin(), p.segments.end(), i,
                                 [](long v, const auto& seg) { return v < seg.first; });
      return std::prev(it)->second;
    }
  };
  return std::visit(Visitor{i}, target_);
}

}  // namespace ngrc
