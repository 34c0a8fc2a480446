#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace takead::policy {

enum class ControlGroup : int { Throttle = 0, Brake, Steer };
inline constexpr std::array<std::string_view, 3> kControlGroupNames{"throttle", "brake", "steer"};
inline std::string_view to_string(ControlGroup g) { return kControlGroupNames[static_cast<std::size_t>(g)]; }

struct ControlIndices {
  int throttle = 0;
  int brake = 0;
  int steer = 0;

  int operator[](ControlGroup g) const {
    return g == ControlGroup::Throttle ? throttle : g == ControlGroup::Brake ? brake : steer;
  }
  bool operator==(const ControlIndices&) const = default;
};

struct ControlVocabulary {
  std::vector<double> throttle{0.0, 0.3, 0.5, 0.7, 1.0};
  std::vector<double> brake{0.0, 1.0};
  std::vector<double> steer{-1.0, -0.6, -0.3, -0.1, 0.0, 0.1, 0.3, 0.6, 1.0};

  const std::vector<double>& values(ControlGroup g) const {
    return g == ControlGroup::Throttle ? throttle : g == ControlGroup::Brake ? brake : steer;
  }
  std::size_t group_size(ControlGroup g) const { return values(g).size(); }
  // Offset of a group inside the concatenated N_c token list.
  std::size_t offset(ControlGroup g) const {
    switch (g) {
      case ControlGroup::Throttle: return 0;
      case ControlGroup::Brake: return throttle.size();
      case ControlGroup::Steer: return throttle.size() + brake.size();
    }
    return 0;
  }
  std::size_t size() const { return throttle.size() + brake.size() + steer.size(); }

  void validate() const {
    auto check = [](const std::vector<double>& v, std::string_view name, double lo, double hi) {
      if (v.size() < 2) throw std::invalid_argument("control_vocab." + std::string(name) + ": need >= 2 values");
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (!(v[i] >= lo && v[i] <= hi))
          throw std::invalid_argument("control_vocab." + std::string(name) + ": value out of range");
        if (i > 0 && !(v[i] > v[i - 1]))
          throw std::invalid_argument("control_vocab." + std::string(name) + ": must be strictly increasing");
      }
    };
    check(throttle, "throttle", 0.0, 1.0);
    check(brake, "brake", 0.0, 1.0);
    check(steer, "steer", -1.0, 1.0);
  }
};

// Nearest entry; the lower index wins exact ties.
inline int nearest_index(const std::vector<double>& values, double x) {
  int best = 0;
  double best_d = std::abs(values[0] - x);
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = std::abs(values[i] - x);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace takead::policy
