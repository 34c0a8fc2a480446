#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "takead/diffnum/random.hpp"
#include "takead/expert/expert.hpp"

namespace takead::policy {

inline constexpr std::size_t kTrajDims = 2 * expert::kPlanWaypoints;  // 12
using TrajVec = std::array<double, kTrajDims>;

inline TrajVec flatten(const expert::Trajectory& t) {
  TrajVec v{};
  for (std::size_t i = 0; i < t.size(); ++i) {
    v[2 * i] = t[i].x;
    v[2 * i + 1] = t[i].y;
  }
  return v;
}

inline expert::Trajectory unflatten(const TrajVec& v) {
  expert::Trajectory t{};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = {v[2 * i], v[2 * i + 1]};
  return t;
}

inline double squared_distance(const TrajVec& a, const TrajVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kTrajDims; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Mean per-waypoint Euclidean distance, in meters.
inline double mean_waypoint_distance(const TrajVec& a, const TrajVec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < expert::kPlanWaypoints; ++i)
    s += std::hypot(a[2 * i] - b[2 * i], a[2 * i + 1] - b[2 * i + 1]);
  return s / static_cast<double>(expert::kPlanWaypoints);
}

struct TrajectoryVocabulary {
  std::vector<TrajVec> centers;

  std::size_t size() const { return centers.size(); }

  std::uint64_t hash() const {
    std::uint64_t h = fnv1a("traj-vocab", 10);
    for (const auto& c : centers)
      for (double x : c) {
        unsigned char b[8];
        std::uint64_t bits;
        std::memcpy(&bits, &x, 8);
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        h = fnv1a(b, 8, h);
      }
    return h;
  }

  std::size_t nearest(const TrajVec& t) const {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < centers.size(); ++j) {
      const double d = squared_distance(centers[j], t);
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    return best;
  }
};

struct KMeansResult {
  TrajectoryVocabulary vocab;
  std::vector<double> cost_history;  // within-cluster cost after each iteration
  std::vector<int> assignment;
  int iterations = 0;
};

inline double clustering_cost(const std::vector<TrajVec>& data, const std::vector<TrajVec>& centers,
                              const std::vector<int>& assign) {
  double c = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) c += squared_distance(data[i], centers[static_cast<std::size_t>(assign[i])]);
  return c;
}

// Lloyd's algorithm with k-means++ seeding. Stops when fewer than 0.1% of
// assignments change or after max_iter iterations.
inline KMeansResult kmeans(const std::vector<TrajVec>& data, std::size_t k, std::uint64_t seed, int max_iter = 100) {
  if (k == 0) throw std::invalid_argument("build_vocabulary: k must be > 0");
  {
    std::vector<TrajVec> uniq = data;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    if (uniq.size() < k)
      throw std::invalid_argument("build_vocabulary: " + std::to_string(uniq.size()) + " distinct trajectories for k = " +
                                  std::to_string(k));
  }
  const std::size_t n = data.size();
  Rng rng(mix_seed(seed, 0x6b6d));
  std::vector<TrajVec> centers;
  centers.push_back(data[rng.below(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(data[i], centers[0]);
  while (centers.size() < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    double r = rng.uniform() * total;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (d2[i] <= 0.0) continue;
      pick = i;
      r -= d2[i];
      if (r <= 0.0) break;
    }
    centers.push_back(data[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(data[i], centers.back()));
  }

  KMeansResult out;
  std::vector<int> assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        const double d = squared_distance(data[i], centers[j]);
        if (d < bd) {
          bd = d;
          best = static_cast<int>(j);
        }
      }
      if (best != assign[i]) ++changed;
      assign[i] = best;
    }
    std::vector<TrajVec> sum(k, TrajVec{});
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto j = static_cast<std::size_t>(assign[i]);
      for (std::size_t d = 0; d < kTrajDims; ++d) sum[j][d] += data[i][d];
      ++count[j];
    }
    for (std::size_t j = 0; j < k; ++j)
      if (count[j] > 0)
        for (std::size_t d = 0; d < kTrajDims; ++d) centers[j][d] = sum[j][d] / static_cast<double>(count[j]);
    out.cost_history.push_back(clustering_cost(data, centers, assign));
    out.iterations = it + 1;
    // Empty clusters move to the point farthest from its current center.
    for (std::size_t j = 0; j < k; ++j) {
      if (count[j] > 0) continue;
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = squared_distance(data[i], centers[static_cast<std::size_t>(assign[i])]);
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      centers[j] = data[far];
      changed = n;  // keep iterating
    }
    if (static_cast<double>(changed) < 0.001 * static_cast<double>(n)) break;
  }
  out.vocab.centers = std::move(centers);
  out.assignment = std::move(assign);
  return out;
}

inline TrajectoryVocabulary build_vocabulary(const std::vector<TrajVec>& demos, std::size_t k, std::uint64_t seed) {
  return kmeans(demos, k, seed).vocab;
}

inline std::string vocabulary_ndjson(const TrajectoryVocabulary& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    nlohmann::json j;
    j["index"] = i;
    j["traj"] = v.centers[i];
    os << j.dump() << '\n';
  }
  return os.str();
}

inline void save_vocabulary(const std::string& path, const TrajectoryVocabulary& v) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write vocabulary: " + path);
  f << vocabulary_ndjson(v);
}

inline TrajectoryVocabulary parse_vocabulary(std::istream& in, const std::string& where = "vocabulary") {
  TrajectoryVocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("index").get<std::size_t>() != v.size()) throw std::invalid_argument("index out of sequence");
      const auto t = j.at("traj").get<std::vector<double>>();
      if (t.size() != kTrajDims) throw std::invalid_argument("expected 12 values");
      TrajVec c{};
      std::copy(t.begin(), t.end(), c.begin());
      v.centers.push_back(c);
    } catch (const std::exception& e) {
      throw std::invalid_argument(where + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (v.size() == 0) throw std::invalid_argument(where + ": empty vocabulary");
  return v;
}

inline TrajectoryVocabulary load_vocabulary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read vocabulary: " + path);
  return parse_vocabulary(f, path);
}

}  // namespace takead::policy
