#include "kae/detection.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "kae/errors.hpp"
#include "kae/random.hpp"

namespace kae {
namespace {

double sq_dist(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

void require_k(std::size_t k, std::size_t n, const char* who) {
  if (k > n) {
    throw ConfigError(std::string(who) + ": requested " + std::to_string(k) +
                      " keypoints from a cloud of " + std::to_string(n));
  }
}

void push(HardKeypoints& out, std::span<const Point3> cloud, std::size_t idx, double score) {
  out.indices.push_back(idx);
  out.points.push_back(cloud[idx]);
  out.scores.push_back(score);
}

}  // namespace

std::vector<double> point_scores(const Tensor& probabilities) {
  if (probabilities.dim() != 2) {
    throw ShapeError("point_scores: expected [k,N], got " + shape_str(probabilities.shape()));
  }
  const std::size_t k = probabilities.size(0), n = probabilities.size(1);
  std::vector<double> scores(n, -std::numeric_limits<double>::infinity());
  const auto d = probabilities.data();
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < n; ++j) scores[j] = std::max(scores[j], d[i * n + j]);
  return scores;
}

HardKeypoints nms_select(std::span<const Point3> cloud, std::span<const double> scores,
                         std::size_t k, const NmsConfig& config) {
  const std::size_t n = cloud.size();
  if (scores.size() != n) {
    throw ShapeError("nms_select: " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(n) + " points");
  }
  require_k(k, n, "nms_select");
  if (!(config.radius >= 0.0)) throw ConfigError("nms_select: radius must be >= 0");

  // Stable sort keeps lower indices first among equal scores.
  std::vector<std::size_t> ranked(n);
  std::iota(ranked.begin(), ranked.end(), std::size_t{0});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  HardKeypoints out;
  std::vector<bool> taken(n, false);
  double radius = config.radius;

  auto greedy_pass = [&]() {
    const double r2 = radius * radius;
    for (std::size_t idx : ranked) {
      if (out.size() == k) return;
      if (taken[idx]) continue;
      bool suppressed = false;
      for (const auto& p : out.points) {
        if (sq_dist(p, cloud[idx]) < r2) {
          suppressed = true;
          break;
        }
      }
      if (suppressed) continue;
      taken[idx] = true;
      push(out, cloud, idx, scores[idx]);
    }
  };

  greedy_pass();
  out.primary_count = out.size();
  if (out.size() < k && config.fallback == NmsFallback::kShrinkRadius) {
    while (out.size() < k && radius > 1e-12) {
      radius *= 0.5;
      greedy_pass();
    }
  }
  for (std::size_t idx : ranked) {
    if (out.size() == k) break;
    if (taken[idx]) continue;
    taken[idx] = true;
    push(out, cloud, idx, scores[idx]);
  }
  return out;
}

HardKeypoints fps_select(std::span<const Point3> cloud, std::size_t k, std::size_t start_index) {
  const std::size_t n = cloud.size();
  require_k(k, n, "fps_select");
  HardKeypoints out;
  if (k == 0) return out;
  if (start_index >= n) throw ConfigError("fps_select: start index out of range");

  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  std::size_t current = start_index;
  while (true) {
    taken[current] = true;
    push(out, cloud, current, 0.0);
    if (out.size() == k) break;
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      nearest[j] = std::min(nearest[j], sq_dist(cloud[j], cloud[current]));
      if (!taken[j] && nearest[j] > best_d) {
        best_d = nearest[j];
        best = j;
      }
    }
    current = best;
  }
  out.scores.clear();
  out.primary_count = out.size();
  return out;
}

HardKeypoints random_select(std::span<const Point3> cloud, std::size_t k, std::uint64_t seed) {
  const std::size_t n = cloud.size();
  require_k(k, n, "random_select");
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  auto rng = make_rng(seed, Stream::kDetect);
  HardKeypoints out;
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
    push(out, cloud, pool[i], 0.0);
  }
  out.scores.clear();
  out.primary_count = out.size();
  return out;
}

}  // namespace kae
