#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "kae/point_cloud.hpp"
#include "kae/tensor.hpp"

namespace kae {

// Points picked out of a cloud by index.
struct HardKeypoints {
  std::vector<std::size_t> indices;
  std::vector<Point3> points;  // points[i] == cloud[indices[i]]
  std::vector<double> scores;  // empty for selectors without scores
  // Number of leading entries chosen before any NMS fallback kicked in.
  std::size_t primary_count = 0;

  std::size_t size() const { return indices.size(); }
};

enum class NmsFallback { kTopUp, kShrinkRadius };

struct NmsConfig {
  double radius = 0.1;
  NmsFallback fallback = NmsFallback::kTopUp;
};

// score_j = max_i D_ij for D [k,N].
std::vector<double> point_scores(const Tensor& probabilities);

// Greedy NMS: take the best unsuppressed point (ties to the lower index),
// suppress every point closer than the radius, repeat. If candidates run out
// before k, top-up takes the best remaining points regardless of distance;
// shrink-radius halves the radius and resumes from the current selection.
// radius == 0 degenerates to plain top-k. Throws ConfigError if k > N.
HardKeypoints nms_select(std::span<const Point3> cloud, std::span<const double> scores,
                         std::size_t k, const NmsConfig& config = {});

// Farthest point sampling from start_index; ties to the lower index.
HardKeypoints fps_select(std::span<const Point3> cloud, std::size_t k, std::size_t start_index = 0);

// k distinct uniformly drawn indices.
HardKeypoints random_select(std::span<const Point3> cloud, std::size_t k, std::uint64_t seed);

}  // namespace kae
