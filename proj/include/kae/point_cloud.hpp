#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "kae/tensor.hpp"

namespace kae {

using Point3 = std::array<double, 3>;

struct PointCloud {
  std::vector<Point3> points;
  std::optional<std::size_t> label;
  std::string name;

  std::size_t size() const { return points.size(); }
};

// Constant [N,3] tensor view of the points (copied).
Tensor to_tensor(const std::vector<Point3>& points);
std::vector<Point3> to_points(const Tensor& t);

}  // namespace kae
