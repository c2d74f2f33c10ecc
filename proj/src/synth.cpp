#include <array>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>

#include "kae/data.hpp"
#include "kae/errors.hpp"
#include "kae/random.hpp"

namespace kae {
namespace {

constexpr double kPi = std::numbers::pi;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Point3 on_unit_sphere(Rng& rng) {
  const double z = uniform(rng, -1.0, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * kPi);
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

// Each sampler returns one uniform surface point of a shape centered at the
// origin. All shapes are centrally symmetric, so -p is uniform as well.
struct Sampler {
  virtual ~Sampler() = default;
  virtual Point3 sample(Rng& rng) const = 0;
};

struct SphereSampler final : Sampler {
  Point3 sample(Rng& rng) const override { return on_unit_sphere(rng); }
};

struct BoxSampler final : Sampler {
  Point3 half;
  explicit BoxSampler(Point3 h) : half(h) {}
  Point3 sample(Rng& rng) const override {
    const double ax = half[1] * half[2], ay = half[0] * half[2], az = half[0] * half[1];
    const double pick = uniform(rng, 0.0, ax + ay + az);
    const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
    Point3 p;
    for (int c = 0; c < 3; ++c) p[c] = uniform(rng, -half[c], half[c]);
    p[axis] = uniform(rng) < 0.5 ? -half[axis] : half[axis];
    return p;
  }
};

struct CylinderSampler final : Sampler {
  double radius, half_height;
  CylinderSampler(double r, double h) : radius(r), half_height(h) {}
  Point3 sample(Rng& rng) const override {
    const double side = 2.0 * kPi * radius * 2.0 * half_height;
    const double caps = 2.0 * kPi * radius * radius;
    const double phi = uniform(rng, 0.0, 2.0 * kPi);
    if (uniform(rng, 0.0, side + caps) < side) {
      return {radius * std::cos(phi), radius * std::sin(phi),
              uniform(rng, -half_height, half_height)};
    }
    const double r = radius * std::sqrt(uniform(rng));
    return {r * std::cos(phi), r * std::sin(phi), uniform(rng) < 0.5 ? -half_height : half_height};
  }
};

struct TorusSampler final : Sampler {
  double major, minor;
  TorusSampler(double big, double small) : major(big), minor(small) {}
  Point3 sample(Rng& rng) const override {
    // Area element is proportional to (R + r cos v); rejection-sample v.
    double v = 0.0;
    do {
      v = uniform(rng, 0.0, 2.0 * kPi);
    } while (uniform(rng, 0.0, major + minor) > major + minor * std::cos(v));
    const double u = uniform(rng, 0.0, 2.0 * kPi);
    const double ring = major + minor * std::cos(v);
    return {ring * std::cos(u), ring * std::sin(u), minor * std::sin(v)};
  }
};

struct TwoSpheresSampler final : Sampler {
  double radius, offset;
  TwoSpheresSampler(double r, double c) : radius(r), offset(c) {}
  Point3 sample(Rng& rng) const override {
    // One lobe only; the mirrored partner lands on the other lobe.
    Point3 p = on_unit_sphere(rng);
    return {radius * p[0] + offset, radius * p[1], radius * p[2]};
  }
};

std::unique_ptr<Sampler> make_sampler(ShapeClass shape, bool vary, Rng& rng) {
  switch (shape) {
    case ShapeClass::kSphere:
      return std::make_unique<SphereSampler>();
    case ShapeClass::kBox:
      if (!vary) return std::make_unique<BoxSampler>(Point3{1.0, 0.75, 0.5});
      return std::make_unique<BoxSampler>(
          Point3{uniform(rng, 0.4, 1.0), uniform(rng, 0.4, 1.0), uniform(rng, 0.4, 1.0)});
    case ShapeClass::kCylinder:
      if (!vary) return std::make_unique<CylinderSampler>(0.5, 1.0);
      return std::make_unique<CylinderSampler>(uniform(rng, 0.3, 1.0), uniform(rng, 0.3, 1.0));
    case ShapeClass::kTorus:
      if (!vary) return std::make_unique<TorusSampler>(1.0, 0.35);
      return std::make_unique<TorusSampler>(1.0, uniform(rng, 0.2, 0.5));
    case ShapeClass::kTwoSpheres: {
      if (!vary) return std::make_unique<TwoSpheresSampler>(0.5, 0.75);
      const double r = uniform(rng, 0.35, 0.6);
      return std::make_unique<TwoSpheresSampler>(r, r + uniform(rng, 0.1, 0.5));
    }
  }
  throw ConfigError("unknown shape class");
}

// Uniform random rotation from a unit quaternion (Shoemake).
std::array<Point3, 3> random_rotation(Rng& rng) {
  const double u1 = uniform(rng), u2 = uniform(rng, 0.0, 2.0 * kPi), u3 = uniform(rng, 0.0, 2.0 * kPi);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  const double w = a * std::sin(u2), x = a * std::cos(u2), y = b * std::sin(u3), z = b * std::cos(u3);
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)},
           {2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)},
           {2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)}}};
}

}  // namespace

std::string_view shape_name(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::kSphere: return "sphere";
    case ShapeClass::kBox: return "box";
    case ShapeClass::kCylinder: return "cylinder";
    case ShapeClass::kTorus: return "torus";
    case ShapeClass::kTwoSpheres: return "two-spheres";
  }
  return "unknown";
}

ShapeClass parse_shape(std::string_view name) {
  for (auto s : {ShapeClass::kSphere, ShapeClass::kBox, ShapeClass::kCylinder, ShapeClass::kTorus,
                 ShapeClass::kTwoSpheres}) {
    if (shape_name(s) == name) return s;
  }
  throw ConfigError("unknown shape class '" + std::string(name) +
                    "' (expected sphere, box, cylinder, torus or two-spheres)");
}

PointCloud synth_generate(ShapeClass shape, std::size_t label, const SynthOptions& options) {
  if (options.n_points < 8) throw ConfigError("synth_generate: n_points must be at least 8");
  if (!(options.noise_sigma >= 0.0)) throw ConfigError("synth_generate: noise must be >= 0");
  auto rng = make_rng(options.seed, Stream::kSynth);
  const auto sampler = make_sampler(shape, options.vary_proportions, rng);

  PointCloud cloud;
  cloud.label = label;
  cloud.name = std::string(shape_name(shape));
  cloud.points.reserve(options.n_points);
  while (cloud.points.size() < options.n_points) {
    const Point3 p = sampler->sample(rng);
    cloud.points.push_back(p);
    if (cloud.points.size() < options.n_points) cloud.points.push_back({-p[0], -p[1], -p[2]});
  }
  if (options.random_rotation) {
    const auto rot = random_rotation(rng);
    for (auto& p : cloud.points) {
      const Point3 q = p;
      for (int r = 0; r < 3; ++r) p[r] = rot[r][0] * q[0] + rot[r][1] * q[1] + rot[r][2] * q[2];
    }
  }
  if (options.noise_sigma > 0.0) {
    std::normal_distribution<double> jitter(0.0, options.noise_sigma);
    for (auto& p : cloud.points)
      for (auto& c : p) c += jitter(rng);
  }
  return normalize(cloud);
}

DatasetPair make_dataset(const DatasetSpec& spec) {
  if (spec.classes.size() < 2) throw ConfigError("make_dataset: need at least two classes");
  DatasetPair out;
  std::vector<std::string> names;
  for (auto c : spec.classes) names.emplace_back(shape_name(c));
  out.train.class_names = out.test.class_names = names;
  out.train.split = "train";
  out.test.split = "test";

  auto fill = [&](Dataset& d, std::uint64_t split_tag, std::size_t per_class) {
    for (std::size_t label = 0; label < spec.classes.size(); ++label) {
      for (std::size_t i = 0; i < per_class; ++i) {
        auto key = make_rng(spec.seed, Stream::kSynth, {split_tag, label, i});
        SynthOptions opt{spec.n_points, key(), spec.noise_sigma, true, spec.random_rotation};
        PointCloud c = synth_generate(spec.classes[label], label, opt);
        char suffix[32];
        std::snprintf(suffix, sizeof suffix, "_%04zu", i);
        c.name = names[label] + suffix;
        d.clouds.push_back(std::move(c));
      }
    }
  };
  fill(out.train, 0, spec.per_class_train);
  fill(out.test, 1, spec.per_class_test);
  return out;
}

}  // namespace kae
