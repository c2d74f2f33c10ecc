#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kae/point_cloud.hpp"

namespace kae {

// ---- XYZ / PLY / OFF files ----

// One "x y z" point per line; blank lines and '#' comments are skipped.
// Throws ParseError (with 1-based line number) or IoError.
PointCloud load_xyz(const std::filesystem::path& path);
// Writes 17 significant digits so load_xyz recovers every double exactly.
void save_xyz(const std::vector<Point3>& points, const std::filesystem::path& path);

// ASCII PLY 1.0 with x,y,z float and red,green,blue uchar per vertex.
// Cloud points are gray (128,128,128), keypoints red (255,0,0) and follow the cloud.
void save_ply(const std::vector<Point3>& cloud, const std::vector<Point3>& keypoints,
              const std::filesystem::path& path);

struct TriangleMesh {
  std::vector<Point3> vertices;
  std::vector<std::array<std::size_t, 3>> faces;
};

// OFF mesh (ModelNet layout, including the "OFFn m k" single-line header
// variant). Polygons with more than 3 vertices are fan-triangulated.
TriangleMesh load_off(const std::filesystem::path& path);

// Area-weighted uniform sampling of n points on the mesh surface.
std::vector<Point3> sample_mesh_surface(const TriangleMesh& mesh, std::size_t n,
                                        std::uint64_t seed);

// ---- normalization ----

struct Normalization {
  Point3 centroid{};
  double scale = 1.0;  // max point norm after centering

  Point3 apply(const Point3& p) const;
  Point3 invert(const Point3& p) const;
};

Normalization fit_normalization(const std::vector<Point3>& points);

// Centers on the centroid and divides by the max norm. Throws
// EmptyInputError for no points and ConfigError for a zero-extent cloud.
PointCloud normalize(const PointCloud& cloud);

// ---- synthetic shapes ----

enum class ShapeClass { kSphere, kBox, kCylinder, kTorus, kTwoSpheres };

std::string_view shape_name(ShapeClass shape);
// Throws ConfigError naming the unknown class.
ShapeClass parse_shape(std::string_view name);

struct SynthOptions {
  std::size_t n_points = 256;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  // Shape proportions are drawn per cloud when true; fixed canonical
  // proportions otherwise.
  bool vary_proportions = true;
  // Applies a uniformly random rotation about the shape center.
  bool random_rotation = false;
};

// Uniform surface sample of the shape with Gaussian jitter, normalized.
// `label` is stored on the cloud. Points come in pairs mirrored through the
// shape center, so with an even count and no noise the centroid is the
// shape center up to rounding.
PointCloud synth_generate(ShapeClass shape, std::size_t label, const SynthOptions& options);

// ---- datasets ----

struct Dataset {
  std::vector<PointCloud> clouds;
  std::vector<std::string> class_names;
  std::string split;

  std::size_t n_points() const { return clouds.empty() ? 0 : clouds.front().size(); }
  // Throws ConfigError if clouds differ in size or a label is out of range.
  void validate() const;
};

struct DatasetSpec {
  std::vector<ShapeClass> classes;
  std::size_t per_class_train = 50;
  std::size_t per_class_test = 20;
  std::size_t n_points = 256;
  std::uint64_t seed = 0;
  double noise_sigma = 0.01;
  bool random_rotation = true;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

// Balanced, seeded train/test datasets. Each cloud's random stream is
// derived from (seed, split, class, index).
DatasetPair make_dataset(const DatasetSpec& spec);

// ---- manifest ----

// JSON listing class names plus per-split cloud paths (relative to the
// manifest) and labels:
//   {"format": "kae-manifest", "version": 1, "classes": [...], "n_points": N,
//    "train": [{"path": "train/box_0000.xyz", "label": 1}, ...], "test": [...]}
void write_manifest(const DatasetPair& data, const std::filesystem::path& dir,
                    std::string_view manifest_name = "manifest.json");

// Reads the manifest and every referenced .xyz. Clouds are normalized on load.
DatasetPair load_manifest(const std::filesystem::path& manifest);

}  // namespace kae
