#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "kae/data.hpp"
#include "kae/errors.hpp"
#include "oracles.hpp"

using namespace kae;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("kae-data-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

double norm(const Point3& p) { return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]); }

Point3 centroid(const std::vector<Point3>& pts) {
  Point3 c{0, 0, 0};
  for (const auto& p : pts)
    for (int a = 0; a < 3; ++a) c[a] += p[a];
  for (auto& v : c) v /= static_cast<double>(pts.size());
  return c;
}

}  // namespace

TEST(Xyz, LoadSkipsCommentsAndBlanks) {
  const fs::path dir = temp_dir("load");
  write_text(dir / "a.xyz", "# header\n1 2 3\n\n  -0.5\t0.25 1e-3  \n# tail\n");
  const PointCloud c = load_xyz(dir / "a.xyz");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.points[0], (Point3{1, 2, 3}));
  EXPECT_EQ(c.points[1], (Point3{-0.5, 0.25, 1e-3}));
}

TEST(Xyz, ParseErrorNamesLine) {
  const fs::path dir = temp_dir("bad");
  write_text(dir / "bad.xyz", "0 0 0\n# c\n1 two 3\n");
  try {
    load_xyz(dir / "bad.xyz");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
  write_text(dir / "short.xyz", "0 0\n");
  EXPECT_THROW(load_xyz(dir / "short.xyz"), ParseError);
  write_text(dir / "extra.xyz", "0 0 0 0\n");
  EXPECT_THROW(load_xyz(dir / "extra.xyz"), ParseError);
  write_text(dir / "empty.xyz", "# nothing\n\n");
  EXPECT_THROW(load_xyz(dir / "empty.xyz"), ParseError);
  EXPECT_THROW(load_xyz(dir / "missing.xyz"), IoError);
}

TEST(Xyz, RoundTrip) {
  const fs::path dir = temp_dir("rt");
  std::mt19937_64 rng(1);
  const auto pts = oracle::random_points(50, rng, -1e3, 1e3);
  save_xyz(pts, dir / "rt.xyz");
  const auto back = load_xyz(dir / "rt.xyz").points;
  ASSERT_EQ(back.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(back[i][a], pts[i][a], 1e-12 * std::abs(pts[i][a]));
}

TEST(Ply, VertexCountColorsAndCoordinates) {
  const fs::path dir = temp_dir("ply");
  std::mt19937_64 rng(2);
  const auto cloud = oracle::random_points(20, rng);
  const std::vector<Point3> kps{cloud[3], cloud[11]};
  save_ply(cloud, kps, dir / "out.ply");
  std::vector<oracle::PlyVertex> verts;
  ASSERT_TRUE(oracle::read_ply(dir / "out.ply", verts));
  ASSERT_EQ(verts.size(), 22u);
  for (std::size_t i = 0; i < 20; ++i) {
    EXPECT_EQ(verts[i].r, 128);
    EXPECT_EQ(verts[i].g, 128);
    EXPECT_EQ(verts[i].b, 128);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(verts[i].p[a], cloud[i][a], 1e-6);
  }
  for (std::size_t i = 20; i < 22; ++i) {
    EXPECT_EQ(verts[i].r, 255);
    EXPECT_EQ(verts[i].g, 0);
    EXPECT_EQ(verts[i].b, 0);
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(verts[i].p[a], kps[i - 20][a], 1e-6);
  }

  save_ply(cloud, {}, dir / "gray.ply");
  ASSERT_TRUE(oracle::read_ply(dir / "gray.ply", verts));
  EXPECT_EQ(verts.size(), 20u);
  for (const auto& v : verts) EXPECT_EQ(v.r, 128);
}

TEST(Normalize, HandCase) {
  PointCloud c;
  c.points = {{1, 1, 1}, {3, 1, 1}};
  const PointCloud n = normalize(c);
  EXPECT_EQ(n.points[0], (Point3{-1, 0, 0}));
  EXPECT_EQ(n.points[1], (Point3{1, 0, 0}));
  const Normalization f = fit_normalization(c.points);
  EXPECT_EQ(f.centroid, (Point3{2, 1, 1}));
  EXPECT_EQ(f.scale, 1.0);
  EXPECT_EQ(f.invert(f.apply({5, 0, 2})), (Point3{5, 0, 2}));
}

TEST(Normalize, Errors) {
  EXPECT_THROW(normalize(PointCloud{}), EmptyInputError);
  PointCloud same;
  same.points = {{1, 2, 3}, {1, 2, 3}};
  EXPECT_THROW(normalize(same), ConfigError);
}

TEST(NormalizeProperty, CenteredUnitAndIdempotent) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    PointCloud c;
    c.points = oracle::random_points(40, rng, -5.0, 9.0);
    c.label = 2;
    const PointCloud n = normalize(c);
    EXPECT_EQ(n.label, c.label);
    const Point3 m = centroid(n.points);
    for (double v : m) EXPECT_NEAR(v, 0.0, 1e-12);
    double max_norm = 0.0;
    for (const auto& p : n.points) max_norm = std::max(max_norm, norm(p));
    EXPECT_NEAR(max_norm, 1.0, 1e-12);
    const PointCloud twice = normalize(n);
    for (std::size_t i = 0; i < n.size(); ++i)
      for (int a = 0; a < 3; ++a) EXPECT_NEAR(twice.points[i][a], n.points[i][a], 1e-12);
  }
}

TEST(Synth, SphereLiesOnUnitSphere) {
  SynthOptions opt;
  opt.n_points = 200;
  opt.seed = 4;
  const PointCloud c = synth_generate(ShapeClass::kSphere, 0, opt);
  ASSERT_EQ(c.size(), 200u);
  for (const auto& p : c.points) EXPECT_NEAR(norm(p), 1.0, 1e-9);
}

TEST(Synth, BoxPointsLieOnFaces) {
  SynthOptions opt;
  opt.n_points = 300;
  opt.seed = 5;
  opt.vary_proportions = false;
  const PointCloud c = synth_generate(ShapeClass::kBox, 1, opt);
  Point3 hi{0, 0, 0};
  for (const auto& p : c.points)
    for (int a = 0; a < 3; ++a) hi[a] = std::max(hi[a], std::abs(p[a]));
  EXPECT_NEAR(hi[0] / hi[1], 1.0 / 0.75, 1e-9);
  EXPECT_NEAR(hi[0] / hi[2], 1.0 / 0.5, 1e-9);
  for (const auto& p : c.points) {
    bool on_face = false;
    for (int a = 0; a < 3; ++a) on_face |= std::abs(std::abs(p[a]) - hi[a]) < 1e-9;
    EXPECT_TRUE(on_face);
  }
}

TEST(Synth, EveryShapeIsNormalizedAndSeeded) {
  for (auto s : {ShapeClass::kSphere, ShapeClass::kBox, ShapeClass::kCylinder, ShapeClass::kTorus,
                 ShapeClass::kTwoSpheres}) {
    SynthOptions opt;
    opt.n_points = 64;
    opt.seed = 6;
    opt.noise_sigma = 0.01;
    opt.random_rotation = true;
    const PointCloud a = synth_generate(s, 3, opt);
    EXPECT_EQ(a.label, 3u);
    EXPECT_EQ(a.points, synth_generate(s, 3, opt).points);
    double max_norm = 0.0;
    for (const auto& p : a.points) max_norm = std::max(max_norm, norm(p));
    EXPECT_NEAR(max_norm, 1.0, 1e-12);
    opt.seed = 7;
    EXPECT_NE(a.points, synth_generate(s, 3, opt).points);
    EXPECT_EQ(parse_shape(shape_name(s)), s);
  }
}

TEST(Synth, Errors) {
  EXPECT_THROW(parse_shape("dodecahedron"), ConfigError);
  try {
    parse_shape("dodecahedron");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dodecahedron"), std::string::npos);
  }
  SynthOptions opt;
  opt.n_points = 4;
  EXPECT_THROW(synth_generate(ShapeClass::kBox, 0, opt), ConfigError);
}

TEST(Dataset, CountsBalanceAndDisjointSplits) {
  DatasetSpec spec;
  spec.classes = {ShapeClass::kSphere, ShapeClass::kBox, ShapeClass::kTorus};
  spec.per_class_train = 5;
  spec.per_class_test = 3;
  spec.n_points = 48;
  spec.seed = 9;
  const DatasetPair d = make_dataset(spec);
  ASSERT_EQ(d.train.clouds.size(), 15u);
  ASSERT_EQ(d.test.clouds.size(), 9u);
  EXPECT_EQ(d.train.class_names, (std::vector<std::string>{"sphere", "box", "torus"}));
  std::vector<int> per(3, 0);
  for (const auto& c : d.train.clouds) {
    EXPECT_EQ(c.size(), 48u);
    ++per[*c.label];
  }
  EXPECT_EQ(per, (std::vector<int>{5, 5, 5}));
  for (const auto& a : d.train.clouds)
    for (const auto& b : d.test.clouds) EXPECT_NE(a.points, b.points);
  EXPECT_EQ(d.train.clouds[6].name, "box_0001");
  EXPECT_NO_THROW(d.train.validate());

  const DatasetPair again = make_dataset(spec);
  for (std::size_t i = 0; i < 15; ++i) EXPECT_EQ(again.train.clouds[i].points, d.train.clouds[i].points);

  spec.classes = {ShapeClass::kBox};
  EXPECT_THROW(make_dataset(spec), ConfigError);
}

TEST(Manifest, RoundTrip) {
  const fs::path dir = temp_dir("manifest");
  DatasetSpec spec;
  spec.classes = {ShapeClass::kCylinder, ShapeClass::kTwoSpheres};
  spec.per_class_train = 2;
  spec.per_class_test = 1;
  spec.n_points = 32;
  const DatasetPair d = make_dataset(spec);
  write_manifest(d, dir);
  ASSERT_TRUE(fs::exists(dir / "manifest.json"));
  const DatasetPair back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back.train.class_names, d.train.class_names);
  ASSERT_EQ(back.train.clouds.size(), 4u);
  ASSERT_EQ(back.test.clouds.size(), 2u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(back.train.clouds[i].label, d.train.clouds[i].label);
    for (std::size_t j = 0; j < 32; ++j)
      for (int a = 0; a < 3; ++a)
        EXPECT_NEAR(back.train.clouds[i].points[j][a], d.train.clouds[i].points[j][a], 1e-12);
  }
  write_text(dir / "broken.json", "{\"format\": \"kae-manifest\"");
  EXPECT_THROW(load_manifest(dir / "broken.json"), ParseError);
}

TEST(Off, LoadsBothHeaderLayoutsAndSamples) {
  const fs::path dir = temp_dir("off");
  const std::string body = "4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
  write_text(dir / "a.off", "OFF\n" + body);
  write_text(dir / "b.off", "OFF" + body);
  for (const char* name : {"a.off", "b.off"}) {
    const TriangleMesh m = load_off(dir / name);
    EXPECT_EQ(m.vertices.size(), 4u);
    ASSERT_EQ(m.faces.size(), 2u);
    EXPECT_EQ(m.faces[0], (std::array<std::size_t, 3>{0, 1, 2}));
    EXPECT_EQ(m.faces[1], (std::array<std::size_t, 3>{0, 2, 3}));
  }
  const auto pts = sample_mesh_surface(load_off(dir / "a.off"), 500, 1);
  ASSERT_EQ(pts.size(), 500u);
  for (const auto& p : pts) {
    EXPECT_EQ(p[2], 0.0);
    EXPECT_GE(p[0], 0.0);
    EXPECT_LE(p[0], 1.0);
    EXPECT_GE(p[1], 0.0);
    EXPECT_LE(p[1], 1.0);
  }
  const Point3 c = centroid(pts);
  EXPECT_NEAR(c[0], 0.5, 0.05);
  EXPECT_NEAR(c[1], 0.5, 0.05);
  write_text(dir / "bad.off", "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n");
  EXPECT_THROW(load_off(dir / "bad.off"), ParseError);
}
