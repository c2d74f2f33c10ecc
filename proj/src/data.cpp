#include "kae/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "kae/errors.hpp"
#include "kae/random.hpp"

namespace kae {

namespace fs = std::filesystem;
using json = nlohmann::json;

Tensor to_tensor(const std::vector<Point3>& points) {
  std::vector<double> flat;
  flat.reserve(points.size() * 3);
  for (const auto& p : points) flat.insert(flat.end(), p.begin(), p.end());
  return Tensor({points.size(), 3}, std::move(flat));
}

std::vector<Point3> to_points(const Tensor& t) {
  if (t.dim() != 2 || t.size(1) != 3) {
    throw ShapeError("expected [N,3] tensor, got " + shape_str(t.shape()));
  }
  std::vector<Point3> out(t.size(0));
  const auto d = t.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {d[3 * i], d[3 * i + 1], d[3 * i + 2]};
  return out;
}

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view token, double& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

template <typename T>
bool parse_uint(std::string_view token, T& out) {
  const char* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string format_double(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace

PointCloud load_xyz(const fs::path& path) {
  auto in = open_in(path);
  PointCloud cloud;
  cloud.name = path.stem().string();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tokens = split_ws(body);
    Point3 p{};
    bool ok = tokens.size() == 3;
    for (std::size_t c = 0; ok && c < 3; ++c) ok = parse_double(tokens[c], p[c]) && std::isfinite(p[c]);
    if (!ok) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected three finite numbers \"x y z\"");
    }
    cloud.points.push_back(p);
  }
  if (cloud.points.empty()) throw ParseError(path.string() + ": no points in file");
  return cloud;
}

void save_xyz(const std::vector<Point3>& points, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& p : points) {
    out << format_double(p[0]) << ' ' << format_double(p[1]) << ' ' << format_double(p[2])
        << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void save_ply(const std::vector<Point3>& cloud, const std::vector<Point3>& keypoints,
              const fs::path& path) {
  auto out = open_out(path);
  out << "ply\n"
      << "format ascii 1.0\n"
      << "comment cloud points gray, keypoints red\n"
      << "element vertex " << cloud.size() + keypoints.size() << '\n'
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "end_header\n";
  char buf[96];
  auto emit = [&](const Point3& p, int r, int g, int b) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %d %d %d\n", p[0], p[1], p[2], r, g, b);
    out << buf;
  };
  for (const auto& p : cloud) emit(p, 128, 128, 128);
  for (const auto& p : keypoints) emit(p, 255, 0, 0);
  if (!out) throw IoError("failed writing " + path.string());
}

TriangleMesh load_off(const fs::path& path) {
  auto in = open_in(path);
  std::string text;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    auto body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (header) {
      // ModelNet ships some headers fused with the counts, e.g. "OFF490 518 0".
      if (body.substr(0, 3) != "OFF") throw ParseError(path.string() + ": missing OFF header");
      body.remove_prefix(3);
      header = false;
    }
    text.append(body);
    text.push_back(' ');
  }
  const auto words = split_ws(text);
  std::size_t pos = 0;
  auto next_uint = [&](const char* what) {
    std::size_t v = 0;
    if (pos >= words.size() || !parse_uint(words[pos], v)) {
      throw ParseError(path.string() + ": bad " + what);
    }
    ++pos;
    return v;
  };
  auto next_double = [&]() {
    double v = 0;
    if (pos >= words.size() || !parse_double(words[pos], v)) {
      throw ParseError(path.string() + ": bad vertex coordinate");
    }
    ++pos;
    return v;
  };
  TriangleMesh mesh;
  const std::size_t nv = next_uint("vertex count");
  const std::size_t nf = next_uint("face count");
  next_uint("edge count");
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices)
    for (auto& c : v) c = next_double();
  for (std::size_t f = 0; f < nf; ++f) {
    const std::size_t k = next_uint("face arity");
    std::vector<std::size_t> idx(k);
    for (auto& i : idx) {
      i = next_uint("face index");
      if (i >= nv) throw ParseError(path.string() + ": face index out of range");
    }
    for (std::size_t t = 1; t + 1 < k; ++t) mesh.faces.push_back({idx[0], idx[t], idx[t + 1]});
  }
  if (mesh.faces.empty()) throw ParseError(path.string() + ": mesh has no faces");
  return mesh;
}

std::vector<Point3> sample_mesh_surface(const TriangleMesh& mesh, std::size_t n,
                                        std::uint64_t seed) {
  std::vector<double> cumulative;
  cumulative.reserve(mesh.faces.size());
  double total = 0.0;
  for (const auto& f : mesh.faces) {
    const auto& a = mesh.vertices[f[0]];
    const auto& b = mesh.vertices[f[1]];
    const auto& c = mesh.vertices[f[2]];
    const Point3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    const Point3 v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const Point3 x{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    total += 0.5 * std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
    cumulative.push_back(total);
  }
  if (!(total > 0.0)) throw ConfigError("mesh has zero surface area");
  auto rng = make_rng(seed, Stream::kMesh);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point3> out(n);
  for (auto& p : out) {
    const double pick = unit(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), pick);
    if (it == cumulative.end()) --it;
    const auto& f = mesh.faces[static_cast<std::size_t>(it - cumulative.begin())];
    double r1 = std::sqrt(unit(rng));
    double r2 = unit(rng);
    const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
    for (int c = 0; c < 3; ++c) {
      p[c] = wa * mesh.vertices[f[0]][c] + wb * mesh.vertices[f[1]][c] + wc * mesh.vertices[f[2]][c];
    }
  }
  return out;
}

Point3 Normalization::apply(const Point3& p) const {
  return {(p[0] - centroid[0]) / scale, (p[1] - centroid[1]) / scale, (p[2] - centroid[2]) / scale};
}

Point3 Normalization::invert(const Point3& p) const {
  return {p[0] * scale + centroid[0], p[1] * scale + centroid[1], p[2] * scale + centroid[2]};
}

Normalization fit_normalization(const std::vector<Point3>& points) {
  if (points.empty()) throw EmptyInputError("normalize: empty cloud");
  Normalization n;
  for (const auto& p : points)
    for (int c = 0; c < 3; ++c) n.centroid[c] += p[c];
  for (auto& c : n.centroid) c /= static_cast<double>(points.size());
  double max_norm = 0.0;
  for (const auto& p : points) {
    double s = 0.0;
    for (int c = 0; c < 3; ++c) s += (p[c] - n.centroid[c]) * (p[c] - n.centroid[c]);
    max_norm = std::max(max_norm, std::sqrt(s));
  }
  if (!(max_norm > 0.0)) throw ConfigError("normalize: cloud has zero extent");
  n.scale = max_norm;
  return n;
}

PointCloud normalize(const PointCloud& cloud) {
  const auto n = fit_normalization(cloud.points);
  PointCloud out = cloud;
  for (auto& p : out.points) p = n.apply(p);
  return out;
}

void Dataset::validate() const {
  const std::size_t n = n_points();
  for (const auto& c : clouds) {
    if (c.size() != n) {
      throw ConfigError("dataset clouds differ in size: " + std::to_string(n) + " vs " +
                        std::to_string(c.size()) + " (" + c.name + ")");
    }
    if (c.label && *c.label >= class_names.size()) {
      throw ConfigError("label " + std::to_string(*c.label) + " of " + c.name +
                        " exceeds class table size " + std::to_string(class_names.size()));
    }
  }
}

namespace {

json split_entries(const Dataset& d, const fs::path& dir, const std::string& split) {
  json entries = json::array();
  fs::create_directories(dir / split);
  for (const auto& c : d.clouds) {
    const fs::path rel = fs::path(split) / (c.name + ".xyz");
    save_xyz(c.points, dir / rel);
    json e{{"path", rel.generic_string()}};
    if (c.label) e["label"] = *c.label;
    entries.push_back(std::move(e));
  }
  return entries;
}

Dataset load_split(const json& doc, const fs::path& base, const std::string& split,
                   const std::vector<std::string>& classes) {
  Dataset d;
  d.split = split;
  d.class_names = classes;
  if (!doc.contains(split)) return d;
  for (const auto& e : doc.at(split)) {
    PointCloud c = normalize(load_xyz(base / e.at("path").get<std::string>()));
    if (e.contains("label")) c.label = e.at("label").get<std::size_t>();
    d.clouds.push_back(std::move(c));
  }
  d.validate();
  return d;
}

}  // namespace

void write_manifest(const DatasetPair& data, const fs::path& dir, std::string_view manifest_name) {
  fs::create_directories(dir);
  json doc;
  doc["format"] = "kae-manifest";
  doc["version"] = 1;
  doc["classes"] = data.train.class_names;
  doc["n_points"] = data.train.n_points();
  doc["train"] = split_entries(data.train, dir, "train");
  doc["test"] = split_entries(data.test, dir, "test");
  auto out = open_out(dir / manifest_name);
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest in " + dir.string());
}

DatasetPair load_manifest(const fs::path& manifest) {
  auto in = open_in(manifest);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
  try {
    const auto classes = doc.at("classes").get<std::vector<std::string>>();
    const fs::path base = manifest.parent_path();
    DatasetPair out{load_split(doc, base, "train", classes), load_split(doc, base, "test", classes)};
    if (!out.train.clouds.empty() && !out.test.clouds.empty() &&
        out.train.n_points() != out.test.n_points()) {
      throw ConfigError("train and test clouds differ in size");
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(manifest.string() + ": " + e.what());
  }
}

}  // namespace kae
