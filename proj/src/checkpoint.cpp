#include "kae/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "kae/errors.hpp"

namespace kae {

namespace fs = std::filesystem;
using json = nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'K', 'A', 'E', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

json config_to_json(const KaeConfig& c) {
  return json{{"n_points", c.n_points},
              {"n_keypoints", c.n_keypoints},
              {"n_classes", c.n_classes},
              {"aux_weight", c.aux_weight},
              {"temperature", c.temperature},
              {"point_widths", c.point_widths},
              {"global_widths", c.global_widths},
              {"head_widths", c.head_widths},
              {"feature_width", c.feature_width},
              {"decoder_widths", c.decoder_widths},
              {"aux_point_widths", c.aux_point_widths},
              {"aux_head_widths", c.aux_head_widths}};
}

KaeConfig config_from_json(const json& j) {
  KaeConfig c;
  j.at("n_points").get_to(c.n_points);
  j.at("n_keypoints").get_to(c.n_keypoints);
  j.at("n_classes").get_to(c.n_classes);
  j.at("aux_weight").get_to(c.aux_weight);
  j.at("temperature").get_to(c.temperature);
  j.at("point_widths").get_to(c.point_widths);
  j.at("global_widths").get_to(c.global_widths);
  j.at("head_widths").get_to(c.head_widths);
  j.at("feature_width").get_to(c.feature_width);
  j.at("decoder_widths").get_to(c.decoder_widths);
  j.at("aux_point_widths").get_to(c.aux_point_widths);
  j.at("aux_head_widths").get_to(c.aux_head_widths);
  return c;
}

void save_checkpoint(const fs::path& path, const TrainState& state, const TrainConfig& train) {
  const auto named = state.params.named();
  if (state.optimizer.first_moment.size() != named.size()) {
    throw Error("save_checkpoint: optimizer state does not match parameters");
  }
  json header;
  header["model"] = config_to_json(state.model);
  header["optimizer"] = {{"learning_rate", train.learning_rate}, {"beta1", train.beta1},
                         {"beta2", train.beta2},                 {"epsilon", train.epsilon},
                         {"seed", train.seed},                   {"shuffle", train.shuffle},
                         {"step", state.optimizer.step}};
  header["epochs_completed"] = state.epochs_completed;
  json hist = json::array();
  for (const auto& e : state.history) {
    hist.push_back({e.epoch, e.mean_chamfer, e.mean_aux, e.mean_total});
  }
  header["history"] = std::move(hist);

  std::vector<std::pair<std::string, std::span<const double>>> payload;
  json directory = json::array();
  auto add = [&](const std::string& name, const Shape& shape, std::span<const double> data) {
    directory.push_back({{"name", name}, {"shape", shape}});
    payload.emplace_back(name, data);
  };
  for (std::size_t i = 0; i < named.size(); ++i) {
    add("param/" + named[i].first, named[i].second.shape(), named[i].second.data());
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    add("adam.m/" + named[i].first, named[i].second.shape(), state.optimizer.first_moment[i]);
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    add("adam.v/" + named[i].first, named[i].second.shape(), state.optimizer.second_moment[i]);
  }
  header["tensors"] = std::move(directory);

  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, data] : payload) {
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size_bytes()));
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError(path.string() + ": not a KAE checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kVersion) {
    throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(in);
  if (!in || header_len > (1u << 30)) throw ParseError(path.string() + ": corrupt header length");
  std::string text(header_len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError(path.string() + ": truncated header");

  LoadedCheckpoint out;
  try {
    const json header = json::parse(text);
    out.state.model = config_from_json(header.at("model"));
    out.state.model.validate();
    const auto& opt = header.at("optimizer");
    opt.at("learning_rate").get_to(out.train_config.learning_rate);
    opt.at("beta1").get_to(out.train_config.beta1);
    opt.at("beta2").get_to(out.train_config.beta2);
    opt.at("epsilon").get_to(out.train_config.epsilon);
    opt.at("seed").get_to(out.train_config.seed);
    opt.at("shuffle").get_to(out.train_config.shuffle);
    opt.at("step").get_to(out.state.optimizer.step);
    header.at("epochs_completed").get_to(out.state.epochs_completed);
    out.train_config.epochs = std::max<std::size_t>(1, out.state.epochs_completed);
    for (const auto& row : header.at("history")) {
      out.state.history.push_back(EpochStats{row.at(0).get<std::size_t>(), row.at(1).get<double>(),
                                             row.at(2).get<double>(), row.at(3).get<double>()});
    }

    // Expected layout comes from a template model of the stored config.
    out.state.params = init_params(out.state.model, 0);
    const auto named = out.state.params.named();
    const auto& directory = header.at("tensors");
    if (directory.size() != 3 * named.size()) {
      throw ParseError(path.string() + ": tensor directory does not match the model config");
    }
    out.state.optimizer.first_moment.resize(named.size());
    out.state.optimizer.second_moment.resize(named.size());
    for (std::size_t d = 0; d < directory.size(); ++d) {
      const std::size_t i = d % named.size();
      const char* prefix = d < named.size() ? "param/" : (d < 2 * named.size() ? "adam.m/" : "adam.v/");
      const std::string expected = prefix + named[i].first;
      const auto name = directory[d].at("name").get<std::string>();
      const auto shape = directory[d].at("shape").get<Shape>();
      if (name != expected || shape != named[i].second.shape()) {
        throw ParseError(path.string() + ": tensor " + name + " " + shape_str(shape) +
                         " does not match expected " + expected + " " +
                         shape_str(named[i].second.shape()));
      }
      std::vector<double> values(shape_numel(shape));
      in.read(reinterpret_cast<char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
      if (!in) throw ParseError(path.string() + ": truncated tensor data for " + name);
      if (d < named.size()) {
        Tensor t = named[i].second;
        std::copy(values.begin(), values.end(), t.mutable_data().begin());
      } else if (d < 2 * named.size()) {
        out.state.optimizer.first_moment[i] = std::move(values);
      } else {
        out.state.optimizer.second_moment[i] = std::move(values);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ParseError(path.string() + ": trailing bytes after tensor data");
  }
  return out;
}

}  // namespace kae
