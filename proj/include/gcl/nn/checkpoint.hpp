#pragma once

// Checkpoint file layout:
//   8 bytes   magic "GCLCKPT1"
//   8 bytes   little-endian u64 header length L
//   L bytes   JSON header: config, seed, epoch, dtype, normalization,
//             tensor table {name, shape, offset} and optimizer settings
//   payload   raw little-endian parameters followed by optimizer
//             accumulators, in the element type named by dtype

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcl/core/error.hpp"
#include "gcl/nn/config.hpp"
#include "gcl/nn/network.hpp"
#include "gcl/nn/rmsprop.hpp"

namespace gcl::nn {

inline nlohmann::json to_json(const NetConfig& c) {
  return {{"kind", std::string(to_string(c.kind))},
          {"n_layers", c.n_layers},
          {"n_classes", c.n_classes},
          {"base_width", c.base_width},
          {"width_step", c.width_step},
          {"penultimate_width", c.penultimate_width},
          {"head", std::string(to_string(c.head))},
          {"input_height", c.input_height},
          {"input_width", c.input_width},
          {"input_channels", c.input_channels},
          {"custom", c.custom}};
}

/// Reads a NetConfig; absent fields keep their value from `base`, except
/// that a missing head follows the class count (2 -> sigmoid).
inline NetConfig net_config_from_json(const nlohmann::json& j, const std::string& path = "net",
                                      NetConfig base = {}) {
  NetConfig c = std::move(base);
  if (!j.is_object()) throw Error(path + ": expected an object");
  auto get_int = [&](const char* key, int& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) throw Error(path + "." + key + ": expected integer");
    dst = j[key].get<int>();
  };
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known{"kind", "n_layers", "n_classes", "base_width",
                                             "width_step", "penultimate_width", "head",
                                             "input_height", "input_width", "input_channels",
                                             "custom"};
    if (!known.contains(it.key())) throw Error(path + "." + it.key() + ": unknown field");
  }
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) throw Error(path + ".kind: expected string");
    try {
      c.kind = parse_net_kind(j["kind"].get<std::string>());
    } catch (const Error& e) {
      throw Error(path + ".kind: " + e.what());
    }
  }
  get_int("n_layers", c.n_layers);
  get_int("n_classes", c.n_classes);
  get_int("base_width", c.base_width);
  get_int("width_step", c.width_step);
  get_int("penultimate_width", c.penultimate_width);
  get_int("input_height", c.input_height);
  get_int("input_width", c.input_width);
  get_int("input_channels", c.input_channels);
  if (j.contains("head")) {
    if (!j["head"].is_string()) throw Error(path + ".head: expected string");
    try {
      c.head = parse_head(j["head"].get<std::string>());
    } catch (const Error& e) {
      throw Error(path + ".head: " + e.what());
    }
  } else {
    c.head = c.n_classes == 2 ? HeadKind::Sigmoid : HeadKind::Softmax;
  }
  if (j.contains("custom")) {
    if (!j["custom"].is_boolean()) throw Error(path + ".custom: expected boolean");
    c.custom = j["custom"].get<bool>();
  }
  try {
    validate(c);
  } catch (const Error& e) {
    throw Error(path + "." + e.what());
  }
  return c;
}

template <class T>
constexpr const char* dtype_name() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? "f32" : "f64";
}

template <class T>
struct LoadedCheckpoint {
  Network<T> net;
  RmsProp<T> optimizer;
  int epoch = 0;
};

template <class T>
void save_checkpoint(const std::filesystem::path& path, Network<T>& net,
                     const RmsProp<T>* optimizer, int epoch) {
  nlohmann::json header;
  header["format"] = "gcl-checkpoint";
  header["version"] = 1;
  header["config"] = to_json(net.config());
  header["seed"] = net.seed();
  header["epoch"] = epoch;
  header["dtype"] = dtype_name<T>();
  header["normalization"] = {{"mean", net.normalization().mean},
                             {"stddev", net.normalization().stddev}};
  std::size_t offset = 0;
  auto& table = header["tensors"] = nlohmann::json::array();
  const auto params = net.params();
  for (const auto& p : params) {
    table.push_back({{"name", p.name}, {"shape", p.value->shape()}, {"offset", offset}});
    offset += p.value->size();
  }
  if (optimizer) {
    const auto& cfg = optimizer->config();
    header["optimizer"] = {{"kind", "rmsprop"},  {"lr", cfg.lr},
                           {"rho", cfg.rho},     {"eps", cfg.eps},
                           {"steps", optimizer->steps()},
                           {"has_state", !optimizer->accumulators().empty()},
                           {"offset", offset}};
  }
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write("GCLCKPT1", 8);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  auto dump = [&](const Tensor<T>& t) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
  };
  for (const auto& p : params) dump(*p.value);
  if (optimizer)
    for (const auto& a : optimizer->accumulators()) dump(a);
  if (!out) throw IoError(path.string(), "write failed");
}

inline nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "GCLCKPT1", 8) != 0) throw IoError(path.string(), "not a checkpoint");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError(path.string(), "truncated header");
  try {
    return nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw IoError(path.string(), std::string("bad header: ") + e.what());
  }
}

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
  const auto header = read_checkpoint_header(path);
  if (header.at("dtype").get<std::string>() != dtype_name<T>())
    throw IoError(path.string(), "checkpoint dtype " + header.at("dtype").get<std::string>() +
                                     " does not match " + dtype_name<T>());
  std::ifstream in(path, std::ios::binary);
  in.seekg(8);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  in.seekg(static_cast<std::streamoff>(16 + len));

  LoadedCheckpoint<T> ck{Network<T>(net_config_from_json(header.at("config"), "config"),
                                    header.at("seed").get<std::uint64_t>()),
                         RmsProp<T>(), header.at("epoch").get<int>()};
  ck.net.normalization().mean = header.at("normalization").at("mean").get<std::vector<double>>();
  ck.net.normalization().stddev = header.at("normalization").at("stddev").get<std::vector<double>>();
  auto params = ck.net.params();
  const auto& table = header.at("tensors");
  if (table.size() != params.size())
    throw IoError(path.string(), "tensor count does not match architecture");
  auto slurp = [&](Tensor<T>& t) {
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!in) throw IoError(path.string(), "truncated payload");
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (table[i].at("name").get<std::string>() != params[i].name ||
        table[i].at("shape").get<Shape>() != params[i].value->shape())
      throw IoError(path.string(), "tensor " + params[i].name + " does not match architecture");
    slurp(*params[i].value);
  }
  if (header.contains("optimizer")) {
    const auto& o = header["optimizer"];
    ck.optimizer = RmsProp<T>(RmsPropConfig{o.at("lr").get<double>(), o.at("rho").get<double>(),
                                            o.at("eps").get<double>()});
    std::vector<Tensor<T>> acc;
    if (o.at("has_state").get<bool>())
      for (const auto& p : params) {
        acc.emplace_back(p.value->shape());
        slurp(acc.back());
      }
    ck.optimizer.restore(std::move(acc), o.at("steps").get<std::uint64_t>());
  }
  return ck;
}

}  // namespace gcl::nn
