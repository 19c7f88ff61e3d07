#include "evkd/toy_model.hpp"

#include <bit>
#include <cstring>
#include <random>

#include <json.hpp>

#include "evkd/text_io.hpp"

namespace evkd {

ToyParams make_toy_params(std::uint64_t seed, Index in_features, Index map_rows, Index map_cols, double scale) {
  if (in_features < 1 || map_rows < 1 || map_cols < 1) throw Error(Errc::InvalidArgument, "toy dims must be >= 1");
  ToyParams p;
  p.map_rows = map_rows;
  p.map_cols = map_cols;
  p.weight.resize(map_rows * map_cols, in_features);
  p.bias = Vecd::Zero(map_rows * map_cols);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale);
  for (Index i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = dist(rng);
  return p;
}

Gridd as_map(const Vecd& flat, Index rows, Index cols) {
  if (flat.size() != rows * cols) throw Error(Errc::ShapeMismatch, "flat size does not match map dims");
  return Eigen::Map<const Gridd>(flat.data(), rows, cols);
}

Vecd flatten(const Gridd& map) { return Eigen::Map<const Vecd>(map.data(), map.size()); }

Gridd toy_forward(const ToyParams& params, const Vecd& patch) {
  if (patch.size() != params.in_features()) {
    throw Error(Errc::ShapeMismatch, "patch has " + std::to_string(patch.size()) + " features, model expects " +
                                         std::to_string(params.in_features()));
  }
  if (params.weight.rows() != params.out_cells() || params.bias.size() != params.out_cells()) {
    throw Error(Errc::ShapeMismatch, "toy params are inconsistent with map dims");
  }
  const Vecd logits = params.weight * patch + params.bias;
  return as_map(logits, params.map_rows, params.map_cols);
}

ToyGrads toy_grad(const ToyParams& params, const Vecd& patch, const Gridd& upstream) {
  if (patch.size() != params.in_features() || upstream.rows() != params.map_rows ||
      upstream.cols() != params.map_cols) {
    throw Error(Errc::ShapeMismatch, "toy_grad shapes are inconsistent");
  }
  const Vecd g = flatten(upstream);
  return {g * patch.transpose(), g};
}

namespace {

void append_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

double read_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_params(const ToyParams& params, const std::string& stem) {
  nlohmann::ordered_json desc;
  desc["dtype"] = "f64le";
  desc["order"] = "row-major";
  desc["weight"] = {params.weight.rows(), params.weight.cols()};
  desc["bias"] = {params.bias.size()};
  desc["map_dims"] = {params.map_rows, params.map_cols};
  write_file(stem + ".json", desc.dump(2) + "\n");

  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(params.weight.size() + params.bias.size()) * 8);
  for (Index i = 0; i < params.weight.size(); ++i) append_f64(bytes, params.weight.data()[i]);
  for (Index i = 0; i < params.bias.size(); ++i) append_f64(bytes, params.bias[i]);
  write_file(stem + ".bin", bytes);
}

ToyParams load_params(const std::string& stem) {
  nlohmann::json desc;
  try {
    desc = nlohmann::json::parse(read_file(stem + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, stem + ".json: " + e.what());
  }
  if (desc.value("dtype", "") != "f64le" || desc.value("order", "") != "row-major") {
    throw Error(Errc::MalformedRecord, "unsupported parameter snapshot layout");
  }
  ToyParams p;
  try {
    const Index rows = desc.at("weight").at(0).get<Index>();
    const Index cols = desc.at("weight").at(1).get<Index>();
    const Index nb = desc.at("bias").at(0).get<Index>();
    p.map_rows = desc.at("map_dims").at(0).get<Index>();
    p.map_cols = desc.at("map_dims").at(1).get<Index>();
    if (rows < 1 || cols < 1 || nb != rows || rows != p.map_rows * p.map_cols) {
      throw Error(Errc::ShapeMismatch, "snapshot shapes are inconsistent");
    }
    p.weight.resize(rows, cols);
    p.bias.resize(nb);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::MalformedRecord, stem + ".json: " + e.what());
  }
  const std::string bytes = read_file(stem + ".bin");
  const auto expected = static_cast<std::size_t>(p.weight.size() + p.bias.size()) * 8;
  if (bytes.size() != expected) {
    throw Error(Errc::MalformedRecord, stem + ".bin holds " + std::to_string(bytes.size()) + " bytes, expected " +
                                           std::to_string(expected));
  }
  const char* ptr = bytes.data();
  for (Index i = 0; i < p.weight.size(); ++i, ptr += 8) p.weight.data()[i] = read_f64(ptr);
  for (Index i = 0; i < p.bias.size(); ++i, ptr += 8) p.bias[i] = read_f64(ptr);
  return p;
}

}  // namespace evkd
