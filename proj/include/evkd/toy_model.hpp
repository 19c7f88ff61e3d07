#pragma once

#include <cstdint>
#include <string>

#include "evkd/core.hpp"

namespace evkd {

// Linear score-map producer standing in for the tracking backbone:
// logits = W * patch + bias, reshaped to map_rows x map_cols.
struct ToyParams {
  Gridd weight;  // (map_rows * map_cols) x in_features
  Vecd bias;
  Index map_rows = 16;
  Index map_cols = 16;

  Index in_features() const noexcept { return weight.cols(); }
  Index out_cells() const noexcept { return map_rows * map_cols; }

  friend bool operator==(const ToyParams& a, const ToyParams& b) {
    return a.map_rows == b.map_rows && a.map_cols == b.map_cols && a.weight.rows() == b.weight.rows() &&
           a.weight.cols() == b.weight.cols() && a.bias.size() == b.bias.size() && a.weight == b.weight &&
           a.bias == b.bias;
  }
};

struct ToyGrads {
  Gridd weight;
  Vecd bias;
};

ToyParams make_toy_params(std::uint64_t seed, Index in_features = 64, Index map_rows = 16, Index map_cols = 16,
                          double scale = 0.1);

/// Reshapes a flat logit vector into a map (row-major).
Gridd as_map(const Vecd& flat, Index rows, Index cols);
Vecd flatten(const Gridd& map);

Gridd toy_forward(const ToyParams& params, const Vecd& patch);

/// grad_W = upstream (flattened) x patch^T, grad_bias = upstream.
ToyGrads toy_grad(const ToyParams& params, const Vecd& patch, const Gridd& upstream);

/// Writes `<stem>.bin` (float64 little-endian, weight row-major then bias)
/// and `<stem>.json` (shape descriptor).
void save_params(const ToyParams& params, const std::string& stem);
ToyParams load_params(const std::string& stem);

}  // namespace evkd
