#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "evkd/core.hpp"
#include "evkd/events.hpp"
#include "evkd/fourier.hpp"

namespace evkd {

// ---------------------------------------------------------------------------
// Adaptive search region

struct AsrParams {
  double tau = 0.5;    // IoU threshold between consecutive results
  unsigned k = 7;      // consecutive failures before expanding
  double theta = 1.5;  // crop expansion once triggered
};

struct AsrState {
  unsigned consecutive_failures = 0;
  bool expanded = false;

  friend bool operator==(const AsrState&, const AsrState&) = default;
};

struct AsrStep {
  AsrState state;
  double multiplier = 1.0;
};

/// Counts consecutive low-IoU steps; after k of them the search crop is
/// expanded by theta and stays expanded until an IoU >= tau is seen.
AsrStep asr_step(const AsrState& state, double iou_prev, const AsrParams& params = {});

// ---------------------------------------------------------------------------
// LoRA

enum class LoraTarget { Mlp, AttnProj, AttnQkv };

std::string_view lora_target_name(LoraTarget t) noexcept;

template <typename Scalar>
struct LoraAdapter {
  Grid<Scalar> a;  // rank x d_in
  Grid<Scalar> b;  // d_out x rank
  Scalar alpha = 32;
  LoraTarget target = LoraTarget::Mlp;

  Index rank() const noexcept { return a.rows(); }
  Scalar scaling() const noexcept { return alpha / static_cast<Scalar>(rank()); }
  /// Dense weight correction (alpha / r) B A.
  Grid<Scalar> delta() const { return scaling() * (b * a); }
};

/// A ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), B = 0, so the adapter starts as an
/// exact identity on outputs.
template <typename Scalar = double>
LoraAdapter<Scalar> make_lora(Index d_in, Index d_out, Index rank, Scalar alpha, LoraTarget target,
                              std::uint64_t seed) {
  if (rank < 1 || d_in < 1 || d_out < 1) throw Error(Errc::InvalidArgument, "LoRA dims must be >= 1");
  LoraAdapter<Scalar> ad;
  ad.alpha = alpha;
  ad.target = target;
  ad.a.resize(rank, d_in);
  ad.b = Grid<Scalar>::Zero(d_out, rank);
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < ad.a.size(); ++i) ad.a.data()[i] = static_cast<Scalar>(dist(rng));
  return ad;
}

/// y = base_output + (alpha / r) B (A x).
template <typename DerivedY, typename DerivedX>
Vec<typename DerivedY::Scalar> lora_apply(const Eigen::MatrixBase<DerivedY>& base_output,
                                          const LoraAdapter<typename DerivedY::Scalar>& adapter,
                                          const Eigen::MatrixBase<DerivedX>& x) {
  if (adapter.a.cols() != x.size() || adapter.b.rows() != base_output.size() ||
      adapter.b.cols() != adapter.a.rows()) {
    throw Error(Errc::ShapeMismatch, "LoRA factors do not match input/output sizes");
  }
  return base_output + adapter.scaling() * (adapter.b * (adapter.a * x));
}

// ---------------------------------------------------------------------------
// Sparsity-based template augmentation

/// Keep probabilities 1 - i/n for i = 0..n-1.
std::vector<double> sparsity_levels(std::size_t n);

/// Deterministic per-event uniform draw in [0, 1).
double event_draw(std::uint64_t seed, std::uint64_t index) noexcept;

/// Template i keeps each event with probability 1 - i/n; the draw for an
/// event depends only on (seed, event index), so sparser templates are
/// subsets of denser ones.
std::vector<EventStream> template_augment(const EventStream& window, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Consistency among response maps

enum class ConsistencyInput {
  Logits,         // maps are softmax-normalized first; grads w.r.t. logits
  Probabilities,  // maps are used as-is
};

/// Mean over unordered pairs of the elementwise MSE between the maps.
template <typename Scalar>
SequenceLossReport<Scalar> consistency_loss(std::span<const Grid<Scalar>> maps,
                                            ConsistencyInput input = ConsistencyInput::Logits) {
  const std::size_t n = maps.size();
  if (n < 2) throw Error(Errc::LengthMismatch, "consistency needs at least two maps");
  for (const auto& m : maps) {
    if (m.rows() != maps[0].rows() || m.cols() != maps[0].cols()) {
      throw Error(Errc::ShapeMismatch, "response maps differ in shape");
    }
  }
  std::vector<Grid<Scalar>> q;
  q.reserve(n);
  for (const auto& m : maps) q.push_back(input == ConsistencyInput::Logits ? softmax2d(m) : m);

  const auto pairs = static_cast<Scalar>(n * (n - 1) / 2);
  const auto cells = static_cast<Scalar>(maps[0].size());
  SequenceLossReport<Scalar> rep;
  std::vector<Grid<Scalar>> gq(n, Grid<Scalar>::Zero(maps[0].rows(), maps[0].cols()));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const Grid<Scalar> d = q[i] - q[j];
      rep.value += d.squaredNorm() / cells;
      gq[i] += d * (Scalar(2) / cells);
      gq[j] -= d * (Scalar(2) / cells);
    }
  }
  rep.value /= pairs;
  rep.grads.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    gq[i] /= pairs;
    rep.grads.push_back(input == ConsistencyInput::Logits ? softmax2d_backward(q[i], gq[i]) : gq[i]);
  }
  return rep;
}

}  // namespace evkd
