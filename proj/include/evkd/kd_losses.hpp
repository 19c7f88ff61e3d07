#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>

#include "evkd/core.hpp"

// Spatial distillation losses between a student and a fixed teacher. Every
// loss returns its value together with the gradient with respect to the
// student input (before any alignment). Reductions run in fixed row-major
// order so results are bit-reproducible.

namespace evkd {

/// How a student tensor with fewer tokens is stretched to teacher size.
enum class RepeatMode {
  Tile,   // whole-block repetition: out[i] = in[i mod n]
  Block,  // nearest-neighbour upsampling: out[i] = in[i / factor]
};

enum class Reduction { Sum, Mean };

namespace detail {

inline Index repeat_factor(Index n, Index target) {
  if (n <= 0 || target <= 0 || target % n != 0) {
    throw Error(Errc::NonMultiple,
                std::to_string(target) + " is not a multiple of " + std::to_string(n));
  }
  return target / n;
}

inline Index source_index(Index i, Index n, Index factor, RepeatMode mode) noexcept {
  return mode == RepeatMode::Tile ? i % n : i / factor;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Similarity matrices

/// Repeats a square token-by-token matrix up to `target` tokens per side.
template <typename Derived>
Grid<typename Derived::Scalar> repeat_align(const Eigen::MatrixBase<Derived>& m, Index target,
                                            RepeatMode mode = RepeatMode::Tile) {
  if (m.rows() != m.cols()) throw Error(Errc::ShapeMismatch, "similarity matrix must be square");
  const Index n = m.rows();
  const Index f = detail::repeat_factor(n, target);
  if (mode == RepeatMode::Tile) return m.replicate(f, f);
  Grid<typename Derived::Scalar> out(target, target);
  for (Index i = 0; i < target; ++i)
    for (Index j = 0; j < target; ++j) out(i, j) = m(i / f, j / f);
  return out;
}

/// Averages per-head attention maps into one matrix.
template <typename Scalar>
Grid<Scalar> head_average(std::span<const Grid<Scalar>> heads) {
  if (heads.empty()) throw Error(Errc::LengthMismatch, "no attention heads");
  Grid<Scalar> acc = heads.front();
  for (std::size_t h = 1; h < heads.size(); ++h) {
    if (heads[h].rows() != acc.rows() || heads[h].cols() != acc.cols()) {
      throw Error(Errc::ShapeMismatch, "attention heads differ in shape");
    }
    acc += heads[h];
  }
  return acc / static_cast<Scalar>(heads.size());
}

struct SimKdOptions {
  RepeatMode repeat = RepeatMode::Tile;
  Reduction reduction = Reduction::Sum;
};

/// Sum of squared differences between the repeated student similarity
/// matrix and the teacher's. `student` is the pre-alignment matrix.
template <typename DerivedS, typename DerivedT>
LossReport<typename DerivedS::Scalar> sim_kd_loss(const Eigen::MatrixBase<DerivedS>& student,
                                                  const Eigen::MatrixBase<DerivedT>& teacher,
                                                  SimKdOptions opts = {}) {
  using Scalar = typename DerivedS::Scalar;
  if (teacher.rows() != teacher.cols()) throw Error(Errc::ShapeMismatch, "teacher matrix must be square");
  const Index n = student.rows();
  const Index target = teacher.rows();
  const Grid<Scalar> aligned = repeat_align(student, target, opts.repeat);
  const Index f = target / n;
  const Scalar norm = opts.reduction == Reduction::Mean ? Scalar(1) / static_cast<Scalar>(target * target) : Scalar(1);

  LossReport<Scalar> rep;
  rep.grad = Grid<Scalar>::Zero(n, n);
  Scalar sum = 0;
  for (Index i = 0; i < target; ++i) {
    const Index si = detail::source_index(i, n, f, opts.repeat);
    for (Index j = 0; j < target; ++j) {
      const Scalar d = aligned(i, j) - static_cast<Scalar>(teacher(i, j));
      sum += d * d;
      rep.grad(si, detail::source_index(j, n, f, opts.repeat)) += Scalar(2) * d * norm;
    }
  }
  rep.value = sum * norm;
  return rep;
}

// ---------------------------------------------------------------------------
// Token features

/// (batch, tokens, channels) stored as a (batch * tokens) x channels grid.
template <typename Scalar>
struct FeatureBlock {
  Index batch = 1;
  Grid<Scalar> values;

  Index tokens() const noexcept { return batch > 0 ? values.rows() / batch : 0; }
  Index channels() const noexcept { return values.cols(); }
  auto token(Index b, Index i) { return values.row(b * tokens() + i); }
  auto token(Index b, Index i) const { return values.row(b * tokens() + i); }

  static FeatureBlock zeros(Index batch, Index tokens, Index channels) {
    return {batch, Grid<Scalar>::Zero(batch * tokens, channels)};
  }
};

template <typename Scalar>
FeatureBlock<Scalar> repeat_align(const FeatureBlock<Scalar>& in, Index target_tokens,
                                  RepeatMode mode = RepeatMode::Tile) {
  const Index n = in.tokens();
  const Index f = detail::repeat_factor(n, target_tokens);
  auto out = FeatureBlock<Scalar>::zeros(in.batch, target_tokens, in.channels());
  for (Index b = 0; b < in.batch; ++b)
    for (Index i = 0; i < target_tokens; ++i) out.token(b, i) = in.token(b, detail::source_index(i, n, f, mode));
  return out;
}

/// Mean squared error over every element of the (aligned) blocks. The
/// gradient has the student's pre-alignment shape.
template <typename Scalar>
LossReport<Scalar> feat_kd_loss(const FeatureBlock<Scalar>& student, const FeatureBlock<Scalar>& teacher,
                                RepeatMode mode = RepeatMode::Tile) {
  if (student.batch != teacher.batch || student.channels() != teacher.channels()) {
    throw Error(Errc::ShapeMismatch, "feature blocks differ in batch or channels");
  }
  const Index n = student.tokens();
  const Index target = teacher.tokens();
  const Index f = detail::repeat_factor(n, target);
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(teacher.values.size());

  LossReport<Scalar> rep;
  rep.grad = Grid<Scalar>::Zero(student.values.rows(), student.values.cols());
  Scalar sum = 0;
  for (Index b = 0; b < student.batch; ++b) {
    for (Index i = 0; i < target; ++i) {
      const Index src = b * n + detail::source_index(i, n, f, mode);
      for (Index c = 0; c < student.channels(); ++c) {
        const Scalar d = student.values(src, c) - teacher.values(b * target + i, c);
        sum += d * d;
        rep.grad(src, c) += Scalar(2) * d * inv_n;
      }
    }
  }
  rep.value = sum * inv_n;
  return rep;
}

// ---------------------------------------------------------------------------
// Gaussian heatmaps

/// Largest radius r such that a box whose corners move by up to r still
/// overlaps the original with IoU >= min_overlap. Minimum over the three
/// corner-perturbation cases (translate, shrink, grow).
inline double gaussian_radius(double h, double w, double min_overlap = 0.7) {
  if (!(h > 0) || !(w > 0)) throw Error(Errc::DegenerateBox, "gaussian_radius needs a positive size");
  if (!(min_overlap > 0) || !(min_overlap < 1)) throw Error(Errc::InvalidArgument, "min_overlap must be in (0, 1)");
  const double o = min_overlap;
  // Translate both corners by r: (h - r)(w - r) = 2o/(1+o) * hw.
  const double b1 = h + w;
  const double c1 = w * h * (1 - o) / (1 + o);
  const double r1 = (b1 - std::sqrt(b1 * b1 - 4 * c1)) / 2;
  // Shrink: (h - 2r)(w - 2r) = o * hw.
  const double b2 = 2 * (h + w);
  const double c2 = (1 - o) * w * h;
  const double r2 = (b2 - std::sqrt(b2 * b2 - 16 * c2)) / 8;
  // Grow: hw = o (h + 2r)(w + 2r).
  const double a3 = 4 * o;
  const double b3 = 2 * o * (h + w);
  const double c3 = (o - 1) * w * h;
  const double r3 = (-b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / (2 * a3);
  return std::min({r1, r2, r3});
}

/// Object size-adaptive standard deviation: integer radius r gives a
/// (2r + 1)-cell diameter spanning six sigma.
inline double size_adaptive_sigma(double h, double w, double min_overlap = 0.7) {
  const double r = std::max(0.0, std::floor(gaussian_radius(h, w, min_overlap)));
  return (2 * r + 1) / 6;
}

/// exp(-((x - cx)^2 + (y - cy)^2) / (2 sigma^2)) on a rows x cols grid with
/// x the column index.
template <typename Scalar = double>
Grid<Scalar> gaussian_heatmap(double cx, double cy, double sigma, Index rows, Index cols) {
  if (!(sigma > 0)) throw Error(Errc::BadSigma, "sigma must be positive, got " + std::to_string(sigma));
  if (rows <= 0 || cols <= 0) throw Error(Errc::InvalidArgument, "heatmap dims must be positive");
  if (!(cx >= 0 && cx <= static_cast<double>(cols - 1) && cy >= 0 && cy <= static_cast<double>(rows - 1))) {
    throw Error(Errc::OutOfRange, "heatmap center outside the grid");
  }
  Grid<Scalar> out(rows, cols);
  const double denom = 2 * sigma * sigma;
  for (Index y = 0; y < rows; ++y) {
    for (Index x = 0; x < cols; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      out(y, x) = static_cast<Scalar>(std::exp(-(dx * dx + dy * dy) / denom));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian-weighted focal loss

struct GwfParams {
  double alpha = 2.0;
  double beta = 4.0;
  double eps = 1e-7;
};

/// Focal loss against a Gaussian target: cells with target exactly 1 use
/// -(1-p)^a log p, the rest -(1-t)^b p^a log(1-p). Predictions are clamped
/// to [eps, 1 - eps]; clamped cells get zero gradient.
template <typename DerivedP, typename DerivedT>
LossReport<typename DerivedP::Scalar> gwf_loss(const Eigen::MatrixBase<DerivedP>& pred,
                                               const Eigen::MatrixBase<DerivedT>& target,
                                               GwfParams params = {}) {
  using Scalar = typename DerivedP::Scalar;
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw Error(Errc::ShapeMismatch, "prediction and target heatmaps differ in shape");
  }
  const Scalar a = static_cast<Scalar>(params.alpha);
  const Scalar b = static_cast<Scalar>(params.beta);
  const Scalar lo = static_cast<Scalar>(params.eps);
  const Scalar hi = Scalar(1) - lo;

  LossReport<Scalar> rep;
  rep.grad = Grid<Scalar>::Zero(pred.rows(), pred.cols());
  Scalar sum = 0;
  for (Index i = 0; i < pred.rows(); ++i) {
    for (Index j = 0; j < pred.cols(); ++j) {
      const Scalar raw = pred(i, j);
      const bool clamped = raw < lo || raw > hi;
      const Scalar p = std::clamp(raw, lo, hi);
      const Scalar t = static_cast<Scalar>(target(i, j));
      Scalar term, dterm;
      if (t == Scalar(1)) {
        const Scalar q = Scalar(1) - p;
        const Scalar lp = std::log(p);
        term = std::pow(q, a) * lp;
        dterm = -a * std::pow(q, a - 1) * lp + std::pow(q, a) / p;
      } else {
        const Scalar w = std::pow(Scalar(1) - t, b);
        const Scalar l1p = std::log1p(-p);
        term = w * std::pow(p, a) * l1p;
        dterm = w * (a * std::pow(p, a - 1) * l1p - std::pow(p, a) / (Scalar(1) - p));
      }
      sum -= term;
      if (!clamped) rep.grad(i, j) = -dterm;
    }
  }
  rep.value = sum;
  return rep;
}

/// GWF between temperature-softened response maps: GWF(R_s / tau, R_t / tau).
template <typename DerivedS, typename DerivedT>
LossReport<typename DerivedS::Scalar> response_kd_loss(const Eigen::MatrixBase<DerivedS>& student,
                                                       const Eigen::MatrixBase<DerivedT>& teacher,
                                                       double tau = 2.0, GwfParams params = {}) {
  using Scalar = typename DerivedS::Scalar;
  if (!(tau > 0)) throw Error(Errc::BadTemperature, "temperature must be positive");
  const Scalar inv = Scalar(1) / static_cast<Scalar>(tau);
  auto rep = gwf_loss(student.derived() * inv, teacher.derived().template cast<Scalar>() * inv, params);
  rep.grad *= inv;
  return rep;
}

// ---------------------------------------------------------------------------
// Total objective

struct MainLosses {
  double focal = 0, l1 = 0, giou = 0;
};

struct KdLosses {
  double sim = 0, feat = 0, res = 0, tft = 0;
};

struct LossWeights {
  double lambda_focal = 1.0;
  double lambda_l1 = 5.0;
  double lambda_giou = 2.0;
  double eta_sim = 1.0;
  double eta_feat = 1.0;
  double eta_res = 1.0;
  double eta_tft = 1.0;
};

inline double total_loss(const MainLosses& main, const KdLosses& kd, const LossWeights& w = {}) {
  return w.lambda_focal * main.focal + w.lambda_l1 * main.l1 + w.lambda_giou * main.giou +
         w.eta_sim * kd.sim + w.eta_feat * kd.feat + w.eta_res * kd.res + w.eta_tft * kd.tft;
}

}  // namespace evkd
