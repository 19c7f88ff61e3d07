#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>

#include "evkd/core.hpp"
#include "evkd/kd_losses.hpp"

// Temporal Fourier distillation: score maps -> softmax -> 2-D inverse-style
// DFT (positive exponent, 1/(MN) scale) -> real part -> GWF between student
// and teacher signatures.

namespace evkd {

/// Softmax over every cell of the grid, max-subtracted.
template <typename Derived>
Grid<typename Derived::Scalar> softmax2d(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  Grid<Scalar> out = (logits.array() - logits.maxCoeff()).exp().matrix();
  out /= out.sum();
  return out;
}

/// Pulls a gradient w.r.t. softmax probabilities back onto the logits.
template <typename DerivedP, typename DerivedG>
Grid<typename DerivedP::Scalar> softmax2d_backward(const Eigen::MatrixBase<DerivedP>& probs,
                                                   const Eigen::MatrixBase<DerivedG>& grad_probs) {
  const auto dot = probs.cwiseProduct(grad_probs).sum();
  return probs.cwiseProduct((grad_probs.array() - dot).matrix());
}

enum class PhaseConvention {
  Standard,      // exp(i 2pi (km/M + ln/N))
  SharedPeriod,  // exp(i 2pi/M (km + ln)): both phases over M
};

template <typename Scalar>
struct SpectralMap {
  Grid<Scalar> real;
  Grid<Scalar> imag;
};

namespace detail {

template <typename Scalar>
Grid<std::complex<Scalar>> phase_matrix(Index size, Index period) {
  Grid<std::complex<Scalar>> e(size, size);
  for (Index a = 0; a < size; ++a) {
    for (Index b = 0; b < size; ++b) {
      // Reduce the phase index before scaling to keep the angle exact.
      const auto k = static_cast<double>((a * b) % period);
      const double angle = 2.0 * std::numbers::pi * k / static_cast<double>(period);
      e(a, b) = {static_cast<Scalar>(std::cos(angle)), static_cast<Scalar>(std::sin(angle))};
    }
  }
  return e;
}

}  // namespace detail

/// x[m,n] = 1/(MN) sum_k sum_l X[k,l] exp(i 2pi (km/M + ln/N)), evaluated
/// separably as E_M X E_N.
template <typename Derived>
SpectralMap<typename Derived::Scalar> dft2d(const Eigen::MatrixBase<Derived>& grid,
                                            PhaseConvention conv = PhaseConvention::Standard) {
  using Scalar = typename Derived::Scalar;
  using Complex = std::complex<Scalar>;
  const Index m = grid.rows();
  const Index n = grid.cols();
  if (m < 1 || n < 1) throw Error(Errc::InvalidArgument, "dft2d needs a non-empty grid");
  const auto em = detail::phase_matrix<Scalar>(m, m);
  const auto en = detail::phase_matrix<Scalar>(n, conv == PhaseConvention::Standard ? n : m);
  const Grid<Complex> x = grid.template cast<Complex>();
  Grid<Complex> out = em * x * en;
  out /= static_cast<Scalar>(m * n);
  return {out.real(), out.imag()};
}

struct SignatureOptions {
  PhaseConvention convention = PhaseConvention::Standard;
  double eps = 1e-7;
};

template <typename Scalar>
struct TemporalSignature {
  Grid<Scalar> values;  // min-max normalized into [eps, 1 - eps]
  Grid<Scalar> real;    // real part before normalization
  Grid<Scalar> probs;   // softmax of the input map
  bool degenerate = false;  // max == min; values is the constant 1/2 grid
};

template <typename Derived>
TemporalSignature<typename Derived::Scalar> temporal_signature(const Eigen::MatrixBase<Derived>& map,
                                                               SignatureOptions opts = {}) {
  using Scalar = typename Derived::Scalar;
  TemporalSignature<Scalar> sig;
  sig.probs = softmax2d(map);
  sig.real = dft2d(sig.probs, opts.convention).real;
  const Scalar lo = sig.real.minCoeff();
  const Scalar hi = sig.real.maxCoeff();
  if (!(hi > lo)) {
    sig.degenerate = true;
    sig.values = Grid<Scalar>::Constant(map.rows(), map.cols(), Scalar(0.5));
    return sig;
  }
  const auto eps = static_cast<Scalar>(opts.eps);
  const Scalar scale = (Scalar(1) - 2 * eps) / (hi - lo);
  sig.values = ((sig.real.array() - lo) * scale + eps).matrix();
  return sig;
}

/// Backpropagates a gradient on the normalized signature to the input logits.
template <typename Scalar>
Grid<Scalar> temporal_signature_backward(const TemporalSignature<Scalar>& sig,
                                         const Grid<Scalar>& grad_values, SignatureOptions opts = {}) {
  if (sig.degenerate) return Grid<Scalar>::Zero(grad_values.rows(), grad_values.cols());
  Index imin = 0, jmin = 0, imax = 0, jmax = 0;
  const Scalar lo = sig.real.minCoeff(&imin, &jmin);
  const Scalar hi = sig.real.maxCoeff(&imax, &jmax);
  const Scalar range = hi - lo;
  const Scalar scale = (Scalar(1) - 2 * static_cast<Scalar>(opts.eps)) / range;

  // values = eps + scale * (real - lo); scale itself depends on lo and hi.
  Grid<Scalar> g_real = grad_values * scale;
  const Scalar through_offset = grad_values.sum() * scale;
  const Scalar through_scale = (grad_values.array() * (sig.real.array() - lo)).sum() * scale / range;
  g_real(imin, jmin) += -through_offset + through_scale;
  g_real(imax, jmax) -= through_scale;

  // The real-part DFT kernel cos(2pi(km/M + ln/N)) is symmetric, so the
  // adjoint is the same transform.
  const Grid<Scalar> g_probs = dft2d(g_real, opts.convention).real;
  return softmax2d_backward(sig.probs, g_probs);
}

struct TftOptions {
  SignatureOptions signature;
  GwfParams gwf;
};

/// Mean over frames of GWF(signature(student_i), signature(teacher_i)).
template <typename Scalar>
SequenceLossReport<Scalar> tft_kd_loss(std::span<const Grid<Scalar>> student_maps,
                                       std::span<const Grid<Scalar>> teacher_maps, TftOptions opts = {}) {
  if (student_maps.size() != teacher_maps.size()) {
    throw Error(Errc::LengthMismatch, std::to_string(student_maps.size()) + " student vs " +
                                          std::to_string(teacher_maps.size()) + " teacher maps");
  }
  if (student_maps.empty()) throw Error(Errc::LengthMismatch, "need at least one frame");
  const auto inv_n = Scalar(1) / static_cast<Scalar>(student_maps.size());

  SequenceLossReport<Scalar> rep;
  rep.grads.reserve(student_maps.size());
  for (std::size_t f = 0; f < student_maps.size(); ++f) {
    const auto& s = student_maps[f];
    const auto& t = teacher_maps[f];
    if (s.rows() != t.rows() || s.cols() != t.cols()) {
      throw Error(Errc::ShapeMismatch, "frame " + std::to_string(f) + " maps differ in shape");
    }
    const auto sig_s = temporal_signature(s, opts.signature);
    const auto sig_t = temporal_signature(t, opts.signature);
    const auto frame = gwf_loss(sig_s.values, sig_t.values, opts.gwf);
    rep.value += frame.value * inv_n;
    rep.grads.push_back(temporal_signature_backward<Scalar>(sig_s, frame.grad * inv_n, opts.signature));
  }
  return rep;
}

}  // namespace evkd
