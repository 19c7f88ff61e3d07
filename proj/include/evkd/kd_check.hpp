#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evkd/core.hpp"

// Self-test for the distillation and consistency gradients: analytic
// gradients against central differences on random instances.

namespace evkd {

/// Central differences of `f` at `x`, one coordinate at a time.
Gridd central_difference(const std::function<double(const Gridd&)>& f, const Gridd& x, double step = 1e-5);

/// ||a - b|| / max(||a||, ||b||, floor).
double relative_error(const Gridd& a, const Gridd& b, double floor = 1e-8);

struct KdCheckRow {
  std::string loss;
  std::size_t trials = 0;
  double max_error = 0;
  double tolerance = 0;
  bool pass() const noexcept { return max_error < tolerance; }
};

struct KdCheckReport {
  std::vector<KdCheckRow> rows;
  double seconds = 0;
  bool pass() const noexcept;
};

inline constexpr double kGradTolerance = 1e-4;
inline constexpr double kDftTolerance = 1e-10;

/// Rows: sim, feat, gwf, res, tft, consistency (relative gradient error)
/// and dft (absolute error against the direct double sum).
KdCheckReport run_kd_check(std::uint64_t seed, std::size_t trials);

/// CSV "loss,trials,max_error,tolerance,status". Errors are printed in
/// scientific notation with four fractional digits.
std::string format_kd_check(const KdCheckReport& report);

}  // namespace evkd
