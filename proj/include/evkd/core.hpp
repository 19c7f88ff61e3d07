#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace evkd {

// Dense grids are row-major so that (row, col) == (y, x) and flat order
// matches the on-disk layouts.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Gridd = Grid<double>;
using Vecd = Vec<double>;
using Index = Eigen::Index;

enum class Errc {
  MalformedRecord,
  OutOfRange,
  EmptyStream,
  NonDivisible,
  DegenerateBox,
  ShapeMismatch,
  NonMultiple,
  BadSigma,
  BadTemperature,
  LengthMismatch,
  EmptyWindow,
  VideoTooShort,
  EmptyRun,
  AllAbsent,
  MissingSplitFile,
  DuplicateVideoId,
  MalformedLine,
  InvalidBox,
  InvalidArgument,
  Io,
};

std::string_view errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

// Value plus gradient with respect to the student-side input.
template <typename Scalar>
struct LossReport {
  Scalar value{};
  Grid<Scalar> grad;
};

// Same, for losses taking a list of student inputs.
template <typename Scalar>
struct SequenceLossReport {
  Scalar value{};
  std::vector<Grid<Scalar>> grads;
};

}  // namespace evkd
