#include "evkd/kd_check.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "evkd/fourier.hpp"
#include "evkd/inference.hpp"
#include "evkd/kd_losses.hpp"

namespace evkd {

Gridd central_difference(const std::function<double(const Gridd&)>& f, const Gridd& x, double step) {
  Gridd g(x.rows(), x.cols());
  Gridd probe = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      const double orig = probe(i, j);
      probe(i, j) = orig + step;
      const double up = f(probe);
      probe(i, j) = orig - step;
      const double down = f(probe);
      probe(i, j) = orig;
      g(i, j) = (up - down) / (2 * step);
    }
  }
  return g;
}

double relative_error(const Gridd& a, const Gridd& b, double floor) {
  const double denom = std::max({a.norm(), b.norm(), floor});
  return (a - b).norm() / denom;
}

bool KdCheckReport::pass() const noexcept {
  return std::all_of(rows.begin(), rows.end(), [](const KdCheckRow& r) { return r.pass(); });
}

namespace {

Gridd uniform(std::mt19937_64& rng, Index r, Index c, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Gridd m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Index pick(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

// Stacks a list of equally shaped grids vertically so one FD pass covers all.
Gridd stack(std::span<const Gridd> parts) {
  Gridd out(parts[0].rows() * static_cast<Index>(parts.size()), parts[0].cols());
  for (std::size_t k = 0; k < parts.size(); ++k) out.middleRows(static_cast<Index>(k) * parts[0].rows(), parts[0].rows()) = parts[k];
  return out;
}

std::vector<Gridd> unstack(const Gridd& x, std::size_t n) {
  const Index r = x.rows() / static_cast<Index>(n);
  std::vector<Gridd> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back(x.middleRows(static_cast<Index>(k) * r, r));
  return out;
}

Gridd heatmap_target(std::mt19937_64& rng, Index rows, Index cols) {
  const double cx = static_cast<double>(pick(rng, 0, cols - 1));
  const double cy = static_cast<double>(pick(rng, 0, rows - 1));
  return gaussian_heatmap(cx, cy, std::uniform_real_distribution<double>(0.8, 2.5)(rng), rows, cols);
}

double check_sim(std::mt19937_64& rng) {
  const Index n = pick(rng, 2, 5);
  const Index target = n * pick(rng, 1, 3);
  SimKdOptions opts;
  opts.repeat = (rng() & 1) ? RepeatMode::Tile : RepeatMode::Block;
  opts.reduction = (rng() & 1) ? Reduction::Sum : Reduction::Mean;
  const Gridd s = uniform(rng, n, n, -1, 1);
  const Gridd t = uniform(rng, target, target, -1, 1);
  const auto rep = sim_kd_loss(s, t, opts);
  const auto fd = central_difference([&](const Gridd& x) { return sim_kd_loss(x, t, opts).value; }, s);
  return relative_error(rep.grad, fd);
}

double check_feat(std::mt19937_64& rng) {
  const Index batch = pick(rng, 1, 2);
  const Index n = pick(rng, 2, 4);
  const Index target = n * pick(rng, 1, 3);
  const Index ch = pick(rng, 1, 4);
  const auto mode = (rng() & 1) ? RepeatMode::Tile : RepeatMode::Block;
  FeatureBlock<double> s{batch, uniform(rng, batch * n, ch, -1, 1)};
  const FeatureBlock<double> t{batch, uniform(rng, batch * target, ch, -1, 1)};
  const auto rep = feat_kd_loss(s, t, mode);
  const auto fd = central_difference(
      [&](const Gridd& x) { return feat_kd_loss(FeatureBlock<double>{batch, x}, t, mode).value; }, s.values);
  return relative_error(rep.grad, fd);
}

double check_gwf(std::mt19937_64& rng) {
  const Index r = pick(rng, 3, 8), c = pick(rng, 3, 8);
  const Gridd p = uniform(rng, r, c, 0.05, 0.95);
  const Gridd t = heatmap_target(rng, r, c);
  const auto rep = gwf_loss(p, t);
  const auto fd = central_difference([&](const Gridd& x) { return gwf_loss(x, t).value; }, p);
  return relative_error(rep.grad, fd);
}

double check_res(std::mt19937_64& rng) {
  const Index r = pick(rng, 3, 8), c = pick(rng, 3, 8);
  const double tau = std::uniform_real_distribution<double>(1.0, 4.0)(rng);
  const Gridd s = uniform(rng, r, c, 0.05 * tau, 0.95 * tau);
  const Gridd t = heatmap_target(rng, r, c) * tau;
  const auto rep = response_kd_loss(s, t, tau);
  const auto fd = central_difference([&](const Gridd& x) { return response_kd_loss(x, t, tau).value; }, s);
  return relative_error(rep.grad, fd);
}

double check_tft(std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(pick(rng, 1, 4));
  const Index r = pick(rng, 3, 8), c = pick(rng, 3, 8);
  TftOptions opts;
  opts.signature.convention = (rng() & 1) ? PhaseConvention::Standard : PhaseConvention::SharedPeriod;
  std::vector<Gridd> s, t;
  for (std::size_t k = 0; k < n; ++k) {
    s.push_back(uniform(rng, r, c, -2, 2));
    t.push_back(uniform(rng, r, c, -2, 2));
  }
  const auto rep = tft_kd_loss<double>(s, t, opts);
  const auto fd = central_difference(
      [&](const Gridd& x) {
        const auto parts = unstack(x, n);
        return tft_kd_loss<double>(parts, t, opts).value;
      },
      stack(s));
  return relative_error(stack(rep.grads), fd);
}

double check_consistency(std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(pick(rng, 2, 4));
  const Index r = pick(rng, 2, 8), c = pick(rng, 2, 8);
  const auto input = (rng() & 1) ? ConsistencyInput::Logits : ConsistencyInput::Probabilities;
  std::vector<Gridd> maps;
  for (std::size_t k = 0; k < n; ++k) maps.push_back(uniform(rng, r, c, -2, 2));
  const auto rep = consistency_loss<double>(maps, input);
  const auto fd = central_difference(
      [&](const Gridd& x) {
        const auto parts = unstack(x, n);
        return consistency_loss<double>(parts, input).value;
      },
      stack(maps));
  return relative_error(stack(rep.grads), fd);
}

double check_dft(std::mt19937_64& rng) {
  const Index m = pick(rng, 1, 16), n = pick(rng, 1, 16);
  const auto conv = (rng() & 1) ? PhaseConvention::Standard : PhaseConvention::SharedPeriod;
  const Gridd x = uniform(rng, m, n, -1, 1);
  const auto fast = dft2d(x, conv);
  const double pn = conv == PhaseConvention::Standard ? static_cast<double>(n) : static_cast<double>(m);
  double worst = 0;
  for (Index u = 0; u < m; ++u) {
    for (Index v = 0; v < n; ++v) {
      std::complex<double> acc = 0;
      for (Index a = 0; a < m; ++a)
        for (Index b = 0; b < n; ++b) {
          const double ang = 2 * std::numbers::pi * (static_cast<double>(u * a) / m + static_cast<double>(v * b) / pn);
          acc += x(a, b) * std::polar(1.0, ang);
        }
      acc /= static_cast<double>(m * n);
      worst = std::max({worst, std::abs(acc.real() - fast.real(u, v)), std::abs(acc.imag() - fast.imag(u, v))});
    }
  }
  return worst;
}

}  // namespace

KdCheckReport run_kd_check(std::uint64_t seed, std::size_t trials) {
  struct Suite {
    const char* name;
    double (*fn)(std::mt19937_64&);
    double tol;
  };
  const Suite suites[] = {
      {"sim", check_sim, kGradTolerance},      {"feat", check_feat, kGradTolerance},
      {"gwf", check_gwf, kGradTolerance},      {"res", check_res, kGradTolerance},
      {"tft", check_tft, kGradTolerance},      {"consistency", check_consistency, kGradTolerance},
      {"dft", check_dft, kDftTolerance},
  };
  const auto start = std::chrono::steady_clock::now();
  KdCheckReport report;
  std::uint64_t stream = 0;
  for (const auto& s : suites) {
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + ++stream);
    KdCheckRow row{s.name, trials, 0.0, s.tol};
    for (std::size_t i = 0; i < trials; ++i) row.max_error = std::max(row.max_error, s.fn(rng));
    report.rows.push_back(row);
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string format_kd_check(const KdCheckReport& report) {
  std::string out = "loss,trials,max_error,tolerance,status\n";
  char buf[64];
  for (const auto& r : report.rows) {
    out += r.loss + "," + std::to_string(r.trials) + ",";
    std::snprintf(buf, sizeof buf, "%.4e,%.4e,", r.max_error, r.tolerance);
    out += buf;
    out += r.pass() ? "PASS\n" : "FAIL\n";
  }
  return out;
}

}  // namespace evkd
