#include "evkd/inference.hpp"

namespace evkd {

AsrStep asr_step(const AsrState& state, double iou_prev, const AsrParams& params) {
  AsrStep out{state, 1.0};
  if (iou_prev < params.tau) {
    ++out.state.consecutive_failures;
    if (out.state.consecutive_failures >= params.k) out.state.expanded = true;
  } else {
    out.state = AsrState{};
  }
  out.multiplier = out.state.expanded ? params.theta : 1.0;
  return out;
}

std::string_view lora_target_name(LoraTarget t) noexcept {
  switch (t) {
    case LoraTarget::Mlp: return "mlp";
    case LoraTarget::AttnProj: return "attn.proj";
    case LoraTarget::AttnQkv: return "attn.qkv";
  }
  return "?";
}

std::vector<double> sparsity_levels(std::size_t n) {
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) rho[i] = 1.0 - static_cast<double>(i) / static_cast<double>(n);
  return rho;
}

double event_draw(std::uint64_t seed, std::uint64_t index) noexcept {
  // splitmix64 over the combined key
  std::uint64_t z = seed * 0x9E3779B97F4A7C15ull + index + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

std::vector<EventStream> template_augment(const EventStream& window, std::size_t n, std::uint64_t seed) {
  if (window.empty()) throw Error(Errc::EmptyWindow, "template window has no events");
  if (n < 1) throw Error(Errc::InvalidArgument, "need at least one template");
  const auto rho = sparsity_levels(n);
  std::vector<EventStream> out(n, EventStream{window.geometry, {}});
  out[0].events = window.events;
  for (std::size_t i = 1; i < n; ++i) out[i].events.reserve(static_cast<std::size_t>(rho[i] * window.size()) + 16);
  for (std::size_t e = 0; e < window.size(); ++e) {
    const double u = event_draw(seed, e);
    for (std::size_t i = 1; i < n; ++i) {
      if (u < rho[i]) out[i].events.push_back(window.events[e]);
    }
  }
  return out;
}

}  // namespace evkd
