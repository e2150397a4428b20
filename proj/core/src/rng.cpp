#include "pcgap/rng.hpp"

#include <cmath>

#include "pcgap/error.hpp"

namespace pcgap {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kStabilityViolation: return "StabilityViolation";
    case ErrorCode::kInvalidNoise: return "InvalidNoise";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::kDegenerateVariance: return "DegenerateVariance";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kNotPSD: return "NotPSD";
    case ErrorCode::kNoSignChange: return "NoSignChange";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kHiddenStateOverflow: return "HiddenStateOverflow";
    case ErrorCode::kAllDegenerate: return "AllDegenerate";
    case ErrorCode::kTrajectoryBlowup: return "TrajectoryBlowup";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kTaskFailed: return "TaskFailed";
    case ErrorCode::kInvalidCount: return "InvalidCount";
    case ErrorCode::kDegenerateTable: return "DegenerateTable";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kCorruptRecords: return "CorruptRecords";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed,
                          std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x632be59bd9b4e019ULL));
  return h;
}

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
  return (x << k) | (x >> (64 - k));
}
}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t x = derive_seed(seed, {stream});
  for (auto& word : s_) {
    x = splitmix64(x);
    word = x;
  }
  // All-zero state is the one fixed point of xoshiro.
  if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform();
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  // Lemire's nearly-divisionless method with rejection.
  std::uint64_t x = next_u64();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Rng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

}  // namespace pcgap
