#include <algorithm>
#include <atomic>
#include <exception>
#include <limits>
#include <vector>
#include <mutex>
#include <thread>

#include "cystseg/error.hpp"
#include "cystseg/image.hpp"
#include "cystseg/parallel.hpp"
#include "cystseg/random.hpp"

namespace cystseg {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::UnsupportedImageFormat: return "UnsupportedImageFormat";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateSlice: return "DegenerateSlice";
    case ErrorCode::DegenerateTarget: return "DegenerateTarget";
    case ErrorCode::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::TooManyLevels: return "TooManyLevels";
    case ErrorCode::InvalidScalePair: return "InvalidScalePair";
    case ErrorCode::LayersCrossed: return "LayersCrossed";
    case ErrorCode::DegenerateRegion: return "DegenerateRegion";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::FeatureLengthMismatch: return "FeatureLengthMismatch";
    case ErrorCode::CorruptModelFile: return "CorruptModelFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::InsufficientVolumes: return "InsufficientVolumes";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.data().begin(), bits_.data().end(), std::uint8_t{1}));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n <= 1) return 0;
  // Largest multiple of n that fits; draws above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x < limit) return x % n;
  }
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(workers - 1);
  for (std::size_t t = 1; t < workers; ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cystseg
