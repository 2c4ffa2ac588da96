#pragma once

#include <vector>

#include "cystseg/image.hpp"

namespace cystseg {

struct TvParams {
  /// Data-fidelity weight in (lambda/2)||u - f||^2 + TV(u).
  double lambda = 8.0;
  double tol = 1e-4;
  int max_iter = 200;
  /// Denoise log(f) instead of f. Off by default.
  bool log_domain = false;

  void validate() const;
};

/// Objective values recorded every `kTvCheckpointInterval` iterations
/// (the first entry is the starting point u = f).
struct TvTrace {
  std::vector<double> objective;
  int iterations = 0;
};

inline constexpr int kTvCheckpointInterval = 10;
/// Fixed dual step of the projection iteration.
inline constexpr double kTvDualStep = 0.248;

/// Isotropic total-variation denoising by Chambolle's dual projection with
/// forward differences and reflecting boundaries. Input and output are on the
/// 0..1 scale; the output is clipped to [0, 1].
Slice tv_denoise(const Slice& f, const TvParams& params = {}, TvTrace* trace = nullptr);

/// Sum over pixels of sqrt(dx^2 + dy^2), forward differences, zero at the
/// last row and column.
double total_variation(const Slice& s);

/// (lambda/2)||u - f||^2 + TV(u).
double tv_objective(const Slice& u, const Slice& f, double lambda);

}  // namespace cystseg
