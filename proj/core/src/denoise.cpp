#include "cystseg/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "cystseg/error.hpp"

namespace cystseg {
namespace {

// Chambolle's dual iteration on double buffers.
class DualSolver {
 public:
  DualSolver(int w, int h, std::vector<double> f, double lambda)
      : w_(w), h_(h), f_(std::move(f)), lambda_(lambda),
        px_(f_.size(), 0.0), py_(f_.size(), 0.0), div_(f_.size(), 0.0), g_(f_.size(), 0.0) {}

  // One projection step; returns the relative L2 change of the dual field.
  double step(double tau) {
    divergence();
    for (std::size_t i = 0; i < f_.size(); ++i) g_[i] = div_[i] - lambda_ * f_[i];
    double change = 0.0;
    double norm = 0.0;
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const std::size_t i = idx(x, y);
        const double gx = x + 1 < w_ ? g_[i + 1] - g_[i] : 0.0;
        const double gy = y + 1 < h_ ? g_[i + w_] - g_[i] : 0.0;
        const double denom = 1.0 + tau * std::sqrt(gx * gx + gy * gy);
        const double nx = (px_[i] + tau * gx) / denom;
        const double ny = (py_[i] + tau * gy) / denom;
        change += (nx - px_[i]) * (nx - px_[i]) + (ny - py_[i]) * (ny - py_[i]);
        norm += nx * nx + ny * ny;
        px_[i] = nx;
        py_[i] = ny;
      }
    }
    if (change == 0.0) return 0.0;
    return std::sqrt(change / norm);
  }

  // u = f - div(p) / lambda.
  std::vector<double> primal() {
    divergence();
    std::vector<double> u(f_.size());
    for (std::size_t i = 0; i < f_.size(); ++i) u[i] = f_[i] - div_[i] / lambda_;
    return u;
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }

  // Negative adjoint of the forward-difference gradient with the last
  // row/column difference fixed at zero.
  void divergence() {
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const std::size_t i = idx(x, y);
        double d = 0.0;
        if (w_ > 1) {
          if (x == 0) d += px_[i];
          else if (x == w_ - 1) d -= px_[i - 1];
          else d += px_[i] - px_[i - 1];
        }
        if (h_ > 1) {
          if (y == 0) d += py_[i];
          else if (y == h_ - 1) d -= py_[i - w_];
          else d += py_[i] - py_[i - w_];
        }
        div_[i] = d;
      }
    }
  }

  int w_, h_;
  std::vector<double> f_;
  double lambda_;
  std::vector<double> px_, py_, div_, g_;
};

double tv_of(const std::vector<double>& u, int w, int h) {
  double tv = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double dx = x + 1 < w ? u[i + 1] - u[i] : 0.0;
      const double dy = y + 1 < h ? u[i + w] - u[i] : 0.0;
      tv += std::sqrt(dx * dx + dy * dy);
    }
  }
  return tv;
}

double objective_of(const std::vector<double>& u, const std::vector<double>& f, int w, int h, double lambda) {
  double fidelity = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) fidelity += (u[i] - f[i]) * (u[i] - f[i]);
  return 0.5 * lambda * fidelity + tv_of(u, w, h);
}

// Log-domain mapping for the optional multiplicative-noise mode.
constexpr double kLogOffset = 1.0 / 255.0;
const double kLogLo = std::log(kLogOffset);
const double kLogHi = std::log(1.0 + kLogOffset);

}  // namespace

void TvParams::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error(ErrorCode::InvalidArgument, "tv lambda must be > 0");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tv tol must be > 0");
  if (max_iter < 1) throw Error(ErrorCode::InvalidArgument, "tv max_iter must be >= 1");
}

Slice tv_denoise(const Slice& f, const TvParams& params, TvTrace* trace) {
  params.validate();
  std::vector<double> fd(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) throw Error(ErrorCode::NonFiniteInput, "slice contains NaN or Inf");
    fd[i] = f[i];
  }
  if (params.log_domain) {
    for (auto& v : fd) v = (std::log(std::max(v, 0.0) + kLogOffset) - kLogLo) / (kLogHi - kLogLo);
  }

  const int w = f.width();
  const int h = f.height();
  DualSolver solver(w, h, fd, params.lambda);
  if (trace) {
    trace->objective.clear();
    trace->objective.push_back(objective_of(fd, fd, w, h, params.lambda));
  }
  int it = 0;
  while (it < params.max_iter) {
    const double change = solver.step(kTvDualStep);
    ++it;
    if (trace && it % kTvCheckpointInterval == 0) {
      trace->objective.push_back(objective_of(solver.primal(), fd, w, h, params.lambda));
    }
    if (change < params.tol) break;
  }
  if (trace) trace->iterations = it;

  std::vector<double> u = solver.primal();
  if (params.log_domain) {
    for (auto& v : u) v = std::exp(v * (kLogHi - kLogLo) + kLogLo) - kLogOffset;
  }
  Slice out(w, h);
  for (std::size_t i = 0; i < u.size(); ++i) out[i] = static_cast<float>(std::clamp(u[i], 0.0, 1.0));
  return out;
}

double total_variation(const Slice& s) {
  std::vector<double> u(s.data().begin(), s.data().end());
  return tv_of(u, s.width(), s.height());
}

double tv_objective(const Slice& u, const Slice& f, double lambda) {
  if (!u.same_shape(f)) throw Error(ErrorCode::DimensionMismatch, "objective of differently sized slices");
  std::vector<double> ud(u.data().begin(), u.data().end());
  std::vector<double> fd(f.data().begin(), f.data().end());
  return objective_of(ud, fd, u.width(), u.height(), lambda);
}

}  // namespace cystseg
