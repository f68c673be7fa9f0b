#pragma once

// Cue kernels: exp-chi2 on the (nonnegative) EMG marginals, Gaussian RBF on
// the visual features, and their convex combination.

#include "mmgrasp/common.hpp"
#include "mmgrasp/features.hpp"
#include "mmgrasp/parallel.hpp"

#include <cmath>
#include <span>

namespace mmgrasp::kernels {

struct KernelConfig {
  double gamma_chi2 = 0x1p-10;
  double gamma_rbf = 0x1p-16;
  double w_emg = 0.5;
  double w_cnn = 0.5;

  void validate() const {
    if (!(gamma_chi2 > 0.0) || !(gamma_rbf > 0.0)) throw ValidationError("kernel gammas must be positive");
    if (!(w_emg >= 0.0 && w_emg <= 1.0 && w_cnn >= 0.0 && w_cnn <= 1.0)) throw ValidationError("kernel weights must lie in [0, 1]");
    if (std::abs(w_emg + w_cnn - 1.0) > 1e-12) throw ValidationError("kernel weights must sum to 1");
  }

  bool operator==(const KernelConfig&) const = default;
};

// sum (x_i - y_i)^2 / (x_i + y_i), with 0/0 terms taken as 0.
inline double chi2_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("chi2: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0.0 || y[i] < 0.0) throw DataError("chi2 kernel requires nonnegative inputs");
    const double s = x[i] + y[i];
    if (s > 0.0) {
      const double diff = x[i] - y[i];
      d += diff * diff / s;
    }
  }
  return d;
}

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("rbf: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    d += diff * diff;
  }
  return d;
}

inline double k_chi2(std::span<const double> x, std::span<const double> y, double gamma) {
  return std::exp(-gamma * chi2_distance(x, y));
}

inline double k_rbf(std::span<const double> x, std::span<const double> y, double gamma) {
  return std::exp(-gamma * squared_distance(x, y));
}

// Combination from precomputed cue distances. A cue with zero weight is
// skipped, which is exact since both kernels are finite.
inline double combine(double chi2_dist, double sq_dist, const KernelConfig& cfg) {
  double k = 0.0;
  if (cfg.w_emg > 0.0) k += cfg.w_emg * std::exp(-cfg.gamma_chi2 * chi2_dist);
  if (cfg.w_cnn > 0.0) k += cfg.w_cnn * std::exp(-cfg.gamma_rbf * sq_dist);
  return k;
}

struct SampleView {
  std::span<const double> emg;
  std::span<const double> vis;
};

inline SampleView sample(const features::MulticueDataset& ds, std::size_t i) {
  const auto row = static_cast<Eigen::Index>(i);
  return {{ds.emg.data() + row * ds.emg.cols(), static_cast<std::size_t>(ds.emg.cols())},
          {ds.vis.data() + row * ds.vis.cols(), static_cast<std::size_t>(ds.vis.cols())}};
}

inline double k_multicue(const SampleView& a, const SampleView& b, const KernelConfig& cfg) {
  cfg.validate();
  return combine(chi2_distance(a.emg, b.emg), squared_distance(a.vis, b.vis), cfg);
}

inline void check_compatible(const features::MulticueDataset& a, const features::MulticueDataset& b) {
  if (a.emg_dims() != b.emg_dims() || a.vis_dims() != b.vis_dims()) throw DataError("datasets have different feature dimensions");
}

namespace detail {

// Unchecked hot loops; dataset validation guarantees nonnegative EMG features.
inline double chi2_unchecked(const double* x, const double* y, std::size_t n) {
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s = x[i] + y[i];
    const double diff = x[i] - y[i];
    d += s > 0.0 ? diff * diff / s : 0.0;
  }
  return d;
}

inline double sq_unchecked(const double* x, const double* y, std::size_t n) {
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double diff = x[i] - y[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace detail

// Cue distance matrices between rows [a_begin, a_end) of A and rows
// [b_begin, b_end) of B.
struct Distances {
  Matrix chi2;  // [rows x cols]; empty if not requested
  Matrix sq;
};

inline Distances distances(const features::MulticueDataset& a, std::size_t a_begin, std::size_t a_end,
                           const features::MulticueDataset& b, std::size_t b_begin, std::size_t b_end,
                           std::size_t jobs = 1, bool need_chi2 = true, bool need_sq = true) {
  check_compatible(a, b);
  if (a_end < a_begin || a_end > a.size() || b_end < b_begin || b_end > b.size()) throw DataError("row range out of bounds");
  const auto rows = static_cast<Eigen::Index>(a_end - a_begin);
  const auto cols = static_cast<Eigen::Index>(b_end - b_begin);
  const std::size_t de = a.emg_dims();
  const std::size_t dv = a.vis_dims();
  Distances d;
  if (need_chi2) d.chi2.resize(rows, cols);
  if (need_sq) d.sq.resize(rows, cols);
  parallel_for(static_cast<std::size_t>(cols), jobs, [&](std::size_t jj) {
    const auto col = static_cast<Eigen::Index>(jj);
    const auto j = static_cast<Eigen::Index>(b_begin + jj);
    const double* be = b.emg.data() + j * b.emg.cols();
    const double* bv = b.vis.data() + j * b.vis.cols();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto ai = static_cast<Eigen::Index>(a_begin) + i;
      if (need_chi2) d.chi2(i, col) = detail::chi2_unchecked(a.emg.data() + ai * a.emg.cols(), be, de);
      if (need_sq) d.sq(i, col) = detail::sq_unchecked(a.vis.data() + ai * a.vis.cols(), bv, dv);
    }
  });
  return d;
}

inline Distances distances(const features::MulticueDataset& a, std::size_t a_begin, std::size_t a_end,
                           const features::MulticueDataset& b, std::size_t jobs = 1, bool need_chi2 = true,
                           bool need_sq = true) {
  return distances(a, a_begin, a_end, b, 0, b.size(), jobs, need_chi2, need_sq);
}

inline Distances distances(const features::MulticueDataset& a, const features::MulticueDataset& b,
                           std::size_t jobs = 1) {
  return distances(a, 0, a.size(), b, jobs);
}

namespace detail {

// k += w * exp(-gamma * dist). Eigen vectorizes exp but evaluates the last
// size % packet entries with the scalar exp, which rounds differently, so an
// entry's value would depend on the block shape. Exponentiating aligned
// buffers padded to whole packets sends every entry through the packet path.
template <typename D>
void add_weighted_exp(Matrix& k, const Eigen::MatrixBase<D>& dist, double w, double gamma) {
  constexpr Eigen::Index kPad = 16;
  const Eigen::Index rows = k.rows();
  const Eigen::Index chunk = std::max<Eigen::Index>(1, 16384 / std::max<Eigen::Index>(rows, 1));
  Eigen::ArrayXd buf;
  for (Eigen::Index c0 = 0; c0 < k.cols(); c0 += chunk) {
    const Eigen::Index nc = std::min(chunk, k.cols() - c0);
    const Eigen::Index n = rows * nc;
    buf.setZero((n + kPad - 1) / kPad * kPad);
    Eigen::Map<Eigen::ArrayXXd>(buf.data(), rows, nc) = -gamma * dist.middleCols(c0, nc).array();
    buf = buf.exp();
    k.middleCols(c0, nc).array() += w * Eigen::Map<const Eigen::ArrayXXd>(buf.data(), rows, nc);
  }
}

}  // namespace detail

// Elementwise combination of distance blocks. Every Gram matrix in the
// pipeline goes through this function so identical inputs give identical
// kernels regardless of the code path.
template <typename D1, typename D2>
Matrix kernel_from_distances(const Eigen::MatrixBase<D1>& chi2, const Eigen::MatrixBase<D2>& sq,
                             const KernelConfig& cfg) {
  cfg.validate();
  const bool use_chi2 = cfg.w_emg > 0.0;
  const bool use_sq = cfg.w_cnn > 0.0;
  const Eigen::Index rows = use_chi2 ? chi2.rows() : sq.rows();
  const Eigen::Index cols = use_chi2 ? chi2.cols() : sq.cols();
  Matrix k = Matrix::Zero(rows, cols);
  if (use_chi2) detail::add_weighted_exp(k, chi2, cfg.w_emg, cfg.gamma_chi2);
  if (use_sq) detail::add_weighted_exp(k, sq, cfg.w_cnn, cfg.gamma_rbf);
  return k;
}

inline Matrix kernel_from_distances(const Distances& d, const KernelConfig& cfg) {
  return kernel_from_distances(d.chi2, d.sq, cfg);
}

// G[i][j] = k_multicue(A_i, B_j), assembled in column blocks. When A and B
// are the same object only the lower triangle is computed and mirrored.
inline Matrix gram(const features::MulticueDataset& a, const features::MulticueDataset& b, const KernelConfig& cfg,
                   std::size_t jobs = 1, std::size_t block = 512) {
  cfg.validate();
  check_compatible(a, b);
  if (a.size() > 0 && b.size() > 0 && (a.emg.minCoeff() < 0.0 || b.emg.minCoeff() < 0.0)) throw DataError("chi2 kernel requires nonnegative inputs");
  const bool symmetric = &a == &b;
  Matrix g(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t c0 = 0; c0 < b.size(); c0 += block) {
    const std::size_t c1 = std::min(c0 + block, b.size());
    const std::size_t r0 = symmetric ? c0 : 0;
    const auto d = distances(a, r0, a.size(), b, c0, c1, jobs, cfg.w_emg > 0.0, cfg.w_cnn > 0.0);
    g.block(static_cast<Eigen::Index>(r0), static_cast<Eigen::Index>(c0), static_cast<Eigen::Index>(a.size() - r0),
            static_cast<Eigen::Index>(c1 - c0)) = kernel_from_distances(d, cfg);
  }
  if (symmetric) g.triangularView<Eigen::StrictlyUpper>() = g.transpose();
  return g;
}

}  // namespace mmgrasp::kernels
