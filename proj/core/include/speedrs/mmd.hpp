#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "speedrs/path.hpp"
#include "speedrs/sigkernel.hpp"

namespace speedrs {

/// Unbiased first-order MMD^2 with the signature kernel. Inputs are
/// time-augmented paths; n, m >= 2 (TooFewSamples). May be negative.
double mmd1_unbiased(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                     const GoursatConfig& cfg);

/// Expanding-window signature-kernel Grams of one sample: grams[s](i, j) is
/// the kernel between paths i and j restricted to [t_0, t_s], together with
/// the ridge-smoothed representer coefficients (K_s + n lambda I)^{-1} K_s.
struct WindowEmbedding {
  std::vector<double> window_times;
  std::vector<Eigen::MatrixXd> grams;
  std::vector<Eigen::MatrixXd> coefficients;

  std::size_t samples() const { return grams.empty() ? 0 : static_cast<std::size_t>(grams.front().rows()); }
  std::size_t windows() const { return grams.size(); }
};

/// Builds window Grams with one node-grid Goursat solve per pair. Paths must
/// share one time grid (WindowGridMismatch). window_stride > 1 keeps every
/// stride-th stamp plus the last one.
WindowEmbedding window_embedding(std::span<const Path> paths, const StaticKernel& k, const GoursatConfig& cfg,
                                 double lambda, std::size_t window_stride = 1);

/// Ridge coefficients for precomputed Grams. Throws SingularSystem when
/// lambda < 1e-10 or the shifted Gram is not positive definite.
WindowEmbedding window_embedding_from_grams(std::vector<Eigen::MatrixXd> grams, double lambda);

/// Inner products between conditional-KME paths of two samples:
///   <x~^i_s, y~^j_t> = (k_s^{x_i})^T (K_s + n lambda I)^{-1} K^{xy}_{T,T} (K_t + m lambda I)^{-1} k_t^{y_j}
/// where k_s^{x_i} is column i of the window-s Gram.
class CondKmeContext {
 public:
  CondKmeContext(WindowEmbedding x, WindowEmbedding y, Eigen::MatrixXd gram_xy, double lambda);

  static CondKmeContext build(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                              const GoursatConfig& cfg, double lambda, std::size_t window_stride = 1);

  std::size_t n() const { return x_.samples(); }
  std::size_t m() const { return y_.samples(); }
  std::size_t windows_x() const { return x_.windows(); }
  std::size_t windows_y() const { return y_.windows(); }
  double lambda() const { return lambda_; }
  const WindowEmbedding& x() const { return x_; }
  const WindowEmbedding& y() const { return y_; }
  const Eigen::MatrixXd& gram_xy() const { return gram_xy_; }

  /// Bilinear form with arbitrary selector vectors in place of Gram columns.
  double inner(const Eigen::VectorXd& kx, std::size_t s, const Eigen::VectorXd& ky, std::size_t t) const;

  /// (windows_x * n) x (windows_y * m) matrix; entry (s*n + i, t*m + j) is
  /// <x~^i_s, y~^j_t>.
  Eigen::MatrixXd all_inner() const;

 private:
  WindowEmbedding x_, y_;
  Eigen::MatrixXd gram_xy_;
  double lambda_;
};

double cond_kme_inner(const CondKmeContext& ctx, std::size_t i, std::size_t j, std::size_t s, std::size_t t);

struct Mmd2Options {
  StaticKernel kernel = StaticKernel::rbf(0.5);
  GoursatConfig inner;         // first-level (path) solves
  GoursatConfig outer;         // second-level solves over the window grid
  // Static kernel on the RKHS-valued conditional-KME paths. RBF acts on
  // RKHS distances computed from the inner products.
  StaticKernel outer_kernel = StaticKernel::rbf(2.0);
  double lambda = 1e-3;
  std::size_t window_stride = 1;
};

struct Mmd2Result {
  double value = 0.0;
  // Second-level signature kernels between conditional-KME paths.
  Eigen::MatrixXd k_xx, k_yy, k_xy;
};

/// Unbiased second-order MMD^2. Inputs are time-augmented paths; each side's
/// paths share one time grid, which is also the window grid. Samples are
/// put in canonical order first, so the value is exactly invariant to
/// shuffling either sample.
Mmd2Result mmd2_detailed(std::span<const Path> a, std::span<const Path> b, const Mmd2Options& opt);
double mmd2_unbiased(std::span<const Path> a, std::span<const Path> b, const Mmd2Options& opt);
double mmd2_unbiased(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                     const GoursatConfig& cfg, double lambda);

/// Time-augmented, start-normalized copies of a bundle's paths, the input
/// form for the MMD oracle.
std::vector<Path> kernel_inputs(const PathBundle& bundle);

/// U-statistic combination of three Gram-like matrices; self terms exclude
/// the diagonal.
double unbiased_combination(const Eigen::MatrixXd& kxx, const Eigen::MatrixXd& kyy, const Eigen::MatrixXd& kxy);

}  // namespace speedrs
