#include "speedrs/mmd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "speedrs/error.hpp"
#include "speedrs/parallel.hpp"

namespace speedrs {
namespace {

constexpr double kMinLambda = 1e-10;

std::vector<Path> canonical(std::span<const Path> paths) {
  std::vector<Path> out(paths.begin(), paths.end());
  std::stable_sort(out.begin(), out.end(), path_less);
  return out;
}

double off_diagonal_sum(const Eigen::MatrixXd& k) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < k.cols(); ++j)
    for (Eigen::Index i = 0; i < k.rows(); ++i)
      if (i != j) s += k(i, j);
  return s;
}

std::vector<std::size_t> window_indices(std::size_t length, std::size_t stride) {
  if (stride == 0) fail(Errc::InvalidArgument, "window stride must be >= 1");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < length; i += stride) idx.push_back(i);
  if (idx.back() != length - 1) idx.push_back(length - 1);
  return idx;
}

Eigen::MatrixXd all_inner_products(const WindowEmbedding& x, const WindowEmbedding& y, const Eigen::MatrixXd& gram_xy) {
  const auto n = static_cast<Eigen::Index>(x.samples()), m = static_cast<Eigen::Index>(y.samples());
  const auto sx = static_cast<Eigen::Index>(x.windows()), sy = static_cast<Eigen::Index>(y.windows());
  Eigen::MatrixXd ux(n, sx * n), uy(m, sy * m);
  for (Eigen::Index s = 0; s < sx; ++s) ux.middleCols(s * n, n) = x.coefficients[static_cast<std::size_t>(s)];
  for (Eigen::Index t = 0; t < sy; ++t) uy.middleCols(t * m, m) = y.coefficients[static_cast<std::size_t>(t)];
  const Eigen::MatrixXd right = gram_xy * uy;
  return ux.transpose() * right;
}

// Static Gram between conditional-KME path i of X and path j of Y over the
// window grids. The RBF form uses |a - b|^2 = <a,a> + <b,b> - 2<a,b>.
Eigen::MatrixXd second_level_gram(const Eigen::MatrixXd& big, const Eigen::VectorXd& norms_x,
                                  const Eigen::VectorXd& norms_y, std::size_t n, std::size_t sx, std::size_t m,
                                  std::size_t sy, std::size_t i, std::size_t j, const StaticKernel& k) {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(sx), static_cast<Eigen::Index>(sy));
  const double scale = k.kind == StaticKernel::Kind::Rbf ? -0.5 / (k.sigma * k.sigma) : 0.0;
  for (std::size_t t = 0; t < sy; ++t)
    for (std::size_t s = 0; s < sx; ++s) {
      const auto r = static_cast<Eigen::Index>(s * n + i), c = static_cast<Eigen::Index>(t * m + j);
      const double ip = big(r, c);
      g(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) =
          k.kind == StaticKernel::Kind::Linear ? ip : std::exp(scale * std::max(0.0, norms_x(r) + norms_y(c) - 2.0 * ip));
    }
  return g;
}

// Second-level kernel matrix between the conditional-KME paths of two samples.
Eigen::MatrixXd second_level_kernels(const Eigen::MatrixXd& big, const Eigen::VectorXd& norms_x,
                                     const Eigen::VectorXd& norms_y, std::size_t n, std::size_t sx, std::size_t m,
                                     std::size_t sy, const StaticKernel& k, const GoursatConfig& outer, bool symmetric) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = symmetric ? i : 0; j < m; ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          goursat_from_gram(second_level_gram(big, norms_x, norms_y, n, sx, m, sy, i, j, k), outer);
  });
  if (symmetric)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      for (Eigen::Index j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

}  // namespace

double unbiased_combination(const Eigen::MatrixXd& kxx, const Eigen::MatrixXd& kyy, const Eigen::MatrixXd& kxy) {
  const double n = static_cast<double>(kxx.rows()), m = static_cast<double>(kyy.rows());
  if (kxx.rows() < 2 || kyy.rows() < 2) fail(Errc::TooFewSamples, "unbiased MMD needs n, m >= 2");
  return off_diagonal_sum(kxx) / (n * (n - 1.0)) - 2.0 * kxy.sum() / (n * m) + off_diagonal_sum(kyy) / (m * (m - 1.0));
}

double mmd1_unbiased(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                     const GoursatConfig& cfg) {
  if (a.size() < 2 || b.size() < 2) fail(Errc::TooFewSamples, "mmd1 needs n, m >= 2");
  const auto xa = canonical(a), xb = canonical(b);
  const auto kxx = gram_matrix(xa, xa, k, cfg, true);
  const auto kyy = gram_matrix(xb, xb, k, cfg, true);
  const auto kxy = gram_matrix(xa, xb, k, cfg, false);
  return unbiased_combination(kxx, kyy, kxy);
}

WindowEmbedding window_embedding_from_grams(std::vector<Eigen::MatrixXd> grams, double lambda) {
  if (!(lambda >= kMinLambda)) fail(Errc::SingularSystem, "ridge lambda below 1e-10");
  WindowEmbedding w;
  w.coefficients.reserve(grams.size());
  for (const auto& g : grams) {
    const Eigen::Index n = g.rows();
    if (g.cols() != n) fail(Errc::ShapeMismatch, "window Gram must be square");
    Eigen::MatrixXd shifted = g;
    shifted.diagonal().array() += static_cast<double>(n) * lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) fail(Errc::SingularSystem, "ridge-shifted Gram is not positive definite");
    w.coefficients.push_back(llt.solve(g));
  }
  w.grams = std::move(grams);
  return w;
}

WindowEmbedding window_embedding(std::span<const Path> paths, const StaticKernel& k, const GoursatConfig& cfg,
                                 double lambda, std::size_t window_stride) {
  if (paths.empty()) fail(Errc::EmptyBundle, "window embedding of an empty sample");
  const auto t0 = paths.front().times();
  for (const auto& p : paths)
    if (!std::equal(t0.begin(), t0.end(), p.times().begin(), p.times().end()))
      fail(Errc::WindowGridMismatch, "paths of one sample must share a time grid");
  const auto idx = window_indices(paths.front().length(), window_stride);
  const std::size_t n = paths.size(), nw = idx.size();

  std::vector<Eigen::MatrixXd> grams(nw, Eigen::MatrixXd(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)));
  parallel_for(n, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j) {
      const auto nodes = solve_goursat_nodes(paths[i], paths[j], k, cfg);
      for (std::size_t w = 0; w < nw; ++w) {
        const auto s = static_cast<Eigen::Index>(idx[w]);
        grams[w](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = nodes(s, s);
      }
    }
  });
  for (auto& g : grams)
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index j = 0; j < i; ++j) g(i, j) = g(j, i);

  auto w = window_embedding_from_grams(std::move(grams), lambda);
  for (std::size_t s : idx) w.window_times.push_back(t0[s]);
  return w;
}

CondKmeContext::CondKmeContext(WindowEmbedding x, WindowEmbedding y, Eigen::MatrixXd gram_xy, double lambda)
    : x_(std::move(x)), y_(std::move(y)), gram_xy_(std::move(gram_xy)), lambda_(lambda) {
  if (gram_xy_.rows() != static_cast<Eigen::Index>(x_.samples()) ||
      gram_xy_.cols() != static_cast<Eigen::Index>(y_.samples()))
    fail(Errc::ShapeMismatch, "cross Gram shape does not match the samples");
}

CondKmeContext CondKmeContext::build(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                                     const GoursatConfig& cfg, double lambda, std::size_t window_stride) {
  auto wx = window_embedding(a, k, cfg, lambda, window_stride);
  auto wy = window_embedding(b, k, cfg, lambda, window_stride);
  auto kxy = gram_matrix(a, b, k, cfg, false);
  return CondKmeContext(std::move(wx), std::move(wy), std::move(kxy), lambda);
}

double CondKmeContext::inner(const Eigen::VectorXd& kx, std::size_t s, const Eigen::VectorXd& ky,
                             std::size_t t) const {
  if (s >= windows_x() || t >= windows_y()) fail(Errc::IndexOutOfRange, "window index out of range");
  if (kx.size() != static_cast<Eigen::Index>(n()) || ky.size() != static_cast<Eigen::Index>(m()))
    fail(Errc::DimMismatch, "selector length does not match sample size");
  auto shifted = [](const Eigen::MatrixXd& g, double shift) {
    Eigen::MatrixXd out = g;
    out.diagonal().array() += shift;
    return out;
  };
  const Eigen::LLT<Eigen::MatrixXd> lx(shifted(x_.grams[s], static_cast<double>(n()) * lambda_));
  const Eigen::LLT<Eigen::MatrixXd> ly(shifted(y_.grams[t], static_cast<double>(m()) * lambda_));
  if (lx.info() != Eigen::Success || ly.info() != Eigen::Success)
    fail(Errc::SingularSystem, "ridge-shifted Gram is not positive definite");
  const Eigen::VectorXd ax = lx.solve(kx);
  const Eigen::VectorXd ay = ly.solve(ky);
  return ax.dot(gram_xy_ * ay);
}

Eigen::MatrixXd CondKmeContext::all_inner() const { return all_inner_products(x_, y_, gram_xy_); }

double cond_kme_inner(const CondKmeContext& ctx, std::size_t i, std::size_t j, std::size_t s, std::size_t t) {
  if (i >= ctx.n() || j >= ctx.m()) fail(Errc::IndexOutOfRange, "sample index out of range");
  if (s >= ctx.windows_x() || t >= ctx.windows_y()) fail(Errc::IndexOutOfRange, "window index out of range");
  const Eigen::VectorXd ax = ctx.x().coefficients[s].col(static_cast<Eigen::Index>(i));
  const Eigen::VectorXd ay = ctx.y().coefficients[t].col(static_cast<Eigen::Index>(j));
  return ax.dot(ctx.gram_xy() * ay);
}

Mmd2Result mmd2_detailed(std::span<const Path> a, std::span<const Path> b, const Mmd2Options& opt) {
  if (a.size() < 2 || b.size() < 2) fail(Errc::TooFewSamples, "mmd2 needs n, m >= 2");
  const auto xa = canonical(a), xb = canonical(b);
  const auto wx = window_embedding(xa, opt.kernel, opt.inner, opt.lambda, opt.window_stride);
  const auto wy = window_embedding(xb, opt.kernel, opt.inner, opt.lambda, opt.window_stride);
  const Eigen::MatrixXd kxy_full = gram_matrix(xa, xb, opt.kernel, opt.inner, false);
  const std::size_t n = xa.size(), m = xb.size();

  opt.outer_kernel.validate();
  const auto sx = wx.windows(), sy = wy.windows();
  const Eigen::MatrixXd big_xx = all_inner_products(wx, wx, wx.grams.back());
  const Eigen::MatrixXd big_yy = all_inner_products(wy, wy, wy.grams.back());
  const Eigen::VectorXd norms_x = big_xx.diagonal(), norms_y = big_yy.diagonal();

  Mmd2Result r;
  r.k_xx = second_level_kernels(big_xx, norms_x, norms_x, n, sx, n, sx, opt.outer_kernel, opt.outer, true);
  r.k_yy = second_level_kernels(big_yy, norms_y, norms_y, m, sy, m, sy, opt.outer_kernel, opt.outer, true);
  r.k_xy = second_level_kernels(all_inner_products(wx, wy, kxy_full), norms_x, norms_y, n, sx, m, sy,
                                opt.outer_kernel, opt.outer, false);
  r.value = unbiased_combination(r.k_xx, r.k_yy, r.k_xy);
  return r;
}

double mmd2_unbiased(std::span<const Path> a, std::span<const Path> b, const Mmd2Options& opt) {
  return mmd2_detailed(a, b, opt).value;
}

double mmd2_unbiased(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                     const GoursatConfig& cfg, double lambda) {
  Mmd2Options opt;
  opt.kernel = k;
  opt.inner = cfg;
  opt.outer = cfg;
  opt.lambda = lambda;
  return mmd2_unbiased(a, b, opt);
}

std::vector<Path> kernel_inputs(const PathBundle& bundle) {
  bundle.validate();
  std::vector<Path> out;
  out.reserve(bundle.size());
  for (const auto& p : bundle.paths) out.push_back(augment_time(normalize_start(p, 1.0)));
  return out;
}

}  // namespace speedrs
