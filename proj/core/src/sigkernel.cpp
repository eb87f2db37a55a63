#include "speedrs/sigkernel.hpp"

#include <cmath>
#include <vector>

#include "speedrs/error.hpp"
#include "speedrs/parallel.hpp"

namespace speedrs {
namespace {

constexpr double kOverflow = 1e300;

// Rolling-row sweep over the refined grid. When `nodes` is non-null it
// receives u at every original node.
double sweep(const Eigen::MatrixXd& gram, const GoursatConfig& cfg, Eigen::MatrixXd* nodes) {
  cfg.validate();
  const Eigen::Index nx = gram.rows(), ny = gram.cols();
  if (nx < 2 || ny < 2) fail(Errc::InvalidArgument, "Goursat solve needs at least 2 nodes per path");
  const Eigen::Index r = Eigen::Index{1} << cfg.dyadic_order;
  const double inv_r2 = 1.0 / static_cast<double>(r * r);

  // Per original cell update coefficients: u11 = (u10 + u01) * a - u00 * b.
  Eigen::MatrixXd coef_a(nx - 1, ny - 1), coef_b(nx - 1, ny - 1);
  for (Eigen::Index j = 0; j + 1 < ny; ++j)
    for (Eigen::Index i = 0; i + 1 < nx; ++i) {
      const double delta = (gram(i + 1, j + 1) - gram(i + 1, j) - gram(i, j + 1) + gram(i, j)) * inv_r2;
      if (cfg.scheme == GoursatScheme::FirstOrder) {
        coef_a(i, j) = 1.0;
        coef_b(i, j) = 1.0 - delta;
      } else {
        const double d2 = delta * delta / 12.0;
        coef_a(i, j) = 1.0 + 0.5 * delta + d2;
        coef_b(i, j) = 1.0 - d2;
      }
    }

  const Eigen::Index cols = (ny - 1) * r + 1;
  std::vector<double> prev(static_cast<std::size_t>(cols), 1.0), cur(static_cast<std::size_t>(cols));
  if (nodes) {
    nodes->resize(nx, ny);
    nodes->row(0).setOnes();
  }
  for (Eigen::Index ci = 0; ci + 1 < nx; ++ci) {
    for (Eigen::Index sub = 1; sub <= r; ++sub) {
      cur[0] = 1.0;
      double* c = cur.data();
      const double* p = prev.data();
      for (Eigen::Index cj = 0; cj + 1 < ny; ++cj) {
        const double a = coef_a(ci, cj), b = coef_b(ci, cj);
        for (Eigen::Index k = cj * r + 1; k <= (cj + 1) * r; ++k) c[k] = (c[k - 1] + p[k]) * a - p[k - 1] * b;
      }
      // Node columns suffice as probes: Inf and NaN propagate along the row.
      double peak = 0.0;
      for (Eigen::Index nj = 0; nj < ny; ++nj) peak = std::max(peak, std::abs(cur[static_cast<std::size_t>(nj * r)]));
      if (!(peak <= kOverflow)) fail(Errc::NumericalOverflow, "Goursat solution exceeded 1e300");
      std::swap(prev, cur);
    }
    if (nodes)
      for (Eigen::Index nj = 0; nj < ny; ++nj) (*nodes)(ci + 1, nj) = prev[static_cast<std::size_t>(nj * r)];
  }
  return prev.back();
}

}  // namespace

void StaticKernel::validate() const {
  if (kind == Kind::Rbf && !(sigma > 0.0)) fail(Errc::InvalidArgument, "RBF bandwidth must be > 0");
}

double StaticKernel::operator()(std::span<const double> a, std::span<const double> b) const {
  if (kind == Kind::Linear) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

void GoursatConfig::validate() const {
  if (dyadic_order > kMaxDyadicOrder) fail(Errc::InvalidArgument, "dyadic_order above 12");
}

Eigen::MatrixXd static_gram(const Path& x, const Path& y, const StaticKernel& k) {
  if (x.dim() != y.dim()) fail(Errc::DimMismatch, "static_gram needs paths of equal dimension");
  k.validate();
  const auto nx = static_cast<Eigen::Index>(x.length()), ny = static_cast<Eigen::Index>(y.length());
  Eigen::MatrixXd g(nx, ny);
  for (Eigen::Index j = 0; j < ny; ++j)
    for (Eigen::Index i = 0; i < nx; ++i)
      g(i, j) = k(x.row(static_cast<std::size_t>(i)), y.row(static_cast<std::size_t>(j)));
  return g;
}

double goursat_from_gram(const Eigen::MatrixXd& gram, const GoursatConfig& cfg) { return sweep(gram, cfg, nullptr); }

Eigen::MatrixXd goursat_nodes_from_gram(const Eigen::MatrixXd& gram, const GoursatConfig& cfg) {
  Eigen::MatrixXd nodes;
  sweep(gram, cfg, &nodes);
  return nodes;
}

double solve_goursat(const Path& x, const Path& y, const StaticKernel& k, const GoursatConfig& cfg) {
  return goursat_from_gram(static_gram(x, y, k), cfg);
}

Eigen::MatrixXd solve_goursat_nodes(const Path& x, const Path& y, const StaticKernel& k, const GoursatConfig& cfg) {
  return goursat_nodes_from_gram(static_gram(x, y, k), cfg);
}

Eigen::MatrixXd gram_matrix(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                            const GoursatConfig& cfg, bool symmetric) {
  if (symmetric && a.size() != b.size()) fail(Errc::ShapeMismatch, "symmetric Gram needs equal lists");
  const auto na = static_cast<Eigen::Index>(a.size()), nb = static_cast<Eigen::Index>(b.size());
  Eigen::MatrixXd g(na, nb);
  parallel_for(a.size(), [&](std::size_t i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = symmetric ? ii : 0; j < nb; ++j)
      g(ii, j) = solve_goursat(a[i], b[static_cast<std::size_t>(j)], k, cfg);
  });
  if (symmetric)
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index j = 0; j < i; ++j) g(i, j) = g(j, i);
  return g;
}

}  // namespace speedrs
