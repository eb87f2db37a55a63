#pragma once

#include <Eigen/Dense>
#include <span>

#include "speedrs/path.hpp"

namespace speedrs {

/// Pointwise kernel used to lift path values before the signature kernel.
struct StaticKernel {
  enum class Kind { Linear, Rbf };
  Kind kind = Kind::Linear;
  double sigma = 1.0;  // RBF bandwidth

  static StaticKernel linear() { return {Kind::Linear, 1.0}; }
  static StaticKernel rbf(double sigma) { return {Kind::Rbf, sigma}; }

  void validate() const;
  double operator()(std::span<const double> a, std::span<const double> b) const;
};

enum class GoursatScheme { FirstOrder, SecondOrder };

struct GoursatConfig {
  unsigned dyadic_order = 1;  // 2^dyadic_order sub-steps per path segment
  GoursatScheme scheme = GoursatScheme::SecondOrder;

  static constexpr unsigned kMaxDyadicOrder = 12;
  void validate() const;
};

/// Entry (i, j) = k(x_i, y_j). Throws DimMismatch.
Eigen::MatrixXd static_gram(const Path& x, const Path& y, const StaticKernel& k);

/// Signature kernel of the lifted paths: u(T, T) of the Goursat problem
///   u_st = <dx(s), dy(t)> u,  u(0, .) = u(., 0) = 1,
/// discretized on the node grid of x and y refined 2^dyadic_order times.
/// Callers pass time-augmented paths; the solver does not augment.
/// Throws NumericalOverflow if |u| exceeds 1e300.
double solve_goursat(const Path& x, const Path& y, const StaticKernel& k, const GoursatConfig& cfg);

/// Same solve, returning u at every pair of original nodes (len_x x len_y).
/// Entry (s, t) is the signature kernel of x on [t_0, t_s] against y on
/// [t_0, t_t], so one solve yields every window kernel at once.
Eigen::MatrixXd solve_goursat_nodes(const Path& x, const Path& y, const StaticKernel& k, const GoursatConfig& cfg);

/// Drivers over an arbitrary inner-product matrix G(i, j) = <x_i, y_j> of two
/// lifted paths; the cell forcing is the mixed second difference of G.
double goursat_from_gram(const Eigen::MatrixXd& gram, const GoursatConfig& cfg);
Eigen::MatrixXd goursat_nodes_from_gram(const Eigen::MatrixXd& gram, const GoursatConfig& cfg);

/// Entry (i, j) = solve_goursat(a_i, b_j). With `symmetric` (a and b must be
/// the same list) only the upper triangle is solved and then mirrored.
Eigen::MatrixXd gram_matrix(std::span<const Path> a, std::span<const Path> b, const StaticKernel& k,
                            const GoursatConfig& cfg, bool symmetric);

}  // namespace speedrs
