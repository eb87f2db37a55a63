#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <variant>

namespace speedrs {

class Rng;
struct ModelSpec;

struct GbmSpec {
  double mu = 0.05, sigma = 0.2, x0 = 1.0;
};
struct CevSpec {
  double mu = 0.05, sigma = 0.2, gamma = 1.0, x0 = 1.0;
};
struct MeanRevertingSpec {
  double mu = 0.05, kappa = 0.5, theta = 0.5, xi = 0.5, rho = 0.0, v0 = 0.5, x0 = 1.0;
};
struct RBergomiSpec {
  double xi0 = 0.1, nu = 1.0, hurst = 0.25, rho = 0.0, x0 = 1.0;
};
/// Pathwise alpha * left + (1 - alpha) * right.
struct MixtureSpec {
  double alpha = 0.5;
  std::shared_ptr<const ModelSpec> left, right;
};
struct IdealGasSpec {
  double temperature = 1.0;
  std::size_t n_particles = 400;
  double volume = 400.0;
};

enum class ModelKind { Gbm, Cev, MeanReverting, RBergomi, Mixture, IdealGas };

const char* to_string(ModelKind kind) noexcept;
ModelKind model_kind_from_string(const std::string& name);

struct ModelSpec {
  std::variant<GbmSpec, CevSpec, MeanRevertingSpec, RBergomiSpec, MixtureSpec, IdealGasSpec> params;

  ModelKind kind() const noexcept { return static_cast<ModelKind>(params.index()); }
  /// Throws InvalidArgument on parameters outside the model's domain.
  void validate() const;
  /// Compact single-line JSON, e.g. {"model":"gbm","mu":0.1,"sigma":0.3,"x0":1.0}.
  std::string to_json() const;
  static ModelSpec from_json(const std::string& text);
  /// Copy with every x0 (recursively, for mixtures) replaced.
  ModelSpec with_x0(double x0) const;

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) { return a.to_json() == b.to_json(); }
};

ModelSpec make_mixture(double alpha, ModelSpec left, ModelSpec right);

/// Settings that parameter sampling does not draw.
struct SamplingDefaults {
  double x0 = 1.0;
  std::size_t gas_particles = 400;
  double gas_volume = 400.0;
};

/// Draws each parameter uniformly from its training range:
///   xi0 in [0.01, 0.2), nu in [0.5, 4), H in [0.025, 0.5),
///   v0, theta, kappa, xi, sigma in [0.2, 0.8), rho in [-1, 1), mu in [0.01, 0.2).
/// CEV draws gamma in [0.5, 1); mixtures draw alpha in [0, 1] over
/// (mean-reverting, rBergomi); the ideal gas draws temperature in [1, 10].
ModelSpec sample_params(ModelKind kind, Rng& rng, const SamplingDefaults& defaults = {});

}  // namespace speedrs
