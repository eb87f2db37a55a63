#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace speedrs {

enum class Activation { Relu, Tanhshrink };

const char* to_string(Activation a) noexcept;
Activation activation_from_string(const std::string& name);

/// Tanhshrink(v) = v - tanh(v), derivative 1 - sech^2(v) = tanh^2(v).
double tanhshrink(double v) noexcept;
double tanhshrink_derivative(double v) noexcept;

/// input -> hidden -> hidden -> hidden -> 1, linear output.
struct MlpSpec {
  std::size_t input_dim = 1;
  std::size_t hidden = 16;
  Activation activation = Activation::Relu;

  static constexpr std::size_t kHiddenLayers = 3;
  std::vector<std::size_t> layer_dims() const;
  void validate() const;
  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// Feedforward network with every parameter in one flat buffer. Layer l
/// stores its (out x in) weight matrix column-major, followed by its bias.
class Mlp {
 public:
  explicit Mlp(MlpSpec spec);  // all parameters zero

  const MlpSpec& spec() const noexcept { return spec_; }
  std::size_t layers() const noexcept { return offsets_.size(); }
  std::size_t param_count() const noexcept { return params_.size(); }
  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t l);
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const;
  /// 1 for weight entries, 0 for biases.
  const std::vector<std::uint8_t>& weight_mask() const noexcept { return weight_mask_; }
  double weight_norm_sq() const;

  /// Throws DimMismatch.
  double forward(std::span<const double> x) const;
  /// One prediction per row of x.
  Eigen::VectorXd forward_batch(const Eigen::MatrixXd& x) const;

  /// Returns mean((f(x) - y)^2) + l2 * sum ||W_l||_F^2 and writes its
  /// gradient into grad (size param_count()).
  double loss_and_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2, std::span<double> grad) const;

 private:
  struct Offsets {
    std::size_t in, out, w, b;
  };
  MlpSpec spec_;
  std::vector<Offsets> offsets_;
  std::vector<double> params_;
  std::vector<std::uint8_t> weight_mask_;
};

/// Weights N(0, 2 / fan_in), biases 0.
Mlp mlp_init(const MlpSpec& spec, std::uint64_t seed);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam on the gradient, then decoupled decay p -= lr * weight_decay * p on
/// masked entries.
class AdamW {
 public:
  explicit AdamW(std::size_t n_params, AdamWConfig cfg = {});
  void step(std::span<double> params, std::span<const double> grad, double lr, double weight_decay,
            const std::vector<std::uint8_t>& decay_mask);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamWConfig cfg_;
  std::vector<double> m_, v_;
  std::size_t t_ = 0;
};

struct Dataset {
  Eigen::MatrixXd x;  // one row per sample
  Eigen::VectorXd y;
  std::size_t rows() const noexcept { return static_cast<std::size_t>(x.rows()); }
  Dataset subset(std::span<const std::size_t> idx) const;
};

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double initial_lr = 5e-4;
  double final_lr_ratio = 0.1;  // lr decays geometrically to this fraction by the last epoch
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  double split_ratio = 0.8;
  void validate() const;
  double lr_at(std::size_t epoch) const;
};

struct TrainHistory {
  std::vector<double> train_mse;
  std::vector<double> valid_mse;  // empty without a validation set
};

/// Mini-batch AdamW on the MSE with decoupled weight decay on the weights.
/// Per-epoch losses are full-set MSEs after the epoch. Throws NonFiniteLoss.
TrainHistory mlp_train(Mlp& net, const Dataset& train, const Dataset* valid, const TrainConfig& cfg);

struct Standardizer {
  std::vector<double> mean, sd;
  static constexpr double kSdFloor = 1e-12;

  /// Population statistics; needs >= 2 rows.
  static Standardizer fit(const Eigen::MatrixXd& x);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  std::vector<double> apply(std::span<const double> row) const;
};

struct Split {
  std::vector<std::size_t> train, valid;
};
/// Seeded shuffle; round(ratio * n) rows go to train, clamped to [1, n-1].
Split split_dataset(std::size_t n_rows, double ratio, std::uint64_t seed);

/// A network with its input standardizer and target scale. The network
/// predicts standardized targets; everything reported is in target units.
struct Regressor {
  Mlp net{MlpSpec{}};
  Standardizer features;
  double y_mean = 0.0, y_sd = 1.0;
  std::string metadata = "{}";  // compact JSON owned by the caller

  double predict(std::span<const double> x) const;
  Eigen::VectorXd predict_batch(const Eigen::MatrixXd& x) const;
};

struct FitResult {
  Regressor model;
  TrainHistory history;  // in target units
  double train_mse = 0.0, valid_mse = 0.0;
};

/// The train/valid split fit_regressor uses for a dataset of n rows.
Split regressor_split(std::size_t n_rows, const TrainConfig& cfg);

/// Split, standardize on the training part, train, and score.
FitResult fit_regressor(const Dataset& data, std::size_t hidden, Activation act, const TrainConfig& cfg);

/// Checkpoint: one JSON header line, then the parameters as little-endian
/// float64. Throws Io.
void save_regressor(const std::string& file, const Regressor& r);
Regressor load_regressor(const std::string& file);

}  // namespace speedrs
