#include "speedrs/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

#include "speedrs/error.hpp"
#include "speedrs/rng.hpp"

namespace speedrs {
namespace {

using Json = nlohmann::json;

constexpr int kCheckpointVersion = 1;

void activate(Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::Relu)
    z = z.cwiseMax(0.0);
  else
    z = z.unaryExpr([](double v) { return tanhshrink(v); });
}

Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& z, Activation a) {
  if (a == Activation::Relu) return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
  return z.unaryExpr([](double v) { return tanhshrink_derivative(v); });
}

void shuffle_indices(std::vector<std::size_t>& idx, std::uint64_t seed) {
  Rng rng(seed);
  // Fisher-Yates with an explicit draw so the permutation is library independent.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

Json spec_json(const MlpSpec& s) {
  return {{"input_dim", s.input_dim}, {"hidden", s.hidden}, {"activation", to_string(s.activation)}};
}

}  // namespace

const char* to_string(Activation a) noexcept { return a == Activation::Relu ? "relu" : "tanhshrink"; }

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanhshrink") return Activation::Tanhshrink;
  fail(Errc::InvalidConfig, "unknown activation '" + name + "'");
}

double tanhshrink(double v) noexcept { return v - std::tanh(v); }

double tanhshrink_derivative(double v) noexcept {
  const double t = std::tanh(v);
  return t * t;
}

std::vector<std::size_t> MlpSpec::layer_dims() const {
  std::vector<std::size_t> dims{input_dim};
  for (std::size_t i = 0; i < kHiddenLayers; ++i) dims.push_back(hidden);
  dims.push_back(1);
  return dims;
}

void MlpSpec::validate() const {
  if (input_dim < 1 || hidden < 1) fail(Errc::InvalidArgument, "MLP widths must be >= 1");
}

Mlp::Mlp(MlpSpec spec) : spec_(spec) {
  spec_.validate();
  const auto dims = spec_.layer_dims();
  std::size_t at = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Offsets o{dims[l], dims[l + 1], at, at + dims[l] * dims[l + 1]};
    at = o.b + o.out;
    offsets_.push_back(o);
  }
  params_.assign(at, 0.0);
  weight_mask_.assign(at, 0);
  for (const auto& o : offsets_) std::fill_n(weight_mask_.begin() + static_cast<std::ptrdiff_t>(o.w), o.in * o.out, 1);
}

Eigen::Map<Eigen::MatrixXd> Mlp::weight(std::size_t l) {
  const auto& o = offsets_[l];
  return {params_.data() + o.w, static_cast<Eigen::Index>(o.out), static_cast<Eigen::Index>(o.in)};
}
Eigen::Map<const Eigen::MatrixXd> Mlp::weight(std::size_t l) const {
  const auto& o = offsets_[l];
  return {params_.data() + o.w, static_cast<Eigen::Index>(o.out), static_cast<Eigen::Index>(o.in)};
}
Eigen::Map<Eigen::VectorXd> Mlp::bias(std::size_t l) {
  const auto& o = offsets_[l];
  return {params_.data() + o.b, static_cast<Eigen::Index>(o.out)};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(std::size_t l) const {
  const auto& o = offsets_[l];
  return {params_.data() + o.b, static_cast<Eigen::Index>(o.out)};
}

double Mlp::weight_norm_sq() const {
  double s = 0.0;
  for (std::size_t l = 0; l < layers(); ++l) s += weight(l).squaredNorm();
  return s;
}

double Mlp::forward(std::span<const double> x) const {
  if (x.size() != spec_.input_dim)
    fail(Errc::DimMismatch, "MLP input has " + std::to_string(x.size()) + " entries, expected " +
                                std::to_string(spec_.input_dim));
  Eigen::MatrixXd row = Eigen::Map<const Eigen::RowVectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward_batch(row)(0);
}

Eigen::VectorXd Mlp::forward_batch(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != spec_.input_dim) fail(Errc::DimMismatch, "MLP batch has wrong width");
  Eigen::MatrixXd a = x.transpose();
  for (std::size_t l = 0; l < layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    if (l + 1 < layers()) activate(z, spec_.activation);
    a = std::move(z);
  }
  return a.row(0).transpose();
}

double Mlp::loss_and_grad(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2,
                          std::span<double> grad) const {
  if (static_cast<std::size_t>(x.cols()) != spec_.input_dim || x.rows() != y.size() || x.rows() == 0)
    fail(Errc::DimMismatch, "MLP loss: inconsistent batch shapes");
  if (grad.size() != param_count()) fail(Errc::DimMismatch, "MLP loss: gradient buffer has wrong size");
  const std::size_t L = layers();
  const double n = static_cast<double>(x.rows());

  std::vector<Eigen::MatrixXd> acts{x.transpose()};  // acts[l] feeds layer l
  std::vector<Eigen::MatrixXd> pre;
  for (std::size_t l = 0; l < L; ++l) {
    Eigen::MatrixXd z = weight(l) * acts.back();
    z.colwise() += bias(l);
    pre.push_back(z);
    if (l + 1 < L) activate(z, spec_.activation);
    acts.push_back(std::move(z));
  }
  const Eigen::RowVectorXd resid = acts.back().row(0) - y.transpose();
  double loss = resid.squaredNorm() / n;

  Eigen::MatrixXd delta = (2.0 / n) * resid;
  for (std::size_t l = L; l-- > 0;) {
    const auto& o = offsets_[l];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + o.w, static_cast<Eigen::Index>(o.out), static_cast<Eigen::Index>(o.in));
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + o.b, static_cast<Eigen::Index>(o.out));
    gw.noalias() = delta * acts[l].transpose();
    gb = delta.rowwise().sum();
    if (l2 != 0.0) gw += 2.0 * l2 * weight(l);
    if (l > 0) delta = (weight(l).transpose() * delta).cwiseProduct(activation_derivative(pre[l - 1], spec_.activation));
  }
  if (l2 != 0.0) loss += l2 * weight_norm_sq();
  return loss;
}

Mlp mlp_init(const MlpSpec& spec, std::uint64_t seed) {
  Mlp net(spec);
  Rng rng(seed);
  for (std::size_t l = 0; l < net.layers(); ++l) {
    auto w = net.weight(l);
    const double scale = std::sqrt(2.0 / static_cast<double>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = scale * rng.normal();
  }
  return net;
}

AdamW::AdamW(std::size_t n_params, AdamWConfig cfg) : cfg_(cfg), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad, double lr, double weight_decay,
                 const std::vector<std::uint8_t>& decay_mask) {
  if (params.size() != m_.size() || grad.size() != m_.size() || decay_mask.size() != m_.size())
    fail(Errc::DimMismatch, "AdamW: buffer sizes differ");
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    if (decay_mask[i] && weight_decay != 0.0) params[i] -= lr * weight_decay * params[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
  }
}

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
  out.y.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(idx[r]);
    out.x.row(static_cast<Eigen::Index>(r)) = x.row(i);
    out.y(static_cast<Eigen::Index>(r)) = y(i);
  }
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) fail(Errc::InvalidConfig, "epochs must be >= 1");
  if (batch_size < 1) fail(Errc::InvalidConfig, "batch_size must be >= 1");
  if (!(initial_lr > 0.0) || !(final_lr_ratio > 0.0)) fail(Errc::InvalidConfig, "learning rates must be positive");
  if (!(weight_decay >= 0.0)) fail(Errc::InvalidConfig, "weight_decay must be >= 0");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) fail(Errc::InvalidConfig, "split_ratio must lie in (0, 1)");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  if (epochs == 1) return initial_lr;
  const double f = static_cast<double>(epoch) / static_cast<double>(epochs - 1);
  return initial_lr * std::pow(final_lr_ratio, f);
}

TrainHistory mlp_train(Mlp& net, const Dataset& train, const Dataset* valid, const TrainConfig& cfg) {
  cfg.validate();
  if (train.rows() == 0) fail(Errc::InvalidArgument, "empty training set");
  AdamW opt(net.param_count());
  std::vector<double> grad(net.param_count());
  std::vector<std::size_t> order(train.rows());
  TrainHistory hist;
  auto mse = [&](const Dataset& d) { return (net.forward_batch(d.x) - d.y).squaredNorm() / static_cast<double>(d.rows()); };

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_indices(order, derive_seed(cfg.seed, epoch));
    const double lr = cfg.lr_at(epoch);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const Dataset batch = train.subset(std::span(order).subspan(start, stop - start));
      const double loss = net.loss_and_grad(batch.x, batch.y, 0.0, grad);
      if (!std::isfinite(loss))
        fail(Errc::NonFiniteLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", batch offset " +
                                      std::to_string(start) + ", lr " + std::to_string(lr));
      opt.step(net.params(), grad, lr, cfg.weight_decay, net.weight_mask());
    }
    hist.train_mse.push_back(mse(train));
    if (!std::isfinite(hist.train_mse.back()))
      fail(Errc::NonFiniteLoss, "non-finite training MSE after epoch " + std::to_string(epoch));
    if (valid && valid->rows() > 0) hist.valid_mse.push_back(mse(*valid));
  }
  return hist;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& x) {
  if (x.rows() < 2) fail(Errc::InvalidArgument, "standardizer needs at least 2 rows");
  Standardizer s;
  const double n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double m = x.col(j).sum() / n;
    const double var = (x.col(j).array() - m).square().sum() / n;
    s.mean.push_back(m);
    s.sd.push_back(std::max(std::sqrt(var), kSdFloor));
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != mean.size()) fail(Errc::DimMismatch, "standardizer width mismatch");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    out.col(j) = (x.col(j).array() - mean[k]) / sd[k];
  }
  return out;
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) fail(Errc::DimMismatch, "standardizer width mismatch");
  std::vector<double> out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - mean[j]) / sd[j];
  return out;
}

Split split_dataset(std::size_t n_rows, double ratio, std::uint64_t seed) {
  if (n_rows < 2) fail(Errc::InvalidArgument, "split needs at least 2 rows");
  if (!(ratio > 0.0 && ratio < 1.0)) fail(Errc::InvalidArgument, "split ratio must lie in (0, 1)");
  std::vector<std::size_t> idx(n_rows);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle_indices(idx, seed);
  auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_rows)));
  n_train = std::clamp<std::size_t>(n_train, 1, n_rows - 1);
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.valid.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  return s;
}

double Regressor::predict(std::span<const double> x) const {
  const auto z = features.apply(x);
  return y_mean + y_sd * net.forward(z);
}

Eigen::VectorXd Regressor::predict_batch(const Eigen::MatrixXd& x) const {
  return (net.forward_batch(features.apply(x)).array() * y_sd + y_mean).matrix();
}

Split regressor_split(std::size_t n_rows, const TrainConfig& cfg) {
  return split_dataset(n_rows, cfg.split_ratio, derive_seed(cfg.seed, 0x5717));
}

FitResult fit_regressor(const Dataset& data, std::size_t hidden, Activation act, const TrainConfig& cfg) {
  cfg.validate();
  const Split split = regressor_split(data.rows(), cfg);
  Dataset train = data.subset(split.train);
  Dataset valid = data.subset(split.valid);

  FitResult out;
  out.model.features = Standardizer::fit(train.x);
  const double n = static_cast<double>(train.rows());
  out.model.y_mean = train.y.sum() / n;
  out.model.y_sd = std::max(std::sqrt((train.y.array() - out.model.y_mean).square().sum() / n), Standardizer::kSdFloor);

  auto scaled = [&](const Dataset& d) {
    Dataset s;
    s.x = out.model.features.apply(d.x);
    s.y = ((d.y.array() - out.model.y_mean) / out.model.y_sd).matrix();
    return s;
  };
  const Dataset train_s = scaled(train), valid_s = scaled(valid);
  out.model.net = mlp_init(MlpSpec{static_cast<std::size_t>(data.x.cols()), hidden, act}, derive_seed(cfg.seed, 0x1417));
  out.history = mlp_train(out.model.net, train_s, &valid_s, cfg);
  const double scale = out.model.y_sd * out.model.y_sd;
  for (auto& v : out.history.train_mse) v *= scale;
  for (auto& v : out.history.valid_mse) v *= scale;
  out.train_mse = (out.model.predict_batch(train.x) - train.y).squaredNorm() / static_cast<double>(train.rows());
  out.valid_mse = (out.model.predict_batch(valid.x) - valid.y).squaredNorm() / static_cast<double>(valid.rows());
  return out;
}

void save_regressor(const std::string& file, const Regressor& r) {
  Json head;
  head["format"] = "speedrs-mlp";
  head["version"] = kCheckpointVersion;
  head["spec"] = spec_json(r.net.spec());
  head["x_mean"] = r.features.mean;
  head["x_sd"] = r.features.sd;
  head["y_mean"] = r.y_mean;
  head["y_sd"] = r.y_sd;
  head["metadata"] = Json::parse(r.metadata);
  head["n_params"] = r.net.param_count();

  std::ofstream out(file, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot open '" + file + "' for writing");
  out << head.dump() << '\n';
  for (double v : r.net.params()) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int k = 0; k < 8; ++k) bytes[k] = static_cast<unsigned char>(bits >> (8 * k));
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
  if (!out) fail(Errc::Io, "failed writing '" + file + "'");
}

Regressor load_regressor(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open checkpoint '" + file + "'");
  std::string line;
  std::getline(in, line);
  Json head;
  try {
    head = Json::parse(line);
  } catch (const Json::exception& e) {
    fail(Errc::Io, "bad checkpoint header in '" + file + "': " + e.what());
  }
  if (head.value("format", "") != "speedrs-mlp" || head.value("version", 0) != kCheckpointVersion)
    fail(Errc::Io, "'" + file + "' is not a version-1 MLP checkpoint");
  const auto& js = head["spec"];
  Regressor r;
  r.net = Mlp(MlpSpec{js["input_dim"].get<std::size_t>(), js["hidden"].get<std::size_t>(),
                      activation_from_string(js["activation"].get<std::string>())});
  r.features.mean = head["x_mean"].get<std::vector<double>>();
  r.features.sd = head["x_sd"].get<std::vector<double>>();
  r.y_mean = head["y_mean"].get<double>();
  r.y_sd = head["y_sd"].get<double>();
  r.metadata = head["metadata"].dump();
  if (head["n_params"].get<std::size_t>() != r.net.param_count() || r.features.mean.size() != r.net.spec().input_dim)
    fail(Errc::Io, "checkpoint '" + file + "' is internally inconsistent");
  for (double& v : r.net.params()) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) fail(Errc::Io, "truncated checkpoint '" + file + "'");
    std::uint64_t bits = 0;
    for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(bytes[k]) << (8 * k);
    v = std::bit_cast<double>(bits);
  }
  return r;
}

}  // namespace speedrs
