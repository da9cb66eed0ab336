#include "pcaddreach/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pcaddreach/rng.hpp"

namespace pcaddreach {

namespace {

constexpr double kStdFloor = 1e-8;

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // floored
};

Moments column_sample_moments(const Eigen::MatrixXd& samples) {
  Moments m;
  m.mean = samples.rowwise().mean();
  Eigen::MatrixXd centered = samples.colwise() - m.mean;
  m.stddev = centered.array().square().rowwise().mean().sqrt().max(kStdFloor).matrix();
  return m;
}

// Pool statistics per state component over all steps, then tile across the
// segment so equal-length segments share one normalizer.
Moments pooled_component_moments(const TrajectoryDataset& dataset, std::size_t fit_count,
                                 Eigen::Index n, std::size_t segment_len) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sumsq = Eigen::VectorXd::Zero(n);
  std::size_t per_component = 0;
  for (std::size_t i = 0; i < fit_count; ++i) {
    const Eigen::MatrixXd& states = dataset.records[i].states;
    sum += states.rowwise().sum();
    sumsq += states.array().square().rowwise().sum().matrix();
    per_component += static_cast<std::size_t>(states.cols());
  }
  Eigen::VectorXd mean = sum / static_cast<double>(per_component);
  Eigen::VectorXd var =
      (sumsq / static_cast<double>(per_component) - mean.array().square().matrix())
          .cwiseMax(0.0);
  Moments m;
  m.mean.resize(n * static_cast<Eigen::Index>(segment_len));
  m.stddev.resize(n * static_cast<Eigen::Index>(segment_len));
  for (std::size_t k = 0; k < segment_len; ++k) {
    m.mean.segment(static_cast<Eigen::Index>(k) * n, n) = mean;
    m.stddev.segment(static_cast<Eigen::Index>(k) * n, n) = var.cwiseSqrt().cwiseMax(kStdFloor);
  }
  return m;
}

struct AdamState {
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  std::size_t step = 0;
};

}  // namespace

TrainResult train_segment(const TrajectoryDataset& dataset, const SegmentPlan& plan, std::size_t q,
                          const TrainConfig& cfg) {
  if (q >= plan.num_segments()) throw std::out_of_range("train_segment: segment index");
  if (dataset.records.empty()) throw std::invalid_argument("train_segment: empty dataset");
  if (plan.offsets[q] + plan.lengths[q] > dataset.horizon)
    throw std::invalid_argument("train_segment: dataset horizon shorter than segment window");
  if (cfg.epochs == 0 || cfg.batch_size == 0)
    throw std::invalid_argument("train_segment: epochs and batch_size must be positive");

  const Eigen::Index n = dataset.spec.state_dim;
  const std::size_t count = dataset.records.size();
  const Eigen::Index out_dim = n * static_cast<Eigen::Index>(plan.lengths[q]);

  std::size_t val_count = static_cast<std::size_t>(
      static_cast<double>(count) * std::clamp(cfg.validation_fraction, 0.0, 1.0));
  if (val_count >= count) val_count = count - 1;
  const std::size_t fit_count = count - val_count;

  Eigen::MatrixXd inputs(n, static_cast<Eigen::Index>(count));
  Eigen::MatrixXd targets(out_dim, static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    inputs.col(static_cast<Eigen::Index>(i)) = dataset.records[i].initial_state;
    Eigen::MatrixXd window = dataset.records[i].states.middleCols(
        static_cast<Eigen::Index>(plan.offsets[q]), static_cast<Eigen::Index>(plan.lengths[q]));
    targets.col(static_cast<Eigen::Index>(i)) =
        Eigen::Map<Eigen::VectorXd>(window.data(), out_dim);
  }

  Moments in_m = column_sample_moments(inputs.leftCols(static_cast<Eigen::Index>(fit_count)));
  Moments out_m =
      cfg.normalization == Normalization::PerSegment
          ? column_sample_moments(targets.leftCols(static_cast<Eigen::Index>(fit_count)))
          : pooled_component_moments(dataset, fit_count, n, plan.lengths[q]);

  Mlpd net;
  net.layer_widths.push_back(n);
  for (Eigen::Index w : cfg.hidden_widths) net.layer_widths.push_back(w);
  net.layer_widths.push_back(out_dim);
  net.input_scaling.scale = in_m.stddev.cwiseInverse();
  net.input_scaling.offset = -in_m.mean.cwiseQuotient(in_m.stddev);
  net.output_scaling.scale = out_m.stddev;
  net.output_scaling.offset = out_m.mean;

  RandomStream rng(cfg.seed);
  const std::size_t num_layers = net.layer_widths.size() - 1;
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Eigen::Index fan_in = net.layer_widths[l], fan_out = net.layer_widths[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (Eigen::Index r = 0; r < fan_out; ++r)
      for (Eigen::Index c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }

  Eigen::MatrixXd x_fit = ((inputs.leftCols(static_cast<Eigen::Index>(fit_count)).colwise() -
                            in_m.mean)
                               .array()
                               .colwise() /
                           in_m.stddev.array())
                              .matrix();
  Eigen::MatrixXd y_fit = ((targets.leftCols(static_cast<Eigen::Index>(fit_count)).colwise() -
                            out_m.mean)
                               .array()
                               .colwise() /
                           out_m.stddev.array())
                              .matrix();

  AdamState adam;
  for (std::size_t l = 0; l < num_layers; ++l) {
    adam.mw.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    adam.vw.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    adam.mb.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    adam.vb.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
  }

  std::vector<std::size_t> order(fit_count);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.epoch_losses.reserve(cfg.epochs);

  std::vector<Eigen::MatrixXd> acts(num_layers + 1);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t at = 0; at < fit_count; at += cfg.batch_size) {
      const std::size_t batch = std::min(cfg.batch_size, fit_count - at);
      Eigen::MatrixXd xb(n, static_cast<Eigen::Index>(batch));
      Eigen::MatrixXd yb(out_dim, static_cast<Eigen::Index>(batch));
      for (std::size_t j = 0; j < batch; ++j) {
        xb.col(static_cast<Eigen::Index>(j)) = x_fit.col(static_cast<Eigen::Index>(order[at + j]));
        yb.col(static_cast<Eigen::Index>(j)) = y_fit.col(static_cast<Eigen::Index>(order[at + j]));
      }

      acts[0] = xb;
      for (std::size_t l = 0; l < num_layers; ++l) {
        acts[l + 1] = (net.weights[l] * acts[l]).colwise() + net.biases[l];
        if (l + 1 < num_layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
      }

      const double denom = static_cast<double>(batch) * static_cast<double>(out_dim);
      Eigen::MatrixXd delta = acts[num_layers] - yb;
      epoch_loss += delta.squaredNorm() / denom * static_cast<double>(batch);
      seen += batch;
      delta *= 2.0 / denom;

      adam.step += 1;
      const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.step));
      const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.step));
      for (std::size_t l = num_layers; l-- > 0;) {
        Eigen::MatrixXd gw = delta * acts[l].transpose();
        Eigen::VectorXd gb = delta.rowwise().sum();
        if (l > 0) {
          delta = net.weights[l].transpose() * delta;
          delta = ((acts[l].array() > 0.0).cast<double>() * delta.array()).matrix();
        }
        adam.mw[l] = cfg.adam_beta1 * adam.mw[l] + (1.0 - cfg.adam_beta1) * gw;
        adam.vw[l] = cfg.adam_beta2 * adam.vw[l] + (1.0 - cfg.adam_beta2) * gw.cwiseAbs2();
        adam.mb[l] = cfg.adam_beta1 * adam.mb[l] + (1.0 - cfg.adam_beta1) * gb;
        adam.vb[l] = cfg.adam_beta2 * adam.vb[l] + (1.0 - cfg.adam_beta2) * gb.cwiseAbs2();
        net.weights[l].array() -=
            cfg.learning_rate * (adam.mw[l] / bc1).array() /
            ((adam.vw[l] / bc2).array().sqrt() + cfg.adam_eps);
        net.biases[l].array() -=
            cfg.learning_rate * (adam.mb[l] / bc1).array() /
            ((adam.vb[l] / bc2).array().sqrt() + cfg.adam_eps);
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
  }

  const std::size_t eval_begin = val_count > 0 ? fit_count : 0;
  const std::size_t eval_count = val_count > 0 ? val_count : fit_count;
  double sq = 0.0;
  for (std::size_t i = 0; i < eval_count; ++i) {
    Eigen::VectorXd pred = net.forward(
        Eigen::VectorXd(inputs.col(static_cast<Eigen::Index>(eval_begin + i))));
    sq += (pred - targets.col(static_cast<Eigen::Index>(eval_begin + i))).squaredNorm();
  }
  result.validation_rmse =
      std::sqrt(sq / (static_cast<double>(eval_count) * static_cast<double>(out_dim)));
  result.net = std::move(net);
  return result;
}

}  // namespace pcaddreach
