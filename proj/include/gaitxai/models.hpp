#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gaitxai/common.hpp"
#include "gaitxai/rng.hpp"

namespace gaitxai {

enum class LayerKind { dense, conv1d, relu, softmax, flatten };
std::string_view to_string(LayerKind k);

/// One entry of a sequential architecture. Every layer carries its flattened
/// input/output width; conv layers additionally carry the (channels, length)
/// geometry with channel-major flattening: feature index = channel * len + t.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  // conv1d only (valid padding, no dilation)
  std::size_t filter_size = 0;
  std::size_t stride = 1;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t in_len = 0;
  std::size_t out_len = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv1d(std::size_t in_len, std::size_t in_channels, std::size_t filter, std::size_t stride,
                          std::size_t out_channels);
  static LayerSpec activation(LayerKind kind, std::size_t dim);

  bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv1d; }
  /// Inputs feeding one output neuron (the m of the init rule).
  std::size_t fan_in() const { return kind == LayerKind::conv1d ? filter_size * in_channels : in_dim; }
};

/// floor((len - filter) / stride) + 1; throws shape_error if len < filter.
std::size_t conv_output_length(std::size_t len, std::size_t filter, std::size_t stride);

enum class ModelKind { svm, mlp, cnn };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

/// Dense: W is (out_dim x in_dim). Conv: W is (out_channels x in_channels*filter)
/// with column index channel * filter + tap.
struct LayerParams {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct ModelParams {
  ModelKind kind = ModelKind::mlp;
  std::size_t n_classes = 2;
  std::vector<LayerSpec> arch;
  std::vector<LayerParams> layers;  // aligned with arch; empty for parameter-free layers
  bool trained = false;

  std::size_t input_dim() const { return arch.front().in_dim; }
  std::size_t output_dim() const { return arch.back().out_dim; }
  bool has_softmax() const { return arch.back().kind == LayerKind::softmax; }
};

std::vector<LayerSpec> mlp_arch(std::size_t n_classes, std::size_t input_dim = kInputDim, std::size_t hidden = 768);
/// conv(8,2,->24) relu conv(8,2,->24) relu conv(6,3,->48) relu flatten dense softmax.
std::vector<LayerSpec> cnn_arch(std::size_t n_classes, std::size_t input_dim = kInputDim);
/// Single linear map: 1 output for binary tasks, one-vs-rest rows otherwise.
std::vector<LayerSpec> svm_arch(std::size_t n_classes, std::size_t input_dim = kInputDim);

/// Throws shape_error if consecutive layers disagree on widths.
void validate_arch(std::span<const LayerSpec> arch);

/// Weights ~ Normal(0, fan_in^-1/2), biases zero.
ModelParams init_params(ModelKind kind, std::vector<LayerSpec> arch, std::size_t n_classes, Rng& rng);

// ---- forward --------------------------------------------------------------

/// Input and output of every layer for a batch (one column per sample). For
/// dense/conv layers the output is the pre-activation z (bias included).
struct ActivationTrace {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> outputs;
  std::size_t size() const { return inputs.size(); }
};

struct ForwardResult {
  Eigen::VectorXd output;  // probabilities for softmax heads, margins for the SVM
  Eigen::VectorXd scores;  // pre-softmax scores (== output for the SVM)
  ActivationTrace trace;
};

ForwardResult forward(const ModelParams& p, std::span<const double> v);
ActivationTrace forward_batch(const ModelParams& p, const Eigen::MatrixXd& X);

/// Single-layer kernels, exposed for tests and for the LRP module.
Eigen::MatrixXd conv1d_valid(const Eigen::MatrixXd& X, const LayerSpec& layer, const LayerParams& lp);
/// Patch matrix for one sample: rows channel*filter+tap, columns output positions.
Eigen::MatrixXd im2col(std::span<const double> x, const LayerSpec& layer);
Eigen::VectorXd softmax(const Eigen::VectorXd& z);

/// argmax with ties to the lowest index; binary SVM: margin > 0 -> class 1.
std::size_t predict(const ModelParams& p, std::span<const double> v);
std::size_t argmax_lowest(std::span<const double> scores);

// ---- training -------------------------------------------------------------

struct TrainSchedule {
  std::size_t total_iters = 30000;
  std::size_t batch_size = 5;
  std::array<double, 3> stage_lr{5e-3, 1e-3, 5e-4};
  std::array<std::size_t, 2> stage_end{10000, 20000};  // last iteration (1-based) of stages 1 and 2

  /// Learning rate at 1-based iteration i.
  double lr_at(std::size_t iter) const;
  /// Same three-stage shape compressed to `total` iterations.
  static TrainSchedule scaled(std::size_t total);
};

/// Column-per-sample training data with class indices.
struct TrainingSet {
  Eigen::MatrixXd X;
  std::vector<std::size_t> labels;
  std::size_t n_classes = 2;
  std::size_t size() const { return labels.size(); }
};

/// Mean over the batch of sum_k |softmax_k - onehot_k|.
double l1_loss(const ModelParams& p, const Eigen::MatrixXd& X, std::span<const std::size_t> labels);

/// Parameter gradients of l1_loss, aligned with ModelParams::layers.
std::vector<LayerParams> l1_gradients(const ModelParams& p, const Eigen::MatrixXd& X,
                                      std::span<const std::size_t> labels);

/// One SGD step in place; returns the batch loss before the step.
double sgd_step(ModelParams& p, const Eigen::MatrixXd& X, std::span<const std::size_t> labels, double lr);

/// Receives the training-set indices of every mini batch.
using BatchObserver = std::function<void(std::span<const std::size_t>)>;

/// Runs exactly schedule.total_iters updates on batches drawn uniformly with
/// replacement. Deterministic given the generator state.
ModelParams sgd_train(ModelParams params, const TrainingSet& data, const TrainSchedule& schedule, Rng& rng,
                      const BatchObserver& observer = {});

/// True when every ReLU pre-activation and every l1 residual of the batch is
/// at least `margin` away from zero (finite differences are valid there).
bool is_smooth_point(const ModelParams& p, const Eigen::MatrixXd& X, std::span<const std::size_t> labels,
                     double margin = 1e-3);

// ---- checkpoints -----------------------------------------------------------

/// JSON manifest plus one little-endian float64 blob per tensor.
void save_checkpoint(const ModelParams& p, const std::string& dir, const std::string& metadata_json = "{}");
ModelParams load_checkpoint(const std::string& dir);

}  // namespace gaitxai
