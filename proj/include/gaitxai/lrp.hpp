#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "gaitxai/grf_data.hpp"
#include "gaitxai/models.hpp"

namespace gaitxai {

/// Relevance bookkeeping of one layer during the backward pass.
struct LayerAudit {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::dense;
  std::string rule;  // "epsilon", "flat", "pass", "linear"
  double relevance_out = 0.0;  // sum over the layer's outputs
  double relevance_in = 0.0;   // sum over the layer's inputs
  double bias_absorbed = 0.0;        // sum_j R_j * b_j / zs_j
  double stabilizer_absorbed = 0.0;  // sum_j R_j * eps * sign(z_j) / zs_j
  double absorbed() const { return bias_absorbed + stabilizer_absorbed; }
};

struct RelevanceMap {
  std::vector<double> values;  // one per input index
  std::size_t target_class = 0;
  std::size_t trial_index = 0;
  double start_relevance = 0.0;  // target pre-softmax score (SVM: oriented margin)
  std::vector<LayerAudit> audit;

  double sum() const;
  double total_absorbed() const;
  double total_bias_absorbed() const;
};

/// eps-rule through a dense layer; W is (out x in) as in LayerParams.
/// R_in,i = x_i * sum_j W_ji R_j / (z_j + eps*sign(z_j)), sign(0) = +1.
/// Throws precondition_error unless eps > 0.
Eigen::VectorXd lrp_epsilon_dense(const Eigen::VectorXd& x, const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& R_out, double eps, LayerAudit* audit = nullptr);

/// eps-rule through a conv layer for one sample (channel-major vectors).
Eigen::VectorXd lrp_epsilon_conv(const Eigen::VectorXd& x, const LayerSpec& layer, const LayerParams& lp,
                                 const Eigen::VectorXd& R_out, double eps, LayerAudit* audit = nullptr);

/// Flat rule over explicit receptive fields: every output splits its relevance
/// evenly over the inputs it is connected to.
Eigen::VectorXd lrp_flat(std::span<const std::vector<std::size_t>> fields, const Eigen::VectorXd& R_out,
                         std::size_t n_inputs);
/// Flat rule over a conv layer's connectivity (field = all channels x filter taps).
Eigen::VectorXd lrp_flat_conv(const LayerSpec& layer, const Eigen::VectorXd& R_out);

struct LrpOptions {
  double epsilon = kLrpEpsilon;
  bool flat_first_conv = true;  // flat rule at the CNN input layer
};

/// Decomposes the target class score of one input. Starting relevance is the
/// target's pre-softmax score; the linear SVM uses R_i = x_i * w_i, negated
/// for the negative class of a binary model.
RelevanceMap explain_trial(const ModelParams& p, std::span<const double> v, std::size_t target,
                           const LrpOptions& opt = {});

/// Same propagation from an arbitrary output-layer relevance vector (scores
/// space, length = number of classes). Used for linearity checks.
RelevanceMap propagate_relevance(const ModelParams& p, std::span<const double> v, const Eigen::VectorXd& R_top,
                                 const LrpOptions& opt = {});

struct ClassRelevanceSummary {
  std::vector<double> mean_signal;
  std::vector<double> std_signal;
  std::vector<double> mean_relevance;
  std::vector<double> std_relevance;
  std::vector<double> mean_abs_relevance;
  std::size_t target_class = 0;
  std::size_t n_trials = 0;
};

/// Mean and sample standard deviation (n-1; 0 for a single trial) per index.
ClassRelevanceSummary class_average(std::span<const RelevanceMap> maps, std::span<const InputVector> signals);

enum class TotalRelevanceMode {
  abs_of_means,  // |mean R_A| + |mean R_B|
  mean_of_abs,   // mean |R_A| + mean |R_B|
};
std::string_view to_string(TotalRelevanceMode m);

std::vector<double> total_relevance(const ClassRelevanceSummary& a, const ClassRelevanceSummary& b,
                                    TotalRelevanceMode mode = TotalRelevanceMode::abs_of_means);
/// Multi-class generalization: sum over all class summaries.
std::vector<double> total_relevance(std::span<const ClassRelevanceSummary> classes,
                                    TotalRelevanceMode mode = TotalRelevanceMode::abs_of_means);

}  // namespace gaitxai
