#pragma once

#include <Eigen/Dense>
#include <span>

#include "gaitxai/models.hpp"

namespace gaitxai {

struct SvmOptions {
  double C = 0.1;
  double tolerance = 1e-6;         // maximal violating-pair gap at termination
  std::size_t max_epochs = 100000; // one epoch = n pair updates
};

struct SvmSolution {
  Eigen::VectorXd w;
  double b = 0.0;
  Eigen::VectorXd alpha;  // dual variables, 0 <= alpha_i <= C
  std::size_t iterations = 0;
  double gap = 0.0;  // final maximal violation
  bool converged = false;
};

/// Soft-margin linear SVM with unregularized bias,
///   min 1/2 |w|^2 + C sum_i max(0, 1 - y_i (w.x_i + b)),
/// solved in the dual by pairwise coordinate descent (SMO with second-order
/// working-set selection). X holds one sample per column, y is +-1.
SvmSolution svm_solve(const Eigen::MatrixXd& X, std::span<const int> y, const SvmOptions& opt = {});
/// Same with a precomputed Gram matrix K = X^T X.
SvmSolution svm_solve_gram(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K, std::span<const int> y,
                           const SvmOptions& opt = {});

/// Binary tasks: one row, positive class = class index 1. Otherwise one-vs-rest
/// rows, prediction by argmax over margins. Throws precondition_error when
/// the training labels cover fewer than two classes.
ModelParams svm_train(const TrainingSet& data, const SvmOptions& opt = {});

double svm_primal_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, std::span<const int> y,
                            double C);
/// Gradient of the primal objective where no margin sits exactly at 1.
void svm_primal_gradient(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, std::span<const int> y,
                         double C, Eigen::VectorXd& grad_w, double& grad_b);

}  // namespace gaitxai
