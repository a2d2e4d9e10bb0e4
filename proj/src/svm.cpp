#include "gaitxai/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace gaitxai {

namespace {

constexpr double kTau = 1e-12;

bool in_up(double a, int y, double C) { return (y > 0 && a < C) || (y < 0 && a > 0.0); }
bool in_low(double a, int y, double C) { return (y > 0 && a > 0.0) || (y < 0 && a < C); }

}  // namespace

SvmSolution svm_solve_gram(const Eigen::MatrixXd& X, const Eigen::MatrixXd& K, std::span<const int> y,
                           const SvmOptions& opt) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (X.cols() != n || K.rows() != n || K.cols() != n) throw shape_error("svm: sample count mismatch");
  if (!(opt.C > 0.0)) throw precondition_error("svm: C must be positive");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    if (v != 1 && v != -1) throw precondition_error("svm labels must be +1 or -1");
    (v > 0 ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) throw precondition_error("svm needs at least one sample of each class");

  const double C = opt.C;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);  // gradient of 1/2 a'Qa - e'a
  const std::size_t max_iter = opt.max_epochs * static_cast<std::size_t>(std::max<Eigen::Index>(n, 1));

  SvmSolution sol;
  std::size_t it = 0;
  for (;; ++it) {
    // Maximal violating pair with second-order choice of j.
    double gmax = -std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      if (in_up(alpha(t), y[t], C) && -y[t] * G(t) >= gmax) {
        if (-y[t] * G(t) > gmax || i < 0) i = t;
        gmax = -y[t] * G(t);
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(alpha(t), y[t], C)) continue;
      const double v = -y[t] * G(t);
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double bdiff = gmax - v;
        double a = K(i, i) + K(t, t) - 2.0 * K(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -bdiff * bdiff / a;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    sol.gap = gmax - gmin;
    if (i < 0 || j < 0 || sol.gap < opt.tolerance) {
      sol.converged = true;
      break;
    }
    if (it >= max_iter) break;

    const double Ci = C, Cj = C;
    const double old_ai = alpha(i), old_aj = alpha(j);
    const int yi = y[i], yj = y[j];
    double quad = K(i, i) + K(j, j) - 2.0 * K(i, j);
    if (quad <= 0.0) quad = kTau;
    double ai = old_ai, aj = old_aj;
    if (yi != yj) {
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0 && aj < 0) { aj = 0; ai = diff; }
      else if (diff <= 0 && ai < 0) { ai = 0; aj = -diff; }
      if (diff > Ci - Cj && ai > Ci) { ai = Ci; aj = Ci - diff; }
      else if (diff <= Ci - Cj && aj > Cj) { aj = Cj; ai = Cj + diff; }
    } else {
      const double delta = (G(i) - G(j)) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > Ci && ai > Ci) { ai = Ci; aj = sum - Ci; }
      else if (sum <= Ci && aj < 0) { aj = 0; ai = sum; }
      if (sum > Cj && aj > Cj) { aj = Cj; ai = sum - Cj; }
      else if (sum <= Cj && ai < 0) { ai = 0; aj = sum; }
    }
    const double dai = ai - old_ai, daj = aj - old_aj;
    alpha(i) = ai;
    alpha(j) = aj;
    // G_t += Q_ti dai + Q_tj daj with Q_ab = y_a y_b K_ab
    for (Eigen::Index t = 0; t < n; ++t) G(t) += y[t] * (yi * K(t, i) * dai + yj * K(t, j) * daj);
  }
  sol.iterations = it;

  // Bias from free vectors, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity(), sum_free = 0.0;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y[t] * G(t);
    if (alpha(t) >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  const double rho = n_free > 0 ? sum_free / static_cast<double>(n_free) : (ub + lb) / 2.0;
  sol.b = -rho;
  Eigen::VectorXd coef(n);
  for (Eigen::Index t = 0; t < n; ++t) coef(t) = alpha(t) * y[t];
  sol.w = X * coef;
  sol.alpha = std::move(alpha);
  return sol;
}

SvmSolution svm_solve(const Eigen::MatrixXd& X, std::span<const int> y, const SvmOptions& opt) {
  const Eigen::MatrixXd K = X.transpose() * X;
  return svm_solve_gram(X, K, y, opt);
}

ModelParams svm_train(const TrainingSet& data, const SvmOptions& opt) {
  if (data.size() == 0) throw precondition_error("svm_train needs training samples");
  if (static_cast<std::size_t>(data.X.cols()) != data.size()) throw shape_error("training matrix/label count mismatch");
  std::set<std::size_t> present(data.labels.begin(), data.labels.end());
  if (present.size() < 2) throw precondition_error("svm_train needs samples of at least two classes");

  ModelParams p;
  p.kind = ModelKind::svm;
  p.n_classes = data.n_classes;
  p.arch = svm_arch(data.n_classes, static_cast<std::size_t>(data.X.rows()));
  p.layers.resize(1);
  const Eigen::Index rows = static_cast<Eigen::Index>(p.arch[0].out_dim);
  p.layers[0].W.resize(rows, data.X.rows());
  p.layers[0].b.resize(rows);

  const Eigen::MatrixXd K = data.X.transpose() * data.X;
  std::vector<int> y(data.size());
  for (Eigen::Index k = 0; k < rows; ++k) {
    const std::size_t positive = rows == 1 ? 1 : static_cast<std::size_t>(k);
    for (std::size_t s = 0; s < data.size(); ++s) y[s] = data.labels[s] == positive ? 1 : -1;
    const bool has_pos = std::find(y.begin(), y.end(), 1) != y.end();
    if (!has_pos) {
      // Class absent from this training split: a constant "never" margin.
      p.layers[0].W.row(k).setZero();
      p.layers[0].b(k) = -1.0;
      continue;
    }
    const SvmSolution s = svm_solve_gram(data.X, K, y, opt);
    p.layers[0].W.row(k) = s.w.transpose();
    p.layers[0].b(k) = s.b;
  }
  p.trained = true;
  return p;
}

double svm_primal_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, std::span<const int> y,
                            double C) {
  const Eigen::VectorXd f = (X.transpose() * w).array() + b;
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) hinge += std::max(0.0, 1.0 - y[i] * f(i));
  return 0.5 * w.squaredNorm() + C * hinge;
}

void svm_primal_gradient(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& X, std::span<const int> y,
                         double C, Eigen::VectorXd& grad_w, double& grad_b) {
  const Eigen::VectorXd f = (X.transpose() * w).array() + b;
  grad_w = w;
  grad_b = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) {
    if (1.0 - y[i] * f(i) > 0.0) {
      grad_w -= C * y[i] * X.col(i);
      grad_b -= C * y[i];
    }
  }
}

}  // namespace gaitxai
