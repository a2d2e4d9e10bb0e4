#include <cmath>
#include <vector>

#include "doctest.h"
#include "gaitxai/rng.hpp"
#include "gaitxai/svm.hpp"

using namespace gaitxai;

TEST_CASE("two symmetric points put the boundary at zero") {
  Eigen::MatrixXd X(1, 2);
  X << -1.0, 1.0;
  const std::vector<int> y{-1, 1};
  SvmOptions opt;
  opt.C = 100.0;
  const SvmSolution s = svm_solve(X, y, opt);
  CHECK(s.converged);
  CHECK(s.w(0) > 0.0);
  CHECK(s.w(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(s.b) <= 1e-9);
}

TEST_CASE("duplicating every point with C halved keeps the decision function") {
  Rng rng(3);
  const Eigen::Index n = 24;
  Eigen::MatrixXd X(3, n);
  std::vector<int> y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    y[j] = j % 2 ? 1 : -1;
    for (Eigen::Index i = 0; i < 3; ++i) X(i, j) = rng.normal() + 0.6 * y[j];
  }
  Eigen::MatrixXd X2(3, 2 * n);
  X2 << X, X;
  std::vector<int> y2 = y;
  y2.insert(y2.end(), y.begin(), y.end());
  SvmOptions o1, o2;
  o1.C = 0.1;
  o2.C = 0.05;
  o1.tolerance = o2.tolerance = 1e-10;
  const SvmSolution a = svm_solve(X, y, o1);
  const SvmSolution b = svm_solve(X2, y2, o2);
  CHECK((a.w - b.w).norm() <= 1e-6);
  CHECK(a.b == doctest::Approx(b.b).epsilon(1e-6));
}

TEST_CASE("dual solution minimizes the primal objective") {
  Rng rng(8);
  const Eigen::Index n = 40;
  Eigen::MatrixXd X(4, n);
  std::vector<int> y(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    y[j] = j < n / 2 ? 1 : -1;
    for (Eigen::Index i = 0; i < 4; ++i) X(i, j) = rng.normal() + 0.4 * y[j];
  }
  SvmOptions opt;
  opt.tolerance = 1e-10;
  const SvmSolution s = svm_solve(X, y, opt);
  const double f0 = svm_primal_objective(s.w, s.b, X, y, opt.C);
  for (int k = 0; k < 20; ++k) {
    Eigen::VectorXd w = s.w;
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) += 1e-3 * rng.normal();
    CHECK(svm_primal_objective(w, s.b + 1e-3 * rng.normal(), X, y, opt.C) >= f0 - 1e-9);
  }
}

TEST_CASE("separable blobs are classified perfectly") {
  Rng rng(1);
  TrainingSet d;
  d.X.resize(2, 60);
  for (Eigen::Index j = 0; j < 60; ++j) {
    const std::size_t c = static_cast<std::size_t>(j % 2);
    d.labels.push_back(c);
    d.X(0, j) = (c ? 3.0 : -3.0) + 0.5 * rng.normal();
    d.X(1, j) = 0.5 * rng.normal();
  }
  const ModelParams p = svm_train(d);
  CHECK(p.kind == ModelKind::svm);
  CHECK(p.trained);
  for (Eigen::Index j = 0; j < 60; ++j)
    CHECK(predict(p, std::vector<double>{d.X(0, j), d.X(1, j)}) == d.labels[static_cast<std::size_t>(j)]);
}

TEST_CASE("one-vs-rest for three classes") {
  Rng rng(2);
  TrainingSet d;
  d.n_classes = 3;
  d.X.resize(2, 90);
  const double cx[3] = {-4, 0, 4}, cy[3] = {0, 4, 0};
  for (Eigen::Index j = 0; j < 90; ++j) {
    const std::size_t c = static_cast<std::size_t>(j % 3);
    d.labels.push_back(c);
    d.X(0, j) = cx[c] + 0.4 * rng.normal();
    d.X(1, j) = cy[c] + 0.4 * rng.normal();
  }
  const ModelParams p = svm_train(d, SvmOptions{1.0});
  CHECK(p.layers[0].W.rows() == 3);
  std::size_t correct = 0;
  for (Eigen::Index j = 0; j < 90; ++j)
    correct += predict(p, std::vector<double>{d.X(0, j), d.X(1, j)}) == d.labels[static_cast<std::size_t>(j)];
  CHECK(correct == 90);
}

TEST_CASE("single-class input is rejected") {
  TrainingSet d;
  d.X = Eigen::MatrixXd::Ones(2, 3);
  d.labels = {1, 1, 1};
  CHECK_THROWS_AS(svm_train(d), precondition_error);
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, 2);
  CHECK_THROWS_AS(svm_solve(X, std::vector<int>{1, 1}), precondition_error);
}
