#include <cmath>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "gaitxai/models.hpp"
#include "gaitxai/rng.hpp"
#include "oracles.hpp"

using namespace gaitxai;

namespace {

ModelParams small_mlp(std::uint64_t seed, std::size_t in = 12, std::size_t hidden = 9) {
  Rng rng(seed);
  return init_params(ModelKind::mlp, mlp_arch(2, in, hidden), 2, rng);
}

TrainingSet small_data(std::uint64_t seed, std::size_t n = 30, std::size_t in = 12) {
  Rng rng(seed);
  TrainingSet d;
  d.X.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t y = j % 2;
    d.labels.push_back(y);
    for (std::size_t i = 0; i < in; ++i)
      d.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rng.normal() + (y ? 0.8 : -0.8);
  }
  return d;
}

}  // namespace

TEST_CASE("CNN architecture reaches flatten width 2304") {
  const auto arch = cnn_arch(2);
  REQUIRE(arch.size() == 9);
  CHECK(arch[0].out_len == 300);
  CHECK(arch[2].out_len == 147);
  CHECK(arch[4].out_len == 48);
  CHECK(arch[0].out_channels == 24);
  CHECK(arch[2].out_channels == 24);
  CHECK(arch[4].out_channels == 48);
  CHECK(arch[6].in_dim == 2304);
  CHECK(arch[7].out_dim == 2);
  CHECK(arch[8].kind == LayerKind::softmax);
  CHECK(conv_output_length(606, 8, 2) == 300);
  CHECK_THROWS_AS(conv_output_length(5, 8, 2), shape_error);
}

TEST_CASE("MLP and SVM architectures") {
  const auto mlp = mlp_arch(3);
  CHECK(mlp.front().in_dim == 606);
  CHECK(mlp[0].out_dim == 768);
  CHECK(mlp[2].out_dim == 768);
  CHECK(mlp[4].out_dim == 3);
  CHECK(svm_arch(2).front().out_dim == 1);
  CHECK(svm_arch(4).front().out_dim == 4);
  std::vector<LayerSpec> bad{LayerSpec::dense(4, 3), LayerSpec::dense(2, 1)};
  CHECK_THROWS_AS(validate_arch(bad), shape_error);
}

TEST_CASE("weight initialization scale and determinism") {
  Rng a(5), b(5);
  const ModelParams p = init_params(ModelKind::mlp, mlp_arch(2), 2, a);
  const ModelParams q = init_params(ModelKind::mlp, mlp_arch(2), 2, b);
  const Eigen::MatrixXd& W = p.layers[0].W;
  const double n = static_cast<double>(W.size());
  const double mean = W.mean();
  const double sd = std::sqrt((W.array() - mean).square().sum() / (n - 1.0));
  const double sigma = 1.0 / std::sqrt(606.0);
  CHECK(sigma == doctest::Approx(0.04062).epsilon(1e-4));
  CHECK(std::abs(mean) <= 4.0 * sigma / std::sqrt(n));
  CHECK(sd == doctest::Approx(sigma).epsilon(0.01));
  CHECK(p.layers[0].b.isZero(0.0));
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    CHECK(p.layers[i].W == q.layers[i].W);
    CHECK(p.layers[i].b == q.layers[i].b);
  }
}

TEST_CASE("conv1d hand examples") {
  const LayerSpec l = LayerSpec::conv1d(4, 1, 2, 2, 1);
  LayerParams lp{Eigen::MatrixXd(1, 2), Eigen::VectorXd::Zero(1)};
  lp.W << 1, -1;
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  const Eigen::MatrixXd y = conv1d_valid(x, l, lp);
  REQUIRE(y.rows() == 2);
  CHECK(y(0, 0) == -1.0);
  CHECK(y(1, 0) == -1.0);

  const LayerSpec id = LayerSpec::conv1d(5, 1, 1, 1, 1);
  LayerParams one{Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)};
  Eigen::MatrixXd z(5, 1);
  z << 3, -1, 4, 1, 5;
  CHECK(conv1d_valid(z, id, one) == z);

  Eigen::MatrixXd wrong(3, 1);
  wrong.setZero();
  CHECK_THROWS_AS(conv1d_valid(wrong, l, lp), shape_error);
}

TEST_CASE("conv1d agrees with a loop implementation") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t C = 1 + rng.index(3), L = 12 + rng.index(20), F = 1 + rng.index(5), S = 1 + rng.index(3),
                      O = 1 + rng.index(4);
    const LayerSpec l = LayerSpec::conv1d(L, C, F, S, O);
    LayerParams lp{Eigen::MatrixXd(O, C * F), oracle::random_vector(rng, static_cast<Eigen::Index>(O))};
    for (Eigen::Index i = 0; i < lp.W.size(); ++i) lp.W.data()[i] = rng.normal();
    const Eigen::VectorXd x = oracle::random_vector(rng, static_cast<Eigen::Index>(C * L));
    const Eigen::MatrixXd y = conv1d_valid(x, l, lp);
    const auto ref = oracle::conv1d(std::vector<double>(x.data(), x.data() + x.size()), l, lp);
    REQUIRE(static_cast<std::size_t>(y.rows()) == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y(static_cast<Eigen::Index>(i), 0) == doctest::Approx(ref[i]));
  }
}

TEST_CASE("forward pass conventions") {
  Eigen::VectorXd z(2);
  z << 0.0, 0.0;
  const Eigen::VectorXd s = softmax(z);
  CHECK(s(0) == 0.5);
  CHECK(s(1) == 0.5);

  ModelParams p = small_mlp(1, kInputDim, 16);
  for (auto& lp : p.layers) {
    lp.W.setZero();
    lp.b.setZero();
  }
  const std::vector<double> v(kInputDim, 0.3);
  const ForwardResult r = forward(p, v);
  CHECK(r.output(0) == 0.5);
  CHECK(r.output(1) == 0.5);
  CHECK(predict(p, v) == 0);
  CHECK_THROWS_AS(forward(p, std::vector<double>(10, 0.0)), shape_error);

  Rng rng(2);
  const ModelParams cnn = init_params(ModelKind::cnn, cnn_arch(2), 2, rng);
  const ForwardResult rc = forward(cnn, v);
  CHECK(rc.trace.size() == 9);
  CHECK(rc.output.sum() == doctest::Approx(1.0));
}

TEST_CASE("forward matches loop oracle for MLP and CNN") {
  Rng rng(3);
  for (ModelKind k : {ModelKind::mlp, ModelKind::cnn}) {
    const ModelParams p =
        init_params(k, k == ModelKind::mlp ? mlp_arch(3) : cnn_arch(3), 3, rng);
    const Eigen::VectorXd x = oracle::random_vector(rng, kInputDim);
    const std::vector<double> xv(x.data(), x.data() + x.size());
    const ForwardResult r = forward(p, xv);
    const auto ref = oracle::scores(p, xv);
    for (std::size_t c = 0; c < 3; ++c)
      CHECK(r.scores(static_cast<Eigen::Index>(c)) == doctest::Approx(ref[c]).epsilon(1e-10));
  }
}

TEST_CASE("prediction rule and tie-break") {
  CHECK(argmax_lowest(std::vector<double>{0.9, 0.1}) == 0);
  CHECK(argmax_lowest(std::vector<double>{0.5, 0.5}) == 0);
  CHECK(argmax_lowest(std::vector<double>{0.1, 0.3, 0.3}) == 1);
  ModelParams svm;
  svm.kind = ModelKind::svm;
  svm.arch = svm_arch(2, 1);
  svm.layers = {LayerParams{Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)}};
  svm.trained = true;
  CHECK(predict(svm, std::vector<double>{2.3}) == 1);
  CHECK(predict(svm, std::vector<double>{-2.3}) == 0);
}

TEST_CASE("training schedule stages") {
  const TrainSchedule s;
  CHECK(s.lr_at(1) == 5e-3);
  CHECK(s.lr_at(10000) == 5e-3);
  CHECK(s.lr_at(10001) == 1e-3);
  CHECK(s.lr_at(20001) == 5e-4);
  CHECK(s.lr_at(30000) == 5e-4);
  const TrainSchedule t = TrainSchedule::scaled(300);
  CHECK(t.total_iters == 300);
  CHECK(t.lr_at(100) == 5e-3);
  CHECK(t.lr_at(101) == 1e-3);
  CHECK(t.lr_at(201) == 5e-4);
}

TEST_CASE("l1 gradients match central differences") {
  const ModelParams p = small_mlp(7);
  const TrainingSet d = small_data(8, 5);
  REQUIRE(is_smooth_point(p, d.X, d.labels, 1e-4));
  const auto g = l1_gradients(p, d.X, d.labels);
  const double h = 1e-5;
  int checked = 0;
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    if (p.layers[li].W.size() == 0) continue;
    for (Eigen::Index k = 0; k < std::min<Eigen::Index>(p.layers[li].W.size(), 6); ++k) {
      ModelParams a = p, b = p;
      a.layers[li].W.data()[k] += h;
      b.layers[li].W.data()[k] -= h;
      const double fd = (l1_loss(a, d.X, d.labels) - l1_loss(b, d.X, d.labels)) / (2 * h);
      const double an = g[li].W.data()[k];
      CHECK(std::abs(fd - an) <= 1e-4 * std::max(std::abs(an), 1e-4));
      ++checked;
    }
  }
  CHECK(checked >= 12);
}

TEST_CASE("a small SGD step lowers the batch loss") {
  ModelParams p = small_mlp(9);
  const TrainingSet d = small_data(10, 5);
  const double before = l1_loss(p, d.X, d.labels);
  sgd_step(p, d.X, d.labels, 1e-3);
  CHECK(l1_loss(p, d.X, d.labels) < before);
}

TEST_CASE("SGD follows the schedule deterministically with replacement sampling") {
  const TrainingSet d = small_data(12);
  TrainSchedule s = TrainSchedule::scaled(60);
  std::size_t batches = 0;
  Rng r1(4), r2(4);
  const ModelParams a = sgd_train(small_mlp(3), d, s, r1, [&](std::span<const std::size_t> idx) {
    CHECK(idx.size() == 5);
    for (std::size_t i : idx) CHECK(i < d.size());
    ++batches;
  });
  const ModelParams b = sgd_train(small_mlp(3), d, s, r2);
  CHECK(batches == 60);
  CHECK(a.trained);
  for (std::size_t i = 0; i < a.layers.size(); ++i) CHECK(a.layers[i].W == b.layers[i].W);
  Rng r3(1);
  CHECK_THROWS_AS(sgd_train(small_mlp(3), TrainingSet{}, s, r3), precondition_error);
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(21);
  ModelParams p = init_params(ModelKind::cnn, cnn_arch(3), 3, rng);
  p.layers[0].b(3) = 0.125;
  p.trained = true;
  const auto dir = std::filesystem::temp_directory_path() / "gaitxai_ckpt_test";
  std::filesystem::remove_all(dir);
  save_checkpoint(p, dir.string());
  const ModelParams q = load_checkpoint(dir.string());
  CHECK(q.kind == p.kind);
  CHECK(q.n_classes == 3);
  CHECK(q.trained);
  REQUIRE(q.layers.size() == p.layers.size());
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    CHECK(q.layers[i].W == p.layers[i].W);
    CHECK(q.layers[i].b == p.layers[i].b);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS(load_checkpoint(dir.string()));
}
