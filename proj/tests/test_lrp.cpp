#include <cmath>
#include <vector>

#include "doctest.h"
#include "gaitxai/lrp.hpp"
#include "gaitxai/rng.hpp"
#include "oracles.hpp"

using namespace gaitxai;

namespace {

ModelParams linear_svm(const std::vector<double>& w, double b) {
  ModelParams p;
  p.kind = ModelKind::svm;
  p.arch = svm_arch(2, w.size());
  LayerParams lp{Eigen::MatrixXd(1, static_cast<Eigen::Index>(w.size())), Eigen::VectorXd::Constant(1, b)};
  for (std::size_t i = 0; i < w.size(); ++i) lp.W(0, static_cast<Eigen::Index>(i)) = w[i];
  p.layers = {lp};
  p.trained = true;
  return p;
}

ModelParams trained(ModelKind k, std::uint64_t seed, bool zero_bias) {
  Rng rng(seed);
  ModelParams p = init_params(k, k == ModelKind::mlp ? mlp_arch(2, 40, 24) : cnn_arch(2), 2, rng);
  if (!zero_bias)
    for (auto& lp : p.layers)
      for (Eigen::Index i = 0; i < lp.b.size(); ++i) lp.b(i) = 0.05 * rng.normal();
  p.trained = true;
  return p;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

InputVector input_of(const std::vector<double>& v) {
  InputVector iv;
  std::copy(v.begin(), v.end(), iv.values.begin());
  return iv;
}

}  // namespace

TEST_CASE("epsilon rule on a single linear unit") {
  Eigen::VectorXd x(2), R(1), b = Eigen::VectorXd::Zero(1);
  x << 3, 4;
  R << 1;
  Eigen::MatrixXd W(1, 2);
  W << 1, 2;
  LayerAudit a;
  const Eigen::VectorXd r = lrp_epsilon_dense(x, W, b, R, 1e-5, &a);
  CHECK(std::abs(r(0) - 3.0 / 11.0) <= 1e-4);
  CHECK(std::abs(r(1) - 8.0 / 11.0) <= 1e-4);
  CHECK(r.sum() + a.absorbed() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lrp_epsilon_dense(Eigen::VectorXd::Zero(2), W, b, R, 1e-5).isZero(0.0));
  CHECK_THROWS_AS(lrp_epsilon_dense(x, W, b, R, 0.0), precondition_error);
}

TEST_CASE("identity layer passes relevance through") {
  Eigen::VectorXd x(3), R(3);
  x << 1.0, -2.0, 0.5;
  R << 0.3, 0.7, -0.2;
  const Eigen::VectorXd r = lrp_epsilon_dense(x, Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3), R, 1e-5);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(r(i) - R(i)) <= 1e-4);
}

TEST_CASE("sign(0) takes the positive stabilizer") {
  Eigen::VectorXd x(2), R(1), b = Eigen::VectorXd::Zero(1);
  x << 1, 1;
  R << 1;
  Eigen::MatrixXd W(1, 2);
  W << 1, -1;
  const Eigen::VectorXd r = lrp_epsilon_dense(x, W, b, R, 1e-5);
  CHECK(r(0) == doctest::Approx(1e5));
  CHECK(r(1) == doctest::Approx(-1e5));
}

TEST_CASE("conv epsilon rule equals its dense unrolling") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t C = 1 + rng.index(3), L = 10 + rng.index(20), F = 1 + rng.index(4), S = 1 + rng.index(2),
                      O = 1 + rng.index(3);
    const LayerSpec l = LayerSpec::conv1d(L, C, F, S, O);
    LayerParams lp{Eigen::MatrixXd(O, C * F), oracle::random_vector(rng, static_cast<Eigen::Index>(O), 0.1)};
    for (Eigen::Index i = 0; i < lp.W.size(); ++i) lp.W.data()[i] = rng.normal();
    const Eigen::VectorXd x = oracle::random_vector(rng, static_cast<Eigen::Index>(l.in_dim));
    const Eigen::VectorXd R = oracle::random_vector(rng, static_cast<Eigen::Index>(l.out_dim));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l.out_dim), static_cast<Eigen::Index>(l.in_dim));
    Eigen::VectorXd bd(static_cast<Eigen::Index>(l.out_dim));
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t t = 0; t < l.out_len; ++t) {
        const auto row = static_cast<Eigen::Index>(o * l.out_len + t);
        bd(row) = lp.b(static_cast<Eigen::Index>(o));
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t f = 0; f < F; ++f)
            D(row, static_cast<Eigen::Index>(c * L + t * S + f)) =
                lp.W(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(c * F + f));
      }
    const Eigen::VectorXd a = lrp_epsilon_conv(x, l, lp, R, 1e-5);
    const Eigen::VectorXd b = lrp_epsilon_dense(x, D, bd, R, 1e-5);
    const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  }
}

TEST_CASE("conv epsilon trivial cases") {
  const LayerSpec id = LayerSpec::conv1d(6, 1, 1, 1, 1);
  LayerParams one{Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1)};
  Eigen::VectorXd x(6), R(6);
  x << 1, 2, -3, 4, 5, 6;
  R << 0.1, 0.2, 0.3, -0.4, 0.5, 0.6;
  const Eigen::VectorXd r = lrp_epsilon_conv(x, id, one, R, 1e-5);
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(std::abs(r(i) - R(i)) <= 1e-5);
  CHECK(lrp_epsilon_conv(Eigen::VectorXd::Zero(6), id, one, R, 1e-5).isZero(0.0));
}

TEST_CASE("flat rule hand examples") {
  std::vector<std::vector<std::size_t>> one{{0, 1, 2, 3, 4, 5, 6, 7}};
  Eigen::VectorXd R8(1);
  R8 << 8;
  const Eigen::VectorXd a = lrp_flat(one, R8, 8);
  for (Eigen::Index i = 0; i < 8; ++i) CHECK(a(i) == 1.0);

  std::vector<std::vector<std::size_t>> two{{0, 1}, {1, 2}};
  Eigen::VectorXd R2(2);
  R2 << 2, 2;
  const Eigen::VectorXd b = lrp_flat(two, R2, 3);
  CHECK(b(0) == 1.0);
  CHECK(b(1) == 2.0);
  CHECK(b(2) == 1.0);
}

TEST_CASE("flat rule over a conv layer conserves exactly") {
  Rng rng(6);
  const LayerSpec l = LayerSpec::conv1d(606, 1, 8, 2, 24);
  const Eigen::VectorXd R = oracle::random_vector(rng, static_cast<Eigen::Index>(l.out_dim));
  const Eigen::VectorXd r = lrp_flat_conv(l, R);
  CHECK(std::abs(r.sum() - R.sum()) <= 1e-12 * std::max(1.0, R.cwiseAbs().sum()));
}

TEST_CASE("linear SVM relevance and orientation") {
  const ModelParams p = linear_svm({1.0, -1.0}, 0.0);
  const std::vector<double> x{2.0, 1.0};
  const RelevanceMap pos = explain_trial(p, x, 1);
  CHECK(pos.values == std::vector<double>{2.0, -1.0});
  CHECK(pos.sum() == 1.0);
  CHECK(pos.start_relevance == 1.0);
  const RelevanceMap neg = explain_trial(p, x, 0);
  CHECK(neg.values == std::vector<double>{-2.0, 1.0});
  ModelParams untrained = p;
  untrained.trained = false;
  CHECK_THROWS_AS(explain_trial(untrained, x, 1), precondition_error);
}

TEST_CASE("zero-bias networks conserve relevance at ordinary scores") {
  Rng rng(10);
  for (ModelKind k : {ModelKind::mlp, ModelKind::cnn}) {
    const ModelParams p = trained(k, 20, true);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
      const auto x = to_std(oracle::random_vector(rng, static_cast<Eigen::Index>(p.input_dim())));
      const RelevanceMap m = explain_trial(p, x, 1);
      // The stabilizer absorbs on the order of eps, so the relative bound applies once the score dominates it.
      if (std::abs(m.start_relevance) < 0.05) continue;
      CHECK(std::abs(m.sum() - m.start_relevance) <= 1e-3 * std::abs(m.start_relevance) + 1e-6);
      CHECK(std::abs(m.sum() + m.total_absorbed() - m.start_relevance) <= 1e-9 * std::max(1.0, std::abs(m.start_relevance)));
      ++checked;
    }
    CHECK(checked >= 10);
  }
}

TEST_CASE("audit accounts for bias and stabilizer absorption") {
  Rng rng(12);
  const ModelParams p = trained(ModelKind::mlp, 21, false);
  const auto x = to_std(oracle::random_vector(rng, 40));
  const RelevanceMap m = explain_trial(p, x, 0);
  CHECK(m.total_bias_absorbed() != 0.0);
  CHECK(std::abs(m.sum() + m.total_absorbed() - m.start_relevance) <= 1e-9);
  for (const auto& a : m.audit)
    CHECK(std::abs(a.relevance_out - a.relevance_in - a.absorbed()) <= 1e-9 * std::max(1.0, std::abs(a.relevance_out)));
}

TEST_CASE("relevance is linear in the output relevance") {
  Rng rng(13);
  const ModelParams p = trained(ModelKind::cnn, 22, false);
  const auto x = to_std(oracle::random_vector(rng, kInputDim));
  Eigen::VectorXd top(2);
  top << 0.7, -0.3;
  const RelevanceMap a = propagate_relevance(p, x, top);
  const RelevanceMap b = propagate_relevance(p, x, 3.0 * top);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(b.values[i] == doctest::Approx(3.0 * a.values[i]).epsilon(1e-9).scale(1e-12));
  const RelevanceMap c = explain_trial(p, x, 1);
  const RelevanceMap d = explain_trial(p, x, 1);
  CHECK(c.values == d.values);
}

TEST_CASE("class average statistics") {
  std::vector<double> r(kInputDim, 0.0), s(kInputDim, 1.0);
  r[5] = 2.0;
  RelevanceMap m;
  m.values = r;
  m.target_class = 1;
  const std::vector<RelevanceMap> one{m};
  const std::vector<InputVector> sig{input_of(s)};
  const ClassRelevanceSummary a = class_average(one, sig);
  CHECK(a.mean_relevance == r);
  CHECK(a.std_relevance == std::vector<double>(kInputDim, 0.0));
  CHECK(a.n_trials == 1);

  RelevanceMap neg = m;
  for (double& v : neg.values) v = -v;
  const std::vector<RelevanceMap> pair{m, neg};
  const std::vector<InputVector> sig2{input_of(s), input_of(s)};
  const ClassRelevanceSummary b = class_average(pair, sig2);
  CHECK(b.mean_relevance[5] == 0.0);
  CHECK(b.std_relevance[5] == doctest::Approx(std::sqrt(8.0)));
  CHECK(b.mean_abs_relevance[5] == 2.0);

  std::vector<RelevanceMap> three(3, m);
  three[0].values[0] = 1.0;
  three[1].values[0] = 4.0;
  three[2].values[0] = -2.0;
  const std::vector<InputVector> sig3(3, input_of(s));
  CHECK(class_average(three, sig3).mean_relevance[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(class_average(std::vector<RelevanceMap>{}, std::vector<InputVector>{}), precondition_error);
}

TEST_CASE("total relevance curve") {
  ClassRelevanceSummary a, b;
  a.mean_relevance = {0.3, 0.0, -1.0};
  b.mean_relevance = {-0.2, 0.0, 1.0};
  a.mean_abs_relevance = {0.5, 0.1, 1.0};
  b.mean_abs_relevance = {0.4, 0.2, 1.0};
  const auto t = total_relevance(a, b);
  CHECK(t[0] == doctest::Approx(0.5));
  CHECK(t[1] == 0.0);
  CHECK(t[2] == 2.0);
  const auto u = total_relevance(a, b, TotalRelevanceMode::mean_of_abs);
  CHECK(u[0] == doctest::Approx(0.9));
  CHECK(u[1] == doctest::Approx(0.3));
}

TEST_CASE("binary linear model gives twice the class mean when class sets coincide") {
  Rng rng(14);
  std::vector<double> w(kInputDim);
  for (double& v : w) v = rng.normal();
  const ModelParams p = linear_svm(w, 0.1);
  std::vector<RelevanceMap> ma, mb;
  std::vector<InputVector> sig;
  for (int k = 0; k < 5; ++k) {
    std::vector<double> x(kInputDim);
    for (double& v : x) v = rng.normal();
    ma.push_back(explain_trial(p, x, 0));
    mb.push_back(explain_trial(p, x, 1));
    sig.push_back(input_of(x));
  }
  const auto A = class_average(ma, sig), B = class_average(mb, sig);
  const auto t = total_relevance(A, B);
  for (std::size_t i = 0; i < kInputDim; ++i) CHECK(t[i] == doctest::Approx(2.0 * std::abs(A.mean_relevance[i])));
}
