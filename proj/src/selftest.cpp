#include "gaitxai/selftest.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gaitxai/cv.hpp"
#include "gaitxai/lrp.hpp"
#include "gaitxai/models.hpp"
#include "gaitxai/pipeline.hpp"
#include "gaitxai/report.hpp"
#include "gaitxai/spm.hpp"
#include "gaitxai/svm.hpp"
#include "gaitxai/synth.hpp"

namespace gaitxai {

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

std::string g(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string pct(double v) { return format_1dp(v); }

Eigen::VectorXd random_vector(Rng& rng, std::size_t n, double sd = 1.0) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = sd * rng.normal();
  return v;
}

std::span<const double> as_span(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

// ---- 1 ---------------------------------------------------------------------

Outcome cnn_shape(const SelftestOptions& opt) {
  const auto arch = cnn_arch(2);
  validate_arch(arch);
  std::vector<std::size_t> lens, chans;
  std::size_t flat = 0;
  for (const auto& l : arch) {
    if (l.kind == LayerKind::conv1d) {
      lens.push_back(l.out_len);
      chans.push_back(l.out_channels);
    }
    if (l.kind == LayerKind::flatten) flat = l.out_dim;
  }
  Rng rng(derive_seed(opt.seed, {hash_string("cnn-shape")}));
  const ModelParams p = init_params(ModelKind::cnn, arch, 2, rng);
  const Eigen::VectorXd x = random_vector(rng, kInputDim);
  const ForwardResult fr = forward(p, as_span(x));
  bool trace_ok = fr.trace.size() == arch.size();
  for (std::size_t i = 0; trace_ok && i < arch.size(); ++i)
    trace_ok = static_cast<std::size_t>(fr.trace.outputs[i].rows()) == arch[i].out_dim;

  const bool ok = lens == std::vector<std::size_t>{300, 147, 48} && chans == std::vector<std::size_t>{24, 24, 48} &&
                  flat == 2304 && trace_ok && fr.output.size() == 2;
  std::string d = "conv lengths";
  for (auto v : lens) d += " " + std::to_string(v);
  d += ", channels";
  for (auto v : chans) d += " " + std::to_string(v);
  d += ", flatten " + std::to_string(flat);
  if (!trace_ok) d += ", trace shapes disagree with the architecture";
  return {ok, d};
}

// ---- 2 ---------------------------------------------------------------------

TrainingSet synthetic_training_set(std::uint64_t seed, Normalization norm) {
  Rng rng(seed);
  const Dataset d = synth_generate(default_two_class_spec(), rng);
  const auto inputs = prepare_inputs(d, norm, false);
  const Task task = make_task(TaskId::HC_K);
  TrainingSet ts;
  ts.n_classes = 2;
  ts.X.resize(static_cast<Eigen::Index>(kInputDim), static_cast<Eigen::Index>(inputs.size()));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ts.X.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(inputs[i].values.data(), kInputDim);
    ts.labels.push_back(*task.class_of(d.trials[i].class_label));
  }
  return ts;
}

Outcome lrp_conservation(const SelftestOptions& opt) {
  Rng rng(derive_seed(opt.seed, {hash_string("lrp-conservation")}));
  LrpOptions lo;
  lo.epsilon = opt.epsilon;
  const TrainingSet ts = synthetic_training_set(derive_seed(opt.seed, {hash_string("lrp-conservation-data")}),
                                                Normalization::minmax);
  std::string detail;
  bool ok = true;
  for (ModelKind kind : {ModelKind::mlp, ModelKind::cnn}) {
    const auto arch = kind == ModelKind::mlp ? mlp_arch(2) : cnn_arch(2);
    ModelParams p = init_params(kind, arch, 2, rng);
    for (auto& l : p.layers) l.b.setZero();
    p.trained = true;
    double worst = 0.0, worst_absorbed = 0.0, largest_failing = 0.0;
    int failing = 0;
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd x = random_vector(rng, kInputDim);
      const std::size_t target = static_cast<std::size_t>(k % 2);
      const RelevanceMap m = explain_trial(p, as_span(x), target, lo);
      const double score = forward(p, as_span(x)).scores(static_cast<Eigen::Index>(target));
      const double gap = std::abs(m.sum() - score);
      const double ratio = gap / (1e-3 * std::abs(score) + 1e-6);
      worst = std::max(worst, ratio);
      worst_absorbed = std::max(worst_absorbed, std::abs(score - m.sum() - m.total_absorbed()));
      if (ratio > 1.0) {
        ++failing;
        largest_failing = std::max(largest_failing, std::abs(score));
      }
    }

    ModelParams t = sgd_train(init_params(kind, arch, 2, rng), ts, TrainSchedule::scaled(300), rng);
    double max_bias = 0.0;
    for (const auto& l : t.layers)
      if (l.b.size() > 0) max_bias = std::max(max_bias, l.b.cwiseAbs().maxCoeff());
    double worst_total = 0.0, worst_bias_only = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd x = ts.X.col(k % ts.X.cols());
      const std::size_t target = static_cast<std::size_t>(k % 2);
      const RelevanceMap m = explain_trial(t, as_span(x), target, lo);
      const double gap = m.start_relevance - m.sum();
      worst_total = std::max(worst_total, std::abs(gap - m.total_absorbed()));
      worst_bias_only = std::max(worst_bias_only, std::abs(gap - m.total_bias_absorbed()));
    }
    const bool kind_ok = worst <= 1.0 && worst_total <= 1e-6 && max_bias > 0.0;
    ok = ok && kind_ok;
    detail += std::string(detail.empty() ? "" : "; ") + std::string(to_string(kind)) + ": zero-bias worst gap/tol " +
              g(worst, 3) + " (" + std::to_string(failing) + "/100 over the bound";
    if (failing) detail += ", all with |score| <= " + g(largest_failing, 2);
    detail += ", |gap - stabilizer absorbed| " + g(worst_absorbed, 2) + "), trained |gap - absorbed| " +
              g(worst_total, 3) + " (bias part alone " + g(worst_bias_only, 3) + ")";
  }
  return {ok, detail};
}

// ---- 3 ---------------------------------------------------------------------

struct GradStats {
  std::size_t n = 0, ok = 0;
  double worst = 0.0;
  void add(double analytic, double numeric) {
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    ++n;
    ok += rel <= 1e-4;
    worst = std::max(worst, rel);
  }
  double fraction() const { return n ? static_cast<double>(ok) / static_cast<double>(n) : 0.0; }
};

GradStats network_gradients(ModelKind kind, Rng& rng) {
  constexpr double h = 1e-5;
  const auto arch = kind == ModelKind::mlp ? mlp_arch(2) : cnn_arch(2);
  GradStats st;
  std::size_t points = 0;
  for (int attempt = 0; attempt < 400 && points < 8; ++attempt) {
    ModelParams p = init_params(kind, arch, 2, rng);
    for (auto& l : p.layers)
      for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = 0.1 * rng.normal();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(kInputDim), 2);
    for (Eigen::Index c = 0; c < 2; ++c) X.col(c) = random_vector(rng, kInputDim);
    const std::vector<std::size_t> labels{rng.index(2), rng.index(2)};
    if (!is_smooth_point(p, X, labels, 1e-4)) continue;
    ++points;
    const auto grads = l1_gradients(p, X, labels);
    std::vector<std::size_t> param_layers;
    for (std::size_t l = 0; l < p.layers.size(); ++l)
      if (p.layers[l].W.size() > 0) param_layers.push_back(l);
    for (int c = 0; c < 12; ++c) {
      const std::size_t l = param_layers[rng.index(param_layers.size())];
      auto& lp = p.layers[l];
      double* slot = nullptr;
      double analytic = 0.0;
      if (rng.uniform() < 0.25) {
        const auto i = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(lp.b.size())));
        slot = &lp.b(i);
        analytic = grads[l].b(i);
      } else {
        const auto r = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(lp.W.rows())));
        const auto cc = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(lp.W.cols())));
        slot = &lp.W(r, cc);
        analytic = grads[l].W(r, cc);
      }
      const double saved = *slot;
      *slot = saved + h;
      const double up = l1_loss(p, X, labels);
      *slot = saved - h;
      const double down = l1_loss(p, X, labels);
      *slot = saved;
      st.add(analytic, (up - down) / (2.0 * h));
    }
  }
  return st;
}

GradStats svm_gradients(Rng& rng) {
  constexpr double h = 1e-5, C = 0.1;
  GradStats st;
  std::size_t points = 0;
  for (int attempt = 0; attempt < 200 && points < 10; ++attempt) {
    const std::size_t n = 20;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(kInputDim), static_cast<Eigen::Index>(n));
    for (Eigen::Index c = 0; c < X.cols(); ++c) X.col(c) = random_vector(rng, kInputDim);
    std::vector<int> y(n);
    for (auto& v : y) v = rng.coin() ? 1 : -1;
    Eigen::VectorXd w = random_vector(rng, kInputDim, 0.05);
    double b = rng.normal();
    const Eigen::VectorXd f = (X.transpose() * w).array() + b;
    bool smooth = true;
    for (std::size_t i = 0; i < n; ++i) smooth = smooth && std::abs(1.0 - y[i] * f(static_cast<Eigen::Index>(i))) >= 1e-3;
    if (!smooth) continue;
    ++points;
    Eigen::VectorXd gw;
    double gb = 0.0;
    svm_primal_gradient(w, b, X, y, C, gw, gb);
    for (int c = 0; c < 20; ++c) {
      if (c == 0) {
        const double up = svm_primal_objective(w, b + h, X, y, C);
        const double down = svm_primal_objective(w, b - h, X, y, C);
        st.add(gb, (up - down) / (2.0 * h));
        continue;
      }
      const auto k = static_cast<Eigen::Index>(rng.index(kInputDim));
      const double saved = w(k);
      w(k) = saved + h;
      const double up = svm_primal_objective(w, b, X, y, C);
      w(k) = saved - h;
      const double down = svm_primal_objective(w, b, X, y, C);
      w(k) = saved;
      st.add(gw(k), (up - down) / (2.0 * h));
    }
  }
  return st;
}

Outcome gradient_check(const SelftestOptions& opt) {
  Rng rng(derive_seed(opt.seed, {hash_string("gradient-check")}));
  const std::pair<std::string, GradStats> runs[] = {{"svm", svm_gradients(rng)},
                                                    {"mlp", network_gradients(ModelKind::mlp, rng)},
                                                    {"cnn", network_gradients(ModelKind::cnn, rng)}};
  bool ok = true;
  std::string d;
  for (const auto& [name, st] : runs) {
    ok = ok && st.n >= 40 && st.fraction() >= 0.95;
    d += std::string(d.empty() ? "" : "; ") + name + " " + std::to_string(st.ok) + "/" + std::to_string(st.n) +
         " within 1e-4 (worst " + g(st.worst, 2) + ")";
  }
  return {ok, d};
}

// ---- 4 ---------------------------------------------------------------------

Outcome conv_lrp_equivalence(const SelftestOptions& opt) {
  Rng rng(derive_seed(opt.seed, {hash_string("conv-lrp")}));
  double worst = 0.0, worst_rel = 0.0;
  for (int k = 0; k < 50; ++k) {
    const std::size_t cin = 1 + rng.index(3), len = 8 + rng.index(13), filter = 1 + rng.index(4),
                      stride = 1 + rng.index(3), cout = 1 + rng.index(4);
    const LayerSpec layer = LayerSpec::conv1d(len, cin, filter, stride, cout);
    LayerParams lp;
    lp.W.resize(static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(cin * filter));
    for (Eigen::Index i = 0; i < lp.W.size(); ++i) lp.W.data()[i] = rng.normal();
    lp.b = random_vector(rng, cout, 0.3);
    const Eigen::VectorXd x = random_vector(rng, cin * len);
    const Eigen::VectorXd R = random_vector(rng, cout * layer.out_len);

    // Dense unrolling: row o*T + t, column c*L + t*stride + f.
    const std::size_t T = layer.out_len;
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cout * T), static_cast<Eigen::Index>(cin * len));
    Eigen::VectorXd b(static_cast<Eigen::Index>(cout * T));
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t t = 0; t < T; ++t) {
        b(static_cast<Eigen::Index>(o * T + t)) = lp.b(static_cast<Eigen::Index>(o));
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t f = 0; f < filter; ++f)
            W(static_cast<Eigen::Index>(o * T + t), static_cast<Eigen::Index>(c * len + t * stride + f)) =
                lp.W(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(c * filter + f));
      }
    const Eigen::VectorXd a = lrp_epsilon_conv(x, layer, lp, R, opt.epsilon);
    const Eigen::VectorXd e = lrp_epsilon_dense(x, W, b, R, opt.epsilon);
    // Relevance grows like 1/z at small pre-activations, so the tolerance
    // scales with the largest magnitude of the instance.
    const double diff = (a - e).cwiseAbs().maxCoeff();
    worst = std::max(worst, diff);
    worst_rel = std::max(worst_rel, diff / std::max(1.0, e.cwiseAbs().maxCoeff()));
  }
  return {worst_rel <= 1e-12, "max |conv - dense| / max(1, max|R|) over 50 instances " + g(worst_rel, 3) +
                                  " (absolute " + g(worst, 3) + ")"};
}

// ---- 5 ---------------------------------------------------------------------

double pooled_t_oracle(const std::vector<double>& a, const std::vector<double>& b) {
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const double ma = mean(a), mb = mean(b);
  double ss = 0.0;
  for (double x : a) ss += (x - ma) * (x - ma);
  for (double x : b) ss += (x - mb) * (x - mb);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sp2 = ss / (na + nb - 2.0);
  return (ma - mb) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
}

Outcome t_field_oracle(const SelftestOptions& opt) {
  std::string d;
  bool ok = true;
  {
    Eigen::MatrixXd A(2, kNodes), B(2, kNodes);
    A.row(0).setConstant(2.0);
    A.row(1).setConstant(4.0);
    B.row(0).setConstant(1.0);
    B.row(1).setConstant(3.0);
    const TField tf = two_sample_t_field(A, B);
    double err = 0.0;
    for (double t : tf.t) err = std::max(err, std::abs(t - 1.0 / std::sqrt(2.0)));
    const TField same = two_sample_t_field(A, A);
    double zero = 0.0;
    for (double t : same.t) zero = std::max(zero, std::abs(t));
    ok = err <= 1e-10 && tf.df == 2 && zero == 0.0;
    d = "hand example error " + g(err, 2) + ", identical groups max|t| " + g(zero, 2);
  }
  Rng rng(derive_seed(opt.seed, {hash_string("t-field")}));
  double e_oracle = 0.0, e_anti = 0.0, e_shift = 0.0, e_scale = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t na = 2 + rng.index(9), nb = 2 + rng.index(9), q = 5 + rng.index(97);
    Eigen::MatrixXd A(static_cast<Eigen::Index>(na), static_cast<Eigen::Index>(q)),
        B(static_cast<Eigen::Index>(nb), static_cast<Eigen::Index>(q));
    const double offset = 3.0 * rng.normal();
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = rng.normal() + offset;
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = 0.7 * rng.normal();
    const TField tab = two_sample_t_field(A, B);
    const TField tba = two_sample_t_field(B, A);
    const double c = 100.0 * (rng.uniform() - 0.5);
    const TField tsh = two_sample_t_field(A.array() + c, B.array() + c);
    double s = 0.1 + 10.0 * rng.uniform();
    if (rng.coin()) s = -s;
    const TField tsc = two_sample_t_field(A * s, B * s);
    for (std::size_t j = 0; j < q; ++j) {
      std::vector<double> a(na), b(nb);
      for (std::size_t i = 0; i < na; ++i) a[i] = A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < nb; ++i) b[i] = B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      const double t = tab.t[j], scale = std::max(1.0, std::abs(t));
      e_oracle = std::max(e_oracle, std::abs(t - pooled_t_oracle(a, b)) / scale);
      e_anti = std::max(e_anti, std::abs(t + tba.t[j]) / scale);
      e_shift = std::max(e_shift, std::abs(t - tsh.t[j]) / scale);
      e_scale = std::max(e_scale, std::abs(t - (s > 0 ? 1.0 : -1.0) * tsc.t[j]) / scale);
    }
  }
  ok = ok && e_oracle <= 1e-10 && e_anti <= 1e-10 && e_shift <= 1e-10 && e_scale <= 1e-10;
  d += "; 1000 random instances: oracle " + g(e_oracle, 2) + ", antisymmetry " + g(e_anti, 2) + ", shift " +
       g(e_shift, 2) + ", scale " + g(e_scale, 2);
  return {ok, d};
}

// ---- 6 ---------------------------------------------------------------------

Outcome rft_vs_permutation(const SelftestOptions& opt) {
  const std::size_t n = 15, datasets = 2000, oracle_sets = 10;
  const double alpha = 0.05;
  bool ok = true;
  std::string d;
  for (const double fwhm : {10.0, 20.0}) {
    Rng rng(derive_seed(opt.seed, {hash_string("rft"), static_cast<std::uint64_t>(fwhm)}));
    std::size_t false_pos = 0, perm_false_pos = 0;
    double rft_sum = 0.0, perm_sum = 0.0;
    const std::vector<double> alphas{alpha};
    for (std::size_t k = 0; k < datasets; ++k) {
      Eigen::MatrixXd A(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kNodes)),
          B(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kNodes));
      for (Eigen::MatrixXd* M : {&A, &B})
        for (Eigen::Index r = 0; r < M->rows(); ++r) {
          const auto v = smooth_gaussian_noise(rng, kNodes, fwhm);
          for (std::size_t q = 0; q < kNodes; ++q) (*M)(r, static_cast<Eigen::Index>(q)) = v[q];
        }
      const SpmResult s = spm_two_sample(A, B, alphas, true);
      false_pos += !s.levels[0].intervals.empty();
      if (k < oracle_sets) {
        const PermutationResult pr = permutation_maxt(A, B, opt.permutations, rng.next_u64(), opt.jobs);
        const double u = pr.threshold(alpha);
        rft_sum += s.levels[0].threshold;
        perm_sum += u;
        double maxt = 0.0;
        for (double t : s.tfield.t) maxt = std::max(maxt, std::abs(t));
        perm_false_pos += maxt >= u;
      }
    }
    const double fwer = static_cast<double>(false_pos) / static_cast<double>(datasets);
    ok = ok && fwer >= 0.025 && fwer <= 0.10;
    d += std::string(d.empty() ? "" : "; ") + "FWHM " + g(fwhm, 3) + ": FWER " + g(fwer, 3) + ", mean t* RFT " +
         g(rft_sum / oracle_sets, 4) + " vs permutation " + g(perm_sum / oracle_sets, 4);
  }
  return {ok, d};
}

// ---- 7 ---------------------------------------------------------------------

Outcome zero_rule_exact(const SelftestOptions&) {
  const std::map<ClassLabel, std::size_t> counts{
      {ClassLabel::HC, 310}, {ClassLabel::H, 185}, {ClassLabel::K, 260}, {ClassLabel::A, 215}};
  const std::vector<std::string> expected{"68.0", "62.6", "54.4", "59.0", "39.4", "32.0"};
  bool ok = true;
  std::string d;
  const auto ids = all_task_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string got = format_1dp(zero_rule_from_counts(make_task(ids[i]), counts));
    ok = ok && got == expected[i];
    d += std::string(d.empty() ? "" : " ") + std::string(to_string(ids[i])) + "=" + got;
  }
  return {ok, d};
}

// ---- 8 / 9 -----------------------------------------------------------------

constexpr std::size_t kRegionSlot = 2;  // affected V
constexpr std::size_t kRegionStart = 40, kRegionEnd = 60, kRegionMargin = 10;

struct SyntheticState {
  bool ready = false;
  Dataset data;
  std::map<ModelKind, TaskResult> baseline;
};

CvConfig reduced_cv(const SelftestOptions& opt, bool explain) {
  CvConfig c;
  c.k = 10;
  c.root_seed = opt.seed;
  c.schedule = TrainSchedule::scaled(3000);
  c.lrp.epsilon = opt.epsilon;
  c.explain = explain;
  c.jobs = opt.jobs;
  return c;
}

Dataset vertical_dataset(const SelftestOptions& opt) {
  Rng rng(derive_seed(opt.seed, {hash_string("synthetic-vertical")}));
  return synth_generate(default_two_class_spec(), rng);
}

double concentration(const std::vector<double>& total) {
  const std::size_t lo = input_index(kRegionSlot, kRegionStart - kRegionMargin);
  const std::size_t hi = input_index(kRegionSlot, kRegionEnd + kRegionMargin);
  double in = 0.0, all = 0.0;
  for (std::size_t i = 0; i < total.size(); ++i) {
    all += total[i];
    if (i >= lo && i <= hi) in += total[i];
  }
  return all > 0.0 ? in / all : 0.0;
}

Outcome synthetic_end_to_end(const SelftestOptions& opt, SyntheticState& state) {
  state.data = vertical_dataset(opt);
  const Task task = make_task(TaskId::HC_K);
  const auto inputs = prepare_inputs(state.data, Normalization::minmax, false);
  const std::vector<double> alphas{0.05};
  const auto spm = task_spm(inputs, state.data, task, alphas);
  bool overlap = false;
  std::string bands;
  for (const Interval& iv : spm[kRegionSlot].levels[0].intervals) {
    overlap = overlap || (iv.start <= kRegionEnd && iv.end >= kRegionStart);
    bands += (bands.empty() ? "" : ",") + std::string("[") + std::to_string(iv.start) + "," + std::to_string(iv.end) + "]";
  }
  bool ok = overlap;
  std::string d = "band at alpha 0.05 " + (bands.empty() ? std::string("none") : bands);
  const CvConfig cc = reduced_cv(opt, true);
  for (ModelKind m : {ModelKind::svm, ModelKind::mlp, ModelKind::cnn}) {
    TaskResult r = run_task(state.data, task, m, Normalization::minmax, false, cc);
    const auto sums = cell_summaries(r, task, inputs, state.data);
    const double conc = concentration(total_relevance(sums[0], sums[1]));
    ok = ok && r.mean >= 95.0 && conc >= 0.70;
    d += "; " + std::string(to_string(m)) + " accuracy " + pct(r.mean) + ", relevance in region " + g(conc, 3);
    for (auto& f : r.folds) f.relevance.clear();
    state.baseline[m] = std::move(r);
  }
  state.ready = true;
  return {ok, d};
}

Outcome synthetic_occlusion(const SelftestOptions& opt, SyntheticState& state) {
  const Task task = make_task(TaskId::HC_K);
  const CvConfig cc = reduced_cv(opt, false);
  if (!state.ready) {
    state.data = vertical_dataset(opt);
    for (ModelKind m : {ModelKind::svm, ModelKind::mlp, ModelKind::cnn})
      state.baseline[m] = run_task(state.data, task, m, Normalization::minmax, false, cc);
    state.ready = true;
  }
  bool ok = true;
  std::string d = "vertical only:";
  for (ModelKind m : {ModelKind::svm, ModelKind::mlp, ModelKind::cnn}) {
    const TaskResult o = run_task(state.data, task, m, Normalization::minmax, true, cc);
    const double delta = occlusion_delta(o, state.baseline.at(m));
    ok = ok && std::abs(delta) <= 1.0;
    d += " " + std::string(to_string(m)) + " " + pct(delta);
  }

  SynthSpec spec = default_two_class_spec();
  spec.classes = {{ClassLabel::HC, 100, 10, 1.0}, {ClassLabel::K, 100, 10, 1.0}};
  spec.perturbations = {{ClassLabel::K, slot_of(Side::affected, Component::AP), kRegionStart, kRegionEnd, 4.0,
                         SynthPerturbation::Shape::box}};
  Rng rng(derive_seed(opt.seed, {hash_string("synthetic-horizontal")}));
  const Dataset horiz = synth_generate(spec, rng);
  const TaskResult base_svm = run_task(horiz, task, ModelKind::svm, Normalization::minmax, false, cc);
  d += "; horizontal only (svm baseline " + pct(base_svm.mean) + "):";
  for (ModelKind m : {ModelKind::svm, ModelKind::mlp, ModelKind::cnn}) {
    const TaskResult o = run_task(horiz, task, m, Normalization::minmax, true, cc);
    ok = ok && std::abs(o.mean - o.zrb) <= 3.0;
    d += " " + std::string(to_string(m)) + " " + pct(o.mean) + " vs ZRB " + pct(o.zrb);
  }
  return {ok, d};
}

// ---- 10 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const SelftestOptions& opt, const fs::path& work) {
  RunConfig cfg;
  cfg.tasks = {TaskId::HC_K};
  cfg.norms = {Normalization::minmax};
  cfg.seed = opt.seed;
  cfg.iterations = 300;
  cfg.permutations = 200;
  cfg.epsilon = opt.epsilon;
  cfg.jobs = opt.jobs;
  std::vector<fs::path> dirs{work / "determinism_a", work / "determinism_b"};
  for (const auto& dir : dirs) {
    fs::remove_all(dir);
    cfg.out_dir = dir.string();
    cmd_run(cfg);
  }
  std::vector<std::string> files{"manifest.json", "ledger/results.json"};
  for (const auto& e : fs::recursive_directory_iterator(dirs[0]))
    if (e.is_regular_file() && e.path().extension() == ".svg")
      files.push_back(fs::relative(e.path(), dirs[0]).generic_string());
  std::sort(files.begin() + 2, files.end());
  std::size_t same = 0;
  std::string diff;
  for (const auto& f : files) {
    const bool eq = fs::exists(dirs[1] / f) && slurp(dirs[0] / f) == slurp(dirs[1] / f);
    same += eq;
    if (!eq) diff += " " + f;
  }
  for (const auto& dir : dirs) fs::remove_all(dir);
  const bool ok = same == files.size() && files.size() > 3;
  return {ok, std::to_string(same) + "/" + std::to_string(files.size()) +
                  " files byte-identical (manifest, ledger, svgs)" + (diff.empty() ? "" : "; differing:" + diff)};
}

// ---- 11 / 12 ---------------------------------------------------------------

Dataset clinical_dataset(const SelftestOptions& opt) {
  RunConfig cfg;
  cfg.data_path = opt.gaitrec_csv;
  cfg.schema_path = opt.gaitrec_schema;
  cfg.seed = opt.seed;
  return load_dataset(cfg);
}

CvConfig full_cv(const SelftestOptions& opt, bool explain) {
  CvConfig c;
  c.root_seed = opt.seed;
  c.lrp.epsilon = opt.epsilon;
  c.explain = explain;
  c.jobs = opt.jobs;
  return c;
}

Outcome clinical_accuracy(const SelftestOptions& opt) {
  const Dataset d = clinical_dataset(opt);
  const TaskResult gd = run_task(d, make_task(TaskId::HC_GD), ModelKind::svm, Normalization::minmax, false,
                                 full_cv(opt, false));
  bool ok = std::abs(gd.mean - 88.4) <= 5.0;
  std::string det = "HC_GD svm minmax " + pct(gd.mean);
  for (TaskId t : {TaskId::HC_H, TaskId::HC_K}) {
    for (ModelKind m : {ModelKind::svm, ModelKind::mlp, ModelKind::cnn}) {
      const Task task = make_task(t);
      const TaskResult b = run_task(d, task, m, Normalization::minmax, false, full_cv(opt, false));
      const TaskResult o = run_task(d, task, m, Normalization::minmax, true, full_cv(opt, false));
      const double delta = occlusion_delta(o, b);
      ok = ok && delta < 0.0;
      det += "; " + std::string(to_string(t)) + " " + std::string(to_string(m)) + " delta " + pct(delta);
    }
  }
  return {ok, det};
}

Outcome clinical_correlation(const SelftestOptions& opt) {
  const Dataset d = clinical_dataset(opt);
  const Task task = make_task(TaskId::HC_GD);
  std::map<Normalization, double> r;
  const std::vector<double> alphas{0.05};
  for (Normalization n : {Normalization::minmax, Normalization::none}) {
    const auto inputs = prepare_inputs(d, n, false);
    const TaskResult res = run_task(d, task, ModelKind::cnn, n, false, full_cv(opt, true));
    const auto sums = cell_summaries(res, task, inputs, d);
    const auto total = total_relevance(sums[0], sums[1]);
    std::vector<double> effect;
    for (const auto& s : task_spm(inputs, d, task, alphas)) effect.insert(effect.end(), s.effect_size.begin(), s.effect_size.end());
    r[n] = pearson_corr(effect, total);
  }
  const bool ok = r[Normalization::minmax] > 0.0 && r[Normalization::minmax] > r[Normalization::none];
  return {ok, "r minmax " + g(r[Normalization::minmax], 3) + ", r none " + g(r[Normalization::none], 3)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = unbounded
};

constexpr Criterion kCriteria[] = {
    {1, "cnn-shape", 1.0},           {2, "lrp-conservation", 10.0},     {3, "gradient-check", 60.0},
    {4, "conv-lrp-equivalence", 10.0}, {5, "t-field-oracle", 10.0},       {6, "rft-vs-permutation", 1800.0},
    {7, "zero-rule-baseline", 1.0},  {8, "synthetic-end-to-end", 300.0}, {9, "synthetic-occlusion", 300.0},
    {10, "determinism", 600.0},      {11, "clinical-accuracy", 0.0},    {12, "clinical-effect-correlation", 0.0},
};

}  // namespace

std::string_view to_string(CriterionStatus s) {
  switch (s) {
    case CriterionStatus::pass: return "PASS";
    case CriterionStatus::fail: return "FAIL";
    case CriterionStatus::skip: return "SKIP";
  }
  return "?";
}

std::string format_result(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "%s %2d %-28s (%.1f s)", std::string(to_string(r.status)).c_str(), r.id,
                r.name.c_str(), r.seconds);
  return std::string(head) + "  " + r.detail;
}

std::vector<CriterionResult> run_selftest(const SelftestOptions& opt) {
  fs::path work = opt.work_dir.empty()
                      ? fs::temp_directory_path() / ("gaitxai-selftest-" + std::to_string(::getpid()))
                      : fs::path(opt.work_dir);
  SyntheticState synthetic;
  std::vector<CriterionResult> out;
  for (const Criterion& c : kCriteria) {
    if (!opt.only.empty() && !opt.only.count(c.id)) continue;
    CriterionResult r;
    r.id = c.id;
    r.name = c.name;
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<std::string> skip;
    if (c.id == 6 && !opt.slow) skip = "slow check; enable with --slow";
    if (c.id == 6 && opt.permutations == 0) skip = "no permutation oracle budget (--permutations 0)";
    if ((c.id == 11 || c.id == 12) && !opt.gaitrec_csv) skip = "no clinical dataset configured (GAITXAI_GAITREC_CSV)";
    if (skip) {
      r.status = CriterionStatus::skip;
      r.detail = *skip;
    } else {
      try {
        Outcome o;
        switch (c.id) {
          case 1: o = cnn_shape(opt); break;
          case 2: o = lrp_conservation(opt); break;
          case 3: o = gradient_check(opt); break;
          case 4: o = conv_lrp_equivalence(opt); break;
          case 5: o = t_field_oracle(opt); break;
          case 6: o = rft_vs_permutation(opt); break;
          case 7: o = zero_rule_exact(opt); break;
          case 8: o = synthetic_end_to_end(opt, synthetic); break;
          case 9: o = synthetic_occlusion(opt, synthetic); break;
          case 10:
            fs::create_directories(work);
            o = determinism(opt, work);
            break;
          case 11: o = clinical_accuracy(opt); break;
          case 12: o = clinical_correlation(opt); break;
        }
        r.status = o.ok ? CriterionStatus::pass : CriterionStatus::fail;
        r.detail = o.detail;
      } catch (const std::exception& e) {
        r.status = CriterionStatus::fail;
        r.detail = std::string("error: ") + e.what();
      }
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.status == CriterionStatus::pass && c.budget_s > 0.0 && r.seconds > c.budget_s) {
      r.status = CriterionStatus::fail;
      r.detail += "; exceeded time budget of " + g(c.budget_s, 4) + " s";
    }
    if (opt.on_result) opt.on_result(r);
    out.push_back(std::move(r));
  }
  if (opt.work_dir.empty()) {
    std::error_code ec;
    fs::remove_all(work, ec);
  }
  return out;
}

}  // namespace gaitxai
