#include "gaitxai/lrp.hpp"

#include <cmath>

namespace gaitxai {

double RelevanceMap::sum() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

double RelevanceMap::total_absorbed() const {
  double s = 0.0;
  for (const auto& a : audit) s += a.absorbed();
  return s;
}

double RelevanceMap::total_bias_absorbed() const {
  double s = 0.0;
  for (const auto& a : audit) s += a.bias_absorbed;
  return s;
}

namespace {

void require_epsilon(double eps) {
  if (!(eps > 0.0)) throw precondition_error("LRP epsilon must be positive, got " + std::to_string(eps));
}

double stab_sign(double z) { return z >= 0.0 ? 1.0 : -1.0; }

// Shared tail of both eps-rules: returns R/zs and fills the audit.
Eigen::VectorXd scaled_relevance(const Eigen::VectorXd& z, const Eigen::VectorXd& b_per_output,
                                 const Eigen::VectorXd& R_out, double eps, LayerAudit* audit) {
  Eigen::VectorXd s(z.size());
  double bias = 0.0, stab = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    const double e = eps * stab_sign(z(j));
    const double zs = z(j) + e;
    s(j) = R_out(j) / zs;
    bias += s(j) * b_per_output(j);
    stab += s(j) * e;
  }
  if (audit) {
    audit->relevance_out = R_out.sum();
    audit->bias_absorbed = bias;
    audit->stabilizer_absorbed = stab;
    audit->rule = "epsilon";
  }
  return s;
}

// Spreads patch-space values back onto the channel-major input vector.
Eigen::VectorXd col2im(const Eigen::MatrixXd& patches, const LayerSpec& l) {
  const auto C = static_cast<Eigen::Index>(l.in_channels), L = static_cast<Eigen::Index>(l.in_len);
  const auto F = static_cast<Eigen::Index>(l.filter_size), T = static_cast<Eigen::Index>(l.out_len);
  const auto S = static_cast<Eigen::Index>(l.stride);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(C * L);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < C; ++i)
      for (Eigen::Index k = 0; k < F; ++k) out(i * L + t * S + k) += patches(i * F + k, t);
  return out;
}

}  // namespace

Eigen::VectorXd lrp_epsilon_dense(const Eigen::VectorXd& x, const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                                  const Eigen::VectorXd& R_out, double eps, LayerAudit* audit) {
  require_epsilon(eps);
  if (W.cols() != x.size() || W.rows() != R_out.size() || b.size() != W.rows())
    throw shape_error("lrp_epsilon_dense: inconsistent dimensions");
  const Eigen::VectorXd z = W * x + b;
  const Eigen::VectorXd s = scaled_relevance(z, b, R_out, eps, audit);
  Eigen::VectorXd R_in = x.cwiseProduct(W.transpose() * s);
  if (audit) audit->relevance_in = R_in.sum();
  return R_in;
}

Eigen::VectorXd lrp_epsilon_conv(const Eigen::VectorXd& x, const LayerSpec& l, const LayerParams& lp,
                                 const Eigen::VectorXd& R_out, double eps, LayerAudit* audit) {
  require_epsilon(eps);
  if (static_cast<std::size_t>(x.size()) != l.in_dim || static_cast<std::size_t>(R_out.size()) != l.out_dim)
    throw shape_error("lrp_epsilon_conv: inconsistent dimensions");
  const auto O = static_cast<Eigen::Index>(l.out_channels), T = static_cast<Eigen::Index>(l.out_len);
  const Eigen::MatrixXd P = im2col({x.data(), static_cast<std::size_t>(x.size())}, l);
  Eigen::MatrixXd Z = lp.W * P;
  Z.colwise() += lp.b;
  // Row-major (O x T) views keep the channel-major output ordering.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Zr = Z;
  const Eigen::Map<const Eigen::VectorXd> z(Zr.data(), O * T);
  Eigen::VectorXd bias_full(O * T);
  for (Eigen::Index o = 0; o < O; ++o) bias_full.segment(o * T, T).setConstant(lp.b(o));
  const Eigen::VectorXd s = scaled_relevance(z, bias_full, R_out, eps, audit);
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> Sr =
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(s.data(), O, T);
  const Eigen::MatrixXd dP = lp.W.transpose() * Sr;
  Eigen::VectorXd R_in = col2im(P.cwiseProduct(dP), l);
  if (audit) audit->relevance_in = R_in.sum();
  return R_in;
}

Eigen::VectorXd lrp_flat(std::span<const std::vector<std::size_t>> fields, const Eigen::VectorXd& R_out,
                         std::size_t n_inputs) {
  if (fields.size() != static_cast<std::size_t>(R_out.size())) throw shape_error("lrp_flat: one field per output");
  Eigen::VectorXd R_in = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_inputs));
  for (std::size_t j = 0; j < fields.size(); ++j) {
    if (fields[j].empty()) throw shape_error("lrp_flat: empty receptive field");
    const double share = R_out(static_cast<Eigen::Index>(j)) / static_cast<double>(fields[j].size());
    for (std::size_t i : fields[j]) {
      if (i >= n_inputs) throw shape_error("lrp_flat: field index out of range");
      R_in(static_cast<Eigen::Index>(i)) += share;
    }
  }
  return R_in;
}

Eigen::VectorXd lrp_flat_conv(const LayerSpec& l, const Eigen::VectorXd& R_out) {
  if (static_cast<std::size_t>(R_out.size()) != l.out_dim) throw shape_error("lrp_flat_conv: inconsistent dimensions");
  const auto O = static_cast<Eigen::Index>(l.out_channels), T = static_cast<Eigen::Index>(l.out_len);
  const auto CF = static_cast<Eigen::Index>(l.in_channels * l.filter_size);
  Eigen::MatrixXd patches(CF, T);
  for (Eigen::Index t = 0; t < T; ++t) {
    double col = 0.0;
    for (Eigen::Index o = 0; o < O; ++o) col += R_out(o * T + t);
    patches.col(t).setConstant(col / static_cast<double>(CF));
  }
  return col2im(patches, l);
}

RelevanceMap propagate_relevance(const ModelParams& p, std::span<const double> v, const Eigen::VectorXd& R_top,
                                 const LrpOptions& opt) {
  if (!p.trained) throw precondition_error("explain needs trained parameters");
  require_epsilon(opt.epsilon);
  const ForwardResult fr = forward(p, v);
  const std::size_t n_layers = p.arch.size();
  std::size_t top = p.has_softmax() ? n_layers - 1 : n_layers;  // relevance enters below the softmax
  if (R_top.size() != fr.scores.size()) throw shape_error("output relevance has the wrong length");

  RelevanceMap m;
  Eigen::VectorXd R = R_top;
  std::size_t first_param = n_layers;
  for (std::size_t i = 0; i < n_layers; ++i)
    if (p.arch[i].has_params()) {
      first_param = i;
      break;
    }
  for (std::size_t li = top; li-- > 0;) {
    const auto& l = p.arch[li];
    const Eigen::VectorXd x = fr.trace.inputs[li].col(0);
    LayerAudit a;
    a.layer = li;
    a.kind = l.kind;
    switch (l.kind) {
      case LayerKind::dense:
        R = lrp_epsilon_dense(x, p.layers[li].W, p.layers[li].b, R, opt.epsilon, &a);
        break;
      case LayerKind::conv1d:
        if (li == first_param && opt.flat_first_conv) {
          a.rule = "flat";
          a.relevance_out = R.sum();
          R = lrp_flat_conv(l, R);
          a.relevance_in = R.sum();
        } else {
          R = lrp_epsilon_conv(x, l, p.layers[li], R, opt.epsilon, &a);
        }
        break;
      case LayerKind::relu:
      case LayerKind::flatten:
      case LayerKind::softmax:
        a.rule = "pass";
        a.relevance_out = a.relevance_in = R.sum();
        break;
    }
    m.audit.push_back(a);
  }
  m.values.assign(R.data(), R.data() + R.size());
  return m;
}

RelevanceMap explain_trial(const ModelParams& p, std::span<const double> v, std::size_t target, const LrpOptions& opt) {
  if (!p.trained) throw precondition_error("explain needs trained parameters");
  if (target >= p.n_classes) throw precondition_error("target class out of range");
  if (v.size() != p.input_dim()) throw shape_error("explain: input has the wrong length");

  if (p.kind == ModelKind::svm) {
    const auto& lp = p.layers.at(0);
    Eigen::Index row = static_cast<Eigen::Index>(target);
    double sign = 1.0;
    if (lp.W.rows() == 1) {
      row = 0;
      sign = target == 1 ? 1.0 : -1.0;
    }
    RelevanceMap m;
    m.target_class = target;
    m.values.resize(v.size());
    double dot = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      m.values[i] = sign * v[i] * lp.W(row, static_cast<Eigen::Index>(i));
      dot += lp.W(row, static_cast<Eigen::Index>(i)) * v[i];
    }
    m.start_relevance = sign * (dot + lp.b(row));
    LayerAudit a;
    a.layer = 0;
    a.kind = LayerKind::dense;
    a.rule = "linear";
    a.relevance_out = m.start_relevance;
    a.bias_absorbed = sign * lp.b(row);
    a.relevance_in = m.sum();
    m.audit.push_back(a);
    return m;
  }

  const ForwardResult fr = forward(p, v);
  Eigen::VectorXd R_top = Eigen::VectorXd::Zero(fr.scores.size());
  R_top(static_cast<Eigen::Index>(target)) = fr.scores(static_cast<Eigen::Index>(target));
  RelevanceMap m = propagate_relevance(p, v, R_top, opt);
  m.target_class = target;
  m.start_relevance = fr.scores(static_cast<Eigen::Index>(target));
  return m;
}

ClassRelevanceSummary class_average(std::span<const RelevanceMap> maps, std::span<const InputVector> signals) {
  if (maps.empty()) throw precondition_error("class_average needs at least one relevance map");
  if (maps.size() != signals.size()) throw precondition_error("class_average: maps and signals are not aligned");
  const std::size_t d = maps.front().values.size();
  ClassRelevanceSummary s;
  s.target_class = maps.front().target_class;
  s.n_trials = maps.size();
  s.mean_signal.assign(d, 0.0);
  s.std_signal.assign(d, 0.0);
  s.mean_relevance.assign(d, 0.0);
  s.std_relevance.assign(d, 0.0);
  s.mean_abs_relevance.assign(d, 0.0);
  const double n = static_cast<double>(maps.size());
  for (std::size_t k = 0; k < maps.size(); ++k) {
    if (maps[k].values.size() != d || signals[k].values.size() != d)
      throw shape_error("class_average: relevance and signal lengths differ");
    if (maps[k].target_class != s.target_class) throw precondition_error("class_average: mixed target classes");
    for (std::size_t i = 0; i < d; ++i) {
      s.mean_signal[i] += signals[k].values[i];
      s.mean_relevance[i] += maps[k].values[i];
      s.mean_abs_relevance[i] += std::abs(maps[k].values[i]);
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    s.mean_signal[i] /= n;
    s.mean_relevance[i] /= n;
    s.mean_abs_relevance[i] /= n;
  }
  if (maps.size() > 1) {
    for (std::size_t k = 0; k < maps.size(); ++k)
      for (std::size_t i = 0; i < d; ++i) {
        const double ds = signals[k].values[i] - s.mean_signal[i];
        const double dr = maps[k].values[i] - s.mean_relevance[i];
        s.std_signal[i] += ds * ds;
        s.std_relevance[i] += dr * dr;
      }
    for (std::size_t i = 0; i < d; ++i) {
      s.std_signal[i] = std::sqrt(s.std_signal[i] / (n - 1.0));
      s.std_relevance[i] = std::sqrt(s.std_relevance[i] / (n - 1.0));
    }
  }
  return s;
}

std::string_view to_string(TotalRelevanceMode m) {
  return m == TotalRelevanceMode::abs_of_means ? "abs_of_means" : "mean_of_abs";
}

std::vector<double> total_relevance(std::span<const ClassRelevanceSummary> classes, TotalRelevanceMode mode) {
  if (classes.empty()) throw precondition_error("total_relevance needs at least one class summary");
  const std::size_t d = classes.front().mean_relevance.size();
  std::vector<double> out(d, 0.0);
  for (const auto& c : classes) {
    if (c.mean_relevance.size() != d) throw shape_error("total_relevance: summaries differ in length");
    for (std::size_t i = 0; i < d; ++i)
      out[i] += mode == TotalRelevanceMode::abs_of_means ? std::abs(c.mean_relevance[i]) : c.mean_abs_relevance[i];
  }
  return out;
}

std::vector<double> total_relevance(const ClassRelevanceSummary& a, const ClassRelevanceSummary& b,
                                    TotalRelevanceMode mode) {
  const ClassRelevanceSummary both[] = {a, b};
  return total_relevance(std::span<const ClassRelevanceSummary>(both), mode);
}

}  // namespace gaitxai
