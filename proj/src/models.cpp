#include "gaitxai/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace gaitxai {

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::relu: return "relu";
    case LayerKind::softmax: return "softmax";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::svm: return "svm";
    case ModelKind::mlp: return "mlp";
    case ModelKind::cnn: return "cnn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "svm" || s == "SVM") return ModelKind::svm;
  if (s == "mlp" || s == "MLP") return ModelKind::mlp;
  if (s == "cnn" || s == "CNN") return ModelKind::cnn;
  throw error("unknown model kind '" + std::string(s) + "' (expected svm, mlp or cnn)");
}

std::size_t conv_output_length(std::size_t len, std::size_t filter, std::size_t stride) {
  if (filter == 0 || stride == 0) throw shape_error("conv filter size and stride must be positive");
  if (len < filter)
    throw shape_error("conv input length " + std::to_string(len) + " is shorter than filter " + std::to_string(filter));
  return (len - filter) / stride + 1;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.in_dim = in;
  l.out_dim = out;
  return l;
}

LayerSpec LayerSpec::conv1d(std::size_t in_len, std::size_t in_channels, std::size_t filter, std::size_t stride,
                            std::size_t out_channels) {
  LayerSpec l;
  l.kind = LayerKind::conv1d;
  l.in_len = in_len;
  l.in_channels = in_channels;
  l.filter_size = filter;
  l.stride = stride;
  l.out_channels = out_channels;
  l.out_len = conv_output_length(in_len, filter, stride);
  l.in_dim = in_len * in_channels;
  l.out_dim = l.out_len * out_channels;
  return l;
}

LayerSpec LayerSpec::activation(LayerKind kind, std::size_t dim) {
  LayerSpec l;
  l.kind = kind;
  l.in_dim = dim;
  l.out_dim = dim;
  return l;
}

std::vector<LayerSpec> mlp_arch(std::size_t n_classes, std::size_t input_dim, std::size_t hidden) {
  return {LayerSpec::dense(input_dim, hidden),  LayerSpec::activation(LayerKind::relu, hidden),
          LayerSpec::dense(hidden, hidden),     LayerSpec::activation(LayerKind::relu, hidden),
          LayerSpec::dense(hidden, n_classes),  LayerSpec::activation(LayerKind::softmax, n_classes)};
}

std::vector<LayerSpec> cnn_arch(std::size_t n_classes, std::size_t input_dim) {
  std::vector<LayerSpec> a;
  a.push_back(LayerSpec::conv1d(input_dim, 1, 8, 2, 24));
  a.push_back(LayerSpec::activation(LayerKind::relu, a.back().out_dim));
  a.push_back(LayerSpec::conv1d(a[0].out_len, 24, 8, 2, 24));
  a.push_back(LayerSpec::activation(LayerKind::relu, a.back().out_dim));
  a.push_back(LayerSpec::conv1d(a[2].out_len, 24, 6, 3, 48));
  a.push_back(LayerSpec::activation(LayerKind::relu, a.back().out_dim));
  a.push_back(LayerSpec::activation(LayerKind::flatten, a.back().out_dim));
  a.push_back(LayerSpec::dense(a.back().out_dim, n_classes));
  a.push_back(LayerSpec::activation(LayerKind::softmax, n_classes));
  return a;
}

std::vector<LayerSpec> svm_arch(std::size_t n_classes, std::size_t input_dim) {
  return {LayerSpec::dense(input_dim, n_classes == 2 ? 1 : n_classes)};
}

void validate_arch(std::span<const LayerSpec> arch) {
  if (arch.empty()) throw shape_error("empty architecture");
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const auto& l = arch[i];
    if (l.kind == LayerKind::conv1d) {
      if (l.in_dim != l.in_len * l.in_channels || l.out_len != conv_output_length(l.in_len, l.filter_size, l.stride) ||
          l.out_dim != l.out_len * l.out_channels)
        throw shape_error("conv layer " + std::to_string(i) + " has inconsistent geometry");
    } else if (l.kind != LayerKind::dense && l.in_dim != l.out_dim) {
      throw shape_error("activation layer " + std::to_string(i) + " changes width");
    }
    if (i > 0 && arch[i - 1].out_dim != l.in_dim)
      throw shape_error("layer " + std::to_string(i) + " expects " + std::to_string(l.in_dim) + " inputs, previous layer emits " +
                        std::to_string(arch[i - 1].out_dim));
  }
}

ModelParams init_params(ModelKind kind, std::vector<LayerSpec> arch, std::size_t n_classes, Rng& rng) {
  validate_arch(arch);
  ModelParams p;
  p.kind = kind;
  p.n_classes = n_classes;
  p.arch = std::move(arch);
  p.layers.resize(p.arch.size());
  for (std::size_t i = 0; i < p.arch.size(); ++i) {
    const auto& l = p.arch[i];
    if (!l.has_params()) continue;
    const double sigma = 1.0 / std::sqrt(static_cast<double>(l.fan_in()));
    const std::size_t rows = l.kind == LayerKind::dense ? l.out_dim : l.out_channels;
    const std::size_t cols = l.fan_in();
    auto& lp = p.layers[i];
    lp.W.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    // Row-major fill order so the draw sequence does not depend on Eigen's storage.
    for (Eigen::Index r = 0; r < lp.W.rows(); ++r)
      for (Eigen::Index c = 0; c < lp.W.cols(); ++c) lp.W(r, c) = sigma * rng.normal();
    lp.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
  }
  return p;
}

// ---- kernels ----------------------------------------------------------------

using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

Eigen::MatrixXd im2col(std::span<const double> x, const LayerSpec& l) {
  const auto C = static_cast<Eigen::Index>(l.in_channels), L = static_cast<Eigen::Index>(l.in_len);
  const auto F = static_cast<Eigen::Index>(l.filter_size), T = static_cast<Eigen::Index>(l.out_len);
  const auto S = static_cast<Eigen::Index>(l.stride);
  ConstRowMajorMap X(x.data(), C, L);
  Eigen::MatrixXd P(C * F, T);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index i = 0; i < C; ++i)
      for (Eigen::Index k = 0; k < F; ++k) P(i * F + k, t) = X(i, t * S + k);
  return P;
}

Eigen::MatrixXd conv1d_valid(const Eigen::MatrixXd& X, const LayerSpec& l, const LayerParams& lp) {
  if (static_cast<std::size_t>(X.rows()) != l.in_dim)
    throw shape_error("conv input has " + std::to_string(X.rows()) + " features, expected " + std::to_string(l.in_dim));
  if (l.in_len < l.filter_size) throw shape_error("conv input shorter than filter");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(l.out_dim), X.cols());
  const auto O = static_cast<Eigen::Index>(l.out_channels), T = static_cast<Eigen::Index>(l.out_len);
  for (Eigen::Index b = 0; b < X.cols(); ++b) {
    const Eigen::MatrixXd P = im2col({X.col(b).data(), static_cast<std::size_t>(X.rows())}, l);
    Eigen::MatrixXd Z = lp.W * P;
    Z.colwise() += lp.b;
    RowMajorMap(out.col(b).data(), O, T) = Z;
  }
  return out;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double m = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - m).exp().matrix();
  return e / e.sum();
}

ActivationTrace forward_batch(const ModelParams& p, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.rows()) != p.input_dim())
    throw shape_error("model expects " + std::to_string(p.input_dim()) + " inputs, got " + std::to_string(X.rows()));
  ActivationTrace tr;
  tr.inputs.reserve(p.arch.size());
  tr.outputs.reserve(p.arch.size());
  Eigen::MatrixXd cur = X;
  for (std::size_t i = 0; i < p.arch.size(); ++i) {
    const auto& l = p.arch[i];
    Eigen::MatrixXd out;
    switch (l.kind) {
      case LayerKind::dense:
        out.noalias() = p.layers[i].W * cur;
        out.colwise() += p.layers[i].b;
        break;
      case LayerKind::conv1d:
        out = conv1d_valid(cur, l, p.layers[i]);
        break;
      case LayerKind::relu:
        out = cur.cwiseMax(0.0);
        break;
      case LayerKind::flatten:
        out = cur;
        break;
      case LayerKind::softmax:
        out.resize(cur.rows(), cur.cols());
        for (Eigen::Index b = 0; b < cur.cols(); ++b) out.col(b) = softmax(cur.col(b));
        break;
    }
    tr.inputs.push_back(std::move(cur));
    tr.outputs.push_back(out);
    cur = std::move(out);
  }
  return tr;
}

ForwardResult forward(const ModelParams& p, std::span<const double> v) {
  if (v.size() != p.input_dim())
    throw shape_error("model expects " + std::to_string(p.input_dim()) + " inputs, got " + std::to_string(v.size()));
  Eigen::MatrixXd X = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  ForwardResult r;
  r.trace = forward_batch(p, X);
  r.output = r.trace.outputs.back().col(0);
  r.scores = p.has_softmax() ? Eigen::VectorXd(r.trace.inputs.back().col(0)) : r.output;
  return r;
}

std::size_t argmax_lowest(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

std::size_t predict(const ModelParams& p, std::span<const double> v) {
  const ForwardResult r = forward(p, v);
  if (p.kind == ModelKind::svm && r.output.size() == 1) return r.output(0) > 0.0 ? 1 : 0;
  return argmax_lowest({r.output.data(), static_cast<std::size_t>(r.output.size())});
}

// ---- training ---------------------------------------------------------------

double TrainSchedule::lr_at(std::size_t iter) const {
  if (iter <= stage_end[0]) return stage_lr[0];
  if (iter <= stage_end[1]) return stage_lr[1];
  return stage_lr[2];
}

TrainSchedule TrainSchedule::scaled(std::size_t total) {
  TrainSchedule s;
  s.total_iters = total;
  s.stage_end = {total / 3, 2 * total / 3};
  return s;
}

namespace {

Eigen::MatrixXd one_hot(std::span<const std::size_t> labels, Eigen::Index n_classes) {
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n_classes, static_cast<Eigen::Index>(labels.size()));
  for (std::size_t b = 0; b < labels.size(); ++b) {
    if (static_cast<Eigen::Index>(labels[b]) >= n_classes) throw precondition_error("label out of range");
    Y(static_cast<Eigen::Index>(labels[b]), static_cast<Eigen::Index>(b)) = 1.0;
  }
  return Y;
}

void require_softmax_head(const ModelParams& p) {
  if (!p.has_softmax()) throw precondition_error("gradient training needs a softmax head (MLP or CNN)");
}

double l1_from_trace(const ActivationTrace& tr, const Eigen::MatrixXd& Y) {
  return (tr.outputs.back() - Y).cwiseAbs().sum() / static_cast<double>(Y.cols());
}

// Per parameterized layer: dense layers keep the output delta (the weight
// gradient is delta * input^T, applied without materializing); conv layers
// carry their accumulated dW/db.
struct LayerDelta {
  Eigen::MatrixXd delta;
  Eigen::MatrixXd dW;
  Eigen::VectorXd db;
};

// With `update` set (aliasing p), each layer is stepped as soon as its input
// gradient has been formed from the old weights.
std::vector<LayerDelta> backprop(const ModelParams& p, const ActivationTrace& tr, const Eigen::MatrixXd& Y,
                                 ModelParams* update = nullptr, double lr = 0.0) {
  const auto B = static_cast<double>(Y.cols());
  std::vector<LayerDelta> out(p.arch.size());
  const Eigen::MatrixXd& P = tr.outputs.back();
  Eigen::MatrixXd g = (P - Y).unaryExpr([B](double r) { return r > 0.0 ? 1.0 / B : (r < 0.0 ? -1.0 / B : 0.0); });

  for (std::size_t li = p.arch.size(); li-- > 0;) {
    const auto& l = p.arch[li];
    const bool need_input_grad = li > 0;
    switch (l.kind) {
      case LayerKind::softmax: {
        const Eigen::MatrixXd& S = tr.outputs[li];
        Eigen::MatrixXd dz(S.rows(), S.cols());
        for (Eigen::Index b = 0; b < S.cols(); ++b) {
          const double gp = g.col(b).dot(S.col(b));
          dz.col(b) = S.col(b).cwiseProduct((g.col(b).array() - gp).matrix());
        }
        g = std::move(dz);
        break;
      }
      case LayerKind::relu:
        g = g.cwiseProduct(tr.inputs[li].unaryExpr([](double z) { return z > 0.0 ? 1.0 : 0.0; }));
        break;
      case LayerKind::flatten:
        break;
      case LayerKind::dense: {
        out[li].db = g.rowwise().sum();
        Eigen::MatrixXd gin;
        if (need_input_grad) gin.noalias() = p.layers[li].W.transpose() * g;
        if (update) {
          update->layers[li].W.noalias() -= (lr * g) * tr.inputs[li].transpose();
          update->layers[li].b -= lr * out[li].db;
        }
        out[li].delta = std::move(g);
        g = std::move(gin);
        break;
      }
      case LayerKind::conv1d: {
        const auto& lp = p.layers[li];
        const auto C = static_cast<Eigen::Index>(l.in_channels), L = static_cast<Eigen::Index>(l.in_len);
        const auto F = static_cast<Eigen::Index>(l.filter_size), T = static_cast<Eigen::Index>(l.out_len);
        const auto O = static_cast<Eigen::Index>(l.out_channels), S = static_cast<Eigen::Index>(l.stride);
        LayerDelta d;
        d.dW = Eigen::MatrixXd::Zero(lp.W.rows(), lp.W.cols());
        d.db = Eigen::VectorXd::Zero(lp.b.size());
        Eigen::MatrixXd gin;
        if (need_input_grad) gin = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(l.in_dim), g.cols());
        for (Eigen::Index b = 0; b < g.cols(); ++b) {
          const Eigen::MatrixXd dOut = ConstRowMajorMap(g.col(b).data(), O, T);
          const Eigen::MatrixXd Pm =
              im2col({tr.inputs[li].col(b).data(), static_cast<std::size_t>(tr.inputs[li].rows())}, l);
          d.dW.noalias() += dOut * Pm.transpose();
          d.db += dOut.rowwise().sum();
          if (need_input_grad) {
            const Eigen::MatrixXd dP = lp.W.transpose() * dOut;
            RowMajorMap dX(gin.col(b).data(), C, L);
            for (Eigen::Index t = 0; t < T; ++t)
              for (Eigen::Index i = 0; i < C; ++i)
                for (Eigen::Index k = 0; k < F; ++k) dX(i, t * S + k) += dP(i * F + k, t);
          }
        }
        if (update) {
          update->layers[li].W -= lr * d.dW;
          update->layers[li].b -= lr * d.db;
        }
        out[li] = std::move(d);
        g = std::move(gin);
        break;
      }
    }
  }
  return out;
}

}  // namespace

double l1_loss(const ModelParams& p, const Eigen::MatrixXd& X, std::span<const std::size_t> labels) {
  require_softmax_head(p);
  const auto tr = forward_batch(p, X);
  return l1_from_trace(tr, one_hot(labels, static_cast<Eigen::Index>(p.output_dim())));
}

std::vector<LayerParams> l1_gradients(const ModelParams& p, const Eigen::MatrixXd& X,
                                      std::span<const std::size_t> labels) {
  require_softmax_head(p);
  const auto tr = forward_batch(p, X);
  const auto deltas = backprop(p, tr, one_hot(labels, static_cast<Eigen::Index>(p.output_dim())));
  std::vector<LayerParams> grads(p.arch.size());
  for (std::size_t i = 0; i < p.arch.size(); ++i) {
    if (p.arch[i].kind == LayerKind::dense) {
      grads[i].W.noalias() = deltas[i].delta * tr.inputs[i].transpose();
      grads[i].b = deltas[i].db;
    } else if (p.arch[i].kind == LayerKind::conv1d) {
      grads[i].W = deltas[i].dW;
      grads[i].b = deltas[i].db;
    }
  }
  return grads;
}

double sgd_step(ModelParams& p, const Eigen::MatrixXd& X, std::span<const std::size_t> labels, double lr) {
  require_softmax_head(p);
  const auto tr = forward_batch(p, X);
  const Eigen::MatrixXd Y = one_hot(labels, static_cast<Eigen::Index>(p.output_dim()));
  const double loss = l1_from_trace(tr, Y);
  backprop(p, tr, Y, &p, lr);
  return loss;
}

ModelParams sgd_train(ModelParams params, const TrainingSet& data, const TrainSchedule& schedule, Rng& rng,
                      const BatchObserver& observer) {
  require_softmax_head(params);
  if (data.size() == 0) throw precondition_error("sgd_train needs at least one training sample");
  if (static_cast<std::size_t>(data.X.cols()) != data.size()) throw shape_error("training matrix/label count mismatch");
  if (schedule.batch_size == 0) throw precondition_error("batch size must be positive");
  const std::size_t B = schedule.batch_size;
  std::vector<std::size_t> idx(B), lab(B);
  Eigen::MatrixXd Xb(data.X.rows(), static_cast<Eigen::Index>(B));
  for (std::size_t it = 1; it <= schedule.total_iters; ++it) {
    for (std::size_t b = 0; b < B; ++b) {
      idx[b] = static_cast<std::size_t>(rng.index(data.size()));
      lab[b] = data.labels[idx[b]];
      Xb.col(static_cast<Eigen::Index>(b)) = data.X.col(static_cast<Eigen::Index>(idx[b]));
    }
    if (observer) observer(idx);
    sgd_step(params, Xb, lab, schedule.lr_at(it));
  }
  params.trained = true;
  return params;
}

bool is_smooth_point(const ModelParams& p, const Eigen::MatrixXd& X, std::span<const std::size_t> labels,
                     double margin) {
  const auto tr = forward_batch(p, X);
  for (std::size_t i = 0; i < p.arch.size(); ++i) {
    if (p.arch[i].kind == LayerKind::relu && (tr.inputs[i].cwiseAbs().array() < margin).any()) return false;
  }
  if (p.has_softmax()) {
    const Eigen::MatrixXd Y = one_hot(labels, static_cast<Eigen::Index>(p.output_dim()));
    if (((tr.outputs.back() - Y).cwiseAbs().array() < margin).any()) return false;
  }
  return true;
}

// ---- checkpoints --------------------------------------------------------------

namespace {

void write_blob(const std::filesystem::path& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error("cannot write tensor blob " + path.string());
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

std::vector<double> read_blob(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw error("cannot read tensor blob " + path.string());
  std::vector<double> values(count);
  for (auto& v : values) {
    std::uint64_t bits = 0;
    if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) throw shape_error("tensor blob " + path.string() + " is truncated");
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
  return values;
}

nlohmann::ordered_json layer_to_json(const LayerSpec& l) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(l.kind));
  j["in_dim"] = l.in_dim;
  j["out_dim"] = l.out_dim;
  if (l.kind == LayerKind::conv1d) {
    j["in_len"] = l.in_len;
    j["in_channels"] = l.in_channels;
    j["filter_size"] = l.filter_size;
    j["stride"] = l.stride;
    j["out_channels"] = l.out_channels;
  }
  return j;
}

LayerSpec layer_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "dense") return LayerSpec::dense(j.at("in_dim").get<std::size_t>(), j.at("out_dim").get<std::size_t>());
  if (kind == "conv1d")
    return LayerSpec::conv1d(j.at("in_len").get<std::size_t>(), j.at("in_channels").get<std::size_t>(),
                             j.at("filter_size").get<std::size_t>(), j.at("stride").get<std::size_t>(),
                             j.at("out_channels").get<std::size_t>());
  const std::size_t dim = j.at("in_dim").get<std::size_t>();
  if (kind == "relu") return LayerSpec::activation(LayerKind::relu, dim);
  if (kind == "softmax") return LayerSpec::activation(LayerKind::softmax, dim);
  if (kind == "flatten") return LayerSpec::activation(LayerKind::flatten, dim);
  throw error("unknown layer kind '" + kind + "' in checkpoint");
}

}  // namespace

void save_checkpoint(const ModelParams& p, const std::string& dir, const std::string& metadata_json) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json m;
  m["format"] = "gaitxai-checkpoint-1";
  m["model_kind"] = std::string(to_string(p.kind));
  m["n_classes"] = p.n_classes;
  m["trained"] = p.trained;
  m["arch"] = nlohmann::ordered_json::array();
  for (const auto& l : p.arch) m["arch"].push_back(layer_to_json(l));
  m["tensors"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < p.arch.size(); ++i) {
    if (!p.arch[i].has_params()) continue;
    const auto& lp = p.layers[i];
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(lp.W.size()));
    for (Eigen::Index r = 0; r < lp.W.rows(); ++r)
      for (Eigen::Index c = 0; c < lp.W.cols(); ++c) w.push_back(lp.W(r, c));
    const std::string wname = "layer" + std::to_string(i) + "_W.f64";
    const std::string bname = "layer" + std::to_string(i) + "_b.f64";
    write_blob(fs::path(dir) / wname, w);
    write_blob(fs::path(dir) / bname, std::vector<double>(lp.b.data(), lp.b.data() + lp.b.size()));
    m["tensors"].push_back({{"layer", i}, {"name", "W"}, {"file", wname}, {"shape", {lp.W.rows(), lp.W.cols()}},
                            {"layout", "row-major"}, {"dtype", "float64-le"}});
    m["tensors"].push_back(
        {{"layer", i}, {"name", "b"}, {"file", bname}, {"shape", {lp.b.size()}}, {"dtype", "float64-le"}});
  }
  m["metadata"] = nlohmann::ordered_json::parse(metadata_json);
  std::ofstream out(fs::path(dir) / "manifest.json");
  out << m.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw error("cannot open checkpoint manifest in " + dir);
  const auto m = nlohmann::json::parse(in);
  ModelParams p;
  p.kind = parse_model_kind(m.at("model_kind").get<std::string>());
  p.n_classes = m.at("n_classes").get<std::size_t>();
  p.trained = m.value("trained", false);
  for (const auto& l : m.at("arch")) p.arch.push_back(layer_from_json(l));
  validate_arch(p.arch);
  p.layers.resize(p.arch.size());
  for (const auto& t : m.at("tensors")) {
    const std::size_t li = t.at("layer").get<std::size_t>();
    if (li >= p.arch.size()) throw shape_error("checkpoint tensor refers to missing layer");
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    std::size_t count = 1;
    for (auto s : shape) count *= static_cast<std::size_t>(s);
    const auto values = read_blob(fs::path(dir) / t.at("file").get<std::string>(), count);
    if (t.at("name") == "W") {
      auto& W = p.layers[li].W;
      W.resize(shape.at(0), shape.at(1));
      std::size_t k = 0;
      for (Eigen::Index r = 0; r < W.rows(); ++r)
        for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = values[k++];
    } else {
      p.layers[li].b = Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
    }
  }
  return p;
}

}  // namespace gaitxai
