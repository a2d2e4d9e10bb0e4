#include "gaitxai/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <sstream>

#include "gaitxai/common.hpp"
#include "json.hpp"

namespace gaitxai {

namespace {

using nlohmann::ordered_json;

constexpr double kLeft = 70.0;
constexpr double kPlotWidth = 1000.0;
constexpr double kRight = 30.0;
constexpr double kPanelHeight = 150.0;
constexpr double kPanelGap = 40.0;
constexpr double kTop = 40.0;

const char* const kClassColors[] = {"#1f77b4", "#d62728", "#9467bd", "#8c564b"};
constexpr const char* kEffectColor = "#2ca02c";
constexpr const char* kTotalColor = "#ff7f0e";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string gnum(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double pct_stance(std::size_t node) { return 100.0 * static_cast<double>(node) / static_cast<double>(kNodes - 1); }

// Horizontal mapping for a window of `count` indices starting at `first`.
struct XAxis {
  std::size_t first = 0;
  std::size_t count = kInputDim;
  double x(double index) const {
    return kLeft + (index - static_cast<double>(first) + 0.5) * kPlotWidth / static_cast<double>(count);
  }
  double half_step() const { return 0.5 * kPlotWidth / static_cast<double>(count); }
  std::size_t slots() const { return count / kNodes; }
};

struct YAxis {
  double lo = 0.0, hi = 1.0, top = 0.0;
  double y(double v) const { return top + kPanelHeight - (v - lo) / (hi - lo) * kPanelHeight; }
};

YAxis make_y(double lo, double hi, double top) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, top};
}

// Path through the given curve, broken at component boundaries. `y` maps
// values to panel coordinates.
template <class F>
std::string component_path(const XAxis& xa, const std::vector<double>& v, F&& y) {
  std::string d;
  for (std::size_t s = 0; s < xa.slots(); ++s) {
    for (std::size_t n = 0; n < kNodes; ++n) {
      const std::size_t i = xa.first + s * kNodes + n;
      d += (n == 0 ? (d.empty() ? "M" : " M") : " L");
      d += num(xa.x(static_cast<double>(i))) + " " + num(y(v[i]));
    }
  }
  return d;
}

class Svg {
 public:
  Svg(double width, double height) {
    out_ << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
         << "\" viewBox=\"0 0 " << num(width) << " " << num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out_ << "<rect x=\"0\" y=\"0\" width=\"" << num(width) << "\" height=\"" << num(height) << "\" fill=\"#ffffff\"/>\n";
  }
  std::ostringstream& raw() { return out_; }
  void text(double x, double y, std::string_view s, std::string_view anchor = "start", std::string_view weight = "normal") {
    out_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" text-anchor=\"" << anchor << "\" font-weight=\""
         << weight << "\">" << xml_escape(s) << "</text>\n";
  }
  std::string finish() {
    out_ << "</svg>\n";
    return out_.str();
  }

 private:
  std::ostringstream out_;
};

void panel_frame(Svg& svg, const XAxis& xa, const YAxis& ya, std::string_view title, bool labels) {
  auto& o = svg.raw();
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(ya.top) << "\" width=\"" << num(kPlotWidth) << "\" height=\""
    << num(kPanelHeight) << "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"0.8\"/>\n";
  for (std::size_t s = 0; s <= xa.slots(); ++s) {
    const double x = kLeft + static_cast<double>(s) * kPlotWidth / static_cast<double>(xa.slots());
    o << "<line class=\"tick\" x1=\"" << num(x) << "\" y1=\"" << num(ya.top) << "\" x2=\"" << num(x) << "\" y2=\""
      << num(ya.top + kPanelHeight + 5.0) << "\" stroke=\"#000000\" stroke-width=\"0.6\"/>\n";
    if (labels && s < xa.slots()) {
      const double xc = x + 0.5 * kPlotWidth / static_cast<double>(xa.slots());
      svg.text(xc, ya.top + kPanelHeight + 16.0, slot_name(xa.first / kNodes + s), "middle");
    }
  }
  svg.text(kLeft - 6.0, ya.top + 10.0, gnum(std::round(ya.hi * 100.0) / 100.0), "end");
  svg.text(kLeft - 6.0, ya.top + kPanelHeight, gnum(std::round(ya.lo * 100.0) / 100.0), "end");
  svg.text(kLeft, ya.top - 6.0, title, "start", "bold");
}

void draw_bands(Svg& svg, const XAxis& xa, const YAxis& ya, const std::vector<SpmResult>& spm) {
  auto& o = svg.raw();
  const std::size_t first_slot = xa.first / kNodes;
  // Widest alpha first so stricter levels draw on top.
  for (std::size_t s = 0; s < xa.slots(); ++s) {
    const SpmResult& r = spm[first_slot + s];
    std::vector<const AlphaResult*> levels;
    for (const auto& l : r.levels) levels.push_back(&l);
    std::stable_sort(levels.begin(), levels.end(), [](auto* a, auto* b) { return a->alpha > b->alpha; });
    for (const AlphaResult* l : levels) {
      for (const Interval& iv : l->intervals) {
        const std::size_t i0 = (first_slot + s) * kNodes + iv.start;
        const std::size_t i1 = (first_slot + s) * kNodes + iv.end;
        const double x0 = xa.x(static_cast<double>(i0)) - xa.half_step();
        const double x1 = xa.x(static_cast<double>(i1)) + xa.half_step();
        o << "<rect class=\"band\" data-alpha=\"" << gnum(l->alpha) << "\" data-component=\""
          << slot_name(first_slot + s) << "\" data-start=\"" << iv.start << "\" data-end=\"" << iv.end << "\" x=\""
          << num(x0) << "\" y=\"" << num(ya.top) << "\" width=\"" << num(x1 - x0) << "\" height=\""
          << num(kPanelHeight) << "\" fill=\"" << band_color(l->alpha) << "\"/>\n";
      }
    }
  }
}

// Class mean with +-1 SD band, each segment coloured by mean relevance.
void draw_colored_mean(Svg& svg, const XAxis& xa, const YAxis& ya, const ClassRelevanceSummary& c, double scale,
                       bool dashed, bool sd_band) {
  auto& o = svg.raw();
  if (sd_band) {
    for (std::size_t s = 0; s < xa.slots(); ++s) {
      std::string pts;
      const std::size_t base = xa.first + s * kNodes;
      for (std::size_t n = 0; n < kNodes; ++n) {
        const std::size_t i = base + n;
        pts += (pts.empty() ? "" : " ") + num(xa.x(static_cast<double>(i))) + "," +
               num(ya.y(c.mean_signal[i] + c.std_signal[i]));
      }
      for (std::size_t n = kNodes; n-- > 0;) {
        const std::size_t i = base + n;
        pts += " " + num(xa.x(static_cast<double>(i))) + "," + num(ya.y(c.mean_signal[i] - c.std_signal[i]));
      }
      o << "<polygon class=\"sd-band\" points=\"" << pts << "\" fill=\"#bbbbbb\" fill-opacity=\"0.45\" stroke=\"none\"/>\n";
    }
  }
  o << "<g class=\"relevance-line\" stroke-width=\"2\" stroke-linecap=\"round\"" << (dashed ? " stroke-dasharray=\"4 2\"" : "")
    << ">\n";
  for (std::size_t s = 0; s < xa.slots(); ++s) {
    const std::size_t base = xa.first + s * kNodes;
    for (std::size_t n = 0; n + 1 < kNodes; ++n) {
      const std::size_t i = base + n;
      const double r = 0.5 * (c.mean_relevance[i] + c.mean_relevance[i + 1]);
      o << "<line x1=\"" << num(xa.x(static_cast<double>(i))) << "\" y1=\"" << num(ya.y(c.mean_signal[i]))
        << "\" x2=\"" << num(xa.x(static_cast<double>(i + 1))) << "\" y2=\"" << num(ya.y(c.mean_signal[i + 1]))
        << "\" stroke=\"" << to_hex(relevance_color(r, scale)) << "\"/>\n";
    }
  }
  o << "</g>\n";
}

std::pair<double, double> signal_range(const std::vector<const ClassRelevanceSummary*>& cs, const XAxis& xa, bool with_sd) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto* c : cs) {
    for (std::size_t i = xa.first; i < xa.first + xa.count; ++i) {
      const double sd = with_sd ? c->std_signal[i] : 0.0;
      lo = std::min(lo, c->mean_signal[i] - sd);
      hi = std::max(hi, c->mean_signal[i] + sd);
    }
  }
  return {lo, hi};
}

std::vector<double> normalized(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  std::vector<double> out(v.size(), 0.0);
  if (m > 0.0) {
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / m;
  }
  return out;
}

// Effect size and normalized total relevance in a [0, 1] panel. The effect
// path is drawn in panel-local coordinates so it is identical wherever the
// panel sits.
void draw_overlay(Svg& svg, const XAxis& xa, double top, const std::vector<double>* effect,
                  const std::vector<double>& total) {
  auto& o = svg.raw();
  const YAxis local{0.0, 1.0, 0.0};
  const auto ly = [&](double v) { return local.y(v); };
  o << "<g transform=\"translate(0," << num(top) << ")\">\n";
  if (effect) {
    o << "<path class=\"effect-size\" d=\"" << component_path(xa, *effect, ly) << "\" fill=\"none\" stroke=\""
      << kEffectColor << "\" stroke-width=\"1.5\"/>\n";
  }
  o << "<path class=\"total-relevance\" d=\"" << component_path(xa, normalized(total), ly) << "\" fill=\"none\" stroke=\""
    << kTotalColor << "\" stroke-width=\"1.5\"/>\n";
  o << "</g>\n";
}

void require_length(const std::vector<double>& v, std::string_view what, std::vector<std::string>& missing) {
  if (v.size() != kInputDim) missing.emplace_back(what);
}

void check_figure(const FigureData& fig, std::vector<std::string>& missing) {
  if (fig.classes.empty()) missing.emplace_back("class summaries");
  if (fig.class_names.size() != fig.classes.size()) missing.emplace_back("class names");
  for (std::size_t c = 0; c < fig.classes.size(); ++c) {
    const auto& s = fig.classes[c];
    const std::string tag = "class " + std::to_string(c) + " ";
    require_length(s.mean_signal, tag + "mean signal", missing);
    require_length(s.std_signal, tag + "signal sd", missing);
    require_length(s.mean_relevance, tag + "mean relevance", missing);
  }
  require_length(fig.total_relevance, "total relevance", missing);
  if (fig.has_spm() && fig.spm.size() != kSlots) missing.emplace_back("spm results for all six components");
}

void throw_missing(std::string_view who, const std::vector<std::string>& missing) {
  std::string msg = std::string(who) + ": missing ";
  for (std::size_t i = 0; i < missing.size(); ++i) msg += (i ? ", " : "") + missing[i];
  throw precondition_error(msg);
}

ordered_json spm_to_json(const SpmResult& r) {
  ordered_json j;
  j["t"] = r.tfield.t;
  j["df"] = r.tfield.df;
  j["fwhm"] = r.tfield.fwhm;
  j["degenerate"] = r.tfield.degenerate;
  j["fwhm_degenerate"] = r.tfield.fwhm_degenerate;
  j["two_tailed"] = r.two_tailed;
  j["effect_size"] = r.effect_size;
  ordered_json levels = ordered_json::array();
  for (const auto& l : r.levels) {
    ordered_json iv = ordered_json::array();
    for (const auto& i : l.intervals) iv.push_back({i.start, i.end});
    levels.push_back({{"alpha", l.alpha}, {"threshold", l.threshold}, {"intervals", iv}});
  }
  j["levels"] = levels;
  return j;
}

SpmResult spm_from_json(const nlohmann::json& j) {
  SpmResult r;
  r.tfield.t = j.at("t").get<std::vector<double>>();
  r.tfield.n_nodes = r.tfield.t.size();
  r.tfield.df = j.at("df").get<int>();
  r.tfield.fwhm = j.at("fwhm").get<double>();
  r.tfield.degenerate = j.at("degenerate").get<std::vector<std::uint8_t>>();
  r.tfield.fwhm_degenerate = j.at("fwhm_degenerate").get<bool>();
  r.two_tailed = j.at("two_tailed").get<bool>();
  r.effect_size = j.at("effect_size").get<std::vector<double>>();
  for (const auto& l : j.at("levels")) {
    AlphaResult a;
    a.alpha = l.at("alpha").get<double>();
    a.threshold = l.at("threshold").get<double>();
    for (const auto& iv : l.at("intervals")) a.intervals.push_back({iv.at(0).get<std::size_t>(), iv.at(1).get<std::size_t>()});
    r.levels.push_back(std::move(a));
  }
  return r;
}

const TaskResult* find_cell(const std::vector<TaskResult>& ledger, TaskId t, std::string_view model, Normalization n,
                            bool occluded) {
  for (const auto& r : ledger) {
    if (r.task == t && r.model == model && r.normalization == n && r.occluded == occluded) return &r;
  }
  return nullptr;
}

std::string cell_name(TaskId t, std::string_view model, Normalization n, bool occluded) {
  return std::string(to_string(t)) + "/" + std::string(model) + "/" + std::string(to_string(n)) +
         (occluded ? "/occluded" : "");
}

}  // namespace

Rgb relevance_color(double value, double max_abs) {
  if (!(max_abs > 0.0) || value == 0.0 || std::isnan(value)) return {};
  const double v = std::clamp(value / max_abs, -1.0, 1.0);
  const double a = std::abs(v);
  const double hot = std::min(1.0, 2.0 * a);
  const double mid = std::max(0.0, 2.0 * a - 1.0);
  if (v > 0.0) return {hot, mid, 0.0};
  return {0.0, mid, hot};
}

std::string to_hex(const Rgb& c) {
  const auto byte = [](double x) { return static_cast<int>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", byte(c.r), byte(c.g), byte(c.b));
  return buf;
}

std::string band_color(double alpha) {
  if (alpha <= 0.01 + 1e-12) return "#555555";
  if (alpha <= 0.05 + 1e-12) return "#999999";
  return "#d4d4d4";
}

std::string format_1dp(double v) {
  if (!std::isfinite(v)) throw precondition_error("format_1dp: non-finite value");
  const double scaled = std::abs(v) * 10.0;
  // The relative nudge keeps decimal halves such as 88.35 (stored slightly
  // below) rounding up.
  const double r = std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, scaled)) / 10.0;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.1f", r);
  if (v < 0.0 && r != 0.0) return std::string("-") + buf;
  return buf;
}

std::vector<double> FigureData::effect_size() const {
  std::vector<double> out;
  for (const auto& s : spm) out.insert(out.end(), s.effect_size.begin(), s.effect_size.end());
  return out;
}

double FigureData::color_scale() const {
  double m = 0.0;
  for (const auto& c : classes) {
    for (double r : c.mean_relevance) m = std::max(m, std::abs(r));
  }
  return m;
}

std::string FigureData::to_json() const {
  ordered_json j;
  j["task"] = task;
  j["model"] = model;
  j["normalization"] = normalization;
  j["class_names"] = class_names;
  j["color_scale"] = color_scale();
  j["total_relevance_mode"] = total_relevance_mode;
  j["alphas"] = alphas;
  ordered_json cs = ordered_json::array();
  for (const auto& c : classes) {
    cs.push_back({{"target_class", c.target_class},
                  {"n_trials", c.n_trials},
                  {"mean_signal", c.mean_signal},
                  {"std_signal", c.std_signal},
                  {"mean_relevance", c.mean_relevance},
                  {"std_relevance", c.std_relevance},
                  {"mean_abs_relevance", c.mean_abs_relevance}});
  }
  j["classes"] = cs;
  j["total_relevance"] = total_relevance;
  ordered_json sp = ordered_json::array();
  for (const auto& s : spm) sp.push_back(spm_to_json(s));
  j["spm"] = sp;
  return j.dump(1) + "\n";
}

FigureData FigureData::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("figure data: ") + e.what(), 0);
  }
  try {
    FigureData f;
    f.task = j.at("task").get<std::string>();
    f.model = j.at("model").get<std::string>();
    f.normalization = j.at("normalization").get<std::string>();
    f.class_names = j.at("class_names").get<std::vector<std::string>>();
    f.total_relevance_mode = j.at("total_relevance_mode").get<std::string>();
    f.alphas = j.at("alphas").get<std::vector<double>>();
    for (const auto& c : j.at("classes")) {
      ClassRelevanceSummary s;
      s.target_class = c.at("target_class").get<std::size_t>();
      s.n_trials = c.at("n_trials").get<std::size_t>();
      s.mean_signal = c.at("mean_signal").get<std::vector<double>>();
      s.std_signal = c.at("std_signal").get<std::vector<double>>();
      s.mean_relevance = c.at("mean_relevance").get<std::vector<double>>();
      s.std_relevance = c.at("std_relevance").get<std::vector<double>>();
      s.mean_abs_relevance = c.at("mean_abs_relevance").get<std::vector<double>>();
      f.classes.push_back(std::move(s));
    }
    f.total_relevance = j.at("total_relevance").get<std::vector<double>>();
    for (const auto& s : j.at("spm")) f.spm.push_back(spm_from_json(s));
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("figure data: ") + e.what(), 0);
  }
}

std::string render_overview(const FigureData& fig) {
  std::vector<std::string> missing;
  check_figure(fig, missing);
  if (!missing.empty()) throw_missing("render_overview", missing);

  const XAxis xa;
  const std::size_t n_panels = fig.classes.size() + 2;
  const double height = kTop + static_cast<double>(n_panels) * (kPanelHeight + kPanelGap) + 10.0;
  Svg svg(kLeft + kPlotWidth + kRight, height);
  const double scale = fig.color_scale();
  svg.raw() << "<metadata>{\"task\":\"" << xml_escape(fig.task) << "\",\"model\":\"" << xml_escape(fig.model)
            << "\",\"normalization\":\"" << xml_escape(fig.normalization) << "\",\"color_scale\":" << gnum(scale)
            << ",\"total_relevance_mode\":\"" << xml_escape(fig.total_relevance_mode) << "\"}</metadata>\n";
  svg.text(kLeft, 18.0, fig.task + "  " + fig.model + "  " + fig.normalization, "start", "bold");

  std::vector<const ClassRelevanceSummary*> all;
  for (const auto& c : fig.classes) all.push_back(&c);
  const auto [lo_a, hi_a] = signal_range(all, xa, false);
  const auto [lo_c, hi_c] = signal_range(all, xa, true);

  double top = kTop;
  {
    const YAxis ya = make_y(lo_a, hi_a, top);
    svg.raw() << "<g class=\"panel\" data-panel=\"mean_signals_with_bands\">\n";
    if (fig.has_spm()) draw_bands(svg, xa, ya, fig.spm);
    for (std::size_t c = 0; c < fig.classes.size(); ++c) {
      svg.raw() << "<path class=\"class-mean\" data-class=\"" << xml_escape(fig.class_names[c]) << "\" d=\""
                << component_path(xa, fig.classes[c].mean_signal, [&](double v) { return ya.y(v); })
                << "\" fill=\"none\" stroke=\"" << kClassColors[c % 4] << "\" stroke-width=\"1.5\"/>\n";
    }
    panel_frame(svg, xa, ya, "A  class means", false);
    double lx = kLeft + 150.0;
    for (std::size_t c = 0; c < fig.classes.size(); ++c) {
      svg.raw() << "<line x1=\"" << num(lx) << "\" y1=\"" << num(top - 10.0) << "\" x2=\"" << num(lx + 18.0) << "\" y2=\""
                << num(top - 10.0) << "\" stroke=\"" << kClassColors[c % 4] << "\" stroke-width=\"2\"/>\n";
      svg.text(lx + 22.0, top - 6.0, fig.class_names[c]);
      lx += 80.0;
    }
    svg.raw() << "</g>\n";
    top += kPanelHeight + kPanelGap;
  }
  for (std::size_t c = 0; c < fig.classes.size(); ++c) {
    const YAxis ya = make_y(lo_c, hi_c, top);
    svg.raw() << "<g class=\"panel\" data-panel=\"class_relevance_colored\" data-class=\""
              << xml_escape(fig.class_names[c]) << "\">\n";
    draw_colored_mean(svg, xa, ya, fig.classes[c], scale, false, true);
    panel_frame(svg, xa, ya, std::string(1, static_cast<char>('B' + c)) + "  " + fig.class_names[c], false);
    svg.raw() << "</g>\n";
    top += kPanelHeight + kPanelGap;
  }
  {
    const YAxis ya{0.0, 1.0, top};
    svg.raw() << "<g class=\"panel\" data-panel=\"total_vs_effect\">\n";
    const std::vector<double> effect = fig.effect_size();
    draw_overlay(svg, xa, top, fig.has_spm() ? &effect : nullptr, fig.total_relevance);
    panel_frame(svg, xa, ya,
                std::string(1, static_cast<char>('B' + fig.classes.size())) +
                    (fig.has_spm() ? "  effect size (green) and total relevance (orange)" : "  total relevance"),
                true);
    svg.raw() << "</g>\n";
  }
  return svg.finish();
}

std::string render_method_comparison(const std::vector<FigureData>& rows) {
  if (rows.empty()) throw precondition_error("render_method_comparison: no model results");
  std::vector<std::string> missing;
  std::set<std::string> models;
  for (const auto& r : rows) {
    check_figure(r, missing);
    if (!r.has_spm()) missing.emplace_back(r.model + " spm results");
    if (r.task != rows[0].task || r.normalization != rows[0].normalization)
      throw precondition_error("render_method_comparison: rows mix tasks or normalizations");
    if (r.classes.size() != 2) throw precondition_error("render_method_comparison: binary task required");
    models.insert(r.model);
  }
  for (const char* m : {"svm", "mlp", "cnn"}) {
    if (!models.count(m)) missing.emplace_back(std::string("model ") + m);
  }
  if (!missing.empty()) throw_missing("render_method_comparison", missing);

  const XAxis xa{0, 3 * kNodes};
  const double row_height = 2.0 * (kPanelHeight + kPanelGap);
  const double height = kTop + static_cast<double>(rows.size()) * row_height + 10.0;
  Svg svg(kLeft + kPlotWidth + kRight, height);
  svg.raw() << "<metadata>{\"task\":\"" << xml_escape(rows[0].task) << "\",\"normalization\":\""
            << xml_escape(rows[0].normalization) << "\",\"color_scale\":\"per-row max |mean relevance|\"}</metadata>\n";
  svg.text(kLeft, 18.0, rows[0].task + "  " + rows[0].normalization + "  affected side", "start", "bold");

  // Shared across rows, so every row carries the same bytes.
  const std::vector<double> effect = rows[0].effect_size();
  double top = kTop;
  for (const auto& r : rows) {
    std::vector<const ClassRelevanceSummary*> cs;
    for (const auto& c : r.classes) cs.push_back(&c);
    const auto [lo, hi] = signal_range(cs, xa, false);
    const YAxis ya = make_y(lo, hi, top);
    double scale = 0.0;
    for (const auto& c : r.classes) {
      for (std::size_t i = 0; i < xa.count; ++i) scale = std::max(scale, std::abs(c.mean_relevance[i]));
    }
    svg.raw() << "<g class=\"model-row\" data-model=\"" << xml_escape(r.model) << "\" data-color-scale=\""
              << gnum(scale) << "\">\n";
    for (std::size_t c = 0; c < r.classes.size(); ++c) draw_colored_mean(svg, xa, ya, r.classes[c], scale, c == 1, false);
    panel_frame(svg, xa, ya, r.model + "  " + r.class_names[0] + " (solid), " + r.class_names[1] + " (dashed)", false);
    top += kPanelHeight + kPanelGap;
    const YAxis yb{0.0, 1.0, top};
    draw_overlay(svg, xa, top, &effect, r.total_relevance);
    panel_frame(svg, xa, yb, r.model + "  effect size (green) and total relevance (orange)", true);
    svg.raw() << "</g>\n";
    top += kPanelHeight + kPanelGap;
  }
  return svg.finish();
}

std::string figure_curves_csv(const FigureData& fig) {
  std::vector<std::string> missing;
  check_figure(fig, missing);
  if (!missing.empty()) throw_missing("figure_curves_csv", missing);
  std::ostringstream o;
  o << "index,side,component,pct_stance";
  for (const auto& n : fig.class_names) {
    o << ",mean_signal_" << n << ",sd_signal_" << n << ",mean_relevance_" << n << ",sd_relevance_" << n;
  }
  o << ",total_relevance";
  if (fig.has_spm()) o << ",t,effect_size";
  o << "\n";
  for (std::size_t i = 0; i < kInputDim; ++i) {
    const std::size_t slot = i / kNodes, node = i % kNodes;
    o << i << "," << to_string(side_of_slot(slot)) << "," << to_string(component_of_slot(slot)) << ","
      << gnum(pct_stance(node));
    for (const auto& c : fig.classes) {
      o << "," << gnum(c.mean_signal[i]) << "," << gnum(c.std_signal[i]) << "," << gnum(c.mean_relevance[i]) << ","
        << gnum(c.std_relevance.size() == kInputDim ? c.std_relevance[i] : 0.0);
    }
    o << "," << gnum(fig.total_relevance[i]);
    if (fig.has_spm()) o << "," << gnum(fig.spm[slot].tfield.t[node]) << "," << gnum(fig.spm[slot].effect_size[node]);
    o << "\n";
  }
  return o.str();
}

std::string relevance_csv(const ClassRelevanceSummary& s) {
  if (s.mean_signal.size() != kInputDim || s.mean_relevance.size() != kInputDim)
    throw shape_error("relevance_csv: summary must cover 606 indices");
  std::ostringstream o;
  o << "index,side,component,pct_stance,signal_value,relevance\n";
  for (std::size_t i = 0; i < kInputDim; ++i) {
    const std::size_t slot = i / kNodes;
    o << i << "," << to_string(side_of_slot(slot)) << "," << to_string(component_of_slot(slot)) << ","
      << gnum(pct_stance(i % kNodes)) << "," << gnum(s.mean_signal[i]) << "," << gnum(s.mean_relevance[i]) << "\n";
  }
  return o.str();
}

std::string spm_csv(const SpmResult& r) {
  std::ostringstream o;
  o << "node,pct_stance,t,effect_r,degenerate\n";
  for (std::size_t q = 0; q < r.tfield.t.size(); ++q) {
    o << q << "," << gnum(pct_stance(q)) << "," << gnum(r.tfield.t[q]) << ","
      << gnum(q < r.effect_size.size() ? r.effect_size[q] : 0.0) << ","
      << (q < r.tfield.degenerate.size() ? int(r.tfield.degenerate[q]) : 0) << "\n";
  }
  return o.str();
}

std::string spm_json(const std::string& task, const std::string& normalization, const std::vector<SpmResult>& per_slot) {
  ordered_json j;
  j["task"] = task;
  j["normalization"] = normalization;
  ordered_json comps = ordered_json::array();
  for (std::size_t s = 0; s < per_slot.size(); ++s) {
    const SpmResult& r = per_slot[s];
    ordered_json c;
    c["component"] = slot_name(s);
    c["tail"] = r.two_tailed ? "two" : "one";
    c["df"] = r.tfield.df;
    c["fwhm"] = r.tfield.fwhm;
    c["fwhm_degenerate"] = r.tfield.fwhm_degenerate;
    c["degenerate_nodes"] = std::count(r.tfield.degenerate.begin(), r.tfield.degenerate.end(), std::uint8_t{1});
    ordered_json alphas = ordered_json::object();
    for (const auto& l : r.levels) {
      ordered_json iv = ordered_json::array();
      for (const auto& i : l.intervals) {
        iv.push_back({{"start", i.start}, {"end", i.end}, {"start_pct", pct_stance(i.start)}, {"end_pct", pct_stance(i.end)}});
      }
      alphas[gnum(l.alpha)] = {{"threshold", l.threshold}, {"intervals", iv}};
    }
    c["alpha"] = alphas;
    comps.push_back(c);
  }
  j["components"] = comps;
  return j.dump(1) + "\n";
}

std::string accuracy_table_csv(const std::vector<TaskResult>& ledger, const TableRequest& req) {
  std::vector<std::string> missing;
  std::ostringstream o;
  o << "task,normalization,ZRB";
  for (const auto& m : req.models) o << "," << m;
  o << "\n";
  for (TaskId t : req.tasks) {
    for (Normalization n : req.norms) {
      std::ostringstream row;
      double zrb = -1.0;
      row << to_string(t) << "," << to_string(n);
      std::string cells;
      for (const auto& m : req.models) {
        const TaskResult* r = find_cell(ledger, t, m, n, false);
        if (!r) {
          missing.push_back(cell_name(t, m, n, false));
          continue;
        }
        zrb = r->zrb;
        cells += "," + format_1dp(r->mean) + " (" + format_1dp(r->sd) + ")";
      }
      if (const TaskResult* z = find_cell(ledger, t, "zero_rule", n, false)) zrb = z->zrb;
      row << "," << (zrb >= 0.0 ? format_1dp(zrb) : "") << cells << "\n";
      o << row.str();
    }
  }
  if (!missing.empty()) throw_missing("accuracy table", missing);
  return o.str();
}

std::string occlusion_table_csv(const std::vector<TaskResult>& ledger, const TableRequest& req) {
  std::vector<std::string> missing;
  std::ostringstream o;
  o << "task,normalization";
  for (const auto& m : req.models) o << "," << m;
  o << "\n";
  for (TaskId t : req.tasks) {
    for (Normalization n : req.norms) {
      o << to_string(t) << "," << to_string(n);
      for (const auto& m : req.models) {
        const TaskResult* base = find_cell(ledger, t, m, n, false);
        const TaskResult* occ = find_cell(ledger, t, m, n, true);
        if (!base) missing.push_back(cell_name(t, m, n, false));
        if (!occ) missing.push_back(cell_name(t, m, n, true));
        o << "," << (base && occ ? format_1dp(occlusion_delta(*occ, *base)) : "");
      }
      o << "\n";
    }
  }
  if (!missing.empty()) throw_missing("occlusion table", missing);
  return o.str();
}

std::string occlusion_tests_csv(const std::vector<TaskResult>& ledger, const TableRequest& req) {
  const std::size_t m = req.tasks.size() * req.norms.size() * req.models.size();
  std::vector<std::string> missing;
  std::ostringstream o;
  o << "task,normalization,model,delta,t,df,p_raw,p_adjusted,bonferroni_m,degenerate\n";
  for (TaskId t : req.tasks) {
    for (Normalization n : req.norms) {
      for (const auto& model : req.models) {
        const TaskResult* base = find_cell(ledger, t, model, n, false);
        const TaskResult* occ = find_cell(ledger, t, model, n, true);
        if (!base || !occ) {
          if (!base) missing.push_back(cell_name(t, model, n, false));
          if (!occ) missing.push_back(cell_name(t, model, n, true));
          continue;
        }
        const PairedTResult p = occlusion_test(*occ, *base, m);
        o << to_string(t) << "," << to_string(n) << "," << model << "," << format_1dp(occlusion_delta(*occ, *base))
          << "," << gnum(p.t) << "," << p.df << "," << gnum(p.p_raw) << "," << gnum(p.p_adjusted) << "," << m << ","
          << (p.degenerate ? 1 : 0) << "\n";
      }
    }
  }
  if (!missing.empty()) throw_missing("occlusion tests", missing);
  return o.str();
}

}  // namespace gaitxai
