#include "gaitxai/spm.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "gaitxai/common.hpp"
#include "gaitxai/rng.hpp"

namespace gaitxai {

bool TField::any_degenerate() const {
  return std::any_of(degenerate.begin(), degenerate.end(), [](std::uint8_t d) { return d != 0; });
}

namespace {

void check_groups(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  if (A.rows() < 2 || B.rows() < 2)
    throw precondition_error("two-sample t needs at least 2 curves per group (got " + std::to_string(A.rows()) + " and " +
                             std::to_string(B.rows()) + ")");
  if (A.cols() != B.cols() || A.cols() < 2) throw precondition_error("groups must share a node count of at least 2");
}

// Relative floor below which a pooled variance counts as zero.
bool negligible_variance(double var, double scale) { return !(var > 1e-24 * std::max(1.0, scale * scale)); }

}  // namespace

TField two_sample_t_field(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  check_groups(A, B);
  const auto Q = A.cols();
  const double nA = static_cast<double>(A.rows()), nB = static_cast<double>(B.rows());
  TField f;
  f.df = static_cast<int>(A.rows() + B.rows() - 2);
  f.n_nodes = static_cast<std::size_t>(Q);
  f.t.assign(static_cast<std::size_t>(Q), 0.0);
  f.degenerate.assign(static_cast<std::size_t>(Q), 0);

  const Eigen::RowVectorXd mA = A.colwise().mean(), mB = B.colwise().mean();
  Eigen::MatrixXd resid(A.rows() + B.rows(), Q);
  resid.topRows(A.rows()) = A.rowwise() - mA;
  resid.bottomRows(B.rows()) = B.rowwise() - mB;
  const double scale = std::max(A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff());
  for (Eigen::Index q = 0; q < Q; ++q) {
    const double sp2 = resid.col(q).squaredNorm() / f.df;
    if (negligible_variance(sp2, scale)) {
      f.degenerate[static_cast<std::size_t>(q)] = 1;
      continue;
    }
    f.t[static_cast<std::size_t>(q)] = (mA(q) - mB(q)) / std::sqrt(sp2 * (1.0 / nA + 1.0 / nB));
  }
  try {
    f.fwhm = estimate_fwhm(resid);
  } catch (const degenerate_error&) {
    f.fwhm = 10.0 * static_cast<double>(Q);
    f.fwhm_degenerate = true;
  }
  return f;
}

double estimate_fwhm(const Eigen::MatrixXd& R) {
  if (R.rows() < 2) throw precondition_error("estimate_fwhm needs at least 2 residual curves");
  const auto Q = R.cols();
  if (Q < 2) throw precondition_error("estimate_fwhm needs at least 2 nodes");
  Eigen::MatrixXd D(R.rows(), Q);
  D.col(0) = R.col(1) - R.col(0);
  D.col(Q - 1) = R.col(Q - 1) - R.col(Q - 2);
  for (Eigen::Index q = 1; q + 1 < Q; ++q) D.col(q) = 0.5 * (R.col(q + 1) - R.col(q - 1));

  double lambda = 0.0;
  Eigen::Index used = 0;
  for (Eigen::Index q = 0; q < Q; ++q) {
    const double ss = R.col(q).squaredNorm();
    if (!(ss > 0.0)) continue;
    lambda += D.col(q).squaredNorm() / ss;
    ++used;
  }
  if (used == 0) throw degenerate_error("residuals are identically zero; smoothness is undefined");
  lambda /= static_cast<double>(used);
  if (!(lambda > 0.0)) throw degenerate_error("residual gradients vanish; smoothness is undefined");
  const double fwhm = std::sqrt(4.0 * std::numbers::ln2 / lambda);
  return std::clamp(fwhm, 1.0, 10.0 * static_cast<double>(Q));
}

double t_survival(double u, double df) {
  if (!(df > 0.0)) throw precondition_error("t distribution needs df > 0");
  const boost::math::students_t_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, u));
}

double rft_exceedance(double u, double df, std::size_t Q, double fwhm) {
  const double resels = static_cast<double>(Q - 1) / fwhm;
  const double ec1 = std::sqrt(4.0 * std::numbers::ln2) / (2.0 * std::numbers::pi) *
                     std::pow(1.0 + u * u / df, -(df - 1.0) / 2.0);
  return t_survival(u, df) + resels * ec1;
}

double rft_threshold(double df, std::size_t Q, double fwhm, double alpha) {
  if (!(df >= 1.0)) throw precondition_error("rft_threshold needs df >= 1");
  if (!(alpha > 0.0 && alpha <= 0.5)) throw precondition_error("alpha must lie in (0, 0.5]");
  if (Q < 1 || !(fwhm > 0.0)) throw precondition_error("rft_threshold needs Q >= 1 and fwhm > 0");
  double lo = 0.0, hi = 1.0;
  constexpr double cap = 1e6;
  while (rft_exceedance(hi, df, Q, fwhm) > alpha) {
    lo = hi;
    hi *= 2.0;
    if (hi > cap) throw error("rft_threshold: no threshold below " + std::to_string(cap));
  }
  while (hi - lo > 1e-10 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (rft_exceedance(mid, df, Q, fwhm) > alpha ? lo : hi) = mid;
  }
  return hi;
}

std::vector<Interval> suprathreshold_regions(std::span<const double> t, double tstar, bool two_tailed) {
  if (!(tstar > 0.0)) throw precondition_error("threshold must be positive");
  std::vector<Interval> out;
  bool open = false;
  for (std::size_t q = 0; q < t.size(); ++q) {
    const bool above = two_tailed ? std::abs(t[q]) >= tstar : t[q] >= tstar;
    if (above && !open) {
      out.push_back({q, q});
      open = true;
    } else if (above) {
      out.back().end = q;
    } else {
      open = false;
    }
  }
  return out;
}

double effect_size_r(double t, double df) {
  if (!(df >= 1.0)) throw precondition_error("effect size needs df >= 1");
  return std::sqrt(t * t / (t * t + df));
}

SpmResult spm_two_sample(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::span<const double> alphas,
                         bool two_tailed) {
  SpmResult r;
  r.tfield = two_sample_t_field(A, B);
  r.two_tailed = two_tailed;
  for (double a : alphas) {
    AlphaResult level;
    level.alpha = a;
    level.threshold = rft_threshold(r.tfield.df, r.tfield.n_nodes, r.tfield.fwhm, two_tailed ? a / 2.0 : a);
    level.intervals = suprathreshold_regions(r.tfield.t, level.threshold, two_tailed);
    r.levels.push_back(std::move(level));
  }
  r.effect_size.reserve(r.tfield.t.size());
  for (double t : r.tfield.t) r.effect_size.push_back(effect_size_r(t, r.tfield.df));
  return r;
}

// ---- permutation oracle -------------------------------------------------------

double PermutationResult::threshold(double alpha) const {
  if (max_t.empty()) throw precondition_error("empty permutation distribution");
  const double n = static_cast<double>(max_t.size());
  auto k = static_cast<std::size_t>(std::ceil((1.0 - alpha) * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, max_t.size());
  return max_t[k - 1];
}

double PermutationResult::exceedance(double u) const {
  const auto it = std::lower_bound(max_t.begin(), max_t.end(), u);
  return static_cast<double>(max_t.end() - it) / static_cast<double>(max_t.size());
}

namespace {

// Binomial coefficient, saturating at `cap` + 1.
std::size_t choose_capped(std::size_t n, std::size_t k, std::size_t cap) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (c > static_cast<double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(c));
}

struct MaxTKernel {
  Eigen::MatrixXd X;  // all curves, centred per node
  Eigen::RowVectorXd total, total_sq;
  std::size_t nA = 0, n = 0;
  double scale = 1.0;

  double operator()(std::span<const std::size_t> groupA) const {
    Eigen::RowVectorXd sA = Eigen::RowVectorXd::Zero(X.cols()), qA = Eigen::RowVectorXd::Zero(X.cols());
    for (std::size_t i : groupA) {
      sA += X.row(static_cast<Eigen::Index>(i));
      qA += X.row(static_cast<Eigen::Index>(i)).array().square().matrix();
    }
    const double na = static_cast<double>(nA), nb = static_cast<double>(n - nA), df = na + nb - 2.0;
    double best = 0.0;
    for (Eigen::Index q = 0; q < X.cols(); ++q) {
      const double sB = total(q) - sA(q), qB = total_sq(q) - qA(q);
      const double sse = (qA(q) - sA(q) * sA(q) / na) + (qB - sB * sB / nb);
      const double sp2 = sse / df;
      if (negligible_variance(sp2, scale)) continue;
      const double t = (sA(q) / na - sB / nb) / std::sqrt(sp2 * (1.0 / na + 1.0 / nb));
      best = std::max(best, std::abs(t));
    }
    return best;
  }
};

}  // namespace

PermutationResult permutation_maxt(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::size_t n_perm,
                                   std::uint64_t seed, std::size_t jobs) {
  check_groups(A, B);
  if (n_perm < 100) throw precondition_error("permutation_maxt needs at least 100 permutations");
  MaxTKernel k;
  k.nA = static_cast<std::size_t>(A.rows());
  k.n = static_cast<std::size_t>(A.rows() + B.rows());
  k.X.resize(static_cast<Eigen::Index>(k.n), A.cols());
  k.X.topRows(A.rows()) = A;
  k.X.bottomRows(B.rows()) = B;
  const Eigen::RowVectorXd mean = k.X.colwise().mean();
  k.X.rowwise() -= mean;
  k.total = k.X.colwise().sum();
  k.total_sq = k.X.array().square().colwise().sum().matrix();
  k.scale = std::max(A.cwiseAbs().maxCoeff(), B.cwiseAbs().maxCoeff());

  PermutationResult res;
  const std::size_t distinct = choose_capped(k.n, k.nA, n_perm);
  if (distinct <= n_perm) {
    res.exhaustive = true;
    std::vector<std::size_t> comb(k.nA);
    std::iota(comb.begin(), comb.end(), 0);
    for (;;) {
      res.max_t.push_back(k(comb));
      std::size_t i = k.nA;
      while (i > 0 && comb[i - 1] == k.n - k.nA + i - 1) --i;
      if (i == 0) break;
      ++comb[i - 1];
      for (std::size_t j = i; j < k.nA; ++j) comb[j] = comb[j - 1] + 1;
    }
  } else {
    res.max_t.assign(n_perm, 0.0);
    auto work = [&](std::size_t begin, std::size_t end) {
      std::vector<std::size_t> idx(k.n);
      for (std::size_t p = begin; p < end; ++p) {
        Rng rng(derive_seed(seed, {p}));
        std::iota(idx.begin(), idx.end(), 0);
        for (std::size_t i = 0; i < k.nA; ++i) std::swap(idx[i], idx[i + rng.index(k.n - i)]);
        res.max_t[p] = k(std::span<const std::size_t>(idx.data(), k.nA));
      }
    };
    jobs = std::max<std::size_t>(1, std::min(jobs, n_perm));
    if (jobs == 1) {
      work(0, n_perm);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(work, j * n_perm / jobs, (j + 1) * n_perm / jobs);
      for (auto& th : pool) th.join();
    }
  }
  std::sort(res.max_t.begin(), res.max_t.end());
  return res;
}

// ---- utilities ----------------------------------------------------------------

PairedTResult paired_t_bonferroni(std::span<const double> a, std::span<const double> b, std::size_t m) {
  if (a.size() != b.size()) throw precondition_error("paired t: samples differ in length");
  if (a.size() < 2) throw precondition_error("paired t needs at least 2 pairs");
  if (m < 1) throw precondition_error("Bonferroni factor must be at least 1");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  PairedTResult r;
  r.df = static_cast<int>(n - 1);
  r.mean_difference = mean;
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  double scale = 0.0;
  for (double v : d) scale = std::max(scale, std::abs(v));
  if (!(sd > 1e-12 * std::max(1.0, scale))) {
    r.degenerate = true;
    if (std::abs(mean) > 0.0) {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
      r.p_raw = 0.0;
      r.p_adjusted = 0.0;
    }
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_raw = std::min(1.0, 2.0 * t_survival(std::abs(r.t), r.df));
  r.p_adjusted = std::min(1.0, static_cast<double>(m) * r.p_raw);
  return r;
}

double pearson_corr(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw precondition_error("pearson_corr needs two equal-length series of 2+ values");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw degenerate_error("pearson_corr: a series has zero variance");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace gaitxai
