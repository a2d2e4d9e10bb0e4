#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gaitxai {

/// Two-sample t statistic over Q nodes.
struct TField {
  std::vector<double> t;
  int df = 0;
  double fwhm = 0.0;         // smoothness in node units
  std::size_t n_nodes = 0;
  std::vector<std::uint8_t> degenerate;  // 1 where the pooled variance is zero (t set to 0)
  bool fwhm_degenerate = false;          // residuals carried no gradient; fwhm clamped to its cap
  bool any_degenerate() const;
};

/// Rows are trials, columns nodes. Throws precondition_error for groups of
/// fewer than two curves or mismatched node counts.
TField two_sample_t_field(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Gradient-variance smoothness estimate: v(q) = sum_j dr_j(q)^2 / sum_j r_j(q)^2
/// with dr the central-difference gradient (one-sided at the ends), then
/// FWHM = sqrt(4 ln 2 / mean(v)), clamped to [1, 10 Q].
/// Throws degenerate_error if the residuals or their gradients vanish.
double estimate_fwhm(const Eigen::MatrixXd& residuals);

/// Student t survival function S_t(u; df).
double t_survival(double u, double df);

/// One-sided upper-tail probability of the field maximum under the 1D
/// Euler-characteristic approximation.
double rft_exceedance(double u, double df, std::size_t Q, double fwhm);

/// Smallest u with rft_exceedance(u) <= alpha, by bisection. The caller
/// halves alpha for two-tailed inference.
double rft_threshold(double df, std::size_t Q, double fwhm, double alpha);

struct Interval {
  std::size_t start = 0;  // inclusive node range
  std::size_t end = 0;
  bool operator==(const Interval&) const = default;
};

/// Maximal runs with |t| >= t* (two-tailed) or t >= t* (one-tailed), sorted.
std::vector<Interval> suprathreshold_regions(std::span<const double> t, double tstar, bool two_tailed = true);

double effect_size_r(double t, double df);

struct AlphaResult {
  double alpha = 0.0;
  double threshold = 0.0;
  std::vector<Interval> intervals;
};

struct SpmResult {
  TField tfield;
  bool two_tailed = true;
  std::vector<AlphaResult> levels;  // in the order requested
  std::vector<double> effect_size;
};

/// t-field, RFT thresholds (alpha/2 per tail when two-tailed), intervals and
/// effect-size curve for one component.
SpmResult spm_two_sample(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::span<const double> alphas,
                         bool two_tailed = true);

struct PermutationResult {
  std::vector<double> max_t;  // sorted ascending
  bool exhaustive = false;    // every distinct labeling was used
  /// Empirical (1 - alpha) quantile: the smallest recorded value with at most
  /// a fraction alpha of the distribution strictly above it.
  double threshold(double alpha) const;
  /// Fraction of the distribution at or above u.
  double exceedance(double u) const;
};

/// Null distribution of max_q |t(q)| under random relabeling. Each
/// permutation draws from its own derived seed, so the result does not
/// depend on `jobs`. Throws precondition_error unless n_perm >= 100.
PermutationResult permutation_maxt(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, std::size_t n_perm,
                                   std::uint64_t seed, std::size_t jobs = 1);

struct PairedTResult {
  double t = 0.0;
  int df = 0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  double mean_difference = 0.0;
  bool degenerate = false;  // differences have zero variance
};

/// Paired t on a - b with Bonferroni factor m (two-sided p).
PairedTResult paired_t_bonferroni(std::span<const double> a, std::span<const double> b, std::size_t m);

/// Pearson product-moment correlation; throws degenerate_error on zero variance.
double pearson_corr(std::span<const double> x, std::span<const double> y);

}  // namespace gaitxai
