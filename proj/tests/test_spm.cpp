#include <cmath>
#include <vector>

#include "doctest.h"
#include "gaitxai/common.hpp"
#include "gaitxai/rng.hpp"
#include "gaitxai/spm.hpp"
#include "gaitxai/synth.hpp"
#include "oracles.hpp"

using namespace gaitxai;

namespace {

Eigen::MatrixXd constant_rows(const std::vector<double>& values, Eigen::Index Q = 101) {
  Eigen::MatrixXd M(static_cast<Eigen::Index>(values.size()), Q);
  for (std::size_t i = 0; i < values.size(); ++i) M.row(static_cast<Eigen::Index>(i)).setConstant(values[i]);
  return M;
}

Eigen::MatrixXd smooth_group(Rng& rng, Eigen::Index n, double fwhm, double shift = 0.0) {
  Eigen::MatrixXd M(n, 101);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto e = smooth_gaussian_noise(rng, 101, fwhm);
    for (Eigen::Index q = 0; q < 101; ++q) M(i, q) = e[static_cast<std::size_t>(q)] + shift;
  }
  return M;
}

}  // namespace

TEST_CASE("two-sample t hand example") {
  const TField f = two_sample_t_field(constant_rows({2, 4}, 5), constant_rows({1, 3}, 5));
  CHECK(f.df == 2);
  for (double t : f.t) CHECK(t == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("identical groups give a zero field") {
  Rng rng(1);
  const Eigen::MatrixXd A = smooth_group(rng, 6, 10.0);
  const TField f = two_sample_t_field(A, A);
  for (double t : f.t) CHECK(t == 0.0);
}

TEST_CASE("t field properties against a direct computation") {
  Rng rng(2);
  const Eigen::MatrixXd A = smooth_group(rng, 7, 8.0, 0.4), B = smooth_group(rng, 9, 8.0);
  const TField f = two_sample_t_field(A, B);
  const TField g = two_sample_t_field(B, A);
  const TField shifted = two_sample_t_field((A.array() + 5.0).matrix(), (B.array() + 5.0).matrix());
  const TField scaled = two_sample_t_field(3.0 * A, 3.0 * B);
  CHECK(f.df == 14);
  for (Eigen::Index q = 0; q < 101; ++q) {
    std::vector<double> a(A.rows()), b(B.rows());
    for (Eigen::Index i = 0; i < A.rows(); ++i) a[static_cast<std::size_t>(i)] = A(i, q);
    for (Eigen::Index i = 0; i < B.rows(); ++i) b[static_cast<std::size_t>(i)] = B(i, q);
    const auto k = static_cast<std::size_t>(q);
    CHECK(f.t[k] == doctest::Approx(oracle::pooled_t(a, b)).epsilon(1e-10));
    CHECK(g.t[k] == doctest::Approx(-f.t[k]).epsilon(1e-12));
    CHECK(shifted.t[k] == doctest::Approx(f.t[k]).epsilon(1e-9));
    CHECK(scaled.t[k] == doctest::Approx(f.t[k]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(two_sample_t_field(A.topRows(1), B), precondition_error);
}

TEST_CASE("zero pooled variance is flagged, not infinite") {
  const TField f = two_sample_t_field(constant_rows({1, 1}, 4), constant_rows({2, 2}, 4));
  CHECK(f.any_degenerate());
  for (double t : f.t) CHECK(t == 0.0);
}

TEST_CASE("FWHM estimate matches a gradient-based reference") {
  Eigen::MatrixXd r(6, 101);
  for (int j = 0; j < 6; ++j)
    for (int q = 0; q < 101; ++q) r(j, q) = std::sin(0.1 * q + j) + 0.2 * std::cos(0.37 * q * j);
  r.rowwise() -= r.colwise().mean();
  CHECK(estimate_fwhm(r) == doctest::Approx(9.885864474190724).epsilon(1e-9));
  CHECK_THROWS_AS(estimate_fwhm(constant_rows({1, 2, 3})), degenerate_error);
}

TEST_CASE("FWHM of smoothed noise is recovered") {
  for (double target : {10.0, 20.0}) {
    Rng rng(static_cast<std::uint64_t>(target));
    Eigen::MatrixXd e = smooth_group(rng, 50, target);
    e.rowwise() -= e.colwise().mean();
    CHECK(estimate_fwhm(e) == doctest::Approx(target).epsilon(0.2));
  }
}

TEST_CASE("t survival function") {
  CHECK(t_survival(2.0, 10) == doctest::Approx(0.036694017385370196).epsilon(1e-12));
  CHECK(t_survival(3.5, 28) == doctest::Approx(0.0007882360706177308).epsilon(1e-10));
  CHECK(t_survival(-1.0, 5) == doctest::Approx(0.8183912661754387).epsilon(1e-12));
}

TEST_CASE("RFT thresholds") {
  CHECK(rft_threshold(28, 101, 15, 0.025) == doctest::Approx(3.249529830115769).epsilon(1e-6));
  CHECK(rft_threshold(28, 101, 15, 0.05) == doctest::Approx(2.9401059746750584).epsilon(1e-6));
  CHECK(rft_threshold(10, 101, 5, 0.005) == doctest::Approx(6.094576418394846).epsilon(1e-6));
  CHECK(rft_threshold(198, 101, 20, 0.025) == doctest::Approx(2.8867639222291825).epsilon(1e-6));
  const double a = rft_threshold(20, 101, 12, 0.01), b = rft_threshold(20, 101, 12, 0.05),
               c = rft_threshold(20, 101, 12, 0.1);
  CHECK(a > b);
  CHECK(b > c);
  CHECK(rft_threshold(20, 101, 5, 0.05) > rft_threshold(20, 101, 25, 0.05));
  // With no resels the threshold is the pointwise quantile.
  const double u = rft_threshold(20, 101, 1e9, 0.05);
  CHECK(t_survival(u, 20) == doctest::Approx(0.05).epsilon(1e-4));
}

TEST_CASE("suprathreshold regions") {
  std::vector<double> t(101, 0.0);
  CHECK(suprathreshold_regions(t, 3.0).empty());
  for (std::size_t q = 20; q <= 30; ++q) t[q] = 5.0;
  CHECK(suprathreshold_regions(t, 3.0) == std::vector<Interval>{{20, 30}});
  t[25] = 1.0;
  CHECK(suprathreshold_regions(t, 3.0) == std::vector<Interval>{{20, 24}, {26, 30}});
  for (std::size_t q = 60; q <= 62; ++q) t[q] = -4.0;
  CHECK(suprathreshold_regions(t, 3.0).size() == 3);
  CHECK(suprathreshold_regions(t, 3.0, false).size() == 2);
  t[0] = 3.0;
  CHECK(suprathreshold_regions(t, 3.0).front() == Interval{0, 0});
}

TEST_CASE("SPM result thresholds and intervals are consistent") {
  Rng rng(5);
  Eigen::MatrixXd A = smooth_group(rng, 15, 10.0), B = smooth_group(rng, 15, 10.0);
  for (Eigen::Index q = 40; q <= 60; ++q) A.col(q).array() += 3.0;
  const std::vector<double> alphas{0.01, 0.05, 0.1};
  const SpmResult r = spm_two_sample(A, B, alphas);
  REQUIRE(r.levels.size() == 3);
  CHECK(r.levels[0].threshold > r.levels[1].threshold);
  CHECK(r.levels[1].threshold > r.levels[2].threshold);
  CHECK(r.levels[1].threshold == doctest::Approx(rft_threshold(28, 101, r.tfield.fwhm, 0.025)));
  bool found = false;
  for (const auto& lvl : r.levels)
    for (const auto& iv : lvl.intervals) {
      for (std::size_t q = iv.start; q <= iv.end; ++q) CHECK(std::abs(r.tfield.t[q]) >= lvl.threshold);
      if (iv.start <= 50 && iv.end >= 50) found = true;
    }
  CHECK(found);
  for (std::size_t q = 0; q < 101; ++q)
    CHECK(r.effect_size[q] == doctest::Approx(effect_size_r(r.tfield.t[q], 28)));
}

TEST_CASE("effect size") {
  CHECK(effect_size_r(0.0, 5) == 0.0);
  CHECK(effect_size_r(2.0, 4) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(effect_size_r(-2.0, 4) == effect_size_r(2.0, 4));
  double prev = 0.0;
  for (double t = 0.5; t < 50.0; t += 0.5) {
    const double r = effect_size_r(t, 10);
    CHECK(r > prev);
    CHECK(r < 1.0);
    prev = r;
  }
}

TEST_CASE("permutation max-t distribution") {
  const PermutationResult flat = permutation_maxt(constant_rows({1, 1, 1}), constant_rows({1, 1, 1}), 100, 3);
  for (double v : flat.max_t) CHECK(v == 0.0);

  Rng rng(6);
  const Eigen::MatrixXd A = smooth_group(rng, 8, 10.0), B = smooth_group(rng, 8, 10.0);
  const PermutationResult p = permutation_maxt(A, B, 400, 9);
  const PermutationResult q = permutation_maxt(A, B, 400, 9);
  CHECK(p.max_t == q.max_t);
  CHECK(std::is_sorted(p.max_t.begin(), p.max_t.end()));
  CHECK(p.threshold(0.05) >= p.threshold(0.1));
  CHECK(p.exceedance(p.threshold(0.05)) <= 0.05 + 1.0 / 400);
  CHECK_THROWS_AS(permutation_maxt(A, B, 50, 1), precondition_error);

  // Two trials per group allow only 6 labelings.
  const PermutationResult small = permutation_maxt(A.topRows(2), B.topRows(2), 100, 1);
  CHECK(small.exhaustive);
  CHECK(small.max_t.size() <= 6);
}

TEST_CASE("paired t with Bonferroni") {
  const std::vector<double> a{1, 2, 3}, z{0, 0, 0};
  const PairedTResult r = paired_t_bonferroni(a, z, 1);
  CHECK(r.t == doctest::Approx(3.4641).epsilon(1e-4));
  CHECK(r.df == 2);
  const PairedTResult m = paired_t_bonferroni(a, z, 4);
  CHECK(m.p_adjusted == doctest::Approx(std::min(1.0, 4 * r.p_raw)));
  const PairedTResult same = paired_t_bonferroni(a, a, 1);
  CHECK(same.t == 0.0);
  CHECK(same.p_raw == 1.0);
  const std::vector<double> ones{2, 3, 4, 5}, base{1, 2, 3, 4};
  CHECK(paired_t_bonferroni(ones, base, 1).degenerate);
}

TEST_CASE("Pearson correlation") {
  const std::vector<double> x{1, 2, 3, 4}, y{5, 7, 9, 11}, n{-1, -2, -3, -4};
  CHECK(pearson_corr(x, y) == doctest::Approx(1.0));
  CHECK(pearson_corr(x, n) == doctest::Approx(-1.0));
  CHECK(pearson_corr(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(pearson_corr(x, std::vector<double>{1, 1, 1, 1}), degenerate_error);
}
