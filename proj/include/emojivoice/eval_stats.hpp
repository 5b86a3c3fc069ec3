#pragma once

// Opinion-score statistics computed from per-group summaries: one-way
// ANOVA from (n, mean, sd) triples with omega squared, Tukey HSD,
// chi-squared goodness of fit, and bootstrap preference intervals.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emojivoice::stats {

struct SummaryGroup {
  std::string label;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
};

struct AnovaResult {
  double f_stat = 0.0;
  double p_value = 1.0;
  int df_between = 0;
  int df_within = 0;
  double ss_between = 0.0;
  double ss_within = 0.0;
  double ms_within = 0.0;
  double omega_sq = 0.0;
};

// Throws PreconditionError for fewer than two groups, n < 2 or sd < 0, and
// DomainError when every sd is zero (F undefined).
AnovaResult anova_from_summary(std::span<const SummaryGroup> groups);

// Same test computed from raw observations.
AnovaResult anova_from_raw(std::span<const std::vector<double>> groups);
SummaryGroup summarize(std::string label, std::span<const double> values);

struct TukeyPair {
  std::string group_a;  // higher mean
  std::string group_b;
  double mean_diff = 0.0;  // mean_a - mean_b >= 0
  double q_stat = 0.0;
  double p_value = 1.0;
};

// All k(k-1)/2 pairs, in (i, j), i < j input order. Requires equal n
// (throws UnsupportedDesignError) and ms_within > 0.
std::vector<TukeyPair> tukey_hsd(std::span<const SummaryGroup> groups, double ms_within, int df_within);

// P(Q <= q) for the studentized range with k means and df degrees of
// freedom; two-level 64-node Gauss-Legendre quadrature, |error| < 0.002.
double studentized_range_cdf(double q, int k, double df);
double studentized_range_sf(double q, int k, double df);

struct ChiSquareResult {
  double chi2 = 0.0;
  int df = 0;
  double p_value = 1.0;
};

// Proportions are normalized to sum to one. Throws DomainError if any
// expected count is zero.
ChiSquareResult chisq_gof(std::span<const std::size_t> observed, std::span<const double> expected_proportions);

struct OptionInterval {
  std::size_t option = 0;
  std::size_t count = 0;
  double share = 0.0;
  double ci_low = 0.0;   // share
  double ci_high = 0.0;
};

struct DominanceVerdict {
  std::size_t winner = 0;
  std::size_t loser = 0;
  double support = 0.0;  // fraction of resamples with count_winner > count_loser
  bool dominant = false; // support >= level
};

struct BootstrapResult {
  double level = 0.95;
  std::size_t iterations = 0;
  std::vector<OptionInterval> options;
  std::vector<DominanceVerdict> verdicts;  // every ordered pair
};

inline constexpr std::size_t kDefaultBootstrapIterations = 10000;

// Resamples the votes with replacement using std::mt19937_64(seed); an
// index is floor(u * N) with u = (draw >> 11) * 2^-53. Percentile CIs.
// Throws DomainError for no votes, PreconditionError for < 1000 iterations.
BootstrapResult bootstrap_preference(std::span<const std::size_t> first_choice_counts, double level,
                                     std::size_t iterations = kDefaultBootstrapIterations,
                                     std::uint64_t seed = 0);

// Special functions, exposed for tests.
double regularized_beta(double x, double a, double b);
double regularized_gamma_q(double a, double x);
double f_sf(double f, double df1, double df2);
double chi2_sf(double x, double df);

// The value at three decimals ("<0.001" when that is 0.000) followed by
// stars judged on the rounded value: < 0.001 "***", < 0.01 "**", < 0.05 "*".
std::string format_p(double p);
int significance_stars(double p);

struct MeasureTable {
  std::string measure;
  std::vector<SummaryGroup> groups;
};

// Delimited text, comma, semicolon or tab. Header is either
// "label,n,mean,sd" or "measure,label,n,mean,sd". Throws SchemaError.
std::vector<MeasureTable> parse_summary_table(std::string_view text);

struct MeasureReport {
  MeasureTable table;
  AnovaResult anova;
  std::vector<TukeyPair> tukey;
};

MeasureReport analyse(const MeasureTable& table);
// One line per measure in the column order
// measure | mu sigma per group | DF | N | F | p | Tukey (significant pairs) | omega^2
std::string format_report(std::span<const MeasureReport> reports);

}  // namespace emojivoice::stats
