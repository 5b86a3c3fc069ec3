#include <gtest/gtest.h>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <fstream>
#include <random>

#include "emojivoice/error.hpp"
#include "emojivoice/eval_stats.hpp"
#include "oracles.hpp"

using namespace emojivoice;
using namespace emojivoice::stats;
namespace bm = boost::math;

namespace {

double boost_f_sf(double f, double d1, double d2) { return bm::cdf(bm::complement(bm::fisher_f(d1, d2), f)); }

// Textbook one-way ANOVA on raw observations.
struct RawAnova {
  double f;
  double ms_within;
  double omega_sq;
  int df_b;
  int df_w;
};
RawAnova raw_anova(const std::vector<std::vector<double>>& groups) {
  double total = 0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    for (double v : g) {
      total += v;
      ++n;
    }
  }
  double grand = total / static_cast<double>(n);
  double ssb = 0, ssw = 0;
  for (const auto& g : groups) {
    double m = 0;
    for (double v : g) m += v;
    m /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (m - grand) * (m - grand);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  int k = static_cast<int>(groups.size());
  int dfb = k - 1, dfw = static_cast<int>(n) - k;
  double msw = ssw / dfw;
  double f = (ssb / dfb) / msw;
  double omega = (ssb - dfb * msw) / (ssb + ssw + msw);
  return {f, msw, omega, dfb, dfw};
}

std::vector<std::vector<double>> random_groups(std::uint64_t seed, std::vector<std::size_t> sizes,
                                               std::vector<double> means) {
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> out;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    std::normal_distribution<double> d(means[g], 2.0);
    std::vector<double> v;
    for (std::size_t i = 0; i < sizes[g]; ++i) v.push_back(d(rng));
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<MeasureTable> load_table(const std::string& name) {
  std::ifstream in(oracle::source_path("data/tables/" + name));
  std::string text((std::istreambuf_iterator<char>(in)), {});
  return parse_summary_table(text);
}

}  // namespace

TEST(SpecialFunctions, AgreeWithBoostMath) {
  for (double f : {0.1, 0.9, 1.0, 2.5, 6.24, 13.9, 70.51}) {
    for (auto [d1, d2] : {std::pair{2.0, 69.0}, {1.0, 10.0}, {4.0, 120.0}, {7.5, 3.0}}) {
      double want = boost_f_sf(f, d1, d2);
      EXPECT_NEAR(f_sf(f, d1, d2), want, 1e-10 + 1e-8 * want) << f << " " << d1 << " " << d2;
    }
  }
  for (double x : {0.01, 0.5, 2.0, 5.99, 27.0, 80.0}) {
    for (double df : {1.0, 2.0, 5.0, 30.0}) {
      double want = bm::cdf(bm::complement(bm::chi_squared(df), x));
      EXPECT_NEAR(chi2_sf(x, df), want, 1e-10 + 1e-8 * want) << x << " " << df;
    }
  }
  EXPECT_NEAR(regularized_beta(0.3, 2.0, 5.0), bm::ibeta(2.0, 5.0, 0.3), 1e-12);
  EXPECT_NEAR(regularized_gamma_q(3.0, 2.0), bm::gamma_q(3.0, 2.0), 1e-12);
}

TEST(Anova, SummaryMatchesRawAndTextbookOracle) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto groups = random_groups(seed, {12, 9, 15, 7}, {5.0, 5.5, 6.0, 4.0 + 0.1 * seed});
    std::vector<SummaryGroup> summaries;
    for (std::size_t g = 0; g < groups.size(); ++g) summaries.push_back(summarize("g" + std::to_string(g), groups[g]));
    AnovaResult s = anova_from_summary(summaries);
    AnovaResult r = anova_from_raw(groups);
    RawAnova o = raw_anova(groups);
    EXPECT_NEAR(s.f_stat, r.f_stat, 1e-9 * std::max(1.0, r.f_stat));
    EXPECT_NEAR(s.f_stat, o.f, 1e-9 * std::max(1.0, o.f));
    EXPECT_NEAR(s.omega_sq, o.omega_sq, 1e-9);
    EXPECT_NEAR(s.ms_within, o.ms_within, 1e-9);
    EXPECT_EQ(s.df_between, o.df_b);
    EXPECT_EQ(s.df_within, o.df_w);
    EXPECT_NEAR(s.p_value, boost_f_sf(o.f, o.df_b, o.df_w), 1e-9);
    if (s.f_stat <= 1.0) {
      EXPECT_LE(s.omega_sq, 0.0);
    }
  }
}

TEST(Anova, UnderTheNullPValuesAreRoughlyUniform) {
  int below = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    auto groups = random_groups(1000 + t, {10, 10, 10}, {3.0, 3.0, 3.0});
    if (anova_from_raw(groups).p_value < 0.05) ++below;
  }
  // Binomial(400, 0.05): mean 20, sd about 4.4.
  EXPECT_GT(below, 5);
  EXPECT_LT(below, 38);
}

TEST(Anova, Errors) {
  std::vector<SummaryGroup> one = {{"a", 5, 1.0, 1.0}};
  EXPECT_THROW(anova_from_summary(one), PreconditionError);
  std::vector<SummaryGroup> small = {{"a", 1, 1.0, 1.0}, {"b", 5, 1.0, 1.0}};
  EXPECT_THROW(anova_from_summary(small), PreconditionError);
  std::vector<SummaryGroup> negative = {{"a", 5, 1.0, -1.0}, {"b", 5, 1.0, 1.0}};
  EXPECT_THROW(anova_from_summary(negative), PreconditionError);
  std::vector<SummaryGroup> flat = {{"a", 5, 1.0, 0.0}, {"b", 5, 1.0, 0.0}};
  EXPECT_THROW(anova_from_summary(flat), DomainError);
}

TEST(StudentizedRange, TwoMeansReduceToStudentsT) {
  for (double df : {5.0, 12.0, 46.0, 200.0}) {
    for (double q : {0.5, 1.5, 2.8, 4.0, 6.0}) {
      double t = q / std::sqrt(2.0);
      double want = 2.0 * bm::cdf(bm::complement(bm::students_t(df), t));
      EXPECT_NEAR(studentized_range_sf(q, 2, df), want, 0.002) << q << " " << df;
    }
  }
}

TEST(StudentizedRange, MatchesFrozenReferenceValues) {
  // Reference survival values from an independent high-precision
  // implementation, frozen here.
  struct Case {
    double q;
    int k;
    double df;
    double sf;
  };
  const Case cases[] = {{3.5, 3, 27, 0.050490680599995286},  {2.0, 3, 57, 0.3404438886262924},
                        {4.2, 3, 57, 0.0119363980817635},    {5.0, 4, 20, 0.010287534594015546},
                        {3.0, 5, 60, 0.224678353361905},     {1.5, 3, 10, 0.5580481726882656},
                        {6.0, 3, 87, 0.00016140286581289853}, {2.5, 6, 120, 0.4903841938578417}};
  for (const auto& c : cases) {
    EXPECT_NEAR(studentized_range_sf(c.q, c.k, c.df), c.sf, 0.002) << c.q << " " << c.k << " " << c.df;
    EXPECT_NEAR(studentized_range_cdf(c.q, c.k, c.df) + studentized_range_sf(c.q, c.k, c.df), 1.0, 1e-12);
  }
}

TEST(StudentizedRange, MonotoneInQ) {
  double prev = 0.0;
  for (double q = 0.0; q <= 8.0; q += 0.25) {
    double c = studentized_range_cdf(q, 4, 30);
    EXPECT_GE(c, prev - 1e-9) << q;
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
    prev = c;
  }
  EXPECT_NEAR(studentized_range_cdf(0.0, 3, 30), 0.0, 1e-9);
}

TEST(Tukey, PairsAndTwoGroupTTest) {
  auto groups = random_groups(77, {15, 15}, {4.0, 5.2});
  std::vector<SummaryGroup> s = {summarize("A", groups[0]), summarize("B", groups[1])};
  AnovaResult a = anova_from_summary(s);
  auto pairs = tukey_hsd(s, a.ms_within, a.df_within);
  ASSERT_EQ(pairs.size(), 1u);
  double diff = std::abs(s[0].mean - s[1].mean);
  double t = diff / std::sqrt(a.ms_within * (2.0 / 15.0));
  double want = 2.0 * bm::cdf(bm::complement(bm::students_t(a.df_within), t));
  EXPECT_NEAR(pairs[0].p_value, want, 0.002);
  EXPECT_NEAR(pairs[0].q_stat, t * std::sqrt(2.0), 1e-9);
  EXPECT_GE(pairs[0].mean_diff, 0.0);

  std::vector<SummaryGroup> three = {{"Baseline", 24, 1.71, 1.0}, {"Pleasant", 24, 5.71, 2.03}, {"Emoji", 24, 7.42, 1.91}};
  AnovaResult a3 = anova_from_summary(three);
  auto p3 = tukey_hsd(three, a3.ms_within, a3.df_within);
  ASSERT_EQ(p3.size(), 3u);
  EXPECT_EQ(p3[0].group_a, "Pleasant");
  EXPECT_EQ(p3[0].group_b, "Baseline");
  EXPECT_EQ(p3[2].group_a, "Emoji");
  EXPECT_EQ(p3[2].group_b, "Pleasant");

  std::vector<SummaryGroup> unequal = {{"a", 10, 1.0, 1.0}, {"b", 12, 2.0, 1.0}};
  EXPECT_THROW(tukey_hsd(unequal, 1.0, 20), UnsupportedDesignError);
}

TEST(ChiSquare, MatchesBoostAndHandComputation) {
  std::vector<std::size_t> obs = {20, 2, 2};
  std::vector<double> props = {1, 1, 1};
  ChiSquareResult r = chisq_gof(obs, props);
  EXPECT_NEAR(r.chi2, 27.0, 1e-12);  // expected 8 each: (144 + 36 + 36) / 8
  EXPECT_EQ(r.df, 2);
  EXPECT_NEAR(r.p_value, bm::cdf(bm::complement(bm::chi_squared(2), 27.0)), 1e-12);

  std::vector<std::size_t> obs2 = {30, 10};
  std::vector<double> props2 = {0.6, 0.4};
  auto r2 = chisq_gof(obs2, props2);
  EXPECT_NEAR(r2.chi2, 36.0 / 24.0 + 36.0 / 16.0, 1e-12);
  std::vector<double> zero = {1.0, 0.0};
  EXPECT_THROW(chisq_gof(obs2, zero), DomainError);
}

TEST(Bootstrap, DeterministicForASeed) {
  std::vector<std::size_t> counts = {12, 7, 5};
  auto a = bootstrap_preference(counts, 0.95, 2000, 42);
  auto b = bootstrap_preference(counts, 0.95, 2000, 42);
  ASSERT_EQ(a.options.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.options[i].ci_low, b.options[i].ci_low);
    EXPECT_EQ(a.options[i].ci_high, b.options[i].ci_high);
    EXPECT_LE(a.options[i].ci_low, a.options[i].share);
    EXPECT_GE(a.options[i].ci_high, a.options[i].share);
  }
  EXPECT_EQ(a.verdicts.size(), 6u);
  EXPECT_THROW(bootstrap_preference(counts, 0.95, 10, 1), PreconditionError);
  std::vector<std::size_t> none = {0, 0};
  EXPECT_THROW(bootstrap_preference(none, 0.95, 2000, 1), DomainError);
}

TEST(Bootstrap, SupportMatchesExactMultinomialEnumeration) {
  // 24 votes split 8/8/8: each resample is Multinomial(24, 1/3, 1/3, 1/3).
  const int n = 24;
  std::vector<double> logfact(n + 1, 0.0);
  for (int i = 1; i <= n; ++i) logfact[i] = logfact[i - 1] + std::log(i);
  double p_greater = 0.0;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; a + b <= n; ++b) {
      int c = n - a - b;
      double lp = logfact[n] - logfact[a] - logfact[b] - logfact[c] + n * std::log(1.0 / 3.0);
      if (a > b) p_greater += std::exp(lp);
    }
  std::vector<std::size_t> counts = {8, 8, 8};
  auto r = bootstrap_preference(counts, 0.95, 20000, 3);
  for (const auto& v : r.verdicts) {
    EXPECT_NEAR(v.support, p_greater, 0.015) << v.winner << ">" << v.loser;
    EXPECT_FALSE(v.dominant);
  }
  // Marginal share is Binomial(24, 1/3) / 24.
  bm::binomial bin(n, 1.0 / 3.0);
  double lo = bm::quantile(bin, 0.025) / n;
  double hi = bm::quantile(bm::complement(bin, 0.025)) / n;
  for (const auto& o : r.options) {
    EXPECT_NEAR(o.ci_low, lo, 1.0 / n + 1e-9);
    EXPECT_NEAR(o.ci_high, hi, 1.0 / n + 1e-9);
  }
}

TEST(Bootstrap, UnanimousVotesDominate) {
  std::vector<std::size_t> counts = {24, 0, 0};
  auto r = bootstrap_preference(counts, 0.999, 5000, 9);
  int dominant = 0;
  for (const auto& v : r.verdicts) {
    if (v.winner == 0) {
      EXPECT_TRUE(v.dominant);
      EXPECT_DOUBLE_EQ(v.support, 1.0);
      ++dominant;
    } else {
      EXPECT_FALSE(v.dominant);
    }
  }
  EXPECT_EQ(dominant, 2);
  EXPECT_DOUBLE_EQ(r.options[0].ci_low, 1.0);
}

TEST(Formatting, ThreeDecimalsWithStars) {
  EXPECT_EQ(format_p(0.0004), "<0.001***");
  EXPECT_EQ(format_p(0.0012), "0.001**");
  EXPECT_EQ(format_p(0.0026), "0.003**");
  EXPECT_EQ(format_p(0.0462), "0.046*");
  EXPECT_EQ(format_p(0.0496), "0.050");
  EXPECT_EQ(format_p(0.31), "0.310");
  EXPECT_EQ(significance_stars(0.00049), 3);
  EXPECT_EQ(significance_stars(0.0094), 2);
}

TEST(SummaryTable, ParsesShippedTablesAndDelimiters) {
  auto tables = load_table("assistant_ratings.csv");
  ASSERT_EQ(tables.size(), 3u);
  EXPECT_EQ(tables[0].measure, "xMOS");
  ASSERT_EQ(tables[0].groups.size(), 3u);
  EXPECT_EQ(tables[0].groups[2].label, "Emoji");
  EXPECT_DOUBLE_EQ(tables[0].groups[2].mean, 7.42);
  EXPECT_EQ(load_table("storytelling_ratings.csv").size(), 3u);
  EXPECT_EQ(load_table("assistant_xmos.csv").size(), 1u);

  auto semi = parse_summary_table("label;n;mean;sd\nA;10;1.5;0.5\nB;10;2.5;0.5\n");
  ASSERT_EQ(semi.size(), 1u);
  EXPECT_EQ(semi[0].groups.size(), 2u);
  auto tab = parse_summary_table("label\tn\tmean\tsd\nA\t10\t1.5\t0.5\nB\t10\t2.5\t0.5\n");
  EXPECT_EQ(tab[0].groups[1].label, "B");

  EXPECT_THROW(parse_summary_table("name,count\nA,1\n"), SchemaError);
  EXPECT_THROW(parse_summary_table("label,n,mean,sd\nA,ten,1.0,1.0\n"), SchemaError);
  EXPECT_THROW(parse_summary_table(""), SchemaError);
}

TEST(Report, LineLayout) {
  auto tables = load_table("assistant_ratings.csv");
  std::vector<MeasureReport> reports;
  for (const auto& t : tables) reports.push_back(analyse(t));
  EXPECT_NEAR(reports[0].anova.f_stat, 70.51, 0.01);
  std::string text = format_report(reports);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find("xMOS |"), std::string::npos);
  EXPECT_NE(text.find("| DF 2 | N 24 |"), std::string::npos);
  EXPECT_NE(text.find("<0.001***(P-B)"), std::string::npos);
  EXPECT_NE(text.find("0.003**(E-P)"), std::string::npos);
  EXPECT_NE(text.find("omega^2 0.66"), std::string::npos);
}
