#include "emojivoice/eval_stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "emojivoice/error.hpp"

namespace emojivoice::stats {
namespace {

constexpr int kQuadratureNodes = 64;

struct GaussLegendre {
  std::array<double, kQuadratureNodes> x{};
  std::array<double, kQuadratureNodes> w{};

  GaussLegendre() {
    constexpr int n = kQuadratureNodes;
    for (int i = 0; i < n / 2; ++i) {
      double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int iter = 0; iter < 100; ++iter) {
        double p0 = 1.0;
        double p1 = z;
        for (int j = 2; j <= n; ++j) {
          double p2 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p0) / j;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (z * p1 - p0) / (z * z - 1.0);
        double dz = p1 / dp;
        z -= dz;
        if (std::abs(dz) < 1e-15) break;
      }
      x[i] = -z;
      x[n - 1 - i] = z;
      w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
  }

  template <typename F>
  double integrate(double a, double b, F&& f) const {
    double half = 0.5 * (b - a);
    double mid = 0.5 * (b + a);
    double sum = 0.0;
    for (int i = 0; i < kQuadratureNodes; ++i) sum += w[i] * f(mid + half * x[i]);
    return sum * half;
  }
};

const GaussLegendre& gauss_legendre() {
  static const GaussLegendre rule;
  return rule;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// Probability that the range of k standard normals is below w.
double range_cdf(double w, int k) {
  if (w <= 0.0) return 0.0;
  const double lo = -8.5;
  const double hi = 8.5;
  double r = k * gauss_legendre().integrate(lo, hi, [&](double z) {
    double inner = normal_cdf(z) - normal_cdf(z - w);
    return normal_pdf(z) * std::pow(std::max(inner, 0.0), k - 1);
  });
  return std::clamp(r, 0.0, 1.0);
}

// Lentz continued fraction for the incomplete beta.
double beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 1000; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

void check_group(const SummaryGroup& g) {
  if (g.n < 2) throw PreconditionError(fmt::format("group '{}' needs n >= 2", g.label));
  if (!std::isfinite(g.mean) || !std::isfinite(g.sd) || g.sd < 0.0)
    throw PreconditionError(fmt::format("group '{}' has invalid mean or sd", g.label));
}

AnovaResult finish_anova(double ssb, double ssw, int dfb, int dfw) {
  AnovaResult r;
  r.df_between = dfb;
  r.df_within = dfw;
  r.ss_between = ssb;
  r.ss_within = ssw;
  r.ms_within = ssw / dfw;
  if (r.ms_within <= 0.0) {
    if (ssb <= 0.0) throw DomainError("F undefined: every group is constant with equal means");
    r.f_stat = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.omega_sq = 1.0;
    return r;
  }
  r.f_stat = (ssb / dfb) / r.ms_within;
  r.p_value = f_sf(r.f_stat, dfb, dfw);
  r.omega_sq = (ssb - dfb * r.ms_within) / (ssb + ssw + r.ms_within);
  return r;
}

std::vector<std::string> split_fields(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    std::string_view f = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t' || f.front() == '"')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r' || f.back() == '"'))
      f.remove_suffix(1);
    out.emplace_back(f);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double parse_number(const std::string& field, std::size_t line_no) {
  try {
    std::size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw SchemaError(fmt::format("line {}: '{}' is not a number", line_no, field));
  }
}

std::string initial(const std::string& label) {
  return label.empty() ? std::string("?") : std::string(1, label.front());
}

}  // namespace

double regularized_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw DomainError("incomplete gamma needs a > 0");
  if (x <= 0.0) return 1.0;
  double ln_front = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    // series for P
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < 10000; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return std::clamp(1.0 - sum * std::exp(ln_front), 0.0, 1.0);
  }
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::clamp(std::exp(ln_front) * h, 0.0, 1.0);
}

double f_sf(double f, double df1, double df2) {
  if (!(f > 0.0)) return 1.0;
  if (std::isinf(f)) return 0.0;
  return regularized_beta(df2 / (df2 + df1 * f), 0.5 * df2, 0.5 * df1);
}

double chi2_sf(double x, double df) { return regularized_gamma_q(0.5 * df, 0.5 * x); }

double studentized_range_cdf(double q, int k, double df) {
  if (k < 2) throw PreconditionError("studentized range needs k >= 2");
  if (!(df > 0.0)) throw PreconditionError("studentized range needs df > 0");
  if (!(q > 0.0)) return 0.0;
  // s = sqrt(chi2_df / df); integrate its density against the range CDF at q*s.
  double c = 1.0 / std::sqrt(2.0 * df);
  double lo = std::max(0.0, 1.0 - 10.0 * c);
  double hi = 1.0 + 14.0 * c + 2.0;
  double half = 0.5 * df;
  double ln_norm = half * std::log(df) - std::lgamma(half) - (half - 1.0) * std::log(2.0);
  auto density = [&](double s) {
    if (s <= 0.0) return 0.0;
    return std::exp(ln_norm + (df - 1.0) * std::log(s) - half * s * s);
  };
  // Two panels around the bulk of the density keep the nodes dense where it matters.
  double split = std::min(hi, 1.0 + 4.0 * c);
  const auto& rule = gauss_legendre();
  double total = rule.integrate(lo, split, [&](double s) { return density(s) * range_cdf(q * s, k); }) +
                 rule.integrate(split, hi, [&](double s) { return density(s) * range_cdf(q * s, k); });
  return std::clamp(total, 0.0, 1.0);
}

double studentized_range_sf(double q, int k, double df) {
  return std::clamp(1.0 - studentized_range_cdf(q, k, df), 0.0, 1.0);
}

AnovaResult anova_from_summary(std::span<const SummaryGroup> groups) {
  if (groups.size() < 2) throw PreconditionError("ANOVA needs at least two groups");
  double total_n = 0.0;
  double weighted = 0.0;
  for (const auto& g : groups) {
    check_group(g);
    total_n += static_cast<double>(g.n);
    weighted += static_cast<double>(g.n) * g.mean;
  }
  double grand = weighted / total_n;
  double ssb = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    ssb += static_cast<double>(g.n) * (g.mean - grand) * (g.mean - grand);
    ssw += static_cast<double>(g.n - 1) * g.sd * g.sd;
  }
  int k = static_cast<int>(groups.size());
  return finish_anova(ssb, ssw, k - 1, static_cast<int>(total_n) - k);
}

AnovaResult anova_from_raw(std::span<const std::vector<double>> groups) {
  if (groups.size() < 2) throw PreconditionError("ANOVA needs at least two groups");
  double sum = 0.0;
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw PreconditionError("every group needs at least two observations");
    for (double v : g) sum += v;
    total += g.size();
  }
  double grand = sum / static_cast<double>(total);
  double sst = 0.0;
  double ssw = 0.0;
  for (const auto& g : groups) {
    double m = 0.0;
    for (double v : g) m += v;
    m /= static_cast<double>(g.size());
    for (double v : g) {
      sst += (v - grand) * (v - grand);
      ssw += (v - m) * (v - m);
    }
  }
  int k = static_cast<int>(groups.size());
  return finish_anova(sst - ssw, ssw, k - 1, static_cast<int>(total) - k);
}

SummaryGroup summarize(std::string label, std::span<const double> values) {
  if (values.size() < 2) throw PreconditionError("summary needs at least two values");
  double m = 0.0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return SummaryGroup{std::move(label), values.size(), m, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

std::vector<TukeyPair> tukey_hsd(std::span<const SummaryGroup> groups, double ms_within, int df_within) {
  if (groups.size() < 2) throw PreconditionError("Tukey HSD needs at least two groups");
  if (!(ms_within > 0.0)) throw PreconditionError("Tukey HSD needs ms_within > 0");
  if (df_within < 1) throw PreconditionError("Tukey HSD needs df_within >= 1");
  for (const auto& g : groups) {
    check_group(g);
    if (g.n != groups.front().n) throw UnsupportedDesignError("Tukey HSD here supports equal group sizes only");
  }
  int k = static_cast<int>(groups.size());
  double se = std::sqrt(ms_within / static_cast<double>(groups.front().n));
  std::vector<TukeyPair> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    for (std::size_t j = i + 1; j < groups.size(); ++j) {
      const auto* hi = &groups[i];
      const auto* lo = &groups[j];
      if (lo->mean > hi->mean) std::swap(hi, lo);
      TukeyPair p;
      p.group_a = hi->label;
      p.group_b = lo->label;
      p.mean_diff = hi->mean - lo->mean;
      p.q_stat = p.mean_diff / se;
      p.p_value = p.q_stat == 0.0 ? 1.0 : studentized_range_sf(p.q_stat, k, df_within);
      out.push_back(std::move(p));
    }
  }
  return out;
}

ChiSquareResult chisq_gof(std::span<const std::size_t> observed, std::span<const double> expected_proportions) {
  if (observed.size() != expected_proportions.size())
    throw PreconditionError("observed and expected have different lengths");
  if (observed.size() < 2) throw PreconditionError("goodness of fit needs at least two categories");
  double total = 0.0;
  double mass = 0.0;
  for (auto o : observed) total += static_cast<double>(o);
  for (double p : expected_proportions) {
    if (!std::isfinite(p) || p < 0.0) throw DomainError("expected proportions must be finite and non-negative");
    mass += p;
  }
  if (total <= 0.0 || mass <= 0.0) throw DomainError("expected counts are zero");
  ChiSquareResult r;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    double e = total * expected_proportions[i] / mass;
    if (e <= 0.0) throw DomainError(fmt::format("expected count for category {} is zero", i));
    double d = static_cast<double>(observed[i]) - e;
    r.chi2 += d * d / e;
  }
  r.df = static_cast<int>(observed.size()) - 1;
  r.p_value = chi2_sf(r.chi2, r.df);
  return r;
}

BootstrapResult bootstrap_preference(std::span<const std::size_t> counts, double level, std::size_t iterations,
                                     std::uint64_t seed) {
  std::size_t votes = 0;
  for (auto c : counts) votes += c;
  if (counts.empty() || votes == 0) throw DomainError("no preference votes");
  if (iterations < 1000) throw PreconditionError("bootstrap needs at least 1000 iterations");
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("level must lie in (0, 1)");

  const std::size_t k = counts.size();
  std::vector<std::size_t> vote_option;
  vote_option.reserve(votes);
  for (std::size_t i = 0; i < k; ++i) vote_option.insert(vote_option.end(), counts[i], i);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> shares(k, std::vector<double>(iterations));
  std::vector<std::size_t> wins(k * k, 0);
  std::vector<std::size_t> resampled(k);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(resampled.begin(), resampled.end(), 0);
    for (std::size_t v = 0; v < votes; ++v) {
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      auto idx = std::min(static_cast<std::size_t>(u * static_cast<double>(votes)), votes - 1);
      ++resampled[vote_option[idx]];
    }
    for (std::size_t a = 0; a < k; ++a) {
      shares[a][it] = static_cast<double>(resampled[a]) / static_cast<double>(votes);
      for (std::size_t b = 0; b < k; ++b)
        if (a != b && resampled[a] > resampled[b]) ++wins[a * k + b];
    }
  }

  auto quantile = [](std::vector<double>& v, double q) {
    std::sort(v.begin(), v.end());
    double pos = q * static_cast<double>(v.size() - 1);
    auto i = static_cast<std::size_t>(std::floor(pos));
    double frac = pos - static_cast<double>(i);
    if (i + 1 >= v.size()) return v.back();
    return v[i] + frac * (v[i + 1] - v[i]);
  };

  BootstrapResult r;
  r.level = level;
  r.iterations = iterations;
  double tail = 0.5 * (1.0 - level);
  for (std::size_t a = 0; a < k; ++a) {
    OptionInterval o;
    o.option = a;
    o.count = counts[a];
    o.share = static_cast<double>(counts[a]) / static_cast<double>(votes);
    o.ci_low = quantile(shares[a], tail);
    o.ci_high = quantile(shares[a], 1.0 - tail);
    r.options.push_back(o);
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      if (a == b) continue;
      DominanceVerdict d;
      d.winner = a;
      d.loser = b;
      d.support = static_cast<double>(wins[a * k + b]) / static_cast<double>(iterations);
      d.dominant = d.support >= level;
      r.verdicts.push_back(d);
    }
  }
  return r;
}

std::string format_p(double p) {
  double rounded = std::round(p * 1000.0) / 1000.0;
  std::string text = rounded < 0.001 ? std::string("<0.001") : fmt::format("{:.3f}", rounded);
  return text + std::string(static_cast<std::size_t>(significance_stars(p)), '*');
}

int significance_stars(double p) {
  double rounded = std::round(p * 1000.0) / 1000.0;
  if (rounded < 0.001) return 3;
  if (rounded < 0.01) return 2;
  if (rounded < 0.05) return 1;
  return 0;
}

std::vector<MeasureTable> parse_summary_table(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    lines.push_back(line);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }

  std::vector<MeasureTable> tables;
  char delim = 0;
  bool has_measure = false;
  bool header_seen = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::string_view line = lines[i];
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    std::size_t line_no = i + 1;
    if (!header_seen) {
      for (char c : {'\t', ';', ','}) {
        if (line.find(c) != std::string_view::npos) {
          delim = c;
          break;
        }
      }
      if (delim == 0) throw SchemaError(fmt::format("line {}: no delimiter in header", line_no));
      auto head = split_fields(line, delim);
      for (auto& h : head) h = lower(h);
      if (head == std::vector<std::string>{"label", "n", "mean", "sd"}) {
        has_measure = false;
      } else if (head == std::vector<std::string>{"measure", "label", "n", "mean", "sd"}) {
        has_measure = true;
      } else {
        throw SchemaError(fmt::format("line {}: header must be label,n,mean,sd or measure,label,n,mean,sd", line_no));
      }
      header_seen = true;
      continue;
    }
    auto f = split_fields(line, delim);
    std::size_t want = has_measure ? 5 : 4;
    if (f.size() != want) throw SchemaError(fmt::format("line {}: expected {} fields, got {}", line_no, want, f.size()));
    std::size_t o = has_measure ? 1 : 0;
    std::string measure = has_measure ? f[0] : std::string();
    SummaryGroup g;
    g.label = f[o];
    if (g.label.empty()) throw SchemaError(fmt::format("line {}: empty label", line_no));
    double n = parse_number(f[o + 1], line_no);
    if (n < 2.0 || n != std::floor(n)) throw SchemaError(fmt::format("line {}: n must be an integer >= 2", line_no));
    g.n = static_cast<std::size_t>(n);
    g.mean = parse_number(f[o + 2], line_no);
    g.sd = parse_number(f[o + 3], line_no);
    if (!std::isfinite(g.mean) || !std::isfinite(g.sd) || g.sd < 0.0)
      throw SchemaError(fmt::format("line {}: mean and sd must be finite, sd >= 0", line_no));
    auto it = std::find_if(tables.begin(), tables.end(), [&](const MeasureTable& t) { return t.measure == measure; });
    if (it == tables.end()) {
      tables.push_back(MeasureTable{measure, {}});
      it = std::prev(tables.end());
    }
    it->groups.push_back(std::move(g));
  }
  if (!header_seen) throw SchemaError("summary table is empty");
  for (const auto& t : tables)
    if (t.groups.size() < 2)
      throw SchemaError(fmt::format("measure '{}' has fewer than two groups", t.measure));
  if (tables.empty()) throw SchemaError("summary table has no rows");
  return tables;
}

MeasureReport analyse(const MeasureTable& table) {
  MeasureReport r;
  r.table = table;
  r.anova = anova_from_summary(table.groups);
  r.tukey = tukey_hsd(table.groups, r.anova.ms_within, r.anova.df_within);
  return r;
}

std::string format_report(std::span<const MeasureReport> reports) {
  std::ostringstream out;
  for (const auto& r : reports) {
    std::string line = r.table.measure.empty() ? std::string("-") : r.table.measure;
    for (const auto& g : r.table.groups) line += fmt::format(" | {} {:.2f} {:.2f}", g.label, g.mean, g.sd);
    line += fmt::format(" | DF {} | N {} | F {:.2f} | p {}", r.anova.df_between, r.table.groups.front().n,
                        r.anova.f_stat, format_p(r.anova.p_value));
    std::string tukey;
    for (const auto& p : r.tukey) {
      if (significance_stars(p.p_value) == 0) continue;
      if (!tukey.empty()) tukey += ", ";
      tukey += fmt::format("{}({}-{})", format_p(p.p_value), initial(p.group_a), initial(p.group_b));
    }
    line += " | Tukey " + (tukey.empty() ? std::string("none") : tukey);
    line += fmt::format(" | omega^2 {:.2f}", r.anova.omega_sq);
    out << line << '\n';
  }
  return out.str();
}

}  // namespace emojivoice::stats
