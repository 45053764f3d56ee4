#include "core/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "core/errors.hpp"
#include "core/internal.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace nsum {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return substream(seed, tag)();
}

MonteCarloBias summarize(std::span<const double> estimates, double truth) {
  const std::size_t n = estimates.size();
  long double mean = 0.0L;
  for (double v : estimates) mean += v;
  mean /= static_cast<long double>(n);
  long double ss = 0.0L;
  for (double v : estimates) {
    const long double diff = v - mean;
    ss += diff * diff;
  }
  const long double sd = n > 1 ? std::sqrt(ss / static_cast<long double>(n - 1)) : 0.0L;
  MonteCarloBias result;
  result.mean_bias = static_cast<double>(mean - static_cast<long double>(truth));
  result.std_error = static_cast<double>(sd / std::sqrt(static_cast<long double>(n)));
  return result;
}

struct GammaSums {
  long double s1 = 0.0L;  // sum d
  long double s2 = 0.0L;  // sum d^2
  long double t1 = 0.0L;  // sum d*g
  long double t2 = 0.0L;  // sum d^2*g
};

GammaSums gamma_sums(std::span<const double> degrees, std::span<const double> g) {
  if (degrees.empty() || degrees.size() != g.size()) {
    throw ValidationError("slope line: degree and g vectors must have equal nonzero length");
  }
  GammaSums sums;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    const long double d = degrees[i];
    sums.s1 += d;
    sums.s2 += d * d;
    sums.t1 += d * g[i];
    sums.t2 += d * d * g[i];
  }
  return sums;
}

}  // namespace

void PopulationTruth::validate() const {
  if (known_mean_degrees.empty() || known_mean_degrees.size() != known_sizes.size()) {
    throw ValidationError("population truth: need matching known mean-degree and size lists");
  }
  for (double d : known_mean_degrees) {
    if (!(d > 0.0)) throw ValidationError("population truth: mean degrees must be positive");
  }
  for (std::int64_t s : known_sizes) {
    if (s <= 0) throw ValidationError("population truth: sizes must be positive");
  }
  if (!(hidden_mean_degree > 0.0) || !(frame_mean_degree > 0.0)) {
    throw ValidationError("population truth: mean degrees must be positive");
  }
  if (hidden_size <= 0 || total_population <= 0) {
    throw ValidationError("population truth: sizes must be positive");
  }
}

PopulationTruth population_truth(const SimulatedWorld& world, std::size_t hidden) {
  if (world.kind != "sbm") {
    throw ValidationError("population truth: needs an sbm world with group membership");
  }
  const std::size_t groups = world.group_sizes.size();
  if (hidden >= groups) throw ValidationError("population truth: hidden group out of range");

  PopulationTruth truth;
  truth.total_population = world.survey.total_population();
  long double frame_sum = 0.0L;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < groups; ++k) {
    const std::size_t size = static_cast<std::size_t>(world.group_sizes[k]);
    long double sum = 0.0L;
    for (std::size_t i = offset; i < offset + size; ++i) sum += world.true_degrees[i];
    frame_sum += sum;
    const double mean = static_cast<double>(sum / static_cast<long double>(size));
    if (k == hidden) {
      truth.hidden_mean_degree = mean;
      truth.hidden_size = world.group_sizes[k];
    } else {
      truth.known_mean_degrees.push_back(mean);
      truth.known_sizes.push_back(world.group_sizes[k]);
    }
    offset += size;
  }
  truth.frame_mean_degree =
      static_cast<double>(frame_sum / static_cast<long double>(world.true_degrees.size()));
  truth.validate();
  return truth;
}

double bias_known_degrees(const PopulationTruth& truth) {
  truth.validate();
  return static_cast<double>(truth.hidden_size) *
         (truth.hidden_mean_degree / truth.frame_mean_degree - 1.0);
}

double bias_estimated_degrees(const PopulationTruth& truth) {
  truth.validate();
  long double size_sum = 0.0L;
  long double weighted = 0.0L;
  for (std::size_t k = 0; k < truth.known_sizes.size(); ++k) {
    size_sum += truth.known_sizes[k];
    weighted += truth.known_mean_degrees[k] * static_cast<long double>(truth.known_sizes[k]);
  }
  if (!(weighted > 0.0L)) {
    throw ValidationError("sampling bias: size-weighted mean degree must be positive");
  }
  return static_cast<double>(
      truth.hidden_size *
      (static_cast<long double>(truth.hidden_mean_degree) * size_sum / weighted - 1.0L));
}

double bias_fk(std::span<const std::int64_t> degrees, std::span<const double> f_values,
               std::int64_t subpopulation_size) {
  if (degrees.empty() || degrees.size() != f_values.size()) {
    throw ValidationError("reporting bias: degree and f vectors must have equal nonzero length");
  }
  long double degree_sum = 0.0L;
  long double weighted = 0.0L;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    degree_sum += degrees[i];
    weighted += static_cast<long double>(degrees[i]) * f_values[i];
  }
  if (!(degree_sum > 0.0L)) {
    throw ValidationError("reporting bias: degree sum must be positive");
  }
  return static_cast<double>(subpopulation_size * (weighted / degree_sum - 1.0L));
}

double bias_fk(std::span<const std::int64_t> degrees, const BiasProfile& profile, std::size_t k,
               std::int64_t subpopulation_size) {
  return bias_fk(degrees, profile.f(degrees, k), subpopulation_size);
}

// Slope of the line traced by (sum d^2 f / sum d f, sum d / sum d f) as the
// reporting coefficient c varies in f(d) = a + c g(d). Over-reporting by
// high-degree respondents pushes the first coordinate up and the second down,
// so the slope is negative for increasing g.
double gamma1_closed_form(std::span<const double> degrees, std::span<const double> g, double a) {
  if (a == 0.0) throw ValidationError("slope line: intercept a must be nonzero");
  const GammaSums sums = gamma_sums(degrees, g);
  const long double denom =
      static_cast<long double>(a) * (sums.s2 * sums.t1 - sums.s1 * sums.t2);
  if (denom == 0.0L) {
    throw ValidationError("slope line: degenerate g (constant over degrees)");
  }
  return static_cast<double>(sums.s1 * sums.t1 / denom);
}

TwoPointSolve gamma1_two_point(std::span<const double> degrees, std::span<const double> g,
                               double a, double c1, double c2) {
  if (a == 0.0) throw ValidationError("slope line: intercept a must be nonzero");
  if (c1 == c2) throw ValidationError("slope line: need two distinct coefficients");
  const GammaSums sums = gamma_sums(degrees, g);
  const auto point = [&](double c) {
    const long double df = static_cast<long double>(a) * sums.s1 +
                           static_cast<long double>(c) * sums.t1;  // sum d*f
    if (df == 0.0L) throw ValidationError("slope line: coefficient zeroes out sum(d*f)");
    const long double ddf = static_cast<long double>(a) * sums.s2 +
                            static_cast<long double>(c) * sums.t2;  // sum d^2*f
    return std::pair<long double, long double>{ddf / df, sums.s1 / df};  // (x, y)
  };
  const auto [x1, y1] = point(c1);
  const auto [x2, y2] = point(c2);
  if (x1 == x2) {
    throw ValidationError("slope line: coefficient pair gives identical slope expressions");
  }
  TwoPointSolve solve;
  const long double gamma1 = (y2 - y1) / (x2 - x1);
  solve.gamma1 = static_cast<double>(gamma1);
  solve.gamma0 = static_cast<double>(y1 - gamma1 * x1);
  return solve;
}

SrsBiasResult srs_scaleup_bias(const SimulatedWorld& world, std::size_t hidden,
                               std::size_t sample_size, std::size_t replicates,
                               std::uint64_t seed, int threads) {
  const ArdSurvey& survey = world.survey;
  const std::size_t rows = survey.respondents();
  if (static_cast<std::int64_t>(rows) != survey.total_population()) {
    throw ValidationError("sampling bias: world must carry one row per population member");
  }
  if (hidden >= survey.subpopulations()) {
    throw ValidationError("sampling bias: hidden group out of range");
  }
  if (sample_size < 2 || sample_size > rows) {
    throw ValidationError("sampling bias: sample size must lie in [2, population]");
  }
  if (replicates < 2) throw ValidationError("sampling bias: need at least two replicates");

  // Per-member quantities are fixed; only the sample membership is random.
  std::vector<std::int64_t> hidden_column(rows);
  std::vector<std::int64_t> known_row_sum(rows);
  std::int64_t known_size_sum = 0;
  for (std::size_t k = 0; k < survey.subpopulations(); ++k) {
    if (k != hidden) known_size_sum += survey.known_size(k);
  }
  if (known_size_sum <= 0) {
    throw ValidationError("sampling bias: known sizes must sum to a positive value");
  }
  for (std::size_t i = 0; i < rows; ++i) {
    auto row = survey.responses().row(i);
    std::int64_t sum = 0;
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k != hidden) sum += row[k];
    }
    hidden_column[i] = row[hidden];
    known_row_sum[i] = sum;
  }
  const std::int64_t total = survey.total_population();
  const double truth = static_cast<double>(survey.known_size(hidden));

  std::vector<double> known_estimates(replicates);
  std::vector<double> estimated_estimates(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    auto eng = substream(seed, "oracle.srs", r);
    std::vector<std::uint32_t> index(rows);
    std::iota(index.begin(), index.end(), 0u);
    std::int64_t sum_hidden = 0;
    std::int64_t sum_degree = 0;
    std::int64_t sum_known = 0;
    for (std::size_t j = 0; j < sample_size; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, rows - 1);
      std::swap(index[j], index[pick(eng)]);
      const std::size_t i = index[j];
      sum_hidden += hidden_column[i];
      sum_degree += world.true_degrees[i];
      sum_known += known_row_sum[i];
    }
    if (sum_degree <= 0 || sum_known <= 0) {
      throw NumericGuardError("sampling bias: a replicate drew a sample with no ties");
    }
    known_estimates[r] = internal::exact_ratio(total, sum_hidden, sum_degree);
    estimated_estimates[r] = internal::exact_ratio(sum_hidden, known_size_sum, sum_known);
  });

  SrsBiasResult result;
  result.known = summarize(known_estimates, truth);
  result.estimated = summarize(estimated_estimates, truth);
  return result;
}

std::vector<MonteCarloBias> binomial_scaleup_bias(const SimulatedWorld& world,
                                                  std::size_t replicates, std::uint64_t seed,
                                                  int threads, double estimate_scale) {
  if (world.kind != "binomial") {
    throw ValidationError("reporting bias: needs a binomial world");
  }
  if (replicates < 2) throw ValidationError("reporting bias: need at least two replicates");
  const ArdSurvey& survey = world.survey;
  const std::size_t cols = survey.subpopulations();
  const std::size_t rows = survey.respondents();
  std::int64_t degree_sum = 0;
  for (std::int64_t d : world.true_degrees) degree_sum += d;
  if (degree_sum <= 0) throw ValidationError("reporting bias: degree sum must be positive");
  const std::int64_t total = survey.total_population();

  std::vector<double> estimates(cols * replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = substream(seed, "oracle.resample", r)();
    const IntMatrix redraw = resample_responses(world, rep_seed, 1);
    for (std::size_t k = 0; k < cols; ++k) {
      std::int64_t col = 0;
      for (std::size_t i = 0; i < rows; ++i) col += redraw.at(i, k);
      estimates[k * replicates + r] =
          internal::exact_ratio(total, col, degree_sum) * estimate_scale;
    }
  });

  std::vector<MonteCarloBias> result(cols);
  for (std::size_t k = 0; k < cols; ++k) {
    result[k] = summarize(
        std::span<const double>(estimates.data() + k * replicates, replicates),
        static_cast<double>(survey.known_size(k)));
  }
  return result;
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::ordered_json j;
  j["all_passed"] = all_passed;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const VerifyCheck& check : checks) {
    nlohmann::ordered_json c;
    c["name"] = check.name;
    c["passed"] = check.passed;
    c["observed"] = check.observed;
    c["expected"] = check.expected;
    c["tolerance"] = check.tolerance;
    if (!check.detail.empty()) c["detail"] = check.detail;
    list.push_back(std::move(c));
  }
  j["checks"] = std::move(list);
  return j;
}

VerifyReport run_verification(const VerifyOptions& options) {
  VerifyReport report;
  const auto add_check = [&](std::string name, double observed, double expected,
                             double tolerance, std::string detail) {
    VerifyCheck check;
    check.name = std::move(name);
    check.observed = observed;
    check.expected = expected;
    check.tolerance = tolerance;
    check.detail = std::move(detail);
    check.passed = std::isfinite(observed) && std::abs(observed - expected) <= tolerance;
    report.checks.push_back(std::move(check));
  };
  // Small samples inflate the error of the ratio-of-means approximation the
  // bias formulas rest on, so quick mode doubles the sampling tolerances.
  const double sampling_scale = options.quick ? 2.0 : 1.0;

  // Sampling-only bias of both basic estimators on a fixed population.
  {
    SbmConfig config;
    config.nodes = options.quick ? 2000 : 4000;
    config.groups = 8;
    config.seed = derive_seed(options.seed, "verify.population");
    const std::size_t sample = options.quick ? 100 : 400;
    const std::size_t replicates = options.quick ? 500 : 2000;
    const SimulatedWorld world = simulate_sbm(config, options.threads);
    const std::size_t hidden = config.groups - 1;
    const PopulationTruth truth = population_truth(world, hidden);
    const SrsBiasResult srs =
        srs_scaleup_bias(world, hidden, sample, replicates,
                         derive_seed(options.seed, "verify.srs"), options.threads);
    add_check("sampling-bias.known-degrees", srs.known.mean_bias, bias_known_degrees(truth),
              2.0 * srs.known.std_error * sampling_scale,
              "group " + world.survey.label(hidden) + ", " + std::to_string(replicates) +
                  " samples of " + std::to_string(sample));
    add_check("sampling-bias.estimated-degrees", srs.estimated.mean_bias,
              bias_estimated_degrees(truth), 2.0 * srs.estimated.std_error * sampling_scale,
              "group " + world.survey.label(hidden) + ", " + std::to_string(replicates) +
                  " samples of " + std::to_string(sample));
  }

  // Reporting bias of the known-degree estimator under redrawn responses.
  BinomialSimConfig binomial;
  binomial.respondents = options.quick ? 500 : 2000;
  binomial.subpopulations = options.quick ? 8 : 10;
  binomial.total_population = 1'000'000;
  binomial.size_lo = 1e3;
  binomial.size_hi = 1e5;
  binomial.seed = derive_seed(options.seed, "verify.binomial");
  const SimulatedWorld world = simulate_binomial(binomial, options.threads);
  {
    const std::size_t replicates = options.quick ? 400 : 1500;
    const std::vector<MonteCarloBias> mc =
        binomial_scaleup_bias(world, replicates, derive_seed(options.seed, "verify.resample"),
                              options.threads, options.estimate_scale);
    const BiasProfile profile = world.profile();
    for (std::size_t k = 0; k < world.survey.subpopulations(); ++k) {
      add_check("reporting-bias." + world.survey.label(k), mc[k].mean_bias,
                bias_fk(world.true_degrees, profile, k, world.survey.known_size(k)),
                3.0 * mc[k].std_error * sampling_scale,
                std::to_string(replicates) + " response redraws");
    }
  }

  // With all coefficients zero the reporting model loses its degree
  // dependence, so scaled responses should average to the population share.
  {
    BinomialSimConfig zero = binomial;
    zero.coefficients = std::vector<double>(zero.subpopulations, 0.0);
    zero.seed = derive_seed(options.seed, "verify.zero");
    const SimulatedWorld flat = simulate_binomial(zero, options.threads);
    double worst_z = -1.0;
    VerifyCheck worst;
    for (std::size_t k = 0; k < flat.survey.subpopulations(); ++k) {
      long double mean = 0.0L;
      for (std::size_t i = 0; i < flat.survey.respondents(); ++i) {
        mean += static_cast<long double>(flat.survey.responses().at(i, k)) /
                static_cast<long double>(flat.true_degrees[i]);
      }
      mean /= static_cast<long double>(flat.survey.respondents());
      long double ss = 0.0L;
      for (std::size_t i = 0; i < flat.survey.respondents(); ++i) {
        const long double diff = static_cast<long double>(flat.survey.responses().at(i, k)) /
                                     static_cast<long double>(flat.true_degrees[i]) -
                                 mean;
        ss += diff * diff;
      }
      const double se = static_cast<double>(
          std::sqrt(ss / static_cast<long double>(flat.survey.respondents() - 1)) /
          std::sqrt(static_cast<long double>(flat.survey.respondents())));
      const double share = static_cast<double>(flat.survey.known_size(k)) /
                           static_cast<double>(flat.survey.total_population());
      const double z = std::abs(static_cast<double>(mean) - share) / se;
      if (z > worst_z) {
        worst_z = z;
        worst.observed = static_cast<double>(mean);
        worst.expected = share;
        worst.tolerance = 3.0 * se;
        worst.detail = "largest deviation: " + flat.survey.label(k);
      }
    }
    add_check("flat-profile-share", worst.observed, worst.expected, worst.tolerance,
              worst.detail);
  }

  // The finite-difference line through any two coefficient points must match
  // the closed form; this is exact math, so no sampling slack applies.
  {
    const std::vector<double> degrees = world.true_degrees_real();
    const std::vector<double> g = centered_power(world.true_degrees, 2.0);
    const double a = 1.0;
    const double closed = gamma1_closed_form(degrees, g, a);
    std::int64_t max_size = 0;
    for (std::size_t k = 0; k < world.survey.subpopulations(); ++k) {
      max_size = std::max(max_size, world.survey.known_size(k));
    }
    const double bound = coefficient_bound(g, a, max_size, world.survey.total_population());
    auto eng = substream(options.seed, "verify.pairs");
    std::uniform_real_distribution<double> unif(-bound, bound);
    double max_rel = 0.0;
    double lo = closed;
    double hi = closed;
    const int pairs = 20;
    for (int p = 0; p < pairs; ++p) {
      double c1 = 0.0;
      double c2 = 0.0;
      // Nearly equal coefficients make the finite difference ill-conditioned
      // without testing anything extra, so keep the pair separated.
      do {
        c1 = unif(eng);
        c2 = unif(eng);
      } while (std::abs(c1 - c2) < 0.2 * bound);
      const TwoPointSolve solve = gamma1_two_point(degrees, g, a, c1, c2);
      max_rel = std::max(max_rel, std::abs(solve.gamma1 - closed) / std::abs(closed));
      lo = std::min(lo, solve.gamma1);
      hi = std::max(hi, solve.gamma1);
    }
    add_check("slope-line.two-point", max_rel, 0.0, 1e-10,
              std::to_string(pairs) + " coefficient pairs, relative to closed form");
    add_check("slope-line.pair-spread", (hi - lo) / std::abs(closed), 0.0, 1e-10,
              "spread of fitted slopes across pairs");
  }

  report.all_passed = std::all_of(report.checks.begin(), report.checks.end(),
                                  [](const VerifyCheck& c) { return c.passed; });
  return report;
}

}  // namespace nsum
