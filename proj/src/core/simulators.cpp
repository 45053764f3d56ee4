#include "core/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <utility>

#include "core/errors.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace nsum {

namespace {

std::string padded_label(const char* prefix, std::size_t index, std::size_t count) {
  const std::size_t width = std::to_string(count).size();
  std::string num = std::to_string(index + 1);
  if (num.size() < width) num.insert(0, width - num.size(), '0');
  return prefix + num;
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                         const char* what) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ValidationError(std::string(what) + ": unknown config key \"" + item.key() + "\"");
    }
  }
}

// Per-respondent tie probabilities for one subpopulation. Coefficients chosen
// exactly at the admissible bound can land a hair outside [0, 1] in floating
// point, so a small tolerance is clamped away instead of rejected.
std::vector<double> column_probabilities(std::span<const std::int64_t> degrees,
                                         std::int64_t size, std::int64_t total_population,
                                         double intercept, std::span<const double> g,
                                         double coefficient, std::size_t column) {
  const double base = static_cast<double>(size) / static_cast<double>(total_population);
  std::vector<double> probs(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    double p = base * (intercept + g[i] * coefficient);
    if (p < 0.0 || p > 1.0) {
      constexpr double kSlack = 1e-9;
      if (p < -kSlack || p > 1.0 + kSlack) {
        throw ValidationError("simulate: tie probability " + std::to_string(p) +
                              " for subpopulation " + std::to_string(column + 1) +
                              " falls outside [0, 1]; shrink the coefficient or intercept");
      }
      p = std::clamp(p, 0.0, 1.0);
    }
    probs[i] = p;
  }
  return probs;
}

// Draws one response matrix column per substream so the result does not
// depend on the worker count.
// Counts successes among t Bernoulli(p) trials by skipping failures with
// geometric gaps, at expected cost O(t p + 1). Exact for every p, unlike the
// standard library's rejection sampler whose mean drifts visibly once
// t p reaches a few dozen.
std::int64_t draw_binomial(std::mt19937_64& eng, std::int64_t t, double p) {
  if (t <= 0 || p <= 0.0) return 0;
  if (p >= 1.0) return t;
  if (p > 0.5) return t - draw_binomial(eng, t, 1.0 - p);
  std::geometric_distribution<std::int64_t> gap(p);
  std::int64_t hits = 0;
  std::int64_t pos = 0;
  while (true) {
    pos += gap(eng) + 1;
    if (pos > t) break;
    ++hits;
  }
  return hits;
}

IntMatrix sample_binomial_columns(std::span<const std::int64_t> degrees,
                                  const std::vector<std::vector<double>>& probabilities,
                                  std::uint64_t seed, const char* tag, int threads) {
  const std::size_t n = degrees.size();
  const std::size_t cols = probabilities.size();
  IntMatrix responses(n, cols);
  parallel_for(cols, threads, [&](std::size_t k) {
    auto eng = substream(seed, tag, static_cast<std::uint64_t>(k));
    const auto& p = probabilities[k];
    for (std::size_t i = 0; i < n; ++i) {
      responses.at(i, k) = draw_binomial(eng, degrees[i], p[i]);
    }
  });
  return responses;
}

std::vector<double> resolve_exponents(const BinomialSimConfig& config) {
  std::vector<double> exps(config.subpopulations);
  for (std::size_t k = 0; k < exps.size(); ++k) {
    exps[k] = config.exponents[k % config.exponents.size()];
  }
  return exps;
}

// One centered-power vector per distinct exponent; columns share them.
std::map<double, std::vector<double>> centered_power_cache(std::span<const std::int64_t> degrees,
                                                           std::span<const double> exponents) {
  std::map<double, std::vector<double>> cache;
  for (double p : exponents) {
    if (!cache.contains(p)) cache[p] = centered_power(degrees, p);
  }
  return cache;
}

std::vector<double> resolve_coefficients(const BinomialSimConfig& config,
                                         const std::map<double, std::vector<double>>& g_cache,
                                         std::span<const double> exponents,
                                         std::int64_t max_size) {
  if (config.coefficients) return *config.coefficients;
  // Spread coefficients evenly from -bound to +bound so downward and upward
  // degree bias are equally represented.
  const std::size_t K = config.subpopulations;
  std::vector<double> coeffs(K);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& g = g_cache.at(exponents[k]);
    const double bound =
        coefficient_bound(g, config.intercept, max_size, config.total_population);
    const double t = K == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(k) / (K - 1);
    coeffs[k] = t * bound;
  }
  return coeffs;
}

}  // namespace

void BiasProfile::validate() const {
  if (intercept == 0.0 || !std::isfinite(intercept)) {
    throw ValidationError("bias profile: intercept must be finite and nonzero");
  }
  if (exponents.empty() || exponents.size() != coefficients.size()) {
    throw ValidationError("bias profile: need matching exponent and coefficient lists");
  }
  for (double p : exponents) {
    if (!std::isfinite(p)) throw ValidationError("bias profile: exponents must be finite");
  }
  for (double c : coefficients) {
    if (!std::isfinite(c)) throw ValidationError("bias profile: coefficients must be finite");
  }
}

std::vector<double> BiasProfile::f(std::span<const std::int64_t> degrees, std::size_t k) const {
  validate();
  if (k >= exponents.size()) {
    throw ValidationError("bias profile: subpopulation index out of range");
  }
  std::vector<double> values = centered_power(degrees, exponents[k]);
  for (double& v : values) v = intercept + v * coefficients[k];
  return values;
}

std::vector<double> centered_power(std::span<const std::int64_t> degrees, double exponent) {
  if (degrees.empty()) throw ValidationError("centered_power: no degrees given");
  std::vector<double> g(degrees.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    if (degrees[i] <= 0) {
      throw ValidationError("centered_power: degrees must be positive");
    }
    g[i] = std::pow(static_cast<double>(degrees[i]), exponent);
    total += g[i];
  }
  const double mean = static_cast<double>(total / static_cast<long double>(degrees.size()));
  for (double& v : g) v -= mean;
  return g;
}

double coefficient_bound(std::span<const double> g, double intercept, std::int64_t max_size,
                         std::int64_t total_population) {
  double max_abs = 0.0;
  for (double v : g) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs == 0.0) {
    throw ValidationError("coefficient_bound: degrees are constant, no slope is expressible");
  }
  const double headroom = std::min(
      intercept, static_cast<double>(total_population) / static_cast<double>(max_size) - intercept);
  if (headroom <= 0.0) {
    throw ValidationError("coefficient_bound: intercept leaves no admissible coefficient range");
  }
  return headroom / max_abs;
}

BinomialSimConfig BinomialSimConfig::varying_exponents() {
  BinomialSimConfig config;
  config.exponents = {-2.0, -1.0, 1.0, 2.0};
  return config;
}

void BinomialSimConfig::validate() const {
  if (respondents < 2) throw ValidationError("binomial config: need at least two respondents");
  if (subpopulations < 2) {
    throw ValidationError("binomial config: need at least two subpopulations");
  }
  if (total_population < 2) throw ValidationError("binomial config: total population too small");
  if (size_lo < 1 || size_lo > size_hi || size_hi > total_population) {
    throw ValidationError("binomial config: size range must satisfy 1 <= lo <= hi <= total");
  }
  if (degree_lo < 1 || degree_lo > degree_hi) {
    throw ValidationError("binomial config: degree range must satisfy 1 <= lo <= hi");
  }
  if (degree_hi >= total_population) {
    throw ValidationError("binomial config: degrees must be below the total population");
  }
  if (!(intercept > 0.0)) throw ValidationError("binomial config: intercept must be positive");
  if (exponents.empty()) throw ValidationError("binomial config: need at least one exponent");
  for (double p : exponents) {
    if (!std::isfinite(p)) throw ValidationError("binomial config: exponents must be finite");
  }
  if (coefficients) {
    if (coefficients->size() != subpopulations) {
      throw ValidationError("binomial config: coefficient list must match subpopulation count");
    }
    for (double c : *coefficients) {
      if (!std::isfinite(c)) {
        throw ValidationError("binomial config: coefficients must be finite");
      }
    }
  }
}

BinomialSimConfig BinomialSimConfig::from_json(const BinomialSimConfig& base,
                                               const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"respondents", "subpopulations", "total_population", "size_range",
                       "degree_range", "intercept", "exponents", "coefficients", "seed"},
                      "binomial config");
  BinomialSimConfig config = base;
  if (j.contains("respondents")) config.respondents = j.at("respondents").get<std::size_t>();
  if (j.contains("subpopulations")) {
    config.subpopulations = j.at("subpopulations").get<std::size_t>();
  }
  if (j.contains("total_population")) {
    config.total_population = j.at("total_population").get<std::int64_t>();
  }
  if (j.contains("size_range")) {
    const auto& r = j.at("size_range");
    if (!r.is_array() || r.size() != 2) {
      throw ValidationError("binomial config: size_range must be [lo, hi]");
    }
    config.size_lo = r.at(0).get<double>();
    config.size_hi = r.at(1).get<double>();
  }
  if (j.contains("degree_range")) {
    const auto& r = j.at("degree_range");
    if (!r.is_array() || r.size() != 2) {
      throw ValidationError("binomial config: degree_range must be [lo, hi]");
    }
    config.degree_lo = r.at(0).get<double>();
    config.degree_hi = r.at(1).get<double>();
  }
  if (j.contains("intercept")) config.intercept = j.at("intercept").get<double>();
  if (j.contains("exponents")) config.exponents = j.at("exponents").get<std::vector<double>>();
  if (j.contains("coefficients")) {
    config.coefficients = j.at("coefficients").get<std::vector<double>>();
  }
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  config.validate();
  return config;
}

nlohmann::json BinomialSimConfig::to_json() const {
  nlohmann::ordered_json j;
  j["respondents"] = respondents;
  j["subpopulations"] = subpopulations;
  j["total_population"] = total_population;
  j["size_range"] = {size_lo, size_hi};
  j["degree_range"] = {degree_lo, degree_hi};
  j["intercept"] = intercept;
  j["exponents"] = exponents;
  if (coefficients) j["coefficients"] = *coefficients;
  j["seed"] = seed;
  return j;
}

SimulatedWorld simulate_binomial(const BinomialSimConfig& config, int threads) {
  config.validate();
  const std::size_t n = config.respondents;
  const std::size_t K = config.subpopulations;

  std::vector<std::int64_t> sizes(K);
  {
    auto eng = substream(config.seed, "binomial.sizes");
    std::uniform_real_distribution<double> dist(static_cast<double>(config.size_lo),
                                                static_cast<double>(config.size_hi));
    for (auto& s : sizes) s = std::llround(dist(eng));
  }
  std::vector<std::int64_t> degrees(n);
  {
    auto eng = substream(config.seed, "binomial.degrees");
    std::uniform_real_distribution<double> dist(static_cast<double>(config.degree_lo),
                                                static_cast<double>(config.degree_hi));
    for (auto& d : degrees) d = std::llround(dist(eng));
  }

  const std::vector<double> exponents = resolve_exponents(config);
  const auto g_cache = centered_power_cache(degrees, exponents);
  const std::int64_t max_size = *std::max_element(sizes.begin(), sizes.end());
  const std::vector<double> coefficients =
      resolve_coefficients(config, g_cache, exponents, max_size);
  if (coefficients.size() != K) {
    throw ValidationError("simulate: coefficient list must match subpopulation count");
  }

  std::vector<std::vector<double>> probabilities(K);
  for (std::size_t k = 0; k < K; ++k) {
    probabilities[k] = column_probabilities(degrees, sizes[k], config.total_population,
                                            config.intercept, g_cache.at(exponents[k]),
                                            coefficients[k], k);
  }
  IntMatrix responses =
      sample_binomial_columns(degrees, probabilities, config.seed, "binomial.responses", threads);

  std::vector<std::string> labels(K);
  std::vector<std::optional<std::int64_t>> known(K);
  for (std::size_t k = 0; k < K; ++k) {
    labels[k] = padded_label("sp", k, K);
    known[k] = sizes[k];
  }
  ArdSurvey survey(std::move(responses), std::move(labels), std::move(known),
                   config.total_population);

  SimulatedWorld world("binomial", std::move(survey), std::move(degrees), config.seed);
  world.intercept = config.intercept;
  world.exponents = exponents;
  world.coefficients = coefficients;
  return world;
}

IntMatrix resample_responses(const SimulatedWorld& world, std::uint64_t seed, int threads) {
  if (world.kind != "binomial") {
    throw ValidationError("resample_responses: only binomial worlds can be resampled");
  }
  const ArdSurvey& survey = world.survey;
  const std::size_t K = survey.subpopulations();
  const auto g_cache = centered_power_cache(world.true_degrees, world.exponents);
  std::vector<std::vector<double>> probabilities(K);
  for (std::size_t k = 0; k < K; ++k) {
    probabilities[k] = column_probabilities(
        world.true_degrees, survey.known_size(k), survey.total_population(),
        world.intercept, g_cache.at(world.exponents[k]), world.coefficients[k], k);
  }
  return sample_binomial_columns(world.true_degrees, probabilities, seed, "binomial.resample",
                                 threads);
}

SbmConfig SbmConfig::ci_defaults() {
  SbmConfig config;
  config.nodes = 5000;
  config.groups = 10;
  return config;
}

std::vector<std::int64_t> SbmConfig::resolved_group_sizes() const {
  if (!group_sizes.empty()) return group_sizes;
  std::vector<std::int64_t> sizes(groups, static_cast<std::int64_t>(nodes / groups));
  const std::size_t remainder = nodes % groups;
  for (std::size_t k = 0; k < remainder; ++k) ++sizes[k];
  return sizes;
}

std::vector<double> SbmConfig::resolved_within() const {
  if (!within.empty()) return within;
  std::vector<double> probs(groups);
  for (std::size_t k = 0; k < groups; ++k) {
    probs[k] = groups == 1 ? 0.25 : 0.25 + 0.25 * static_cast<double>(k) / (groups - 1);
  }
  return probs;
}

void SbmConfig::validate() const {
  if (nodes < 2) throw ValidationError("sbm config: need at least two nodes");
  if (groups < 2) throw ValidationError("sbm config: need at least two groups");
  if (!group_sizes.empty()) {
    if (group_sizes.size() != groups) {
      throw ValidationError("sbm config: group size list must match group count");
    }
    std::int64_t total = 0;
    for (std::int64_t s : group_sizes) {
      if (s < 1) throw ValidationError("sbm config: group sizes must be positive");
      total += s;
    }
    if (total != static_cast<std::int64_t>(nodes)) {
      throw ValidationError("sbm config: group sizes must sum to the node count");
    }
  }
  if (!within.empty()) {
    if (within.size() != groups) {
      throw ValidationError("sbm config: within-group probability list must match group count");
    }
    for (double p : within) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("sbm config: within-group probabilities must lie in [0, 1]");
      }
    }
  }
  if (!(between >= 0.0 && between <= 1.0)) {
    throw ValidationError("sbm config: between-group probability must lie in [0, 1]");
  }
}

SbmConfig SbmConfig::from_json(const SbmConfig& base, const nlohmann::json& j) {
  reject_unknown_keys(j, {"nodes", "groups", "group_sizes", "within", "between", "seed"},
                      "sbm config");
  SbmConfig config = base;
  if (j.contains("nodes")) config.nodes = j.at("nodes").get<std::size_t>();
  if (j.contains("groups")) config.groups = j.at("groups").get<std::size_t>();
  if (j.contains("group_sizes")) {
    config.group_sizes = j.at("group_sizes").get<std::vector<std::int64_t>>();
  }
  if (j.contains("within")) config.within = j.at("within").get<std::vector<double>>();
  if (j.contains("between")) config.between = j.at("between").get<double>();
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  config.validate();
  return config;
}

nlohmann::json SbmConfig::to_json() const {
  nlohmann::ordered_json j;
  j["nodes"] = nodes;
  j["groups"] = groups;
  j["group_sizes"] = resolved_group_sizes();
  j["within"] = resolved_within();
  j["between"] = between;
  j["seed"] = seed;
  return j;
}

namespace {

// Visits the Bernoulli(p) successes among `count` slots by jumping between
// them with geometric gaps, so sparse blocks cost time proportional to the
// edge count rather than the pair count.
template <typename Visit>
void visit_bernoulli_hits(std::mt19937_64& eng, std::int64_t count, double p, Visit&& visit) {
  if (count <= 0 || p <= 0.0) return;
  if (p >= 1.0) {
    for (std::int64_t t = 0; t < count; ++t) visit(t);
    return;
  }
  std::geometric_distribution<std::int64_t> gap(p);
  std::int64_t pos = -1;
  for (;;) {
    const std::int64_t step = gap(eng);
    if (step >= count - pos - 1) return;  // also guards pos + step + 1 overflow
    pos += step + 1;
    visit(pos);
  }
}

// Maps a flat index t in [0, s*(s-1)/2) to the t-th pair (i, j), i < j, in
// row-major order. The closed-form root can land one row off after rounding,
// so it is nudged until cum(i) <= t < cum(i + 1).
std::pair<std::int64_t, std::int64_t> triangular_pair(std::int64_t t, std::int64_t s) {
  const auto cum = [s](std::int64_t i) { return i * (2 * s - i - 1) / 2; };
  const long double disc = 2.0L * static_cast<long double>(s) - 1.0L;
  std::int64_t i = static_cast<std::int64_t>(
      (disc - std::sqrt(disc * disc - 8.0L * static_cast<long double>(t))) / 2.0L);
  i = std::clamp<std::int64_t>(i, 0, s - 2);
  while (i > 0 && cum(i) > t) --i;
  while (cum(i + 1) <= t) ++i;
  return {i, i + 1 + (t - cum(i))};
}

struct BlockCounts {
  // Per-node tie counts for one block pair: rows of group a toward column b,
  // and rows of group b toward column a. For a == b only `first` is used and
  // both endpoints of each edge land in it.
  std::vector<std::int64_t> first;
  std::vector<std::int64_t> second;
};

}  // namespace

SimulatedWorld simulate_sbm(const SbmConfig& config, int threads) {
  config.validate();
  const std::size_t G = config.groups;
  const std::size_t n = config.nodes;
  const std::vector<std::int64_t> sizes = config.resolved_group_sizes();
  const std::vector<double> within = config.resolved_within();

  std::vector<std::int64_t> offsets(G + 1, 0);
  for (std::size_t k = 0; k < G; ++k) offsets[k + 1] = offsets[k] + sizes[k];

  std::vector<std::pair<std::size_t, std::size_t>> blocks;
  blocks.reserve(G * (G + 1) / 2);
  for (std::size_t a = 0; a < G; ++a) {
    for (std::size_t b = a; b < G; ++b) blocks.emplace_back(a, b);
  }

  // Each block pair draws from its own substream and fills local count
  // arrays; the merge below is deterministic, so the survey is identical for
  // any worker count.
  std::vector<BlockCounts> counts(blocks.size());
  parallel_for(blocks.size(), threads, [&](std::size_t t) {
    const auto [a, b] = blocks[t];
    const std::int64_t sa = sizes[a];
    const std::int64_t sb = sizes[b];
    auto eng = substream(config.seed, "sbm.block", static_cast<std::uint64_t>(a),
                         static_cast<std::uint64_t>(b));
    BlockCounts& local = counts[t];
    local.first.assign(static_cast<std::size_t>(sa), 0);
    if (a == b) {
      const std::int64_t pairs = sa * (sa - 1) / 2;
      visit_bernoulli_hits(eng, pairs, within[a], [&](std::int64_t flat) {
        const auto [i, j] = triangular_pair(flat, sa);
        ++local.first[static_cast<std::size_t>(i)];
        ++local.first[static_cast<std::size_t>(j)];
      });
    } else {
      local.second.assign(static_cast<std::size_t>(sb), 0);
      visit_bernoulli_hits(eng, sa * sb, config.between, [&](std::int64_t flat) {
        ++local.first[static_cast<std::size_t>(flat / sb)];
        ++local.second[static_cast<std::size_t>(flat % sb)];
      });
    }
  });

  IntMatrix responses(n, G);
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    const auto [a, b] = blocks[t];
    const BlockCounts& local = counts[t];
    for (std::size_t i = 0; i < local.first.size(); ++i) {
      responses.at(static_cast<std::size_t>(offsets[a]) + i, b) += local.first[i];
    }
    if (a != b) {
      for (std::size_t j = 0; j < local.second.size(); ++j) {
        responses.at(static_cast<std::size_t>(offsets[b]) + j, a) += local.second[j];
      }
    }
  }

  std::vector<std::int64_t> degrees(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < G; ++k) degrees[i] += responses.at(i, k);
  }

  std::vector<std::string> labels(G);
  std::vector<std::optional<std::int64_t>> known(G);
  for (std::size_t k = 0; k < G; ++k) {
    labels[k] = padded_label("group", k, G);
    known[k] = sizes[k];
  }
  ArdSurvey survey(std::move(responses), std::move(labels), std::move(known),
                   static_cast<std::int64_t>(n));

  SimulatedWorld world("sbm", std::move(survey), std::move(degrees), config.seed);
  world.group_sizes = sizes;
  world.within = within;
  world.between = config.between;
  return world;
}

std::vector<double> SimulatedWorld::true_degrees_real() const {
  return std::vector<double>(true_degrees.begin(), true_degrees.end());
}

BiasProfile SimulatedWorld::profile() const {
  if (kind != "binomial") {
    throw ValidationError("profile: only binomial worlds carry bias functions");
  }
  BiasProfile p;
  p.intercept = intercept;
  p.exponents = exponents;
  p.coefficients = coefficients;
  return p;
}

nlohmann::json SimulatedWorld::truth_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["seed"] = seed;
  if (kind == "binomial") {
    j["intercept"] = intercept;
    j["exponents"] = exponents;
    j["coefficients"] = coefficients;
  } else {
    j["group_sizes"] = group_sizes;
    j["within"] = within;
    j["between"] = between;
  }
  j["true_degrees"] = true_degrees;
  return j;
}

}  // namespace nsum
