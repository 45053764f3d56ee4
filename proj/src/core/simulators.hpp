#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/matrix.hpp"
#include "core/survey.hpp"
#include "json.hpp"

namespace nsum {

/// The reporting-bias functions f_k(d) = intercept + (d^p_k - mean(d^p_k)) * c_k
/// of one simulated world, one exponent/coefficient pair per subpopulation.
struct BiasProfile {
  double intercept = 1.0;
  std::vector<double> exponents;
  std::vector<double> coefficients;

  void validate() const;
  /// f_k evaluated at every degree; the centering mean is taken over the
  /// degrees passed in.
  std::vector<double> f(std::span<const std::int64_t> degrees, std::size_t k) const;
};

/// Synthetic ARD with a degree-dependent reporting bias. Responses are
/// y_ik ~ Binomial(d_i, (N_k/N) * f_k(d_i)) with
/// f_k(d) = intercept + (d^p_k - mean(d^p_k)) * c_k, so f_k averages to one.
struct BinomialSimConfig {
  std::size_t respondents = 10000;
  std::size_t subpopulations = 50;
  std::int64_t total_population = 10'000'000;
  double size_lo = 1e3;
  double size_hi = 1e6;
  double degree_lo = 10.0;
  double degree_hi = 1000.0;
  double intercept = 1.0;
  std::vector<double> exponents = {2.0};  // cycled across subpopulations
  std::optional<std::vector<double>> coefficients;  // explicit c_k; default auto-spaced
  std::uint64_t seed = 0;

  static BinomialSimConfig defaults() { return {}; }
  static BinomialSimConfig varying_exponents();
  void validate() const;
  static BinomialSimConfig from_json(const BinomialSimConfig& base, const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Stochastic block model: groups with dense within-group connectivity and a
/// common between-group edge probability. ARD columns count a node's
/// neighbors per group, so true degrees are exact row sums.
struct SbmConfig {
  std::size_t nodes = 20000;
  std::size_t groups = 20;
  std::vector<std::int64_t> group_sizes;  // default: equal split
  std::vector<double> within;             // default: evenly spaced 0.25..0.5
  double between = 0.05;
  std::uint64_t seed = 0;

  static SbmConfig defaults() { return {}; }
  static SbmConfig ci_defaults();
  std::vector<std::int64_t> resolved_group_sizes() const;
  std::vector<double> resolved_within() const;
  void validate() const;
  static SbmConfig from_json(const SbmConfig& base, const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SimulatedWorld {
  SimulatedWorld(std::string kind_, ArdSurvey survey_,
                 std::vector<std::int64_t> true_degrees_, std::uint64_t seed_)
      : kind(std::move(kind_)), survey(std::move(survey_)),
        true_degrees(std::move(true_degrees_)), seed(seed_) {}

  std::string kind;  // "binomial" | "sbm"
  ArdSurvey survey;  // every subpopulation size known
  std::vector<std::int64_t> true_degrees;
  std::uint64_t seed = 0;
  // binomial extras
  double intercept = 1.0;
  std::vector<double> exponents;     // one per subpopulation
  std::vector<double> coefficients;  // one per subpopulation
  // sbm extras
  std::vector<std::int64_t> group_sizes;
  std::vector<double> within;
  double between = 0.0;

  nlohmann::json truth_json() const;
  std::vector<double> true_degrees_real() const;
  /// Bias functions of a binomial world; errors for other kinds.
  BiasProfile profile() const;
};

SimulatedWorld simulate_binomial(const BinomialSimConfig& config, int threads = 1);
SimulatedWorld simulate_sbm(const SbmConfig& config, int threads = 1);

/// Fresh response draws for a binomial world holding degrees, sizes and bias
/// profile fixed. Used by Monte Carlo checks.
IntMatrix resample_responses(const SimulatedWorld& world, std::uint64_t seed, int threads = 1);

/// d^p centered by the sample mean of d^p.
std::vector<double> centered_power(std::span<const std::int64_t> degrees, double exponent);

/// Largest symmetric coefficient magnitude keeping every probability
/// (size/total) * (intercept + g*c) inside [0,1].
double coefficient_bound(std::span<const double> g, double intercept,
                         std::int64_t max_size, std::int64_t total_population);

}  // namespace nsum
