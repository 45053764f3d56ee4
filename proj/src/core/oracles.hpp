#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/simulators.hpp"
#include "json.hpp"

namespace nsum {

/// Population-level quantities the bias formulas consume: per-known-group
/// mean degrees and sizes, the hidden group's mean degree and size, the
/// frame mean degree and the total population.
struct PopulationTruth {
  std::vector<double> known_mean_degrees;
  std::vector<std::int64_t> known_sizes;
  double hidden_mean_degree = 0.0;
  double frame_mean_degree = 0.0;
  std::int64_t hidden_size = 0;
  std::int64_t total_population = 0;

  void validate() const;
};

/// Truth for an SBM world with group `hidden` treated as the unknown one.
PopulationTruth population_truth(const SimulatedWorld& world, std::size_t hidden);

/// Expected bias of the basic estimator with known degrees:
/// N_H * (mean degree in H / mean frame degree - 1).
double bias_known_degrees(const PopulationTruth& truth);

/// Expected bias with degrees estimated from the known groups:
/// N_H * (mean degree in H * sum N_k / sum(mean degree in k * N_k) - 1).
double bias_estimated_degrees(const PopulationTruth& truth);

/// Expected bias of the known-degree estimator under degree-dependent
/// reporting f: N_k * (sum d_i f_i / sum d_i - 1).
double bias_fk(std::span<const std::int64_t> degrees, std::span<const double> f_values,
               std::int64_t subpopulation_size);
double bias_fk(std::span<const std::int64_t> degrees, const BiasProfile& profile, std::size_t k,
               std::int64_t subpopulation_size);

/// Slope of the expected inverse ratio sum(d)/sum(d*f) against the expected
/// slope expression sum(d^2*f)/sum(d*f) for f = a + g*c, which is the same
/// for every coefficient c: (Sd*Sdg) / (a*(Sdd*Sdg - Sd*Sddg)).
double gamma1_closed_form(std::span<const double> degrees, std::span<const double> g, double a);

struct TwoPointSolve {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
};

/// Fits the same line through the two coefficient choices c1 and c2 by
/// finite differences; agrees with gamma1_closed_form for any distinct pair.
TwoPointSolve gamma1_two_point(std::span<const double> degrees, std::span<const double> g,
                               double a, double c1, double c2);

struct MonteCarloBias {
  double mean_bias = 0.0;  // mean of (estimate - truth) over replicates
  double std_error = 0.0;  // sd over replicates / sqrt(replicates)
};

struct SrsBiasResult {
  MonteCarloBias known;      // degrees fixed at their true values
  MonteCarloBias estimated;  // degrees re-estimated inside every sample
};

/// Repeatedly draws a simple random sample of rows from a population-sized
/// world (one row per population member) and measures the bias of both basic
/// estimators for the hidden group. Only the sampling is random; the
/// population stays fixed.
SrsBiasResult srs_scaleup_bias(const SimulatedWorld& world, std::size_t hidden,
                               std::size_t sample_size, std::size_t replicates,
                               std::uint64_t seed, int threads = 1);

/// Redraws the responses of a binomial world and measures the per-group bias
/// of the known-degree estimator. `estimate_scale` multiplies every
/// replicate's estimate; anything other than 1 is a corruption hook for
/// negative-control tests.
std::vector<MonteCarloBias> binomial_scaleup_bias(const SimulatedWorld& world,
                                                  std::size_t replicates, std::uint64_t seed,
                                                  int threads = 1, double estimate_scale = 1.0);

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;  // allowed |observed - expected|
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  int threads = 1;
  // Shrinks populations and replicate counts for fast runs. Small samples
  // inflate the ratio-approximation error behind the bias formulas, so the
  // sampling-based tolerances are doubled in this mode.
  bool quick = false;
  double estimate_scale = 1.0;  // corruption hook, see binomial_scaleup_bias
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool all_passed = false;

  nlohmann::json to_json() const;
};

/// Cross-checks the estimators against the closed-form biases and the
/// two-point line solve. Every check records expected vs observed and the
/// tolerance it was held to.
VerifyReport run_verification(const VerifyOptions& options);

}  // namespace nsum
