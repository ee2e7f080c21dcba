#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "budgetkv/numerics.hpp"
#include "budgetkv/rng.hpp"
#include "budgetkv/toymodel.hpp"

namespace budgetkv::theory {

// Truncated power-law pdf f(x) = c (x + b)^(-k) on [0, u - b), k > 2.
struct PowerLawParams {
  double k = 3.0;
  double b = 1.0;
  double u = 10.0;

  void validate() const;       // k > 2, b > 0, u > b
  double normalizer() const;   // c = (k-1) / (b^(1-k) - u^(1-k))
  double cdf(double x) const;
  double inverse_cdf(double p) const;
  double mean() const;         // analytic first moment
};

// i.i.d. draws via the inverse CDF.
Vector sample_power_law(const PowerLawParams& params, std::size_t n, Rng& rng);

struct BoundInputs {
  std::size_t budget = 0;   // B
  std::size_t t_min = 0;
  std::size_t t_max = 0;
  double epsilon = 0.0;     // in (0, 1), with budget/t_max > epsilon
  PowerLawParams power_law;

  void validate() const;
};

struct TailBound {
  // Expected attention mass on dropped entries when the top-B survive.
  double dropped_mass_bound = 0.0;
  // Per-token generation error variant (prefactor 2.1 instead of 1/0.98).
  double token_error_bound = 0.0;
  double failure_probability = 0.0;
  bool vacuous = false;  // closed form came out non-positive
};

// Closed-form tail bound; requires u >= 5b (the 0.98 constant is only
// valid there) and budget/t_max > epsilon.
TailBound tail_bound(const BoundInputs& inputs);

struct DroppedMassStats {
  double mean = 0.0;
  double max = 0.0;
};

// Per trial: draw t-1 weights, normalize, keep the largest B shares and
// sum what was dropped.
DroppedMassStats monte_carlo_dropped_mass(const PowerLawParams& params, std::size_t t,
                                          std::size_t budget, std::size_t trials,
                                          Rng& rng);

// Interval check of the score-propagation theorem for one generation step.
// A token position qualifies when its quadratic form x A x^T is at least c
// and dominates every cross term by a factor 1/epsilon; the bound is only
// asserted when the measured MLP alignment satisfies the delta assumption.
struct Theorem31Report {
  double delta = 0.0;        // 1 - cos(a_t, x_{t+1})
  double delta_bound = 0.0;  // (c*eps / (lq*lk*lv*lo))^2
  bool delta_ok = false;
  double attention_norm = 0.0;

  struct Interval {
    std::size_t position = 0;
    double quad_form = 0.0;  // x_l A x_l^T
    double lower = 0.0;
    double value = 0.0;      // x_{t+1} Wq Wk^T x_l^T
    double upper = 0.0;
    bool holds = false;
  };
  std::vector<Interval> checks;  // one per qualifying position
  std::size_t violations = 0;
};

Theorem31Report check_theorem31(const toy::ToyModelWeights& weights,
                                const std::vector<Vector>& history, double c,
                                double epsilon);

// Randomized lemma suites. Each returns the worst observed slack
// (bound - measured); negative means a violation.
double check_lemma_inner_product(Rng& rng, std::size_t trials, std::size_t dim);
double check_lemma_attention_lipschitz(const toy::ToyModelWeights& weights,
                                       std::size_t t, Rng& rng, std::size_t trials);
double check_lemma_mlp_lipschitz(const toy::ToyModelWeights& weights, Rng& rng,
                                 std::size_t trials);

// Gaussian weights with the top direction of A = Wv Wo Wq Wk^T amplified
// by planted_strength through rank-one updates spread over the four
// factors. Strength 0 leaves the base Gaussian draw untouched.
struct PlantedWeights {
  toy::ToyModelWeights weights;
  Vector direction;  // the planted unit direction in token space
};

PlantedWeights make_planted_weights(std::size_t d, std::size_t p, std::size_t h,
                                    double planted_strength, double noise_scale,
                                    double mlp_scale, Rng& rng);

struct PersistenceContrast {
  double planted_mean = 0.0;
  double random_mean = 0.0;
  std::vector<double> planted_ratios;
  std::vector<double> random_ratios;
};

// Persistence ratio of planted-structure generations against fully random
// ones, averaged over seeds.
PersistenceContrast planted_persistence_experiment(std::size_t d, std::size_t t_total,
                                                   double planted_strength,
                                                   std::size_t seeds,
                                                   std::uint64_t base_seed);

}  // namespace budgetkv::theory
