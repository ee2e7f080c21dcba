#include "budgetkv/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "budgetkv/analysis.hpp"
#include "budgetkv/errors.hpp"

namespace budgetkv::theory {

void PowerLawParams::validate() const {
  if (!(k > 2.0)) throw ContractViolation("power law: k must be > 2");
  if (!(b > 0.0)) throw ContractViolation("power law: b must be > 0");
  if (!(u > b)) throw ContractViolation("power law: u must be > b");
}

double PowerLawParams::normalizer() const {
  validate();
  return (k - 1.0) / (std::pow(b, 1.0 - k) - std::pow(u, 1.0 - k));
}

double PowerLawParams::cdf(double x) const {
  validate();
  if (x <= 0.0) return 0.0;
  if (x >= u - b) return 1.0;
  const double lo = std::pow(b, 1.0 - k);
  const double hi = std::pow(u, 1.0 - k);
  return (lo - std::pow(x + b, 1.0 - k)) / (lo - hi);
}

double PowerLawParams::inverse_cdf(double p) const {
  validate();
  if (p < 0.0 || p >= 1.0) throw ContractViolation("inverse_cdf: p must be in [0, 1)");
  const double lo = std::pow(b, 1.0 - k);
  const double hi = std::pow(u, 1.0 - k);
  return std::pow(lo - p * (lo - hi), 1.0 / (1.0 - k)) - b;
}

double PowerLawParams::mean() const {
  validate();
  const double lo = std::pow(b, 1.0 - k);
  const double hi = std::pow(u, 1.0 - k);
  const double delta =
      (std::pow(b, 2.0 - k) - (k - 1.0) * std::pow(u, 2.0 - k) + (k - 2.0) * b * hi) /
      (lo - hi);
  return delta / (k - 2.0);
}

Vector sample_power_law(const PowerLawParams& params, std::size_t n, Rng& rng) {
  params.validate();
  if (n < 1) throw ContractViolation("sample_power_law: n must be >= 1");
  Vector out(n);
  for (double& x : out) x = params.inverse_cdf(rng.uniform());
  return out;
}

void BoundInputs::validate() const {
  power_law.validate();
  if (budget > t_max) throw ContractViolation("bound inputs: budget must not exceed t_max");
  if (t_min < 2 || t_min > t_max) {
    throw ContractViolation("bound inputs: need 2 <= t_min <= t_max");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ContractViolation("bound inputs: epsilon must be in (0, 1)");
  }
  const double ratio = static_cast<double>(budget) / static_cast<double>(t_max);
  if (!(ratio > epsilon)) {
    throw ContractViolation("bound inputs: budget/t_max must exceed epsilon");
  }
}

TailBound tail_bound(const BoundInputs& inputs) {
  inputs.validate();
  const PowerLawParams& pl = inputs.power_law;
  if (!(pl.u >= 5.0 * pl.b)) {
    // The 0.98 constant needs u >= 5b; outside that regime the closed
    // form is not defined.
    throw ContractViolation("tail_bound: requires u >= 5b");
  }
  const double k = pl.k;
  const double eps = inputs.epsilon;
  const double ratio = static_cast<double>(inputs.budget) / static_cast<double>(inputs.t_max);
  const double one_minus_eps_sq = (1.0 - eps) * (1.0 - eps);

  const double bracket =
      k - (k - 1.0) * std::pow((1.0 - eps) / (ratio - eps), 1.0 / (k - 1.0));

  TailBound bound;
  bound.dropped_mass_bound = (1.0 - ratio) / (0.98 * one_minus_eps_sq) * bracket;
  bound.token_error_bound = 2.1 * (1.0 - ratio) / one_minus_eps_sq * bracket;
  bound.vacuous = !(bound.dropped_mass_bound > 0.0);

  const double t_max = static_cast<double>(inputs.t_max);
  const double steps = static_cast<double>(inputs.t_min - 1);
  const double span = pl.u - pl.b;
  const double first =
      t_max * std::exp(-eps * eps * pl.b * pl.b * steps /
                       ((k - 2.0) * (k - 2.0) * span * span));
  const double second =
      t_max * std::exp(-2.0 * steps * (1.0 - ratio) * (1.0 - ratio) / one_minus_eps_sq);
  bound.failure_probability = first + second;
  return bound;
}

DroppedMassStats monte_carlo_dropped_mass(const PowerLawParams& params, std::size_t t,
                                          std::size_t budget, std::size_t trials,
                                          Rng& rng) {
  params.validate();
  if (trials < 1) throw ContractViolation("monte_carlo_dropped_mass: trials must be >= 1");
  if (budget >= t) throw ContractViolation("monte_carlo_dropped_mass: need budget < t");

  const std::size_t n = t - 1;
  DroppedMassStats stats;
  Vector weights(n);
  Vector shares(n);
  double total_dropped = 0.0;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      weights[i] = params.inverse_cdf(rng.uniform());
      sum += weights[i];
    }
    double dropped = 0.0;
    if (budget >= n) {
      dropped = 0.0;
    } else if (sum == 0.0) {
      // Collapsed support: every share is 1/n.
      dropped = static_cast<double>(n - budget) / static_cast<double>(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) shares[i] = weights[i] / sum;
      std::nth_element(shares.begin(), shares.begin() + static_cast<std::ptrdiff_t>(budget),
                       shares.end(), std::greater<double>());
      dropped = std::accumulate(shares.begin() + static_cast<std::ptrdiff_t>(budget),
                                shares.end(), 0.0);
    }
    total_dropped += dropped;
    stats.max = std::max(stats.max, dropped);
  }
  stats.mean = total_dropped / static_cast<double>(trials);
  return stats;
}

Theorem31Report check_theorem31(const toy::ToyModelWeights& weights,
                                const std::vector<Vector>& history, double c,
                                double epsilon) {
  weights.validate();
  if (!weights.normalize_outputs) {
    throw ContractViolation("check_theorem31: weights must normalize outputs");
  }
  if (history.empty()) throw ContractViolation("check_theorem31: empty history");
  if (!(c > 0.0) || !(epsilon > 0.0)) {
    throw ContractViolation("check_theorem31: c and epsilon must be positive");
  }
  for (const auto& x : history) {
    if (std::abs(norm2(x) - 1.0) > 1e-9) {
      throw ContractViolation("check_theorem31: history tokens must be unit norm");
    }
  }

  const double lq = largest_singular_value(weights.w_q);
  const double lk = largest_singular_value(weights.w_k);
  const double lv = largest_singular_value(weights.w_v);
  const double lo = largest_singular_value(weights.w_o);

  const Matrix a_matrix =
      matmul(matmul(weights.w_v, weights.w_o), matmul(weights.w_q, transpose(weights.w_k)));

  const toy::StepResult step =
      toy::step_reference(weights, history, toy::ScaleMode::kInverseTokenCount);

  Theorem31Report report;
  report.attention_norm = norm2(step.attention_out);
  if (report.attention_norm < 1e-300) {
    report.delta = 1.0;
    report.delta_bound = 0.0;
    report.delta_ok = false;
    return report;
  }

  report.delta = 1.0 - dot(step.attention_out, step.next) / report.attention_norm;
  const double lam_product = lq * lk * lv * lo;
  report.delta_bound = lam_product > 0.0
                           ? std::pow(c * epsilon / lam_product, 2.0)
                           : std::numeric_limits<double>::infinity();
  report.delta_ok = report.delta <= report.delta_bound;
  if (!report.delta_ok) return report;

  const std::size_t t = history.size();
  std::vector<Vector> a_times_x(t);
  for (std::size_t j = 0; j < t; ++j) a_times_x[j] = matvec(a_matrix, history[j]);

  const Vector next_query = vecmat(step.next, weights.w_q);

  for (std::size_t l = 0; l < t; ++l) {
    const double quad = dot(history[l], a_times_x[l]);
    if (quad < c) continue;
    double max_cross = 0.0;
    for (std::size_t j = 0; j < t; ++j) {
      if (j == l) continue;
      max_cross = std::max(max_cross, std::abs(dot(history[j], a_times_x[l])));
    }
    if (quad < max_cross / epsilon) continue;

    Theorem31Report::Interval interval;
    interval.position = l;
    interval.quad_form = quad;
    const double center = quad / report.attention_norm;
    interval.lower = center * (step.score_row[l] - 3.0 * epsilon);
    interval.upper = center * (step.score_row[l] + 3.0 * epsilon);
    interval.value = dot(next_query, vecmat(history[l], weights.w_k));
    const double slack = 1e-9 * std::max(1.0, std::abs(center));
    interval.holds =
        interval.value >= interval.lower - slack && interval.value <= interval.upper + slack;
    if (!interval.holds) ++report.violations;
    report.checks.push_back(interval);
  }
  return report;
}

double check_lemma_inner_product(Rng& rng, std::size_t trials, std::size_t dim) {
  if (trials < 1) throw ContractViolation("lemma check: trials must be >= 1");
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trials; ++i) {
    const Vector x1 = rng.unit_vector(dim);
    const Vector x2 = rng.unit_vector(dim);
    const Vector y = rng.gaussian_vector(dim, rng.uniform(0.1, 4.0));
    const double delta = std::max(0.0, 1.0 - dot(x1, x2));
    const double bound = std::sqrt(2.0 * delta) * norm2(y);
    const double measured = std::abs(dot(x1, y) - dot(x2, y));
    worst = std::min(worst, bound - measured);
  }
  return worst;
}

double check_lemma_attention_lipschitz(const toy::ToyModelWeights& weights,
                                       std::size_t t, Rng& rng, std::size_t trials) {
  if (t < 2) throw ContractViolation("lemma check: need t >= 2");
  if (trials < 1) throw ContractViolation("lemma check: trials must be >= 1");
  const double lq = largest_singular_value(weights.w_q);
  const double lk = largest_singular_value(weights.w_k);
  const std::size_t d = weights.d;

  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t trial = 0; trial < trials; ++trial) {
    // Each pair differs by the same chord length along a random
    // orthogonal direction, keeping both tokens unit norm.
    const double chord = rng.uniform(1e-4, 2.0);
    const double theta = 2.0 * std::asin(std::min(1.0, chord / 2.0));
    std::vector<Vector> xs(t), ys(t);
    double max_gap = 0.0;
    for (std::size_t i = 0; i < t; ++i) {
      xs[i] = rng.unit_vector(d);
      Vector z = rng.unit_vector(d);
      const double along = dot(z, xs[i]);
      for (std::size_t j = 0; j < d; ++j) z[j] -= along * xs[i][j];
      const double zn = norm2(z);
      if (zn < 1e-9) {
        ys[i] = xs[i];
      } else {
        ys[i].resize(d);
        for (std::size_t j = 0; j < d; ++j) {
          ys[i][j] = std::cos(theta) * xs[i][j] + std::sin(theta) * z[j] / zn;
        }
      }
      max_gap = std::max(max_gap, norm2(sub(xs[i], ys[i])));
    }

    const double scale = 1.0 / static_cast<double>(t);
    auto score_row = [&](const std::vector<Vector>& tokens) {
      const Vector query = vecmat(tokens[t - 1], weights.w_q);
      Vector logits(t - 1);
      for (std::size_t j = 0; j + 1 < t; ++j) {
        logits[j] = scale * dot(query, vecmat(tokens[j], weights.w_k));
      }
      return softmax(logits);
    };

    const double distance = norm2(sub(score_row(xs), score_row(ys)));
    const double bound = 2.0 * std::sqrt(static_cast<double>(t - 1)) /
                         static_cast<double>(t) * lq * lk * max_gap;
    worst = std::min(worst, bound - distance);
  }
  return worst;
}

double check_lemma_mlp_lipschitz(const toy::ToyModelWeights& weights, Rng& rng,
                                 std::size_t trials) {
  if (trials < 1) throw ContractViolation("lemma check: trials must be >= 1");
  const double l1 = weights.h > 0 ? largest_singular_value(weights.w_1) : 0.0;
  const double l2 = weights.h > 0 ? largest_singular_value(weights.w_2) : 0.0;
  const double lip = 1.0 + l1 * l2;

  // The bound is checked on the raw MLP, so run it without the final
  // normalization.
  toy::ToyModelWeights raw = weights;
  raw.normalize_outputs = false;

  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trials; ++i) {
    const Vector x1 = rng.gaussian_vector(weights.d, rng.uniform(0.1, 3.0));
    const Vector x2 = rng.gaussian_vector(weights.d, rng.uniform(0.1, 3.0));
    const double measured = norm2(sub(toy::mlp(raw, x1), toy::mlp(raw, x2)));
    const double bound = lip * norm2(sub(x1, x2));
    worst = std::min(worst, bound - measured);
  }
  return worst;
}

namespace {

void add_rank_one(Matrix& m, const Vector& left, const Vector& right, double scale) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      m(i, j) += scale * left[i] * right[j];
    }
  }
}

}  // namespace

PlantedWeights make_planted_weights(std::size_t d, std::size_t p, std::size_t h,
                                    double planted_strength, double noise_scale,
                                    double mlp_scale, Rng& rng) {
  if (planted_strength < 0.0) {
    throw ContractViolation("make_planted_weights: strength must be >= 0");
  }
  PlantedWeights planted;
  planted.direction = rng.unit_vector(d);
  const Vector q_dir = rng.unit_vector(p);
  const Vector r_dir = rng.unit_vector(p);

  planted.weights = toy::random_weights(d, p, h, noise_scale, mlp_scale, rng, true);

  const double s = std::pow(planted_strength, 0.25);
  add_rank_one(planted.weights.w_q, planted.direction, q_dir, s);
  add_rank_one(planted.weights.w_k, planted.direction, q_dir, s);
  add_rank_one(planted.weights.w_v, planted.direction, r_dir, s);
  Matrix& w_o = planted.weights.w_o;
  for (std::size_t i = 0; i < w_o.rows(); ++i) {
    for (std::size_t j = 0; j < w_o.cols(); ++j) {
      w_o(i, j) += s * r_dir[i] * planted.direction[j];
    }
  }
  return planted;
}

PersistenceContrast planted_persistence_experiment(std::size_t d, std::size_t t_total,
                                                   double planted_strength,
                                                   std::size_t seeds,
                                                   std::uint64_t base_seed) {
  if (seeds < 1) throw ContractViolation("persistence experiment: seeds must be >= 1");
  if (t_total < 16) throw ContractViolation("persistence experiment: t_total too small");

  const std::size_t prompt_len = 8;
  const double noise_scale = 1.2 / std::sqrt(static_cast<double>(d));
  const double mlp_scale = 0.02;
  const double bias_fraction = 0.3;
  const double wobble = 0.05;

  PersistenceContrast contrast;
  Rng base(base_seed);
  for (std::size_t i = 0; i < seeds; ++i) {
    auto run_arm = [&](double strength) {
      Rng rng = base.child(i);
      PlantedWeights pw =
          make_planted_weights(d, d, d, strength, noise_scale, mlp_scale, rng);
      const auto prompt = toy::biased_prompt(prompt_len, d, pw.direction,
                                             bias_fraction, wobble, rng);
      const auto run = toy::generate_reference(pw.weights, prompt,
                                               t_total - prompt_len,
                                               toy::ScaleMode::kInverseSqrtHeadDim);
      const std::size_t l = run.trace.max_query_pos(0, 0);
      return analysis::persistence_ratio(run.trace, 0, 0, l / 2, l).ratio;
    };
    contrast.planted_ratios.push_back(run_arm(planted_strength));
    contrast.random_ratios.push_back(run_arm(0.0));
  }
  const auto mean = [](const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  };
  contrast.planted_mean = mean(contrast.planted_ratios);
  contrast.random_mean = mean(contrast.random_ratios);
  return contrast;
}

}  // namespace budgetkv::theory
