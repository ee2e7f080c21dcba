#include "budgetkv/toymodel.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "budgetkv/errors.hpp"

namespace budgetkv::toy {

void ToyModelWeights::validate() const {
  if (d == 0 || p == 0) throw ContractViolation("toy weights: d and p must be positive");
  auto expect = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw ContractViolation(std::string("toy weights: bad shape for ") + name);
    }
  };
  expect(w_q, d, p, "w_q");
  expect(w_k, d, p, "w_k");
  expect(w_v, d, p, "w_v");
  expect(w_o, p, d, "w_o");
  expect(w_1, h, d, "w_1");
  expect(w_2, d, h, "w_2");
}

ToyModelWeights random_weights(std::size_t d, std::size_t p, std::size_t h,
                               double attn_scale, double mlp_scale, Rng& rng,
                               bool normalize_outputs) {
  ToyModelWeights w;
  w.d = d;
  w.p = p;
  w.h = h;
  w.w_q = rng.gaussian_matrix(d, p, attn_scale);
  w.w_k = rng.gaussian_matrix(d, p, attn_scale);
  w.w_v = rng.gaussian_matrix(d, p, attn_scale);
  w.w_o = rng.gaussian_matrix(p, d, attn_scale);
  w.w_1 = rng.gaussian_matrix(h, d, mlp_scale);
  w.w_2 = rng.gaussian_matrix(d, h, mlp_scale);
  w.normalize_outputs = normalize_outputs;
  return w;
}

Vector mlp(const ToyModelWeights& w, const Vector& x) {
  if (x.size() != w.d) throw ContractViolation("mlp: input length must be d");
  if (w.h == 0) return x;
  const Vector hidden = relu(matvec(w.w_1, x));
  return add(x, matvec(w.w_2, hidden));
}

double logit_scale(ScaleMode mode, std::size_t attendable, std::size_t head_dim) {
  switch (mode) {
    case ScaleMode::kInverseTokenCount:
      return 1.0 / static_cast<double>(attendable);
    case ScaleMode::kInverseSqrtHeadDim:
      return 1.0 / std::sqrt(static_cast<double>(head_dim));
  }
  throw ContractViolation("logit_scale: unknown mode");
}

StepResult step_reference(const ToyModelWeights& w, const std::vector<Vector>& history,
                          ScaleMode mode) {
  if (history.empty()) throw ContractViolation("step_reference: empty history");
  const std::size_t t = history.size();
  const Vector& x = history.back();
  if (x.size() != w.d) throw ContractViolation("step_reference: token length must be d");

  const Vector query = vecmat(x, w.w_q);
  const double scale = logit_scale(mode, t, w.p);

  Vector logits(t);
  for (std::size_t j = 0; j < t; ++j) {
    logits[j] = scale * dot(query, vecmat(history[j], w.w_k));
  }

  StepResult result;
  result.score_row = softmax(logits);

  Vector mix(w.p, 0.0);
  for (std::size_t j = 0; j < t; ++j) {
    const Vector v = vecmat(history[j], w.w_v);
    const double s = result.score_row[j];
    for (std::size_t i = 0; i < w.p; ++i) mix[i] += s * v[i];
  }
  result.attention_out = vecmat(mix, w.w_o);
  result.next = mlp(w, result.attention_out);
  if (w.normalize_outputs) result.next = normalized(result.next);
  return result;
}

AttentionTrace::AttentionTrace(std::size_t layers, std::size_t heads)
    : layers_(layers), heads_(heads), rows_(layers * heads) {
  if (layers == 0 || heads == 0) {
    throw ContractViolation("trace: layers and heads must be positive");
  }
}

std::size_t AttentionTrace::index(std::size_t layer, std::size_t head) const {
  if (layer >= layers_ || head >= heads_) {
    throw ContractViolation("trace: layer/head out of range");
  }
  return layer * heads_ + head;
}

void AttentionTrace::add_row(std::size_t layer, std::size_t head, TraceRow row) {
  if (row.key_positions.size() != row.scores.size()) {
    throw ContractViolation("trace: key positions and scores must align");
  }
  rows_[index(layer, head)].push_back(std::move(row));
}

bool AttentionTrace::has_row(std::size_t layer, std::size_t head,
                             std::size_t query_pos) const {
  for (const auto& row : rows_[index(layer, head)]) {
    if (row.query_pos == query_pos) return true;
  }
  return false;
}

const TraceRow& AttentionTrace::row(std::size_t layer, std::size_t head,
                                    std::size_t query_pos) const {
  for (const auto& row : rows_[index(layer, head)]) {
    if (row.query_pos == query_pos) return row;
  }
  throw ContractViolation("trace: no row recorded for query position");
}

const std::vector<TraceRow>& AttentionTrace::rows(std::size_t layer,
                                                  std::size_t head) const {
  return rows_[index(layer, head)];
}

std::size_t AttentionTrace::max_query_pos(std::size_t layer, std::size_t head) const {
  const auto& list = rows_[index(layer, head)];
  if (list.empty()) throw ContractViolation("trace: no rows recorded");
  std::size_t best = 0;
  for (const auto& row : list) best = std::max(best, row.query_pos);
  return best;
}

GenerationRun generate_reference(const ToyModelWeights& w,
                                 const std::vector<Vector>& prompt,
                                 std::size_t steps, ScaleMode mode) {
  w.validate();
  if (prompt.empty()) throw ContractViolation("generate: prompt must be non-empty");
  GenerationRun run;
  run.prompt_length = prompt.size();
  run.tokens = prompt;
  run.trace = AttentionTrace(1, 1);
  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t t = run.tokens.size();
    StepResult sr = step_reference(w, run.tokens, mode);
    TraceRow row;
    row.query_pos = t - 1;
    row.key_positions.resize(t);
    for (std::size_t j = 0; j < t; ++j) row.key_positions[j] = j;
    row.scores = std::move(sr.score_row);
    run.trace.add_row(0, 0, std::move(row));
    run.tokens.push_back(std::move(sr.next));
  }
  return run;
}

GenerationRun generate_compressed(const ToyModelWeights& w,
                                  const std::vector<Vector>& prompt,
                                  std::size_t steps, const kv::CacheConfig& cache_cfg,
                                  ScaleMode mode) {
  w.validate();
  if (prompt.empty()) throw ContractViolation("generate: prompt must be non-empty");
  kv::BudgetedKvCache cache(cache_cfg, w.p);

  GenerationRun run;
  run.prompt_length = prompt.size();
  run.tokens = prompt;
  run.trace = AttentionTrace(1, 1);

  auto append_token = [&](const Vector& token, std::size_t position) {
    cache.append(vecmat(token, w.w_k), vecmat(token, w.w_v), position);
  };
  for (std::size_t j = 0; j < prompt.size(); ++j) append_token(prompt[j], j);

  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t t = run.tokens.size();
    const Vector& x = run.tokens.back();
    const Vector query = vecmat(x, w.w_q);
    const double scale = logit_scale(mode, t, w.p);

    auto att = cache.estimate_attention(query, scale);
    if (cache.config().maintained_counters) {
      cache.record_scores(att.scores, t);
    } else {
      cache.store_query(query, scale, t);
    }

    TraceRow row;
    row.query_pos = t - 1;
    row.key_positions = cache.positions();
    row.scores = att.scores;
    run.trace.add_row(0, 0, std::move(row));

    Vector a = vecmat(att.output, w.w_o);
    Vector next = mlp(w, a);
    if (w.normalize_outputs) next = normalized(next);
    append_token(next, t);
    run.tokens.push_back(std::move(next));
    run.occupancy.push_back(cache.occupancy());
  }

  for (const auto& event : cache.eviction_log()) {
    for (const auto& rec : event.result.evicted) {
      run.eviction_log.push_back({event.step, 0, 0, rec.position, rec.counter});
    }
  }
  return run;
}

void MultiHeadToyConfig::validate() const {
  if (layers == 0 || heads == 0 || head_dim == 0) {
    throw ContractViolation("multihead config: dimensions must be positive");
  }
  if (model_dim != heads * head_dim) {
    throw ContractViolation("multihead config: model_dim must equal heads * head_dim");
  }
  if (layer_weights.size() != layers) {
    throw ContractViolation("multihead config: one weight set per layer required");
  }
  for (const auto& lw : layer_weights) {
    if (lw.w_q.size() != heads || lw.w_k.size() != heads || lw.w_v.size() != heads ||
        lw.w_o.size() != heads) {
      throw ContractViolation("multihead config: one projection per head required");
    }
  }
}

MultiHeadToyConfig random_multihead(std::size_t layers, std::size_t heads,
                                    std::size_t head_dim, std::size_t mlp_hidden,
                                    double attn_scale, double mlp_scale, Rng& rng,
                                    bool normalize_outputs) {
  MultiHeadToyConfig config;
  config.layers = layers;
  config.heads = heads;
  config.head_dim = head_dim;
  config.model_dim = heads * head_dim;
  config.mlp_hidden = mlp_hidden;
  config.normalize_outputs = normalize_outputs;
  config.layer_weights.resize(layers);
  for (auto& lw : config.layer_weights) {
    for (std::size_t h = 0; h < heads; ++h) {
      lw.w_q.push_back(rng.gaussian_matrix(config.model_dim, head_dim, attn_scale));
      lw.w_k.push_back(rng.gaussian_matrix(config.model_dim, head_dim, attn_scale));
      lw.w_v.push_back(rng.gaussian_matrix(config.model_dim, head_dim, attn_scale));
      lw.w_o.push_back(rng.gaussian_matrix(head_dim, config.model_dim, attn_scale));
    }
    lw.w_1 = rng.gaussian_matrix(mlp_hidden, config.model_dim, mlp_scale);
    lw.w_2 = rng.gaussian_matrix(config.model_dim, mlp_hidden, mlp_scale);
  }
  return config;
}

GenerationRun generate_multihead(const MultiHeadToyConfig& config,
                                 const std::vector<Vector>& prompt, std::size_t steps,
                                 const std::vector<std::size_t>& budgets,
                                 const kv::CacheConfig& cache_template) {
  config.validate();
  if (prompt.empty()) throw ContractViolation("generate: prompt must be non-empty");
  if (budgets.size() != config.layers * config.heads) {
    throw ContractViolation("generate_multihead: need one budget per (layer, head)");
  }

  std::vector<kv::BudgetedKvCache> caches;
  caches.reserve(budgets.size());
  for (std::size_t i = 0; i < budgets.size(); ++i) {
    kv::CacheConfig cfg = cache_template;
    cfg.budget = budgets[i];
    caches.emplace_back(cfg, config.head_dim);
  }
  auto cache_at = [&](std::size_t layer, std::size_t head) -> kv::BudgetedKvCache& {
    return caches[layer * config.heads + head];
  };

  GenerationRun run;
  run.prompt_length = prompt.size();
  run.tokens = prompt;
  run.trace = AttentionTrace(config.layers, config.heads);

  const double scale = 1.0 / std::sqrt(static_cast<double>(config.head_dim));

  // Runs one token through the stack, filling caches. Records trace rows
  // when record is set (generation steps only).
  auto process_token = [&](const Vector& token, std::size_t position, bool record) {
    Vector x = token;
    for (std::size_t layer = 0; layer < config.layers; ++layer) {
      const auto& lw = config.layer_weights[layer];
      Vector att_sum(config.model_dim, 0.0);
      for (std::size_t head = 0; head < config.heads; ++head) {
        auto& cache = cache_at(layer, head);
        cache.append(vecmat(x, lw.w_k[head]), vecmat(x, lw.w_v[head]), position);
        const Vector query = vecmat(x, lw.w_q[head]);
        auto att = cache.estimate_attention(query, scale);
        if (cache.config().maintained_counters) {
          cache.record_scores(att.scores, position + 1);
        } else {
          cache.store_query(query, scale, position + 1);
        }
        if (record) {
          TraceRow row;
          row.query_pos = position;
          row.key_positions = cache.positions();
          row.scores = att.scores;
          run.trace.add_row(layer, head, std::move(row));
        }
        const Vector head_out = vecmat(att.output, lw.w_o[head]);
        for (std::size_t i = 0; i < config.model_dim; ++i) att_sum[i] += head_out[i];
      }
      Vector y = add(x, att_sum);
      if (config.mlp_hidden > 0) {
        const Vector hidden = relu(matvec(lw.w_1, y));
        y = add(y, matvec(lw.w_2, hidden));
      }
      x = std::move(y);
    }
    return x;
  };

  for (std::size_t j = 0; j < prompt.size(); ++j) {
    if (j + 1 == prompt.size()) break;  // last prompt token feeds the first step
    process_token(prompt[j], j, false);
  }

  for (std::size_t step = 0; step < steps; ++step) {
    const std::size_t t = run.tokens.size();
    Vector next = process_token(run.tokens.back(), t - 1, true);
    if (config.normalize_outputs) next = normalized(next);
    run.tokens.push_back(std::move(next));
    std::size_t max_occ = 0;
    for (const auto& cache : caches) max_occ = std::max(max_occ, cache.occupancy());
    run.occupancy.push_back(max_occ);
  }

  for (std::size_t layer = 0; layer < config.layers; ++layer) {
    for (std::size_t head = 0; head < config.heads; ++head) {
      for (const auto& event : cache_at(layer, head).eviction_log()) {
        for (const auto& rec : event.result.evicted) {
          run.eviction_log.push_back({event.step, head, layer, rec.position, rec.counter});
        }
      }
    }
  }
  return run;
}

std::vector<Vector> random_prompt(std::size_t length, std::size_t dim, Rng& rng) {
  std::vector<Vector> prompt(length);
  for (auto& token : prompt) token = rng.unit_vector(dim);
  return prompt;
}

std::vector<Vector> biased_prompt(std::size_t length, std::size_t dim,
                                  const Vector& direction, double bias_fraction,
                                  double wobble, Rng& rng) {
  if (direction.size() != dim) {
    throw ContractViolation("biased_prompt: direction length must match dim");
  }
  std::vector<Vector> prompt(length);
  for (std::size_t i = 0; i < length; ++i) {
    const bool biased = rng.uniform() < bias_fraction;
    Vector noise = rng.gaussian_vector(dim, wobble);
    if (biased) {
      prompt[i] = normalized(add(direction, noise));
    } else {
      // Mostly orthogonal to the planted direction.
      Vector token = rng.unit_vector(dim);
      const double along = dot(token, direction);
      for (std::size_t j = 0; j < dim; ++j) token[j] -= along * direction[j];
      const double n = norm2(token);
      prompt[i] = n > 1e-9 ? scaled(token, 1.0 / n) : rng.unit_vector(dim);
    }
  }
  return prompt;
}

}  // namespace budgetkv::toy
