#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "budgetkv/kvcache.hpp"
#include "budgetkv/numerics.hpp"
#include "budgetkv/rng.hpp"

namespace budgetkv::toy {

// Single-head attention followed by a two-layer MLP with a skip
// connection: next = a + W2 relu(W1 a), where a mixes the value
// projections of the history under softmax attention.
struct ToyModelWeights {
  std::size_t d = 0;  // token dimension
  std::size_t p = 0;  // projection dimension
  std::size_t h = 0;  // MLP hidden dimension
  Matrix w_q, w_k, w_v;  // d x p
  Matrix w_o;            // p x d
  Matrix w_1;            // h x d
  Matrix w_2;            // d x h
  bool normalize_outputs = false;

  void validate() const;
};

ToyModelWeights random_weights(std::size_t d, std::size_t p, std::size_t h,
                               double attn_scale, double mlp_scale, Rng& rng,
                               bool normalize_outputs);

// relu MLP with skip connection.
Vector mlp(const ToyModelWeights& w, const Vector& x);

// Attention logit scaling for one step.
enum class ScaleMode {
  kInverseTokenCount,   // 1 / t, t = attendable tokens
  kInverseSqrtHeadDim,  // 1 / sqrt(d_head)
};

double logit_scale(ScaleMode mode, std::size_t attendable, std::size_t head_dim);

struct StepResult {
  Vector next;           // emitted token
  Vector score_row;      // attention scores over the history
  Vector attention_out;  // pre-MLP attention output a_t
};

// One full-history generation step: the query is the last history token
// and it attends over the whole history (itself included).
StepResult step_reference(const ToyModelWeights& w, const std::vector<Vector>& history,
                          ScaleMode mode = ScaleMode::kInverseTokenCount);

// One attention score row, keyed by the token positions it covers.
struct TraceRow {
  std::size_t query_pos = 0;
  std::vector<std::size_t> key_positions;
  Vector scores;
};

// Per (layer, head) score rows recorded during generation. The attendable
// count at query position q is q + 1.
class AttentionTrace {
 public:
  AttentionTrace() : AttentionTrace(1, 1) {}
  AttentionTrace(std::size_t layers, std::size_t heads);

  std::size_t layers() const { return layers_; }
  std::size_t heads() const { return heads_; }

  void add_row(std::size_t layer, std::size_t head, TraceRow row);
  bool has_row(std::size_t layer, std::size_t head, std::size_t query_pos) const;
  const TraceRow& row(std::size_t layer, std::size_t head, std::size_t query_pos) const;
  const std::vector<TraceRow>& rows(std::size_t layer, std::size_t head) const;
  std::size_t max_query_pos(std::size_t layer, std::size_t head) const;

 private:
  std::size_t index(std::size_t layer, std::size_t head) const;
  std::size_t layers_;
  std::size_t heads_;
  std::vector<std::vector<TraceRow>> rows_;
};

struct GenerationRun {
  std::vector<Vector> tokens;  // prompt followed by generated tokens
  std::size_t prompt_length = 0;
  AttentionTrace trace;
  std::vector<kv::EvictionLogRow> eviction_log;
  std::vector<std::size_t> occupancy;  // per generation step, max over heads
  std::uint64_t seed = 0;
};

GenerationRun generate_reference(const ToyModelWeights& w,
                                 const std::vector<Vector>& prompt,
                                 std::size_t steps,
                                 ScaleMode mode = ScaleMode::kInverseTokenCount);

GenerationRun generate_compressed(const ToyModelWeights& w,
                                  const std::vector<Vector>& prompt,
                                  std::size_t steps, const kv::CacheConfig& cache_cfg,
                                  ScaleMode mode = ScaleMode::kInverseTokenCount);

// Multi-head, multi-layer variant with residual attention and one budgeted
// cache per (layer, head). Attention uses 1/sqrt(head_dim) logits.
struct MultiHeadToyConfig {
  std::size_t layers = 1;
  std::size_t heads = 1;
  std::size_t head_dim = 0;
  std::size_t model_dim = 0;  // heads * head_dim
  std::size_t mlp_hidden = 0;
  bool normalize_outputs = false;

  struct LayerWeights {
    std::vector<Matrix> w_q, w_k, w_v;  // per head, model_dim x head_dim
    std::vector<Matrix> w_o;            // per head, head_dim x model_dim
    Matrix w_1;                         // mlp_hidden x model_dim
    Matrix w_2;                         // model_dim x mlp_hidden
  };
  std::vector<LayerWeights> layer_weights;

  void validate() const;
};

MultiHeadToyConfig random_multihead(std::size_t layers, std::size_t heads,
                                    std::size_t head_dim, std::size_t mlp_hidden,
                                    double attn_scale, double mlp_scale, Rng& rng,
                                    bool normalize_outputs);

// budgets has one entry per (layer, head), layer-major. cache_template
// supplies the shared r/w/m and mode settings; its budget field is
// overridden per head.
GenerationRun generate_multihead(const MultiHeadToyConfig& config,
                                 const std::vector<Vector>& prompt, std::size_t steps,
                                 const std::vector<std::size_t>& budgets,
                                 const kv::CacheConfig& cache_template);

// Synthetic unit-norm prompt. bias_fraction of the tokens are drawn close
// to the given direction (used by the planted-structure experiments).
std::vector<Vector> random_prompt(std::size_t length, std::size_t dim, Rng& rng);
std::vector<Vector> biased_prompt(std::size_t length, std::size_t dim,
                                  const Vector& direction, double bias_fraction,
                                  double wobble, Rng& rng);

}  // namespace budgetkv::toy
