#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "budgetkv/numerics.hpp"
#include "budgetkv/rng.hpp"
#include "budgetkv/toymodel.hpp"

namespace budgetkv::analysis {

// Tokens whose score exceeded the per-query averaging threshold anywhere
// in the query range [a, b]. The query token itself never qualifies.
struct PivotalSet {
  std::set<std::size_t> positions;
  std::size_t range_begin = 0;
  std::size_t range_end = 0;
  std::string threshold_rule = "score > 1/attendable(query)";
};

struct PersistenceEntry {
  std::size_t layer = 0;
  std::size_t head = 0;
  std::size_t split = 0;  // t, the first/later split query position
  double ratio = 0.0;
  double pivotal_fraction = 0.0;  // |S_0->t| / t
  bool degenerate = false;  // no later-half pivotal token landed in the first half
};

// score > 1/attendable(query_pos) per entry of the recorded row.
std::vector<bool> discretize_map(const toy::AttentionTrace& trace, std::size_t layer,
                                 std::size_t head, std::size_t query_pos);

PivotalSet pivotal_union(const toy::AttentionTrace& trace, std::size_t layer,
                         std::size_t head, std::size_t a, std::size_t b);

// ratio = |S_{t+1->l} ∩ S_{0->t}| / |S_{t+1->l} restricted to positions <= t|.
// An empty denominator reports ratio 1 with the degenerate flag set.
PersistenceEntry persistence_ratio(const toy::AttentionTrace& trace, std::size_t layer,
                                   std::size_t head, std::size_t t, std::size_t l);

struct ChangeRatioReport {
  std::vector<double> ratios;   // one per reference (query, key) pair kept
  std::size_t skipped = 0;      // reference scores below 1e-300
  std::size_t evicted_pairs = 0;  // pairs reported as exactly -1
};

// (score_compressed - score_reference) / score_reference per reference
// pair; a key missing from the compressed row counts as evicted and
// reports exactly -1.
ChangeRatioReport change_ratio(const toy::AttentionTrace& compressed,
                               const toy::AttentionTrace& reference,
                               std::size_t layer, std::size_t head);

struct MlpSimilarityReport {
  double mean_cosine = 0.0;
  // mean |x| / |W2 relu(W1 x)|; +inf when the MLP output vanishes.
  double mean_norm_ratio = 0.0;
};

MlpSimilarityReport mlp_io_similarity(const toy::ToyModelWeights& weights,
                                      std::size_t samples, Rng& rng);

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
};

std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                    std::size_t bins, double lo, double hi);

}  // namespace budgetkv::analysis
