#include "budgetkv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "budgetkv/errors.hpp"

namespace budgetkv::analysis {

namespace {

double threshold_for(std::size_t query_pos) {
  // attendable count at query q is q + 1 (self-attention included).
  return 1.0 / static_cast<double>(query_pos + 1);
}

// Pivotal positions for a single recorded query row: strictly above the
// averaging threshold and strictly before the query itself.
void collect_pivotal(const toy::TraceRow& row, std::set<std::size_t>& out) {
  const double threshold = threshold_for(row.query_pos);
  for (std::size_t i = 0; i < row.scores.size(); ++i) {
    if (row.key_positions[i] >= row.query_pos) continue;
    if (row.scores[i] > threshold) out.insert(row.key_positions[i]);
  }
}

}  // namespace

std::vector<bool> discretize_map(const toy::AttentionTrace& trace, std::size_t layer,
                                 std::size_t head, std::size_t query_pos) {
  const toy::TraceRow& row = trace.row(layer, head, query_pos);
  const double threshold = threshold_for(query_pos);
  std::vector<bool> out(row.scores.size());
  for (std::size_t i = 0; i < row.scores.size(); ++i) {
    out[i] = row.scores[i] > threshold;
  }
  return out;
}

PivotalSet pivotal_union(const toy::AttentionTrace& trace, std::size_t layer,
                         std::size_t head, std::size_t a, std::size_t b) {
  if (a > b) throw ContractViolation("pivotal_union: need a <= b");
  if (b > trace.max_query_pos(layer, head)) {
    throw ContractViolation("pivotal_union: range exceeds recorded queries");
  }
  PivotalSet set;
  set.range_begin = a;
  set.range_end = b;
  for (const auto& row : trace.rows(layer, head)) {
    if (row.query_pos < a || row.query_pos > b) continue;
    collect_pivotal(row, set.positions);
  }
  return set;
}

PersistenceEntry persistence_ratio(const toy::AttentionTrace& trace, std::size_t layer,
                                   std::size_t head, std::size_t t, std::size_t l) {
  if (t >= l) throw ContractViolation("persistence_ratio: need t < l");
  if (l > trace.max_query_pos(layer, head)) {
    throw ContractViolation("persistence_ratio: l exceeds recorded queries");
  }
  const PivotalSet early = pivotal_union(trace, layer, head, 0, t);
  const PivotalSet late = pivotal_union(trace, layer, head, t + 1, l);

  std::size_t denominator = 0;
  std::size_t intersection = 0;
  for (std::size_t pos : late.positions) {
    if (pos > t) continue;
    ++denominator;
    if (early.positions.count(pos) > 0) ++intersection;
  }

  PersistenceEntry entry;
  entry.layer = layer;
  entry.head = head;
  entry.split = t;
  entry.pivotal_fraction = t == 0 ? 0.0
                                  : static_cast<double>(early.positions.size()) /
                                        static_cast<double>(t);
  if (denominator == 0) {
    entry.ratio = 1.0;
    entry.degenerate = true;
  } else {
    entry.ratio = static_cast<double>(intersection) / static_cast<double>(denominator);
  }
  return entry;
}

ChangeRatioReport change_ratio(const toy::AttentionTrace& compressed,
                               const toy::AttentionTrace& reference,
                               std::size_t layer, std::size_t head) {
  ChangeRatioReport report;
  for (const auto& ref_row : reference.rows(layer, head)) {
    const toy::TraceRow* comp_row = nullptr;
    if (compressed.has_row(layer, head, ref_row.query_pos)) {
      comp_row = &compressed.row(layer, head, ref_row.query_pos);
    }
    for (std::size_t i = 0; i < ref_row.scores.size(); ++i) {
      const double original = ref_row.scores[i];
      if (original < 1e-300) {
        ++report.skipped;
        continue;
      }
      double compressed_score = 0.0;
      bool present = false;
      if (comp_row != nullptr) {
        for (std::size_t j = 0; j < comp_row->key_positions.size(); ++j) {
          if (comp_row->key_positions[j] == ref_row.key_positions[i]) {
            compressed_score = comp_row->scores[j];
            present = true;
            break;
          }
        }
      }
      if (!present) {
        report.ratios.push_back(-1.0);  // evicted key: score is exactly zero
        ++report.evicted_pairs;
      } else {
        report.ratios.push_back((compressed_score - original) / original);
      }
    }
  }
  return report;
}

MlpSimilarityReport mlp_io_similarity(const toy::ToyModelWeights& weights,
                                      std::size_t samples, Rng& rng) {
  if (samples < 1) throw ContractViolation("mlp_io_similarity: samples must be >= 1");
  MlpSimilarityReport report;
  double cosine_sum = 0.0;
  double ratio_sum = 0.0;
  bool ratio_infinite = false;
  for (std::size_t i = 0; i < samples; ++i) {
    const Vector x = rng.unit_vector(weights.d);
    const Vector y = toy::mlp(weights, x);
    cosine_sum += cosine_similarity(x, y);
    const Vector branch = sub(y, x);  // W2 relu(W1 x)
    const double bn = norm2(branch);
    if (bn == 0.0) {
      ratio_infinite = true;
    } else {
      ratio_sum += norm2(x) / bn;
    }
  }
  report.mean_cosine = cosine_sum / static_cast<double>(samples);
  report.mean_norm_ratio = ratio_infinite
                               ? std::numeric_limits<double>::infinity()
                               : ratio_sum / static_cast<double>(samples);
  return report;
}

std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                    std::size_t bins, double lo, double hi) {
  if (bins == 0 || !(hi > lo)) throw ContractViolation("histogram: bad binning");
  std::vector<HistogramBin> out(bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i < bins; ++i) {
    out[i].left = lo + width * static_cast<double>(i);
    out[i].right = lo + width * static_cast<double>(i + 1);
  }
  for (double v : values) {
    if (v < lo || v > hi) continue;
    std::size_t idx = v >= hi ? bins - 1
                              : static_cast<std::size_t>((v - lo) / width);
    idx = std::min(idx, bins - 1);
    ++out[idx].count;
  }
  return out;
}

}  // namespace budgetkv::analysis
