#pragma once

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <vector>

#include "budgetkv/numerics.hpp"
#include "budgetkv/quant.hpp"

namespace budgetkv::kv {

struct CacheConfig {
  std::size_t budget = 0;          // B, max entries held
  std::size_t recent_window = 10;  // r, newest entries exempt from eviction
  std::size_t history_window = 400;  // w, flag rows that feed the counters
  std::size_t drop_amount = 0;     // m, entries evicted per compression
  // When true the caller records score flags every step; when false the
  // cache keeps recent query rows and rebuilds the flags at compress time.
  bool maintained_counters = true;
  bool quantized = false;
  std::size_t group_size = 64;

  void validate() const;
};

struct CacheEntry {
  std::size_t token_position = 0;
  Vector key;
  Vector value;
  // Quantized storage; key/value stay empty in quantized mode.
  std::vector<quant::QuantizedBlock> qkey;
  std::vector<quant::QuantizedBlock> qvalue;
};

// One row of low-score flags, aligned to the cache entries that existed
// when it was recorded (a prefix of the current entries, since appends
// are position-monotone and evictions re-index the rows).
struct FlagRow {
  std::size_t step = 0;
  std::vector<bool> flags;  // true = score fell below the mixing threshold
};

class FlagHistory {
 public:
  explicit FlagHistory(std::size_t window) : window_(window) {}

  void push(FlagRow row);
  void drop_entries(const std::vector<std::size_t>& sorted_indices);
  void clear() { rows_.clear(); }

  // Low-score counts per entry over the retained rows.
  std::vector<std::size_t> counters(std::size_t occupancy) const;

  std::size_t size() const { return rows_.size(); }
  const std::deque<FlagRow>& rows() const { return rows_; }

 private:
  std::size_t window_;
  std::deque<FlagRow> rows_;
};

struct EvictionRecord {
  std::size_t position = 0;
  std::size_t counter = 0;
};

struct CompressResult {
  std::vector<EvictionRecord> evicted;  // ascending position
  // Fewer non-exempt entries than drop_amount; everything evictable went.
  bool partial = false;
};

struct EvictionEvent {
  std::size_t step = 0;  // appends seen when the compression ran
  CompressResult result;
};

// Fixed-budget per-head key/value store. Appends beyond the budget trigger
// a compression that drops the entries whose attention scores sat below
// the averaging threshold most often over the recent history window; the
// newest entries are always kept.
class BudgetedKvCache {
 public:
  BudgetedKvCache(CacheConfig config, std::size_t dim);

  // Appends one entry; position must exceed every position seen before.
  // Compresses when occupancy would exceed the budget.
  void append(const Vector& key, const Vector& value, std::size_t position);

  // Pushes one flag row: flag_i = scores[i] < 1 / attendable_count.
  // scores must align with the current entries and sum to 1.
  void record_scores(const Vector& scores, std::size_t attendable_count);

  // Remembers a projected query row for compress-time flag rebuilding
  // (the non-maintained counter variant).
  void store_query(const Vector& query, double scale, std::size_t attendable_count);

  CompressResult compress();

  struct Attention {
    Vector output;
    Vector scores;  // aligned with entry order
  };
  // scores = softmax(scale * <query, key_i>), output = sum scores_i * value_i.
  Attention estimate_attention(const Vector& query, double scale) const;

  // The counter mode is fixed at construction.
  void set_counter_mode(bool);

  std::size_t occupancy() const { return entries_.size(); }
  std::size_t dim() const { return dim_; }
  std::size_t steps_seen() const { return appends_; }
  const CacheConfig& config() const { return config_; }
  const std::vector<CacheEntry>& entries() const { return entries_; }
  std::vector<std::size_t> positions() const;
  bool contains(std::size_t position) const;

  Vector key_of(std::size_t index) const;    // dequantized in quantized mode
  Vector value_of(std::size_t index) const;

  const std::vector<EvictionEvent>& eviction_log() const { return eviction_log_; }
  const FlagHistory& flag_history() const { return flags_; }

  quant::QuantizedCacheDump quantized_dump() const;

 private:
  struct StoredQuery {
    Vector query;
    double scale = 0.0;
    std::size_t attendable_count = 0;
    std::size_t last_position = 0;  // newest entry position when stored
  };

  void rebuild_flags_from_queries();
  std::vector<bool> flags_for_query(const StoredQuery& q) const;

  CacheConfig config_;
  std::size_t dim_;
  std::vector<CacheEntry> entries_;
  FlagHistory flags_;
  std::deque<StoredQuery> stored_queries_;
  std::size_t appends_ = 0;
  bool has_last_position_ = false;
  std::size_t last_position_ = 0;
  std::vector<EvictionEvent> eviction_log_;
};

// Optional eviction log export: step,head,layer,evicted_position,counter_value.
struct EvictionLogRow {
  std::size_t step = 0;
  std::size_t head = 0;
  std::size_t layer = 0;
  std::size_t evicted_position = 0;
  std::size_t counter_value = 0;
};

void write_eviction_log_csv(const std::vector<EvictionLogRow>& rows, std::ostream& out);

}  // namespace budgetkv::kv
