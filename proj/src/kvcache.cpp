#include "budgetkv/kvcache.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "budgetkv/errors.hpp"

namespace budgetkv::kv {

void CacheConfig::validate() const {
  if (budget < 1) throw ContractViolation("cache config: budget must be >= 1");
  if (recent_window + drop_amount > budget) {
    throw ContractViolation("cache config: recent_window + drop_amount must not exceed budget");
  }
  if (quantized && group_size < 1) {
    throw ContractViolation("cache config: group size must be >= 1");
  }
}

void FlagHistory::push(FlagRow row) {
  if (window_ == 0) return;
  if (row.step >= window_) {
    const std::size_t cutoff = row.step - window_;
    while (!rows_.empty() && rows_.front().step <= cutoff) rows_.pop_front();
  }
  rows_.push_back(std::move(row));
  while (rows_.size() > window_) rows_.pop_front();
}

void FlagHistory::drop_entries(const std::vector<std::size_t>& sorted_indices) {
  if (sorted_indices.empty()) return;
  for (auto& row : rows_) {
    std::vector<bool> kept;
    kept.reserve(row.flags.size());
    std::size_t next = 0;
    for (std::size_t i = 0; i < row.flags.size(); ++i) {
      if (next < sorted_indices.size() && sorted_indices[next] == i) {
        ++next;
        continue;
      }
      kept.push_back(row.flags[i]);
    }
    row.flags = std::move(kept);
  }
}

std::vector<std::size_t> FlagHistory::counters(std::size_t occupancy) const {
  std::vector<std::size_t> counts(occupancy, 0);
  for (const auto& row : rows_) {
    const std::size_t n = std::min(occupancy, row.flags.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (row.flags[i]) ++counts[i];
    }
  }
  return counts;
}

BudgetedKvCache::BudgetedKvCache(CacheConfig config, std::size_t dim)
    : config_(config), dim_(dim), flags_(config.history_window) {
  config_.validate();
  if (dim_ < 1) throw ContractViolation("cache: dim must be >= 1");
}

void BudgetedKvCache::append(const Vector& key, const Vector& value,
                             std::size_t position) {
  if (key.size() != dim_ || value.size() != dim_) {
    throw ContractViolation("append: key/value length does not match cache dim");
  }
  if (has_last_position_ && position <= last_position_) {
    throw ContractViolation("append: positions must be strictly increasing");
  }
  CacheEntry entry;
  entry.token_position = position;
  if (config_.quantized) {
    entry.qkey = quant::quantize_group(key, config_.group_size);
    entry.qvalue = quant::quantize_group(value, config_.group_size);
  } else {
    entry.key = key;
    entry.value = value;
  }
  entries_.push_back(std::move(entry));
  has_last_position_ = true;
  last_position_ = position;
  ++appends_;

  if (entries_.size() > config_.budget) {
    if (config_.drop_amount == 0) {
      throw ContractViolation("append: budget exceeded and drop_amount is 0");
    }
    EvictionEvent event;
    event.step = appends_;
    event.result = compress();
    eviction_log_.push_back(std::move(event));
  }
}

void BudgetedKvCache::record_scores(const Vector& scores,
                                    std::size_t attendable_count) {
  if (scores.size() != entries_.size()) {
    throw ContractViolation("record_scores: scores length does not match occupancy");
  }
  if (attendable_count == 0) {
    throw ContractViolation("record_scores: attendable_count must be >= 1");
  }
  double sum = 0.0;
  for (double s : scores) sum += s;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ContractViolation("record_scores: scores must sum to 1");
  }
  const double threshold = 1.0 / static_cast<double>(attendable_count);
  FlagRow row;
  row.step = appends_;
  row.flags.resize(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    row.flags[i] = scores[i] < threshold;  // equality survives
  }
  flags_.push(std::move(row));
}

void BudgetedKvCache::store_query(const Vector& query, double scale,
                                  std::size_t attendable_count) {
  if (query.size() != dim_) {
    throw ContractViolation("store_query: query length does not match cache dim");
  }
  if (attendable_count == 0) {
    throw ContractViolation("store_query: attendable_count must be >= 1");
  }
  if (config_.history_window == 0) return;
  StoredQuery stored;
  stored.query = query;
  stored.scale = scale;
  stored.attendable_count = attendable_count;
  stored.last_position = has_last_position_ ? last_position_ : 0;
  stored_queries_.push_back(std::move(stored));
  while (stored_queries_.size() > config_.history_window) stored_queries_.pop_front();
}

std::vector<bool> BudgetedKvCache::flags_for_query(const StoredQuery& q) const {
  // Only entries the query could have seen take part; they form a prefix
  // of the position-ordered entry list.
  std::size_t visible = 0;
  while (visible < entries_.size() &&
         entries_[visible].token_position <= q.last_position) {
    ++visible;
  }
  std::vector<bool> flags(visible, false);
  if (visible == 0) return flags;
  Vector logits(visible);
  for (std::size_t i = 0; i < visible; ++i) {
    logits[i] = q.scale * dot(q.query, key_of(i));
  }
  const Vector scores = softmax(logits);
  const double threshold = 1.0 / static_cast<double>(q.attendable_count);
  for (std::size_t i = 0; i < visible; ++i) flags[i] = scores[i] < threshold;
  return flags;
}

void BudgetedKvCache::rebuild_flags_from_queries() {
  flags_.clear();
  for (const auto& q : stored_queries_) {
    FlagRow row;
    row.step = q.attendable_count;
    row.flags = flags_for_query(q);
    flags_.push(std::move(row));
  }
}

CompressResult BudgetedKvCache::compress() {
  CompressResult result;
  if (config_.drop_amount == 0) return result;

  if (!config_.maintained_counters) rebuild_flags_from_queries();

  const std::size_t n = entries_.size();
  const std::size_t exempt = std::min(config_.recent_window, n);
  const std::size_t candidates = n - exempt;
  const std::vector<std::size_t> counters = flags_.counters(n);

  const std::size_t to_drop = std::min(config_.drop_amount, candidates);
  result.partial = candidates < config_.drop_amount;
  if (to_drop == 0) return result;

  std::vector<std::size_t> order(candidates);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (counters[a] != counters[b]) return counters[a] > counters[b];
    return entries_[a].token_position < entries_[b].token_position;
  });

  std::vector<std::size_t> drop(order.begin(), order.begin() + to_drop);
  std::sort(drop.begin(), drop.end());

  result.evicted.reserve(to_drop);
  for (std::size_t index : drop) {
    result.evicted.push_back({entries_[index].token_position, counters[index]});
  }

  std::vector<CacheEntry> kept;
  kept.reserve(n - to_drop);
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < drop.size() && drop[next] == i) {
      ++next;
      continue;
    }
    kept.push_back(std::move(entries_[i]));
  }
  entries_ = std::move(kept);
  flags_.drop_entries(drop);
  return result;
}

BudgetedKvCache::Attention BudgetedKvCache::estimate_attention(
    const Vector& query, double scale) const {
  if (entries_.empty()) throw ContractViolation("estimate_attention: empty cache");
  if (query.size() != dim_) {
    throw ContractViolation("estimate_attention: query length does not match cache dim");
  }
  Vector logits(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    logits[i] = scale * dot(query, key_of(i));
  }
  Attention att;
  att.scores = softmax(logits);
  att.output.assign(dim_, 0.0);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Vector v = value_of(i);
    const double w = att.scores[i];
    for (std::size_t j = 0; j < dim_; ++j) att.output[j] += w * v[j];
  }
  return att;
}

void BudgetedKvCache::set_counter_mode(bool) {
  throw ContractViolation("counter mode is fixed at construction");
}

std::vector<std::size_t> BudgetedKvCache::positions() const {
  std::vector<std::size_t> out;
  out.reserve(entries_.size());
  for (const auto& entry : entries_) out.push_back(entry.token_position);
  return out;
}

bool BudgetedKvCache::contains(std::size_t position) const {
  for (const auto& entry : entries_) {
    if (entry.token_position == position) return true;
  }
  return false;
}

Vector BudgetedKvCache::key_of(std::size_t index) const {
  const CacheEntry& entry = entries_.at(index);
  return config_.quantized ? quant::dequantize(entry.qkey) : entry.key;
}

Vector BudgetedKvCache::value_of(std::size_t index) const {
  const CacheEntry& entry = entries_.at(index);
  return config_.quantized ? quant::dequantize(entry.qvalue) : entry.value;
}

quant::QuantizedCacheDump BudgetedKvCache::quantized_dump() const {
  if (!config_.quantized) {
    throw ContractViolation("quantized_dump: cache is not in quantized mode");
  }
  quant::QuantizedCacheDump dump;
  dump.dim = static_cast<std::uint32_t>(dim_);
  dump.group_size = static_cast<std::uint32_t>(config_.group_size);
  dump.entries.reserve(entries_.size());
  for (const auto& entry : entries_) {
    quant::QuantizedEntryDump e;
    e.token_position = entry.token_position;
    e.key = entry.qkey;
    e.value = entry.qvalue;
    dump.entries.push_back(std::move(e));
  }
  return dump;
}

void write_eviction_log_csv(const std::vector<EvictionLogRow>& rows,
                            std::ostream& out) {
  out << "step,head,layer,evicted_position,counter_value\n";
  for (const auto& row : rows) {
    out << row.step << ',' << row.head << ',' << row.layer << ','
        << row.evicted_position << ',' << row.counter_value << '\n';
  }
}

}  // namespace budgetkv::kv
