#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace budgetkv::plan {

// Model/deployment shape for the memory arithmetic. Table figures in GiB.
struct DeploymentSpec {
  std::string name;
  std::size_t layers = 0;
  std::size_t hidden = 0;
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  double bytes_per_element = 2.0;  // fp16 by default
  std::uint64_t param_count = 0;
  std::uint64_t device_memory_bytes = 0;
  std::uint64_t reserved_bytes = 0;  // activation/communication buffer

  void validate() const;
};

constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

// 2 (key+value) * layers * batch * seq_len * hidden * bytes_per_element.
std::uint64_t kv_cache_bytes(const DeploymentSpec& spec);

std::uint64_t weight_bytes(std::uint64_t param_count, double bytes_per_element);

// floor((device - weights - reserved) / kv bytes of one sample at full
// sequence length). Throws CapacityError when the weights alone do not fit.
std::size_t max_batch(const DeploymentSpec& spec);

enum class AllocationStrategy { kUniform, kRamp };

struct BudgetAllocation {
  std::size_t layers = 0;
  std::size_t heads = 0;
  std::vector<std::size_t> budgets;  // layer-major, one per (layer, head)
  AllocationStrategy strategy = AllocationStrategy::kUniform;
  double slope = 0.0;

  std::size_t total() const;
  std::size_t at(std::size_t layer, std::size_t head) const;
  std::size_t layer_total(std::size_t layer) const;
};

// Splits a total token budget over layers and heads. Uniform gives every
// layer an equal share; ramp weights layer l by 1 + slope * l / (L - 1),
// so later layers get more. Heads within a layer split evenly. Rounding
// residue lands on the last layer (and last head within a layer); every
// head ends up with at least floor_per_head.
BudgetAllocation allocate_budget(std::size_t total, std::size_t layers,
                                 std::size_t heads, AllocationStrategy strategy,
                                 double slope, std::size_t floor_per_head);

}  // namespace budgetkv::plan
