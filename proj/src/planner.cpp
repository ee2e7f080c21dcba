#include "budgetkv/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "budgetkv/errors.hpp"

namespace budgetkv::plan {

void DeploymentSpec::validate() const {
  if (layers == 0 || hidden == 0 || seq_len == 0) {
    throw ContractViolation("deployment spec: layers, hidden, seq_len must be positive");
  }
  if (!(bytes_per_element > 0.0)) {
    throw ContractViolation("deployment spec: bytes_per_element must be positive");
  }
}

std::uint64_t kv_cache_bytes(const DeploymentSpec& spec) {
  spec.validate();
  const double bytes = 2.0 * static_cast<double>(spec.layers) *
                       static_cast<double>(spec.batch) *
                       static_cast<double>(spec.seq_len) *
                       static_cast<double>(spec.hidden) * spec.bytes_per_element;
  return static_cast<std::uint64_t>(std::llround(bytes));
}

std::uint64_t weight_bytes(std::uint64_t param_count, double bytes_per_element) {
  if (!(bytes_per_element > 0.0)) {
    throw ContractViolation("weight_bytes: bytes_per_element must be positive");
  }
  return static_cast<std::uint64_t>(
      std::llround(static_cast<double>(param_count) * bytes_per_element));
}

std::size_t max_batch(const DeploymentSpec& spec) {
  spec.validate();
  const std::uint64_t weights = weight_bytes(spec.param_count, spec.bytes_per_element);
  if (weights + spec.reserved_bytes > spec.device_memory_bytes) {
    throw CapacityError("max_batch: weights exceed device memory");
  }
  DeploymentSpec one = spec;
  one.batch = 1;
  const std::uint64_t per_sample = kv_cache_bytes(one);
  if (per_sample == 0) return 0;
  return static_cast<std::size_t>(
      (spec.device_memory_bytes - weights - spec.reserved_bytes) / per_sample);
}

std::size_t BudgetAllocation::total() const {
  return std::accumulate(budgets.begin(), budgets.end(), std::size_t{0});
}

std::size_t BudgetAllocation::at(std::size_t layer, std::size_t head) const {
  if (layer >= layers || head >= heads) {
    throw ContractViolation("allocation: layer/head out of range");
  }
  return budgets[layer * heads + head];
}

std::size_t BudgetAllocation::layer_total(std::size_t layer) const {
  std::size_t sum = 0;
  for (std::size_t h = 0; h < heads; ++h) sum += at(layer, h);
  return sum;
}

BudgetAllocation allocate_budget(std::size_t total, std::size_t layers,
                                 std::size_t heads, AllocationStrategy strategy,
                                 double slope, std::size_t floor_per_head) {
  if (layers == 0 || heads == 0) {
    throw ContractViolation("allocate_budget: layers and heads must be positive");
  }
  if (strategy == AllocationStrategy::kRamp && slope < 0.0) {
    throw ContractViolation("allocate_budget: slope must be >= 0");
  }
  const std::size_t min_total = layers * heads * floor_per_head;
  if (total < min_total) {
    throw ContractViolation("allocate_budget: total below the per-head floor");
  }

  std::vector<double> weights(layers, 1.0);
  if (strategy == AllocationStrategy::kRamp && layers > 1) {
    for (std::size_t l = 0; l < layers; ++l) {
      weights[l] = 1.0 + slope * static_cast<double>(l) / static_cast<double>(layers - 1);
    }
  }
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);

  // Proportional layer shares, floored, residue on the last layer.
  std::vector<std::size_t> layer_budget(layers, 0);
  std::size_t assigned = 0;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    layer_budget[l] = static_cast<std::size_t>(
        static_cast<double>(total) * weights[l] / weight_sum);
    assigned += layer_budget[l];
  }
  layer_budget[layers - 1] = total - assigned;

  // Lift any layer below its floor, paying from the richest layers.
  const std::size_t layer_floor = heads * floor_per_head;
  for (std::size_t l = 0; l < layers; ++l) {
    while (layer_budget[l] < layer_floor) {
      std::size_t donor = layers;
      for (std::size_t m = layers; m-- > 0;) {
        if (m != l && layer_budget[m] > layer_floor) {
          donor = m;
          break;
        }
      }
      if (donor == layers) {
        throw ContractViolation("allocate_budget: infeasible floor");
      }
      const std::size_t need = layer_floor - layer_budget[l];
      const std::size_t give = std::min(need, layer_budget[donor] - layer_floor);
      layer_budget[donor] -= give;
      layer_budget[l] += give;
    }
  }

  BudgetAllocation alloc;
  alloc.layers = layers;
  alloc.heads = heads;
  alloc.strategy = strategy;
  alloc.slope = strategy == AllocationStrategy::kRamp ? slope : 0.0;
  alloc.budgets.resize(layers * heads, 0);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t base = layer_budget[l] / heads;
    for (std::size_t h = 0; h < heads; ++h) alloc.budgets[l * heads + h] = base;
    alloc.budgets[l * heads + heads - 1] += layer_budget[l] - base * heads;
  }
  return alloc;
}

}  // namespace budgetkv::plan
