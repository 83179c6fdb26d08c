#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latentprobe/probe.hpp"

namespace lp::erase {

enum class StopReason { Significance, MaxIter };

struct IterationStats {
  double correlation;
  double p_value;
  bool removed;  // false for the final, non-significant probe
};

struct ErasureResult {
  std::vector<std::vector<double>> removed_directions;  // mutually orthonormal
  std::vector<IterationStats> per_iteration;
  transe::EmbeddingModel protected_model;
  StopReason stop_reason = StopReason::Significance;
};

struct EraseConfig {
  double significance = 0.01;
  int n_perm = 1000;
  int max_iter = -1;  // -1 means up to d iterations
  std::uint64_t seed = 0;
  int threads = 1;
  bool project_relations = true;  // keep relation vectors in the protected subspace
  probe::ProbeConfig probe;
};

// Iteratively finds the maximally correlated direction, tests it against the
// permutation null, and projects the embedding onto its orthogonal complement
// until no significant direction remains (or max_iter is hit).
ErasureResult erase_attribute(const transe::EmbeddingModel& model,
                              const std::string& attr,
                              const probe::AttributeTable& table,
                              const EraseConfig& config);

// rows(a) <- rows(a) (I - sum_k w_k w_k^T); directions must be orthonormal.
void apply_protection(double* a, std::size_t rows, std::size_t cols,
                      std::span<const std::vector<double>> directions);

// Convenience overload projecting entity rows (and optionally relation rows).
transe::EmbeddingModel apply_protection(const transe::EmbeddingModel& model,
                                        std::span<const std::vector<double>> directions,
                                        bool project_relations = true);

}  // namespace lp::erase
