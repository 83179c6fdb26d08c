#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latentprobe/transe.hpp"

namespace lp::eval {

struct ScoredLabelSet {
  std::vector<double> scores;
  std::vector<int> labels;  // 0/1

  void validate() const;
};

// P(score_pos > score_neg) + 1/2 P(tie), computed exactly via midranks.
double auc_roc(const ScoredLabelSet& data);

struct PrecisionResult {
  double value = 0.0;
  std::size_t n_cases = 0;
  std::size_t skipped = 0;  // positives whose candidate pool was too small
};

// For each test WTF positive (s, t): score t against pool_size sampled
// non-recommended second-order friends of s; the case scores 1 when t ranks
// in the top k (ties broken by entity index).
PrecisionResult precision_at_k(const transe::EmbeddingModel& model,
                               std::span<const hin::Edge> positives,
                               const hin::HinGraph& graph, int pool_size, int k,
                               std::uint64_t seed);

enum class Baseline { RandomSecond, MostFollowers, MostCoFollowed };

const char* to_string(Baseline baseline);

struct AucResult {
  double auc = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::size_t skipped = 0;
};

// AUC of a ranking heuristic over test positives vs sampled second-neighbor
// negatives (the same negative protocol model_auc uses, so the comparison is
// like for like).
AucResult baseline_auc(const hin::HinGraph& graph, std::span<const hin::Edge> test,
                       Baseline strategy, std::uint64_t seed, int neg_per_pos = 1);

AucResult model_auc(const transe::EmbeddingModel& model, const hin::HinGraph& graph,
                    std::span<const hin::Edge> test, std::uint64_t seed,
                    int neg_per_pos = 1);

struct NmiResult {
  double nmi_a = 0.0;
  double nmi_b = 0.0;
  double relative_drop = 0.0;  // 1 - nmi_b / nmi_a
};

// Normalized mutual information between equal-frequency score bins and labels
// for each set, plus the relative drop of b against a. Degenerate binning
// (all scores equal) yields nmi = 0 rather than an error.
NmiResult informativeness_nmi(const ScoredLabelSet& a, const ScoredLabelSet& b,
                              int bins = 16);

double nmi_score(const ScoredLabelSet& data, int bins);

}  // namespace lp::eval
