#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latentprobe/probe.hpp"

namespace lp::rec {

struct SlateItem {
  hin::EntityId target;
  double score;
};

// Ranked top-k recommendation list for one source entity. Targets exclude the
// source and its Follow out-neighbors; scores are non-increasing with ties
// broken by entity index.
struct Slate {
  hin::EntityId source;
  std::vector<SlateItem> items;
};

Slate rank_slate(const transe::EmbeddingModel& model, hin::EntityId source,
                 const hin::HinGraph& graph, int k);

// Population standard deviation of the attribute over covered slate items;
// empty when fewer than 2 items are covered. `uncovered` counts skipped items.
std::optional<double> slate_diversity(const Slate& slate, const std::string& attr,
                                      const probe::AttributeTable& table,
                                      std::size_t* uncovered = nullptr);

struct CohensD {
  double d;
  double ci_lo, ci_hi;  // 95% percentile bootstrap
};

// d = (mean_t - mean_c) / pooled_sd, CI from resampling users with
// replacement. Equal-length samples are treated as paired by user.
CohensD cohens_d_bootstrap(std::span<const double> treatment,
                           std::span<const double> control, int bootstrap_b,
                           std::uint64_t seed);

// Per-entity distribution over n_topics topics, rows sum to 1. A row of NaN
// means the entity has no topic data.
struct TopicTable {
  std::size_t n = 0;
  std::size_t n_topics = 0;
  std::vector<double> rows;  // n * n_topics

  std::span<const double> row(std::size_t i) const {
    return {rows.data() + i * n_topics, n_topics};
  }
  bool covered(std::size_t i) const;
  void validate() const;  // nonnegative, sums to 1 within 1e-6
};

struct TopicCosine {
  double cosine;
  double ci_lo, ci_hi;
  std::size_t n_users;
};

// Pools the topic distributions of all recommended friends per condition and
// returns the cosine between the two aggregates, with a user-level bootstrap
// CI. `per_user_mean` switches to averaging per-user aggregates instead.
TopicCosine topic_relevance(std::span<const Slate> slates_control,
                            std::span<const Slate> slates_treatment,
                            const TopicTable& topics, int bootstrap_b,
                            std::uint64_t seed, bool per_user_mean = false);

struct ImpactConfig {
  int k = 50;
  int bootstrap_b = 1000;
  std::string diversity_attr;  // attribute whose slate std measures diversity
  std::string interest_attr;   // attribute for recipient-recommendee distance
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ImpactReport {
  std::vector<double> diversity_control;    // per qualifying user
  std::vector<double> diversity_treatment;  // paired with diversity_control
  CohensD diversity_d{0, 0, 0};
  std::optional<TopicCosine> topic_cosine;
  CohensD relevance_d{0, 0, 0};  // Cohen's d of interest distances
  bool has_relevance = false;
  std::size_t n_users = 0;  // users with at least one candidate
  int k = 0;
  int bootstrap_b = 0;
};

// Computes slates for every user under both models and quantifies diversity
// and relevance shifts of the treatment against the control.
ImpactReport policy_impact(const transe::EmbeddingModel& control,
                           const transe::EmbeddingModel& treatment,
                           const hin::HinGraph& graph,
                           const probe::AttributeTable& table,
                           const TopicTable* topics, const ImpactConfig& config);

void write_slates_csv(std::span<const Slate> slates, const hin::HinGraph& graph,
                      const std::filesystem::path& path);

}  // namespace lp::rec
