#include "latentprobe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "latentprobe/rng.hpp"
#include "latentprobe/stats.hpp"

namespace lp::eval {

void ScoredLabelSet::validate() const {
  if (scores.size() != labels.size())
    throw std::invalid_argument("scores/labels length mismatch");
  if (scores.empty()) throw std::invalid_argument("empty scored set");
}

double auc_roc(const ScoredLabelSet& data) {
  data.validate();
  std::size_t n_pos = 0;
  for (int l : data.labels) n_pos += l != 0;
  if (n_pos == 0 || n_pos == data.labels.size())
    throw std::invalid_argument("AUC needs both classes present");
  return stats::auc_rank(data.scores, data.labels);
}

namespace {

// Non-recommended second-order Follow neighbors of `source`: the candidate
// pool used for precision and held-out AUC, matching the WTF pipeline.
std::vector<hin::EntityId> candidate_pool(const hin::HinGraph& graph,
                                          hin::EntityId source) {
  std::vector<hin::EntityId> pool;
  for (hin::EntityId c : graph.second_neighbors(source, hin::kFollow))
    if (!graph.has_edge(source, hin::kWtf, c)) pool.push_back(c);
  return pool;
}

}  // namespace

PrecisionResult precision_at_k(const transe::EmbeddingModel& model,
                               std::span<const hin::Edge> positives,
                               const hin::HinGraph& graph, int pool_size, int k,
                               std::uint64_t seed) {
  if (k < 1 || pool_size < 1)
    throw std::invalid_argument("need pool_size >= 1 and k >= 1");
  auto rng = make_rng(seed, rng_tag::kEval, 0);
  PrecisionResult result;
  double hits = 0.0;
  for (const hin::Edge& pos : positives) {
    auto pool = candidate_pool(graph, pos.source);
    pool.erase(std::remove(pool.begin(), pool.end(), pos.target), pool.end());
    if (pool.size() < static_cast<std::size_t>(pool_size)) {
      ++result.skipped;
      continue;
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(static_cast<std::size_t>(pool_size));
    double target_score = transe::score_edge(model, pos);
    // Rank of the positive among pool + positive; ties break by entity index.
    int rank = 1;
    for (hin::EntityId c : pool) {
      double s = transe::score_edge(model, hin::Edge{pos.source, pos.relation, c});
      if (s > target_score || (s == target_score && c < pos.target)) ++rank;
    }
    if (rank <= k) hits += 1.0;
    ++result.n_cases;
  }
  if (result.n_cases == 0)
    throw std::invalid_argument("no precision cases with a full candidate pool");
  result.value = hits / static_cast<double>(result.n_cases);
  return result;
}

const char* to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::RandomSecond: return "RandomSecond";
    case Baseline::MostFollowers: return "MostFollowers";
    case Baseline::MostCoFollowed: return "MostCoFollowed";
  }
  return "?";
}

namespace {

// Count of the source's Follow out-neighbors that follow the candidate.
double co_followed(const hin::HinGraph& graph, hin::EntityId source,
                   hin::EntityId candidate) {
  double count = 0.0;
  for (hin::EntityId friend_id : graph.out_neighbors(source, hin::kFollow))
    if (graph.has_edge(friend_id, hin::kFollow, candidate)) count += 1.0;
  return count;
}

template <typename ScoreFn>
AucResult pooled_auc(const hin::HinGraph& graph, std::span<const hin::Edge> test,
                     std::uint64_t seed, int neg_per_pos, ScoreFn&& score) {
  if (neg_per_pos < 1) throw std::invalid_argument("neg_per_pos must be >= 1");
  auto rng = make_rng(seed, rng_tag::kEval, 1);
  ScoredLabelSet data;
  AucResult result;
  for (const hin::Edge& pos : test) {
    auto pool = candidate_pool(graph, pos.source);
    if (pool.empty()) {
      ++result.skipped;
      continue;
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(neg_per_pos),
                                             pool.size());
    data.scores.push_back(score(pos.source, pos.target, rng));
    data.labels.push_back(1);
    ++result.n_pos;
    for (std::size_t i = 0; i < take; ++i) {
      data.scores.push_back(score(pos.source, pool[i], rng));
      data.labels.push_back(0);
      ++result.n_neg;
    }
  }
  if (result.n_pos == 0 || result.n_neg == 0)
    throw std::invalid_argument("no AUC cases with candidates");
  result.auc = auc_roc(data);
  return result;
}

}  // namespace

AucResult baseline_auc(const hin::HinGraph& graph, std::span<const hin::Edge> test,
                       Baseline strategy, std::uint64_t seed, int neg_per_pos) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  switch (strategy) {
    case Baseline::RandomSecond:
      return pooled_auc(graph, test, seed, neg_per_pos,
                        [&](hin::EntityId, hin::EntityId, std::mt19937_64& rng) {
                          return uni(rng);
                        });
    case Baseline::MostFollowers:
      return pooled_auc(graph, test, seed, neg_per_pos,
                        [&](hin::EntityId, hin::EntityId t, std::mt19937_64&) {
                          return static_cast<double>(graph.in_degree(t, hin::kFollow));
                        });
    case Baseline::MostCoFollowed:
      return pooled_auc(graph, test, seed, neg_per_pos,
                        [&](hin::EntityId s, hin::EntityId t, std::mt19937_64&) {
                          return co_followed(graph, s, t);
                        });
  }
  throw std::invalid_argument("unknown baseline");
}

AucResult model_auc(const transe::EmbeddingModel& model, const hin::HinGraph& graph,
                    std::span<const hin::Edge> test, std::uint64_t seed,
                    int neg_per_pos) {
  return pooled_auc(graph, test, seed, neg_per_pos,
                    [&](hin::EntityId s, hin::EntityId t, std::mt19937_64&) {
                      return transe::score_edge(model,
                                                hin::Edge{s, hin::kWtf, t});
                    });
}

namespace {

// Equal-frequency bin index per score; duplicate quantile edges collapse so
// tied scores always share a bin.
std::vector<int> quantile_bins(std::span<const double> scores, int bins) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  for (int b = 1; b < bins; ++b) {
    std::size_t idx = static_cast<std::size_t>(
        static_cast<double>(b) * static_cast<double>(sorted.size()) / bins);
    if (idx >= sorted.size()) idx = sorted.size() - 1;
    edges.push_back(sorted[idx]);
  }
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    out[i] = static_cast<int>(
        std::lower_bound(edges.begin(), edges.end(), scores[i]) - edges.begin());
  return out;
}

double entropy(const std::vector<double>& probs) {
  double h = 0.0;
  for (double p : probs)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

}  // namespace

double nmi_score(const ScoredLabelSet& data, int bins) {
  data.validate();
  if (bins < 2) throw std::invalid_argument("bins must be >= 2");
  auto bin = quantile_bins(data.scores, bins);
  int n_bins = *std::max_element(bin.begin(), bin.end()) + 1;
  double n = static_cast<double>(data.scores.size());

  std::vector<double> p_bin(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> p_label(2, 0.0);
  std::vector<double> joint(static_cast<std::size_t>(n_bins) * 2, 0.0);
  for (std::size_t i = 0; i < data.scores.size(); ++i) {
    int l = data.labels[i] != 0;
    p_bin[bin[i]] += 1.0 / n;
    p_label[l] += 1.0 / n;
    joint[static_cast<std::size_t>(bin[i]) * 2 + l] += 1.0 / n;
  }
  double hb = entropy(p_bin), hl = entropy(p_label);
  if (hb == 0.0 || hl == 0.0) return 0.0;
  double mi = 0.0;
  for (int b = 0; b < n_bins; ++b)
    for (int l = 0; l < 2; ++l) {
      double pj = joint[static_cast<std::size_t>(b) * 2 + l];
      if (pj > 0.0) mi += pj * std::log(pj / (p_bin[b] * p_label[l]));
    }
  return mi / std::sqrt(hb * hl);
}

NmiResult informativeness_nmi(const ScoredLabelSet& a, const ScoredLabelSet& b,
                              int bins) {
  NmiResult out;
  out.nmi_a = nmi_score(a, bins);
  out.nmi_b = nmi_score(b, bins);
  out.relative_drop = out.nmi_a == 0.0 ? 0.0 : 1.0 - out.nmi_b / out.nmi_a;
  return out;
}

}  // namespace lp::eval
