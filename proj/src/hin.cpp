#include "latentprobe/hin.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "latentprobe/rng.hpp"

namespace lp::hin {

namespace {

inline std::uint64_t edge_key(EntityId s, EntityId t) {
  return (static_cast<std::uint64_t>(s) << 32) | t;
}

}  // namespace

HinGraph::HinGraph(std::vector<std::string> relation_names)
    : relation_names_(std::move(relation_names)) {
  if (relation_names_.empty())
    throw std::invalid_argument("graph needs at least one relation kind");
  edges_.resize(relation_names_.size());
  edge_keys_.resize(relation_names_.size());
}

EntityId HinGraph::intern(std::string_view external_id) {
  if (finalized_) {
    auto it = entity_index_.find(std::string(external_id));
    if (it == entity_index_.end())
      throw std::logic_error("graph is finalized; cannot register new entities");
    return it->second;
  }
  auto [it, inserted] = entity_index_.try_emplace(
      std::string(external_id), static_cast<EntityId>(entity_names_.size()));
  if (inserted) entity_names_.emplace_back(external_id);
  return it->second;
}

std::optional<EntityId> HinGraph::find_entity(std::string_view external_id) const {
  auto it = entity_index_.find(std::string(external_id));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

const std::string& HinGraph::entity_name(EntityId id) const {
  if (id >= entity_names_.size()) throw std::out_of_range("unknown entity id");
  return entity_names_[id];
}

std::optional<RelationId> HinGraph::relation_id(std::string_view name) const {
  for (std::size_t i = 0; i < relation_names_.size(); ++i)
    if (relation_names_[i] == name) return static_cast<RelationId>(i);
  return std::nullopt;
}

void HinGraph::check_relation(RelationId relation) const {
  if (relation >= relation_names_.size())
    throw std::invalid_argument("unregistered relation kind");
}

bool HinGraph::add_edge(EntityId source, RelationId relation, EntityId target) {
  if (finalized_) throw std::logic_error("graph is finalized; cannot add edges");
  check_relation(relation);
  if (source >= entity_names_.size() || target >= entity_names_.size())
    throw std::invalid_argument("edge endpoint is not registered");
  if (source == target) throw std::invalid_argument("self-loops are not allowed");
  if (!edge_keys_[relation].insert(edge_key(source, target)).second) return false;
  edges_[relation].push_back(Edge{source, relation, target});
  return true;
}

void HinGraph::finalize() {
  if (finalized_) return;
  std::size_t n = entity_names_.size();
  std::size_t r = relation_names_.size();
  adj_offsets_.assign(r, {});
  adj_targets_.assign(r, {});
  in_degree_.assign(r, std::vector<std::size_t>(n, 0));
  for (std::size_t rel = 0; rel < r; ++rel) {
    std::vector<std::uint64_t> counts(n + 1, 0);
    for (const Edge& e : edges_[rel]) {
      ++counts[e.source + 1];
      ++in_degree_[rel][e.target];
    }
    std::partial_sum(counts.begin(), counts.end(), counts.begin());
    adj_targets_[rel].resize(edges_[rel].size());
    std::vector<std::uint64_t> cursor(counts.begin(), counts.end() - 1);
    for (const Edge& e : edges_[rel]) adj_targets_[rel][cursor[e.source]++] = e.target;
    adj_offsets_[rel] = std::move(counts);
    for (std::size_t v = 0; v < n; ++v) {
      auto begin = adj_targets_[rel].begin() + static_cast<std::ptrdiff_t>(adj_offsets_[rel][v]);
      auto end = adj_targets_[rel].begin() + static_cast<std::ptrdiff_t>(adj_offsets_[rel][v + 1]);
      std::sort(begin, end);
    }
  }
  finalized_ = true;
}

const std::vector<Edge>& HinGraph::edges(RelationId relation) const {
  check_relation(relation);
  return edges_[relation];
}

bool HinGraph::has_edge(EntityId source, RelationId relation, EntityId target) const {
  check_relation(relation);
  return edge_keys_[relation].count(edge_key(source, target)) > 0;
}

std::span<const EntityId> HinGraph::out_neighbors(EntityId entity,
                                                  RelationId relation) const {
  check_relation(relation);
  if (!finalized_) throw std::logic_error("finalize() the graph before querying");
  if (entity >= entity_names_.size()) throw std::out_of_range("unknown entity id");
  const auto& off = adj_offsets_[relation];
  return {adj_targets_[relation].data() + off[entity], off[entity + 1] - off[entity]};
}

std::size_t HinGraph::in_degree(EntityId entity, RelationId relation) const {
  check_relation(relation);
  if (!finalized_) throw std::logic_error("finalize() the graph before querying");
  if (entity >= entity_names_.size()) throw std::out_of_range("unknown entity id");
  return in_degree_[relation][entity];
}

std::vector<EntityId> HinGraph::second_neighbors(EntityId entity,
                                                 RelationId relation) const {
  auto first = out_neighbors(entity, relation);
  std::vector<EntityId> found;
  for (EntityId mid : first) {
    auto hops = out_neighbors(mid, relation);
    found.insert(found.end(), hops.begin(), hops.end());
  }
  std::sort(found.begin(), found.end());
  found.erase(std::unique(found.begin(), found.end()), found.end());
  std::vector<EntityId> out;
  out.reserve(found.size());
  for (EntityId v : found) {
    if (v == entity) continue;
    if (std::binary_search(first.begin(), first.end(), v)) continue;
    out.push_back(v);
  }
  return out;
}

HinGraph ingest_edges(const std::filesystem::path& path,
                      std::vector<std::string> relation_names,
                      IngestSummary* summary) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list: " + path.string());
  HinGraph graph(std::move(relation_names));
  IngestSummary local;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab1 = line.find('\t');
    auto tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab1 == std::string::npos || tab2 == std::string::npos ||
        line.find('\t', tab2 + 1) != std::string::npos)
      throw ParseError("expected source<TAB>relation<TAB>target", line_no);
    std::string_view source(line.data(), tab1);
    std::string_view relation(line.data() + tab1 + 1, tab2 - tab1 - 1);
    std::string_view target(line.data() + tab2 + 1, line.size() - tab2 - 1);
    if (source.empty() || relation.empty() || target.empty())
      throw ParseError("empty field", line_no);
    auto rel = graph.relation_id(relation);
    if (!rel)
      throw SchemaError("unregistered relation token '" + std::string(relation) + "'",
                        line_no);
    EntityId s = graph.intern(source);
    EntityId t = graph.intern(target);
    if (s == t) {
      ++local.rejected_self_loops;
      continue;
    }
    if (!graph.add_edge(s, *rel, t)) ++local.duplicate_rows;
  }
  graph.finalize();
  local.entities = graph.entity_count();
  for (std::size_t r = 0; r < graph.relation_count(); ++r)
    local.edges_per_relation[graph.relation_names()[r]] =
        graph.edge_count(static_cast<RelationId>(r));
  if (summary) *summary = local;
  return graph;
}

void write_edges(const HinGraph& graph, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write edge list: " + path.string());
  for (std::size_t r = 0; r < graph.relation_count(); ++r) {
    for (const Edge& e : graph.edges(static_cast<RelationId>(r)))
      out << graph.entity_name(e.source) << '\t' << graph.relation_names()[r] << '\t'
          << graph.entity_name(e.target) << '\n';
  }
}

EdgeSplit split_edges(const HinGraph& graph, std::array<double, 3> fractions,
                      std::uint64_t seed) {
  double sum = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");
  for (double f : fractions)
    if (f <= 0.0) throw std::invalid_argument("split fractions must be positive");

  EdgeSplit split;
  split.fractions = fractions;
  split.seed = seed;
  std::size_t r = graph.relation_count();
  split.train.resize(r);
  split.validation.resize(r);
  split.test.resize(r);
  for (std::size_t rel = 0; rel < r; ++rel) {
    auto edges = graph.edges(static_cast<RelationId>(rel));
    if (edges.empty()) continue;
    if (edges.size() < 3)
      throw std::invalid_argument("relation '" + graph.relation_names()[rel] +
                                  "' has fewer than 3 edges; cannot split");
    std::vector<Edge> shuffled = edges;
    auto rng = make_rng(seed, rng_tag::kSplit, rel);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto n = shuffled.size();
    std::size_t n_val = static_cast<std::size_t>(
        std::llround(fractions[1] * static_cast<double>(n)));
    std::size_t n_test = static_cast<std::size_t>(
        std::llround(fractions[2] * static_cast<double>(n)));
    if (n_val + n_test >= n) throw std::invalid_argument("split leaves no train edges");
    std::size_t n_train = n - n_val - n_test;  // remainder goes to train
    split.train[rel].assign(shuffled.begin(), shuffled.begin() + n_train);
    split.validation[rel].assign(shuffled.begin() + n_train,
                                 shuffled.begin() + n_train + n_val);
    split.test[rel].assign(shuffled.begin() + n_train + n_val, shuffled.end());
  }
  return split;
}

const char* to_string(NegStrategy strategy) {
  switch (strategy) {
    case NegStrategy::Uniform: return "Uniform";
    case NegStrategy::Prevalence: return "Prevalence";
    case NegStrategy::SecondNeighborhood: return "SecondNeighborhood";
  }
  return "?";
}

namespace {

// Second-order Follow neighbors of `source` that are valid corruption targets
// for relation `rel`: not positives of rel, not the source itself.
std::vector<EntityId> corruption_pool(const HinGraph& graph, EntityId source,
                                      RelationId rel) {
  std::vector<EntityId> pool;
  for (EntityId cand : graph.second_neighbors(source, kFollow)) {
    if (cand == source) continue;
    if (graph.has_edge(source, rel, cand)) continue;
    pool.push_back(cand);
  }
  return pool;
}

}  // namespace

CorruptResult corrupt_edges(std::span<const Edge> positives, NegStrategy strategy,
                            const HinGraph& graph, std::uint64_t seed,
                            int max_tries) {
  if (!graph.finalized()) throw std::logic_error("finalize() the graph first");
  CorruptResult result;
  result.edges.reserve(positives.size());
  auto rng = make_rng(seed, rng_tag::kCorrupt, static_cast<std::uint64_t>(strategy));
  std::size_t n = graph.entity_count();
  if (n == 0) throw std::invalid_argument("empty graph");

  // Prevalence weights: target frequency in the supplied positive set.
  std::discrete_distribution<std::size_t> prevalence;
  if (strategy == NegStrategy::Prevalence && !positives.empty()) {
    std::vector<double> freq(n, 0.0);
    for (const Edge& e : positives) freq[e.target] += 1.0;
    prevalence = std::discrete_distribution<std::size_t>(freq.begin(), freq.end());
  }
  std::uniform_int_distribution<std::size_t> uniform(0, n - 1);

  std::unordered_map<std::uint64_t, std::vector<EntityId>> pool_cache;
  for (const Edge& pos : positives) {
    if (strategy == NegStrategy::SecondNeighborhood) {
      std::uint64_t key = edge_key(pos.source, pos.relation);
      auto it = pool_cache.find(key);
      if (it == pool_cache.end())
        it = pool_cache.emplace(key, corruption_pool(graph, pos.source, pos.relation))
                 .first;
      const auto& pool = it->second;
      if (pool.empty()) {
        ++result.skipped;
        continue;
      }
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      result.edges.push_back(Edge{pos.source, pos.relation, pool[pick(rng)]});
      continue;
    }
    bool placed = false;
    for (int attempt = 0; attempt < max_tries; ++attempt) {
      EntityId cand = static_cast<EntityId>(
          strategy == NegStrategy::Uniform ? uniform(rng) : prevalence(rng));
      if (cand == pos.source) continue;
      if (graph.has_edge(pos.source, pos.relation, cand)) continue;
      result.edges.push_back(Edge{pos.source, pos.relation, cand});
      placed = true;
      break;
    }
    if (!placed)
      throw std::runtime_error(
          "corrupt_edges: exhausted resampling attempts for a positive edge");
  }
  return result;
}

NegativeEdgeSet build_negative_set(const EdgeSplit& split, int ratio,
                                   const HinGraph& graph, std::uint64_t seed) {
  if (ratio < 1) throw std::invalid_argument("negative ratio must be >= 1");
  NegativeEdgeSet out;
  out.ratio = ratio;
  std::size_t r = graph.relation_count();
  out.per_relation.resize(r);
  out.provenance.resize(r);
  constexpr NegStrategy kStrategies[3] = {NegStrategy::Uniform, NegStrategy::Prevalence,
                                          NegStrategy::SecondNeighborhood};
  for (std::size_t rel = 0; rel < r; ++rel) {
    const auto& train = split.train[rel];
    if (train.empty()) continue;
    std::size_t total = static_cast<std::size_t>(ratio) * train.size();
    std::size_t base = total / 3, rem = total % 3;
    auto order_rng = make_rng(seed, rng_tag::kCorrupt, 1000 + rel);
    for (int s = 0; s < 3; ++s) {
      std::size_t quota = base + (static_cast<std::size_t>(s) < rem ? 1 : 0);
      if (quota == 0) continue;
      // Cycle over a shuffled copy of the train positives until the quota is
      // met; sources with empty second neighborhoods are skipped inside
      // corrupt_edges, so a full cycle without progress means the strategy
      // cannot produce edges on this graph at all.
      std::vector<Edge> pool = train;
      std::shuffle(pool.begin(), pool.end(), order_rng);
      std::size_t produced = 0;
      std::uint64_t round = 0;
      while (produced < quota) {
        CorruptResult chunk = corrupt_edges(
            pool, kStrategies[s], graph,
            mix_seed(seed, rng_tag::kCorrupt, (rel << 20) ^ (round << 4) ^ s));
        if (chunk.edges.empty())
          throw std::runtime_error(
              "build_negative_set: no source in relation '" +
              graph.relation_names()[rel] + "' has second-neighborhood candidates");
        for (const Edge& e : chunk.edges) {
          if (produced == quota) break;
          out.per_relation[rel].push_back(e);
          out.provenance[rel].push_back(kStrategies[s]);
          ++produced;
        }
        ++round;
      }
    }
  }
  return out;
}

}  // namespace lp::hin
