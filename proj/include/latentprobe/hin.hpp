#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace lp::hin {

using EntityId = std::uint32_t;
using RelationId = std::uint16_t;

// The two relations every graph starts with; more can be registered at
// construction time.
constexpr RelationId kFollow = 0;
constexpr RelationId kWtf = 1;

struct Edge {
  EntityId source;
  RelationId relation;
  EntityId target;

  bool operator==(const Edge&) const = default;
};

struct ParseError : std::runtime_error {
  ParseError(const std::string& msg, std::size_t line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"),
        line_number(line) {}
  std::size_t line_number;
};

struct SchemaError : ParseError {
  using ParseError::ParseError;
};

// Typed heterogeneous edge store. Entities are interned to dense ids in
// first-seen order; edge sets are deduplicated per relation. finalize() builds
// the adjacency indices, after which the graph is immutable and all queries
// are safe from concurrent readers.
class HinGraph {
 public:
  explicit HinGraph(std::vector<std::string> relation_names = {"Follow", "WTF"});

  EntityId intern(std::string_view external_id);
  std::optional<EntityId> find_entity(std::string_view external_id) const;
  const std::string& entity_name(EntityId id) const;
  std::size_t entity_count() const { return entity_names_.size(); }

  const std::vector<std::string>& relation_names() const { return relation_names_; }
  std::optional<RelationId> relation_id(std::string_view name) const;
  std::size_t relation_count() const { return relation_names_.size(); }

  // Returns false when the edge is already present. Throws on self-loops,
  // unknown endpoints/relations, and after finalize().
  bool add_edge(EntityId source, RelationId relation, EntityId target);
  void finalize();
  bool finalized() const { return finalized_; }

  const std::vector<Edge>& edges(RelationId relation) const;
  std::size_t edge_count(RelationId relation) const { return edges(relation).size(); }
  bool has_edge(EntityId source, RelationId relation, EntityId target) const;

  std::span<const EntityId> out_neighbors(EntityId entity, RelationId relation) const;
  std::size_t in_degree(EntityId entity, RelationId relation) const;

  // Entities exactly two hops away along `relation`, excluding the entity
  // itself and its direct out-neighbors. Sorted ascending.
  std::vector<EntityId> second_neighbors(EntityId entity, RelationId relation) const;

 private:
  void check_relation(RelationId relation) const;

  std::vector<std::string> relation_names_;
  std::vector<std::string> entity_names_;
  std::unordered_map<std::string, EntityId> entity_index_;
  std::vector<std::vector<Edge>> edges_;                         // per relation
  std::vector<std::unordered_set<std::uint64_t>> edge_keys_;     // per relation
  // CSR adjacency, built by finalize().
  std::vector<std::vector<std::uint64_t>> adj_offsets_;
  std::vector<std::vector<EntityId>> adj_targets_;
  std::vector<std::vector<std::size_t>> in_degree_;
  bool finalized_ = false;
};

struct IngestSummary {
  std::size_t entities = 0;
  std::map<std::string, std::size_t> edges_per_relation;
  std::size_t duplicate_rows = 0;
  std::size_t rejected_self_loops = 0;
};

// Reads a UTF-8 tab-separated edge list (source, relation, target). Rows with
// self-loops are rejected and counted; duplicate triples are folded. Malformed
// rows raise ParseError, unknown relation tokens SchemaError.
HinGraph ingest_edges(const std::filesystem::path& path,
                      std::vector<std::string> relation_names = {"Follow", "WTF"},
                      IngestSummary* summary = nullptr);

void write_edges(const HinGraph& graph, const std::filesystem::path& path);

struct EdgeSplit {
  std::vector<std::vector<Edge>> train;  // indexed by relation
  std::vector<std::vector<Edge>> validation;
  std::vector<std::vector<Edge>> test;
  std::array<double, 3> fractions;
  std::uint64_t seed = 0;
};

// Per-relation random partition; sizes round to nearest with the remainder
// assigned to train. Relations with fewer than 3 edges are rejected.
EdgeSplit split_edges(const HinGraph& graph, std::array<double, 3> fractions,
                      std::uint64_t seed);

enum class NegStrategy { Uniform, Prevalence, SecondNeighborhood };

const char* to_string(NegStrategy strategy);

struct CorruptResult {
  std::vector<Edge> edges;
  std::size_t skipped = 0;  // sources with an empty candidate pool
};

// Corrupts each positive edge by replacing the target. Outputs never collide
// with a positive edge of the same relation and never form self-loops. The
// SecondNeighborhood pool walks the Follow network ("friends of friends") and
// for WTF edges also excludes the source's observed WTF targets.
CorruptResult corrupt_edges(std::span<const Edge> positives, NegStrategy strategy,
                            const HinGraph& graph, std::uint64_t seed,
                            int max_tries = 100);

struct NegativeEdgeSet {
  std::vector<std::vector<Edge>> per_relation;
  std::vector<std::vector<NegStrategy>> provenance;
  int ratio = 3;

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& v : per_relation) n += v.size();
    return n;
  }
};

// ratio negatives per train positive, split into equal thirds across the three
// strategies (counts equal within 1).
NegativeEdgeSet build_negative_set(const EdgeSplit& split, int ratio,
                                   const HinGraph& graph, std::uint64_t seed);

}  // namespace lp::hin
