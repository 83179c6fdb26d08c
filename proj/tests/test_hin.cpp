#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "latentprobe/hin.hpp"
#include "latentprobe/rng.hpp"

using namespace lp;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& content) {
  fs::path path = fs::temp_directory_path() / name;
  std::ofstream out(path);
  out << content;
  return path;
}

hin::HinGraph chain_graph(int n) {
  hin::HinGraph g;
  for (int i = 0; i < n; ++i) g.intern("n" + std::to_string(i));
  for (int i = 0; i + 1 < n; ++i) g.add_edge(i, hin::kFollow, i + 1);
  g.finalize();
  return g;
}

// Erdos-Renyi-ish random graph for property checks.
hin::HinGraph random_graph(std::size_t n, double p, std::uint64_t seed) {
  hin::HinGraph g;
  for (std::size_t i = 0; i < n; ++i) g.intern("r" + std::to_string(i));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < n; ++t)
      if (s != t && uni(rng) < p)
        g.add_edge(static_cast<hin::EntityId>(s), hin::kFollow,
                   static_cast<hin::EntityId>(t));
  g.finalize();
  return g;
}

// Brute-force 2-hop BFS excluding first-degree neighbors and self.
std::set<hin::EntityId> two_hop_oracle(const hin::HinGraph& g, hin::EntityId s,
                                       hin::RelationId r) {
  std::set<hin::EntityId> first(g.out_neighbors(s, r).begin(),
                                g.out_neighbors(s, r).end());
  std::set<hin::EntityId> out;
  for (hin::EntityId mid : first)
    for (hin::EntityId far : g.out_neighbors(mid, r))
      if (far != s && !first.count(far)) out.insert(far);
  return out;
}

}  // namespace

TEST_CASE("ingest deduplicates rows and rejects self-loops") {
  auto path = write_temp("edges_basic.tsv",
                         "a\tFollow\tb\n"
                         "a\tFollow\tb\n"
                         "b\tWTF\tc\n");
  hin::IngestSummary summary;
  auto g = hin::ingest_edges(path, {"Follow", "WTF"}, &summary);
  CHECK(g.entity_count() == 3);
  CHECK(g.edge_count(hin::kFollow) == 1);
  CHECK(g.edge_count(hin::kWtf) == 1);
  CHECK(summary.duplicate_rows == 1);

  auto empty = write_temp("edges_empty.tsv", "");
  auto ge = hin::ingest_edges(empty, {"Follow", "WTF"});
  CHECK(ge.entity_count() == 0);
  CHECK(ge.edge_count(hin::kFollow) == 0);

  auto loops = write_temp("edges_loop.tsv", "a\tFollow\ta\n");
  hin::IngestSummary ls;
  auto gl = hin::ingest_edges(loops, {"Follow", "WTF"}, &ls);
  CHECK(gl.edge_count(hin::kFollow) == 0);
  CHECK(ls.rejected_self_loops == 1);
}

TEST_CASE("ingest flags malformed rows and unknown relations with line numbers") {
  auto bad = write_temp("edges_bad.tsv", "a\tFollow\tb\nmalformed row\n");
  CHECK_THROWS_AS((void)hin::ingest_edges(bad), hin::ParseError);
  try {
    (void)hin::ingest_edges(bad);
  } catch (const hin::ParseError& e) {
    CHECK(e.line_number == 2);
  }
  auto unk = write_temp("edges_unk.tsv", "a\tLikes\tb\n");
  CHECK_THROWS_AS((void)hin::ingest_edges(unk), hin::SchemaError);
}

TEST_CASE("ingest is idempotent") {
  auto path = write_temp("edges_idem.tsv",
                         "a\tFollow\tb\nb\tFollow\tc\nc\tWTF\ta\nb\tWTF\tc\n");
  auto g1 = hin::ingest_edges(path);
  auto g2 = hin::ingest_edges(path);
  CHECK(g1.entity_count() == g2.entity_count());
  for (auto rel : {hin::kFollow, hin::kWtf}) {
    REQUIRE(g1.edges(rel).size() == g2.edges(rel).size());
    for (std::size_t i = 0; i < g1.edges(rel).size(); ++i)
      CHECK(g1.edges(rel)[i] == g2.edges(rel)[i]);
  }
}

TEST_CASE("split sizes follow the fractions with remainder to train") {
  hin::HinGraph g;
  for (int i = 0; i < 11; ++i) g.intern("e" + std::to_string(i));
  for (int i = 0; i < 10; ++i) g.add_edge(i, hin::kFollow, i + 1);
  g.finalize();
  auto split = hin::split_edges(g, {0.8, 0.1, 0.1}, 7);
  CHECK(split.train[hin::kFollow].size() == 8);
  CHECK(split.validation[hin::kFollow].size() == 1);
  CHECK(split.test[hin::kFollow].size() == 1);
}

TEST_CASE("split is independent per relation and reproducible") {
  hin::HinGraph g;
  for (int i = 0; i < 102; ++i) g.intern("e" + std::to_string(i));
  for (int i = 0; i < 100; ++i) {
    g.add_edge(i, hin::kFollow, i + 1);
    g.add_edge(i, hin::kWtf, i + 2);
  }
  g.finalize();
  auto s1 = hin::split_edges(g, {0.8, 0.1, 0.1}, 42);
  for (auto rel : {hin::kFollow, hin::kWtf}) {
    CHECK(s1.train[rel].size() == 80);
    CHECK(s1.validation[rel].size() == 10);
    CHECK(s1.test[rel].size() == 10);
    // partition property
    std::set<std::pair<unsigned, unsigned>> seen;
    for (const auto* part : {&s1.train[rel], &s1.validation[rel], &s1.test[rel]})
      for (const auto& e : *part) seen.insert({e.source, e.target});
    CHECK(seen.size() == 100);
  }
  auto s2 = hin::split_edges(g, {0.8, 0.1, 0.1}, 42);
  CHECK(s1.train[hin::kFollow] == s2.train[hin::kFollow]);
  auto s3 = hin::split_edges(g, {0.8, 0.1, 0.1}, 43);
  CHECK(s1.train[hin::kFollow] != s3.train[hin::kFollow]);
}

TEST_CASE("split validates fractions and tiny relations") {
  auto g = chain_graph(11);
  CHECK_THROWS_AS((void)hin::split_edges(g, {0.5, 0.5, 0.5}, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)hin::split_edges(g, {-0.2, 0.6, 0.6}, 1),
                  std::invalid_argument);
  auto tiny = chain_graph(3);  // 2 edges
  CHECK_THROWS_AS((void)hin::split_edges(tiny, {0.8, 0.1, 0.1}, 1),
                  std::invalid_argument);
}

TEST_CASE("second neighbors on canonical shapes") {
  auto chain = chain_graph(3);  // a->b->c
  auto sn = chain.second_neighbors(0, hin::kFollow);
  REQUIRE(sn.size() == 1);
  CHECK(sn[0] == 2);

  hin::HinGraph tri;
  for (auto name : {"a", "b", "c"}) tri.intern(name);
  tri.add_edge(0, hin::kFollow, 1);
  tri.add_edge(0, hin::kFollow, 2);
  tri.add_edge(1, hin::kFollow, 2);
  tri.finalize();
  CHECK(tri.second_neighbors(0, hin::kFollow).empty());

  hin::HinGraph iso;
  iso.intern("a");
  iso.intern("b");
  iso.finalize();
  CHECK(iso.second_neighbors(0, hin::kFollow).empty());
}

TEST_CASE("second neighbors match the brute-force oracle on random graphs") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto g = random_graph(60, 0.08, seed);
    for (hin::EntityId s = 0; s < 60; ++s) {
      auto got = g.second_neighbors(s, hin::kFollow);
      auto want = two_hop_oracle(g, s, hin::kFollow);
      CHECK(std::set<hin::EntityId>(got.begin(), got.end()) == want);
    }
  }
}

TEST_CASE("uniform corruption preserves source and relation") {
  auto g = random_graph(50, 0.1, 9);
  auto positives = g.edges(hin::kFollow);
  auto res = hin::corrupt_edges(positives, hin::NegStrategy::Uniform, g, 3);
  REQUIRE(res.edges.size() == positives.size());
  for (std::size_t i = 0; i < positives.size(); ++i) {
    CHECK(res.edges[i].source == positives[i].source);
    CHECK(res.edges[i].relation == positives[i].relation);
    CHECK_FALSE(g.has_edge(res.edges[i].source, res.edges[i].relation,
                           res.edges[i].target));
    CHECK(res.edges[i].source != res.edges[i].target);
  }
}

TEST_CASE("prevalence corruption draws targets proportionally to frequency") {
  // Graph with many sources; target t=1 appears 3x as often as t=2 in the
  // positive set fed to the sampler.
  hin::HinGraph g;
  for (int i = 0; i < 1000; ++i) g.intern("p" + std::to_string(i));
  std::vector<hin::Edge> positives;
  for (int s = 10; s < 510; ++s) {
    // four positives per source: three to entity 1, one to entity 2
    positives.push_back({static_cast<hin::EntityId>(s), hin::kFollow, 1});
    positives.push_back({static_cast<hin::EntityId>(s), hin::kFollow, 2});
  }
  // weights: give 1 three entries, 2 one entry
  std::vector<hin::Edge> weighted;
  for (const auto& e : positives)
    if (e.target == 1) {
      weighted.push_back(e);
      weighted.push_back(e);
      weighted.push_back(e);
    } else {
      weighted.push_back(e);
    }
  // none of the weighted pairs exist as graph edges, so draws never collide
  g.finalize();
  std::size_t reps = 100000 / weighted.size() + 1;
  std::map<hin::EntityId, std::size_t> counts;
  for (std::size_t r = 0; r < reps; ++r) {
    auto res = hin::corrupt_edges(weighted, hin::NegStrategy::Prevalence, g, 100 + r);
    for (const auto& e : res.edges) ++counts[e.target];
  }
  double total = static_cast<double>(counts[1] + counts[2]);
  CHECK(counts[1] + counts[2] > 100000);
  double ratio = static_cast<double>(counts[1]) / total;
  CHECK(ratio == doctest::Approx(0.75).epsilon(0.05));  // 3:1 within 5%
}

TEST_CASE("second-neighborhood corruption picks the only candidate on a chain") {
  auto g = chain_graph(3);  // a->b->c, second neighbor of a is c
  std::vector<hin::Edge> pos = {{0, hin::kFollow, 1}};
  // corrupting (a, Follow, b): the pool excludes b (a's friend) leaving c
  auto res = hin::corrupt_edges(pos, hin::NegStrategy::SecondNeighborhood, g, 5);
  REQUIRE(res.edges.size() == 1);
  CHECK(res.edges[0].target == 2);
}

TEST_CASE("second-neighborhood corruption skips empty pools") {
  hin::HinGraph g;
  g.intern("a");
  g.intern("b");
  g.add_edge(0, hin::kFollow, 1);
  g.finalize();
  std::vector<hin::Edge> pos = {{0, hin::kFollow, 1}};
  auto res = hin::corrupt_edges(pos, hin::NegStrategy::SecondNeighborhood, g, 5);
  CHECK(res.edges.empty());
  CHECK(res.skipped == 1);
}

TEST_CASE("uniform corruption errors out when resampling is exhausted") {
  // Two entities, a->b present: the only corruption candidates collide.
  hin::HinGraph g;
  g.intern("a");
  g.intern("b");
  g.add_edge(0, hin::kFollow, 1);
  g.finalize();
  std::vector<hin::Edge> pos = {{0, hin::kFollow, 1}};
  CHECK_THROWS_AS(
      (void)hin::corrupt_edges(pos, hin::NegStrategy::Uniform, g, 5),
      std::runtime_error);
}

TEST_CASE("negative set honors ratio, strategy balance and disjointness") {
  auto g = random_graph(80, 0.08, 21);
  auto split = hin::split_edges(g, {0.8, 0.1, 0.1}, 5);
  std::size_t n_train = split.train[hin::kFollow].size();
  auto negs = hin::build_negative_set(split, 3, g, 77);
  CHECK(negs.per_relation[hin::kFollow].size() == 3 * n_train);
  std::map<hin::NegStrategy, std::size_t> per_strategy;
  for (auto s : negs.provenance[hin::kFollow]) ++per_strategy[s];
  CHECK(per_strategy.size() == 3);
  std::size_t lo = 1u << 30, hi = 0;
  for (const auto& [s, c] : per_strategy) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi - lo <= 1);
  for (const auto& e : negs.per_relation[hin::kFollow])
    CHECK_FALSE(g.has_edge(e.source, e.relation, e.target));
}

TEST_CASE("negative set with ratio 1 on 3 positives gives 1 per strategy") {
  auto g = random_graph(40, 0.2, 33);
  hin::EdgeSplit split;
  split.train.resize(g.relation_count());
  split.validation.resize(g.relation_count());
  split.test.resize(g.relation_count());
  // three positives with distinct sources, so every strategy has candidates
  for (const auto& e : g.edges(hin::kFollow)) {
    bool fresh = true;
    for (const auto& kept : split.train[hin::kFollow])
      if (kept.source == e.source) fresh = false;
    if (fresh) split.train[hin::kFollow].push_back(e);
    if (split.train[hin::kFollow].size() == 3) break;
  }
  auto negs = hin::build_negative_set(split, 1, g, 9);
  CHECK(negs.per_relation[hin::kFollow].size() == 3);
  std::set<hin::NegStrategy> strategies(negs.provenance[hin::kFollow].begin(),
                                        negs.provenance[hin::kFollow].end());
  CHECK(strategies.size() == 3);
}
