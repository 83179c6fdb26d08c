#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "latentprobe/bench.hpp"
#include "latentprobe/kernels.hpp"
#include "latentprobe/stats.hpp"

using namespace lp;

namespace {

std::vector<double> random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> m(n * d);
  for (double& v : m) v = normal(rng);
  return m;
}

}  // namespace

TEST_CASE("planted attribute with c = 1 correlates exactly") {
  bench::WorldSpec spec;
  spec.n_entities = 300;
  spec.dim_true = 8;
  spec.follow_density = 0.05;
  spec.planted.push_back({"signal", {}, 1.0, bench::NoiseLaw::Gaussian});
  spec.seed = 4;
  auto world = bench::generate_world(spec);
  std::vector<double> proj(spec.n_entities);
  kern::matvec(world.truth.phi().data(), spec.n_entities, 8,
               world.planted_directions[0].data(), proj.data());
  double rho = stats::pearson(proj, world.attributes.at("signal"));
  CHECK(rho == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("planted attribute at c = 0.9 lands within sampling error at n = 10^4") {
  bench::WorldSpec spec;
  spec.n_entities = 10000;
  spec.dim_true = 16;
  spec.follow_density = 0.002;
  spec.planted.push_back({"signal", {}, 0.9, bench::NoiseLaw::Gaussian});
  spec.seed = 11;
  auto world = bench::generate_world(spec);
  std::vector<double> proj(spec.n_entities);
  kern::matvec(world.truth.phi().data(), spec.n_entities, 16,
               world.planted_directions[0].data(), proj.data());
  double rho = stats::pearson(proj, world.attributes.at("signal"));
  CHECK(rho == doctest::Approx(0.9).epsilon(0.0223));  // 0.9 +- 0.02
}

TEST_CASE("realized follow density tracks the target across seeds") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    bench::WorldSpec spec;
    spec.n_entities = 500;
    spec.dim_true = 8;
    spec.follow_density = 0.02;
    spec.seed = seed;
    auto world = bench::generate_world(spec);
    double n = static_cast<double>(spec.n_entities);
    double realized =
        static_cast<double>(world.graph.edge_count(hin::kFollow)) / (n * (n - 1.0));
    CHECK(realized == doctest::Approx(0.02).epsilon(0.10));
  }
}

TEST_CASE("wtf edges come from volunteers and stay within the slate size") {
  bench::WorldSpec spec;
  spec.n_entities = 300;
  spec.dim_true = 8;
  spec.follow_density = 0.05;
  spec.volunteer_fraction = 0.2;
  spec.wtf_slate_size = 4;
  spec.seed = 6;
  auto world = bench::generate_world(spec);
  std::set<hin::EntityId> volunteers(world.volunteers.begin(),
                                     world.volunteers.end());
  CHECK(volunteers.size() == 60);
  std::map<hin::EntityId, int> per_source;
  for (const auto& e : world.graph.edges(hin::kWtf)) {
    CHECK(volunteers.count(e.source) == 1);
    ++per_source[e.source];
  }
  for (const auto& [s, c] : per_source) CHECK(c <= 4);
  CHECK(world.graph.edge_count(hin::kWtf) > 0);
}

TEST_CASE("remove-follow perturbation drops exactly the requested fraction") {
  bench::WorldSpec spec;
  spec.n_entities = 250;
  spec.dim_true = 8;
  spec.follow_density = 0.03;
  spec.seed = 8;
  auto world = bench::generate_world(spec);
  // trim to exactly 1000 follow edges for the closed-form check
  hin::HinGraph g(world.graph.relation_names());
  for (std::size_t i = 0; i < world.graph.entity_count(); ++i)
    g.intern(world.graph.entity_name(static_cast<hin::EntityId>(i)));
  std::size_t added = 0;
  for (const auto& e : world.graph.edges(hin::kFollow)) {
    if (added == 1000) break;
    g.add_edge(e.source, hin::kFollow, e.target);
    ++added;
  }
  REQUIRE(added == 1000);
  for (const auto& e : world.graph.edges(hin::kWtf))
    g.add_edge(e.source, hin::kWtf, e.target);
  g.finalize();

  auto perturbed = bench::perturb_dataset(g, bench::Perturbation::RemoveFollow,
                                          0.369, 3);
  CHECK(perturbed.edge_count(hin::kFollow) == 631);
  CHECK(perturbed.edge_count(hin::kWtf) == g.edge_count(hin::kWtf));
}

TEST_CASE("artificial WTF edges are added and absent from the original positives") {
  bench::WorldSpec spec;
  spec.n_entities = 300;
  spec.dim_true = 8;
  spec.follow_density = 0.05;
  spec.volunteer_fraction = 0.5;
  spec.wtf_slate_size = 5;
  spec.seed = 12;
  auto world = bench::generate_world(spec);
  // trim WTF to exactly 500 edges
  hin::HinGraph g(world.graph.relation_names());
  for (std::size_t i = 0; i < world.graph.entity_count(); ++i)
    g.intern(world.graph.entity_name(static_cast<hin::EntityId>(i)));
  for (const auto& e : world.graph.edges(hin::kFollow))
    g.add_edge(e.source, hin::kFollow, e.target);
  std::size_t added = 0;
  for (const auto& e : world.graph.edges(hin::kWtf)) {
    if (added == 500) break;
    g.add_edge(e.source, hin::kWtf, e.target);
    ++added;
  }
  REQUIRE(added == 500);
  g.finalize();

  auto perturbed = bench::perturb_dataset(g, bench::Perturbation::AddArtificialWTF,
                                          0.196, 17);
  CHECK(perturbed.edge_count(hin::kWtf) == 598);
  std::size_t fresh = 0;
  for (const auto& e : perturbed.edges(hin::kWtf))
    if (!g.has_edge(e.source, hin::kWtf, e.target)) ++fresh;
  CHECK(fresh == 98);
}

TEST_CASE("zero-magnitude perturbations leave the graph unchanged") {
  bench::WorldSpec spec;
  spec.n_entities = 200;
  spec.dim_true = 8;
  spec.follow_density = 0.04;
  spec.seed = 14;
  auto world = bench::generate_world(spec);
  auto removed = bench::perturb_dataset(world.graph,
                                        bench::Perturbation::RemoveFollow, 0.0, 5);
  CHECK(removed.edge_count(hin::kFollow) == world.graph.edge_count(hin::kFollow));
  auto addnone = bench::perturb_dataset(
      world.graph, bench::Perturbation::AddArtificialWTF, 0.0, 5);
  CHECK(addnone.edge_count(hin::kWtf) == world.graph.edge_count(hin::kWtf));
}

TEST_CASE("partition halves split the edge multiset") {
  bench::WorldSpec spec;
  spec.n_entities = 200;
  spec.dim_true = 8;
  spec.follow_density = 0.04;
  spec.seed = 15;
  auto world = bench::generate_world(spec);
  auto a = bench::perturb_dataset(world.graph, bench::Perturbation::PartitionHalf,
                                  0.0, 99);
  auto b = bench::perturb_dataset(world.graph, bench::Perturbation::PartitionHalf,
                                  1.0, 99);
  std::size_t total = 0;
  for (auto rel : {hin::kFollow, hin::kWtf})
    total += a.edge_count(rel) + b.edge_count(rel);
  CHECK(total == world.graph.edge_count(hin::kFollow) +
                     world.graph.edge_count(hin::kWtf));
  for (auto rel : {hin::kFollow, hin::kWtf})
    for (const auto& e : a.edges(rel)) CHECK_FALSE(b.has_edge(e.source, rel, e.target));
}

TEST_CASE("affine alignment recovers exact affine copies") {
  std::size_t n = 400, d = 6;
  auto ref = random_matrix(n, d, 31);
  auto a0 = random_matrix(d, d, 32);
  std::vector<double> b0(d);
  for (std::size_t j = 0; j < d; ++j) b0[j] = 0.5 * static_cast<double>(j) - 1.0;
  std::vector<double> var(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) var[i * d + j] += ref[i * d + k] * a0[k * d + j];
      var[i * d + j] += b0[j];
    }
  auto align = bench::affine_align(ref, var, n, d);
  CHECK(align.r2 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(align.cosine_mean == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("affine alignment of independent noise sits at the OLS overfit level") {
  std::size_t n = 10000, d = 32;
  auto ref = random_matrix(n, d, 41);
  auto var = random_matrix(n, d, 42);
  auto align = bench::affine_align(ref, var, n, d);
  CHECK(align.r2 < 0.01);
  CHECK(align.r2 > -0.01);
}

TEST_CASE("one corrupted row drags the lower cosine quantile down") {
  std::size_t n = 300, d = 6;
  auto ref = random_matrix(n, d, 51);
  auto var = ref;
  std::mt19937_64 rng(52);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t j = 0; j < d; ++j) var[7 * d + j] = 10.0 * normal(rng);
  auto align = bench::affine_align(ref, var, n, d);
  CHECK(align.cosine_q025 < align.cosine_mean);
}

TEST_CASE("self alignment is exact") {
  std::size_t n = 200, d = 5;
  auto ref = random_matrix(n, d, 61);
  auto align = bench::affine_align(ref, ref, n, d);
  CHECK(align.r2 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rank-deficient references are rejected with a ridge hint") {
  std::size_t n = 50, d = 4;
  auto ref = random_matrix(n, d, 71);
  for (std::size_t i = 0; i < n; ++i) ref[i * d + 3] = ref[i * d + 2];  // duplicate col
  auto var = random_matrix(n, d, 72);
  CHECK_THROWS_WITH_AS((void)bench::affine_align(ref, var, n, d),
                       doctest::Contains("ridge"), std::invalid_argument);
}

TEST_CASE("ideology worlds satisfy the fit preconditions") {
  bench::IdeologyWorldSpec spec;
  spec.n_users = 120;
  spec.n_mps = 20;
  spec.seed = 3;
  auto world = bench::generate_ideology_world(spec);
  CHECK(world.graph.n_users() == 120);
  CHECK(world.graph.n_mps() == 20);
  std::vector<std::size_t> followers(20, 0);
  for (const auto& f : world.graph.follows) {
    CHECK(f.size() >= 3);
    for (auto j : f) ++followers[j];
  }
  for (auto c : followers) CHECK(c >= 1);
}
