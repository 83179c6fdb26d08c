#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "latentprobe/recommend.hpp"
#include "latentprobe/scaling.hpp"

namespace lp::bench {

enum class NoiseLaw { Gaussian, Heavy };

struct PlantedAttribute {
  std::string name;
  std::vector<double> direction;  // unit vector; empty = random unit direction
  double target_corr = 0.9;       // c in [0,1]
  NoiseLaw noise = NoiseLaw::Gaussian;
};

struct WorldSpec {
  std::size_t n_entities = 2000;
  int dim_true = 32;
  double follow_density = 0.01;        // target probability of a directed edge
  double volunteer_fraction = 0.3;     // WTF edges exist only from volunteers
  int wtf_slate_size = 10;
  std::vector<PlantedAttribute> planted;
  int n_topics = 0;
  // Entry scale of the ground-truth matrix and relation-vector multipliers.
  double follow_rel_scale = 1.0;
  double wtf_rel_scale = 3.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct World {
  hin::HinGraph graph;
  transe::EmbeddingModel truth;
  probe::AttributeTable attributes;
  rec::TopicTable topics;  // empty when n_topics == 0
  std::vector<std::vector<double>> planted_directions;  // per planted attribute
  std::vector<hin::EntityId> volunteers;
};

// Ground-truth rows are i.i.d. isotropic Gaussian; attributes are
// c * standardize(Phi* w*) + sqrt(1-c^2) * noise; Follow edges are Bernoulli
// of the ground-truth score with a bias bisection-tuned to the density
// target; WTF edges are the top-scoring second neighbors of each volunteer.
World generate_world(const WorldSpec& spec);

enum class Perturbation { RemoveFollow, AddArtificialWTF, SubsetSources, PartitionHalf };

// RemoveFollow drops floor(magnitude*|Follow|) edges uniformly;
// AddArtificialWTF adds round(magnitude*|WTF|) plausible unobserved WTF edges
// using the negative-curation strategies; SubsetSources keeps only WTF edges
// whose source falls in a random magnitude-fraction of the WTF sources (the
// follower network stays intact); PartitionHalf splits edges in two random
// halves and returns the first (magnitude < 0.5) or second (magnitude >=
// 0.5). The entity registry is always preserved.
hin::HinGraph perturb_dataset(const hin::HinGraph& graph, Perturbation kind,
                              double magnitude, std::uint64_t seed);

struct AffineAlignment {
  std::vector<double> transform;  // d x d row-major
  std::vector<double> offset;     // d
  double r2;                      // mean per-entity coefficient of determination
  double cosine_mean;
  double cosine_q025, cosine_q975;
};

// Least-squares fit phi_var ~ phi_ref * A + 1 b^T; r2 averages per-entity
// 1 - SSE/SST and the cosines compare aligned rows with actual ones.
AffineAlignment affine_align(const std::vector<double>& phi_ref,
                             const std::vector<double>& phi_var, std::size_t n,
                             std::size_t d);
AffineAlignment affine_align(const transe::EmbeddingModel& ref,
                             const transe::EmbeddingModel& var);

// Bipartite ideology world with known 1-D or 2-D positions; the oracle
// substrate for the homophily scaling recovery checks.
struct IdeologyWorldSpec {
  std::size_t n_users = 500;
  std::size_t n_mps = 40;
  int d_pol = 1;
  std::vector<std::string> parties = {"left", "right"};
  double gamma = 1.0;
  double activity_sd = 0.5;
  double popularity_sd = 0.5;
  std::uint64_t seed = 0;
};

struct IdeologyWorld {
  scaling::BipartiteGraph graph;
  std::vector<double> true_user_positions;  // n_users * d_pol
  std::vector<double> true_mp_positions;    // n_mps * d_pol
  std::vector<std::string> mp_party;
  std::map<std::string, std::vector<double>> party_reference;
};

IdeologyWorld generate_ideology_world(const IdeologyWorldSpec& spec);

}  // namespace lp::bench
