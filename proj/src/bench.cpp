#include "latentprobe/bench.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "latentprobe/kernels.hpp"
#include "latentprobe/rng.hpp"
#include "latentprobe/stats.hpp"

namespace lp::bench {

void WorldSpec::validate() const {
  if (n_entities < 10) throw std::invalid_argument("world needs >= 10 entities");
  if (dim_true < 1) throw std::invalid_argument("dim_true must be >= 1");
  if (follow_density <= 0.0 || follow_density >= 1.0)
    throw std::invalid_argument("follow_density must be in (0,1)");
  if (volunteer_fraction <= 0.0 || volunteer_fraction > 1.0)
    throw std::invalid_argument("volunteer_fraction must be in (0,1]");
  if (wtf_slate_size < 1) throw std::invalid_argument("wtf_slate_size must be >= 1");
  for (const auto& attr : planted) {
    if (attr.target_corr < 0.0 || attr.target_corr > 1.0)
      throw std::invalid_argument("target correlation must be in [0,1]");
    if (!attr.direction.empty() &&
        attr.direction.size() != static_cast<std::size_t>(dim_true))
      throw std::invalid_argument("planted direction dimension mismatch");
  }
}

namespace {

std::vector<double> random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(static_cast<std::size_t>(dim));
  double norm = 0.0;
  while (norm < 1e-12) {
    for (double& v : w) v = normal(rng);
    norm = std::sqrt(kern::dot(w.data(), w.data(), w.size()));
  }
  for (double& v : w) v /= norm;
  return w;
}

void standardize(std::vector<double>& x) {
  double m = stats::mean(x);
  double sd = stats::population_std(x);
  if (sd == 0.0) throw std::runtime_error("degenerate projection; cannot standardize");
  for (double& v : x) v = (v - m) / sd;
}

}  // namespace

World generate_world(const WorldSpec& spec) {
  spec.validate();
  std::size_t n = spec.n_entities;
  std::size_t d = static_cast<std::size_t>(spec.dim_true);

  // Ground-truth embedding; entry scale makes row dot products ~ unit variance.
  double entry_sd = std::pow(static_cast<double>(spec.dim_true), -0.25);
  transe::EmbeddingModel truth(n, spec.dim_true, {"Follow", "WTF"});
  {
    auto rng = make_rng(spec.seed, rng_tag::kWorld, 0);
    std::normal_distribution<double> normal(0.0, entry_sd);
    for (double& v : truth.phi()) v = normal(rng);
    auto rel_rng = make_rng(spec.seed, rng_tag::kWorld, 1);
    for (std::size_t j = 0; j < d; ++j)
      truth.relation_vector(hin::kFollow)[j] =
          spec.follow_rel_scale * normal(rel_rng);
    for (std::size_t j = 0; j < d; ++j)
      truth.relation_vector(hin::kWtf)[j] = spec.wtf_rel_scale * normal(rel_rng);
  }

  World world;
  world.attributes.n = n;

  // Planted attributes: a = c * standardize(Phi w*) + sqrt(1-c^2) * noise.
  for (std::size_t k = 0; k < spec.planted.size(); ++k) {
    const PlantedAttribute& pa = spec.planted[k];
    auto rng = make_rng(spec.seed, rng_tag::kWorld, 100 + k);
    std::vector<double> w = pa.direction;
    if (w.empty()) w = random_unit(spec.dim_true, rng);
    std::vector<double> proj(n);
    kern::matvec(truth.phi().data(), n, d, w.data(), proj.data());
    standardize(proj);
    double c = pa.target_corr;
    double noise_scale = std::sqrt(std::max(0.0, 1.0 - c * c));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) {
      double eps;
      if (pa.noise == NoiseLaw::Gaussian) {
        eps = normal(rng);
      } else {
        // Student-t with 3 dof, scaled to unit variance.
        double z = normal(rng);
        double chi = normal(rng) * normal(rng) + normal(rng) * normal(rng) +
                     normal(rng) * normal(rng);
        eps = z / std::sqrt(chi / 3.0) / std::sqrt(3.0);
      }
      a[i] = c * proj[i] + noise_scale * eps;
    }
    world.attributes.add(pa.name, std::move(a));
    world.planted_directions.push_back(std::move(w));
  }

  // Follow edges: Bernoulli(sigmoid(score + bias)), bias tuned by bisection on
  // a fixed sample of pairs so the realized density tracks the target.
  std::vector<double> sample_scores;
  {
    auto rng = make_rng(spec.seed, rng_tag::kWorld, 2);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::size_t n_samples = std::min<std::size_t>(200000, n * (n - 1));
    sample_scores.reserve(n_samples);
    auto rel = truth.relation_vector(hin::kFollow);
    while (sample_scores.size() < n_samples) {
      std::size_t s = pick(rng), t = pick(rng);
      if (s == t) continue;
      sample_scores.push_back(kern::score_sum(truth.row(s).data(), rel.data(),
                                              truth.row(t).data(), d));
    }
  }
  auto est_density = [&](double bias) {
    double acc = 0.0;
    for (double f : sample_scores) acc += stats::sigmoid(f + bias);
    return acc / static_cast<double>(sample_scores.size());
  };
  double lo = -40.0, hi = 40.0;
  if (est_density(lo) > spec.follow_density || est_density(hi) < spec.follow_density)
    throw std::runtime_error("follow density target unattainable within bias bounds");
  for (int it = 0; it < 80; ++it) {
    double mid = 0.5 * (lo + hi);
    (est_density(mid) < spec.follow_density ? lo : hi) = mid;
  }
  double bias = 0.5 * (lo + hi);

  std::vector<std::string> names(n);
  for (std::size_t i = 0; i < n; ++i) names[i] = "u" + std::to_string(i);

  hin::HinGraph follow_graph;
  for (const auto& name : names) follow_graph.intern(name);
  {
    auto rng = make_rng(spec.seed, rng_tag::kWorld, 3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<double> query(d), scores(n);
    auto rel = truth.relation_vector(hin::kFollow);
    for (std::size_t s = 0; s < n; ++s) {
      auto row = truth.row(s);
      for (std::size_t j = 0; j < d; ++j) query[j] = row[j] + rel[j];
      kern::matvec(truth.phi().data(), n, d, query.data(), scores.data());
      for (std::size_t t = 0; t < n; ++t) {
        if (t == s) continue;
        if (uni(rng) < stats::sigmoid(scores[t] + bias))
          follow_graph.add_edge(static_cast<hin::EntityId>(s), hin::kFollow,
                                static_cast<hin::EntityId>(t));
      }
    }
  }
  follow_graph.finalize();

  // Volunteers and their WTF slates: top second neighbors by ground-truth
  // WTF score.
  std::vector<hin::EntityId> volunteers(n);
  std::iota(volunteers.begin(), volunteers.end(), 0);
  {
    auto rng = make_rng(spec.seed, rng_tag::kWorld, 4);
    std::shuffle(volunteers.begin(), volunteers.end(), rng);
    std::size_t n_vol = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(spec.volunteer_fraction * static_cast<double>(n))));
    volunteers.resize(std::min(n_vol, n));
    std::sort(volunteers.begin(), volunteers.end());
  }
  std::vector<hin::Edge> wtf_edges;
  {
    auto rel = truth.relation_vector(hin::kWtf);
    for (hin::EntityId s : volunteers) {
      auto cands = follow_graph.second_neighbors(s, hin::kFollow);
      if (cands.empty()) continue;
      std::vector<rec::SlateItem> scored;
      scored.reserve(cands.size());
      for (hin::EntityId c : cands)
        scored.push_back({c, kern::score_sum(truth.row(s).data(), rel.data(),
                                             truth.row(c).data(), d)});
      auto better = [](const rec::SlateItem& a, const rec::SlateItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.target < b.target;
      };
      std::size_t keep = std::min<std::size_t>(
          static_cast<std::size_t>(spec.wtf_slate_size), scored.size());
      std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(), better);
      for (std::size_t i = 0; i < keep; ++i)
        wtf_edges.push_back(hin::Edge{s, hin::kWtf, scored[i].target});
    }
  }

  // Assemble the final graph with both relations.
  hin::HinGraph graph;
  for (const auto& name : names) graph.intern(name);
  for (const hin::Edge& e : follow_graph.edges(hin::kFollow))
    graph.add_edge(e.source, hin::kFollow, e.target);
  for (const hin::Edge& e : wtf_edges) graph.add_edge(e.source, hin::kWtf, e.target);
  graph.finalize();

  // Independent topic mixtures (symmetric Dirichlet via exponentials).
  if (spec.n_topics > 0) {
    world.topics.n = n;
    world.topics.n_topics = static_cast<std::size_t>(spec.n_topics);
    world.topics.rows.resize(n * world.topics.n_topics);
    auto rng = make_rng(spec.seed, rng_tag::kWorld, 5);
    std::exponential_distribution<double> expd(1.0);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t t = 0; t < world.topics.n_topics; ++t) {
        double v = expd(rng);
        world.topics.rows[i * world.topics.n_topics + t] = v;
        sum += v;
      }
      for (std::size_t t = 0; t < world.topics.n_topics; ++t)
        world.topics.rows[i * world.topics.n_topics + t] /= sum;
    }
  }

  world.graph = std::move(graph);
  world.truth = std::move(truth);
  world.volunteers = std::move(volunteers);
  return world;
}

namespace {

hin::HinGraph copy_registry(const hin::HinGraph& graph) {
  hin::HinGraph out(graph.relation_names());
  for (std::size_t i = 0; i < graph.entity_count(); ++i)
    out.intern(graph.entity_name(static_cast<hin::EntityId>(i)));
  return out;
}

}  // namespace

hin::HinGraph perturb_dataset(const hin::HinGraph& graph, Perturbation kind,
                              double magnitude, std::uint64_t seed) {
  if (magnitude < 0.0 || magnitude > 1.0)
    throw std::invalid_argument("magnitude must be in [0,1]");
  if (!graph.finalized()) throw std::logic_error("finalize() the graph first");
  hin::HinGraph out = copy_registry(graph);
  auto rng = make_rng(seed, rng_tag::kPerturb);

  switch (kind) {
    case Perturbation::RemoveFollow: {
      std::vector<hin::Edge> follow = graph.edges(hin::kFollow);
      std::shuffle(follow.begin(), follow.end(), rng);
      std::size_t drop = static_cast<std::size_t>(
          std::floor(magnitude * static_cast<double>(follow.size()) + 1e-9));
      for (std::size_t i = drop; i < follow.size(); ++i)
        out.add_edge(follow[i].source, hin::kFollow, follow[i].target);
      for (const hin::Edge& e : graph.edges(hin::kWtf))
        out.add_edge(e.source, hin::kWtf, e.target);
      break;
    }
    case Perturbation::AddArtificialWTF: {
      for (std::size_t r = 0; r < graph.relation_count(); ++r)
        for (const hin::Edge& e : graph.edges(static_cast<hin::RelationId>(r)))
          out.add_edge(e.source, e.relation, e.target);
      const auto& wtf = graph.edges(hin::kWtf);
      std::size_t n_add = static_cast<std::size_t>(
          std::llround(magnitude * static_cast<double>(wtf.size())));
      constexpr hin::NegStrategy kStrategies[3] = {
          hin::NegStrategy::Uniform, hin::NegStrategy::Prevalence,
          hin::NegStrategy::SecondNeighborhood};
      std::size_t added = 0;
      std::uint64_t round = 0;
      while (added < n_add) {
        std::vector<hin::Edge> pool = wtf;
        std::shuffle(pool.begin(), pool.end(), rng);
        std::size_t before = added;
        for (int s = 0; s < 3 && added < n_add; ++s) {
          auto chunk = hin::corrupt_edges(pool, kStrategies[s], graph,
                                          mix_seed(seed, rng_tag::kPerturb,
                                                   round * 3 + s + 1));
          for (const hin::Edge& e : chunk.edges) {
            if (added == n_add) break;
            if (out.add_edge(e.source, hin::kWtf, e.target)) ++added;
          }
        }
        if (added == before)
          throw std::runtime_error("cannot synthesize enough artificial WTF edges");
        ++round;
      }
      break;
    }
    case Perturbation::SubsetSources: {
      std::vector<hin::EntityId> sources;
      for (const hin::Edge& e : graph.edges(hin::kWtf)) sources.push_back(e.source);
      std::sort(sources.begin(), sources.end());
      sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
      std::shuffle(sources.begin(), sources.end(), rng);
      std::size_t keep = static_cast<std::size_t>(
          std::llround(magnitude * static_cast<double>(sources.size())));
      sources.resize(keep);
      std::sort(sources.begin(), sources.end());
      for (const hin::Edge& e : graph.edges(hin::kFollow))
        out.add_edge(e.source, hin::kFollow, e.target);
      for (const hin::Edge& e : graph.edges(hin::kWtf))
        if (std::binary_search(sources.begin(), sources.end(), e.source))
          out.add_edge(e.source, hin::kWtf, e.target);
      break;
    }
    case Perturbation::PartitionHalf: {
      std::vector<hin::Edge> all;
      for (std::size_t r = 0; r < graph.relation_count(); ++r) {
        const auto& es = graph.edges(static_cast<hin::RelationId>(r));
        all.insert(all.end(), es.begin(), es.end());
      }
      std::shuffle(all.begin(), all.end(), rng);
      std::size_t half = (all.size() + 1) / 2;
      std::size_t begin = magnitude < 0.5 ? 0 : half;
      std::size_t end = magnitude < 0.5 ? half : all.size();
      for (std::size_t i = begin; i < end; ++i)
        out.add_edge(all[i].source, all[i].relation, all[i].target);
      break;
    }
  }
  out.finalize();
  return out;
}

AffineAlignment affine_align(const std::vector<double>& phi_ref,
                             const std::vector<double>& phi_var, std::size_t n,
                             std::size_t d) {
  if (phi_ref.size() != n * d || phi_var.size() != n * d)
    throw std::invalid_argument("matrix shapes must match");
  if (n <= d) throw std::invalid_argument("alignment needs n > d");

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d + 1));
  Eigen::MatrixXd target(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          phi_ref[i * d + j];
      target(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          phi_var[i * d + j];
    }
    design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    throw std::invalid_argument(
        "reference embedding is rank deficient; consider a ridge or fewer columns");
  Eigen::MatrixXd beta = qr.solve(target);  // (d+1) x d
  Eigen::MatrixXd fitted = design * beta;

  Eigen::RowVectorXd col_mean = target.colwise().mean();
  std::vector<double> cosines;
  cosines.reserve(n);
  double r2_sum = 0.0;
  std::size_t r2_count = 0;
  for (Eigen::Index i = 0; i < target.rows(); ++i) {
    double sse = (target.row(i) - fitted.row(i)).squaredNorm();
    double sst = (target.row(i) - col_mean).squaredNorm();
    if (sst > 0.0) {
      r2_sum += 1.0 - sse / sst;
      ++r2_count;
    }
    double nf = fitted.row(i).norm(), nv = target.row(i).norm();
    if (nf > 0.0 && nv > 0.0)
      cosines.push_back(fitted.row(i).dot(target.row(i)) / (nf * nv));
  }
  if (r2_count == 0 || cosines.empty())
    throw std::invalid_argument("degenerate alignment inputs");

  AffineAlignment out;
  out.transform.resize(d * d);
  out.offset.resize(d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c)
      out.transform[r * d + c] =
          beta(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  for (std::size_t c = 0; c < d; ++c)
    out.offset[c] = beta(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
  out.r2 = r2_sum / static_cast<double>(r2_count);
  std::sort(cosines.begin(), cosines.end());
  out.cosine_mean = stats::mean(cosines);
  out.cosine_q025 = stats::quantile_sorted(cosines, 0.025);
  out.cosine_q975 = stats::quantile_sorted(cosines, 0.975);
  return out;
}

AffineAlignment affine_align(const transe::EmbeddingModel& ref,
                             const transe::EmbeddingModel& var) {
  if (ref.entity_count() != var.entity_count() || ref.dim() != var.dim())
    throw std::invalid_argument("models must share shape");
  return affine_align(ref.phi(), var.phi(), ref.entity_count(),
                      static_cast<std::size_t>(ref.dim()));
}

IdeologyWorld generate_ideology_world(const IdeologyWorldSpec& spec) {
  if (spec.d_pol != 1 && spec.d_pol != 2)
    throw std::invalid_argument("d_pol must be 1 or 2");
  if (spec.parties.size() < static_cast<std::size_t>(spec.d_pol) + 1)
    throw std::invalid_argument("need at least d_pol+1 parties");
  std::size_t d = static_cast<std::size_t>(spec.d_pol);
  std::size_t n_parties = spec.parties.size();

  // Party centers spread over the latent space; the reference scale is the
  // affine image x -> 10 (x + 1.5) / 3 per dimension (centers at +-1.5 in 1-D
  // map to 0 and 10).
  auto center_of = [&](std::size_t p) {
    std::vector<double> c(d, 0.0);
    if (d == 1) {
      c[0] = n_parties == 1
                 ? 0.0
                 : -1.5 + 3.0 * static_cast<double>(p) /
                              static_cast<double>(n_parties - 1);
    } else {
      double angle = 2.0 * 3.14159265358979323846 * static_cast<double>(p) /
                     static_cast<double>(n_parties);
      c[0] = 1.5 * std::cos(angle);
      c[1] = 1.5 * std::sin(angle);
    }
    return c;
  };
  auto ref_map = [](double x) { return 10.0 * (x + 1.5) / 3.0; };

  IdeologyWorld world;
  auto rng = make_rng(spec.seed, rng_tag::kWorld, 7);
  std::normal_distribution<double> normal(0.0, 1.0);

  world.true_mp_positions.resize(spec.n_mps * d);
  world.mp_party.resize(spec.n_mps);
  std::vector<double> popularity(spec.n_mps);
  for (std::size_t j = 0; j < spec.n_mps; ++j) {
    std::size_t p = j % n_parties;
    world.mp_party[j] = spec.parties[p];
    auto center = center_of(p);
    for (std::size_t k = 0; k < d; ++k)
      world.true_mp_positions[j * d + k] = center[k] + 0.3 * normal(rng);
    popularity[j] = spec.popularity_sd * normal(rng);
  }
  for (std::size_t p = 0; p < n_parties; ++p) {
    auto center = center_of(p);
    std::vector<double> ref(d);
    for (std::size_t k = 0; k < d; ++k) ref[k] = ref_map(center[k]);
    world.party_reference[spec.parties[p]] = std::move(ref);
  }

  world.graph.mp_names.resize(spec.n_mps);
  for (std::size_t j = 0; j < spec.n_mps; ++j)
    world.graph.mp_names[j] = "mp" + std::to_string(j);

  world.true_user_positions.resize(spec.n_users * d);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (std::size_t i = 0; i < spec.n_users; ++i) {
    std::vector<std::uint32_t> follows;
    std::vector<double> pos(d);
    for (int attempt = 0; attempt < 100; ++attempt) {
      follows.clear();
      for (std::size_t k = 0; k < d; ++k) pos[k] = normal(rng);
      double activity = 2.5 + spec.activity_sd * normal(rng);
      for (std::uint32_t j = 0; j < spec.n_mps; ++j) {
        double dist2 = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
          double diff = pos[k] - world.true_mp_positions[j * d + k];
          dist2 += diff * diff;
        }
        double p = stats::sigmoid(activity + popularity[j] - spec.gamma * dist2);
        if (uni(rng) < p) follows.push_back(j);
      }
      if (follows.size() >= 3) break;
    }
    if (follows.size() < 3)
      throw std::runtime_error("could not generate a user following >= 3 MPs");
    for (std::size_t k = 0; k < d; ++k)
      world.true_user_positions[i * d + k] = pos[k];
    world.graph.user_names.push_back("user" + std::to_string(i));
    world.graph.follows.push_back(std::move(follows));
  }

  // Every MP needs at least one follower for the fit preconditions.
  std::vector<std::size_t> followers(spec.n_mps, 0);
  for (const auto& f : world.graph.follows)
    for (std::uint32_t j : f) ++followers[j];
  for (std::uint32_t j = 0; j < spec.n_mps; ++j) {
    if (followers[j] > 0) continue;
    auto& f = world.graph.follows[j % world.graph.follows.size()];
    f.insert(std::lower_bound(f.begin(), f.end(), j), j);
  }
  return world;
}

}  // namespace lp::bench
