#include "latentprobe/recommend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "latentprobe/kernels.hpp"
#include "latentprobe/parallel.hpp"
#include "latentprobe/rng.hpp"
#include "latentprobe/stats.hpp"

namespace lp::rec {

Slate rank_slate(const transe::EmbeddingModel& model, hin::EntityId source,
                 const hin::HinGraph& graph, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (source >= graph.entity_count()) throw std::out_of_range("unknown source entity");
  if (graph.entity_count() != model.entity_count())
    throw std::invalid_argument("graph/model entity counts differ");
  std::size_t n = model.entity_count();
  std::size_t d = static_cast<std::size_t>(model.dim());

  // Score every entity at once: Phi * (phi_s + phi_WTF).
  std::vector<double> query(d);
  auto s = model.row(source);
  auto r = model.relation_vector(hin::kWtf);
  for (std::size_t j = 0; j < d; ++j) query[j] = s[j] + r[j];
  std::vector<double> scores(n);
  kern::matvec(model.phi().data(), n, d, query.data(), scores.data());

  auto friends = graph.out_neighbors(source, hin::kFollow);
  std::vector<SlateItem> candidates;
  candidates.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (t == source) continue;
    if (std::binary_search(friends.begin(), friends.end(),
                           static_cast<hin::EntityId>(t)))
      continue;
    candidates.push_back({static_cast<hin::EntityId>(t), scores[t]});
  }
  auto better = [](const SlateItem& a, const SlateItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.target < b.target;
  };
  std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(k),
                                           candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + keep,
                    candidates.end(), better);
  candidates.resize(keep);
  return Slate{source, std::move(candidates)};
}

std::optional<double> slate_diversity(const Slate& slate, const std::string& attr,
                                      const probe::AttributeTable& table,
                                      std::size_t* uncovered) {
  const auto& vals = table.at(attr);
  const auto& mask = table.mask_of(attr);
  std::vector<double> covered;
  std::size_t missing = 0;
  for (const SlateItem& item : slate.items) {
    if (item.target < mask.size() && mask[item.target])
      covered.push_back(vals[item.target]);
    else
      ++missing;
  }
  if (uncovered) *uncovered = missing;
  if (covered.size() < 2) return std::nullopt;
  return stats::population_std(covered);
}

namespace {

double cohens_d_point(std::span<const double> t, std::span<const double> c) {
  double mt = stats::mean(t), mc = stats::mean(c);
  double nt = static_cast<double>(t.size()), nc = static_cast<double>(c.size());
  double st = 0.0, sc = 0.0;
  for (double v : t) st += (v - mt) * (v - mt);
  for (double v : c) sc += (v - mc) * (v - mc);
  double pooled = std::sqrt((st + sc) / (nt + nc - 2.0));
  if (pooled == 0.0)
    throw std::invalid_argument("zero pooled variance; Cohen's d undefined");
  double diff = mt - mc;
  if (diff == 0.0) return 0.0;  // exact zero regardless of rounding in pooled
  return diff / pooled;
}

}  // namespace

CohensD cohens_d_bootstrap(std::span<const double> treatment,
                           std::span<const double> control, int bootstrap_b,
                           std::uint64_t seed) {
  if (treatment.size() < 2 || control.size() < 2)
    throw std::invalid_argument("both samples need >= 2 values");
  if (bootstrap_b < 100) throw std::invalid_argument("bootstrap B must be >= 100");
  CohensD out{cohens_d_point(treatment, control), 0, 0};

  bool paired = treatment.size() == control.size();
  std::vector<double> stats_boot;
  stats_boot.reserve(static_cast<std::size_t>(bootstrap_b));
  std::vector<double> rt(treatment.size()), rc(control.size());
  for (int b = 0; b < bootstrap_b; ++b) {
    auto rng = make_rng(seed, rng_tag::kBoot, static_cast<std::uint64_t>(b));
    if (paired) {
      std::uniform_int_distribution<std::size_t> pick(0, treatment.size() - 1);
      for (std::size_t i = 0; i < treatment.size(); ++i) {
        std::size_t j = pick(rng);
        rt[i] = treatment[j];
        rc[i] = control[j];
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick_t(0, treatment.size() - 1);
      std::uniform_int_distribution<std::size_t> pick_c(0, control.size() - 1);
      for (double& v : rt) v = treatment[pick_t(rng)];
      for (double& v : rc) v = control[pick_c(rng)];
    }
    try {
      stats_boot.push_back(cohens_d_point(rt, rc));
    } catch (const std::invalid_argument&) {
      stats_boot.push_back(0.0);  // degenerate resample
    }
  }
  std::sort(stats_boot.begin(), stats_boot.end());
  out.ci_lo = stats::quantile_sorted(stats_boot, 0.025);
  out.ci_hi = stats::quantile_sorted(stats_boot, 0.975);
  return out;
}

bool TopicTable::covered(std::size_t i) const {
  for (double v : row(i))
    if (std::isnan(v)) return false;
  return true;
}

void TopicTable::validate() const {
  if (rows.size() != n * n_topics) throw std::invalid_argument("topic table shape");
  for (std::size_t i = 0; i < n; ++i) {
    if (!covered(i)) continue;
    double sum = 0.0;
    for (double v : row(i)) {
      if (v < 0.0) throw std::invalid_argument("negative topic weight");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("topic distribution does not sum to 1");
  }
}

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (std::equal(a.begin(), a.end(), b.begin(), b.end())) return 1.0;
  double num = kern::dot(a.data(), b.data(), a.size());
  double na = std::sqrt(kern::dot(a.data(), a.data(), a.size()));
  double nb = std::sqrt(kern::dot(b.data(), b.data(), b.size()));
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("cosine of zero aggregate");
  return num / (na * nb);
}

// Aggregate topic distribution over the recommended friends of the selected
// users; either pooled over all items or a mean of per-user means.
std::vector<double> aggregate_topics(std::span<const Slate> slates,
                                     std::span<const std::size_t> users,
                                     const TopicTable& topics, bool per_user_mean) {
  std::vector<double> agg(topics.n_topics, 0.0);
  double weight = 0.0;
  std::vector<double> user_agg(topics.n_topics);
  for (std::size_t u : users) {
    const Slate& slate = slates[u];
    std::fill(user_agg.begin(), user_agg.end(), 0.0);
    std::size_t covered = 0;
    for (const SlateItem& item : slate.items) {
      if (item.target >= topics.n || !topics.covered(item.target)) continue;
      auto row = topics.row(item.target);
      for (std::size_t t = 0; t < topics.n_topics; ++t) user_agg[t] += row[t];
      ++covered;
    }
    if (covered == 0) continue;
    if (per_user_mean) {
      for (std::size_t t = 0; t < topics.n_topics; ++t)
        agg[t] += user_agg[t] / static_cast<double>(covered);
      weight += 1.0;
    } else {
      for (std::size_t t = 0; t < topics.n_topics; ++t) agg[t] += user_agg[t];
      weight += static_cast<double>(covered);
    }
  }
  if (weight > 0.0)
    for (double& v : agg) v /= weight;
  return agg;
}

}  // namespace

TopicCosine topic_relevance(std::span<const Slate> slates_control,
                            std::span<const Slate> slates_treatment,
                            const TopicTable& topics, int bootstrap_b,
                            std::uint64_t seed, bool per_user_mean) {
  if (slates_control.size() != slates_treatment.size())
    throw std::invalid_argument("slate lists must pair up by user");
  if (slates_control.empty()) throw std::invalid_argument("empty slate lists");
  bool any_items = false;
  for (const auto& s : slates_control) any_items |= !s.items.empty();
  for (const auto& s : slates_treatment) any_items |= !s.items.empty();
  if (!any_items) throw std::invalid_argument("empty slates");
  topics.validate();

  std::vector<std::size_t> all(slates_control.size());
  std::iota(all.begin(), all.end(), 0);
  auto agg_c = aggregate_topics(slates_control, all, topics, per_user_mean);
  auto agg_t = aggregate_topics(slates_treatment, all, topics, per_user_mean);
  TopicCosine out{cosine(agg_c, agg_t), 0, 0, slates_control.size()};

  std::vector<double> boot;
  boot.reserve(static_cast<std::size_t>(bootstrap_b));
  std::vector<std::size_t> resample(all.size());
  for (int b = 0; b < bootstrap_b; ++b) {
    auto rng = make_rng(seed, rng_tag::kBoot, static_cast<std::uint64_t>(b));
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    for (std::size_t& v : resample) v = pick(rng);
    auto rc = aggregate_topics(slates_control, resample, topics, per_user_mean);
    auto rt = aggregate_topics(slates_treatment, resample, topics, per_user_mean);
    double c;
    try {
      c = cosine(rc, rt);
    } catch (const std::invalid_argument&) {
      continue;  // resample hit only uncovered users
    }
    boot.push_back(c);
  }
  if (!boot.empty()) {
    std::sort(boot.begin(), boot.end());
    out.ci_lo = stats::quantile_sorted(boot, 0.025);
    out.ci_hi = stats::quantile_sorted(boot, 0.975);
  } else {
    out.ci_lo = out.ci_hi = out.cosine;
  }
  return out;
}

ImpactReport policy_impact(const transe::EmbeddingModel& control,
                           const transe::EmbeddingModel& treatment,
                           const hin::HinGraph& graph,
                           const probe::AttributeTable& table,
                           const TopicTable* topics, const ImpactConfig& config) {
  if (control.entity_count() != treatment.entity_count() ||
      control.dim() != treatment.dim())
    throw std::invalid_argument("control/treatment models must share the registry");
  if (config.diversity_attr.empty())
    throw std::invalid_argument("diversity attribute required");
  std::size_t n = graph.entity_count();

  std::vector<Slate> slates_c(n), slates_t(n);
  parallel_blocks(n, config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t u = begin; u < end; ++u) {
      slates_c[u] = rank_slate(control, static_cast<hin::EntityId>(u), graph, config.k);
      slates_t[u] = rank_slate(treatment, static_cast<hin::EntityId>(u), graph,
                               config.k);
    }
  });

  ImpactReport report;
  report.k = config.k;
  report.bootstrap_b = config.bootstrap_b;
  for (std::size_t u = 0; u < n; ++u)
    if (!slates_c[u].items.empty() || !slates_t[u].items.empty()) ++report.n_users;

  for (std::size_t u = 0; u < n; ++u) {
    auto dc = slate_diversity(slates_c[u], config.diversity_attr, table);
    auto dt = slate_diversity(slates_t[u], config.diversity_attr, table);
    if (dc && dt) {
      report.diversity_control.push_back(*dc);
      report.diversity_treatment.push_back(*dt);
    }
  }
  // Constant samples (e.g. a degenerate attribute) have no pooled scale; the
  // effect is zero by definition rather than an error at this level.
  auto safe_d = [&](std::span<const double> t, std::span<const double> c,
                    std::uint64_t tag) -> CohensD {
    bool constant = true;
    for (double v : t)
      if (v != c[0]) constant = false;
    for (double v : c)
      if (v != c[0]) constant = false;
    if (constant) return {0, 0, 0};
    return cohens_d_bootstrap(t, c, config.bootstrap_b,
                              mix_seed(config.seed, rng_tag::kBoot, tag));
  };

  if (report.diversity_control.size() >= 2)
    report.diversity_d = safe_d(report.diversity_treatment, report.diversity_control, 1);

  if (topics)
    report.topic_cosine = topic_relevance(slates_c, slates_t, *topics,
                                          config.bootstrap_b,
                                          mix_seed(config.seed, rng_tag::kBoot, 2));

  if (!config.interest_attr.empty() && table.has(config.interest_attr)) {
    const auto& vals = table.at(config.interest_attr);
    const auto& mask = table.mask_of(config.interest_attr);
    std::vector<double> dist_c, dist_t;
    auto mean_distance = [&](const Slate& slate, double own) -> std::optional<double> {
      double acc = 0.0;
      std::size_t cnt = 0;
      for (const SlateItem& item : slate.items) {
        if (item.target >= mask.size() || !mask[item.target]) continue;
        acc += std::abs(vals[item.target] - own);
        ++cnt;
      }
      if (cnt == 0) return std::nullopt;
      return acc / static_cast<double>(cnt);
    };
    for (std::size_t u = 0; u < n; ++u) {
      if (u >= mask.size() || !mask[u]) continue;
      auto mc = mean_distance(slates_c[u], vals[u]);
      auto mt = mean_distance(slates_t[u], vals[u]);
      if (mc && mt) {
        dist_c.push_back(*mc);
        dist_t.push_back(*mt);
      }
    }
    if (dist_c.size() >= 2) {
      report.relevance_d = safe_d(dist_t, dist_c, 3);
      report.has_relevance = true;
    }
  }
  return report;
}

void write_slates_csv(std::span<const Slate> slates, const hin::HinGraph& graph,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write slates: " + path.string());
  out << "source,rank,target,score\n";
  char buf[32];
  for (const Slate& slate : slates) {
    int rank = 1;
    for (const SlateItem& item : slate.items) {
      std::snprintf(buf, sizeof(buf), "%.17g", item.score);
      out << graph.entity_name(slate.source) << ',' << rank++ << ','
          << graph.entity_name(item.target) << ',' << buf << '\n';
    }
  }
}

}  // namespace lp::rec
