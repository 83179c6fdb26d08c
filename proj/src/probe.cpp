#include "latentprobe/probe.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "latentprobe/kernels.hpp"
#include "latentprobe/parallel.hpp"
#include "latentprobe/rng.hpp"
#include "latentprobe/stats.hpp"

namespace lp::probe {

void AttributeTable::add(const std::string& name, std::vector<double> vals,
                         std::vector<std::uint8_t> covered) {
  if (n == 0) n = vals.size();
  if (vals.size() != n || covered.size() != n)
    throw std::invalid_argument("attribute length mismatch");
  values[name] = std::move(vals);
  mask[name] = std::move(covered);
}

void AttributeTable::add(const std::string& name, std::vector<double> vals) {
  std::vector<std::uint8_t> covered(vals.size(), 1);
  add(name, std::move(vals), std::move(covered));
}

std::vector<std::size_t> AttributeTable::covered_indices(const std::string& name) const {
  const auto& m = mask_of(name);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) idx.push_back(i);
  return idx;
}

const std::vector<double>& AttributeTable::at(const std::string& name) const {
  auto it = values.find(name);
  if (it == values.end()) throw std::invalid_argument("unknown attribute: " + name);
  return it->second;
}

const std::vector<std::uint8_t>& AttributeTable::mask_of(const std::string& name) const {
  auto it = mask.find(name);
  if (it == mask.end()) throw std::invalid_argument("unknown attribute: " + name);
  return it->second;
}

namespace {

// The covered, centered (optionally standardized) design matrix together with
// a reusable factorization; permutations only change the attribute vector.
struct CcaProblem {
  Eigen::MatrixXd x;          // m x d
  Eigen::VectorXd a;          // centered attribute, length m
  Eigen::VectorXd col_scale;  // divisor applied per column (1 when not standardizing)
  double ridge = 0.0;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;             // ridge > 0 path
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;  // ridge == 0 path
};

CcaProblem make_problem(const transe::EmbeddingModel& model, const std::string& attr,
                        const AttributeTable& table, const ProbeConfig& config) {
  if (table.n != model.entity_count())
    throw std::invalid_argument("attribute table / model size mismatch");
  auto covered = table.covered_indices(attr);
  std::size_t m = covered.size();
  std::size_t d = static_cast<std::size_t>(model.dim());
  if (m < 3) throw std::invalid_argument("attribute '" + attr +
                                         "' covers fewer than 3 entities");
  CcaProblem p;
  p.x.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  p.a.resize(static_cast<Eigen::Index>(m));
  const auto& vals = table.at(attr);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = model.row(covered[i]);
    for (std::size_t j = 0; j < d; ++j) p.x(i, j) = row[j];
    p.a(static_cast<Eigen::Index>(i)) = vals[covered[i]];
  }
  double a_mean = p.a.mean();
  p.a.array() -= a_mean;
  if (p.a.squaredNorm() == 0.0)
    throw std::invalid_argument("attribute '" + attr + "' has zero variance");
  p.x.rowwise() -= p.x.colwise().mean();
  p.col_scale = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(d));
  if (config.standardize) {
    for (Eigen::Index j = 0; j < p.x.cols(); ++j) {
      double sd = std::sqrt(p.x.col(j).squaredNorm() / static_cast<double>(m - 1));
      if (sd > 0.0) {
        p.col_scale(j) = sd;
        p.x.col(j) /= sd;
      }
    }
  }
  double trace = p.x.squaredNorm();
  p.ridge = config.ridge;
  if (p.ridge == kAutoRidge || p.ridge < 0.0)
    p.ridge = 1e-6 * trace / static_cast<double>(d);
  if (p.ridge == 0.0 && m < d + 2)
    throw std::invalid_argument(
        "too few covered entities for an unregularized direction; supply ridge > 0");
  if (p.ridge > 0.0) {
    Eigen::MatrixXd g = p.x.transpose() * p.x;
    g.diagonal().array() += p.ridge;
    p.ldlt.compute(g);
  } else {
    p.qr.compute(p.x);
    if (p.qr.rank() < p.x.cols())
      throw std::invalid_argument(
          "singular covariance with ridge = 0; supply ridge > 0");
  }
  return p;
}

// Solves for the direction of the permuted/observed attribute and returns
// (w_raw normalized, achieved correlation). `a` must be centered.
std::pair<Eigen::VectorXd, double> solve_direction(const CcaProblem& p,
                                                   const Eigen::VectorXd& a) {
  Eigen::VectorXd w;
  if (p.ridge > 0.0)
    w = p.ldlt.solve(p.x.transpose() * a);
  else
    w = p.qr.solve(a);
  // Map back to raw coordinates when columns were standardized.
  w = w.cwiseQuotient(p.col_scale);
  double norm = w.norm();
  if (norm == 0.0) return {w, 0.0};
  w /= norm;
  // Projection in raw coordinates: x holds scaled columns, undo the scaling.
  Eigen::VectorXd proj = p.x * w.cwiseProduct(p.col_scale);
  double rho = kern::pearson(proj.data(), a.data(), static_cast<std::size_t>(a.size()));
  if (std::isnan(rho)) rho = 0.0;
  return {w, rho};
}

}  // namespace

ProbeResult cca_direction(const transe::EmbeddingModel& model, const std::string& attr,
                          const AttributeTable& table, const ProbeConfig& config) {
  CcaProblem p = make_problem(model, attr, table, config);
  auto [w, rho] = solve_direction(p, p.a);
  if (config.orient_nonneg && rho < 0.0) {
    w = -w;
    rho = -rho;
  }
  ProbeResult result;
  result.attribute = attr;
  result.direction.assign(w.data(), w.data() + w.size());
  result.correlation = rho;
  result.n_used = static_cast<std::size_t>(p.a.size());
  return result;
}

ProbeResult permutation_pvalue(const transe::EmbeddingModel& model,
                               const std::string& attr, const AttributeTable& table,
                               const ProbeResult& observed, int n_perm,
                               std::uint64_t seed, int threads,
                               const ProbeConfig& config) {
  if (n_perm < 100) throw std::invalid_argument("n_perm must be >= 100");
  CcaProblem p = make_problem(model, attr, table, config);
  std::vector<double> null_abs(static_cast<std::size_t>(n_perm));
  parallel_blocks(static_cast<std::size_t>(n_perm), threads,
                  [&](std::size_t begin, std::size_t end) {
                    Eigen::VectorXd perm = p.a;
                    for (std::size_t t = begin; t < end; ++t) {
                      perm = p.a;
                      auto rng = make_rng(seed, rng_tag::kPerm, t);
                      std::shuffle(perm.data(), perm.data() + perm.size(), rng);
                      auto [w, rho] = solve_direction(p, perm);
                      (void)w;
                      null_abs[t] = std::abs(rho);
                    }
                  });
  double obs = std::abs(observed.correlation);
  std::size_t exceed = 0;
  for (double v : null_abs)
    if (v >= obs) ++exceed;
  ProbeResult out = observed;
  out.p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + n_perm);
  std::sort(null_abs.begin(), null_abs.end());
  out.null_quantiles = {stats::quantile_sorted(null_abs, 0.50),
                        stats::quantile_sorted(null_abs, 0.95),
                        stats::quantile_sorted(null_abs, 0.99),
                        stats::quantile_sorted(null_abs, 0.999)};
  return out;
}

AlignmentMatrix alignment_matrix(std::span<const ProbeResult> directions,
                                 const transe::EmbeddingModel& model,
                                 const AttributeTable& table, int n_perm,
                                 std::uint64_t seed, int threads,
                                 const ProbeConfig& config) {
  std::size_t k = directions.size();
  if (k < 2) throw std::invalid_argument("alignment needs at least 2 directions");
  std::size_t d = static_cast<std::size_t>(model.dim());
  for (const auto& dir : directions)
    if (dir.direction.size() != d)
      throw std::invalid_argument("direction dimension mismatch");

  AlignmentMatrix out(k, std::vector<AlignmentCell>(k));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      out[i][j].cosine =
          i == j ? 1.0
                 : kern::dot(directions[i].direction.data(),
                             directions[j].direction.data(), d);

  std::vector<CcaProblem> problems;
  problems.reserve(k);
  for (const auto& dir : directions)
    problems.push_back(make_problem(model, dir.attribute, table, config));

  // counts[i][j] = #permutations with |cos_perm| >= |cos_obs|; accumulated
  // per thread block, merged after the join.
  std::size_t n_threads = threads <= 1 ? 1 : static_cast<std::size_t>(threads);
  std::vector<std::vector<std::size_t>> counts(n_threads,
                                               std::vector<std::size_t>(k * k, 0));
  std::atomic<std::size_t> block_id{0};
  parallel_blocks(static_cast<std::size_t>(n_perm), threads,
                  [&](std::size_t begin, std::size_t end) {
                    std::size_t me = block_id.fetch_add(1);
                    auto& local = counts[me];
                    std::vector<Eigen::VectorXd> ws(k);
                    for (std::size_t t = begin; t < end; ++t) {
                      for (std::size_t i = 0; i < k; ++i) {
                        Eigen::VectorXd perm = problems[i].a;
                        auto rng = make_rng(seed, rng_tag::kAlign, t * k + i);
                        std::shuffle(perm.data(), perm.data() + perm.size(), rng);
                        ws[i] = solve_direction(problems[i], perm).first;
                      }
                      for (std::size_t i = 0; i < k; ++i)
                        for (std::size_t j = 0; j < k; ++j) {
                          double c = i == j ? 1.0 : ws[i].dot(ws[j]);
                          if (std::abs(c) >= std::abs(out[i][j].cosine))
                            ++local[i * k + j];
                        }
                    }
                  });
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      std::size_t exceed = 0;
      for (const auto& local : counts) exceed += local[i * k + j];
      out[i][j].p_value = (1.0 + static_cast<double>(exceed)) / (1.0 + n_perm);
    }
  return out;
}

double projection_spearman(const transe::EmbeddingModel& model,
                           std::span<const double> w1, std::span<const double> w2) {
  std::size_t d = static_cast<std::size_t>(model.dim());
  if (w1.size() != d || w2.size() != d)
    throw std::invalid_argument("direction dimension mismatch");
  for (auto w : {w1, w2}) {
    double norm = std::sqrt(kern::dot(w.data(), w.data(), d));
    if (std::abs(norm - 1.0) > 1e-6)
      throw std::invalid_argument("directions must be unit-norm");
  }
  std::size_t n = model.entity_count();
  std::vector<double> p1(n), p2(n);
  kern::matvec(model.phi().data(), n, d, w1.data(), p1.data());
  kern::matvec(model.phi().data(), n, d, w2.data(), p2.data());
  double rho = stats::spearman(p1, p2);
  if (std::isnan(rho))
    throw std::invalid_argument("constant projection; Spearman undefined");
  return rho;
}

namespace {

double binomial(std::size_t n, std::size_t r) {
  double v = 1.0;
  for (std::size_t i = 0; i < r; ++i)
    v *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  return v;
}

double median_of(std::vector<double> v) {
  std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.end());
  return 0.5 * (hi + v[mid - 1]);
}

}  // namespace

OrderingTest ordering_test(std::span<const double> positions,
                           std::span<const std::size_t> group_a,
                           std::span<const std::size_t> group_b) {
  auto gather = [&](std::span<const std::size_t> idx) {
    std::vector<double> vals;
    for (std::size_t i : idx) {
      if (i >= positions.size()) throw std::out_of_range("group index out of range");
      if (std::isfinite(positions[i])) vals.push_back(positions[i]);
    }
    return vals;
  };
  std::vector<double> a = gather(group_a), b = gather(group_b);
  if (a.empty() || b.empty()) throw std::invalid_argument("empty group");
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("both groups need >= 2 members with positions");

  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  auto ranks = stats::midranks(pooled);
  double ra = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ra += ranks[i];
  double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  double u = ra - na * (na + 1.0) / 2.0;
  double mu = na * nb / 2.0;

  OrderingTest result;
  result.u_statistic = u;
  double med_a = median_of(a), med_b = median_of(b);
  result.direction = med_a > med_b   ? OrderDirection::GroupA
                     : med_b > med_a ? OrderDirection::GroupB
                                     : OrderDirection::Tied;

  std::size_t n = pooled.size();
  if (binomial(n, a.size()) <= 200000.0) {
    // Exact: enumerate every assignment of pooled values to group A.
    std::vector<std::size_t> idx(a.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::size_t total = 0, as_extreme = 0;
    double obs_dev = std::abs(u - mu) - 1e-12;
    while (true) {
      double r = 0.0;
      for (std::size_t i : idx) r += ranks[i];
      double u_perm = r - na * (na + 1.0) / 2.0;
      ++total;
      if (std::abs(u_perm - mu) >= obs_dev) ++as_extreme;
      // next combination
      std::size_t k = a.size();
      std::size_t i = k;
      while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
      if (i == 0) break;
      ++idx[i - 1];
      for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
    result.p_value = static_cast<double>(as_extreme) / static_cast<double>(total);
  } else {
    // Normal approximation with tie correction and continuity correction.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && sorted[j + 1] == sorted[i]) ++j;
      double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
    double nn = static_cast<double>(n);
    double var = na * nb / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
    if (var <= 0.0) {
      result.p_value = 1.0;
    } else {
      double z = (std::abs(u - mu) - 0.5) / std::sqrt(var);
      if (z < 0.0) z = 0.0;
      result.p_value = std::min(1.0, 2.0 * stats::normal_sf(z));
    }
  }
  return result;
}

std::vector<TokenLift> decile_overrepresentation(
    std::span<const double> positions,
    const std::vector<std::vector<std::string>>& tokens, Decile decile,
    double min_support) {
  if (tokens.size() != positions.size())
    throw std::invalid_argument("positions/tokens length mismatch");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < positions.size(); ++i)
    if (std::isfinite(positions[i])) idx.push_back(i);
  if (idx.size() < 10)
    throw std::invalid_argument("decile analysis needs >= 10 positioned entities");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (positions[a] != positions[b]) return positions[a] < positions[b];
    return a < b;
  });
  std::size_t m = idx.size() / 10;
  std::vector<std::size_t> chosen(
      decile == Decile::First ? std::vector<std::size_t>(idx.begin(), idx.begin() + m)
                              : std::vector<std::size_t>(idx.end() - m, idx.end()));

  auto entity_tokens = [&](std::size_t i) {
    std::vector<std::string> t = tokens[i];
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  };
  std::map<std::string, std::size_t> decile_count, overall_count;
  for (std::size_t i : chosen)
    for (const auto& t : entity_tokens(i)) ++decile_count[t];
  for (std::size_t i : idx)
    for (const auto& t : entity_tokens(i)) ++overall_count[t];

  std::vector<TokenLift> out;
  for (const auto& [token, cnt] : decile_count) {
    double dec_freq = static_cast<double>(cnt) / static_cast<double>(m);
    if (dec_freq < min_support) continue;
    double all_freq =
        static_cast<double>(overall_count[token]) / static_cast<double>(idx.size());
    out.push_back({token, dec_freq / all_freq, dec_freq, all_freq});
  }
  std::sort(out.begin(), out.end(), [](const TokenLift& a, const TokenLift& b) {
    if (a.lift != b.lift) return a.lift > b.lift;
    return a.token < b.token;
  });
  return out;
}

}  // namespace lp::probe
