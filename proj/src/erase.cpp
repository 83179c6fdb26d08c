#include "latentprobe/erase.hpp"

#include <cmath>
#include <stdexcept>

#include "latentprobe/kernels.hpp"
#include "latentprobe/rng.hpp"

namespace lp::erase {

namespace {

void check_orthonormal(std::span<const std::vector<double>> directions,
                       std::size_t cols) {
  for (std::size_t i = 0; i < directions.size(); ++i) {
    if (directions[i].size() != cols)
      throw std::invalid_argument("direction dimension mismatch");
    for (std::size_t j = 0; j <= i; ++j) {
      double d = kern::dot(directions[i].data(), directions[j].data(), cols);
      double expected = i == j ? 1.0 : 0.0;
      if (std::abs(d - expected) > 1e-8)
        throw std::invalid_argument("directions are not orthonormal");
    }
  }
}

// Gram-Schmidt against the already removed set, then normalize. Returns false
// when the candidate is numerically inside the removed span.
bool orthonormalize(std::vector<double>& w,
                    const std::vector<std::vector<double>>& removed) {
  std::size_t d = w.size();
  for (const auto& u : removed) {
    double c = kern::dot(w.data(), u.data(), d);
    kern::axpy(-c, u.data(), w.data(), d);
  }
  double norm = std::sqrt(kern::dot(w.data(), w.data(), d));
  if (norm < 1e-12) return false;
  for (double& v : w) v /= norm;
  return true;
}

}  // namespace

void apply_protection(double* a, std::size_t rows, std::size_t cols,
                      std::span<const std::vector<double>> directions) {
  check_orthonormal(directions, cols);
  for (const auto& w : directions) kern::project_rows(a, rows, cols, w.data());
}

transe::EmbeddingModel apply_protection(const transe::EmbeddingModel& model,
                                        std::span<const std::vector<double>> directions,
                                        bool project_relations) {
  transe::EmbeddingModel out = model;
  apply_protection(out.phi().data(), out.entity_count(),
                   static_cast<std::size_t>(out.dim()), directions);
  if (project_relations && !out.relation_names().empty())
    apply_protection(out.relations().data(), out.relation_names().size(),
                     static_cast<std::size_t>(out.dim()), directions);
  return out;
}

ErasureResult erase_attribute(const transe::EmbeddingModel& model,
                              const std::string& attr,
                              const probe::AttributeTable& table,
                              const EraseConfig& config) {
  if (config.significance <= 0.0 || config.significance >= 1.0)
    throw std::invalid_argument("significance must be in (0,1)");
  int d = model.dim();
  int max_iter = config.max_iter < 0 ? d : config.max_iter;
  if (max_iter > d) throw std::invalid_argument("max_iter cannot exceed dim");

  ErasureResult result;
  result.protected_model = model;
  result.stop_reason = StopReason::MaxIter;
  for (int iter = 0; iter < max_iter; ++iter) {
    probe::ProbeResult pr = probe::cca_direction(result.protected_model, attr, table,
                                                 config.probe);
    pr = probe::permutation_pvalue(result.protected_model, attr, table, pr,
                                   config.n_perm,
                                   mix_seed(config.seed, lp::rng_tag::kPerm,
                                            static_cast<std::uint64_t>(iter)),
                                   config.threads, config.probe);
    if (*pr.p_value > config.significance) {
      result.per_iteration.push_back({pr.correlation, *pr.p_value, false});
      result.stop_reason = StopReason::Significance;
      return result;
    }
    std::vector<double> w = pr.direction;
    if (!orthonormalize(w, result.removed_directions)) {
      // Direction already inside the removed span; nothing left to project.
      result.per_iteration.push_back({pr.correlation, *pr.p_value, false});
      result.stop_reason = StopReason::Significance;
      return result;
    }
    std::vector<std::vector<double>> one{w};
    result.protected_model = apply_protection(result.protected_model, one,
                                              config.project_relations);
    result.removed_directions.push_back(std::move(w));
    result.per_iteration.push_back({pr.correlation, *pr.p_value, true});
  }
  return result;
}

}  // namespace lp::erase
