#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latentprobe/transe.hpp"

namespace lp::probe {

// Per-entity real attribute values with missingness masks.
struct AttributeTable {
  std::size_t n = 0;
  std::map<std::string, std::vector<double>> values;       // length n each
  std::map<std::string, std::vector<std::uint8_t>> mask;   // 1 = covered

  void add(const std::string& name, std::vector<double> vals,
           std::vector<std::uint8_t> covered);
  // Convenience for fully covered attributes.
  void add(const std::string& name, std::vector<double> vals);
  bool has(const std::string& name) const { return values.count(name) > 0; }
  std::vector<std::size_t> covered_indices(const std::string& name) const;
  const std::vector<double>& at(const std::string& name) const;
  const std::vector<std::uint8_t>& mask_of(const std::string& name) const;
};

struct NullQuantiles {
  double q50 = 0, q95 = 0, q99 = 0, q999 = 0;
};

struct ProbeResult {
  std::string attribute;
  std::vector<double> direction;  // unit vector, length d
  double correlation = 0;         // Pearson rho of Phi*w vs a on covered rows
  std::optional<double> p_value;
  NullQuantiles null_quantiles;
  std::size_t n_used = 0;
};

// ridge < 0 selects the default 1e-6 * trace(X^T X) / d.
constexpr double kAutoRidge = -1.0;

struct ProbeConfig {
  double ridge = kAutoRidge;
  bool standardize = false;    // scale centered columns to unit variance
  bool orient_nonneg = true;   // flip sign so the reported rho is >= 0
};

// Direction maximizing Pearson correlation between Phi*w and the attribute
// over covered rows (the univariate CCA special case, solved in closed form
// through the ridge-regularized normal equations).
ProbeResult cca_direction(const transe::EmbeddingModel& model,
                          const std::string& attr, const AttributeTable& table,
                          const ProbeConfig& config = {});

// Completes `observed` with an add-one-smoothed permutation p-value,
// p = (1 + #{|rho_perm| >= |rho_obs|}) / (1 + n_perm), and null quantiles.
ProbeResult permutation_pvalue(const transe::EmbeddingModel& model,
                               const std::string& attr, const AttributeTable& table,
                               const ProbeResult& observed, int n_perm,
                               std::uint64_t seed, int threads = 1,
                               const ProbeConfig& config = {});

struct AlignmentCell {
  double cosine = 0;   // signed; reports use |cosine|
  double p_value = 1;  // permutation p on |cosine|
};

using AlignmentMatrix = std::vector<std::vector<AlignmentCell>>;

AlignmentMatrix alignment_matrix(std::span<const ProbeResult> directions,
                                 const transe::EmbeddingModel& model,
                                 const AttributeTable& table, int n_perm,
                                 std::uint64_t seed, int threads = 1,
                                 const ProbeConfig& config = {});

// Spearman rank correlation of Phi*w1 vs Phi*w2 over all entities.
double projection_spearman(const transe::EmbeddingModel& model,
                           std::span<const double> w1, std::span<const double> w2);

enum class OrderDirection { GroupA, GroupB, Tied };

struct OrderingTest {
  double u_statistic;  // U of group A, with half credit for ties
  double p_value;      // two-sided; exact by enumeration for small samples
  OrderDirection direction;
};

OrderingTest ordering_test(std::span<const double> positions,
                           std::span<const std::size_t> group_a,
                           std::span<const std::size_t> group_b);

struct TokenLift {
  std::string token;
  double lift;          // decile frequency / overall frequency
  double decile_freq;
  double overall_freq;
};

enum class Decile { First, Last };

// Tokens overrepresented in the first or last decile of `positions`. Entities
// with NaN positions are excluded from both the decile and the base rate.
std::vector<TokenLift> decile_overrepresentation(
    std::span<const double> positions,
    const std::vector<std::vector<std::string>>& tokens, Decile decile,
    double min_support);

}  // namespace lp::probe
