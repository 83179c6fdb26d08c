#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace lp::scaling {

// Bipartite user x MP follow graph. Users and MPs have separate index spaces.
struct BipartiteGraph {
  std::vector<std::string> user_names;
  std::vector<std::string> mp_names;
  std::vector<std::vector<std::uint32_t>> follows;  // per user, sorted MP indices

  std::size_t n_users() const { return user_names.size(); }
  std::size_t n_mps() const { return mp_names.size(); }
  bool follows_mp(std::size_t user, std::uint32_t mp) const;
};

// CSV rows `user_id,mp_id`. Users following fewer than min_mps_per_user MPs
// are dropped (Barbera-style filtering); MPs never followed are kept out of
// the index entirely.
BipartiteGraph load_bipartite_csv(const std::filesystem::path& path,
                                  int min_mps_per_user = 3);

struct HomophilyConfig {
  int d_pol = 1;  // 1 or 2
  int max_iter = 3000;
  double learning_rate = 0.05;
  double prior_sd = 1.0;
  double tol = 1e-9;  // relative objective change
  bool fix_gamma_zero = false;
  std::uint64_t seed = 0;
};

// P(U_i -> MP_j) = logistic(alpha_i + beta_j - gamma * ||phi_i - phi_j||^2)
struct HomophilyModel {
  int d_pol = 1;
  std::vector<double> activity;    // alpha_i per user
  std::vector<double> popularity;  // beta_j per MP
  double gamma = 1.0;
  std::vector<double> positions_users;  // n_users * d_pol
  std::vector<double> positions_mps;    // n_mps * d_pol
  double log_likelihood = 0.0;          // data term at the MAP point
  double objective = 0.0;               // penalized objective

  std::span<const double> user_position(std::size_t i) const {
    return {positions_users.data() + i * static_cast<std::size_t>(d_pol),
            static_cast<std::size_t>(d_pol)};
  }
  std::span<const double> mp_position(std::size_t j) const {
    return {positions_mps.data() + j * static_cast<std::size_t>(d_pol),
            static_cast<std::size_t>(d_pol)};
  }
};

double edge_probability(const HomophilyModel& model, std::size_t user,
                        std::size_t mp);

double data_log_likelihood(const HomophilyModel& model, const BipartiteGraph& graph);

// MAP estimate with Gaussian priors (sd prior_sd on positions, activity and
// popularity; gamma = exp(g) with a standard normal prior on g), optimized by
// full-batch Adam.
HomophilyModel fit_homophily(const BipartiteGraph& graph,
                             const HomophilyConfig& config);

// Flattened objective gradient in the order [activity | popularity |
// positions_users | positions_mps | g]; exposed for finite-difference checks.
std::vector<double> objective_gradient(const HomophilyModel& model,
                                       const BipartiteGraph& graph, double prior_sd);
double penalized_objective(const HomophilyModel& model, const BipartiteGraph& graph,
                           double prior_sd);

struct AffineCalibration {
  int d_pol = 1;
  std::vector<double> transform;  // d_pol x d_pol, row-major
  std::vector<double> offset;     // d_pol
  std::vector<std::pair<std::vector<double>, std::vector<double>>> anchors;

  std::vector<double> apply(std::span<const double> position) const;
};

// Least-squares affine map from party centroids (means of MP positions) to
// reference party positions. Needs at least d_pol+1 parties in general
// position.
AffineCalibration calibrate_affine(
    const HomophilyModel& model, const std::vector<std::string>& mp_party,
    const std::map<std::string, std::vector<double>>& reference);

std::vector<double> apply_calibration(const AffineCalibration& calib,
                                      std::span<const double> positions, int d_pol);

}  // namespace lp::scaling
