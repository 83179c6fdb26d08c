#include "latentprobe/scaling.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "latentprobe/rng.hpp"
#include "latentprobe/stats.hpp"

namespace lp::scaling {

bool BipartiteGraph::follows_mp(std::size_t user, std::uint32_t mp) const {
  const auto& f = follows[user];
  return std::binary_search(f.begin(), f.end(), mp);
}

BipartiteGraph load_bipartite_csv(const std::filesystem::path& path,
                                  int min_mps_per_user) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open bipartite csv: " + path.string());
  std::map<std::string, std::vector<std::string>> user_follows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("user_id,", 0) == 0) continue;  // header
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error("expected user_id,mp_id at line " +
                               std::to_string(line_no));
    user_follows[line.substr(0, comma)].push_back(line.substr(comma + 1));
  }
  BipartiteGraph graph;
  std::map<std::string, std::uint32_t> mp_index;
  for (auto& [user, mps] : user_follows) {
    std::sort(mps.begin(), mps.end());
    mps.erase(std::unique(mps.begin(), mps.end()), mps.end());
    if (static_cast<int>(mps.size()) < min_mps_per_user) continue;
    std::vector<std::uint32_t> ids;
    for (const auto& mp : mps) {
      auto [it, inserted] = mp_index.try_emplace(
          mp, static_cast<std::uint32_t>(graph.mp_names.size()));
      if (inserted) graph.mp_names.push_back(mp);
      ids.push_back(it->second);
    }
    std::sort(ids.begin(), ids.end());
    graph.user_names.push_back(user);
    graph.follows.push_back(std::move(ids));
  }
  return graph;
}

namespace {

double sq_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

}  // namespace

double edge_probability(const HomophilyModel& model, std::size_t user,
                        std::size_t mp) {
  double eta = model.activity[user] + model.popularity[mp] -
               model.gamma * sq_distance(model.user_position(user),
                                         model.mp_position(mp));
  return stats::sigmoid(eta);
}

double data_log_likelihood(const HomophilyModel& model, const BipartiteGraph& graph) {
  double ll = 0.0;
  for (std::size_t i = 0; i < graph.n_users(); ++i)
    for (std::uint32_t j = 0; j < graph.n_mps(); ++j) {
      double eta = model.activity[i] + model.popularity[j] -
                   model.gamma * sq_distance(model.user_position(i),
                                             model.mp_position(j));
      ll += graph.follows_mp(i, j) ? stats::log_sigmoid(eta)
                                   : stats::log_sigmoid(-eta);
    }
  return ll;
}

double penalized_objective(const HomophilyModel& model, const BipartiteGraph& graph,
                           double prior_sd) {
  double obj = data_log_likelihood(model, graph);
  double inv2 = 1.0 / (2.0 * prior_sd * prior_sd);
  for (double v : model.activity) obj -= v * v * inv2;
  for (double v : model.popularity) obj -= v * v * inv2;
  for (double v : model.positions_users) obj -= v * v * inv2;
  for (double v : model.positions_mps) obj -= v * v * inv2;
  if (model.gamma > 0.0) {  // gamma = 0 only when pinned, no g prior then
    double g = std::log(model.gamma);
    obj -= 0.5 * g * g;
  }
  return obj;
}

std::vector<double> objective_gradient(const HomophilyModel& model,
                                       const BipartiteGraph& graph, double prior_sd) {
  std::size_t nu = graph.n_users(), nm = graph.n_mps();
  std::size_t d = static_cast<std::size_t>(model.d_pol);
  std::vector<double> grad(nu + nm + (nu + nm) * d + 1, 0.0);
  double* g_act = grad.data();
  double* g_pop = grad.data() + nu;
  double* g_pu = grad.data() + nu + nm;
  double* g_pm = grad.data() + nu + nm + nu * d;
  double* g_g = grad.data() + nu + nm + (nu + nm) * d;

  double gamma = model.gamma;
  for (std::size_t i = 0; i < nu; ++i) {
    auto pi = model.user_position(i);
    for (std::uint32_t j = 0; j < nm; ++j) {
      auto pj = model.mp_position(j);
      double dist2 = sq_distance(pi, pj);
      double eta = model.activity[i] + model.popularity[j] - gamma * dist2;
      double resid = (graph.follows_mp(i, j) ? 1.0 : 0.0) - stats::sigmoid(eta);
      g_act[i] += resid;
      g_pop[j] += resid;
      for (std::size_t k = 0; k < d; ++k) {
        double diff = pi[k] - pj[k];
        g_pu[i * d + k] += resid * (-2.0 * gamma * diff);
        g_pm[j * d + k] += resid * (2.0 * gamma * diff);
      }
      *g_g += resid * (-dist2) * gamma;  // d eta / d g with gamma = exp(g)
    }
  }
  double inv = 1.0 / (prior_sd * prior_sd);
  for (std::size_t i = 0; i < nu; ++i) g_act[i] -= model.activity[i] * inv;
  for (std::size_t j = 0; j < nm; ++j) g_pop[j] -= model.popularity[j] * inv;
  for (std::size_t k = 0; k < nu * d; ++k) g_pu[k] -= model.positions_users[k] * inv;
  for (std::size_t k = 0; k < nm * d; ++k) g_pm[k] -= model.positions_mps[k] * inv;
  if (model.gamma > 0.0) *g_g -= std::log(model.gamma);
  return grad;
}

HomophilyModel fit_homophily(const BipartiteGraph& graph,
                             const HomophilyConfig& config) {
  if (config.d_pol != 1 && config.d_pol != 2)
    throw std::invalid_argument("d_pol must be 1 or 2");
  std::size_t nu = graph.n_users(), nm = graph.n_mps();
  if (nu == 0 || nm == 0) throw std::invalid_argument("empty bipartite graph");
  std::vector<std::size_t> mp_followers(nm, 0);
  for (std::size_t i = 0; i < nu; ++i) {
    if (graph.follows[i].empty())
      throw std::invalid_argument("user '" + graph.user_names[i] +
                                  "' follows no MP");
    for (std::uint32_t j : graph.follows[i]) ++mp_followers[j];
  }
  for (std::uint32_t j = 0; j < nm; ++j)
    if (mp_followers[j] == 0)
      throw std::invalid_argument("MP '" + graph.mp_names[j] + "' has no followers");

  std::size_t d = static_cast<std::size_t>(config.d_pol);
  HomophilyModel model;
  model.d_pol = config.d_pol;
  model.activity.assign(nu, 0.0);
  model.popularity.assign(nm, 0.0);
  model.positions_users.resize(nu * d);
  model.positions_mps.resize(nm * d);
  auto rng = make_rng(config.seed, rng_tag::kFit);
  std::normal_distribution<double> small(0.0, 0.1);
  for (double& v : model.positions_users) v = small(rng);
  for (double& v : model.positions_mps) v = small(rng);
  double g = 0.0;  // gamma = exp(g) = 1
  model.gamma = 1.0;
  if (config.fix_gamma_zero) model.gamma = 0.0;

  // Full-batch Adam on the penalized objective.
  std::size_t nparam = nu + nm + (nu + nm) * d + 1;
  std::vector<double> m(nparam, 0.0), v(nparam, 0.0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double prev_obj = -std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    auto grad = objective_gradient(model, graph,
                                   config.prior_sd);
    if (config.fix_gamma_zero) grad[nparam - 1] = 0.0;
    auto step = [&](double* param, std::size_t offset, std::size_t count) {
      for (std::size_t k = 0; k < count; ++k) {
        std::size_t idx = offset + k;
        m[idx] = b1 * m[idx] + (1.0 - b1) * grad[idx];
        v[idx] = b2 * v[idx] + (1.0 - b2) * grad[idx] * grad[idx];
        double mh = m[idx] / (1.0 - std::pow(b1, iter));
        double vh = v[idx] / (1.0 - std::pow(b2, iter));
        param[k] += config.learning_rate * mh / (std::sqrt(vh) + eps);  // ascent
      }
    };
    step(model.activity.data(), 0, nu);
    step(model.popularity.data(), nu, nm);
    step(model.positions_users.data(), nu + nm, nu * d);
    step(model.positions_mps.data(), nu + nm + nu * d, nm * d);
    if (!config.fix_gamma_zero) {
      step(&g, nu + nm + (nu + nm) * d, 1);
      model.gamma = std::exp(g);
    }
    if (!std::isfinite(model.gamma))
      throw std::runtime_error("homophily fit diverged at iteration " +
                               std::to_string(iter));
    if (iter % 25 == 0 || iter == config.max_iter) {
      double obj = penalized_objective(model, graph, config.prior_sd);
      if (!std::isfinite(obj))
        throw std::runtime_error("homophily fit diverged at iteration " +
                                 std::to_string(iter));
      if (std::abs(obj - prev_obj) <
          config.tol * (std::abs(prev_obj) + 1.0))
        break;
      prev_obj = obj;
    }
  }
  model.log_likelihood = data_log_likelihood(model, graph);
  model.objective = penalized_objective(model, graph, config.prior_sd);
  return model;
}

std::vector<double> AffineCalibration::apply(std::span<const double> position) const {
  std::size_t d = static_cast<std::size_t>(d_pol);
  if (position.size() != d) throw std::invalid_argument("position dimension mismatch");
  std::vector<double> out(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) out[r] += transform[r * d + c] * position[c];
    out[r] += offset[r];
  }
  return out;
}

AffineCalibration calibrate_affine(
    const HomophilyModel& model, const std::vector<std::string>& mp_party,
    const std::map<std::string, std::vector<double>>& reference) {
  std::size_t d = static_cast<std::size_t>(model.d_pol);
  std::size_t nm = model.popularity.size();
  if (mp_party.size() != nm)
    throw std::invalid_argument("party assignment size must match MP count");

  // Party centroids of MP positions.
  std::map<std::string, std::pair<std::vector<double>, std::size_t>> acc;
  for (std::size_t j = 0; j < nm; ++j) {
    auto& [sum, cnt] = acc[mp_party[j]];
    if (sum.empty()) sum.assign(d, 0.0);
    auto pj = model.mp_position(j);
    for (std::size_t k = 0; k < d; ++k) sum[k] += pj[k];
    ++cnt;
  }
  std::vector<std::pair<std::vector<double>, std::vector<double>>> anchors;
  for (const auto& [party, ref] : reference) {
    auto it = acc.find(party);
    if (it == acc.end())
      throw std::invalid_argument("no MPs assigned to party '" + party + "'");
    if (ref.size() != d)
      throw std::invalid_argument("reference position dimension mismatch");
    std::vector<double> centroid(d);
    for (std::size_t k = 0; k < d; ++k)
      centroid[k] = it->second.first[k] / static_cast<double>(it->second.second);
    anchors.emplace_back(std::move(centroid), ref);
  }
  if (anchors.size() < d + 1)
    throw std::invalid_argument("need at least d_pol+1 anchored parties");

  // Least squares for [A | b]: rows [centroid^T 1] -> reference.
  Eigen::MatrixXd design(static_cast<Eigen::Index>(anchors.size()),
                         static_cast<Eigen::Index>(d + 1));
  Eigen::MatrixXd target(static_cast<Eigen::Index>(anchors.size()),
                         static_cast<Eigen::Index>(d));
  for (std::size_t p = 0; p < anchors.size(); ++p) {
    for (std::size_t k = 0; k < d; ++k) {
      design(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) =
          anchors[p].first[k];
      target(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) =
          anchors[p].second[k];
    }
    design(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(d)) = 1.0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < design.cols())
    throw std::invalid_argument(
        "degenerate party centroids; affine calibration is underdetermined");
  Eigen::MatrixXd beta = qr.solve(target);  // (d+1) x d

  AffineCalibration calib;
  calib.d_pol = model.d_pol;
  calib.transform.assign(d * d, 0.0);
  calib.offset.assign(d, 0.0);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c)
      calib.transform[r * d + c] =
          beta(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r));
    calib.offset[r] = beta(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(r));
  }
  Eigen::Map<Eigen::MatrixXd> a(calib.transform.data(), static_cast<Eigen::Index>(d),
                                static_cast<Eigen::Index>(d));
  if (std::abs(a.determinant()) < 1e-12)
    throw std::invalid_argument("calibration transform is singular");
  calib.anchors = std::move(anchors);
  return calib;
}

std::vector<double> apply_calibration(const AffineCalibration& calib,
                                      std::span<const double> positions, int d_pol) {
  std::size_t d = static_cast<std::size_t>(d_pol);
  if (positions.size() % d != 0)
    throw std::invalid_argument("positions length not a multiple of d_pol");
  std::vector<double> out;
  out.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); i += d) {
    auto mapped = calib.apply(positions.subspan(i, d));
    out.insert(out.end(), mapped.begin(), mapped.end());
  }
  return out;
}

}  // namespace lp::scaling
