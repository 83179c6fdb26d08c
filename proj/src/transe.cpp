#include "latentprobe/transe.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "latentprobe/kernels.hpp"
#include "latentprobe/rng.hpp"
#include "latentprobe/stats.hpp"

namespace lp::transe {

void TrainConfig::validate() const {
  if (dim < 1) throw std::invalid_argument("dim must be >= 1");
  if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("alpha must be in [0,1]");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (negative_ratio < 1) throw std::invalid_argument("negative_ratio must be >= 1");
}

EmbeddingModel::EmbeddingModel(std::size_t n, int dim,
                               std::vector<std::string> relation_names)
    : n_(n),
      dim_(dim),
      relation_names_(std::move(relation_names)),
      phi_(n * static_cast<std::size_t>(dim), 0.0),
      rel_(relation_names_.size() * static_cast<std::size_t>(dim), 0.0) {}

std::span<const double> EmbeddingModel::row(std::size_t i) const {
  if (i >= n_) throw std::out_of_range("entity index out of range");
  return {phi_.data() + i * static_cast<std::size_t>(dim_),
          static_cast<std::size_t>(dim_)};
}

std::span<double> EmbeddingModel::row(std::size_t i) {
  if (i >= n_) throw std::out_of_range("entity index out of range");
  return {phi_.data() + i * static_cast<std::size_t>(dim_),
          static_cast<std::size_t>(dim_)};
}

std::span<const double> EmbeddingModel::relation_vector(hin::RelationId r) const {
  if (r >= relation_names_.size()) throw std::out_of_range("unknown relation");
  return {rel_.data() + static_cast<std::size_t>(r) * dim_,
          static_cast<std::size_t>(dim_)};
}

std::span<double> EmbeddingModel::relation_vector(hin::RelationId r) {
  if (r >= relation_names_.size()) throw std::out_of_range("unknown relation");
  return {rel_.data() + static_cast<std::size_t>(r) * dim_,
          static_cast<std::size_t>(dim_)};
}

bool EmbeddingModel::all_finite() const {
  for (double v : phi_)
    if (!std::isfinite(v)) return false;
  for (double v : rel_)
    if (!std::isfinite(v)) return false;
  return true;
}

EmbeddingModel init_embeddings(std::size_t n, std::vector<std::string> relations,
                               const TrainConfig& config) {
  if (n == 0) throw std::invalid_argument("cannot initialize embeddings for 0 entities");
  config.validate();
  EmbeddingModel model(n, config.dim, std::move(relations));
  // Glorot bound for a lookup table, fan_in = fan_out = dim.
  double a = std::sqrt(6.0 / (2.0 * config.dim));
  auto rng = make_rng(config.seed, rng_tag::kInit);
  std::uniform_real_distribution<double> u(-a, a);
  for (double& v : model.relations()) v = u(rng);
  for (double& v : model.phi()) v = u(rng);
  return model;
}

double score_edge(const EmbeddingModel& model, const hin::Edge& edge) {
  auto s = model.row(edge.source);
  auto r = model.relation_vector(edge.relation);
  auto t = model.row(edge.target);
  return kern::score_sum(s.data(), r.data(), t.data(), s.size());
}

namespace {

// Per-relation weights of the convex-combination loss. With a single active
// relation the weight is 1 and alpha is ignored.
std::vector<double> relation_weights(const std::vector<std::string>& names,
                                     const std::vector<std::vector<hin::Edge>>& positives,
                                     const hin::NegativeEdgeSet& negatives,
                                     double alpha) {
  std::size_t nrel = names.size();
  auto pos_count = [&](std::size_t r) {
    return r < positives.size() ? positives[r].size() : 0;
  };
  auto neg_count = [&](std::size_t r) {
    return r < negatives.per_relation.size() ? negatives.per_relation[r].size() : 0;
  };
  std::vector<std::size_t> active;
  for (std::size_t r = 0; r < nrel; ++r)
    if (pos_count(r) + neg_count(r) > 0) active.push_back(r);
  if (active.empty()) throw std::invalid_argument("loss needs at least one edge");

  std::vector<double> weights(nrel, 0.0);
  if (active.size() == 1) {
    weights[active[0]] = 1.0;
  } else {
    for (std::size_t r : active)
      if (names[r] != "Follow" && names[r] != "WTF")
        throw std::invalid_argument(
            "loss mixing is defined for the Follow and WTF relations");
    weights[hin::kFollow] = 1.0 - alpha;
    weights[hin::kWtf] = alpha;
  }
  if (alpha > 0.0 && nrel > hin::kWtf && pos_count(hin::kWtf) == 0 &&
      active.size() > 1)
    throw std::invalid_argument("alpha > 0 requires positive WTF edges");
  return weights;
}

double loss_impl(const EmbeddingModel& model,
                 const std::vector<std::vector<hin::Edge>>& positives,
                 const hin::NegativeEdgeSet& negatives, double alpha,
                 bool* finite) {
  auto weights =
      relation_weights(model.relation_names(), positives, negatives, alpha);
  *finite = true;
  double total = 0.0;
  for (std::size_t r = 0; r < weights.size(); ++r) {
    if (weights[r] == 0.0) continue;
    double lr_sum = 0.0;
    if (r < positives.size())
      for (const hin::Edge& e : positives[r]) {
        double f = score_edge(model, e);
        if (!std::isfinite(f)) {
          *finite = false;
          return std::numeric_limits<double>::quiet_NaN();
        }
        lr_sum += stats::log_sigmoid(f);
      }
    if (r < negatives.per_relation.size())
      for (const hin::Edge& e : negatives.per_relation[r]) {
        double f = score_edge(model, e);
        if (!std::isfinite(f)) {
          *finite = false;
          return std::numeric_limits<double>::quiet_NaN();
        }
        lr_sum += stats::log_sigmoid(-f);
      }
    total += weights[r] * lr_sum;
  }
  return -total;
}

// d(-w log sigmoid(label * f)) / df
inline double grad_coeff(double f, int label, double weight) {
  double z = label * f;
  return -weight * label * (1.0 - stats::sigmoid(z));
}

struct Example {
  hin::Edge edge;
  std::int8_t label;  // +1 positive, -1 negative
};

}  // namespace

double loss(const EmbeddingModel& model,
            const std::vector<std::vector<hin::Edge>>& positives,
            const hin::NegativeEdgeSet& negatives, double alpha) {
  bool finite = true;
  double value = loss_impl(model, positives, negatives, alpha, &finite);
  if (!finite) throw std::runtime_error("loss: non-finite edge score");
  return value;
}

std::vector<double> loss_gradient(const EmbeddingModel& model,
                                  const std::vector<std::vector<hin::Edge>>& positives,
                                  const hin::NegativeEdgeSet& negatives,
                                  double alpha) {
  auto weights =
      relation_weights(model.relation_names(), positives, negatives, alpha);
  std::size_t d = static_cast<std::size_t>(model.dim());
  std::size_t n = model.entity_count();
  std::vector<double> grad((n + model.relation_names().size()) * d, 0.0);
  auto accumulate = [&](const hin::Edge& e, int label) {
    double w = weights[e.relation];
    if (w == 0.0) return;
    double c = grad_coeff(score_edge(model, e), label, w);
    auto s = model.row(e.source);
    auto r = model.relation_vector(e.relation);
    auto t = model.row(e.target);
    double* gs = grad.data() + e.source * d;
    double* gt = grad.data() + e.target * d;
    double* gr = grad.data() + (n + e.relation) * d;
    kern::axpy(c, t.data(), gs, d);
    kern::axpy(c, t.data(), gr, d);
    kern::axpy(c, s.data(), gt, d);
    kern::axpy(c, r.data(), gt, d);
  };
  for (std::size_t r = 0; r < positives.size(); ++r)
    for (const hin::Edge& e : positives[r]) accumulate(e, +1);
  for (std::size_t r = 0; r < negatives.per_relation.size(); ++r)
    for (const hin::Edge& e : negatives.per_relation[r]) accumulate(e, -1);
  return grad;
}

namespace {

// Validation scored set: positives vs one second-neighborhood negative each,
// drawn once so the per-epoch trace is comparable.
struct ValidationSet {
  std::vector<hin::Edge> edges;
  std::vector<int> labels;
};

ValidationSet make_validation_set(const hin::HinGraph& graph,
                                  const hin::EdgeSplit& split,
                                  std::uint64_t seed) {
  ValidationSet out;
  // Always prefer WTF: it is the relation recommendations are predicted on,
  // and the choice must not depend on alpha or sweep rows are incomparable.
  std::vector<std::size_t> order;
  if (hin::kWtf < split.validation.size()) order.push_back(hin::kWtf);
  if (hin::kFollow < split.validation.size()) order.push_back(hin::kFollow);
  for (std::size_t rel : order) {
    const auto& val = split.validation[rel];
    if (val.empty()) continue;
    auto negs = hin::corrupt_edges(val, hin::NegStrategy::SecondNeighborhood, graph,
                                   mix_seed(seed, rng_tag::kValNeg, rel));
    if (negs.edges.empty()) continue;
    for (const auto& e : val) {
      out.edges.push_back(e);
      out.labels.push_back(1);
    }
    for (const auto& e : negs.edges) {
      out.edges.push_back(e);
      out.labels.push_back(0);
    }
    return out;
  }
  return out;
}

double validation_auc(const EmbeddingModel& model, const ValidationSet& val) {
  if (val.edges.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> scores(val.edges.size());
  for (std::size_t i = 0; i < val.edges.size(); ++i)
    scores[i] = score_edge(model, val.edges[i]);
  return stats::auc_rank(scores, val.labels);
}

}  // namespace

TrainResult train(const hin::HinGraph& graph, const hin::EdgeSplit& split,
                  const hin::NegativeEdgeSet& negatives, const TrainConfig& config) {
  config.validate();
  if (!graph.finalized()) throw std::logic_error("finalize() the graph first");
  auto weights = relation_weights(graph.relation_names(), split.train, negatives,
                                  config.alpha);
  for (std::size_t r = 0; r < weights.size(); ++r)
    if (weights[r] > 0.0 && split.train[r].empty())
      throw std::invalid_argument("relation '" + graph.relation_names()[r] +
                                  "' has weight > 0 but no train edges");

  EmbeddingModel model =
      init_embeddings(graph.entity_count(), graph.relation_names(), config);
  std::size_t d = static_cast<std::size_t>(config.dim);
  std::size_t n = graph.entity_count();
  std::vector<double> acc_phi(n * d, config.adagrad_init);
  std::vector<double> acc_rel(graph.relation_count() * d, config.adagrad_init);

  ValidationSet val = make_validation_set(graph, split, config.seed);

  auto build_stream = [&](const hin::NegativeEdgeSet& negs) {
    std::vector<Example> stream;
    for (std::size_t r = 0; r < weights.size(); ++r) {
      if (weights[r] == 0.0) continue;
      for (const hin::Edge& e : split.train[r]) stream.push_back({e, +1});
      if (r < negs.per_relation.size())
        for (const hin::Edge& e : negs.per_relation[r]) stream.push_back({e, -1});
    }
    return stream;
  };

  hin::NegativeEdgeSet resampled;
  const hin::NegativeEdgeSet* active_negatives = &negatives;
  std::vector<Example> stream = build_stream(*active_negatives);

  // Sparse per-batch gradient buffers; slot n + r holds relation r. Indices
  // are resolved before any pointer is taken because the buffer may grow.
  std::unordered_map<std::uint32_t, std::uint32_t> slot_of;
  std::vector<std::uint32_t> touched;
  std::vector<double> grad_buf;
  auto slot_index = [&](std::uint32_t global) -> std::uint32_t {
    auto [it, inserted] = slot_of.try_emplace(
        global, static_cast<std::uint32_t>(touched.size()));
    if (inserted) {
      touched.push_back(global);
      grad_buf.resize(touched.size() * d, 0.0);
    }
    return it->second;
  };

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.resample_negatives && epoch > 0) {
      resampled = hin::build_negative_set(split, config.negative_ratio, graph,
                                          mix_seed(config.seed, rng_tag::kCorrupt,
                                                   static_cast<std::uint64_t>(epoch)));
      active_negatives = &resampled;
      stream = build_stream(*active_negatives);
    }
    auto rng = make_rng(config.seed, rng_tag::kShuffle, static_cast<std::uint64_t>(epoch));
    std::shuffle(stream.begin(), stream.end(), rng);

    for (std::size_t begin = 0; begin < stream.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      std::size_t end =
          std::min(begin + static_cast<std::size_t>(config.batch_size), stream.size());
      slot_of.clear();
      touched.clear();
      std::fill(grad_buf.begin(), grad_buf.end(), 0.0);
      for (std::size_t i = begin; i < end; ++i) {
        const Example& ex = stream[i];
        double w = weights[ex.edge.relation];
        double c = grad_coeff(score_edge(model, ex.edge), ex.label, w);
        auto s = model.row(ex.edge.source);
        auto r = model.relation_vector(ex.edge.relation);
        auto t = model.row(ex.edge.target);
        std::uint32_t is = slot_index(ex.edge.source);
        std::uint32_t it = slot_index(ex.edge.target);
        std::uint32_t ir = slot_index(static_cast<std::uint32_t>(n + ex.edge.relation));
        double* gs = grad_buf.data() + static_cast<std::size_t>(is) * d;
        double* gt = grad_buf.data() + static_cast<std::size_t>(it) * d;
        double* gr = grad_buf.data() + static_cast<std::size_t>(ir) * d;
        kern::axpy(c, t.data(), gs, d);
        kern::axpy(c, t.data(), gr, d);
        kern::axpy(c, s.data(), gt, d);
        kern::axpy(c, r.data(), gt, d);
      }
      for (std::size_t k = 0; k < touched.size(); ++k) {
        std::uint32_t global = touched[k];
        const double* g = grad_buf.data() + static_cast<std::size_t>(
                              slot_of[global]) * d;
        if (global < n) {
          kern::adagrad_step(model.phi().data() + static_cast<std::size_t>(global) * d,
                             acc_phi.data() + static_cast<std::size_t>(global) * d, g,
                             config.learning_rate, d);
        } else {
          std::size_t rel = global - n;
          kern::adagrad_step(model.relations().data() + rel * d,
                             acc_rel.data() + rel * d, g, config.learning_rate, d);
        }
      }
    }

    bool finite = true;
    double train_loss =
        loss_impl(model, split.train, *active_negatives, config.alpha, &finite);
    if (!finite || !std::isfinite(train_loss)) throw TrainDivergence(epoch);
    result.trace.push_back({epoch, train_loss, validation_auc(model, val)});
  }
  result.model = std::move(model);
  return result;
}

SweepResult sweep_alpha(const hin::HinGraph& graph, const hin::EdgeSplit& split,
                        const hin::NegativeEdgeSet& negatives,
                        const TrainConfig& base_config,
                        std::span<const double> alphas, int replicates) {
  if (alphas.empty()) throw std::invalid_argument("sweep needs at least one alpha");
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  SweepResult out;
  for (double alpha : alphas) {
    AlphaRow row;
    row.alpha = alpha;
    for (int rep = 0; rep < replicates; ++rep) {
      TrainConfig config = base_config;
      config.alpha = alpha;
      config.seed = mix_seed(base_config.seed, rng_tag::kSweep,
                             static_cast<std::uint64_t>(rep));
      TrainResult res = train(graph, split, negatives, config);
      row.replicate_aucs.push_back(res.trace.back().validation_auc);
    }
    row.mean_auc = stats::mean(row.replicate_aucs);
    row.std_auc =
        replicates > 1 ? stats::sample_std(row.replicate_aucs) : 0.0;
    out.rows.push_back(std::move(row));
  }
  out.best_alpha = out.rows[0].alpha;
  double best = out.rows[0].mean_auc;
  for (const auto& row : out.rows)
    if (row.mean_auc > best) {
      best = row.mean_auc;
      out.best_alpha = row.alpha;
    }
  return out;
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ofstream& out, double v) {
  static_assert(sizeof(double) == 8 && std::numeric_limits<double>::is_iec559);
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::ifstream& in) {
  std::uint64_t bits = get_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_lpem(const EmbeddingModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding file: " + path.string());
  out.write("LPEM", 4);
  put_u32(out, 1);
  put_u64(out, model.entity_count());
  put_u64(out, static_cast<std::uint64_t>(model.dim()));
  put_u32(out, static_cast<std::uint32_t>(model.relation_names().size()));
  for (const auto& name : model.relation_names()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (double v : model.relations()) put_f64(out, v);
  for (double v : model.phi()) put_f64(out, v);
  if (!out) throw std::runtime_error("short write: " + path.string());
}

EmbeddingModel load_lpem(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string_view(magic, 4) != "LPEM")
    throw std::runtime_error("not an LPEM embedding file: " + path.string());
  std::uint32_t version = get_u32(in);
  if (version != 1)
    throw std::runtime_error("unsupported LPEM version " + std::to_string(version));
  std::uint64_t n = get_u64(in);
  std::uint64_t d = get_u64(in);
  std::uint32_t nrel = get_u32(in);
  std::vector<std::string> names;
  for (std::uint32_t r = 0; r < nrel; ++r) {
    std::uint32_t len = get_u32(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    names.push_back(std::move(name));
  }
  EmbeddingModel model(n, static_cast<int>(d), std::move(names));
  for (double& v : model.relations()) v = get_f64(in);
  for (double& v : model.phi()) v = get_f64(in);
  if (!in) throw std::runtime_error("truncated LPEM file: " + path.string());
  return model;
}

void export_csv(const EmbeddingModel& model, const hin::HinGraph& graph,
                const std::filesystem::path& path) {
  if (graph.entity_count() != model.entity_count())
    throw std::invalid_argument("graph/model entity counts differ");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write csv: " + path.string());
  out << "entity_id";
  for (int c = 0; c < model.dim(); ++c) out << ",c" << c;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < model.entity_count(); ++i) {
    out << graph.entity_name(static_cast<hin::EntityId>(i));
    for (double v : model.row(i)) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace lp::transe
