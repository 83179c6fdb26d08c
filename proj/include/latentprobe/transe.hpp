#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "latentprobe/hin.hpp"

namespace lp::transe {

struct TrainConfig {
  int dim = 256;
  double alpha = 0.5;  // loss weight of the WTF relation
  int epochs = 3;
  double learning_rate = 0.1;
  int batch_size = 1024;
  int negative_ratio = 3;
  std::uint64_t seed = 0;
  bool deterministic = true;
  bool resample_negatives = false;  // draw fresh negatives every epoch
  double adagrad_init = 1e-10;

  void validate() const;
};

// Entity matrix (n x d, row-major) plus one d-vector per relation kind.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(std::size_t n, int dim, std::vector<std::string> relation_names);

  std::size_t entity_count() const { return n_; }
  int dim() const { return dim_; }
  const std::vector<std::string>& relation_names() const { return relation_names_; }

  std::span<const double> row(std::size_t i) const;
  std::span<double> row(std::size_t i);
  std::span<const double> relation_vector(hin::RelationId r) const;
  std::span<double> relation_vector(hin::RelationId r);

  const std::vector<double>& phi() const { return phi_; }
  std::vector<double>& phi() { return phi_; }
  const std::vector<double>& relations() const { return rel_; }
  std::vector<double>& relations() { return rel_; }

  bool all_finite() const;

 private:
  std::size_t n_ = 0;
  int dim_ = 0;
  std::vector<std::string> relation_names_;
  std::vector<double> phi_;
  std::vector<double> rel_;
};

// Glorot-uniform entries in [-a, a] with a = sqrt(6/(2*dim)); relation vectors
// are drawn first, then entity rows, from a single seeded stream.
EmbeddingModel init_embeddings(std::size_t n, std::vector<std::string> relations,
                               const TrainConfig& config);

// f(s, r, t) = (phi_s + phi_r) . phi_t
double score_edge(const EmbeddingModel& model, const hin::Edge& edge);

// -[alpha * L_WTF + (1-alpha) * L_Follow] with
// L_r = sum_{P_r} log sigmoid(f) + sum_{N_r} log sigmoid(-f).
// When only one relation kind carries edges its weight is 1 and alpha is
// ignored. Nonnegative by construction.
double loss(const EmbeddingModel& model,
            const std::vector<std::vector<hin::Edge>>& positives,
            const hin::NegativeEdgeSet& negatives, double alpha);

// Dense gradient of the loss above, laid out [entities row-major | relations
// row-major]. Diagnostic path; the trainer shares the same per-edge rule.
std::vector<double> loss_gradient(const EmbeddingModel& model,
                                  const std::vector<std::vector<hin::Edge>>& positives,
                                  const hin::NegativeEdgeSet& negatives, double alpha);

struct EpochStats {
  int epoch;
  double train_loss;
  double validation_auc;  // NaN when no validation edges exist
};

struct TrainResult {
  EmbeddingModel model;
  std::vector<EpochStats> trace;
};

struct TrainDivergence : std::runtime_error {
  TrainDivergence(int epoch_index)
      : std::runtime_error("training diverged (non-finite loss) at epoch " +
                           std::to_string(epoch_index)),
        epoch(epoch_index) {}
  int epoch;
};

// Mini-batch Adagrad over the shuffled positive+negative train stream.
TrainResult train(const hin::HinGraph& graph, const hin::EdgeSplit& split,
                  const hin::NegativeEdgeSet& negatives, const TrainConfig& config);

struct AlphaRow {
  double alpha;
  double mean_auc;
  double std_auc;  // sample std over replicates; 0 when replicates == 1
  std::vector<double> replicate_aucs;
};

struct SweepResult {
  std::vector<AlphaRow> rows;
  double best_alpha;
};

SweepResult sweep_alpha(const hin::HinGraph& graph, const hin::EdgeSplit& split,
                        const hin::NegativeEdgeSet& negatives,
                        const TrainConfig& base_config,
                        std::span<const double> alphas, int replicates);

// Binary embedding file: magic "LPEM", version u32, n u64, d u64, relation
// count u32, relation name table, then little-endian doubles (relations first,
// then entity rows).
void save_lpem(const EmbeddingModel& model, const std::filesystem::path& path);
EmbeddingModel load_lpem(const std::filesystem::path& path);

// CSV export: header entity_id,c0..c{d-1}. Entity names come from the graph.
void export_csv(const EmbeddingModel& model, const hin::HinGraph& graph,
                const std::filesystem::path& path);

}  // namespace lp::transe
