#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgcl/contrast.hpp"
#include "hgcl/encoder.hpp"
#include "hgcl/hetgraph.hpp"
#include "hgcl/structure_index.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

struct EncoderConfig {
  int heads = 4;
  int head_dim = 16;
  int semantic_dim = 128;
  double slope = 0.2;
};

struct IndexConfig {
  PprParams ppr;
  int pe_k = 8;
};

struct OptimConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 400;
  int patience = 50;  // early stop after this many epochs without improvement
};

struct EvalConfig {
  int k = 5;               // kNN neighbors
  double train_frac = 0.2;
  int repeats = 10;        // stratified resplits
};

struct RunConfig {
  EncoderConfig encoder;
  IndexConfig index;
  OptimConfig optim;
  EvalConfig eval;
  ContrastConfig contrast;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Strict JSON round trip: missing keys take defaults, unknown keys throw.
nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

struct TrainResult {
  EncoderParams params;
  ProjectionHead head;
  std::vector<Tensor> view_embeddings;  // final forward, detached
  Tensor embeddings;                    // final aggregated embeddings, n x d
  Tensor beta;                          // final view mixture weights
  std::vector<double> loss_curve;
  int epochs_run = 0;
  double final_loss = 0.0;
};

TrainResult train(const HeteroGraph& g, const RunConfig& cfg);

/// Sorted train ids, per-class fractions held at train_frac (at least one
/// train and one test node per class).
std::vector<int> stratified_train_ids(const std::vector<int>& labels, double frac, Rng& rng);

double micro_f1(const std::vector<int>& pred, const std::vector<int>& truth);
double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes);

struct SplitScore {
  double micro = 0.0;
  double macro = 0.0;
};

struct EvalReport {
  std::vector<SplitScore> splits;
  double micro_mean = 0.0;
  double macro_mean = 0.0;
};

/// kNN probe on frozen embeddings over repeated stratified splits. Split
/// randomness is derived from (seed, Splits) only, so identical embeddings and
/// seed give identical reports.
EvalReport knn_eval(const Tensor& emb, const std::vector<int>& labels, const EvalConfig& cfg,
                    std::uint64_t seed);

/// Checkpoint directory layout: checkpoint.json (manifest + config),
/// params.bin (encoder then head tensors, each u32 rank/rows/cols + f64 LE
/// payload), embeddings.bin, loss_curve.csv, graph.json.
void save_checkpoint(const std::string& dir, const HeteroGraph& g, const RunConfig& cfg,
                     const TrainResult& result);

struct Checkpoint {
  RunConfig config;
  EncoderParams params;
  ProjectionHead head;
  Tensor embeddings;
  std::vector<double> loss_curve;
  int epochs_run = 0;
  double final_loss = 0.0;
  HeteroGraph graph;
};

Checkpoint load_checkpoint(const std::string& dir);

struct MetricsRow {
  std::string variant;
  std::uint64_t seed = 0;
  int split = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  double final_loss = 0.0;
  int epochs_run = 0;
};

std::string metrics_csv(const std::vector<MetricsRow>& rows);

std::vector<MetricsRow> eval_rows(const std::string& variant, std::uint64_t seed,
                                  const TrainResult& result, const EvalReport& report);

/// Train + evaluate every (variant, seed) cell on one graph; rows are ordered
/// variant-major, seed next, split innermost.
std::vector<MetricsRow> ablate(const HeteroGraph& g, const RunConfig& base,
                               const std::vector<HardnessVariant>& variants,
                               const std::vector<std::uint64_t>& seeds);

}  // namespace hgcl
