#include "hgcl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "hgcl/kernels.hpp"

namespace hgcl {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("pipeline: " + msg); }

// Strict object readers: every key must be known.
template <typename Fn>
void read_object(const nlohmann::json& j, const std::string& where, Fn&& per_key) {
  if (!j.is_object()) fail("config section '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!per_key(key, value)) fail("unknown config key '" + where + "." + key + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (encoder.heads < 1 || encoder.head_dim < 1 || encoder.semantic_dim < 1) {
    fail("encoder dimensions must be positive");
  }
  if (encoder.slope <= 0.0 || encoder.slope >= 1.0) fail("encoder slope must be in (0,1)");
  if (index.ppr.c <= 0.0 || index.ppr.c >= 1.0) fail("ppr restart must be in (0,1)");
  if (index.ppr.tol <= 0.0 || index.ppr.max_iter < 1) fail("ppr tolerance/max_iter invalid");
  if (index.pe_k < 1) fail("pe_k must be positive");
  if (optim.lr <= 0.0 || optim.eps <= 0.0) fail("optimizer lr/eps must be positive");
  if (optim.beta1 <= 0.0 || optim.beta1 >= 1.0 || optim.beta2 <= 0.0 || optim.beta2 >= 1.0) {
    fail("optimizer betas must be in (0,1)");
  }
  if (optim.epochs < 1 || optim.patience < 1) fail("epochs and patience must be positive");
  if (eval.k < 1 || eval.repeats < 1) fail("eval k and repeats must be positive");
  if (eval.train_frac <= 0.0 || eval.train_frac >= 1.0) fail("train_frac must be in (0,1)");
  contrast.validate();
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["encoder"] = {{"heads", cfg.encoder.heads},
                  {"head_dim", cfg.encoder.head_dim},
                  {"semantic_dim", cfg.encoder.semantic_dim},
                  {"slope", cfg.encoder.slope}};
  j["index"] = {{"ppr_c", cfg.index.ppr.c},
                {"ppr_tol", cfg.index.ppr.tol},
                {"ppr_max_iter", cfg.index.ppr.max_iter},
                {"pe_k", cfg.index.pe_k}};
  j["optim"] = {{"lr", cfg.optim.lr},
                {"beta1", cfg.optim.beta1},
                {"beta2", cfg.optim.beta2},
                {"eps", cfg.optim.eps},
                {"epochs", cfg.optim.epochs},
                {"patience", cfg.optim.patience}};
  j["eval"] = {{"k", cfg.eval.k},
               {"train_frac", cfg.eval.train_frac},
               {"repeats", cfg.eval.repeats}};
  j["contrast"] = {{"tau", cfg.contrast.tau},
                   {"m_synth", cfg.contrast.m_synth},
                   {"alpha", cfg.contrast.alpha},
                   {"top_t", cfg.contrast.top_t},
                   {"variant", to_string(cfg.contrast.variant)},
                   {"pool", to_string(cfg.contrast.pool)}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  try {
    read_object(j, "", [&](const std::string& key, const nlohmann::json& v) {
      if (key == "seed") { cfg.seed = v.get<std::uint64_t>(); return true; }
      if (key == "encoder") {
        read_object(v, "encoder", [&](const std::string& k2, const nlohmann::json& w) {
          if (k2 == "heads") { cfg.encoder.heads = w.get<int>(); return true; }
          if (k2 == "head_dim") { cfg.encoder.head_dim = w.get<int>(); return true; }
          if (k2 == "semantic_dim") { cfg.encoder.semantic_dim = w.get<int>(); return true; }
          if (k2 == "slope") { cfg.encoder.slope = w.get<double>(); return true; }
          return false;
        });
        return true;
      }
      if (key == "index") {
        read_object(v, "index", [&](const std::string& k2, const nlohmann::json& w) {
          if (k2 == "ppr_c") { cfg.index.ppr.c = w.get<double>(); return true; }
          if (k2 == "ppr_tol") { cfg.index.ppr.tol = w.get<double>(); return true; }
          if (k2 == "ppr_max_iter") { cfg.index.ppr.max_iter = w.get<int>(); return true; }
          if (k2 == "pe_k") { cfg.index.pe_k = w.get<int>(); return true; }
          return false;
        });
        return true;
      }
      if (key == "optim") {
        read_object(v, "optim", [&](const std::string& k2, const nlohmann::json& w) {
          if (k2 == "lr") { cfg.optim.lr = w.get<double>(); return true; }
          if (k2 == "beta1") { cfg.optim.beta1 = w.get<double>(); return true; }
          if (k2 == "beta2") { cfg.optim.beta2 = w.get<double>(); return true; }
          if (k2 == "eps") { cfg.optim.eps = w.get<double>(); return true; }
          if (k2 == "epochs") { cfg.optim.epochs = w.get<int>(); return true; }
          if (k2 == "patience") { cfg.optim.patience = w.get<int>(); return true; }
          return false;
        });
        return true;
      }
      if (key == "eval") {
        read_object(v, "eval", [&](const std::string& k2, const nlohmann::json& w) {
          if (k2 == "k") { cfg.eval.k = w.get<int>(); return true; }
          if (k2 == "train_frac") { cfg.eval.train_frac = w.get<double>(); return true; }
          if (k2 == "repeats") { cfg.eval.repeats = w.get<int>(); return true; }
          return false;
        });
        return true;
      }
      if (key == "contrast") {
        read_object(v, "contrast", [&](const std::string& k2, const nlohmann::json& w) {
          if (k2 == "tau") { cfg.contrast.tau = w.get<double>(); return true; }
          if (k2 == "m_synth") { cfg.contrast.m_synth = w.get<int>(); return true; }
          if (k2 == "alpha") { cfg.contrast.alpha = w.get<double>(); return true; }
          if (k2 == "top_t") { cfg.contrast.top_t = w.get<int>(); return true; }
          if (k2 == "variant") {
            cfg.contrast.variant = variant_from_string(w.get<std::string>());
            return true;
          }
          if (k2 == "pool") {
            cfg.contrast.pool = pool_from_string(w.get<std::string>());
            return true;
          }
          return false;
        });
        return true;
      }
      return false;
    });
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("cannot parse config '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

TrainResult train(const HeteroGraph& g, const RunConfig& cfg) {
  cfg.validate();
  g.validate();
  const std::vector<SemanticView> views = build_views(g);
  const Tensor x = anchor_features(g);
  const int n = x.rows();
  if (n < 3) fail("training needs at least three anchors");

  Rng init_rng = derive_rng(cfg.seed, RngStream::ParamInit);
  EncoderParams params = init_encoder(static_cast<int>(views.size()), x.cols(), cfg.encoder.heads,
                                      cfg.encoder.head_dim, cfg.encoder.semantic_dim, init_rng);
  params.slope = cfg.encoder.slope;
  ProjectionHead head = init_projection_head(params.embed_dim(), init_rng);

  ContrastConfig ccfg = cfg.contrast;
  ccfg.top_t = std::min(ccfg.resolve_top_t(n), n - 1);
  const StructureIndex index =
      build_structure_index(views, ccfg.variant, ccfg.top_t, cfg.index.ppr, cfg.index.pe_k);

  Rng mixup_rng = derive_rng(cfg.seed, RngStream::Mixup);
  std::vector<Tensor> opt_params = params.all();
  for (const Tensor& t : head.params()) opt_params.push_back(t);
  AdamState adam = adam_init(opt_params, cfg.optim.lr, cfg.optim.beta1, cfg.optim.beta2,
                             cfg.optim.eps);

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < cfg.optim.epochs; ++epoch) {
    Tape tape;
    const EncoderOutput out = encode(x, views, params);
    const Tensor loss =
        total_objective(out.view_embeddings, out.aggregated, index, ccfg, head, mixup_rng);
    const double lval = loss.value();
    tape.backward(loss);
    adam_step(opt_params, adam);
    zero_grads(opt_params);
    result.loss_curve.push_back(lval);
    result.epochs_run = epoch + 1;
    if (lval < best) {
      best = lval;
      since_best = 0;
    } else if (++since_best >= cfg.optim.patience) {
      break;
    }
  }

  const EncoderOutput final_out = encode(x, views, params);  // no tape: detached
  result.params = std::move(params);
  result.head = std::move(head);
  result.view_embeddings = final_out.view_embeddings;
  result.embeddings = final_out.aggregated;
  result.beta = final_out.beta;
  result.final_loss = result.loss_curve.back();
  return result;
}

std::vector<int> stratified_train_ids(const std::vector<int>& labels, double frac, Rng& rng) {
  if (labels.empty()) fail("no labels");
  const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::vector<int>> by_class(n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  std::vector<int> train;
  for (std::vector<int>& ids : by_class) {
    const int sz = static_cast<int>(ids.size());
    if (sz < 2) fail("every class needs at least two members to split");
    for (int i = sz - 1; i > 0; --i) std::swap(ids[i], ids[rng.uniform_int(i + 1)]);
    const int take = std::clamp(static_cast<int>(std::lround(frac * sz)), 1, sz - 1);
    train.insert(train.end(), ids.begin(), ids.begin() + take);
  }
  std::sort(train.begin(), train.end());
  return train;
}

double micro_f1(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty()) fail("prediction/truth size mismatch");
  int hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int n_classes) {
  if (pred.size() != truth.size() || pred.empty()) fail("prediction/truth size mismatch");
  if (n_classes < 1) fail("need at least one class");
  double total = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const bool p = pred[i] == c, t = truth[i] == c;
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
    }
    const int denom = 2 * tp + fp + fn;
    total += denom == 0 ? 0.0 : 2.0 * tp / static_cast<double>(denom);
  }
  return total / n_classes;
}

EvalReport knn_eval(const Tensor& emb, const std::vector<int>& labels, const EvalConfig& cfg,
                    std::uint64_t seed) {
  if (static_cast<int>(labels.size()) != emb.rows()) fail("labels do not match the embeddings");
  const int n = emb.rows();
  const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  Rng rng = derive_rng(seed, RngStream::Splits);
  EvalReport report;
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::vector<int> train = stratified_train_ids(labels, cfg.train_frac, rng);
    std::vector<int> test;
    test.reserve(n - train.size());
    std::vector<char> is_train(n, 0);
    for (int id : train) is_train[id] = 1;
    for (int i = 0; i < n; ++i) {
      if (!is_train[i]) test.push_back(i);
    }
    std::vector<int> pred;
    kernels::knn_predict(emb.data(), n, emb.cols(), train, labels, n_classes, cfg.k, test, pred);
    std::vector<int> truth;
    truth.reserve(test.size());
    for (int id : test) truth.push_back(labels[id]);
    report.splits.push_back({micro_f1(pred, truth), macro_f1(pred, truth, n_classes)});
  }
  for (const SplitScore& s : report.splits) {
    report.micro_mean += s.micro;
    report.macro_mean += s.macro;
  }
  report.micro_mean /= report.splits.size();
  report.macro_mean /= report.splits.size();
  return report;
}

namespace {

void write_tensor(std::ofstream& out, const Tensor& t) {
  const std::uint32_t rank = 2, rows = t.rows(), cols = t.cols();
  out.write(reinterpret_cast<const char*>(&rank), sizeof(rank));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  out.write(reinterpret_cast<const char*>(t.data()), sizeof(double) * t.size());
}

Tensor read_tensor(std::ifstream& in, bool requires_grad) {
  std::uint32_t rank = 0, rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rank), sizeof(rank));
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  if (!in || rank != 2 || rows == 0 || cols == 0) fail("corrupt tensor blob");
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(data.data()), sizeof(double) * data.size());
  if (!in) fail("truncated tensor blob");
  return Tensor::from_data(rows, cols, std::move(data), requires_grad);
}

}  // namespace

void save_checkpoint(const std::string& dir, const HeteroGraph& g, const RunConfig& cfg,
                     const TrainResult& result) {
  std::filesystem::create_directories(dir);
  save_graph(g, dir + "/graph.json");

  std::vector<Tensor> tensors = result.params.all();
  for (const Tensor& t : result.head.params()) tensors.push_back(t);
  {
    std::ofstream out(dir + "/params.bin", std::ios::binary);
    if (!out) fail("cannot write '" + dir + "/params.bin'");
    for (const Tensor& t : tensors) write_tensor(out, t);
  }
  {
    std::ofstream out(dir + "/embeddings.bin", std::ios::binary);
    if (!out) fail("cannot write '" + dir + "/embeddings.bin'");
    write_tensor(out, result.embeddings);
  }
  {
    std::ofstream out(dir + "/loss_curve.csv");
    if (!out) fail("cannot write '" + dir + "/loss_curve.csv'");
    out << "epoch,loss\n";
    char line[64];
    for (std::size_t e = 0; e < result.loss_curve.size(); ++e) {
      std::snprintf(line, sizeof(line), "%zu,%.12g\n", e, result.loss_curve[e]);
      out << line;
    }
  }
  nlohmann::json manifest;
  manifest["config"] = run_config_to_json(cfg);
  manifest["n_views"] = result.params.layers.size();
  manifest["feature_dim"] = result.params.layers.empty() ? 0 : result.params.layers[0].w[0].rows();
  manifest["embed_dim"] = result.params.embed_dim();
  manifest["epochs_run"] = result.epochs_run;
  manifest["final_loss"] = result.final_loss;
  manifest["n_tensors"] = tensors.size();
  std::ofstream out(dir + "/checkpoint.json");
  if (!out) fail("cannot write '" + dir + "/checkpoint.json'");
  out << manifest.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream mf(dir + "/checkpoint.json");
  if (!mf) fail("cannot open '" + dir + "/checkpoint.json'");
  nlohmann::json manifest;
  try {
    mf >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("cannot parse checkpoint manifest: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.config = run_config_from_json(manifest.at("config"));
    ck.epochs_run = manifest.at("epochs_run").get<int>();
    ck.final_loss = manifest.at("final_loss").get<double>();
    const int n_views = manifest.at("n_views").get<int>();
    const int feature_dim = manifest.at("feature_dim").get<int>();
    if (n_views < 1 || feature_dim < 1) fail("checkpoint manifest has invalid dimensions");

    std::ifstream in(dir + "/params.bin", std::ios::binary);
    if (!in) fail("cannot open '" + dir + "/params.bin'");
    ck.params.heads = ck.config.encoder.heads;
    ck.params.head_dim = ck.config.encoder.head_dim;
    ck.params.slope = ck.config.encoder.slope;
    for (int v = 0; v < n_views; ++v) {
      SemanticLayerParams layer;
      for (int k = 0; k < ck.params.heads; ++k) layer.w.push_back(read_tensor(in, true));
      for (int k = 0; k < ck.params.heads; ++k) layer.attn.push_back(read_tensor(in, true));
      ck.params.layers.push_back(std::move(layer));
    }
    ck.params.agg.w = read_tensor(in, true);
    ck.params.agg.b = read_tensor(in, true);
    ck.params.agg.q = read_tensor(in, true);
    ck.head.w1 = read_tensor(in, true);
    ck.head.b1 = read_tensor(in, true);
    ck.head.w2 = read_tensor(in, true);
    ck.head.b2 = read_tensor(in, true);

    std::ifstream ein(dir + "/embeddings.bin", std::ios::binary);
    if (!ein) fail("cannot open '" + dir + "/embeddings.bin'");
    ck.embeddings = read_tensor(ein, false);
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed checkpoint manifest: ") + e.what());
  }

  std::ifstream lc(dir + "/loss_curve.csv");
  if (lc) {
    std::string line;
    std::getline(lc, line);  // header
    while (std::getline(lc, line)) {
      const auto comma = line.find(',');
      if (comma != std::string::npos) ck.loss_curve.push_back(std::stod(line.substr(comma + 1)));
    }
  }
  ck.graph = load_graph(dir + "/graph.json");
  return ck;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "variant,seed,split,micro_f1,macro_f1,final_loss,epochs_run\n";
  char line[256];
  for (const MetricsRow& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%llu,%d,%.12g,%.12g,%.12g,%d\n", r.variant.c_str(),
                  static_cast<unsigned long long>(r.seed), r.split, r.micro_f1, r.macro_f1,
                  r.final_loss, r.epochs_run);
    out += line;
  }
  return out;
}

std::vector<MetricsRow> eval_rows(const std::string& variant, std::uint64_t seed,
                                  const TrainResult& result, const EvalReport& report) {
  std::vector<MetricsRow> rows;
  for (std::size_t s = 0; s < report.splits.size(); ++s) {
    rows.push_back({variant, seed, static_cast<int>(s), report.splits[s].micro,
                    report.splits[s].macro, result.final_loss, result.epochs_run});
  }
  return rows;
}

std::vector<MetricsRow> ablate(const HeteroGraph& g, const RunConfig& base,
                               const std::vector<HardnessVariant>& variants,
                               const std::vector<std::uint64_t>& seeds) {
  if (variants.empty() || seeds.empty()) fail("ablation needs variants and seeds");
  if (g.labels.empty()) fail("ablation needs a labeled graph");
  std::vector<MetricsRow> rows;
  for (const HardnessVariant v : variants) {
    for (const std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.contrast.variant = v;
      cfg.seed = seed;
      const TrainResult result = train(g, cfg);
      const EvalReport report = knn_eval(result.embeddings, g.labels, cfg.eval, seed);
      const auto cell = eval_rows(to_string(v), seed, result, report);
      rows.insert(rows.end(), cell.begin(), cell.end());
    }
  }
  return rows;
}

}  // namespace hgcl
