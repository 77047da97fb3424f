#include "hgcl/cli.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hgcl/pipeline.hpp"

namespace hgcl {

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw std::runtime_error("cli: empty seed list");
  return seeds;
}

std::vector<HardnessVariant> parse_variant_list(const std::string& csv) {
  std::vector<HardnessVariant> variants;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    variants.push_back(variant_from_string(item));
  }
  if (variants.empty()) throw std::runtime_error("cli: empty variant list");
  return variants;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cli: cannot write '" + path + "'");
  out << text;
}

// Config-override flags shared by train and ablate; a field is applied only
// when its flag was actually passed.
struct Overrides {
  void attach(CLI::App* cmd) {
    auto flag = [&](const std::string& name, auto* slot, const std::string& help) {
      cmd->add_option(name, *slot, help);
    };
    flag("--seed", &seed, "run seed");
    cmd->add_option("--variant", variant, "hardness variant: none|sem|pe|ppr");
    cmd->add_option("--pool", pool, "mixup endpoint pool: candidates|all");
    flag("--epochs", &epochs, "max training epochs");
    flag("--patience", &patience, "early-stop patience");
    flag("--lr", &lr, "Adam learning rate");
    flag("--tau", &tau, "InfoNCE temperature");
    flag("--alpha", &alpha, "mixup Beta concentration");
    flag("--m-synth", &m_synth, "synthesized negatives per anchor (-1 auto)");
    flag("--top-t", &top_t, "hard-negative candidate list length (-1 auto)");
    flag("--heads", &heads, "attention heads");
    flag("--head-dim", &head_dim, "per-head dimension");
    flag("--semantic-dim", &semantic_dim, "aggregation hidden dimension");
    flag("--pe-k", &pe_k, "positional-encoding eigenvectors");
    flag("--eval-k", &eval_k, "kNN neighbors");
    flag("--train-frac", &train_frac, "labeled fraction per split");
    flag("--repeats", &repeats, "number of evaluation splits");
    app_ = cmd;
  }

  void apply_to(RunConfig& cfg) const {
    auto passed = [&](const std::string& name) { return app_->count(name) > 0; };
    if (passed("--seed")) cfg.seed = seed;
    if (passed("--variant")) cfg.contrast.variant = variant_from_string(variant);
    if (passed("--pool")) cfg.contrast.pool = pool_from_string(pool);
    if (passed("--epochs")) cfg.optim.epochs = epochs;
    if (passed("--patience")) cfg.optim.patience = patience;
    if (passed("--lr")) cfg.optim.lr = lr;
    if (passed("--tau")) cfg.contrast.tau = tau;
    if (passed("--alpha")) cfg.contrast.alpha = alpha;
    if (passed("--m-synth")) cfg.contrast.m_synth = m_synth;
    if (passed("--top-t")) cfg.contrast.top_t = top_t;
    if (passed("--heads")) cfg.encoder.heads = heads;
    if (passed("--head-dim")) cfg.encoder.head_dim = head_dim;
    if (passed("--semantic-dim")) cfg.encoder.semantic_dim = semantic_dim;
    if (passed("--pe-k")) cfg.index.pe_k = pe_k;
    if (passed("--eval-k")) cfg.eval.k = eval_k;
    if (passed("--train-frac")) cfg.eval.train_frac = train_frac;
    if (passed("--repeats")) cfg.eval.repeats = repeats;
    cfg.validate();
  }

  std::uint64_t seed = 1;
  std::string variant = "ppr";
  std::string pool = "candidates";
  int epochs = 400, patience = 50, m_synth = -1, top_t = -1;
  int heads = 4, head_dim = 16, semantic_dim = 128, pe_k = 8, eval_k = 5, repeats = 10;
  double lr = 5e-3, tau = 0.5, alpha = 1.0, train_frac = 0.2;
  CLI::App* app_ = nullptr;
};

RunConfig config_for(const std::string& config_path, const Overrides& ov) {
  RunConfig cfg;
  if (!config_path.empty()) cfg = load_run_config(config_path);
  ov.apply_to(cfg);
  return cfg;
}

int cmd_generate(const std::string& out_path, const SyntheticSpec& spec) {
  const HeteroGraph g = synthetic_hg(spec);
  save_graph(g, out_path);
  std::size_t n_edges = 0;
  for (const EdgeSet& es : g.edges) n_edges += es.pairs.size();
  std::printf("wrote %s: %d anchors, %d classes, %zu edge sets, %zu edges, %zu metapaths\n",
              out_path.c_str(), g.anchor_count(), g.n_classes(), g.edges.size(), n_edges,
              g.metapaths.size());
  return 0;
}

int cmd_index(const std::string& graph_path, const std::string& variant_str, int top_t, int pe_k,
              const PprParams& ppr_params, const std::string& dump_path) {
  const HeteroGraph g = load_graph(graph_path);
  const std::vector<SemanticView> views = build_views(g);
  const HardnessVariant variant = variant_from_string(variant_str);
  if (variant == HardnessVariant::Sem) {
    throw std::runtime_error(
        "cli: sem candidates depend on the embeddings and are built during training");
  }
  const int n = g.anchor_count();
  const int t = top_t > 0 ? top_t : std::min(default_top_t(n), n - 1);
  const StructureIndex index = build_structure_index(views, variant, t, ppr_params, pe_k);

  nlohmann::json dump;
  dump["variant"] = to_string(variant);
  dump["top_t"] = t;
  dump["views"] = nlohmann::json::array();
  for (const ViewStructure& vs : index.views) {
    nlohmann::json jv;
    jv["name"] = vs.view;
    jv["nodes"] = n;
    if (variant == HardnessVariant::Ppr) {
      jv["ppr"] = {{"iterations", vs.ppr.iterations}, {"residual_l1", vs.ppr.residual_l1}};
      nlohmann::json rows = nlohmann::json::array();
      for (int i = 0; i < n; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < n; ++j) row.push_back(vs.ppr.score(i, j));
        rows.push_back(std::move(row));
      }
      jv["ppr"]["scores"] = std::move(rows);
      std::printf("view %-16s ppr: %d iterations, residual %.3e\n", vs.view.c_str(),
                  vs.ppr.iterations, vs.ppr.residual_l1);
    } else if (variant == HardnessVariant::Pe) {
      jv["pe"] = {{"eigenvalues", vs.pe.eigenvalues}};
      nlohmann::json rows = nlohmann::json::array();
      for (int i = 0; i < n; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int l = 0; l < vs.pe.k; ++l) {
          row.push_back(vs.pe.vectors[static_cast<std::size_t>(i) * vs.pe.k + l]);
        }
        rows.push_back(std::move(row));
      }
      jv["pe"]["vectors"] = std::move(rows);
      std::printf("view %-16s pe: %d eigenvectors, smallest eigenvalue %.6f\n", vs.view.c_str(),
                  vs.pe.k, vs.pe.eigenvalues.empty() ? 0.0 : vs.pe.eigenvalues.front());
    } else {
      std::printf("view %-16s %d nodes (no hardness data for variant none)\n", vs.view.c_str(), n);
    }
    if (!vs.candidates.empty()) jv["candidates"] = vs.candidates;
    dump["views"].push_back(std::move(jv));
  }
  if (!dump_path.empty()) {
    write_text(dump_path, dump.dump(2) + "\n");
    std::printf("wrote %s\n", dump_path.c_str());
  }
  return 0;
}

int cmd_train(const std::string& graph_path, const std::string& config_path,
              const std::string& out_dir, const Overrides& ov) {
  const HeteroGraph g = load_graph(graph_path);
  const RunConfig cfg = config_for(config_path, ov);
  const TrainResult result = train(g, cfg);
  save_checkpoint(out_dir, g, cfg, result);
  std::printf("trained variant=%s seed=%llu epochs=%d final_loss=%.6f -> %s\n",
              to_string(cfg.contrast.variant).c_str(),
              static_cast<unsigned long long>(cfg.seed), result.epochs_run, result.final_loss,
              out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt_dir, const std::string& graph_path,
             const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(ckpt_dir);
  HeteroGraph g = ck.graph;
  if (!graph_path.empty()) g = load_graph(graph_path);
  if (g.labels.empty()) throw std::runtime_error("cli: evaluation needs a labeled graph");
  if (static_cast<int>(g.labels.size()) != ck.embeddings.rows()) {
    throw std::runtime_error("cli: graph labels do not match the checkpoint embeddings");
  }
  const EvalReport report = knn_eval(ck.embeddings, g.labels, ck.config.eval, ck.config.seed);
  TrainResult stub;
  stub.final_loss = ck.final_loss;
  stub.epochs_run = ck.epochs_run;
  const std::vector<MetricsRow> rows =
      eval_rows(to_string(ck.config.contrast.variant), ck.config.seed, stub, report);
  const std::string csv = metrics_csv(rows);
  if (out_path.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_text(out_path, csv);
    std::printf("wrote %s\n", out_path.c_str());
  }
  std::printf("micro_f1 %.4f  macro_f1 %.4f  (%zu splits)\n", report.micro_mean,
              report.macro_mean, report.splits.size());
  return 0;
}

int cmd_ablate(const std::string& graph_path, const std::string& config_path,
               const std::string& out_path, const std::string& seeds_csv,
               const std::string& variants_csv, const Overrides& ov) {
  const HeteroGraph g = load_graph(graph_path);
  const RunConfig base = config_for(config_path, ov);
  const std::vector<std::uint64_t> seeds = parse_seed_list(seeds_csv);
  const std::vector<HardnessVariant> variants = parse_variant_list(variants_csv);
  const std::vector<MetricsRow> rows = ablate(g, base, variants, seeds);
  write_text(out_path, metrics_csv(rows));
  std::printf("wrote %s (%zu rows)\n", out_path.c_str(), rows.size());

  for (const HardnessVariant v : variants) {
    double micro = 0.0, macro = 0.0;
    int count = 0;
    for (const MetricsRow& r : rows) {
      if (r.variant == to_string(v)) {
        micro += r.micro_f1;
        macro += r.macro_f1;
        ++count;
      }
    }
    std::printf("variant %-5s mean micro_f1 %.4f  mean macro_f1 %.4f  over %d rows\n",
                to_string(v).c_str(), micro / count, macro / count, count);
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"metapath-view contrastive learning on heterogeneous graphs"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "write a synthetic labeled benchmark graph");
  std::string gen_out;
  SyntheticSpec spec;
  gen->add_option("--out", gen_out, "output graph json")->required();
  gen->add_option("--classes", spec.n_classes, "number of classes");
  gen->add_option("--anchors", spec.anchors, "number of anchor nodes");
  gen->add_option("--bridge-types", spec.bridge_types, "number of auxiliary node types");
  gen->add_option("--bridges", spec.bridges, "minimum nodes per auxiliary type");
  gen->add_option("--p-in", spec.p_in, "same-class edge probability");
  gen->add_option("--p-out", spec.p_out, "cross-class edge probability");
  gen->add_option("--noise", spec.noise, "feature noise stddev");
  gen->add_option("--feature-dim", spec.feature_dim, "anchor feature dimension");
  gen->add_option("--seed", spec.seed, "generator seed");

  // index
  auto* idx = app.add_subcommand("index", "build the structural hard-negative index");
  std::string idx_graph, idx_variant = "ppr", idx_dump;
  int idx_top_t = -1, idx_pe_k = 8;
  PprParams idx_ppr;
  idx->add_option("--graph", idx_graph, "graph json")->required();
  idx->add_option("--variant", idx_variant, "none|pe|ppr (sem is train-time only)");
  idx->add_option("--top-t", idx_top_t, "candidate list length (-1 auto)");
  idx->add_option("--pe-k", idx_pe_k, "positional-encoding eigenvectors");
  idx->add_option("--ppr-c", idx_ppr.c, "restart probability");
  idx->add_option("--ppr-tol", idx_ppr.tol, "L1 convergence threshold");
  idx->add_option("--ppr-max-iter", idx_ppr.max_iter, "iteration cap");
  idx->add_option("--dump", idx_dump, "write the full index as json");

  // train
  auto* tr = app.add_subcommand("train", "train encoder + projection head");
  std::string tr_graph, tr_config, tr_out;
  tr->add_option("--graph", tr_graph, "graph json")->required();
  tr->add_option("--config", tr_config, "run config json");
  tr->add_option("--out", tr_out, "checkpoint directory")->required();
  Overrides tr_ov;
  tr_ov.attach(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "kNN-probe a checkpoint's embeddings");
  std::string ev_ckpt, ev_graph, ev_out;
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->required();
  ev->add_option("--graph", ev_graph, "override graph json (labels source)");
  ev->add_option("--out", ev_out, "metrics csv (stdout when omitted)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "train + evaluate a variant/seed grid");
  std::string ab_graph, ab_config, ab_out, ab_seeds = "1,2,3,4,5",
                                           ab_variants = "none,sem,pe,ppr";
  ab->add_option("--graph", ab_graph, "graph json")->required();
  ab->add_option("--config", ab_config, "run config json");
  ab->add_option("--out", ab_out, "metrics csv")->required();
  ab->add_option("--seeds", ab_seeds, "comma-separated seeds");
  ab->add_option("--variants", ab_variants, "comma-separated variants");
  Overrides ab_ov;
  ab_ov.attach(ab);

  std::vector<const char*> argv;
  argv.push_back("hgcl");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) return cmd_generate(gen_out, spec);
    if (idx->parsed()) return cmd_index(idx_graph, idx_variant, idx_top_t, idx_pe_k, idx_ppr, idx_dump);
    if (tr->parsed()) return cmd_train(tr_graph, tr_config, tr_out, tr_ov);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_graph, ev_out);
    if (ab->parsed()) return cmd_ablate(ab_graph, ab_config, ab_out, ab_seeds, ab_variants, ab_ov);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace hgcl
