#include "hgcl/hetgraph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "hgcl/rng.hpp"

namespace hgcl {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("graph: " + msg); }

}  // namespace

int HeteroGraph::type_index(const std::string& name) const {
  for (std::size_t i = 0; i < node_types.size(); ++i) {
    if (node_types[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

const NodeType& HeteroGraph::type(const std::string& name) const {
  const int i = type_index(name);
  if (i < 0) fail("unknown node type '" + name + "'");
  return node_types[i];
}

int HeteroGraph::anchor_count() const { return type(anchor_type).count; }

int HeteroGraph::n_classes() const {
  int mx = -1;
  for (int l : labels) mx = std::max(mx, l);
  return mx + 1;
}

void HeteroGraph::validate() const {
  if (node_types.empty()) fail("no node types");
  std::set<std::string> type_names;
  for (const NodeType& nt : node_types) {
    if (nt.name.empty()) fail("node type with empty name");
    if (!type_names.insert(nt.name).second) fail("duplicate node type '" + nt.name + "'");
    if (nt.count <= 0) fail("node type '" + nt.name + "' has non-positive count");
    if (nt.feature_dim < 0) fail("node type '" + nt.name + "' has negative feature_dim");
  }
  if (type_index(anchor_type) < 0) fail("anchor type '" + anchor_type + "' is not declared");

  for (const NodeType& nt : node_types) {
    const auto it = features.find(nt.name);
    if (nt.feature_dim == 0) {
      if (it != features.end()) fail("features given for '" + nt.name + "' with feature_dim 0");
      continue;
    }
    if (it == features.end()) fail("missing features for node type '" + nt.name + "'");
    if (it->second.rows() != nt.count || it->second.cols() != nt.feature_dim) {
      fail("feature matrix for '" + nt.name + "' has the wrong shape");
    }
  }
  for (const auto& [name, t] : features) {
    (void)t;
    if (type_index(name) < 0) fail("features given for unknown type '" + name + "'");
  }

  std::set<std::string> edge_names;
  for (const EdgeSet& es : edges) {
    if (es.type.empty()) fail("edge set with empty type name");
    if (!edge_names.insert(es.type).second) fail("duplicate edge type '" + es.type + "'");
    const NodeType& s = type(es.src_type);
    const NodeType& d = type(es.dst_type);
    for (const auto& p : es.pairs) {
      if (p[0] < 0 || p[0] >= s.count || p[1] < 0 || p[1] >= d.count) {
        fail("edge pair out of range in '" + es.type + "'");
      }
    }
  }

  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != anchor_count()) {
      fail("label count does not match the anchor count");
    }
    for (int l : labels) {
      if (l < 0) fail("negative label");
    }
  }

  std::set<std::string> path_names;
  for (const Metapath& mp : metapaths) {
    if (mp.name.empty()) fail("metapath with empty name");
    if (!path_names.insert(mp.name).second) fail("duplicate metapath '" + mp.name + "'");
    if (mp.node_types.size() != mp.edge_types.size() + 1) {
      fail("metapath '" + mp.name + "' must have one more node type than edge types");
    }
    if (mp.edge_types.empty()) fail("metapath '" + mp.name + "' has no edges");
    if (mp.node_types.front() != anchor_type || mp.node_types.back() != anchor_type) {
      fail("metapath '" + mp.name + "' must start and end at the anchor type");
    }
    for (const std::string& nt : mp.node_types) {
      if (type_index(nt) < 0) fail("metapath '" + mp.name + "' visits unknown type '" + nt + "'");
    }
    for (std::size_t i = 0; i < mp.edge_types.size(); ++i) {
      const EdgeSet* es = nullptr;
      for (const EdgeSet& cand : edges) {
        if (cand.type == mp.edge_types[i]) es = &cand;
      }
      if (!es) fail("metapath '" + mp.name + "' uses unknown edge type '" + mp.edge_types[i] + "'");
      const std::string& a = mp.node_types[i];
      const std::string& b = mp.node_types[i + 1];
      const bool fwd = es->src_type == a && es->dst_type == b;
      const bool rev = es->src_type == b && es->dst_type == a;
      if (!fwd && !rev) {
        fail("metapath '" + mp.name + "' step " + std::to_string(i) + " does not match edge type '" +
             es->type + "'");
      }
    }
  }
}

nlohmann::json graph_to_json(const HeteroGraph& g) {
  nlohmann::json j;
  j["node_types"] = nlohmann::json::array();
  for (const NodeType& nt : g.node_types) {
    j["node_types"].push_back({{"name", nt.name}, {"count", nt.count}, {"feature_dim", nt.feature_dim}});
  }
  j["anchor_type"] = g.anchor_type;
  j["features"] = nlohmann::json::object();
  for (const auto& [name, t] : g.features) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < t.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (int k = 0; k < t.cols(); ++k) row.push_back(t.at(i, k));
      rows.push_back(std::move(row));
    }
    j["features"][name] = std::move(rows);
  }
  j["edges"] = nlohmann::json::array();
  for (const EdgeSet& es : g.edges) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : es.pairs) pairs.push_back({p[0], p[1]});
    j["edges"].push_back({{"type", es.type},
                          {"src_type", es.src_type},
                          {"dst_type", es.dst_type},
                          {"pairs", std::move(pairs)}});
  }
  if (!g.labels.empty()) j["labels"] = g.labels;
  j["metapaths"] = nlohmann::json::array();
  for (const Metapath& mp : g.metapaths) {
    j["metapaths"].push_back(
        {{"name", mp.name}, {"node_types", mp.node_types}, {"edge_types", mp.edge_types}});
  }
  return j;
}

HeteroGraph graph_from_json(const nlohmann::json& j) {
  HeteroGraph g;
  try {
    for (const auto& nt : j.at("node_types")) {
      g.node_types.push_back({nt.at("name").get<std::string>(), nt.at("count").get<int>(),
                              nt.at("feature_dim").get<int>()});
    }
    g.anchor_type = j.at("anchor_type").get<std::string>();
    if (j.contains("features")) {
      for (const auto& [name, rows] : j.at("features").items()) {
        const int idx = g.type_index(name);
        if (idx < 0) fail("features given for unknown type '" + name + "'");
        const NodeType& nt = g.node_types[idx];
        if (static_cast<int>(rows.size()) != nt.count) {
          fail("feature matrix for '" + name + "' has the wrong number of rows");
        }
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>(nt.count) * nt.feature_dim);
        for (const auto& row : rows) {
          if (static_cast<int>(row.size()) != nt.feature_dim) {
            fail("feature row for '" + name + "' has the wrong length");
          }
          for (const auto& v : row) data.push_back(v.get<double>());
        }
        g.features.emplace(name, Tensor::from_data(nt.count, nt.feature_dim, std::move(data)));
      }
    }
    for (const auto& es : j.at("edges")) {
      EdgeSet e;
      e.type = es.at("type").get<std::string>();
      e.src_type = es.at("src_type").get<std::string>();
      e.dst_type = es.at("dst_type").get<std::string>();
      for (const auto& p : es.at("pairs")) {
        if (p.size() != 2) fail("edge pair in '" + e.type + "' is not a 2-element array");
        e.pairs.push_back({p[0].get<int>(), p[1].get<int>()});
      }
      std::sort(e.pairs.begin(), e.pairs.end());
      e.pairs.erase(std::unique(e.pairs.begin(), e.pairs.end()), e.pairs.end());
      g.edges.push_back(std::move(e));
    }
    if (j.contains("labels")) g.labels = j.at("labels").get<std::vector<int>>();
    if (j.contains("metapaths")) {
      for (const auto& mp : j.at("metapaths")) {
        g.metapaths.push_back({mp.at("name").get<std::string>(),
                               mp.at("node_types").get<std::vector<std::string>>(),
                               mp.at("edge_types").get<std::vector<std::string>>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("malformed graph json: ") + e.what());
  }
  g.validate();
  return g;
}

void save_graph(const HeteroGraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail("cannot open '" + path + "' for writing");
  out << graph_to_json(g).dump(2) << "\n";
  if (!out) fail("failed writing '" + path + "'");
}

HeteroGraph load_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("cannot parse '" + path + "': " + e.what());
  }
  return graph_from_json(j);
}

Tensor anchor_features(const HeteroGraph& g) {
  const auto it = g.features.find(g.anchor_type);
  if (it == g.features.end()) fail("anchor type has no features");
  return it->second;
}

kernels::Csr metapath_adjacency(const HeteroGraph& g, const Metapath& mp, bool add_self_loops) {
  if (mp.node_types.size() != mp.edge_types.size() + 1 || mp.edge_types.empty()) {
    fail("metapath '" + mp.name + "' is malformed");
  }
  std::vector<kernels::Csr> steps;
  for (std::size_t i = 0; i < mp.edge_types.size(); ++i) {
    const EdgeSet* es = nullptr;
    for (const EdgeSet& cand : g.edges) {
      if (cand.type == mp.edge_types[i]) es = &cand;
    }
    if (!es) fail("metapath '" + mp.name + "' uses unknown edge type '" + mp.edge_types[i] + "'");
    const std::string& a = mp.node_types[i];
    const std::string& b = mp.node_types[i + 1];
    const int rows = g.type(a).count;
    std::vector<std::vector<int>> adj(rows);
    bool matched = false;
    if (es->src_type == a && es->dst_type == b) {
      for (const auto& p : es->pairs) adj[p[0]].push_back(p[1]);
      matched = true;
    }
    // Reverse orientation; for self-relations both branches apply, which
    // symmetrizes the step.
    if (es->dst_type == a && es->src_type == b) {
      for (const auto& p : es->pairs) adj[p[1]].push_back(p[0]);
      matched = true;
    }
    if (!matched) {
      fail("metapath '" + mp.name + "' step " + std::to_string(i) + " does not match edge type '" +
           es->type + "'");
    }
    for (auto& nbrs : adj) {
      std::sort(nbrs.begin(), nbrs.end());
      nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    }
    steps.push_back(kernels::to_csr(adj));
  }
  const int start = g.type(mp.node_types.front()).count;
  const int end = g.type(mp.node_types.back()).count;
  return kernels::to_csr(kernels::compose_chain(steps, start, end, add_self_loops));
}

std::vector<SemanticView> build_views(const HeteroGraph& g, bool add_self_loops) {
  if (g.metapaths.empty()) fail("graph declares no metapaths");
  std::vector<SemanticView> views;
  for (const Metapath& mp : g.metapaths) {
    if (mp.node_types.front() != g.anchor_type || mp.node_types.back() != g.anchor_type) {
      fail("metapath '" + mp.name + "' must start and end at the anchor type");
    }
    views.push_back({mp.name, metapath_adjacency(g, mp, add_self_loops)});
  }
  return views;
}

HeteroGraph synthetic_hg(const SyntheticSpec& spec) {
  if (spec.n_classes < 2) fail("synthetic graph needs at least 2 classes");
  if (spec.anchors < spec.n_classes) fail("synthetic graph needs at least one anchor per class");
  if (spec.bridge_types < 1 || spec.bridges < 1) {
    fail("synthetic graph needs at least one bridge per type");
  }
  if (!(spec.p_in > spec.p_out)) fail("synthetic graph needs p_in > p_out");
  if (spec.feature_dim < spec.n_classes) fail("synthetic feature_dim must be >= n_classes");
  Rng rng = derive_rng(spec.seed, RngStream::Graph);

  HeteroGraph g;
  g.anchor_type = "a";
  g.node_types.push_back({"a", spec.anchors, spec.feature_dim});

  g.labels.resize(spec.anchors);
  for (int i = 0; i < spec.anchors; ++i) g.labels[i] = i % spec.n_classes;

  // Class-block means: class c owns a contiguous block of feature coordinates.
  const int block = spec.feature_dim / spec.n_classes;
  std::vector<double> feat(static_cast<std::size_t>(spec.anchors) * spec.feature_dim);
  for (int i = 0; i < spec.anchors; ++i) {
    const int c = g.labels[i];
    for (int k = 0; k < spec.feature_dim; ++k) {
      const double mean = (k >= c * block && k < (c + 1) * block) ? 1.0 : 0.0;
      feat[static_cast<std::size_t>(i) * spec.feature_dim + k] = mean + spec.noise * rng.normal();
    }
  }
  g.features.emplace("a", Tensor::from_data(spec.anchors, spec.feature_dim, std::move(feat)));

  for (int b = 0; b < spec.bridge_types; ++b) {
    const std::string bname = "b" + std::to_string(b);

    // Plant the partition pairwise: every same-class anchor pair shares a
    // dedicated bridge with probability p_in, every cross-class pair with
    // p_out. The induced metapath view is then a stochastic block model on
    // the anchors with exactly those edge probabilities. Bridges carry no
    // features; only the wiring matters and the encoder never consumes them.
    EdgeSet es;
    es.type = "a_" + bname;
    es.src_type = "a";
    es.dst_type = bname;
    int next_bridge = 0;
    for (int i = 0; i < spec.anchors; ++i) {
      for (int j = i + 1; j < spec.anchors; ++j) {
        const double p = (g.labels[i] == g.labels[j]) ? spec.p_in : spec.p_out;
        if (rng.uniform() < p) {
          es.pairs.push_back({i, next_bridge});
          es.pairs.push_back({j, next_bridge});
          ++next_bridge;
        }
      }
    }
    std::sort(es.pairs.begin(), es.pairs.end());
    // The requested count is a floor; unused bridges stay isolated so callers
    // can pin a stable node count across seeds.
    g.node_types.push_back({bname, std::max(spec.bridges, next_bridge), 0});
    g.edges.push_back(std::move(es));

    Metapath mp;
    mp.name = "via_" + bname;
    mp.node_types = {"a", bname, "a"};
    mp.edge_types = {"a_" + bname, "a_" + bname};
    g.metapaths.push_back(std::move(mp));
  }

  g.validate();
  return g;
}

}  // namespace hgcl
