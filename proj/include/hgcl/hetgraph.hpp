#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "hgcl/kernels.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

/// One class of nodes (e.g. papers, authors). Nodes of a type are numbered
/// 0..count-1 independently of every other type.
struct NodeType {
  std::string name;
  int count = 0;
  int feature_dim = 0;
};

/// All edges of one relation. Pairs are (src id, dst id) in the local id
/// spaces of src_type / dst_type. Edges are traversable in both directions;
/// the declared orientation only fixes which side of a pair is which.
struct EdgeSet {
  std::string type;
  std::string src_type;
  std::string dst_type;
  std::vector<std::array<int, 2>> pairs;
};

/// A typed walk template: node_types has one more entry than edge_types and
/// both endpoints must be the anchor type for the path to define a view.
struct Metapath {
  std::string name;
  std::vector<std::string> node_types;
  std::vector<std::string> edge_types;
};

struct HeteroGraph {
  std::vector<NodeType> node_types;
  std::string anchor_type;
  std::map<std::string, Tensor> features;  // type name -> count x feature_dim
  std::vector<EdgeSet> edges;
  std::vector<int> labels;  // anchor labels; empty when the graph is unlabeled
  std::vector<Metapath> metapaths;

  int type_index(const std::string& name) const;  // -1 when missing
  const NodeType& type(const std::string& name) const;
  int anchor_count() const;
  int n_classes() const;  // 0 when unlabeled
  /// Full consistency check; throws std::runtime_error on the first problem.
  void validate() const;
};

nlohmann::json graph_to_json(const HeteroGraph& g);
HeteroGraph graph_from_json(const nlohmann::json& j);

/// Serialization is canonical: edge pairs are sorted and deduplicated on load,
/// so save(load(path)) is byte-stable under further round trips.
void save_graph(const HeteroGraph& g, const std::string& path);
HeteroGraph load_graph(const std::string& path);

/// Feature matrix of the anchor type.
Tensor anchor_features(const HeteroGraph& g);

/// Anchor-to-anchor reachability along one metapath, computed as a boolean
/// sparse chain product over the per-step bipartite adjacencies.
kernels::Csr metapath_adjacency(const HeteroGraph& g, const Metapath& mp,
                                bool add_self_loops = true);

/// One semantic view of the anchors: the neighborhood structure induced by a
/// single metapath.
struct SemanticView {
  std::string name;
  kernels::Csr adj;
};

std::vector<SemanticView> build_views(const HeteroGraph& g, bool add_self_loops = true);

/// Parameters of the synthetic labeled benchmark graph: a planted partition
/// realized through bridge nodes. Anchors fall into n_classes communities;
/// independently per bridge type, each same-class anchor pair shares a
/// dedicated bridge node with probability p_in and each cross-class pair with
/// probability p_out, so every metapath view is a stochastic block model on
/// the anchors with exactly those edge probabilities. Anchor features are
/// class-block means corrupted by Gaussian noise so raw features are only
/// weakly separable while the wiring is strongly informative. `bridges` is a
/// minimum node count per bridge type: the pool grows to one bridge per
/// sampled pair, and any excess stays isolated so callers can pin a stable
/// type size across seeds.
struct SyntheticSpec {
  int n_classes = 3;
  int anchors = 150;
  int bridge_types = 2;
  int bridges = 60;  // minimum per bridge type; grows to one per shared pair
  double p_in = 0.2;
  double p_out = 0.02;
  double noise = 1.0;  // stddev of the anchor feature noise
  int feature_dim = 16;
  std::uint64_t seed = 1;
};

HeteroGraph synthetic_hg(const SyntheticSpec& spec);

}  // namespace hgcl
