#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hgcl/hetgraph.hpp"
#include "hgcl/kernels.hpp"

namespace hgcl {

/// How hard negatives are ranked for an anchor. None disables synthesis
/// entirely; Sem ranks by inner product of the current (detached) view
/// embeddings; Pe by inner product of Laplacian positional encodings; Ppr by
/// personalized PageRank mass from the anchor.
enum class HardnessVariant { None, Sem, Pe, Ppr };

std::string to_string(HardnessVariant v);
HardnessVariant variant_from_string(const std::string& s);

struct PprParams {
  double c = 0.15;       // restart probability
  double tol = 1e-10;    // L1 change threshold
  int max_iter = 10000;
};

/// Personalized PageRank from every source: row v solves
/// s = (1-c) P^T s + c e_v with P the row-stochastic transition matrix.
struct PprIndex {
  int n = 0;
  std::vector<double> scores;  // n x n row-major, row = source
  int iterations = 0;          // worst case over sources
  double residual_l1 = 0.0;    // worst fixed-point defect over sources

  double score(int src, int dst) const { return scores[static_cast<std::size_t>(src) * n + dst]; }
};

PprIndex ppr(const kernels::Csr& adj, const PprParams& p = {});

/// The k smallest non-trivial eigenvectors of the symmetric normalized
/// Laplacian (trivial = eigenvalue below 1e-8, one per connected component).
/// Columns are sign-canonicalized: the first entry of largest magnitude is
/// made positive, with magnitude ties (within 1e-12) broken toward the
/// smallest index. Directed inputs are symmetrized first.
struct LaplacianPe {
  int n = 0;
  int k = 0;
  std::vector<double> vectors;      // n x k row-major
  std::vector<double> eigenvalues;  // k, ascending

  double dot(int i, int j) const;
};

LaplacianPe laplacian_pe(const kernels::Csr& adj, int k);

/// Pairwise hardness scores; j == anchor is undefined and throws.
double hardness(const PprIndex& index, int anchor, int j);
double hardness(const LaplacianPe& pe, int anchor, int j);
/// Sem: inner product of embedding rows (emb is n x d row-major).
double hardness(const double* emb, int d, int anchor, int j);

/// Ids of the top_t highest-scoring non-anchor nodes, hardness descending,
/// id ascending on ties. scores[anchor] is ignored.
std::vector<int> top_candidates(const std::vector<double>& scores, int anchor, int top_t);

/// Candidate lists for every anchor from an arbitrary score function.
std::vector<std::vector<int>> build_candidates(const std::function<double(int, int)>& score,
                                               int n, int top_t);

int default_top_t(int n);  // max(8, ceil(0.05 n))

/// Per-view structural data backing hard-negative mining. Only the fields the
/// variant needs are populated; Sem candidates are rebuilt from the current
/// embeddings every epoch and are not stored here.
struct ViewStructure {
  std::string view;
  PprIndex ppr;                           // Ppr variant
  LaplacianPe pe;                         // Pe variant
  std::vector<std::vector<int>> candidates;  // Ppr/Pe variants
};

struct StructureIndex {
  HardnessVariant variant = HardnessVariant::None;
  int top_t = 0;
  std::vector<ViewStructure> views;
};

StructureIndex build_structure_index(const std::vector<SemanticView>& views, HardnessVariant v,
                                     int top_t, const PprParams& ppr_params, int pe_k);

}  // namespace hgcl
