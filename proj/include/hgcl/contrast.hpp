#pragma once

#include <vector>

#include "hgcl/rng.hpp"
#include "hgcl/structure_index.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

/// Two-layer MLP applied before the cosine critic; shared across views and
/// directions.
struct ProjectionHead {
  Tensor w1, b1, w2, b2;

  Tensor apply(const Tensor& h) const;  // elu between the layers
  std::vector<Tensor> params() const;
};

ProjectionHead init_projection_head(int d, Rng& rng);

/// Where mixup endpoints are sampled from: the anchor's hard-negative
/// candidate list, or every other node.
enum class MixupPool { Candidates, AllNegatives };

std::string to_string(MixupPool p);
MixupPool pool_from_string(const std::string& s);

struct ContrastConfig {
  double tau = 0.5;       // temperature
  int m_synth = -1;       // synthesized negatives per anchor; -1 resolves by graph size
  double alpha = 1.0;     // Beta(alpha, alpha) mixing concentration
  int top_t = -1;         // candidate list length; -1 resolves to default_top_t(n)
  HardnessVariant variant = HardnessVariant::Ppr;
  MixupPool pool = MixupPool::Candidates;

  void validate() const;
  int resolve_m(int n) const;
  int resolve_top_t(int n) const;
};

/// Cosine critic between every row pair: returns the a.rows() x b.rows()
/// matrix of cos(g(a_i), g(b_j)).
Tensor critic(const Tensor& a, const Tensor& b, const ProjectionHead& head);
/// Convenience scalar critic for two single rows (still taped).
Tensor critic_rows(const Tensor& a, const Tensor& b, const ProjectionHead& head);

/// One synthesized negative: mix lambda * emb[first] + (1-lambda) * emb[second].
struct MixupDraw {
  int first = 0;
  int second = 0;
  double lambda = 0.5;
};

/// Draw order is fixed (first endpoint, second endpoint, lambda) so runs are
/// reproducible. Endpoints are distinct positions of the pool.
MixupDraw sample_mixup(const std::vector<int>& pool, double alpha, Rng& rng);
/// Same, with the pool implicitly {0..n-1} minus the anchor.
MixupDraw sample_mixup_excluding(int n, int anchor, double alpha, Rng& rng);

/// All draws for one view: draws[i] holds m draws for anchor i, consumed from
/// rng anchor-major. pools[i] is anchor i's candidate list; an empty pools
/// vector selects the all-negatives pool. m == 0 consumes no randomness.
std::vector<std::vector<MixupDraw>> draw_all_mixups(int n, int m,
                                                    const std::vector<std::vector<int>>& pools,
                                                    double alpha, Rng& rng);

/// Rows i*m+t = draws[i][t] mixed from emb rows. Gradients flow to the
/// endpoint rows only; lambda is a constant.
Tensor synthesize_negatives(const Tensor& emb, const std::vector<std::vector<MixupDraw>>& draws);

/// Negatives for one anchor and one view, in bank order: same-view others,
/// aggregated others, synthesized rows.
struct NegativeBank {
  Tensor rows;
  int n_intra = 0;
  int n_inter = 0;
  int n_synth = 0;

  int size() const { return n_intra + n_inter + n_synth; }
};

NegativeBank assemble_bank(int anchor, const Tensor& view_emb, const Tensor& agg_emb,
                           const Tensor& synth_rows);
/// Mirror image for the reverse direction: aggregated others are the intra
/// set, same-view others the inter set; synthesized rows are shared.
NegativeBank assemble_bank_reverse(int anchor, const Tensor& view_emb, const Tensor& agg_emb,
                                   const Tensor& synth_rows);

/// -log exp(theta(u,v)/tau) / (exp(theta(u,v)/tau) + sum_b exp(theta(u,b)/tau))
/// with the cosine critic; u and v are single rows. Returns a 1x1 tensor.
Tensor info_nce(const Tensor& u, const Tensor& v, const NegativeBank& bank,
                const ProjectionHead& head, double tau);

/// Candidate pools per view for the configured variant: stored lists for
/// Ppr/Pe, lists ranked by the current (detached) view embeddings for Sem,
/// and empty inner lists for the all-negatives pool or the None variant.
std::vector<std::vector<std::vector<int>>> resolve_pools(const std::vector<Tensor>& view_embs,
                                                         const StructureIndex& index,
                                                         const ContrastConfig& cfg, int m);

/// Mean over anchors and views of the two-direction InfoNCE pair, computed by
/// matrix ops from pre-drawn mixups (draws[view][anchor][t]).
Tensor objective_from_draws(const std::vector<Tensor>& view_embs, const Tensor& agg_emb,
                            const std::vector<std::vector<std::vector<MixupDraw>>>& draws,
                            const ProjectionHead& head, double tau);

/// Full objective: resolves pools, consumes draws from mixup_rng (view-major,
/// anchor-major), then evaluates objective_from_draws.
Tensor total_objective(const std::vector<Tensor>& view_embs, const Tensor& agg_emb,
                       const StructureIndex& index, const ContrastConfig& cfg,
                       const ProjectionHead& head, Rng& mixup_rng);

}  // namespace hgcl
