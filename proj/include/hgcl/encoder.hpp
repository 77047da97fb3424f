#pragma once

#include <vector>

#include "hgcl/hetgraph.hpp"
#include "hgcl/rng.hpp"
#include "hgcl/tensor.hpp"

namespace hgcl {

/// Multi-head attention parameters for one semantic view. Head k projects
/// features with w[k] (feature_dim x head_dim) and scores a directed pair
/// (i, j) with the split attention vector attn[k] (2*head_dim x 1): the first
/// half scores the receiving node, the second half the neighbor.
struct SemanticLayerParams {
  std::vector<Tensor> w;
  std::vector<Tensor> attn;
};

/// Attention pooling across views: per-view summaries are scored by
/// mean(tanh(H w + b) q) and softmax-normalized into mixture weights.
struct AggregationParams {
  Tensor w;  // embed_dim x semantic_dim
  Tensor b;  // 1 x semantic_dim
  Tensor q;  // semantic_dim x 1
};

struct EncoderParams {
  std::vector<SemanticLayerParams> layers;  // one per view
  AggregationParams agg;
  int heads = 0;
  int head_dim = 0;
  double slope = 0.2;  // leaky-relu slope inside attention scores

  int embed_dim() const { return heads * head_dim; }
  /// Every trainable tensor in a fixed order (layer w's, layer attn's, then
  /// aggregation w, b, q). Checkpoints and the optimizer rely on this order.
  std::vector<Tensor> all() const;
};

/// Glorot-uniform initialization; draws from rng in a fixed order.
EncoderParams init_encoder(int n_views, int feature_dim, int heads, int head_dim,
                           int semantic_dim, Rng& rng);

/// Dense 0/1 attention mask of a view's neighborhoods (rows: receivers).
Tensor view_mask(const kernels::Csr& adj, int n);

/// One view's node embeddings: per head, project, score all pairs, mask to
/// the view neighborhood, softmax, aggregate, elu; heads are concatenated.
Tensor semantic_view_encode(const Tensor& x, const Tensor& mask, const SemanticLayerParams& p,
                            double slope);

/// Same, but also exposes each head's attention matrix (for tests/inspection).
struct ViewEncodeDetail {
  Tensor embedding;
  std::vector<Tensor> attention;  // per head, n x n row-stochastic on the mask
};
ViewEncodeDetail semantic_view_encode_detailed(const Tensor& x, const Tensor& mask,
                                               const SemanticLayerParams& p, double slope);

/// Softmax mixture over per-view embeddings; beta_out (1 x n_views) receives
/// the mixture weights when non-null.
Tensor aggregate_semantics(const std::vector<Tensor>& views, const AggregationParams& p,
                           Tensor* beta_out = nullptr);

struct EncoderOutput {
  std::vector<Tensor> view_embeddings;  // per view, n x embed_dim
  Tensor aggregated;                    // n x embed_dim
  Tensor beta;                          // 1 x n_views
};

EncoderOutput encode(const Tensor& x, const std::vector<SemanticView>& views,
                     const EncoderParams& p);

}  // namespace hgcl
