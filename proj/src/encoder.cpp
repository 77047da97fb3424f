#include "hgcl/encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace hgcl {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("encoder: " + msg); }

Tensor glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  return Tensor::uniform(rows, cols, -limit, limit, rng, /*requires_grad=*/true);
}

}  // namespace

std::vector<Tensor> EncoderParams::all() const {
  std::vector<Tensor> out;
  for (const SemanticLayerParams& l : layers) {
    for (const Tensor& t : l.w) out.push_back(t);
    for (const Tensor& t : l.attn) out.push_back(t);
  }
  out.push_back(agg.w);
  out.push_back(agg.b);
  out.push_back(agg.q);
  return out;
}

EncoderParams init_encoder(int n_views, int feature_dim, int heads, int head_dim,
                           int semantic_dim, Rng& rng) {
  if (n_views < 1) fail("need at least one view");
  if (feature_dim < 1 || heads < 1 || head_dim < 1 || semantic_dim < 1) {
    fail("dimensions must be positive");
  }
  EncoderParams p;
  p.heads = heads;
  p.head_dim = head_dim;
  for (int v = 0; v < n_views; ++v) {
    SemanticLayerParams layer;
    for (int k = 0; k < heads; ++k) layer.w.push_back(glorot(feature_dim, head_dim, rng));
    for (int k = 0; k < heads; ++k) layer.attn.push_back(glorot(2 * head_dim, 1, rng));
    p.layers.push_back(std::move(layer));
  }
  const int d = heads * head_dim;
  p.agg.w = glorot(d, semantic_dim, rng);
  p.agg.b = Tensor::zeros(1, semantic_dim, /*requires_grad=*/true);
  p.agg.q = glorot(semantic_dim, 1, rng);
  return p;
}

Tensor view_mask(const kernels::Csr& adj, int n) {
  if (adj.n != n) fail("mask size does not match the view");
  Tensor mask = Tensor::zeros(n, n);
  double* m = mask.data();
  for (int i = 0; i < n; ++i) {
    for (int e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e) {
      const int j = adj.cols[e];
      if (j < 0 || j >= n) fail("view adjacency column out of range");
      m[static_cast<std::size_t>(i) * n + j] = 1.0;
    }
  }
  return mask;
}

ViewEncodeDetail semantic_view_encode_detailed(const Tensor& x, const Tensor& mask,
                                               const SemanticLayerParams& p, double slope) {
  if (p.w.empty() || p.w.size() != p.attn.size()) fail("inconsistent head parameters");
  const int n = x.rows();
  if (mask.rows() != n || mask.cols() != n) fail("mask shape does not match features");
  const int head_dim = p.w[0].cols();
  std::vector<int> lo(head_dim), hi(head_dim);
  std::iota(lo.begin(), lo.end(), 0);
  std::iota(hi.begin(), hi.end(), head_dim);
  const Tensor ones_row = Tensor::ones(1, n);

  ViewEncodeDetail out;
  std::vector<Tensor> heads;
  for (std::size_t k = 0; k < p.w.size(); ++k) {
    if (p.w[k].cols() != head_dim) fail("heads disagree on head_dim");
    if (p.attn[k].rows() != 2 * head_dim || p.attn[k].cols() != 1) {
      fail("attention vector has the wrong shape");
    }
    const Tensor proj = matmul(x, p.w[k]);                    // n x head_dim
    const Tensor a_self = gather_rows(p.attn[k], lo);         // scores the receiver
    const Tensor a_nbr = gather_rows(p.attn[k], hi);          // scores the neighbor
    const Tensor e = matmul(proj, a_self);                    // n x 1
    const Tensor f = matmul(proj, a_nbr);                     // n x 1
    const Tensor logits = leaky_relu(
        add(matmul(e, ones_row), transpose(matmul(f, ones_row))), slope);
    const Tensor att = masked_row_softmax(logits, mask);      // rows sum to 1 on the mask
    heads.push_back(elu(matmul(att, proj)));
    out.attention.push_back(att);
  }
  out.embedding = concat_cols(heads);
  return out;
}

Tensor semantic_view_encode(const Tensor& x, const Tensor& mask, const SemanticLayerParams& p,
                            double slope) {
  return semantic_view_encode_detailed(x, mask, p, slope).embedding;
}

Tensor aggregate_semantics(const std::vector<Tensor>& views, const AggregationParams& p,
                           Tensor* beta_out) {
  if (views.empty()) fail("no views to aggregate");
  const int d = views[0].cols();
  if (p.w.rows() != d) fail("aggregation weight does not match embed_dim");
  std::vector<Tensor> scores;
  for (const Tensor& h : views) {
    if (h.cols() != d || h.rows() != views[0].rows()) fail("views disagree on shape");
    const Tensor t = tanh(add(matmul(h, p.w), p.b));  // n x semantic_dim
    scores.push_back(mean(matmul(t, p.q)));           // 1 x 1
  }
  const Tensor beta = row_softmax(reshape(concat_rows(scores), 1, static_cast<int>(views.size())));
  if (beta_out) *beta_out = beta;
  Tensor agg;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Tensor term = mul(views[v], gather_rows(transpose(beta), {static_cast<int>(v)}));
    agg = (v == 0) ? term : add(agg, term);
  }
  return agg;
}

EncoderOutput encode(const Tensor& x, const std::vector<SemanticView>& views,
                     const EncoderParams& p) {
  if (views.size() != p.layers.size()) fail("parameter count does not match view count");
  EncoderOutput out;
  for (std::size_t v = 0; v < views.size(); ++v) {
    const Tensor mask = view_mask(views[v].adj, x.rows());
    out.view_embeddings.push_back(semantic_view_encode(x, mask, p.layers[v], p.slope));
  }
  out.aggregated = aggregate_semantics(out.view_embeddings, p.agg, &out.beta);
  return out;
}

}  // namespace hgcl
