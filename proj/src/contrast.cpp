#include "hgcl/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hgcl {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("contrast: " + msg); }

Tensor glorot(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  return Tensor::uniform(rows, cols, -limit, limit, rng, /*requires_grad=*/true);
}

std::vector<int> everyone_but(int n, int anchor) {
  std::vector<int> ids;
  ids.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j != anchor) ids.push_back(j);
  }
  return ids;
}

}  // namespace

Tensor ProjectionHead::apply(const Tensor& h) const {
  return add(matmul(elu(add(matmul(h, w1), b1)), w2), b2);
}

std::vector<Tensor> ProjectionHead::params() const { return {w1, b1, w2, b2}; }

ProjectionHead init_projection_head(int d, Rng& rng) {
  if (d < 1) fail("projection head dimension must be positive");
  ProjectionHead head;
  head.w1 = glorot(d, d, rng);
  head.b1 = Tensor::zeros(1, d, /*requires_grad=*/true);
  head.w2 = glorot(d, d, rng);
  head.b2 = Tensor::zeros(1, d, /*requires_grad=*/true);
  return head;
}

std::string to_string(MixupPool p) {
  return p == MixupPool::Candidates ? "candidates" : "all";
}

MixupPool pool_from_string(const std::string& s) {
  if (s == "candidates") return MixupPool::Candidates;
  if (s == "all") return MixupPool::AllNegatives;
  fail("unknown mixup pool '" + s + "'");
}

void ContrastConfig::validate() const {
  if (tau <= 0.0) fail("tau must be positive");
  if (alpha <= 0.0) fail("alpha must be positive");
  if (m_synth < -1) fail("m_synth must be -1 (auto) or non-negative");
  if (top_t < -1 || top_t == 0 || top_t == 1) fail("top_t must be -1 (auto) or at least 2");
}

int ContrastConfig::resolve_m(int n) const {
  if (variant == HardnessVariant::None) return 0;
  if (m_synth >= 0) return m_synth;
  return n >= 1024 ? 256 : std::max(1, n / 4);
}

int ContrastConfig::resolve_top_t(int n) const {
  if (top_t >= 2) return top_t;
  return default_top_t(n);
}

Tensor critic(const Tensor& a, const Tensor& b, const ProjectionHead& head) {
  const Tensor za = l2_normalize_rows(head.apply(a));
  const Tensor zb = l2_normalize_rows(head.apply(b));
  return matmul(za, transpose(zb));
}

Tensor critic_rows(const Tensor& a, const Tensor& b, const ProjectionHead& head) {
  if (a.rows() != 1 || b.rows() != 1) fail("critic_rows expects single rows");
  return critic(a, b, head);
}

MixupDraw sample_mixup(const std::vector<int>& pool, double alpha, Rng& rng) {
  const int s = static_cast<int>(pool.size());
  if (s < 2) fail("mixup pool needs at least two entries");
  const int i1 = rng.uniform_int(s);
  int i2 = rng.uniform_int(s - 1);
  if (i2 >= i1) ++i2;
  return {pool[i1], pool[i2], rng.beta_symmetric(alpha)};
}

MixupDraw sample_mixup_excluding(int n, int anchor, double alpha, Rng& rng) {
  if (n < 3) fail("mixup needs at least two nodes besides the anchor");
  int a = rng.uniform_int(n - 1);
  if (a >= anchor) ++a;
  int b = rng.uniform_int(n - 2);
  const int lo = std::min(anchor, a);
  const int hi = std::max(anchor, a);
  if (b >= lo) ++b;
  if (b >= hi) ++b;
  return {a, b, rng.beta_symmetric(alpha)};
}

std::vector<std::vector<MixupDraw>> draw_all_mixups(int n, int m,
                                                    const std::vector<std::vector<int>>& pools,
                                                    double alpha, Rng& rng) {
  if (!pools.empty() && static_cast<int>(pools.size()) != n) {
    fail("pool list does not match the anchor count");
  }
  std::vector<std::vector<MixupDraw>> draws(n);
  if (m == 0) return draws;
  for (int i = 0; i < n; ++i) {
    draws[i].reserve(m);
    for (int t = 0; t < m; ++t) {
      draws[i].push_back(pools.empty() ? sample_mixup_excluding(n, i, alpha, rng)
                                       : sample_mixup(pools[i], alpha, rng));
    }
  }
  return draws;
}

Tensor synthesize_negatives(const Tensor& emb, const std::vector<std::vector<MixupDraw>>& draws) {
  const int n = static_cast<int>(draws.size());
  if (n == 0 || draws[0].empty()) return Tensor();
  const int m = static_cast<int>(draws[0].size());
  const int d = emb.cols();
  std::vector<int> firsts, seconds;
  std::vector<double> lam(static_cast<std::size_t>(n) * m * d);
  std::vector<double> lam_c(lam.size());
  firsts.reserve(static_cast<std::size_t>(n) * m);
  seconds.reserve(firsts.capacity());
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(draws[i].size()) != m) fail("anchors disagree on mixup count");
    for (int t = 0; t < m; ++t) {
      const MixupDraw& mx = draws[i][t];
      if (mx.first == mx.second) fail("mixup endpoints must differ");
      firsts.push_back(mx.first);
      seconds.push_back(mx.second);
      const std::size_t base = (static_cast<std::size_t>(i) * m + t) * d;
      for (int c = 0; c < d; ++c) {
        lam[base + c] = mx.lambda;
        lam_c[base + c] = 1.0 - mx.lambda;
      }
    }
  }
  const int rows = n * m;
  const Tensor w1 = Tensor::from_data(rows, d, std::move(lam));
  const Tensor w2 = Tensor::from_data(rows, d, std::move(lam_c));
  return add(mul(gather_rows(emb, firsts), w1), mul(gather_rows(emb, seconds), w2));
}

NegativeBank assemble_bank(int anchor, const Tensor& view_emb, const Tensor& agg_emb,
                           const Tensor& synth_rows) {
  const int n = view_emb.rows();
  if (agg_emb.rows() != n) fail("embedding matrices disagree on node count");
  const std::vector<int> others = everyone_but(n, anchor);
  NegativeBank bank;
  bank.n_intra = n - 1;
  bank.n_inter = n - 1;
  std::vector<Tensor> parts = {gather_rows(view_emb, others), gather_rows(agg_emb, others)};
  if (synth_rows.defined()) {
    bank.n_synth = synth_rows.rows();
    parts.push_back(synth_rows);
  }
  bank.rows = concat_rows(parts);
  return bank;
}

NegativeBank assemble_bank_reverse(int anchor, const Tensor& view_emb, const Tensor& agg_emb,
                                   const Tensor& synth_rows) {
  return assemble_bank(anchor, agg_emb, view_emb, synth_rows);
}

Tensor info_nce(const Tensor& u, const Tensor& v, const NegativeBank& bank,
                const ProjectionHead& head, double tau) {
  if (u.rows() != 1 || v.rows() != 1) fail("info_nce anchors must be single rows");
  if (tau <= 0.0) fail("tau must be positive");
  const Tensor zu = l2_normalize_rows(head.apply(u));
  const Tensor zv = l2_normalize_rows(head.apply(v));
  const Tensor zb = l2_normalize_rows(head.apply(bank.rows));
  const Tensor pos = matmul(zu, transpose(zv));               // 1 x 1
  const Tensor negs = matmul(zb, transpose(zu));              // B x 1
  const Tensor denom =
      add(exp(scale(pos, 1.0 / tau)), sum(exp(scale(negs, 1.0 / tau))));
  return add(scale(pos, -1.0 / tau), log(denom));
}

std::vector<std::vector<std::vector<int>>> resolve_pools(const std::vector<Tensor>& view_embs,
                                                         const StructureIndex& index,
                                                         const ContrastConfig& cfg, int m) {
  const std::size_t n_views = view_embs.size();
  std::vector<std::vector<std::vector<int>>> pools(n_views);
  if (m == 0 || cfg.pool == MixupPool::AllNegatives) return pools;
  if (index.views.size() != n_views) fail("structure index does not match the view count");
  if (index.variant != cfg.variant) fail("structure index was built for a different variant");
  const int n = view_embs[0].rows();
  for (std::size_t p = 0; p < n_views; ++p) {
    if (cfg.variant == HardnessVariant::Sem) {
      // Rank by the current embeddings, detached: reads values only.
      const double* emb = view_embs[p].data();
      const int d = view_embs[p].cols();
      pools[p] = build_candidates(
          [emb, d](int i, int j) { return hardness(emb, d, i, j); }, n, index.top_t);
    } else {
      if (index.views[p].candidates.empty()) fail("structure index has no candidate lists");
      pools[p] = index.views[p].candidates;
    }
  }
  return pools;
}

Tensor objective_from_draws(const std::vector<Tensor>& view_embs, const Tensor& agg_emb,
                            const std::vector<std::vector<std::vector<MixupDraw>>>& draws,
                            const ProjectionHead& head, double tau) {
  if (view_embs.empty()) fail("no views");
  if (draws.size() != view_embs.size()) fail("draws do not match the view count");
  if (tau <= 0.0) fail("tau must be positive");
  const int n = agg_emb.rows();

  const Tensor za = l2_normalize_rows(head.apply(agg_emb));
  const Tensor s_aa = matmul(za, transpose(za));
  const Tensor e_aa = exp(scale(s_aa, 1.0 / tau));
  // Row sums minus the taped diagonal: removes the self term from both the
  // value and the gradient exactly.
  const Tensor intra_rev =
      sub(sum_cols(e_aa), exp(scale(diag_part(s_aa), 1.0 / tau)));

  Tensor j_total;
  for (std::size_t p = 0; p < view_embs.size(); ++p) {
    const Tensor& hp = view_embs[p];
    if (hp.rows() != n) fail("view and aggregated embeddings disagree on node count");
    const Tensor zp = l2_normalize_rows(head.apply(hp));
    const Tensor s_pp = matmul(zp, transpose(zp));
    const Tensor s_pa = matmul(zp, transpose(za));
    const Tensor pos = diag_part(s_pa);  // n x 1

    const Tensor e_pp = exp(scale(s_pp, 1.0 / tau));
    const Tensor e_pa = exp(scale(s_pa, 1.0 / tau));
    const Tensor intra_fwd = sub(sum_cols(e_pp), exp(scale(diag_part(s_pp), 1.0 / tau)));
    const Tensor inter_fwd = sum_cols(e_pa);             // includes the positive term
    const Tensor inter_rev = sum_cols(transpose(e_pa));  // column sums

    Tensor denom_fwd = add(intra_fwd, inter_fwd);
    Tensor denom_rev = add(intra_rev, inter_rev);

    const Tensor synth = synthesize_negatives(hp, draws[p]);
    if (synth.defined()) {
      const int m = synth.rows() / n;
      std::vector<int> rep(static_cast<std::size_t>(n) * m);
      for (int i = 0; i < n; ++i) {
        for (int t = 0; t < m; ++t) rep[static_cast<std::size_t>(i) * m + t] = i;
      }
      const Tensor zs = l2_normalize_rows(head.apply(synth));
      const Tensor dots_fwd = sum_cols(mul(gather_rows(zp, rep), zs));  // n*m x 1
      const Tensor dots_rev = sum_cols(mul(gather_rows(za, rep), zs));
      const Tensor synth_fwd = sum_cols(exp(scale(reshape(dots_fwd, n, m), 1.0 / tau)));
      const Tensor synth_rev = sum_cols(exp(scale(reshape(dots_rev, n, m), 1.0 / tau)));
      denom_fwd = add(denom_fwd, synth_fwd);
      denom_rev = add(denom_rev, synth_rev);
    }

    const Tensor loss_fwd = add(scale(pos, -1.0 / tau), log(denom_fwd));
    const Tensor loss_rev = add(scale(pos, -1.0 / tau), log(denom_rev));
    const Tensor view_loss = mean(scale(add(loss_fwd, loss_rev), 0.5));
    j_total = (p == 0) ? view_loss : add(j_total, view_loss);
  }
  return scale(j_total, 1.0 / static_cast<double>(view_embs.size()));
}

Tensor total_objective(const std::vector<Tensor>& view_embs, const Tensor& agg_emb,
                       const StructureIndex& index, const ContrastConfig& cfg,
                       const ProjectionHead& head, Rng& mixup_rng) {
  cfg.validate();
  if (view_embs.empty()) fail("no views");
  const int n = agg_emb.rows();
  const int m = cfg.resolve_m(n);
  const auto pools = resolve_pools(view_embs, index, cfg, m);
  std::vector<std::vector<std::vector<MixupDraw>>> draws;
  draws.reserve(view_embs.size());
  for (std::size_t p = 0; p < view_embs.size(); ++p) {
    draws.push_back(draw_all_mixups(n, m, pools[p], cfg.alpha, mixup_rng));
  }
  return objective_from_draws(view_embs, agg_emb, draws, head, cfg.tau);
}

}  // namespace hgcl
