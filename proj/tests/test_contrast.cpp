#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include <doctest.h>

#include "hgcl/contrast.hpp"
#include "hgcl/rng.hpp"
#include "hgcl/structure_index.hpp"
#include "hgcl/tensor.hpp"
#include "testutil.hpp"

using namespace hgcl;

namespace {

ProjectionHead random_head(int d, std::uint64_t seed) {
  Rng rng(seed);
  return init_projection_head(d, rng);
}

// Identity projection head: on entrywise non-negative inputs the elu between
// the layers is the identity, so g(h) == h and the critic is plain cosine.
ProjectionHead identity_head(int d) {
  ProjectionHead head;
  std::vector<double> eye(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) eye[static_cast<std::size_t>(i) * d + i] = 1.0;
  head.w1 = Tensor::from_data(d, d, eye);
  head.b1 = Tensor::zeros(1, d);
  head.w2 = Tensor::from_data(d, d, eye);
  head.b2 = Tensor::zeros(1, d);
  return head;
}

testutil::ref::HeadWeights extract(const ProjectionHead& head) {
  testutil::ref::HeadWeights hw;
  hw.d = head.w1.rows();
  hw.w1 = {head.w1.data(), head.w1.data() + head.w1.size()};
  hw.b1 = {head.b1.data(), head.b1.data() + head.b1.size()};
  hw.w2 = {head.w2.data(), head.w2.data() + head.w2.size()};
  hw.b2 = {head.b2.data(), head.b2.data() + head.b2.size()};
  return hw;
}

std::vector<double> row_of(const Tensor& t, int i) {
  return {t.data() + static_cast<std::size_t>(i) * t.cols(),
          t.data() + static_cast<std::size_t>(i + 1) * t.cols()};
}

}  // namespace

TEST_SUITE("contrast") {

TEST_CASE("projection head shapes, determinism, and zero biases") {
  const ProjectionHead a = random_head(5, 9);
  const ProjectionHead b = random_head(5, 9);
  CHECK(a.w1.rows() == 5);
  CHECK(a.w1.cols() == 5);
  CHECK(a.b1.rows() == 1);
  for (int j = 0; j < 5; ++j) CHECK(a.b1.at(0, j) == 0.0);
  for (std::size_t i = 0; i < a.w2.size(); ++i) CHECK(a.w1.data()[i] == b.w1.data()[i]);
  CHECK(a.params().size() == 4);
  CHECK(a.params()[0].requires_grad());
}

TEST_CASE("critic matches the straight-line reference and stays in [-1, 1]") {
  Rng rng(61);
  const int d = 4;
  const ProjectionHead head = random_head(d, 62);
  const testutil::ref::HeadWeights hw = extract(head);
  const Tensor a = Tensor::uniform(3, d, -1.0, 1.0, rng);
  const Tensor b = Tensor::uniform(5, d, -1.0, 1.0, rng);
  const Tensor s = critic(a, b, head);
  REQUIRE(s.rows() == 3);
  REQUIRE(s.cols() == 5);
  for (int i = 0; i < 3; ++i) {
    const std::vector<double> zi = testutil::ref::head_apply(hw, row_of(a, i));
    for (int j = 0; j < 5; ++j) {
      const std::vector<double> zj = testutil::ref::head_apply(hw, row_of(b, j));
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += zi[c] * zj[c];
      CHECK(s.at(i, j) == doctest::Approx(dot).epsilon(1e-10));
      CHECK(std::abs(s.at(i, j)) <= 1.0 + 1e-12);
    }
  }
  CHECK_THROWS_AS(critic_rows(a, b, head), std::runtime_error);
}

TEST_CASE("config validation and resolution rules") {
  ContrastConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  cfg = ContrastConfig{};
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);
  cfg = ContrastConfig{};
  cfg.top_t = 1;
  CHECK_THROWS_AS(cfg.validate(), std::runtime_error);

  cfg = ContrastConfig{};
  CHECK(cfg.resolve_m(100) == 25);
  CHECK(cfg.resolve_m(2048) == 256);
  CHECK(cfg.resolve_m(3) == 1);
  cfg.m_synth = 7;
  CHECK(cfg.resolve_m(100) == 7);
  cfg.variant = HardnessVariant::None;
  CHECK(cfg.resolve_m(100) == 0);

  cfg = ContrastConfig{};
  CHECK(cfg.resolve_top_t(150) == 8);
  cfg.top_t = 12;
  CHECK(cfg.resolve_top_t(150) == 12);

  CHECK(pool_from_string("candidates") == MixupPool::Candidates);
  CHECK(pool_from_string(to_string(MixupPool::AllNegatives)) == MixupPool::AllNegatives);
  CHECK_THROWS_AS(pool_from_string("sometimes"), std::runtime_error);
}

TEST_CASE("mixup draws come from the pool with distinct endpoints") {
  Rng rng(63);
  const std::vector<int> pool = {3, 7, 9};
  std::set<std::pair<int, int>> seen;
  for (int t = 0; t < 600; ++t) {
    const MixupDraw d = sample_mixup(pool, 1.0, rng);
    CHECK(d.first != d.second);
    CHECK(std::count(pool.begin(), pool.end(), d.first) == 1);
    CHECK(std::count(pool.begin(), pool.end(), d.second) == 1);
    CHECK(d.lambda >= 0.0);
    CHECK(d.lambda < 1.0);
    seen.insert({d.first, d.second});
  }
  CHECK(seen.size() == 6);  // all ordered pairs of a 3-element pool
  CHECK_THROWS_AS(sample_mixup({5}, 1.0, rng), std::runtime_error);
}

TEST_CASE("excluding draws never hit the anchor and cover all pairs") {
  Rng rng(64);
  std::set<std::pair<int, int>> seen;
  for (int t = 0; t < 2000; ++t) {
    const MixupDraw d = sample_mixup_excluding(5, 2, 1.0, rng);
    CHECK(d.first != 2);
    CHECK(d.second != 2);
    CHECK(d.first != d.second);
    CHECK(d.first >= 0);
    CHECK(d.first < 5);
    CHECK(d.second >= 0);
    CHECK(d.second < 5);
    seen.insert({d.first, d.second});
  }
  CHECK(seen.size() == 12);  // ordered pairs of {0,1,3,4}
  CHECK_THROWS_AS(sample_mixup_excluding(2, 0, 1.0, rng), std::runtime_error);
}

TEST_CASE("draw_all_mixups is anchor-major and m == 0 consumes no randomness") {
  const std::vector<std::vector<int>> pools = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
  Rng r1(65), r2(65);
  const auto draws = draw_all_mixups(4, 2, pools, 1.0, r1);
  REQUIRE(draws.size() == 4);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(draws[i].size() == 2);
    for (int t = 0; t < 2; ++t) {
      const MixupDraw want = sample_mixup(pools[i], 1.0, r2);
      CHECK(draws[i][t].first == want.first);
      CHECK(draws[i][t].second == want.second);
      CHECK(draws[i][t].lambda == want.lambda);
    }
  }
  Rng r3(66), r4(66);
  const auto none = draw_all_mixups(4, 0, pools, 1.0, r3);
  CHECK(none[0].empty());
  CHECK(r3.next_u64() == r4.next_u64());  // untouched state
  Rng r5(67);
  CHECK_THROWS_AS(draw_all_mixups(4, 1, {{0, 1}, {0, 1}}, 1.0, r5), std::runtime_error);
}

TEST_CASE("synthesized negatives interpolate exactly and route gradients to the endpoints") {
  const Tensor emb = Tensor::from_data(3, 2, {1.0, 2.0, 10.0, 20.0, 100.0, 200.0}, true);
  const std::vector<std::vector<MixupDraw>> draws = {
      {{1, 2, 0.25}}, {{0, 2, 0.5}}, {{0, 1, 0.75}}};
  Tape tape;
  const Tensor synth = synthesize_negatives(emb, draws);
  REQUIRE(synth.rows() == 3);
  REQUIRE(synth.cols() == 2);
  CHECK(synth.at(0, 0) == doctest::Approx(0.25 * 10.0 + 0.75 * 100.0));
  CHECK(synth.at(1, 1) == doctest::Approx(0.5 * 2.0 + 0.5 * 200.0));
  CHECK(synth.at(2, 0) == doctest::Approx(0.75 * 1.0 + 0.25 * 10.0));
  // d(sum of row r)/d(emb row) = lambda on the first endpoint, 1-lambda on the
  // second, summed over the rows that use it.
  const Tensor loss = sum(gather_rows(synth, {0}));
  emb.zero_grad();
  tape.backward(loss);
  CHECK(emb.grad()[0] == 0.0);  // node 0 is not an endpoint of draw 0
  CHECK(emb.grad()[2] == doctest::Approx(0.25));
  CHECK(emb.grad()[4] == doctest::Approx(0.75));
  CHECK_FALSE(synthesize_negatives(emb, {{}, {}, {}}).defined());
  CHECK_THROWS_AS(synthesize_negatives(emb, {{{1, 1, 0.5}}, {}, {}}), std::runtime_error);
}

TEST_CASE("bank sizes obey 2(n-1)+M and keep the documented order") {
  Rng rng(68);
  const int n = 5, d = 3, m = 2;
  const Tensor view_emb = Tensor::uniform(n, d, -1.0, 1.0, rng);
  const Tensor agg_emb = Tensor::uniform(n, d, -1.0, 1.0, rng);
  const Tensor synth = Tensor::uniform(m, d, -1.0, 1.0, rng);
  const int anchor = 2;
  const NegativeBank bank = assemble_bank(anchor, view_emb, agg_emb, synth);
  CHECK(bank.size() == 2 * (n - 1) + m);
  CHECK(bank.n_intra == n - 1);
  CHECK(bank.n_inter == n - 1);
  CHECK(bank.n_synth == m);
  // Order: view others ascending, agg others ascending, synth rows.
  const std::vector<int> others = {0, 1, 3, 4};
  for (int r = 0; r < n - 1; ++r) {
    for (int c = 0; c < d; ++c) {
      CHECK(bank.rows.at(r, c) == view_emb.at(others[r], c));
      CHECK(bank.rows.at(n - 1 + r, c) == agg_emb.at(others[r], c));
    }
  }
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < d; ++c) CHECK(bank.rows.at(2 * (n - 1) + r, c) == synth.at(r, c));
  }
  const NegativeBank rev = assemble_bank_reverse(anchor, view_emb, agg_emb, synth);
  CHECK(rev.size() == bank.size());
  for (int r = 0; r < n - 1; ++r) {
    for (int c = 0; c < d; ++c) {
      CHECK(rev.rows.at(r, c) == agg_emb.at(others[r], c));
      CHECK(rev.rows.at(n - 1 + r, c) == view_emb.at(others[r], c));
    }
  }
  const NegativeBank no_synth = assemble_bank(anchor, view_emb, agg_emb, Tensor());
  CHECK(no_synth.size() == 2 * (n - 1));
}

TEST_CASE("info_nce matches the straight-line reference") {
  Rng rng(69);
  const int d = 4;
  const ProjectionHead head = random_head(d, 70);
  const testutil::ref::HeadWeights hw = extract(head);
  const Tensor u = Tensor::uniform(1, d, -1.0, 1.0, rng);
  const Tensor v = Tensor::uniform(1, d, -1.0, 1.0, rng);
  const Tensor rows = Tensor::uniform(6, d, -1.0, 1.0, rng);
  NegativeBank bank;
  bank.rows = rows;
  bank.n_intra = 6;
  for (const double tau : {0.2, 0.5, 1.0}) {
    CAPTURE(tau);
    const Tensor loss = info_nce(u, v, bank, head, tau);
    std::vector<std::vector<double>> bvecs;
    for (int r = 0; r < 6; ++r) bvecs.push_back(row_of(rows, r));
    const double want = testutil::ref::info_nce(hw, row_of(u, 0), row_of(v, 0), bvecs, tau);
    CHECK(loss.value() == doctest::Approx(want).epsilon(1e-10));
  }
  CHECK_THROWS_AS(info_nce(rows, v, bank, head, 0.5), std::runtime_error);
  CHECK_THROWS_AS(info_nce(u, v, bank, head, 0.0), std::runtime_error);
}

TEST_CASE("uniform similarity gives exactly log(B + 1)") {
  // Identical non-negative rows and an identity head: every critic value is 1,
  // so the loss reduces to log(B + 1) regardless of tau.
  const int d = 3;
  const ProjectionHead head = identity_head(d);
  const Tensor u = Tensor::from_data(1, d, {1.0, 2.0, 0.5});
  const Tensor v = Tensor::from_data(1, d, {2.0, 4.0, 1.0});  // same direction
  const int b_rows = 7;
  std::vector<double> bank_data;
  for (int r = 0; r < b_rows; ++r) {
    for (const double x : {3.0, 6.0, 1.5}) bank_data.push_back(x);
  }
  NegativeBank bank;
  bank.rows = Tensor::from_data(b_rows, d, bank_data);
  bank.n_intra = b_rows;
  for (const double tau : {0.3, 0.5, 2.0}) {
    CAPTURE(tau);
    const Tensor loss = info_nce(u, v, bank, head, tau);
    CHECK(std::abs(loss.value() - std::log(b_rows + 1.0)) < 1e-10);
  }
}

TEST_CASE("raising one negative's similarity strictly increases the loss") {
  const int d = 2;
  const ProjectionHead head = identity_head(d);
  const Tensor u = Tensor::from_data(1, d, {1.0, 0.0});
  const Tensor v = Tensor::from_data(1, d, {1.0, 0.0});
  NegativeBank far_bank, near_bank;
  far_bank.rows = Tensor::from_data(1, d, {0.0, 1.0});  // cos = 0
  far_bank.n_intra = 1;
  near_bank.rows = Tensor::from_data(1, d, {1.0, 1.0});  // cos = sqrt(1/2)
  near_bank.n_intra = 1;
  const double lo = info_nce(u, v, far_bank, head, 0.5).value();
  const double hi = info_nce(u, v, near_bank, head, 0.5).value();
  CHECK(hi > lo + 1e-6);
}

TEST_CASE("info_nce gradients match finite differences") {
  Rng rng(71);
  const int d = 3;
  ProjectionHead head = random_head(d, 72);
  Tensor u = Tensor::uniform(1, d, -1.0, 1.0, rng, true);
  Tensor v = Tensor::uniform(1, d, -1.0, 1.0, rng, true);
  Tensor rows = Tensor::uniform(4, d, -1.0, 1.0, rng, true);
  const auto forward = [&] {
    NegativeBank bank;
    bank.rows = rows;
    bank.n_intra = 4;
    return info_nce(u, v, bank, head, 0.5);
  };
  std::vector<Tensor> params = head.params();
  params.push_back(u);
  params.push_back(v);
  params.push_back(rows);
  CHECK(testutil::fd_check(forward, params) < 1e-6);
}

TEST_CASE("resolve_pools honors variant and pool settings") {
  Rng rng(73);
  std::vector<SemanticView> views = {{"v0", testutil::random_connected(7, 4, rng)},
                                     {"v1", testutil::random_connected(7, 5, rng)}};
  std::vector<Tensor> embs = {Tensor::uniform(7, 3, -1.0, 1.0, rng),
                              Tensor::uniform(7, 3, -1.0, 1.0, rng)};
  const StructureIndex ppr_idx = build_structure_index(views, HardnessVariant::Ppr, 3, {}, 3);
  ContrastConfig cfg;
  cfg.variant = HardnessVariant::Ppr;
  const auto pools = resolve_pools(embs, ppr_idx, cfg, 2);
  REQUIRE(pools.size() == 2);
  CHECK(pools[0] == ppr_idx.views[0].candidates);
  CHECK(pools[1] == ppr_idx.views[1].candidates);

  // Sem pools are ranked by the current embeddings.
  const StructureIndex sem_idx = build_structure_index(views, HardnessVariant::Sem, 3, {}, 3);
  cfg.variant = HardnessVariant::Sem;
  const auto sem_pools = resolve_pools(embs, sem_idx, cfg, 2);
  for (int p = 0; p < 2; ++p) {
    const auto want = build_candidates(
        [&, p](int i, int j) { return hardness(embs[p].data(), 3, i, j); }, 7, 3);
    CHECK(sem_pools[p] == want);
  }

  // All-negatives pool and m == 0 both skip candidate lists entirely.
  cfg.variant = HardnessVariant::Ppr;
  cfg.pool = MixupPool::AllNegatives;
  CHECK(resolve_pools(embs, ppr_idx, cfg, 2)[0].empty());
  cfg.pool = MixupPool::Candidates;
  CHECK(resolve_pools(embs, ppr_idx, cfg, 0)[0].empty());

  // Variant mismatch between config and prebuilt index is an error.
  cfg.variant = HardnessVariant::Pe;
  CHECK_THROWS_AS(resolve_pools(embs, ppr_idx, cfg, 2), std::runtime_error);
}

TEST_CASE("matrix objective equals the per-anchor assembly in value and gradient") {
  Rng rng(74);
  const int n = 6, d = 4, m = 3;
  const double tau = 0.5;
  std::vector<SemanticView> views = {{"v0", testutil::random_connected(n, 4, rng)},
                                     {"v1", testutil::random_connected(n, 6, rng)}};
  const StructureIndex index = build_structure_index(views, HardnessVariant::Ppr, 3, {}, 3);
  ContrastConfig cfg;
  cfg.m_synth = m;

  ProjectionHead head = random_head(d, 75);
  std::vector<Tensor> view_embs = {Tensor::uniform(n, d, -1.0, 1.0, rng, true),
                                   Tensor::uniform(n, d, -1.0, 1.0, rng, true)};
  Tensor agg_emb = Tensor::uniform(n, d, -1.0, 1.0, rng, true);

  // Shared draws so both routes price the same synthesized negatives.
  Rng draw_rng(76);
  const auto pools = resolve_pools(view_embs, index, cfg, m);
  std::vector<std::vector<std::vector<MixupDraw>>> draws;
  for (int p = 0; p < 2; ++p) draws.push_back(draw_all_mixups(n, m, pools[p], 1.0, draw_rng));

  std::vector<Tensor> leaves = head.params();
  leaves.push_back(view_embs[0]);
  leaves.push_back(view_embs[1]);
  leaves.push_back(agg_emb);

  double value_a;
  std::vector<std::vector<double>> grads_a;
  {
    Tape tape;
    const Tensor loss = objective_from_draws(view_embs, agg_emb, draws, head, tau);
    value_a = loss.value();
    for (const Tensor& t : leaves) t.zero_grad();
    tape.backward(loss);
    for (const Tensor& t : leaves) grads_a.emplace_back(t.grad(), t.grad() + t.size());
  }

  double value_b;
  std::vector<std::vector<double>> grads_b;
  {
    Tape tape;
    Tensor total;
    for (int p = 0; p < 2; ++p) {
      const Tensor synth = synthesize_negatives(view_embs[p], draws[p]);
      Tensor view_sum;
      for (int i = 0; i < n; ++i) {
        std::vector<int> mine(m);
        for (int t = 0; t < m; ++t) mine[t] = i * m + t;
        const Tensor synth_i = gather_rows(synth, mine);
        const Tensor hp_i = gather_rows(view_embs[p], {i});
        const Tensor ha_i = gather_rows(agg_emb, {i});
        const NegativeBank fwd = assemble_bank(i, view_embs[p], agg_emb, synth_i);
        const NegativeBank rev = assemble_bank_reverse(i, view_embs[p], agg_emb, synth_i);
        CHECK(fwd.size() == 2 * (n - 1) + m);
        const Tensor pair = scale(add(info_nce(hp_i, ha_i, fwd, head, tau),
                                      info_nce(ha_i, hp_i, rev, head, tau)),
                                  0.5);
        view_sum = (i == 0) ? pair : add(view_sum, pair);
      }
      const Tensor view_loss = scale(view_sum, 1.0 / n);
      total = (p == 0) ? view_loss : add(total, view_loss);
    }
    const Tensor loss = scale(total, 0.5);
    value_b = loss.value();
    for (const Tensor& t : leaves) t.zero_grad();
    tape.backward(loss);
    for (const Tensor& t : leaves) grads_b.emplace_back(t.grad(), t.grad() + t.size());
  }

  CHECK(std::abs(value_a - value_b) < 1e-10);
  double worst = 0.0;
  for (std::size_t i = 0; i < grads_a.size(); ++i) {
    for (std::size_t k = 0; k < grads_a[i].size(); ++k) {
      const double diff = std::abs(grads_a[i][k] - grads_b[i][k]);
      const double mag = std::max({1.0, std::abs(grads_a[i][k]), std::abs(grads_b[i][k])});
      worst = std::max(worst, diff / mag);
    }
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("total objective is deterministic in the mixup stream") {
  Rng rng(77);
  const int n = 6, d = 4;
  std::vector<SemanticView> views = {{"v0", testutil::random_connected(n, 4, rng)}};
  const StructureIndex index = build_structure_index(views, HardnessVariant::Ppr, 3, {}, 3);
  ContrastConfig cfg;
  cfg.m_synth = 2;
  const ProjectionHead head = random_head(d, 78);
  std::vector<Tensor> embs = {Tensor::uniform(n, d, -1.0, 1.0, rng)};
  const Tensor agg = Tensor::uniform(n, d, -1.0, 1.0, rng);
  Rng m1(80), m2(80), m3(81);
  const double l1 = total_objective(embs, agg, index, cfg, head, m1).value();
  const double l2 = total_objective(embs, agg, index, cfg, head, m2).value();
  const double l3 = total_objective(embs, agg, index, cfg, head, m3).value();
  CHECK(l1 == l2);
  CHECK(l1 != l3);  // different mixup endpoints almost surely move the loss
}

TEST_CASE("disabled synthesis leaves the mixup stream untouched") {
  Rng rng(82);
  const int n = 5, d = 3;
  std::vector<SemanticView> views = {{"v0", testutil::random_connected(n, 3, rng)}};
  const StructureIndex none_idx = build_structure_index(views, HardnessVariant::None, 2, {}, 2);
  ContrastConfig cfg;
  cfg.variant = HardnessVariant::None;
  const ProjectionHead head = random_head(d, 83);
  std::vector<Tensor> embs = {Tensor::uniform(n, d, -1.0, 1.0, rng)};
  const Tensor agg = Tensor::uniform(n, d, -1.0, 1.0, rng);
  Rng m1(84), m2(84);
  const double loss = total_objective(embs, agg, none_idx, cfg, head, m1).value();
  CHECK(std::isfinite(loss));
  CHECK(m1.next_u64() == m2.next_u64());
}

}  // TEST_SUITE
