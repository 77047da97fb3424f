#include "hgcl/structure_index.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace hgcl {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error("index: " + msg); }

}  // namespace

std::string to_string(HardnessVariant v) {
  switch (v) {
    case HardnessVariant::None: return "none";
    case HardnessVariant::Sem: return "sem";
    case HardnessVariant::Pe: return "pe";
    case HardnessVariant::Ppr: return "ppr";
  }
  fail("unknown variant");
}

HardnessVariant variant_from_string(const std::string& s) {
  if (s == "none") return HardnessVariant::None;
  if (s == "sem") return HardnessVariant::Sem;
  if (s == "pe") return HardnessVariant::Pe;
  if (s == "ppr") return HardnessVariant::Ppr;
  fail("unknown variant '" + s + "'");
}

PprIndex ppr(const kernels::Csr& adj, const PprParams& p) {
  if (p.c <= 0.0 || p.c >= 1.0) fail("ppr restart probability must be in (0,1)");
  if (p.tol <= 0.0 || p.max_iter < 1) fail("ppr tolerance and max_iter must be positive");
  PprIndex out;
  out.n = adj.n;
  out.scores.assign(static_cast<std::size_t>(adj.n) * adj.n, 0.0);
  out.iterations = kernels::ppr_all(adj, p.c, p.tol, p.max_iter, out.scores.data());

  // Worst fixed-point defect ||(1-c) P^T s + c e_v - s||_1 over sources.
  std::vector<double> inv_deg(adj.n);
  for (int j = 0; j < adj.n; ++j) {
    const int deg = adj.offsets[j + 1] - adj.offsets[j];
    if (deg == 0) fail("ppr: node without out-neighbors");
    inv_deg[j] = 1.0 / deg;
  }
  std::vector<double> t(adj.n);
  for (int v = 0; v < adj.n; ++v) {
    const double* s = out.scores.data() + static_cast<std::size_t>(v) * adj.n;
    std::fill(t.begin(), t.end(), 0.0);
    t[v] = p.c;
    for (int j = 0; j < adj.n; ++j) {
      const double push = (1.0 - p.c) * s[j] * inv_deg[j];
      for (int e = adj.offsets[j]; e < adj.offsets[j + 1]; ++e) t[adj.cols[e]] += push;
    }
    double defect = 0.0;
    for (int u = 0; u < adj.n; ++u) defect += std::abs(t[u] - s[u]);
    out.residual_l1 = std::max(out.residual_l1, defect);
  }
  return out;
}

double LaplacianPe::dot(int i, int j) const {
  const double* a = vectors.data() + static_cast<std::size_t>(i) * k;
  const double* b = vectors.data() + static_cast<std::size_t>(j) * k;
  double s = 0.0;
  for (int l = 0; l < k; ++l) s += a[l] * b[l];
  return s;
}

LaplacianPe laplacian_pe(const kernels::Csr& adj, int k) {
  if (k < 1) fail("pe: need at least one eigenvector");
  const int n = adj.n;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int e = adj.offsets[i]; e < adj.offsets[i + 1]; ++e) {
      a(i, adj.cols[e]) = 1.0;
      a(adj.cols[e], i) = 1.0;  // symmetrize
    }
  }
  Eigen::VectorXd deg = a.rowwise().sum();
  for (int i = 0; i < n; ++i) {
    if (deg(i) <= 0.0) fail("pe: isolated node");
  }
  Eigen::VectorXd dinv_sqrt = deg.array().rsqrt();
  Eigen::MatrixXd lap =
      Eigen::MatrixXd::Identity(n, n) - dinv_sqrt.asDiagonal() * a * dinv_sqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) fail("pe: eigensolver failed");
  const Eigen::VectorXd& vals = solver.eigenvalues();  // ascending

  int first = 0;  // skip the trivial eigenvectors (one per connected component)
  while (first < n && vals(first) < 1e-8) ++first;
  if (first == n) fail("pe: graph has no non-trivial spectrum");
  const int kept = std::min(k, n - first);

  LaplacianPe out;
  out.n = n;
  out.k = kept;
  out.vectors.assign(static_cast<std::size_t>(n) * kept, 0.0);
  out.eigenvalues.resize(kept);
  for (int l = 0; l < kept; ++l) {
    out.eigenvalues[l] = vals(first + l);
    Eigen::VectorXd col = solver.eigenvectors().col(first + l);
    // Canonical sign: the first entry of largest magnitude is positive. The
    // slack keeps the choice stable when symmetric entries tie up to solver
    // noise (e.g. the +/-r pair of a path eigenvector).
    double maxm = 0.0;
    for (int i = 0; i < n; ++i) maxm = std::max(maxm, std::abs(col(i)));
    int arg = 0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(col(i)) >= maxm - 1e-12) {
        arg = i;
        break;
      }
    }
    if (col(arg) < 0.0) col = -col;
    for (int i = 0; i < n; ++i) out.vectors[static_cast<std::size_t>(i) * kept + l] = col(i);
  }
  return out;
}

double hardness(const PprIndex& index, int anchor, int j) {
  if (anchor == j) fail("hardness of an anchor with itself is undefined");
  return index.score(anchor, j);
}

double hardness(const LaplacianPe& pe, int anchor, int j) {
  if (anchor == j) fail("hardness of an anchor with itself is undefined");
  return pe.dot(anchor, j);
}

double hardness(const double* emb, int d, int anchor, int j) {
  if (anchor == j) fail("hardness of an anchor with itself is undefined");
  const double* a = emb + static_cast<std::size_t>(anchor) * d;
  const double* b = emb + static_cast<std::size_t>(j) * d;
  double s = 0.0;
  for (int l = 0; l < d; ++l) s += a[l] * b[l];
  return s;
}

std::vector<int> top_candidates(const std::vector<double>& scores, int anchor, int top_t) {
  const int n = static_cast<int>(scores.size());
  if (top_t < 1) fail("top_t must be positive");
  if (top_t > n - 1) fail("top_t exceeds the number of available candidates");
  std::vector<int> ids;
  ids.reserve(n - 1);
  for (int j = 0; j < n; ++j) {
    if (j != anchor) ids.push_back(j);
  }
  std::partial_sort(ids.begin(), ids.begin() + top_t, ids.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  ids.resize(top_t);
  return ids;
}

std::vector<std::vector<int>> build_candidates(const std::function<double(int, int)>& score,
                                               int n, int top_t) {
  std::vector<std::vector<int>> out(n);
  std::vector<double> row(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) row[j] = (j == i) ? 0.0 : score(i, j);
    out[i] = top_candidates(row, i, top_t);
  }
  return out;
}

int default_top_t(int n) {
  const int frac = static_cast<int>(std::ceil(0.05 * n));
  return std::max(8, frac);
}

StructureIndex build_structure_index(const std::vector<SemanticView>& views, HardnessVariant v,
                                     int top_t, const PprParams& ppr_params, int pe_k) {
  if (views.empty()) fail("no views");
  const int n = views[0].adj.n;
  if (top_t < 1 || top_t > n - 1) fail("top_t must be in [1, n-1]");
  StructureIndex index;
  index.variant = v;
  index.top_t = top_t;
  for (const SemanticView& view : views) {
    if (view.adj.n != n) fail("views disagree on node count");
    ViewStructure vs;
    vs.view = view.name;
    if (v == HardnessVariant::Ppr) {
      vs.ppr = ppr(view.adj, ppr_params);
      vs.candidates =
          build_candidates([&](int i, int j) { return hardness(vs.ppr, i, j); }, n, top_t);
    } else if (v == HardnessVariant::Pe) {
      vs.pe = laplacian_pe(view.adj, pe_k);
      vs.candidates =
          build_candidates([&](int i, int j) { return hardness(vs.pe, i, j); }, n, top_t);
    }
    index.views.push_back(std::move(vs));
  }
  return index;
}

}  // namespace hgcl
