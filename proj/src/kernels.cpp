#include "hgcl/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hgcl::kernels {

namespace {
std::atomic<Mode> g_mode{Mode::Parallel};
}

void set_mode(Mode m) { g_mode.store(m); }
Mode mode() { return g_mode.load(); }

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

Csr to_csr(const std::vector<std::vector<int>>& adj) {
  Csr csr;
  csr.n = static_cast<int>(adj.size());
  csr.offsets.resize(adj.size() + 1, 0);
  for (std::size_t i = 0; i < adj.size(); ++i) {
    csr.offsets[i + 1] = csr.offsets[i] + static_cast<int>(adj[i].size());
  }
  csr.cols.reserve(csr.offsets.back());
  for (const auto& row : adj) csr.cols.insert(csr.cols.end(), row.begin(), row.end());
  return csr;
}

// ---------------------------------------------------------------------------
// shared row bodies
// ---------------------------------------------------------------------------
namespace {

inline void nn_row(const double* a, const double* b, double* c, int i, int k, int n, bool acc) {
  double* crow = c + static_cast<std::size_t>(i) * n;
  if (!acc) std::memset(crow, 0, sizeof(double) * n);
  const double* arow = a + static_cast<std::size_t>(i) * k;
  for (int kk = 0; kk < k; ++kk) {
    const double av = arow[kk];
    if (av == 0.0) continue;
    const double* brow = b + static_cast<std::size_t>(kk) * n;
    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void nt_row(const double* a, const double* b, double* c, int i, int k, int n, bool acc) {
  double* crow = c + static_cast<std::size_t>(i) * n;
  const double* arow = a + static_cast<std::size_t>(i) * k;
  for (int j = 0; j < n; ++j) {
    const double* brow = b + static_cast<std::size_t>(j) * k;
    double s = 0.0;
    for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
    crow[j] = acc ? crow[j] + s : s;
  }
}

inline void tn_row(const double* a, const double* b, double* c, int i, int m, int k, int n, bool acc) {
  // c[i, :] = sum_kk a[kk, i] * b[kk, :]
  double* crow = c + static_cast<std::size_t>(i) * n;
  if (!acc) std::memset(crow, 0, sizeof(double) * n);
  for (int kk = 0; kk < k; ++kk) {
    const double av = a[static_cast<std::size_t>(kk) * m + i];
    if (av == 0.0) continue;
    const double* brow = b + static_cast<std::size_t>(kk) * n;
    for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

// One power-iteration solve for a single source node. Row v of `out` holds
// the result. inv_deg[j] = 1 / |N(j)|.
inline int ppr_source(const Csr& adj, const std::vector<double>& inv_deg, double c, double tol,
                      int max_iter, int v, double* out_row, bool& converged) {
  const int n = adj.n;
  std::vector<double> s(n, 0.0), next(n);
  s[v] = 1.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    next[v] = c;
    for (int j = 0; j < n; ++j) {
      const double w = (1.0 - c) * s[j] * inv_deg[j];
      if (w == 0.0) continue;
      for (int e = adj.offsets[j]; e < adj.offsets[j + 1]; ++e) next[adj.cols[e]] += w;
    }
    double diff = 0.0;
    for (int i = 0; i < n; ++i) diff += std::abs(next[i] - s[i]);
    s.swap(next);
    if (diff < tol) break;
  }
  converged = it < max_iter;
  std::copy(s.begin(), s.end(), out_row);
  return std::min(it + 1, max_iter);
}

std::vector<double> inverse_degrees(const Csr& adj) {
  std::vector<double> inv(adj.n);
  for (int i = 0; i < adj.n; ++i) {
    const int deg = adj.offsets[i + 1] - adj.offsets[i];
    if (deg == 0) throw std::runtime_error("ppr: node without out-neighbors");
    inv[i] = 1.0 / deg;
  }
  return inv;
}

inline int knn_vote(const double* emb, int n, int d, const std::vector<int>& train_ids,
                    const std::vector<int>& labels, int n_classes, int k, int t,
                    std::vector<std::pair<double, int>>& scratch) {
  scratch.clear();
  const double* te = emb + static_cast<std::size_t>(t) * d;
  for (int id : train_ids) {
    const double* tr = emb + static_cast<std::size_t>(id) * d;
    double dist = 0.0;
    for (int j = 0; j < d; ++j) {
      const double diff = te[j] - tr[j];
      dist += diff * diff;
    }
    scratch.emplace_back(dist, id);
  }
  const int keff = std::min<int>(k, static_cast<int>(scratch.size()));
  std::partial_sort(scratch.begin(), scratch.begin() + keff, scratch.end());
  std::vector<int> votes(n_classes, 0);
  for (int i = 0; i < keff; ++i) votes[labels[scratch[i].second]]++;
  int best = 0;
  for (int cl = 1; cl < n_classes; ++cl) {
    if (votes[cl] > votes[best]) best = cl;  // ties -> smallest label id
  }
  (void)n;
  return best;
}

inline std::vector<int> chain_from(const std::vector<Csr>& steps, int start,
                                   const std::vector<int>& layer_counts, bool add_self_loop) {
  std::vector<int> frontier{start};
  std::vector<int> next;
  for (std::size_t sidx = 0; sidx < steps.size(); ++sidx) {
    const Csr& step = steps[sidx];
    std::vector<char> seen(layer_counts[sidx + 1], 0);
    next.clear();
    for (int u : frontier) {
      for (int e = step.offsets[u]; e < step.offsets[u + 1]; ++e) {
        const int w = step.cols[e];
        if (!seen[w]) {
          seen[w] = 1;
          next.push_back(w);
        }
      }
    }
    frontier.swap(next);
  }
  // The identity only exists on the min(start, end) square of the product.
  if (add_self_loop && start < layer_counts.back()) frontier.push_back(start);
  std::sort(frontier.begin(), frontier.end());
  frontier.erase(std::unique(frontier.begin(), frontier.end()), frontier.end());
  return frontier;
}

std::vector<int> chain_layer_counts(const std::vector<Csr>& steps, int start_count, int end_count) {
  std::vector<int> counts(steps.size() + 1);
  counts[0] = start_count;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].n != counts[i]) throw std::runtime_error("compose_chain: step size mismatch");
    counts[i + 1] = (i + 1 == steps.size()) ? end_count : steps[i + 1].n;
    for (int cidx : steps[i].cols) {
      if (cidx < 0 || cidx >= counts[i + 1]) throw std::runtime_error("compose_chain: column out of range");
    }
  }
  return counts;
}

}  // namespace

// ---------------------------------------------------------------------------
// serial reference
// ---------------------------------------------------------------------------
namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) nn_row(a, b, c, i, k, n, acc);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) nt_row(a, b, c, i, k, n, acc);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  for (int i = 0; i < m; ++i) tn_row(a, b, c, i, m, k, n, acc);
}

int ppr_all(const Csr& adj, double c, double tol, int max_iter, double* out) {
  const auto inv_deg = inverse_degrees(adj);
  int max_used = 0;
  for (int v = 0; v < adj.n; ++v) {
    bool ok = false;
    const int used =
        ppr_source(adj, inv_deg, c, tol, max_iter, v, out + static_cast<std::size_t>(v) * adj.n, ok);
    if (!ok) throw std::runtime_error("ppr: power iteration did not converge");
    max_used = std::max(max_used, used);
  }
  return max_used;
}

void knn_predict(const double* emb, int n, int d, const std::vector<int>& train_ids,
                 const std::vector<int>& labels, int n_classes, int k,
                 const std::vector<int>& test_ids, std::vector<int>& pred) {
  pred.resize(test_ids.size());
  std::vector<std::pair<double, int>> scratch;
  for (std::size_t t = 0; t < test_ids.size(); ++t) {
    pred[t] = knn_vote(emb, n, d, train_ids, labels, n_classes, k, test_ids[t], scratch);
  }
}

std::vector<std::vector<int>> compose_chain(const std::vector<Csr>& steps, int start_count,
                                            int end_count, bool add_self_loops) {
  const auto counts = chain_layer_counts(steps, start_count, end_count);
  std::vector<std::vector<int>> result(start_count);
  for (int v = 0; v < start_count; ++v) {
    result[v] = chain_from(steps, v, counts, add_self_loops);
  }
  return result;
}

}  // namespace serial

// ---------------------------------------------------------------------------
// OpenMP kernels
// ---------------------------------------------------------------------------
namespace parallel {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) nn_row(a, b, c, i, k, n, acc);
}

void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) nt_row(a, b, c, i, k, n, acc);
}

void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) tn_row(a, b, c, i, m, k, n, acc);
}

int ppr_all(const Csr& adj, double c, double tol, int max_iter, double* out) {
  const auto inv_deg = inverse_degrees(adj);
  std::vector<int> used(adj.n, 0);
  std::vector<char> ok(adj.n, 0);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < adj.n; ++v) {
    bool conv = false;
    used[v] =
        ppr_source(adj, inv_deg, c, tol, max_iter, v, out + static_cast<std::size_t>(v) * adj.n, conv);
    ok[v] = conv ? 1 : 0;
  }
  for (int v = 0; v < adj.n; ++v) {
    if (!ok[v]) throw std::runtime_error("ppr: power iteration did not converge");
  }
  return *std::max_element(used.begin(), used.end());
}

void knn_predict(const double* emb, int n, int d, const std::vector<int>& train_ids,
                 const std::vector<int>& labels, int n_classes, int k,
                 const std::vector<int>& test_ids, std::vector<int>& pred) {
  pred.resize(test_ids.size());
  const int nt = static_cast<int>(test_ids.size());
#pragma omp parallel
  {
    std::vector<std::pair<double, int>> scratch;
#pragma omp for schedule(static)
    for (int t = 0; t < nt; ++t) {
      pred[t] = knn_vote(emb, n, d, train_ids, labels, n_classes, k, test_ids[t], scratch);
    }
  }
}

std::vector<std::vector<int>> compose_chain(const std::vector<Csr>& steps, int start_count,
                                            int end_count, bool add_self_loops) {
  const auto counts = chain_layer_counts(steps, start_count, end_count);
  std::vector<std::vector<int>> result(start_count);
#pragma omp parallel for schedule(dynamic)
  for (int v = 0; v < start_count; ++v) {
    result[v] = chain_from(steps, v, counts, add_self_loops);
  }
  return result;
}

}  // namespace parallel

// ---------------------------------------------------------------------------
// dispatch
// ---------------------------------------------------------------------------
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  mode() == Mode::Parallel ? parallel::matmul_nn(a, b, c, m, k, n, acc)
                           : serial::matmul_nn(a, b, c, m, k, n, acc);
}
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  mode() == Mode::Parallel ? parallel::matmul_nt(a, b, c, m, k, n, acc)
                           : serial::matmul_nt(a, b, c, m, k, n, acc);
}
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc) {
  mode() == Mode::Parallel ? parallel::matmul_tn(a, b, c, m, k, n, acc)
                           : serial::matmul_tn(a, b, c, m, k, n, acc);
}
int ppr_all(const Csr& adj, double c, double tol, int max_iter, double* out) {
  return mode() == Mode::Parallel ? parallel::ppr_all(adj, c, tol, max_iter, out)
                                  : serial::ppr_all(adj, c, tol, max_iter, out);
}
void knn_predict(const double* emb, int n, int d, const std::vector<int>& train_ids,
                 const std::vector<int>& labels, int n_classes, int k,
                 const std::vector<int>& test_ids, std::vector<int>& pred) {
  mode() == Mode::Parallel
      ? parallel::knn_predict(emb, n, d, train_ids, labels, n_classes, k, test_ids, pred)
      : serial::knn_predict(emb, n, d, train_ids, labels, n_classes, k, test_ids, pred);
}
std::vector<std::vector<int>> compose_chain(const std::vector<Csr>& steps, int start_count,
                                            int end_count, bool add_self_loops) {
  return mode() == Mode::Parallel
             ? parallel::compose_chain(steps, start_count, end_count, add_self_loops)
             : serial::compose_chain(steps, start_count, end_count, add_self_loops);
}

}  // namespace hgcl::kernels
