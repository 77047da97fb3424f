#pragma once

#include <vector>

namespace hgcl::kernels {

/// Execution mode for the numeric kernels. Both modes produce bit-identical
/// results: every output element is written by exactly one iteration, and the
/// per-element accumulation order is fixed.
enum class Mode { Serial, Parallel };

void set_mode(Mode m);
Mode mode();
int max_threads();

/// Compressed adjacency. `offsets` has n+1 entries; row i's neighbors are
/// cols[offsets[i] .. offsets[i+1]).
struct Csr {
  int n = 0;
  std::vector<int> offsets;
  std::vector<int> cols;
};

Csr to_csr(const std::vector<std::vector<int>>& adj);

// Reference implementations, kept serial on purpose so the parallel kernels
// have something independent to be checked against.
namespace serial {

// c[m x n] = a[m x k] * b[k x n]           (nn)
// c[m x n] = a[m x k] * b[n x k]^T         (nt)
// c[m x n] = a[k x m]^T * b[k x n]         (tn)
// With acc = true the product is added onto c instead of overwriting it.
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);

/// Personalized PageRank for every source node of a view.
/// `out` is n x n row-major, row v = the PPR vector of source v.
/// Iterates s <- (1-c) * P^T s + c * e_v with P the row-stochastic walk
/// matrix, until the L1 change drops below tol. Returns the largest iteration
/// count used; throws after max_iter without convergence.
int ppr_all(const Csr& adj, double c, double tol, int max_iter, double* out);

/// k-nearest-neighbor vote on embeddings (Euclidean). Neighbor ties break on
/// node id, vote ties on the smallest label id.
void knn_predict(const double* emb, int n, int d, const std::vector<int>& train_ids,
                 const std::vector<int>& labels, int n_classes, int k,
                 const std::vector<int>& test_ids, std::vector<int>& pred);

/// Boolean composition of a chain of typed adjacency steps. Returns, per
/// start node, the sorted set of end nodes reachable by following one edge
/// from each step in order. Optionally adds a self-loop to every start node.
std::vector<std::vector<int>> compose_chain(const std::vector<Csr>& steps, int start_count,
                                            int end_count, bool add_self_loops);

}  // namespace serial

namespace parallel {

void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
int ppr_all(const Csr& adj, double c, double tol, int max_iter, double* out);
void knn_predict(const double* emb, int n, int d, const std::vector<int>& train_ids,
                 const std::vector<int>& labels, int n_classes, int k,
                 const std::vector<int>& test_ids, std::vector<int>& pred);
std::vector<std::vector<int>> compose_chain(const std::vector<Csr>& steps, int start_count,
                                            int end_count, bool add_self_loops);

}  // namespace parallel

// Dispatchers honoring mode().
void matmul_nn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_nt(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
void matmul_tn(const double* a, const double* b, double* c, int m, int k, int n, bool acc = false);
int ppr_all(const Csr& adj, double c, double tol, int max_iter, double* out);
void knn_predict(const double* emb, int n, int d, const std::vector<int>& train_ids,
                 const std::vector<int>& labels, int n_classes, int k,
                 const std::vector<int>& test_ids, std::vector<int>& pred);
std::vector<std::vector<int>> compose_chain(const std::vector<Csr>& steps, int start_count,
                                            int end_count, bool add_self_loops);

}  // namespace hgcl::kernels
