// Times the OpenMP kernels against their serial reference implementations and
// checks that both produce identical results while it is at it.
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include <omp.h>

#include "hgcl/kernels.hpp"
#include "hgcl/rng.hpp"

namespace {

using hgcl::kernels::Csr;

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm-up
  const double t0 = omp_get_wtime();
  for (int r = 0; r < reps; ++r) fn();
  return (omp_get_wtime() - t0) / reps;
}

void report(const char* name, double serial_s, double parallel_s, bool equal) {
  std::printf("%-24s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   results %s\n", name,
              serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
              equal ? "identical" : "DIFFER");
}

Csr random_graph(int n, int avg_deg, hgcl::Rng& rng) {
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    adj[i].push_back(i);  // guarantee out-neighbors
    for (int e = 0; e < avg_deg; ++e) adj[i].push_back(rng.uniform_int(n));
  }
  return hgcl::kernels::to_csr(adj);
}

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace

int main() {
  hgcl::Rng rng = hgcl::derive_rng(7, hgcl::RngStream::Graph);
  std::printf("threads available: %d\n\n", hgcl::kernels::max_threads());

  {  // matmul
    const int m = 256, k = 256, n = 256;
    std::vector<double> a(m * k), b(k * n), cs(m * n), cp(m * n);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    const double ts = time_of([&] { hgcl::kernels::serial::matmul_nn(a.data(), b.data(), cs.data(), m, k, n, false); }, 3);
    const double tp = time_of([&] { hgcl::kernels::parallel::matmul_nn(a.data(), b.data(), cp.data(), m, k, n, false); }, 3);
    report("matmul 256^3", ts, tp, same(cs, cp));
  }

  {  // personalized pagerank, all sources
    const int n = 400;
    const Csr g = random_graph(n, 8, rng);
    std::vector<double> ss(static_cast<std::size_t>(n) * n), sp(ss.size());
    const double ts = time_of([&] { hgcl::kernels::serial::ppr_all(g, 0.15, 1e-10, 10000, ss.data()); }, 1);
    const double tp = time_of([&] { hgcl::kernels::parallel::ppr_all(g, 0.15, 1e-10, 10000, sp.data()); }, 1);
    report("ppr 400 sources", ts, tp, same(ss, sp));
  }

  {  // kNN prediction
    const int n = 2000, d = 64, k = 5, classes = 4;
    std::vector<double> emb(static_cast<std::size_t>(n) * d);
    for (double& v : emb) v = rng.normal();
    std::vector<int> labels(n), train, test;
    for (int i = 0; i < n; ++i) {
      labels[i] = rng.uniform_int(classes);
      (i % 5 == 0 ? train : test).push_back(i);
    }
    std::vector<int> ps, pp;
    const double ts = time_of([&] { hgcl::kernels::serial::knn_predict(emb.data(), n, d, train, labels, classes, k, test, ps); }, 1);
    const double tp = time_of([&] { hgcl::kernels::parallel::knn_predict(emb.data(), n, d, train, labels, classes, k, test, pp); }, 1);
    report("knn 2000x64", ts, tp, ps == pp);
  }

  {  // metapath composition
    const int n = 1500;
    const Csr a = random_graph(n, 12, rng);
    const Csr b = random_graph(n, 12, rng);
    std::vector<std::vector<int>> rs, rp;
    const double ts = time_of([&] { rs = hgcl::kernels::serial::compose_chain({a, b}, n, n, true); }, 1);
    const double tp = time_of([&] { rp = hgcl::kernels::parallel::compose_chain({a, b}, n, n, true); }, 1);
    report("compose 1500 nodes", ts, tp, rs == rp);
  }

  return 0;
}
