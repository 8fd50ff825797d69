#pragma once

// Independent reference implementations used only by tests. Everything here
// is deliberately brute-force and kept separate from the library code paths
// it checks.

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <vector>

#include "causalsem/rng.hpp"
#include "causalsem/tensor.hpp"

namespace oracles {

using causalsem::Matrix;

/// Plain truncated power series for e^A (no scaling); fine for small norms.
inline Matrix series_expm(const Matrix& A, int terms = 60) {
  const Eigen::Index V = A.rows();
  Matrix X = Matrix::Identity(V, V);
  Matrix term = Matrix::Identity(V, V);
  for (int k = 1; k <= terms; ++k) {
    term = (term * A / static_cast<double>(k)).eval();
    X += term;
  }
  return X;
}

/// Three-color DFS cycle detection on a binarized adjacency (entry
/// (i,j) >= 0.5 means edge j -> i).
inline bool has_cycle_impl(const Matrix& M, int u, std::vector<int>& color) {
  color[u] = 1;
  const int V = static_cast<int>(M.rows());
  for (int child = 0; child < V; ++child) {
    if (M(child, u) < 0.5) continue;
    if (color[child] == 1) return true;
    if (color[child] == 0 && has_cycle_impl(M, child, color)) return true;
  }
  color[u] = 2;
  return false;
}

inline bool has_cycle(const Matrix& M) {
  const int V = static_cast<int>(M.rows());
  std::vector<int> color(V, 0);
  for (int u = 0; u < V; ++u)
    if (color[u] == 0 && has_cycle_impl(M, u, color)) return true;
  return false;
}

/// BFS edit distance over {insert, delete, reverse} single-edge operations.
/// Exponential state space; V <= 3 only.
inline int shd_bfs(const Matrix& from, const Matrix& to) {
  const int V = static_cast<int>(from.rows());
  auto encode = [V](const Matrix& M) {
    long code = 0;
    for (int i = 0; i < V; ++i)
      for (int j = 0; j < V; ++j)
        if (i != j) code = code * 2 + (M(i, j) >= 0.5 ? 1 : 0);
    return code;
  };
  const long target = encode(to);
  std::map<long, int> dist;
  std::queue<Matrix> queue;
  queue.push(from);
  dist[encode(from)] = 0;
  while (!queue.empty()) {
    Matrix cur = queue.front();
    queue.pop();
    const int d = dist[encode(cur)];
    if (encode(cur) == target) return d;
    for (int i = 0; i < V; ++i) {
      for (int j = 0; j < V; ++j) {
        if (i == j) continue;
        // toggle edge j -> i
        Matrix next = cur;
        next(i, j) = next(i, j) >= 0.5 ? 0.0 : 1.0;
        if (dist.emplace(encode(next), d + 1).second) queue.push(next);
        // reverse edge j -> i when present
        if (cur(i, j) >= 0.5 && cur(j, i) < 0.5) {
          Matrix rev = cur;
          rev(i, j) = 0.0;
          rev(j, i) = 1.0;
          if (dist.emplace(encode(rev), d + 1).second) queue.push(rev);
        }
      }
    }
  }
  return -1;
}

/// Standalone scalar Adam for cross-checking the library implementation.
struct ScalarAdam {
  double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  long t = 0;
  double step(double w, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(b2, static_cast<double>(t)));
    return w - lr * mh / (std::sqrt(vh) + eps);
  }
};

/// Random DAG weights: strictly lower-triangular pattern under a random
/// permutation, entries +-[low,high].
inline Matrix random_dag_weights(int V, double edge_prob, causalsem::Rng& rng,
                                 double low = 0.5, double high = 2.0) {
  std::vector<int> perm(V);
  for (int i = 0; i < V; ++i) perm[i] = i;
  for (int i = V - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.uniform_int(static_cast<std::uint64_t>(i + 1))]);
  Matrix W = Matrix::Zero(V, V);
  for (int a = 0; a < V; ++a)
    for (int b = a + 1; b < V; ++b)
      if (rng.uniform() < edge_prob) {
        const double mag = rng.uniform(low, high);
        W(perm[b], perm[a]) = rng.uniform() < 0.5 ? -mag : mag;
      }
  return W;
}

/// Arbitrary random square matrix with a sparse nonzero pattern (may be
/// cyclic); used by the acyclicity equivalence tests.
inline Matrix random_sparse_matrix(int V, double fill, causalsem::Rng& rng,
                                   double low = 0.5, double high = 2.0) {
  Matrix W = Matrix::Zero(V, V);
  for (int i = 0; i < V; ++i)
    for (int j = 0; j < V; ++j) {
      if (i == j || rng.uniform() >= fill) continue;
      const double mag = rng.uniform(low, high);
      W(i, j) = rng.uniform() < 0.5 ? -mag : mag;
    }
  return W;
}

inline double gaussian_pdf(double x, double mu, double sd) {
  const double z = (x - mu) / sd;
  return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * 3.14159265358979323846));
}

}  // namespace oracles
