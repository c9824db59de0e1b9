#pragma once
// Host graph representation, seeded G(n,p) sampling, neighbourhood operators,
// joinedness and expansion verdicts.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spanforge/rng.hpp"

namespace spanforge {

using VertexSet = std::vector<int>;  // kept sorted unless noted

class Graph {
public:
  int n = 0;
  std::vector<std::vector<int>> adjacency;  // sorted neighbour lists
  long long edge_count = 0;

  Graph() = default;
  explicit Graph(int n_) : n(n_), adjacency(n_) {
    if (n_ <= kMatCap) mat_.assign(static_cast<std::size_t>(n_) * n_, 0);
  }

  bool has_edge(int u, int v) const {
    if (u == v) return false;
    if (!mat_.empty()) return mat_[static_cast<std::size_t>(u) * n + v] != 0;
    const auto& a = adjacency[u];
    return std::binary_search(a.begin(), a.end(), v);
  }

  // Construction-time only; keeps lists sorted via final sort_lists().
  void add_edge(int u, int v) {
    if (u == v) throw std::invalid_argument("self-loop");
    if (has_edge(u, v)) return;
    adjacency[u].push_back(v);
    adjacency[v].push_back(u);
    if (!mat_.empty()) {
      mat_[static_cast<std::size_t>(u) * n + v] = 1;
      mat_[static_cast<std::size_t>(v) * n + u] = 1;
    }
    ++edge_count;
  }

  void sort_lists() {
    for (auto& a : adjacency) std::sort(a.begin(), a.end());
  }

  int degree(int v) const { return static_cast<int>(adjacency[v].size()); }

private:
  static constexpr int kMatCap = 4096;
  std::vector<std::uint8_t> mat_;
};

struct GnpSpec {
  int n = 0;
  double p = 0.0;
  std::uint64_t seed = 0;
};

struct JoinednessReport {
  int m = 0;
  bool joined = false;
  bool exhaustive = false;
  long long pairs_checked = 0;
  // Invariant: witness sets are disjoint m-sets with no crossing edge.
  std::optional<std::pair<VertexSet, VertexSet>> witness;
};

inline Graph gen_gnp(const GnpSpec& spec) {
  if (spec.n < 1 || spec.p < 0.0 || spec.p > 1.0)
    throw std::invalid_argument("bad GnpSpec");
  Graph g(spec.n);
  Rng rng(spec.seed, hash_label("gnp-edges"));
  const std::uint64_t total =
      static_cast<std::uint64_t>(spec.n) * (spec.n - 1) / 2;
  if (spec.p >= 1.0) {
    for (int u = 0; u < spec.n; ++u)
      for (int v = u + 1; v < spec.n; ++v) g.add_edge(u, v);
  } else if (spec.p > 0.0) {
    // Walk the lexicographic pair sequence with geometric skips.
    std::uint64_t idx = rng.geometric_skip(spec.p);
    while (idx < total) {
      // Invert idx -> (u,v), u<v, over rows of length n-1-u.
      std::uint64_t rem = idx;
      int u = 0;
      while (rem >= static_cast<std::uint64_t>(spec.n - 1 - u)) {
        rem -= spec.n - 1 - u;
        ++u;
      }
      int v = u + 1 + static_cast<int>(rem);
      g.add_edge(u, v);
      std::uint64_t skip = rng.geometric_skip(spec.p);
      if (skip > total) break;
      idx += 1 + skip;
    }
  }
  g.sort_lists();
  return g;
}

namespace detail {
inline std::vector<char> mask_of(const VertexSet& s, int n) {
  std::vector<char> m(n, 0);
  for (int v : s) {
    if (v < 0 || v >= n) throw std::out_of_range("vertex index");
    m[v] = 1;
  }
  return m;
}
}  // namespace detail

// Exterior neighbourhood N(U); closed variant N'(U) = union of N(v) over U.
// Restricted to W when given.
inline VertexSet neighborhood(const Graph& g, const VertexSet& u,
                              const VertexSet* w = nullptr,
                              bool closed = false) {
  auto in_u = detail::mask_of(u, g.n);
  std::vector<char> got(g.n, 0);
  for (int x : u)
    for (int y : g.adjacency[x]) got[y] = 1;
  if (!closed)
    for (int x : u) got[x] = 0;
  VertexSet out;
  if (w) {
    auto in_w = detail::mask_of(*w, g.n);
    for (int v = 0; v < g.n; ++v)
      if (got[v] && in_w[v]) out.push_back(v);
  } else {
    for (int v = 0; v < g.n; ++v)
      if (got[v]) out.push_back(v);
  }
  return out;
}

inline bool sets_joined(const Graph& g, const VertexSet& a, const VertexSet& b) {
  auto in_b = detail::mask_of(b, g.n);
  for (int x : a)
    for (int y : g.adjacency[x])
      if (in_b[y]) return true;
  return false;
}

namespace detail {
// Enumerate all size-k subsets of [n]; f returns false to abort.
template <typename F>
bool for_each_subset(int n, int k, F&& f) {
  if (k > n) return true;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    if (!f(idx)) return false;
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return true;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}
}  // namespace detail

constexpr long long kDefaultSubsetCap = 2'000'000;

enum class CheckMode { exhaustive, sampled };

// m-joinedness: an edge between every two disjoint m-sets. Exhaustive mode is
// exact; sampled mode also runs a greedy adversarial descent (pairs of
// low-cross-degree sets) so structured witnesses are not missed by luck.
inline JoinednessReport check_m_joined(const Graph& g, int m,
                                       CheckMode mode = CheckMode::exhaustive,
                                       long long trials = 2000,
                                       std::uint64_t seed = 0,
                                       long long cap = kDefaultSubsetCap) {
  if (m < 1) throw std::invalid_argument("m >= 1 required");
  JoinednessReport rep;
  rep.m = m;
  rep.joined = true;
  if (2 * m > g.n) {
    rep.exhaustive = true;  // no two disjoint m-sets exist
    return rep;
  }
  if (mode == CheckMode::exhaustive) {
    double work = detail::binom(g.n, m) * detail::binom(g.n - m, m);
    if (work > static_cast<double>(cap))
      throw std::runtime_error("check_m_joined: exhaustive budget exceeded");
    rep.exhaustive = true;
    detail::for_each_subset(g.n, m, [&](const std::vector<int>& a) {
      std::vector<int> restv;
      restv.reserve(g.n - m);
      auto in_a = detail::mask_of(a, g.n);
      for (int v = 0; v < g.n; ++v)
        if (!in_a[v]) restv.push_back(v);
      return detail::for_each_subset(g.n - m, m, [&](const std::vector<int>& bi) {
        VertexSet b(m);
        for (int i = 0; i < m; ++i) b[i] = restv[bi[i]];
        ++rep.pairs_checked;
        if (!sets_joined(g, a, b)) {
          rep.joined = false;
          rep.witness = {a, b};
          return false;
        }
        return true;
      });
    });
    return rep;
  }
  Rng rng(seed, hash_label("m-joined-sample"));
  std::vector<int> perm(g.n);
  for (int i = 0; i < g.n; ++i) perm[i] = i;
  auto try_pair = [&](VertexSet a, VertexSet b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    ++rep.pairs_checked;
    if (!sets_joined(g, a, b)) {
      rep.joined = false;
      if (!rep.witness) rep.witness = {a, b};
    }
  };
  for (long long t = 0; t < trials && rep.joined; ++t) {
    shuffle_vec(perm, rng);
    try_pair(VertexSet(perm.begin(), perm.begin() + m),
             VertexSet(perm.begin() + m, perm.begin() + 2 * m));
  }
  if (rep.joined) {
    // Adversarial seed: grow A from a low-degree vertex, then pick B greedily
    // among vertices with fewest edges into A.
    std::vector<int> order(g.n);
    for (int i = 0; i < g.n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int x, int y) {
      return g.degree(x) < g.degree(y) || (g.degree(x) == g.degree(y) && x < y);
    });
    for (int s = 0; s < std::min(g.n, 8) && rep.joined; ++s) {
      VertexSet a{order[s]};
      std::vector<char> in_a(g.n, 0);
      in_a[order[s]] = 1;
      while (static_cast<int>(a.size()) < m) {
        int best = -1, bestd = INT32_MAX;
        for (int v : order) {
          if (in_a[v]) continue;
          int d = 0;
          for (int w : g.adjacency[v]) d += in_a[w];
          int score = d * g.n + g.degree(v);
          if (score < bestd) { bestd = score; best = v; }
        }
        a.push_back(best);
        in_a[best] = 1;
      }
      std::vector<std::pair<int, int>> cross;
      for (int v = 0; v < g.n; ++v) {
        if (in_a[v]) continue;
        int d = 0;
        for (int w : g.adjacency[v]) d += in_a[w];
        cross.push_back({d, v});
      }
      std::sort(cross.begin(), cross.end());
      VertexSet b;
      for (int i = 0; i < m; ++i) b.push_back(cross[i].second);
      try_pair(a, b);
    }
  }
  return rep;
}

struct ExpansionVerdict {
  bool passes = true;
  bool exhaustive = false;
  long long sets_checked = 0;
  std::optional<VertexSet> violator;  // genuine: |N(U,W)| < d|U|
};

// |N(U,W)| >= d|U| for all U subseteq domain (default V) with |U| <= size_cap.
inline ExpansionVerdict expansion_check(const Graph& g, const VertexSet& w,
                                        int d, int size_cap,
                                        CheckMode mode = CheckMode::exhaustive,
                                        long long trials = 2000,
                                        std::uint64_t seed = 0,
                                        const VertexSet* domain = nullptr,
                                        long long cap = kDefaultSubsetCap) {
  if (size_cap < 1) throw std::invalid_argument("size_cap >= 1 required");
  ExpansionVerdict verdict;
  VertexSet dom;
  if (domain) dom = *domain;
  else {
    dom.resize(g.n);
    for (int i = 0; i < g.n; ++i) dom[i] = i;
  }
  auto in_w = detail::mask_of(w, g.n);
  auto nbr_count = [&](const VertexSet& u) {
    auto in_u = detail::mask_of(u, g.n);
    std::vector<char> got(g.n, 0);
    int c = 0;
    for (int x : u)
      for (int y : g.adjacency[x])
        if (!in_u[y] && in_w[y] && !got[y]) { got[y] = 1; ++c; }
    return c;
  };
  auto test_u = [&](const VertexSet& u) {
    ++verdict.sets_checked;
    if (nbr_count(u) < d * static_cast<int>(u.size())) {
      verdict.passes = false;
      if (!verdict.violator) verdict.violator = u;
      return false;
    }
    return true;
  };
  if (mode == CheckMode::exhaustive) {
    double work = 0;
    for (int k = 1; k <= size_cap; ++k)
      work += detail::binom(static_cast<int>(dom.size()), k);
    if (work > static_cast<double>(cap))
      throw std::runtime_error("expansion_check: exhaustive budget exceeded");
    verdict.exhaustive = true;
    for (int k = 1; k <= size_cap && verdict.passes; ++k) {
      detail::for_each_subset(static_cast<int>(dom.size()), k,
                              [&](const std::vector<int>& idx) {
                                VertexSet u;
                                u.reserve(k);
                                for (int i : idx) u.push_back(dom[i]);
                                return test_u(u);
                              });
    }
    return verdict;
  }
  Rng rng(seed, hash_label("expansion-sample"));
  VertexSet pool = dom;
  for (long long t = 0; t < trials && verdict.passes; ++t) {
    int k = 1 + static_cast<int>(rng.below(size_cap));
    if (k > static_cast<int>(pool.size())) continue;
    shuffle_vec(pool, rng);
    VertexSet u(pool.begin(), pool.begin() + k);
    std::sort(u.begin(), u.end());
    test_u(u);
  }
  // Greedy adversarial: start from each of the weakest vertices, grow by the
  // member whose marginal neighbourhood gain in W is smallest.
  std::vector<std::pair<int, int>> weak;
  for (int v : dom) {
    int c = 0;
    for (int y : g.adjacency[v]) c += in_w[y];
    weak.push_back({c, v});
  }
  std::sort(weak.begin(), weak.end());
  for (std::size_t s = 0; s < std::min<std::size_t>(weak.size(), 6) && verdict.passes; ++s) {
    VertexSet u{weak[s].second};
    if (!test_u(u)) break;
    auto in_dom = detail::mask_of(dom, g.n);
    while (static_cast<int>(u.size()) < size_cap && verdict.passes) {
      auto in_u = detail::mask_of(u, g.n);
      int best = -1, bestc = INT32_MAX;
      for (int v : dom) {
        if (in_u[v]) continue;
        VertexSet u2 = u;
        u2.push_back(v);
        auto c = nbr_count(u2);
        if (c < bestc) { bestc = c; best = v; }
      }
      if (best < 0) break;
      u.push_back(best);
      std::sort(u.begin(), u.end());
      if (!test_u(u)) break;
    }
  }
  return verdict;
}

// Edge-list text format: "n m" then m lines "u v", u<v, 0-indexed.
inline std::string to_edge_list(const Graph& g) {
  std::ostringstream os;
  os << g.n << ' ' << g.edge_count << '\n';
  for (int u = 0; u < g.n; ++u)
    for (int v : g.adjacency[u])
      if (u < v) os << u << ' ' << v << '\n';
  return os.str();
}

inline Graph graph_from_edge_list(std::istream& is) {
  int n;
  long long m;
  if (!(is >> n >> m)) throw std::runtime_error("bad edge list header");
  Graph g(n);
  for (long long i = 0; i < m; ++i) {
    int u, v;
    if (!(is >> u >> v)) throw std::runtime_error("truncated edge list");
    if (u < 0 || v < 0 || u >= n || v >= n || u >= v)
      throw std::runtime_error("bad edge entry");
    g.add_edge(u, v);
  }
  g.sort_lists();
  return g;
}

inline Graph graph_from_edge_list(const std::string& text) {
  std::istringstream is(text);
  return graph_from_edge_list(is);
}

}  // namespace spanforge
