#pragma once
// Hall-style matchings with certificates, greedy d-matchings, deficiency
// peeling, matchmaker sets, and the random-matching bipartite templates.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <queue>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "spanforge/graph.hpp"
#include "spanforge/rng.hpp"

namespace spanforge {

// ---------------------------------------------------------------------------
// Bipartite graphs. A-side indices are 0..na-1, B-side 0..nb-1.

struct BipartiteGraph {
  int na = 0, nb = 0;
  std::vector<std::vector<int>> adj_a;  // per A vertex, neighbors in B
  std::vector<std::vector<int>> adj_b;  // reverse lists

  BipartiteGraph() = default;
  BipartiteGraph(int na_, int nb_) : na(na_), nb(nb_), adj_a(na_), adj_b(nb_) {}

  void add_edge(int a, int b) {
    if (a < 0 || a >= na || b < 0 || b >= nb)
      throw std::invalid_argument("bipartite edge out of range");
    adj_a[a].push_back(b);
    adj_b[b].push_back(a);
  }

  // Sort and deduplicate; parallel edges collapse.
  void finalize() {
    for (auto* side : {&adj_a, &adj_b})
      for (auto& l : *side) {
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
      }
  }

  bool has_edge(int a, int b) const {
    return std::binary_search(adj_a[a].begin(), adj_a[a].end(), b);
  }

  int max_degree() const {
    std::size_t d = 0;
    for (auto& l : adj_a) d = std::max(d, l.size());
    for (auto& l : adj_b) d = std::max(d, l.size());
    return static_cast<int>(d);
  }
};

// Neighborhood of an A-side set in B (or B-side set in A with from_a=false).
inline std::vector<int> bip_neighborhood(const BipartiteGraph& h,
                                         const std::vector<int>& u,
                                         bool from_a = true) {
  std::vector<char> seen(from_a ? h.nb : h.na, 0);
  const auto& adj = from_a ? h.adj_a : h.adj_b;
  for (int v : u)
    for (int w : adj[v]) seen[w] = 1;
  std::vector<int> out;
  for (int w = 0; w < static_cast<int>(seen.size()); ++w)
    if (seen[w]) out.push_back(w);
  return out;
}

// Serialization: marker line "A=<k>", then the plain edge-list body over
// na+nb vertices where B-side vertex b appears as k+b.
inline std::string bip_to_text(const BipartiteGraph& h) {
  std::ostringstream os;
  os << "A=" << h.na << "\n" << h.na + h.nb << "\n";
  for (int a = 0; a < h.na; ++a)
    for (int b : h.adj_a[a]) os << a << " " << h.na + b << "\n";
  return os.str();
}

inline BipartiteGraph bip_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string marker;
  if (!(is >> marker) || marker.rfind("A=", 0) != 0)
    throw std::invalid_argument("missing A= side marker");
  int na = std::stoi(marker.substr(2));
  int total = 0;
  if (!(is >> total) || total < na)
    throw std::invalid_argument("bad bipartite size line");
  BipartiteGraph h(na, total - na);
  int u, v;
  while (is >> u >> v) {
    if (u >= na || v < na) throw std::invalid_argument("edge crosses no side");
    h.add_edge(u, v - na);
  }
  h.finalize();
  return h;
}

// ---------------------------------------------------------------------------
// f-matchings by max-flow. Unit capacities on the B side, f(a) on the A side;
// deterministic augmentation order so reruns reproduce the same sets.

struct FMatchResult {
  bool ok = false;
  std::vector<std::vector<int>> assign;  // per a, the set X_a (when ok)
  std::vector<int> violator;             // U subset of A (when not ok)
};

namespace matching_detail {

struct FlowNet {
  struct Arc {
    int to, cap;
  };
  std::vector<Arc> arcs;                  // paired: arc i's reverse is i^1
  std::vector<std::vector<int>> out;      // arc indices per node
  explicit FlowNet(int nodes) : out(nodes) {}
  void add(int u, int v, int cap) {
    out[u].push_back(static_cast<int>(arcs.size()));
    arcs.push_back({v, cap});
    out[v].push_back(static_cast<int>(arcs.size()));
    arcs.push_back({u, 0});
  }
};

inline int dinic_flow(FlowNet& net, int s, int t) {
  int total = 0;
  int n = static_cast<int>(net.out.size());
  std::vector<int> level(n), it(n);
  auto bfs = [&]() {
    std::fill(level.begin(), level.end(), -1);
    std::queue<int> q;
    q.push(s);
    level[s] = 0;
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int ai : net.out[v]) {
        auto& a = net.arcs[ai];
        if (a.cap > 0 && level[a.to] < 0) {
          level[a.to] = level[v] + 1;
          q.push(a.to);
        }
      }
    }
    return level[t] >= 0;
  };
  std::function<int(int, int)> dfs = [&](int v, int pushed) -> int {
    if (v == t) return pushed;
    for (int& i = it[v]; i < static_cast<int>(net.out[v].size()); ++i) {
      int ai = net.out[v][i];
      auto& a = net.arcs[ai];
      if (a.cap > 0 && level[a.to] == level[v] + 1) {
        int got = dfs(a.to, std::min(pushed, a.cap));
        if (got > 0) {
          a.cap -= got;
          net.arcs[ai ^ 1].cap += got;
          return got;
        }
      }
    }
    return 0;
  };
  while (bfs()) {
    std::fill(it.begin(), it.end(), 0);
    while (int got = dfs(s, std::numeric_limits<int>::max())) total += got;
  }
  return total;
}

}  // namespace matching_detail

inline FMatchResult f_matching(const BipartiteGraph& h,
                               const std::vector<int>& f) {
  if (static_cast<int>(f.size()) != h.na)
    throw std::invalid_argument("f must cover the A side");
  for (int v : f)
    if (v < 0) throw std::invalid_argument("f(a) >= 0 required");
  int s = h.na + h.nb, t = s + 1;
  matching_detail::FlowNet net(t + 1);
  long long want = 0;
  for (int a = 0; a < h.na; ++a) {
    net.add(s, a, f[a]);
    want += f[a];
  }
  // Arc order fixes the augmentation order.
  std::vector<std::vector<int>> a_arc(h.na);
  for (int a = 0; a < h.na; ++a)
    for (int b : h.adj_a[a]) {
      a_arc[a].push_back(static_cast<int>(net.arcs.size()));
      net.add(a, h.na + b, 1);
    }
  for (int b = 0; b < h.nb; ++b) net.add(h.na + b, t, 1);

  FMatchResult res;
  long long flow = matching_detail::dinic_flow(net, s, t);
  if (flow == want) {
    res.ok = true;
    res.assign.resize(h.na);
    for (int a = 0; a < h.na; ++a)
      for (std::size_t i = 0; i < h.adj_a[a].size(); ++i)
        if (net.arcs[a_arc[a][i]].cap == 0)
          res.assign[a].push_back(h.adj_a[a][i]);
    return res;
  }
  // Residual reachability from the source yields a generalized Hall violator.
  std::vector<char> reach(t + 1, 0);
  std::queue<int> q;
  q.push(s);
  reach[s] = 1;
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (int ai : net.out[v]) {
      auto& a = net.arcs[ai];
      if (a.cap > 0 && !reach[a.to]) {
        reach[a.to] = 1;
        q.push(a.to);
      }
    }
  }
  for (int a = 0; a < h.na; ++a)
    if (reach[a]) res.violator.push_back(a);
  long long need = 0;
  for (int a : res.violator) need += f[a];
  if (res.violator.empty() ||
      static_cast<long long>(bip_neighborhood(h, res.violator).size()) >= need)
    throw std::logic_error("f_matching: cut did not certify a violator");
  return res;
}

// ---------------------------------------------------------------------------
// Matchings from expansion hypotheses. The three checks mirror the
// hypotheses exactly; in sampled mode each combines random subsets with an
// adversarial greedy that grows sets of minimal marginal expansion.

struct HypothesisReport {
  bool ok = true;
  int which = 0;  // 1, 2, or 3 when violated
  std::vector<int> witness_u, witness_v;
};

namespace matching_detail {

// Minimize |N(U)| greedily over subsets of one side, |U| = target.
inline std::vector<int> greedy_min_neighborhood(const BipartiteGraph& h,
                                                bool from_a, int target,
                                                int start) {
  const auto& adj = from_a ? h.adj_a : h.adj_b;
  int nb_side = from_a ? h.nb : h.na;
  int n_side = from_a ? h.na : h.nb;
  std::vector<char> seen(nb_side, 0), in_u(n_side, 0);
  std::vector<int> u{start};
  in_u[start] = 1;
  for (int w : adj[start]) seen[w] = 1;
  while (static_cast<int>(u.size()) < target) {
    int best = -1, best_gain = std::numeric_limits<int>::max();
    for (int v = 0; v < n_side; ++v) {
      if (in_u[v]) continue;
      int gain = 0;
      for (int w : adj[v])
        if (!seen[w]) ++gain;
      if (gain < best_gain) {
        best_gain = gain;
        best = v;
      }
    }
    if (best < 0) break;
    u.push_back(best);
    in_u[best] = 1;
    for (int w : adj[best]) seen[w] = 1;
  }
  return u;
}

inline bool subset_expands(const BipartiteGraph& h, bool from_a,
                           const std::vector<int>& u, long long need) {
  return static_cast<long long>(bip_neighborhood(h, u, from_a).size()) >= need;
}

}  // namespace matching_detail

// Checks, for every U on the given side with |U| <= m, that
// |N(U)| >= factor * |U|. Exhaustive under the cap, otherwise sampled.
inline HypothesisReport bip_expansion_check(const BipartiteGraph& h,
                                            bool from_a, int m, int factor,
                                            CheckMode mode, int trials,
                                            std::uint64_t seed,
                                            long long cap = kDefaultSubsetCap) {
  HypothesisReport rep;
  rep.which = from_a ? 1 : 2;
  int n_side = from_a ? h.na : h.nb;
  m = std::min(m, n_side);
  auto fails = [&](const std::vector<int>& u) {
    return !matching_detail::subset_expands(
        h, from_a, u, static_cast<long long>(factor) * u.size());
  };
  if (mode == CheckMode::exhaustive) {
    long long budget = 0;
    for (int s = 1; s <= m; ++s) {
      budget += detail::binom(n_side, s);
      if (budget > cap)
        throw std::runtime_error("bip_expansion_check: exhaustive budget exceeded");
    }
    std::vector<int> u;
    std::function<bool(int, int)> rec = [&](int lo, int left) {
      if (!u.empty() && fails(u)) {
        rep.ok = false;
        rep.witness_u = u;
        return true;
      }
      if (left == 0) return false;
      for (int v = lo; v < n_side; ++v) {
        u.push_back(v);
        if (rec(v + 1, left - 1)) return true;
        u.pop_back();
      }
      return false;
    };
    rec(0, m);
    return rep;
  }
  Rng rng = Rng(seed, 0).derive("bip-expansion");
  // Adversarial starts: the weakest vertices of the side.
  const auto& adj = from_a ? h.adj_a : h.adj_b;
  std::vector<int> order(n_side);
  for (int i = 0; i < n_side; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return adj[x].size() != adj[y].size() ? adj[x].size() < adj[y].size()
                                          : x < y;
  });
  for (int si = 0; si < std::min(6, n_side); ++si) {
    auto grown =
        matching_detail::greedy_min_neighborhood(h, from_a, m, order[si]);
    for (std::size_t len = 1; len <= grown.size(); ++len) {
      std::vector<int> u(grown.begin(), grown.begin() + len);
      if (fails(u)) {
        rep.ok = false;
        rep.witness_u = u;
        return rep;
      }
    }
  }
  for (int tr = 0; tr < trials; ++tr) {
    int sz = 1 + static_cast<int>(rng.below(m));
    std::vector<int> pool(n_side);
    for (int i = 0; i < n_side; ++i) pool[i] = i;
    shuffle_vec(pool, rng);
    std::vector<int> u(pool.begin(), pool.begin() + sz);
    if (fails(u)) {
      rep.ok = false;
      rep.witness_u = u;
      return rep;
    }
  }
  return rep;
}

// Checks that every pair U in A, V in B with |U|,|V| >= m spans an edge.
// Equivalent form used: no A-side m-set U leaves m vertices of B untouched.
inline HypothesisReport bip_joined_check(const BipartiteGraph& h, int m,
                                         CheckMode mode, int trials,
                                         std::uint64_t seed,
                                         long long cap = kDefaultSubsetCap) {
  HypothesisReport rep;
  rep.which = 3;
  if (m > h.na || m > h.nb) return rep;  // vacuous
  auto check_u = [&](const std::vector<int>& u) {
    auto nu = bip_neighborhood(h, u);
    if (h.nb - static_cast<int>(nu.size()) >= m) {
      rep.ok = false;
      rep.witness_u = u;
      std::vector<char> hit(h.nb, 0);
      for (int b : nu) hit[b] = 1;
      for (int b = 0; b < h.nb && static_cast<int>(rep.witness_v.size()) < m;
           ++b)
        if (!hit[b]) rep.witness_v.push_back(b);
      return false;
    }
    return true;
  };
  if (mode == CheckMode::exhaustive) {
    if (detail::binom(h.na, m) > cap)
      throw std::runtime_error("bip_joined_check: exhaustive budget exceeded");
    std::vector<int> u;
    std::function<bool(int)> rec = [&](int lo) {
      if (static_cast<int>(u.size()) == m) return !check_u(u);
      for (int v = lo; v < h.na; ++v) {
        u.push_back(v);
        if (rec(v + 1)) return true;
        u.pop_back();
      }
      return false;
    };
    rec(0);
    return rep;
  }
  Rng rng = Rng(seed, 0).derive("bip-joined");
  for (int start = 0; start < std::min(4, h.na); ++start) {
    auto u = matching_detail::greedy_min_neighborhood(h, true, m, start);
    if (static_cast<int>(u.size()) == m && !check_u(u)) return rep;
  }
  for (int tr = 0; tr < trials; ++tr) {
    std::vector<int> pool(h.na);
    for (int i = 0; i < h.na; ++i) pool[i] = i;
    shuffle_vec(pool, rng);
    std::vector<int> u(pool.begin(), pool.begin() + m);
    if (!check_u(u)) return rep;
  }
  return rep;
}

// Matching (f-matching with f bounded by delta) guaranteed by the three
// expansion hypotheses; the hypotheses are checked first in the given mode.
inline FMatchResult matching_under_expansion(const BipartiteGraph& h,
                                             const std::vector<int>& f, int m,
                                             CheckMode mode, int trials = 400,
                                             std::uint64_t seed = 0,
                                             long long cap = kDefaultSubsetCap) {
  int delta = 1;
  for (int v : f) delta = std::max(delta, v);
  auto r1 = bip_expansion_check(h, true, m, delta, mode, trials, seed, cap);
  if (!r1.ok) throw std::runtime_error("matching hypothesis 1 violated");
  auto r2 = bip_expansion_check(h, false, m, 1, mode, trials, seed + 1, cap);
  if (!r2.ok) throw std::runtime_error("matching hypothesis 2 violated");
  auto r3 = bip_joined_check(h, m, mode, trials, seed + 2, cap);
  if (!r3.ok) throw std::runtime_error("matching hypothesis 3 violated");
  auto res = f_matching(h, f);
  if (!res.ok)
    throw std::runtime_error(
        "matching_under_expansion: infeasible despite hypothesis checks; "
        "sampled checks missed a violating set");
  return res;
}

// ---------------------------------------------------------------------------
// Greedy d-matching from A into W inside an ordinary graph, following the
// sequential reveal order: each a claims its d lowest-index free W-neighbors.

struct DMatchResult {
  bool ok = false;
  std::vector<std::vector<int>> assign;  // per a in input order
  int stuck = -1;                        // the a that ran short, when !ok
};

inline DMatchResult d_matching(const Graph& g, const std::vector<int>& a,
                               const std::vector<int>& w, int d) {
  if (d < 1) throw std::invalid_argument("d >= 1 required");
  if (static_cast<long long>(d) * a.size() > static_cast<long long>(w.size()))
    throw std::invalid_argument("d_matching: d|A| > |W|");
  std::vector<char> in_w(g.n, 0), used(g.n, 0);
  for (int v : w) in_w[v] = 1;
  for (int v : a)
    if (in_w[v]) throw std::invalid_argument("d_matching: A meets W");
  DMatchResult res;
  res.assign.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (int u : g.adjacency[a[i]]) {
      if (static_cast<int>(res.assign[i].size()) == d) break;
      if (in_w[u] && !used[u]) {
        used[u] = 1;
        res.assign[i].push_back(u);
      }
    }
    if (static_cast<int>(res.assign[i].size()) < d) {
      res.stuck = a[i];
      return res;
    }
  }
  res.ok = true;
  return res;
}

// ---------------------------------------------------------------------------
// Deficiency peeling: grow B by absorbing any set whose W-neighborhood is
// too small, until the expansion property survives the configured checks.

struct PeelResult {
  std::vector<int> b;
  int checked_exhaustive_to = 0;  // all |U| up to this size were enumerated
};

inline PeelResult peel_deficient(const Graph& g, const std::vector<int>& w,
                                 int d, int m, CheckMode mode,
                                 int trials = 400, std::uint64_t seed = 0,
                                 long long cap = kDefaultSubsetCap) {
  if (static_cast<long long>(w.size()) <
      static_cast<long long>(3 * d + 4) * m)
    throw std::invalid_argument("peel_deficient: |W| < (3d+4)m");
  std::vector<char> in_b(g.n, 0);
  std::vector<int> b;
  auto remaining_w = [&]() {
    std::vector<int> out;
    for (int v : w)
      if (!in_b[v]) out.push_back(v);
    return out;
  };
  auto domain = [&]() {
    std::vector<int> out;
    for (int v = 0; v < g.n; ++v)
      if (!in_b[v]) out.push_back(v);
    return out;
  };
  for (int round = 0; round <= 4 * m + 4; ++round) {
    auto dom = domain();
    auto wr = remaining_w();
    auto verdict = expansion_check(g, wr, d, 2 * m, mode, trials,
                                   seed + round, &dom, cap);
    if (verdict.passes) {
      PeelResult res;
      res.b = b;
      res.checked_exhaustive_to = verdict.exhaustive ? 2 * m : 0;
      return res;
    }
    if (!verdict.violator)
      throw std::runtime_error("peel_deficient: failed check without witness");
    for (int v : *verdict.violator)
      if (!in_b[v]) {
        in_b[v] = 1;
        b.push_back(v);
      }
    if (static_cast<int>(b.size()) > m)
      throw std::runtime_error("peel_deficient: peel overflow past m");
  }
  throw std::runtime_error("peel_deficient: peeling did not settle");
}

// ---------------------------------------------------------------------------
// Matchmaker sets: X subset of W, |X| <= 8m, such that small sets outside X
// expand into X.

struct MatchmakerSet {
  std::vector<int> x;
  int m = 0;
  std::vector<int> w;
};

inline MatchmakerSet matchmaker(const Graph& g, const std::vector<int>& w,
                                int m, CheckMode mode, int trials = 400,
                                std::uint64_t seed = 0,
                                double min_w_frac = 3.0 / 8.0,
                                long long cap = kDefaultSubsetCap) {
  if (static_cast<double>(w.size()) < min_w_frac * g.n)
    throw std::invalid_argument("matchmaker: W too small");
  if (static_cast<int>(w.size()) < 7 * m)
    throw std::invalid_argument("matchmaker: W smaller than the 7m seed");
  std::vector<int> ws = w;
  std::sort(ws.begin(), ws.end());
  std::vector<int> x0(ws.begin(), ws.begin() + 7 * m);
  std::vector<char> in_x0(g.n, 0);
  for (int v : x0) in_x0[v] = 1;
  std::vector<int> a_set;  // W minus the seed
  for (int v : ws)
    if (!in_x0[v]) a_set.push_back(v);

  auto peeled = peel_deficient(g, x0, 1, m, mode, trials, seed, cap);

  // Repair: vertices of B outside A are matched into A; their partners join X.
  std::vector<char> in_a(g.n, 0);
  for (int v : a_set) in_a[v] = 1;
  std::vector<int> b_out;
  for (int v : peeled.b)
    if (!in_a[v]) b_out.push_back(v);
  std::vector<int> d_set;
  if (!b_out.empty()) {
    BipartiteGraph rep(static_cast<int>(b_out.size()),
                       static_cast<int>(a_set.size()));
    std::vector<int> a_index(g.n, -1);
    for (std::size_t i = 0; i < a_set.size(); ++i) a_index[a_set[i]] = i;
    for (std::size_t i = 0; i < b_out.size(); ++i)
      for (int u : g.adjacency[b_out[i]])
        if (a_index[u] >= 0) rep.add_edge(static_cast<int>(i), a_index[u]);
    rep.finalize();
    auto match = f_matching(rep, std::vector<int>(b_out.size(), 1));
    if (!match.ok)
      throw std::runtime_error("matchmaker: repair matching infeasible");
    for (auto& xa : match.assign) d_set.push_back(a_set[xa[0]]);
  }

  MatchmakerSet out;
  out.m = m;
  out.w = ws;
  std::set<int> xs(x0.begin(), x0.end());
  for (int v : d_set) xs.insert(v);
  for (int v : peeled.b)
    if (in_a[v]) xs.insert(v);
  out.x.assign(xs.begin(), xs.end());
  if (static_cast<int>(out.x.size()) > 8 * m)
    throw std::runtime_error("matchmaker: X exceeded 8m");

  // Verify the defining property in the configured mode before returning.
  std::vector<int> dom;
  for (int v = 0; v < g.n; ++v)
    if (!xs.count(v)) dom.push_back(v);
  auto verdict =
      expansion_check(g, out.x, 1, m, mode, trials, seed + 101, &dom, cap);
  if (!verdict.passes)
    throw std::runtime_error("matchmaker: verification found a deficient set");
  return out;
}

// Direct audit of the matchmaker property, for reuse by tests and callers.
inline bool matchmaker_holds(const Graph& g, const MatchmakerSet& ms,
                             const std::vector<int>& u) {
  std::vector<char> in_x(g.n, 0);
  for (int v : ms.x) in_x[v] = 1;
  for (int v : u)
    if (in_x[v]) throw std::invalid_argument("U must avoid X");
  std::vector<char> seen(g.n, 0);
  int count = 0;
  for (int v : u)
    for (int nb : g.adjacency[v])
      if (in_x[nb] && !seen[nb]) {
        seen[nb] = 1;
        ++count;
      }
  return count >= static_cast<int>(u.size());
}

// ---------------------------------------------------------------------------
// Random-matching unions and the flexible bipartite template.

inline BipartiteGraph union_random_matchings(int nx, int ny, int count,
                                             Rng rng) {
  BipartiteGraph h(nx, ny);
  int k = std::min(nx, ny);
  for (int c = 0; c < count; ++c) {
    std::vector<int> xs(nx), ys(ny);
    for (int i = 0; i < nx; ++i) xs[i] = i;
    for (int i = 0; i < ny; ++i) ys[i] = i;
    shuffle_vec(xs, rng);
    shuffle_vec(ys, rng);
    for (int i = 0; i < k; ++i) h.add_edge(xs[i], ys[i]);
  }
  h.finalize();
  return h;
}

// Template with A side X (|X|=h) and B side Y then Z (each 2h/3). For any
// Z' of size h/3 a perfect matching X -> Y u Z' must exist; verified before
// return, rebuilding with fresh randomness up to the retry budget.
struct FlexibleTemplate {
  BipartiteGraph h_graph;  // B indices: 0..m-1 = Y, m..2m-1 = Z
  int h = 0;
  int m = 0;  // 2h/3
};

namespace matching_detail {

inline bool template_matchable(const BipartiteGraph& hg, int m,
                               const std::vector<int>& z_prime) {
  // Restrict the B side to Y plus Z'.
  std::vector<char> allowed(2 * m, 0);
  for (int i = 0; i < m; ++i) allowed[i] = 1;
  for (int z : z_prime) allowed[m + z] = 1;
  BipartiteGraph sub(hg.na, 2 * m);
  for (int a = 0; a < hg.na; ++a)
    for (int b : hg.adj_a[a])
      if (allowed[b]) sub.add_edge(a, b);
  sub.finalize();
  return f_matching(sub, std::vector<int>(hg.na, 1)).ok;
}

}  // namespace matching_detail

inline FlexibleTemplate flexible_template(int h, int count, Rng rng,
                                          int samples = 50, int retries = 5,
                                          long long exhaustive_cap = 4000) {
  if (h % 3 != 0 || h <= 0) throw std::invalid_argument("need 3 | h");
  int m = 2 * h / 3;
  for (int attempt = 0; attempt < retries; ++attempt) {
    Rng local = rng.derive(static_cast<std::uint64_t>(attempt));
    // X1 is the first 2h/3, X2 the last 2h/3; they overlap in the middle.
    BipartiteGraph hg(h, 2 * m);
    auto add_matchings = [&](int x_lo, int b_lo, std::string_view tag) {
      Rng mr = local.derive(tag);
      for (int c = 0; c < count; ++c) {
        std::vector<int> xs(m), bs(m);
        for (int i = 0; i < m; ++i) xs[i] = x_lo + i;
        for (int i = 0; i < m; ++i) bs[i] = b_lo + i;
        shuffle_vec(xs, mr);
        shuffle_vec(bs, mr);
        for (int i = 0; i < m; ++i) hg.add_edge(xs[i], bs[i]);
      }
    };
    add_matchings(0, 0, "x1-y");
    add_matchings(h - m, 0, "x2-y");
    add_matchings(0, m, "x1-z");
    add_matchings(h - m, m, "x2-z");
    hg.finalize();

    bool good = true;
    if (detail::binom(m, h / 3) <= exhaustive_cap) {
      std::vector<int> zp;
      std::function<bool(int)> rec = [&](int lo) {
        if (static_cast<int>(zp.size()) == h / 3)
          return !matching_detail::template_matchable(hg, m, zp);
        for (int z = lo; z < m; ++z) {
          zp.push_back(z);
          if (rec(z + 1)) return true;
          zp.pop_back();
        }
        return false;
      };
      good = !rec(0);
    } else {
      Rng sr = local.derive("z-samples");
      for (int sm = 0; sm < samples && good; ++sm) {
        std::vector<int> pool(m);
        for (int i = 0; i < m; ++i) pool[i] = i;
        shuffle_vec(pool, sr);
        std::vector<int> zp(pool.begin(), pool.begin() + h / 3);
        good = matching_detail::template_matchable(hg, m, zp);
      }
    }
    if (good) {
      FlexibleTemplate out;
      out.h_graph = std::move(hg);
      out.h = h;
      out.m = m;
      return out;
    }
  }
  throw std::runtime_error("flexible_template: retries exhausted");
}

// ---------------------------------------------------------------------------
// Min-degree expansion audit. A violating pair is disjoint (A, B) with
// 0 < |A| <= m, |B| <= d|A| and e(A,B) >= D|A|.

inline bool min_degree_expansion_violation(const Graph& g,
                                           const std::vector<int>& a,
                                           const std::vector<int>& b, int d,
                                           int big_d) {
  if (a.empty()) return false;
  std::vector<char> in_a(g.n, 0), in_b(g.n, 0);
  for (int v : a) in_a[v] = 1;
  for (int v : b) {
    if (in_a[v]) throw std::invalid_argument("audit sets must be disjoint");
    in_b[v] = 1;
  }
  if (static_cast<long long>(b.size()) > static_cast<long long>(d) * a.size())
    return false;
  long long edges = 0;
  for (int v : a)
    for (int u : g.adjacency[v])
      if (in_b[u]) ++edges;
  return edges >= static_cast<long long>(big_d) * a.size();
}

struct AuditResult {
  bool found = false;
  std::vector<int> a, b;
  long long sets_checked = 0;
};

// For a fixed A the best B is the d|A| outside vertices with the most edges
// into A, so the search only enumerates or samples A.
inline AuditResult min_degree_expansion_audit(const Graph& g, int m, int d,
                                              int big_d, CheckMode mode,
                                              int trials = 400,
                                              std::uint64_t seed = 0,
                                              long long cap = kDefaultSubsetCap) {
  AuditResult res;
  auto try_a = [&](const std::vector<int>& a) {
    ++res.sets_checked;
    std::vector<char> in_a(g.n, 0);
    for (int v : a) in_a[v] = 1;
    std::vector<std::pair<int, int>> cand;  // (edges into A, vertex)
    for (int v = 0; v < g.n; ++v) {
      if (in_a[v]) continue;
      int e = 0;
      for (int u : g.adjacency[v])
        if (in_a[u]) ++e;
      if (e > 0) cand.push_back({e, v});
    }
    std::sort(cand.begin(), cand.end(), [](auto& x, auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    long long take = std::min<long long>(cand.size(),
                                         static_cast<long long>(d) * a.size());
    long long edges = 0;
    std::vector<int> b;
    for (long long i = 0; i < take; ++i) {
      edges += cand[i].first;
      b.push_back(cand[i].second);
    }
    if (edges >= static_cast<long long>(big_d) * a.size()) {
      res.found = true;
      res.a = a;
      res.b = b;
      return true;
    }
    return false;
  };
  if (mode == CheckMode::exhaustive) {
    long long budget = 0;
    for (int s = 1; s <= m; ++s) {
      budget += detail::binom(g.n, s);
      if (budget > cap)
        throw std::runtime_error("audit: exhaustive budget exceeded");
    }
    std::vector<int> a;
    std::function<bool(int)> rec = [&](int lo) {
      if (!a.empty() && try_a(a)) return true;
      if (static_cast<int>(a.size()) == m) return false;
      for (int v = lo; v < g.n; ++v) {
        a.push_back(v);
        if (rec(v + 1)) return true;
        a.pop_back();
      }
      return false;
    };
    rec(0);
    return res;
  }
  Rng rng = Rng(seed, 0).derive("mindeg-audit");
  // Densest-first starts: highest-degree vertices pull in the most edges.
  std::vector<int> order(g.n);
  for (int i = 0; i < g.n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return g.degree(x) != g.degree(y) ? g.degree(x) > g.degree(y) : x < y;
  });
  for (int si = 0; si < std::min(4, g.n); ++si)
    if (try_a({order[si]})) return res;
  for (int tr = 0; tr < trials; ++tr) {
    int sz = 1 + static_cast<int>(rng.below(std::max(1, m)));
    std::vector<int> pool(g.n);
    for (int i = 0; i < g.n; ++i) pool[i] = i;
    shuffle_vec(pool, rng);
    std::vector<int> a(pool.begin(), pool.begin() + std::min(sz, g.n));
    if (try_a(a)) return res;
  }
  return res;
}

}  // namespace spanforge
