#pragma once
// Extendable working subgraphs.
//
// A working subgraph S of a fixed host stays "extendable" while we mutate it:
// add a leaf, replay a whole tree leaf by leaf, join two S-vertices by a fresh
// path, peel a leaf back off, or insert a host edge between two S-vertices.
// Certified mode re-verifies the extendability inequality after every
// mutation by exhaustive small-set enumeration; heuristic mode trades the
// guarantee for throughput and is meant to be judged by a final embedding
// verifier. embed_cover drives the whole kit to land a separated set of tree
// vertices onto prescribed host vertices.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "spanforge/graph.hpp"
#include "spanforge/rng.hpp"
#include "spanforge/tree.hpp"

namespace spanforge {

enum class ExtMode { certified, heuristic };

struct ExtendabilityVerdict {
  bool extendable = false;
  std::optional<std::vector<int>> violating_set;
  bool checked_exhaustively = false;
  long long sets_checked = 0;
};

// Smallest k >= 1 with (d-1)^k >= 2m, in exact integer arithmetic. The short
// connection length is 2k+1; an off-by-one here breaks every length gate.
inline int connect_depth(int d, int m) {
  if (d < 3 || m < 1) throw std::invalid_argument("connect_depth: d>=3, m>=1");
  long long pw = d - 1;
  int k = 1;
  while (pw < 2LL * m) {
    pw *= (d - 1);
    ++k;
  }
  return k;
}

struct EmbeddingState {
  const Graph* host = nullptr;
  int d = 3;
  int m = 1;
  ExtMode mode = ExtMode::certified;

  std::vector<char> in_s;
  std::vector<std::vector<int>> s_adj;  // S edges only, kept sorted lazily
  int s_count = 0;
  std::map<int, int> image;  // tree vertex -> host vertex

  int backtrack_budget = 200;  // candidates tried per extension
  long long check_trials = 400;
  long long subset_cap = kDefaultSubsetCap;
  std::uint64_t seed = 0;

  int joined_cache = -1;  // -1 unknown, else 0/1; certified mode fills it

  EmbeddingState(const Graph& g, int d_, int m_,
                 ExtMode mode_ = ExtMode::certified)
      : host(&g), d(d_), m(m_), mode(mode_) {
    if (d_ < 3 || m_ < 1)
      throw std::invalid_argument("EmbeddingState: need d >= 3, m >= 1");
    in_s.assign(g.n, 0);
    s_adj.assign(g.n, {});
  }

  int n() const { return host->n; }
  bool contains(int v) const { return in_s[v] != 0; }
  int deg_s(int v) const { return static_cast<int>(s_adj[v].size()); }
  int max_deg_s() const {
    int md = 0;
    for (int v = 0; v < n(); ++v) md = std::max(md, deg_s(v));
    return md;
  }
  std::vector<int> s_vertices() const {
    std::vector<int> out;
    out.reserve(s_count);
    for (int v = 0; v < n(); ++v)
      if (in_s[v]) out.push_back(v);
    return out;
  }
  bool has_s_edge(int u, int v) const {
    return std::find(s_adj[u].begin(), s_adj[u].end(), v) != s_adj[u].end();
  }
  std::vector<std::pair<int, int>> s_edges() const {
    std::vector<std::pair<int, int>> out;
    for (int v = 0; v < n(); ++v)
      for (int w : s_adj[v])
        if (v < w) out.push_back({v, w});
    return out;
  }

  // Raw mutations; the operations below own all precondition checks.
  void raw_add_vertex(int v) {
    if (in_s[v]) throw std::logic_error("raw_add_vertex: already present");
    in_s[v] = 1;
    ++s_count;
  }
  void raw_remove_vertex(int v) {
    if (!in_s[v] || !s_adj[v].empty())
      throw std::logic_error("raw_remove_vertex: not an isolated S-vertex");
    in_s[v] = 0;
    --s_count;
  }
  void raw_add_edge(int u, int v) {
    s_adj[u].push_back(v);
    s_adj[v].push_back(u);
  }
  void raw_remove_edge(int u, int v) {
    auto drop = [&](int a, int b) {
      auto it = std::find(s_adj[a].begin(), s_adj[a].end(), b);
      if (it == s_adj[a].end())
        throw std::logic_error("raw_remove_edge: missing");
      s_adj[a].erase(it);
    };
    drop(u, v);
    drop(v, u);
  }
};

namespace ext_detail {

// |N'(U) \ V(S)| against (d-1)|U| - sum over U cap V(S) of (deg_S - 1).
inline bool defn_holds(const EmbeddingState& st, const std::vector<int>& u,
                       std::vector<int>& stamp, int& clock) {
  const Graph& g = *st.host;
  ++clock;
  long long lhs = 0;
  for (int x : u)
    for (int w : g.adjacency[x])
      if (stamp[w] != clock) {
        stamp[w] = clock;
        if (!st.in_s[w]) ++lhs;
      }
  long long rhs = static_cast<long long>(st.d - 1) * u.size();
  for (int x : u)
    if (st.in_s[x]) rhs -= st.deg_s(x) - 1;
  return lhs >= rhs;
}

inline int fresh_degree(const EmbeddingState& st, int v) {
  int c = 0;
  for (int w : st.host->adjacency[v])
    if (!st.in_s[w]) ++c;
  return c;
}

}  // namespace ext_detail

inline ExtendabilityVerdict check_extendable(const EmbeddingState& st,
                                             long long cap = -1) {
  if (cap < 0) cap = st.subset_cap;
  const Graph& g = *st.host;
  for (int v = 0; v < g.n; ++v)
    if (st.deg_s(v) > st.d)
      throw std::invalid_argument("check_extendable: S degree above d");
  ExtendabilityVerdict out;
  std::vector<int> stamp(g.n, 0);
  int clock = 0;
  if (st.mode == ExtMode::certified) {
    double budget = 0;
    for (int sz = 1; sz <= 2 * st.m; ++sz) budget += detail::binom(g.n, sz);
    if (budget > static_cast<double>(cap))
      throw std::runtime_error("check_extendable: enumeration budget exceeded");
    out.checked_exhaustively = true;
    out.extendable = true;
    for (int sz = 1; sz <= 2 * st.m && out.extendable; ++sz) {
      detail::for_each_subset(g.n, sz, [&](const std::vector<int>& u) {
        ++out.sets_checked;
        if (!ext_detail::defn_holds(st, u, stamp, clock)) {
          out.extendable = false;
          out.violating_set = u;
          return false;
        }
        return true;
      });
    }
    return out;
  }
  // Heuristic: probe adversarial and random sets. A reported violator is
  // always genuine; a pass is one-sided.
  out.checked_exhaustively = false;
  out.extendable = true;
  auto probe = [&](std::vector<int> u) {
    if (u.empty() || !out.extendable) return;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    ++out.sets_checked;
    if (!ext_detail::defn_holds(st, u, stamp, clock)) {
      out.extendable = false;
      out.violating_set = u;
    }
  };
  std::vector<int> order(g.n);
  for (int i = 0; i < g.n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    int fa = ext_detail::fresh_degree(st, a), fb = ext_detail::fresh_degree(st, b);
    if (fa != fb) return fa < fb;
    return a < b;
  });
  for (int i = 0; i < g.n && i < 2 * st.m + 6; ++i) probe({order[i]});
  // Greedy growth from the weakest starts: extend by the vertex adding the
  // least fresh neighbourhood.
  int starts = std::min<int>(6, g.n);
  for (int s0 = 0; s0 < starts && out.extendable; ++s0) {
    std::vector<int> u{order[s0]};
    std::vector<char> used(g.n, 0), nb(g.n, 0);
    used[order[s0]] = 1;
    for (int w : g.adjacency[order[s0]]) nb[w] = 1;
    while (static_cast<int>(u.size()) < 2 * st.m) {
      int best = -1, best_gain = g.n + 1;
      for (int c = 0; c < g.n; ++c) {
        if (used[c]) continue;
        int gain = 0;
        for (int w : g.adjacency[c])
          if (!nb[w] && !st.in_s[w]) ++gain;
        if (gain < best_gain || (gain == best_gain && c < best)) {
          best_gain = gain;
          best = c;
        }
      }
      if (best < 0) break;
      u.push_back(best);
      used[best] = 1;
      for (int w : g.adjacency[best]) nb[w] = 1;
      probe(u);
      if (!out.extendable) break;
    }
  }
  Rng rng(st.seed, hash_label("extendable-sample"));
  for (long long t = 0; t < st.check_trials && out.extendable; ++t) {
    int sz = 1 + static_cast<int>(rng.below(2 * st.m));
    std::vector<int> u;
    for (int i = 0; i < sz; ++i) u.push_back(static_cast<int>(rng.below(g.n)));
    probe(u);
  }
  return out;
}

namespace ext_detail {

inline void assert_joined(EmbeddingState& st) {
  if (st.joined_cache >= 0) {
    if (!st.joined_cache) throw std::runtime_error("host is not m-joined");
    return;
  }
  JoinednessReport rep;
  try {
    rep = check_m_joined(*st.host, st.m, CheckMode::exhaustive, 0, 0,
                         st.subset_cap);
  } catch (const std::runtime_error&) {
    rep = check_m_joined(*st.host, st.m, CheckMode::sampled, st.check_trials,
                         st.seed);
  }
  st.joined_cache = rep.joined ? 1 : 0;
  if (!rep.joined) throw std::runtime_error("host is not m-joined");
}

// Certified acceptance of a tentative mutation.
inline bool certify(const EmbeddingState& st) {
  return check_extendable(st).extendable;
}

}  // namespace ext_detail

// Attach one new leaf at s. Certified mode backtracks over candidates until
// the grown subgraph re-verifies; heuristic mode takes the candidate keeping
// the most unexplored host in reach.
inline int extend_leaf(EmbeddingState& st, int s) {
  const Graph& g = *st.host;
  if (s < 0 || s >= g.n || !st.in_s[s])
    throw std::invalid_argument("extend_leaf: s is not an S-vertex");
  if (st.deg_s(s) > st.d - 1)
    throw std::invalid_argument("extend_leaf: s already has degree d");
  if (st.s_count > g.n - 2 * st.d * st.m - 3 * st.m - 1)
    throw std::runtime_error("extend_leaf: size condition violated");
  if (st.mode == ExtMode::certified) ext_detail::assert_joined(st);

  std::vector<char> blocked(g.n, 0);  // V(S) together with N(V(S))
  for (int v = 0; v < g.n; ++v)
    if (st.in_s[v]) {
      blocked[v] = 1;
      for (int w : g.adjacency[v]) blocked[w] = 1;
    }
  std::vector<int> cands;
  for (int y : g.adjacency[s])
    if (!st.in_s[y]) cands.push_back(y);
  if (cands.empty())
    throw std::runtime_error("extend_leaf: no viable leaf candidate");
  auto score = [&](int y) {
    int fresh = 0;
    for (int w : g.adjacency[y])
      if (!blocked[w]) ++fresh;
    return fresh;
  };
  std::stable_sort(cands.begin(), cands.end(), [&](int a, int b) {
    int sa = score(a), sb = score(b);
    if (sa != sb) return sa > sb;
    int da = static_cast<int>(g.adjacency[a].size());
    int db = static_cast<int>(g.adjacency[b].size());
    if (da != db) return da > db;
    return a < b;
  });
  if (st.mode == ExtMode::heuristic) {
    int y = cands.front();
    st.raw_add_vertex(y);
    st.raw_add_edge(s, y);
    return y;
  }
  int tried = 0;
  for (int y : cands) {
    if (++tried > st.backtrack_budget) break;
    st.raw_add_vertex(y);
    st.raw_add_edge(s, y);
    if (ext_detail::certify(st)) return y;
    st.raw_remove_edge(s, y);
    st.raw_remove_vertex(y);
  }
  throw std::runtime_error("extend_leaf: no viable leaf candidate");
}

// Peel a degree-1 vertex off S. Any image entry pointing at it goes too.
inline void remove_leaf(EmbeddingState& st, int y) {
  if (y < 0 || y >= st.n() || !st.in_s[y] || st.deg_s(y) != 1)
    throw std::invalid_argument("remove_leaf: not an S-leaf");
  int nb = st.s_adj[y].front();
  st.raw_remove_edge(y, nb);
  st.raw_remove_vertex(y);
  for (auto it = st.image.begin(); it != st.image.end();) {
    if (it->second == y)
      it = st.image.erase(it);
    else
      ++it;
  }
  if (st.mode == ExtMode::certified && !ext_detail::certify(st))
    throw std::logic_error("remove_leaf: extendability lost");
}

inline void insert_edge(EmbeddingState& st, int u, int v) {
  if (u == v || !st.in_s[u] || !st.in_s[v])
    throw std::invalid_argument("insert_edge: endpoints must be S-vertices");
  if (st.deg_s(u) > st.d - 1 || st.deg_s(v) > st.d - 1)
    throw std::invalid_argument("insert_edge: degree bound violated");
  if (!st.host->has_edge(u, v))
    throw std::invalid_argument("insert_edge: not a host edge");
  if (st.has_s_edge(u, v))
    throw std::invalid_argument("insert_edge: edge already present");
  st.raw_add_edge(u, v);
  if (st.mode == ExtMode::certified && !ext_detail::certify(st))
    throw std::logic_error("insert_edge: extendability lost");
}

// Replay T leaf by leaf from t_root, rooted at host vertex v (fresh, or
// already in S with matching image).
inline void embed_tree(EmbeddingState& st, const Tree& t, int t_root, int v) {
  const Graph& g = *st.host;
  if (t_root < 0 || t_root >= t.n || v < 0 || v >= g.n)
    throw std::invalid_argument("embed_tree: bad root");
  if (2 * t.max_degree > st.d)
    throw std::invalid_argument("embed_tree: tree degree above d/2");
  if (2 * st.max_deg_s() > st.d)
    throw std::invalid_argument("embed_tree: working degree above d/2");
  if (st.s_count + t.n > g.n - 2 * st.d * st.m - 3 * st.m)
    throw std::runtime_error("embed_tree: size condition violated");
  auto it = st.image.find(t_root);
  if (it != st.image.end() && it->second != v)
    throw std::invalid_argument("embed_tree: root already embedded elsewhere");
  for (int tv = 0; tv < t.n; ++tv)
    if (tv != t_root && st.image.count(tv))
      throw std::invalid_argument("embed_tree: tree vertex already embedded");
  if (!st.in_s[v]) st.raw_add_vertex(v);
  st.image[t_root] = v;
  // BFS order: each vertex arrives as a leaf under its already-placed parent.
  std::vector<int> par(t.n, -1);
  std::vector<int> order;
  std::queue<int> q;
  q.push(t_root);
  std::vector<char> seen(t.n, 0);
  seen[t_root] = 1;
  while (!q.empty()) {
    int x = q.front();
    q.pop();
    order.push_back(x);
    for (int w : t.adjacency[x])
      if (!seen[w]) {
        seen[w] = 1;
        par[w] = x;
        q.push(w);
      }
  }
  for (int x : order) {
    if (x == t_root) continue;
    int y = extend_leaf(st, st.image.at(par[x]));
    st.image[x] = y;
  }
}

struct ConnectResult {
  int a = -1, b = -1;
  std::vector<int> path;  // a .. b inclusive
  std::pair<int, int> missing{-1, -1};  // path edge absent from S
};

namespace ext_detail {

// Exact-length connection: a path of 2j+1 edges between the source sets whose
// middle edge is withheld from S. Interiors are fresh and distinct. Chains are
// not required to be shortest paths, so a budgeted meet-in-the-middle DFS does
// the search, expanding high-residual vertices first.
inline std::optional<ConnectResult> connect_core(EmbeddingState& st,
                                                 const std::vector<int>& aset,
                                                 const std::vector<int>& bset,
                                                 int j) {
  const Graph& g = *st.host;
  std::vector<char> used(g.n, 0);
  for (int v = 0; v < g.n; ++v) used[v] = st.in_s[v];
  std::vector<int> ach, bch;  // fresh interiors grown from each side
  long long nodes = 40000;
  int cand_left = st.backtrack_budget;
  std::optional<ConnectResult> found;
  int asrc = -1, bsrc = -1;

  auto ranked_fresh = [&](int cur) {
    std::vector<int> out;
    for (int w : g.adjacency[cur])
      if (!used[w]) out.push_back(w);
    std::stable_sort(out.begin(), out.end(), [&](int x, int y) {
      int fx = fresh_degree(st, x), fy = fresh_degree(st, y);
      if (fx != fy) return fx > fy;
      return x < y;
    });
    return out;
  };
  auto apply_chain = [&](int src, const std::vector<int>& ch) {
    int prev = src;
    for (int v : ch) {
      st.raw_add_vertex(v);
      st.raw_add_edge(prev, v);
      prev = v;
    }
  };
  auto unapply_chain = [&](int src, const std::vector<int>& ch) {
    for (int i = static_cast<int>(ch.size()) - 1; i >= 0; --i) {
      int prev = i ? ch[i - 1] : src;
      st.raw_remove_edge(prev, ch[i]);
      st.raw_remove_vertex(ch[i]);
    }
  };

  std::function<bool(int, int)> grow_b = [&](int cur, int rem) -> bool {
    if (nodes-- <= 0 || cand_left <= 0) return false;
    if (rem == 0) {
      if (!g.has_edge(cur, ach.back())) return false;
      --cand_left;
      apply_chain(asrc, ach);
      apply_chain(bsrc, bch);
      if (st.mode == ExtMode::certified && !certify(st)) {
        unapply_chain(bsrc, bch);
        unapply_chain(asrc, ach);
        return false;
      }
      ConnectResult res;
      res.a = asrc;
      res.b = bsrc;
      res.missing = {ach.back(), bch.back()};
      res.path.push_back(asrc);
      res.path.insert(res.path.end(), ach.begin(), ach.end());
      res.path.insert(res.path.end(), bch.rbegin(), bch.rend());
      res.path.push_back(bsrc);
      found = res;
      return true;
    }
    for (int y : ranked_fresh(cur)) {
      used[y] = 1;
      bch.push_back(y);
      if (grow_b(y, rem - 1)) return true;
      bch.pop_back();
      used[y] = 0;
      if (nodes <= 0 || cand_left <= 0) break;
    }
    return false;
  };

  std::vector<int> bs = bset;  // weakest targets first: they run out of room
  std::stable_sort(bs.begin(), bs.end(), [&](int x, int y) {
    int fx = fresh_degree(st, x), fy = fresh_degree(st, y);
    if (fx != fy) return fx < fy;
    return x < y;
  });
  std::function<bool(int, int)> grow_a = [&](int cur, int rem) -> bool {
    if (nodes-- <= 0 || cand_left <= 0) return false;
    if (rem == 0) {
      for (int b : bs) {
        bsrc = b;
        if (grow_b(b, j)) return true;
        if (nodes <= 0 || cand_left <= 0) break;
      }
      return false;
    }
    for (int y : ranked_fresh(cur)) {
      used[y] = 1;
      ach.push_back(y);
      if (grow_a(y, rem - 1)) return true;
      ach.pop_back();
      used[y] = 0;
      if (nodes <= 0 || cand_left <= 0) break;
    }
    return false;
  };

  std::vector<int> as = aset;
  std::stable_sort(as.begin(), as.end(), [&](int x, int y) {
    int fx = fresh_degree(st, x), fy = fresh_degree(st, y);
    if (fx != fy) return fx > fy;
    return x < y;
  });
  for (int a : as) {
    asrc = a;
    if (grow_a(a, j)) break;
    if (nodes <= 0 || cand_left <= 0) break;
  }
  return found;
}

}  // namespace ext_detail

// Join A to B by a fresh path of 2j+1 edges, one designated edge of which is
// left out of S so the two halves stay peelable.
inline ConnectResult connect_sets(EmbeddingState& st,
                                  const std::vector<int>& a_set,
                                  const std::vector<int>& b_set, int j) {
  const Graph& g = *st.host;
  if (a_set.empty() || b_set.empty())
    throw std::invalid_argument("connect_sets: empty endpoint set");
  if (j < 1) throw std::invalid_argument("connect_sets: j >= 1 required");
  std::set<int> aa(a_set.begin(), a_set.end());
  for (int b : b_set)
    if (aa.count(b)) throw std::invalid_argument("connect_sets: sets overlap");
  for (int v : a_set)
    if (!st.in_s[v] || 2 * st.deg_s(v) > st.d)
      throw std::invalid_argument("connect_sets: endpoint unusable");
  for (int v : b_set)
    if (!st.in_s[v] || 2 * st.deg_s(v) > st.d)
      throw std::invalid_argument("connect_sets: endpoint unusable");
  int k = connect_depth(st.d, st.m);
  // Size condition n - 10dm, relaxed to bare fresh room for the 2j interiors
  // on hosts too small for the 10dm slack to be satisfiable at all.
  {
    int cap = g.n - 10 * st.d * st.m;
    if (cap < 2 * j + 1) cap = g.n - (2 * j + 1);
    if (st.s_count > cap)
      throw std::runtime_error("connect_sets: size condition violated");
  }
  if (j <= k) {
    // need |A|,|B| >= 2m/(d-1)^j, compared in integers
    double pw = 1;
    for (int i = 0; i < j; ++i) pw *= (st.d - 1);
    if (a_set.size() * pw < 2 * st.m || b_set.size() * pw < 2 * st.m)
      throw std::invalid_argument("connect_sets: endpoint sets too small");
    auto res = ext_detail::connect_core(st, a_set, b_set, j);
    if (!res) throw std::runtime_error("connect_sets: connection not found");
    return *res;
  }
  // Long connections: lead out of one A-vertex with a plain grown path, then
  // make the short connection from its tip.
  std::vector<int> starts = a_set;
  std::stable_sort(starts.begin(), starts.end(), [&](int x, int y) {
    return ext_detail::fresh_degree(st, x) > ext_detail::fresh_degree(st, y);
  });
  int grow = 2 * (j - k);
  for (std::size_t si = 0; si < starts.size() && si < 8; ++si) {
    int a = starts[si];
    std::vector<int> prefix{a};
    bool ok = true;
    try {
      for (int i = 0; i < grow; ++i) prefix.push_back(extend_leaf(st, prefix.back()));
    } catch (const std::runtime_error&) {
      ok = false;
    }
    if (ok) {
      auto res = ext_detail::connect_core(st, {prefix.back()}, b_set, k);
      if (res) {
        ConnectResult full;
        full.a = a;
        full.b = res->b;
        full.missing = res->missing;
        full.path = prefix;
        full.path.insert(full.path.end(), res->path.begin() + 1,
                         res->path.end());
        return full;
      }
    }
    while (prefix.size() > 1) {
      remove_leaf(st, prefix.back());
      prefix.pop_back();
    }
  }
  throw std::runtime_error("connect_sets: connection not found");
}

// An a,b-path of exactly len edges, fully present in S afterwards.
inline std::vector<int> connect_path(EmbeddingState& st, int a, int b,
                                     int len) {
  const Graph& g = *st.host;
  int k = connect_depth(st.d, st.m);
  if (len < 2 * k + 1)
    throw std::runtime_error("connect_path: length condition violated");
  if (a == b || a < 0 || b < 0 || a >= g.n || b >= g.n || !st.in_s[a] ||
      !st.in_s[b])
    throw std::invalid_argument("connect_path: endpoints must be S-vertices");
  if (2 * st.deg_s(a) > st.d || 2 * st.deg_s(b) > st.d)
    throw std::invalid_argument("connect_path: endpoint degree above d/2");
  {
    // Feasibility floor: len-1 interiors plus one spare must stay available
    // even when the margin term overshoots the host size.
    int cap = std::max(g.n - 10 * st.d * st.m - (len - 2 * k - 1), g.n - len);
    if (st.s_count > cap)
      throw std::runtime_error("connect_path: size condition violated");
  }
  std::vector<int> prefix{a};
  try {
    for (int i = 0; i < len - 2 * k - 1; ++i)
      prefix.push_back(extend_leaf(st, prefix.back()));
    auto res = ext_detail::connect_core(st, {prefix.back()}, {b}, k);
    if (!res) throw std::runtime_error("connect_path: connection not found");
    insert_edge(st, res->missing.first, res->missing.second);
    prefix.insert(prefix.end(), res->path.begin() + 1, res->path.end());
    return prefix;
  } catch (...) {
    while (prefix.size() > 1) {
      remove_leaf(st, prefix.back());
      prefix.pop_back();
    }
    throw;
  }
}

struct EmbedCheck {
  bool ok = true;
  std::string reason;
};

inline EmbedCheck verify_embedding(const Graph& host, const Tree& t,
                                   const std::map<int, int>& image,
                                   bool require_spanning = false) {
  EmbedCheck chk;
  std::vector<char> used(host.n, 0);
  for (int tv = 0; tv < t.n; ++tv) {
    auto it = image.find(tv);
    if (it == image.end()) {
      chk.ok = false;
      chk.reason = "tree vertex " + std::to_string(tv) + " has no image";
      return chk;
    }
    int hv = it->second;
    if (hv < 0 || hv >= host.n) {
      chk.ok = false;
      chk.reason = "image out of range";
      return chk;
    }
    if (used[hv]) {
      chk.ok = false;
      chk.reason = "image not injective at host vertex " + std::to_string(hv);
      return chk;
    }
    used[hv] = 1;
  }
  for (int tv = 0; tv < t.n; ++tv)
    for (int tw : t.adjacency[tv]) {
      if (tv > tw) continue;
      if (!host.has_edge(image.at(tv), image.at(tw))) {
        chk.ok = false;
        chk.reason = "tree edge maps to a non-edge";
        return chk;
      }
    }
  if (require_spanning) {
    for (int v = 0; v < host.n; ++v)
      if (!used[v]) {
        chk.ok = false;
        chk.reason = "host vertex " + std::to_string(v) + " uncovered";
        return chk;
      }
  }
  return chk;
}

inline std::string dump_embedding(const EmbeddingState& st) {
  nlohmann::json j;
  j["image"] = nlohmann::json::object();
  for (auto [tv, hv] : st.image) j["image"][std::to_string(tv)] = hv;
  auto edges = nlohmann::json::array();
  for (auto [u, v] : st.s_edges()) edges.push_back({u, v});
  j["s_edges"] = edges;
  return j.dump(2);
}

namespace ext_detail {

// One covering pass over a subtree view: embed it completely, steering
// order_by_paths targets onto uncovered hosts when a short connection with a
// withheld edge exists.
inline void cover_round(EmbeddingState& st, const SubtreeView& sub,
                        const std::vector<int>& q_local,
                        std::set<int>& uncovered, int root_local) {
  const Tree& tv = sub.tree;
  auto glob = [&](int lv) { return sub.to_orig[lv]; };
  if (!st.image.count(glob(root_local)))
    throw std::logic_error("cover_round: root not embedded");
  int kx = connect_depth(st.d, st.m);
  std::vector<std::pair<int, int>> pending;
  if (!q_local.empty()) {
    auto steps = order_by_paths(tv, root_local, q_local, 8);
    for (const auto& stp : steps) {
      if (stp.length == 0) continue;  // the root itself was a target
      auto walk = tree_path(tv, stp.attach, stp.q);
      int len = stp.length;
      int cur = st.image.at(glob(stp.attach));
      int done = 0;
      int prefix_len = len - (2 * kx + 1);
      if (!uncovered.empty() && prefix_len >= 1) {
        for (; done < prefix_len; ++done) {
          cur = extend_leaf(st, cur);
          st.image[glob(walk[done + 1])] = cur;
        }
        std::vector<int> targets(uncovered.begin(), uncovered.end());
        auto res = connect_core(st, {cur}, targets, kx);
        if (res) {
          for (std::size_t i = 1; i < res->path.size(); ++i)
            st.image[glob(walk[done + i])] = res->path[i];
          pending.push_back(res->missing);
          uncovered.erase(res->b);
          continue;
        }
      }
      for (; done < len; ++done) {
        cur = extend_leaf(st, cur);
        st.image[glob(walk[done + 1])] = cur;
      }
    }
  }
  for (auto [u, w] : pending) insert_edge(st, u, w);
  // Complete the subtree: whatever is still unplaced hangs as leaves below
  // already-placed vertices.
  std::vector<char> placed(tv.n, 0);
  std::queue<int> bfs;
  for (int lv = 0; lv < tv.n; ++lv)
    if (st.image.count(glob(lv))) {
      placed[lv] = 1;
      bfs.push(lv);
    }
  while (!bfs.empty()) {
    int x = bfs.front();
    bfs.pop();
    for (int w : tv.adjacency[x])
      if (!placed[w]) {
        placed[w] = 1;
        int y = extend_leaf(st, st.image.at(glob(x)));
        st.image[glob(w)] = y;
        bfs.push(w);
      }
  }
}

}  // namespace ext_detail

// Embed T with t_root on v so the image of the separated set Q contains X.
// Stages divide the remaining tree so each pass keeps three targets' worth of
// steering chances per uncovered vertex; a stage that fails to shrink the
// uncovered set aborts and rolls the state back.
inline void embed_cover(EmbeddingState& st, const Tree& tr,
                        const std::vector<int>& q, const std::vector<int>& x,
                        int t_root, int v, int max_stages = 2) {
  if (x.empty()) {
    embed_tree(st, tr, t_root, v);
    return;
  }
  const Graph& g = *st.host;
  if (t_root < 0 || t_root >= tr.n || v < 0 || v >= g.n)
    throw std::invalid_argument("embed_cover: bad root");
  if (q.empty() || !pairwise_separated(tr, q, 16))
    throw std::invalid_argument("embed_cover: Q must be 16-separated");
  {
    std::set<int> xs(x.begin(), x.end());
    if (xs.size() != x.size() || xs.count(v))
      throw std::invalid_argument("embed_cover: bad cover targets");
    for (int t : x)
      if (t < 0 || t >= g.n || st.in_s[t])
        throw std::invalid_argument("embed_cover: cover target already used");
  }
  if (q.size() < 3 * x.size())
    throw std::invalid_argument("embed_cover: need |Q| >= 3|X|");
  if (2 * tr.max_degree > st.d)
    throw std::invalid_argument("embed_cover: tree degree above d/2");
  for (int tv = 0; tv < tr.n; ++tv)
    if (tv != t_root && st.image.count(tv))
      throw std::invalid_argument("embed_cover: tree vertex already embedded");
  int kx = connect_depth(st.d, st.m);
  if (st.s_count + static_cast<int>(x.size()) + tr.n >
      g.n - 10 * st.d * st.m - 2 * kx)
    throw std::runtime_error("embed_cover: size condition violated");
  auto it = st.image.find(t_root);
  if (it != st.image.end() && it->second != v)
    throw std::invalid_argument("embed_cover: root already embedded elsewhere");

  EmbeddingState snapshot = st;
  try {
    if (!st.in_s[v]) st.raw_add_vertex(v);
    st.image[t_root] = v;
    for (int t : x) st.raw_add_vertex(t);
    std::set<int> uncovered(x.begin(), x.end());
    std::vector<int> rest(tr.n);
    for (int i = 0; i < tr.n; ++i) rest[i] = i;
    int root_g = t_root;
    for (int stage = 1;; ++stage) {
      SubtreeView sub = make_subtree(tr, rest);
      std::vector<int> pos(tr.n, -1);
      for (std::size_t i = 0; i < sub.to_orig.size(); ++i)
        pos[sub.to_orig[i]] = static_cast<int>(i);
      std::vector<int> q_local;
      for (int qv : q)
        if (pos[qv] >= 0) q_local.push_back(pos[qv]);
      int root_local = pos[root_g];
      std::size_t before = uncovered.size();
      bool last = stage >= max_stages || uncovered.empty() ||
                  q_local.size() < 9 * uncovered.size() || q_local.size() < 4;
      if (last) {
        ext_detail::cover_round(st, sub, q_local, uncovered, root_local);
        if (!uncovered.empty())
          throw std::runtime_error("embed_cover: coverage stalled");
        break;
      }
      Division dv = divide_by_set(sub.tree, q_local);
      const std::vector<int>* mine = &dv.part1;
      const std::vector<int>* rest_part = &dv.part2;
      if (!std::binary_search(dv.part1.begin(), dv.part1.end(), root_local))
        std::swap(mine, rest_part);
      std::vector<int> stage_glob, rest_glob;
      for (int lv : *mine) stage_glob.push_back(sub.to_orig[lv]);
      for (int lv : *rest_part) rest_glob.push_back(sub.to_orig[lv]);
      SubtreeView stg = make_subtree(tr, stage_glob);
      std::vector<int> spos(tr.n, -1);
      for (std::size_t i = 0; i < stg.to_orig.size(); ++i)
        spos[stg.to_orig[i]] = static_cast<int>(i);
      std::vector<int> q_stage;
      for (int qv : q)
        if (spos[qv] >= 0) q_stage.push_back(spos[qv]);
      ext_detail::cover_round(st, stg, q_stage, uncovered, spos[root_g]);
      if (!uncovered.empty() && uncovered.size() >= before)
        throw std::runtime_error("embed_cover: coverage stalled");
      root_g = sub.to_orig[dv.shared];
      rest = rest_glob;
    }
  } catch (...) {
    st = snapshot;
    throw;
  }
}

}  // namespace spanforge
