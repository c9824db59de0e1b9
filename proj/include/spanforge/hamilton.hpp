#pragma once
// Pósa rotation-extension machinery. A longest path is grown greedily and
// rotated around its fixed front end to expose new endpoints; endpoints with
// off-path neighbours extend the path, adjacent endpoint pairs close cycles.
// Boosters (non-edges whose addition makes a graph Hamiltonian) come from
// endpoint pairs of the rotation structure, and cycle_on_subset feeds boosters
// found in the ambient graph back into a sparse expander until a spanning
// cycle of the subset closes.

#include <algorithm>
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

namespace spanforge {

struct ExpanderVerdict {
  bool expander = false;
  std::optional<std::vector<int>> witness;
  bool exhaustive = false;
  long long sets_checked = 0;
};

namespace posa_detail {

// |N(A) \ A| for the expander condition, stamp-clock based.
inline int external_neighbourhood(const Graph& g, const std::vector<int>& a,
                                  std::vector<int>& stamp, int& clock) {
  ++clock;
  for (int v : a) stamp[v] = clock;
  int cnt = 0;
  for (int v : a)
    for (int w : g.adjacency[v])
      if (stamp[w] != clock) {
        stamp[w] = clock;
        ++cnt;
      }
  return cnt;
}

}  // namespace posa_detail

// Every A with |A| <= n/4 must satisfy |N(A)| >= 2|A|. Exhaustive mode
// enumerates all such A (subject to the subset cap); sampled mode checks all
// singletons and pairs, adversarial greedy growths, and random sets. A
// sampled pass is one-sided; a witness is always genuine.
inline ExpanderVerdict is_n2_expander(const Graph& h,
                                      CheckMode mode = CheckMode::exhaustive,
                                      long long trials = 2000,
                                      std::uint64_t seed = 0,
                                      long long cap = kDefaultSubsetCap) {
  ExpanderVerdict out;
  out.expander = true;
  int limit = h.n / 4;
  std::vector<int> stamp(h.n, 0);
  int clock = 0;
  auto violates = [&](const std::vector<int>& a) {
    return posa_detail::external_neighbourhood(h, a, stamp, clock) <
           2 * static_cast<int>(a.size());
  };
  if (mode == CheckMode::exhaustive) {
    double budget = 0;
    for (int sz = 1; sz <= limit; ++sz) budget += detail::binom(h.n, sz);
    if (budget > static_cast<double>(cap))
      throw std::runtime_error("is_n2_expander: enumeration budget exceeded");
    out.exhaustive = true;
    for (int sz = 1; sz <= limit && out.expander; ++sz) {
      detail::for_each_subset(h.n, sz, [&](const std::vector<int>& a) {
        ++out.sets_checked;
        if (violates(a)) {
          out.expander = false;
          out.witness = a;
          return false;
        }
        return true;
      });
    }
    return out;
  }
  auto probe = [&](std::vector<int> a) {
    if (!out.expander || a.empty() || static_cast<int>(a.size()) > limit)
      return;
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    if (static_cast<int>(a.size()) > limit) return;
    ++out.sets_checked;
    if (violates(a)) {
      out.expander = false;
      out.witness = a;
    }
  };
  for (int v = 0; v < h.n && out.expander; ++v) probe({v});
  for (int u = 0; u < h.n && out.expander; ++u)
    for (int v = u + 1; v < h.n && out.expander; ++v) probe({u, v});
  // Greedy adversarial growth: keep adding the vertex that contributes the
  // fewest new neighbours.
  std::vector<int> order(h.n);
  for (int i = 0; i < h.n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (h.adjacency[a].size() != h.adjacency[b].size())
      return h.adjacency[a].size() < h.adjacency[b].size();
    return a < b;
  });
  for (int s0 = 0; s0 < h.n && s0 < 6 && out.expander; ++s0) {
    std::vector<int> a{order[s0]};
    std::vector<char> used(h.n, 0), nb(h.n, 0);
    used[order[s0]] = 1;
    for (int w : h.adjacency[order[s0]]) nb[w] = 1;
    while (static_cast<int>(a.size()) < limit && out.expander) {
      int best = -1, best_gain = h.n + 1;
      for (int c = 0; c < h.n; ++c) {
        if (used[c]) continue;
        int gain = 0;
        for (int w : h.adjacency[c])
          if (!nb[w]) ++gain;
        if (gain < best_gain) {
          best_gain = gain;
          best = c;
        }
      }
      if (best < 0) break;
      a.push_back(best);
      used[best] = 1;
      for (int w : h.adjacency[best]) nb[w] = 1;
      probe(a);
    }
  }
  Rng rng(seed, hash_label("expander-sample"));
  for (long long t = 0; t < trials && out.expander; ++t) {
    int sz = 1 + static_cast<int>(rng.below(std::max(1, limit)));
    std::vector<int> a;
    for (int i = 0; i < sz; ++i) a.push_back(static_cast<int>(rng.below(h.n)));
    probe(a);
  }
  return out;
}

struct RotationResult {
  std::vector<int> path;
  std::vector<int> endpoint_set;  // endpoints reachable fixing path.front()
  bool closed = false;            // spanning path with adjacent ends found
  // Rotation bookkeeping: pivots to replay from base_path per endpoint.
  std::vector<int> base_path;
  std::map<int, std::vector<int>> rotation_chains;
};

// Re-derive the rotated path from the base path and the recorded pivots.
// Each rotation flips the suffix after the pivot, so the old neighbour of the
// pivot becomes the new endpoint.
inline std::vector<int> replay_rotations(const Graph& h, std::vector<int> path,
                                         const std::vector<int>& pivots) {
  for (int pivot : pivots) {
    int k = static_cast<int>(path.size()) - 1;
    auto it = std::find(path.begin(), path.end(), pivot);
    if (it == path.end())
      throw std::logic_error("replay_rotations: pivot off path");
    int i = static_cast<int>(it - path.begin());
    if (i > k - 2)
      throw std::logic_error("replay_rotations: pivot position invalid");
    if (!h.has_edge(path[k], pivot))
      throw std::logic_error("replay_rotations: rotation edge missing");
    std::reverse(path.begin() + i + 1, path.end());
  }
  return path;
}

namespace posa_detail {

inline RotationResult run_from(const Graph& h, int s0, long long round_budget) {
  std::vector<char> on(h.n, 0);
  std::vector<int> path{s0};
  on[s0] = 1;
  auto extend_greedy = [&]() {
    bool more = true;
    while (more) {
      more = false;
      for (int w : h.adjacency[path.back()])
        if (!on[w]) {
          path.push_back(w);
          on[w] = 1;
          more = true;
          break;
        }
    }
    more = true;
    while (more) {
      more = false;
      for (int w : h.adjacency[path.front()])
        if (!on[w]) {
          path.insert(path.begin(), w);
          on[w] = 1;
          more = true;
          break;
        }
    }
  };
  while (true) {
    extend_greedy();
    std::map<int, std::vector<int>> chains, paths;
    std::vector<int> base = path;
    int e0 = base.back();
    chains[e0] = {};
    paths[e0] = base;
    std::queue<int> bfs;
    bfs.push(e0);
    long long rotations = 0;
    bool extended = false;
    while (!bfs.empty() && !extended) {
      int e = bfs.front();
      bfs.pop();
      std::vector<int> p = paths[e];
      int off = -1;
      for (int w : h.adjacency[e])
        if (!on[w]) {
          off = w;
          break;
        }
      if (off >= 0) {
        p.push_back(off);
        on[off] = 1;
        path = p;
        extended = true;
        break;
      }
      if (h.has_edge(e, p.front())) {
        if (static_cast<int>(p.size()) == h.n) {
          RotationResult res;
          res.closed = true;
          res.path = p;
          res.base_path = base;
          res.rotation_chains = chains;
          for (const auto& [ep, ch] : chains) res.endpoint_set.push_back(ep);
          return res;
        }
        // Cycle on V(p) but not spanning: step off the cycle through any
        // outside neighbour, turning the cycle into a longer path.
        for (std::size_t i = 0; i < p.size() && !extended; ++i)
          for (int w : h.adjacency[p[i]]) {
            if (on[w]) continue;
            std::vector<int> np{w};
            for (int j = static_cast<int>(i); j >= 0; --j) np.push_back(p[j]);
            for (int j = static_cast<int>(p.size()) - 1;
                 j > static_cast<int>(i); --j)
              np.push_back(p[j]);
            on[w] = 1;
            path = np;
            extended = true;
            break;
          }
        if (extended) break;
      }
      std::vector<int> posi(h.n, -1);
      int k = static_cast<int>(p.size()) - 1;
      for (int idx = 0; idx <= k; ++idx) posi[p[idx]] = idx;
      for (int w : h.adjacency[e]) {
        int i = posi[w];
        if (i < 0 || i > k - 2) continue;
        int ne = p[i + 1];
        if (chains.count(ne)) continue;
        if (++rotations > round_budget) break;
        std::vector<int> np = p;
        std::reverse(np.begin() + i + 1, np.end());
        std::vector<int> ch = chains[e];
        ch.push_back(w);
        chains[ne] = std::move(ch);
        paths[ne] = std::move(np);
        bfs.push(ne);
      }
      if (rotations > round_budget) break;
    }
    if (extended) continue;
    RotationResult res;
    res.path = path;
    res.base_path = base;
    res.rotation_chains = chains;
    for (const auto& [ep, ch] : chains) res.endpoint_set.push_back(ep);
    return res;
  }
}

}  // namespace posa_detail

// Longest path by rotation-extension. Deterministic: smallest-neighbour
// greedy growth, breadth-first rotation rounds, restarts over a fixed start
// list. budget < 0 means 50*n rotations per round.
inline RotationResult posa_longest_path(const Graph& h, long long budget = -1) {
  RotationResult best;
  if (h.n == 0) return best;
  long long round_budget = budget < 0 ? 50LL * h.n : budget;
  std::vector<int> starts;
  if (h.n <= 12)
    for (int v = 0; v < h.n; ++v) starts.push_back(v);
  else
    starts = {0, 1, 2};
  for (int s0 : starts) {
    RotationResult r = posa_detail::run_from(h, s0, round_budget);
    if (r.closed) return r;
    if (r.path.size() > best.path.size()) best = r;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Boosters.

struct BoosterSet {
  std::vector<std::pair<int, int>> non_edges;
  std::uint64_t base_graph_id = 0;
};

inline std::uint64_t graph_fingerprint(const Graph& g) {
  std::uint64_t x = hash_label("graph") ^ static_cast<std::uint64_t>(g.n);
  auto mix = [&](std::uint64_t v) {
    x ^= v + 0x9e3779b97f4a7c15ull + (x << 6) + (x >> 2);
  };
  for (int u = 0; u < g.n; ++u)
    for (int w : g.adjacency[u])
      if (u < w) mix((static_cast<std::uint64_t>(u) << 32) | w);
  return x;
}

// Exact Hamilton cycle by bitmask DP with reconstruction. Exponential; the
// cap guards against misuse.
inline std::optional<std::vector<int>> hamilton_cycle_exact(const Graph& g,
                                                            int cap = 20) {
  if (g.n > cap)
    throw std::runtime_error("hamilton_cycle_exact: cap exceeded");
  if (g.n < 3) return std::nullopt;
  int n = g.n;
  int full = (1 << n) - 1;
  // dp[mask][v]: path from 0 through mask ending at v; par for rebuild
  std::vector<std::vector<char>> dp(1 << n, std::vector<char>(n, 0));
  std::vector<std::vector<int>> par(1 << n, std::vector<int>(n, -1));
  dp[1][0] = 1;
  for (int mask = 1; mask <= full; ++mask) {
    if (!(mask & 1)) continue;
    for (int v = 0; v < n; ++v) {
      if (!dp[mask][v]) continue;
      for (int w : g.adjacency[v]) {
        if (mask & (1 << w)) continue;
        int nm = mask | (1 << w);
        if (!dp[nm][w]) {
          dp[nm][w] = 1;
          par[nm][w] = v;
        }
      }
    }
  }
  for (int v = 1; v < n; ++v) {
    if (!dp[full][v] || !g.has_edge(v, 0)) continue;
    std::vector<int> cyc;
    int mask = full, cur = v;
    while (cur != -1) {
      cyc.push_back(cur);
      int pv = par[mask][cur];
      mask ^= 1 << cur;
      cur = pv;
    }
    std::reverse(cyc.begin(), cyc.end());
    return cyc;
  }
  return std::nullopt;
}

inline bool is_cycle_in(const Graph& g, const std::vector<int>& cyc) {
  if (cyc.size() < 3) return false;
  std::set<int> seen(cyc.begin(), cyc.end());
  if (seen.size() != cyc.size()) return false;
  for (std::size_t i = 0; i < cyc.size(); ++i) {
    int a = cyc[i], b = cyc[(i + 1) % cyc.size()];
    if (a < 0 || a >= g.n || !g.has_edge(a, b)) return false;
  }
  return true;
}

inline bool is_path_in(const Graph& g, const std::vector<int>& p) {
  if (p.empty()) return false;
  std::set<int> seen(p.begin(), p.end());
  if (seen.size() != p.size()) return false;
  for (std::size_t i = 0; i + 1 < p.size(); ++i)
    if (!g.has_edge(p[i], p[i + 1])) return false;
  return true;
}

// All boosters of H. Exact (DP per non-edge) up to cap vertices; above the
// cap either an error (require_exact) or the rotation-certified variant,
// which only returns pairs whose added edge yields a posa-closed cycle.
inline BoosterSet boosters_of(const Graph& h, int cap = 12,
                              bool require_exact = false) {
  BoosterSet out;
  out.base_graph_id = graph_fingerprint(h);
  bool exact = h.n <= cap;
  if (!exact && require_exact)
    throw std::runtime_error("boosters_of: cap exceeded");
  for (int u = 0; u < h.n; ++u)
    for (int v = u + 1; v < h.n; ++v) {
      if (h.has_edge(u, v)) continue;
      Graph plus = h;
      plus.add_edge(u, v);
      plus.sort_lists();
      if (exact) {
        auto cyc = hamilton_cycle_exact(plus, cap);
        if (cyc && is_cycle_in(plus, *cyc)) out.non_edges.push_back({u, v});
      } else {
        RotationResult r = posa_longest_path(plus);
        if (r.closed && is_path_in(plus, r.path) &&
            static_cast<int>(r.path.size()) == plus.n &&
            plus.has_edge(r.path.front(), r.path.back()))
          out.non_edges.push_back({u, v});
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Cycles covering a subset.

struct CycleStats {
  int boosters_added = 0;
  std::vector<int> mu_history;            // longest-path sizes per iteration
  std::vector<long long> booster_counts;  // candidate boosters seen per round
};

inline Graph induced_subgraph(const Graph& g, const std::vector<int>& u) {
  std::vector<int> pos(g.n, -1);
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0 || u[i] >= g.n || pos[u[i]] >= 0)
      throw std::invalid_argument("induced_subgraph: bad vertex set");
    pos[u[i]] = static_cast<int>(i);
  }
  Graph out(static_cast<int>(u.size()));
  for (std::size_t i = 0; i < u.size(); ++i)
    for (int w : g.adjacency[u[i]])
      if (pos[w] > static_cast<int>(i)) out.add_edge(static_cast<int>(i), pos[w]);
  out.sort_lists();
  return out;
}

namespace posa_detail {

// Endpoint pairs (front fixed at path.front() after reversal): rotate the
// given maximal path around its back end and report endpoint -> path.
inline std::map<int, std::vector<int>> endpoint_paths(const Graph& h,
                                                      const std::vector<int>& base,
                                                      long long budget) {
  std::map<int, std::vector<int>> paths;
  std::queue<int> bfs;
  paths[base.back()] = base;
  bfs.push(base.back());
  long long rotations = 0;
  while (!bfs.empty()) {
    int e = bfs.front();
    bfs.pop();
    std::vector<int> p = paths[e];
    std::vector<int> posi(h.n, -1);
    int k = static_cast<int>(p.size()) - 1;
    for (int idx = 0; idx <= k; ++idx) posi[p[idx]] = idx;
    for (int w : h.adjacency[e]) {
      int i = posi[w];
      if (i < 0 || i > k - 2) continue;
      int ne = p[i + 1];
      if (paths.count(ne)) continue;
      if (++rotations > budget) return paths;
      std::vector<int> np = p;
      std::reverse(np.begin() + i + 1, np.end());
      paths[ne] = std::move(np);
      bfs.push(ne);
    }
  }
  return paths;
}

}  // namespace posa_detail

// Hamilton cycle of G[U], built on a sparse expander H_sparse (indexed by
// sorted position in U) and repaired with boosters drawn from G. The longest
// path must grow with every accepted booster; stalls and missing boosters
// surface as errors.
inline std::vector<int> cycle_on_subset(const Graph& g,
                                        const std::vector<int>& u_in,
                                        const Graph& h_sparse,
                                        CheckMode mode = CheckMode::sampled,
                                        CycleStats* stats = nullptr,
                                        std::uint64_t seed = 0) {
  std::vector<int> u = u_in;
  std::sort(u.begin(), u.end());
  if (u.empty() || std::adjacent_find(u.begin(), u.end()) != u.end() ||
      u.front() < 0 || u.back() >= g.n)
    throw std::invalid_argument("cycle_on_subset: bad vertex set");
  if (h_sparse.n != static_cast<int>(u.size()))
    throw std::invalid_argument("cycle_on_subset: H_sparse must live on U");
  for (int v = 0; v < h_sparse.n; ++v)
    for (int w : h_sparse.adjacency[v])
      if (v < w && !g.has_edge(u[v], u[w]))
        throw std::invalid_argument("cycle_on_subset: H_sparse edge not in G");
  auto ev = is_n2_expander(h_sparse, mode, 2000, seed);
  if (!ev.expander)
    throw std::runtime_error("cycle_on_subset: expander precondition failed");

  Graph hl = h_sparse;
  int mu_prev = 0;
  for (int iter = 0; iter <= h_sparse.n + 4; ++iter) {
    RotationResult rot = posa_longest_path(hl);
    int mu = static_cast<int>(rot.path.size());
    if (stats) stats->mu_history.push_back(mu);
    if (rot.closed) {
      std::vector<int> cyc;
      cyc.reserve(rot.path.size());
      for (int v : rot.path) cyc.push_back(u[v]);
      if (!is_cycle_in(g, cyc))
        throw std::logic_error("cycle_on_subset: produced an invalid cycle");
      return cyc;
    }
    if (mu_prev > 0 && mu <= mu_prev)
      throw std::runtime_error("cycle_on_subset: booster loop stalled");
    mu_prev = mu;
    // Booster candidates: endpoint pairs of the rotation structure over
    // V(P), then exact enumeration for tiny spans. Count them; take the
    // lexicographically first present in G.
    std::set<std::pair<int, int>> candidates;  // boosters of hl[V(P)]
    auto note = [&](int x, int y) {
      if (x == y || hl.has_edge(x, y)) return;
      candidates.insert({std::min(x, y), std::max(x, y)});
    };
    long long budget = 50LL * hl.n;
    auto firsts = posa_detail::endpoint_paths(hl, rot.path, budget);
    for (const auto& [e1, p1] : firsts) {
      std::vector<int> rev(p1.rbegin(), p1.rend());
      auto seconds = posa_detail::endpoint_paths(hl, rev, budget);
      for (const auto& [e2, p2] : seconds) note(e1, e2);
    }
    if (rot.path.size() <= 12) {
      std::vector<int> vp = rot.path;
      std::sort(vp.begin(), vp.end());
      Graph sub = induced_subgraph(hl, vp);
      auto bs = boosters_of(sub, 12);
      for (auto [x, y] : bs.non_edges) note(vp[x], vp[y]);
    }
    if (stats) stats->booster_counts.push_back(
        static_cast<long long>(candidates.size()));
    std::optional<std::pair<int, int>> pick;
    for (const auto& [x, y] : candidates)
      if (g.has_edge(u[x], u[y])) {
        pick = {x, y};
        break;
      }
    if (!pick) throw std::runtime_error("cycle_on_subset: no booster in G");
    hl.add_edge(pick->first, pick->second);
    hl.sort_lists();
    if (stats) ++stats->boosters_added;
  }
  throw std::runtime_error("cycle_on_subset: booster loop did not converge");
}

inline std::string cycle_to_json(const std::vector<int>& cyc) {
  nlohmann::json arr = nlohmann::json::array();
  for (int v : cyc) arr.push_back(v);
  if (!cyc.empty()) arr.push_back(cyc.front());
  return arr.dump();
}

}  // namespace spanforge
