#pragma once
// Absorption gadgetry. Absorbers trade a fixed path for one that swallows a
// designated vertex; connectors are path clusters whose end-sets are pairwise
// joined by spanning paths; devices bundle either a matchmaker pair (W0, W1)
// or a bank of composite absorbers; reservoirs wire a device into a partial
// tree embedding so any half of R can be absorbed on demand.

#include <algorithm>
#include <array>
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
#include "spanforge/extend.hpp"
#include "spanforge/graph.hpp"
#include "spanforge/matching.hpp"
#include "spanforge/rng.hpp"
#include "spanforge/tree.hpp"

namespace spanforge {

struct GadgetConfig {
  int absorber_k = 3;     // elementary absorber parameter, |A| = k^2 + 2
  int star_size = 8;      // match-variant A_x sizes, one slot per matching
  int match_rounds = 2;   // rounds per class pair (4 pairs per round)
  int per_vertex = 6;     // absorber cap per target vertex (path variant)
  int template_count = 1; // guide template rounds
  int template_retries = 500;
  int link_len = 3;       // minimum chain link length
  int verify_samples = 30;
  int retries = 5;
  int leaf_separation = 18;
};

// ---------------------------------------------------------------------------
// Absorbers.

struct Absorber {
  std::vector<int> a;  // gadget vertex set, ends included
  int x = -1, y = -1;
  std::vector<int> absorbable;
  std::vector<int> path_without;             // x,y-path with vertex set A
  std::map<int, std::vector<int>> path_with; // per v: vertex set A + v
};

namespace gadget_detail {

inline bool host_path_ok(const Graph& g, const std::vector<int>& p) {
  if (p.empty()) return false;
  std::set<int> seen(p.begin(), p.end());
  if (seen.size() != p.size()) return false;
  for (std::size_t i = 0; i + 1 < p.size(); ++i)
    if (p[i] < 0 || p[i] >= g.n || !g.has_edge(p[i], p[i + 1])) return false;
  return true;
}

inline void check_absorber(const Graph& g, const Absorber& ab) {
  std::set<int> base(ab.a.begin(), ab.a.end());
  if (base.size() != ab.a.size() || !base.count(ab.x) || !base.count(ab.y))
    throw std::logic_error("absorber: malformed vertex set");
  if (!host_path_ok(g, ab.path_without) ||
      ab.path_without.front() != ab.x || ab.path_without.back() != ab.y ||
      std::set<int>(ab.path_without.begin(), ab.path_without.end()) != base)
    throw std::logic_error("absorber: bad base traversal");
  for (int v : ab.absorbable) {
    if (base.count(v)) throw std::logic_error("absorber: absorbable inside A");
    const auto& pw = ab.path_with.at(v);
    std::set<int> want = base;
    want.insert(v);
    if (!host_path_ok(g, pw) || pw.front() != ab.x || pw.back() != ab.y ||
        std::set<int>(pw.begin(), pw.end()) != want ||
        pw.size() != ab.path_without.size() + 1)
      throw std::logic_error("absorber: bad absorbing traversal");
  }
}

inline std::vector<int> fresh_nbrs_ranked(const EmbeddingState& st, int v) {
  std::vector<int> out;
  for (int w : st.host->adjacency[v])
    if (!st.in_s[w]) out.push_back(w);
  std::sort(out.begin(), out.end(), [&](int a, int b) {
    int fa = ext_detail::fresh_degree(st, a);
    int fb = ext_detail::fresh_degree(st, b);
    if (fa != fb) return fa > fb;
    return a < b;
  });
  return out;
}

// Isolated S-vertex addition with the same certify-or-revert discipline the
// public operations use.
inline void add_isolated(EmbeddingState& st, int v) {
  if (v < 0 || v >= st.n() || st.in_s[v])
    throw std::invalid_argument("add_isolated: vertex unavailable");
  st.raw_add_vertex(v);
  if (st.mode == ExtMode::certified && !ext_detail::certify(st)) {
    st.raw_remove_vertex(v);
    throw std::runtime_error("add_isolated: extendability lost");
  }
}

// Exact-length a,b-path through fresh vertices for lengths below the
// connection floor (absorber rungs, tiny connector arms). Length 1 is a
// plain edge insertion.
inline void short_path_rec(EmbeddingState& st, int cur, int b, int rem,
                           std::vector<int>& added, int& budget, bool& done) {
  const Graph& g = *st.host;
  if (rem == 1) {
    if (!g.has_edge(cur, b) || st.has_s_edge(cur, b)) return;
    if (--budget < 0) return;
    try {
      insert_edge(st, cur, b);
    } catch (const std::logic_error&) {
      if (st.has_s_edge(cur, b)) st.raw_remove_edge(cur, b);
      return;
    } catch (const std::exception&) {
      return;
    }
    done = true;
    return;
  }
  for (int w : fresh_nbrs_ranked(st, cur)) {
    if (done) return;
    st.raw_add_vertex(w);
    st.raw_add_edge(cur, w);
    added.push_back(w);
    short_path_rec(st, w, b, rem - 1, added, budget, done);
    if (done) return;
    added.pop_back();
    st.raw_remove_edge(cur, w);
    st.raw_remove_vertex(w);
  }
}

inline std::vector<int> short_path(EmbeddingState& st, int a, int b, int len) {
  if (len < 1 || a == b || !st.in_s[a] || !st.in_s[b])
    throw std::invalid_argument("short_path: bad endpoints");
  if (len == 1) {
    insert_edge(st, a, b);
    return {a, b};
  }
  if (st.deg_s(a) + 1 > st.d || st.deg_s(b) + 1 > st.d)
    throw std::invalid_argument("short_path: degree bound violated");
  std::vector<int> added;
  int budget = st.backtrack_budget;
  bool done = false;
  short_path_rec(st, a, b, len, added, budget, done);
  if (!done) throw std::runtime_error("short_path: connection not found");
  std::vector<int> out{a};
  out.insert(out.end(), added.begin(), added.end());
  out.push_back(b);
  return out;
}

// Route of length len between two S-vertices: the certified machinery when
// the length condition allows, the short helper otherwise.
inline std::vector<int> any_path(EmbeddingState& st, int a, int b, int len) {
  int k = connect_depth(st.d, st.m);
  if (len >= 2 * k + 1) return connect_path(st, a, b, len);
  return short_path(st, a, b, len);
}

}  // namespace gadget_detail

// Mark vertices as isolated S-members so later constructions route around
// them. Batch absorber targets must be guarded before the first build.
inline void guard_vertices(EmbeddingState& st, const std::vector<int>& vs) {
  for (int v : vs)
    if (!st.in_s[v]) gadget_detail::add_isolated(st, v);
}

// Absorber for v anchored at two fresh neighbours of v: a doubled path
//   x0 x1 ... xk y0 yk ... y1
// of length 2k+1, plus k rungs x_i -> y_i of length k-1. The two explicit
// traversals differ only in whether the first rung is entered through v.
// State rolls back wholesale on any construction failure.
inline Absorber build_absorber(EmbeddingState& st, int v, int k) {
  if (k < 2) throw std::invalid_argument("build_absorber: k >= 2");
  if (v < 0 || v >= st.n())
    throw std::invalid_argument("build_absorber: bad vertex");
  EmbeddingState snap = st;
  try {
    // Guard the target so no construction path can run through it.
    if (!st.in_s[v]) gadget_detail::add_isolated(st, v);
    auto anchors = gadget_detail::fresh_nbrs_ranked(st, v);
    if (anchors.size() < 2)
      throw std::runtime_error("build_absorber: anchor neighbours unavailable");
    int x0 = anchors[0], y1 = anchors[1];
    gadget_detail::add_isolated(st, x0);
    gadget_detail::add_isolated(st, y1);
    auto q = connect_path(st, x0, y1, 2 * k + 1);
    // q = x0 x1 .. xk y0 yk .. y1
    std::vector<int> xs(k + 1), ys(k + 1);
    for (int i = 0; i <= k; ++i) xs[i] = q[i];
    ys[0] = q[k + 1];
    for (int i = 1; i <= k; ++i) ys[i] = q[2 * k + 2 - i];
    std::vector<std::vector<int>> rung(k + 1);
    for (int i = 1; i <= k; ++i)
      rung[i] = gadget_detail::any_path(st, xs[i], ys[i], k - 1);
    Absorber ab;
    ab.x = xs[0];
    ab.y = ys[0];
    ab.a = {xs[0], ys[0]};
    for (int i = 1; i <= k; ++i)
      ab.a.insert(ab.a.end(), rung[i].begin(), rung[i].end());
    std::sort(ab.a.begin(), ab.a.end());
    if (static_cast<int>(ab.a.size()) != k * k + 2)
      throw std::logic_error("build_absorber: size mismatch");
    // Base traversal: odd rungs x->y, even rungs y->x. Absorbing traversal
    // starts x0 v y1 and runs every rung the other way round.
    auto weave = [&](bool absorbing) {
      std::vector<int> seq{xs[0]};
      if (absorbing) seq.push_back(v);
      for (int i = 1; i <= k; ++i) {
        bool forward = (i % 2 == 1) != absorbing;
        if (forward)
          seq.insert(seq.end(), rung[i].begin(), rung[i].end());
        else
          seq.insert(seq.end(), rung[i].rbegin(), rung[i].rend());
      }
      seq.push_back(ys[0]);
      return seq;
    };
    ab.path_without = weave(false);
    ab.absorbable = {v};
    ab.path_with[v] = weave(true);
    gadget_detail::check_absorber(*st.host, ab);
    return ab;
  } catch (...) {
    st = snap;
    throw;
  }
}

// Chain absorbers end to end with fresh linking paths into one absorber for
// the union of targets. Exactly one segment flips to its absorbing traversal
// per absorbed vertex, so the composite length is fixed. total_size pins
// |A| of the result by stretching the first link.
inline Absorber chain_absorbers(EmbeddingState& st,
                                const std::vector<Absorber>& parts, int x,
                                int y, int total_size = -1, int cap = 8) {
  if (parts.empty() || static_cast<int>(parts.size()) > cap)
    throw std::invalid_argument("chain_absorbers: need 1..cap absorbers");
  {
    std::set<int> all;
    std::size_t want = 0;
    for (const auto& p : parts) {
      all.insert(p.a.begin(), p.a.end());
      all.insert(p.absorbable.begin(), p.absorbable.end());
      want += p.a.size() + p.absorbable.size();
    }
    if (all.size() != want)
      throw std::invalid_argument("chain_absorbers: absorbers overlap");
  }
  if (parts.size() == 1 && x == parts[0].x && y == parts[0].y &&
      (total_size < 0 ||
       total_size == static_cast<int>(parts[0].a.size())))
    return parts[0];
  int t = static_cast<int>(parts.size());
  int lmin = 2 * connect_depth(st.d, st.m) + 1;
  long long base = 2;
  for (const auto& p : parts) base += static_cast<long long>(p.a.size());
  base += static_cast<long long>(t + 1) * (lmin - 1);
  int extra = 0;
  if (total_size >= 0) {
    if (total_size < base)
      throw std::invalid_argument("chain_absorbers: size target too small");
    extra = total_size - static_cast<int>(base);
  }
  EmbeddingState snap = st;
  try {
    if (!st.in_s[x]) gadget_detail::add_isolated(st, x);
    if (!st.in_s[y]) gadget_detail::add_isolated(st, y);
    std::vector<std::vector<int>> links(t + 1);
    int prev = x;
    for (int j = 0; j <= t; ++j) {
      int to = j < t ? parts[j].x : y;
      int len = lmin + (j == 0 ? extra : 0);
      links[j] = connect_path(st, prev, to, len);
      prev = j < t ? parts[j].y : y;
    }
    Absorber out;
    out.x = x;
    out.y = y;
    std::set<int> verts{x, y};
    for (const auto& p : parts) verts.insert(p.a.begin(), p.a.end());
    for (const auto& lk : links)
      for (std::size_t i = 1; i + 1 < lk.size(); ++i) verts.insert(lk[i]);
    out.a.assign(verts.begin(), verts.end());
    auto weave = [&](int which) {  // which < 0: nothing absorbed
      std::vector<int> seq{x};
      for (int j = 0; j < t; ++j) {
        seq.insert(seq.end(), links[j].begin() + 1, links[j].end() - 1);
        const auto& piece =
            j == which ? parts[j].path_with.at(parts[j].absorbable[0])
                       : parts[j].path_without;
        seq.insert(seq.end(), piece.begin(), piece.end());
      }
      seq.insert(seq.end(), links[t].begin() + 1, links[t].end());
      return seq;
    };
    out.path_without = weave(-1);
    for (int j = 0; j < t; ++j)
      for (int v : parts[j].absorbable) {
        out.absorbable.push_back(v);
        out.path_with[v] = weave(j);
      }
    if (total_size >= 0 && static_cast<int>(out.a.size()) != total_size)
      throw std::logic_error("chain_absorbers: size target missed");
    gadget_detail::check_absorber(*st.host, out);
    return out;
  } catch (...) {
    st = snap;
    throw;
  }
}

inline std::string absorber_to_json(const Absorber& ab) {
  nlohmann::json j;
  j["vertices"] = ab.a;
  j["ends"] = {ab.x, ab.y};
  j["absorbable"] = ab.absorbable;
  j["path_without"] = ab.path_without;
  j["path_with"] = nlohmann::json::object();
  for (const auto& [v, p] : ab.path_with) j["path_with"][std::to_string(v)] = p;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Connectors.

struct Connector {
  int l = 0, k = 0, s = 0;
  std::vector<int> v_h;
  std::vector<int> h_plus, h_minus;  // v_i resp. w_i, i in [s]
  // Pieces: xs[0..s] star centres/arm tips, arms_x[i] runs x_{i-1}..v_i,
  // closing edge v_i x_i; r_path runs x_s..y_s.
  std::vector<int> xs, ys;
  std::vector<std::vector<int>> arms_x, arms_y;  // index 1..s
  std::vector<int> r_path;
};

// Spanning v_i,w_j-path by the construction formula: descend the x-arms from
// v_i to x_0, jump to x_i, ascend to x_s, cross R, then mirror on the y-side
// pivoting at y_j. 1-based i, j.
inline std::vector<int> spanning_path(const Connector& c, int i, int j) {
  if (i < 1 || i > c.s || j < 1 || j > c.s)
    throw std::invalid_argument("spanning_path: index out of range");
  std::vector<int> seq;
  for (int t = i; t >= 1; --t)
    seq.insert(seq.end(), c.arms_x[t].rbegin(), c.arms_x[t].rend());
  for (int t = i + 1; t <= c.s; ++t)
    seq.insert(seq.end(), c.arms_x[t].begin(), c.arms_x[t].end());
  seq.insert(seq.end(), c.r_path.begin(), c.r_path.end());
  for (int t = c.s; t >= j + 1; --t)
    seq.insert(seq.end(), c.arms_y[t].rbegin(), c.arms_y[t].rend());
  for (int t = 1; t <= j; ++t)
    seq.insert(seq.end(), c.arms_y[t].begin(), c.arms_y[t].end());
  return seq;
}

// Connector on l vertices: star arms of s fresh neighbours on each side,
// arm paths of length k whose penultimate vertices form H+ and H-, and a
// closing path of length l - 2ks - 1. Every spanning path is validated
// before the connector is returned.
inline Connector build_connector(EmbeddingState& st, int x0, int y0, int l,
                                 int k) {
  if (k < 2 || l <= k + 1) throw std::invalid_argument("build_connector: s < 1");
  int s = (l - k - 1) / (2 * k);
  if (s < 1) throw std::invalid_argument("build_connector: s < 1");
  if (st.d < std::max(4, s + 1))
    throw std::invalid_argument("build_connector: d too small for the arms");
  int r_len = l - 2 * k * s - 1;
  EmbeddingState snap = st;
  try {
    gadget_detail::add_isolated(st, x0);
    gadget_detail::add_isolated(st, y0);
    Connector c;
    c.l = l;
    c.k = k;
    c.s = s;
    c.xs = {x0};
    c.ys = {y0};
    c.arms_x.resize(s + 1);
    c.arms_y.resize(s + 1);
    auto grow_side = [&](std::vector<int>& tips,
                         std::vector<std::vector<int>>& arms, int centre) {
      for (int i = 1; i <= s; ++i) {
        auto cands = gadget_detail::fresh_nbrs_ranked(st, centre);
        if (cands.empty())
          throw std::runtime_error("build_connector: no arm neighbour");
        int ti = cands[0];
        gadget_detail::add_isolated(st, ti);
        insert_edge(st, centre, ti);
        auto full = gadget_detail::any_path(st, tips.back(), ti, k);
        arms[i].assign(full.begin(), full.end() - 1);  // x_{i-1} .. v_i
        tips.push_back(ti);
      }
    };
    grow_side(c.xs, c.arms_x, x0);
    grow_side(c.ys, c.arms_y, y0);
    c.r_path = gadget_detail::any_path(st, c.xs[s], c.ys[s], r_len);
    std::set<int> verts;
    for (int i = 1; i <= s; ++i) {
      c.h_plus.push_back(c.arms_x[i].back());
      c.h_minus.push_back(c.arms_y[i].back());
      verts.insert(c.arms_x[i].begin(), c.arms_x[i].end());
      verts.insert(c.arms_y[i].begin(), c.arms_y[i].end());
    }
    verts.insert(c.r_path.begin(), c.r_path.end());
    c.v_h.assign(verts.begin(), verts.end());
    if (static_cast<int>(c.v_h.size()) != l)
      throw std::logic_error("build_connector: vertex count off");
    for (int i = 1; i <= s; ++i)
      for (int j = 1; j <= s; ++j) {
        auto p = spanning_path(c, i, j);
        if (!gadget_detail::host_path_ok(*st.host, p) ||
            p.front() != c.h_plus[i - 1] || p.back() != c.h_minus[j - 1] ||
            std::set<int>(p.begin(), p.end()) != verts)
          throw std::logic_error("build_connector: spanning path invalid");
      }
    return c;
  } catch (...) {
    st = snap;
    throw;
  }
}

inline std::string connector_to_json(const Connector& c) {
  nlohmann::json j;
  j["l"] = c.l;
  j["k"] = c.k;
  j["s"] = c.s;
  j["vertices"] = c.v_h;
  j["h_plus"] = c.h_plus;
  j["h_minus"] = c.h_minus;
  nlohmann::json paths = nlohmann::json::array();
  for (int i = 1; i <= c.s; ++i)
    for (int jj = 1; jj <= c.s; ++jj) paths.push_back(spanning_path(c, i, jj));
  j["spanning_paths"] = paths;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Lambda devices.

struct LambdaDevice {
  int lambda = 0;
  bool match_variant = true;
  std::vector<int> r;
  // Match variant: aux classes X, Y realized over star sets. Aux B-side
  // indices: 0..|ys|-1 the Y class, then the R positions. A realization of
  // {-1,-1} is a direct G-edge.
  std::vector<int> xs, ys;
  BipartiteGraph aux;
  std::map<std::pair<int, int>, std::array<int, 2>> realized;
  std::vector<int> w0, w1;
  // Path variant: composite absorbers with ends (x_i, y_i) guided by a
  // flexible template on [9L] x (R' then R).
  int ell = 0;
  std::vector<Absorber> composites;
  std::vector<int> rprime;
  BipartiteGraph guide;
};

inline std::vector<int> device_vertices(const LambdaDevice& d) {
  std::set<int> v;
  if (d.match_variant) {
    v.insert(d.w0.begin(), d.w0.end());
    v.insert(d.w1.begin(), d.w1.end());
  } else {
    for (const auto& c : d.composites) v.insert(c.a.begin(), c.a.end());
    v.insert(d.rprime.begin(), d.rprime.end());
  }
  return {v.begin(), v.end()};
}

namespace gadget_detail {

// Maximum bipartite matching by augmenting paths over a supplied adjacency
// (already permuted for randomness). Returns per-A partner or -1.
inline std::vector<int> kuhn_matching(int na, int nb,
                                      const std::vector<std::vector<int>>& adj) {
  std::vector<int> mb(nb, -1), ma(na, -1);
  std::vector<char> vis(nb, 0);
  std::function<bool(int)> aug = [&](int a) {
    for (int b : adj[a]) {
      if (vis[b]) continue;
      vis[b] = 1;
      if (mb[b] < 0 || aug(mb[b])) {
        mb[b] = a;
        ma[a] = b;
        return true;
      }
    }
    return false;
  };
  for (int a = 0; a < na; ++a) {
    std::fill(vis.begin(), vis.end(), 0);
    aug(a);
  }
  return ma;
}

inline int aux_host(const LambdaDevice& dev, int b) {
  int ny = static_cast<int>(dev.ys.size());
  return b < ny ? dev.ys[b] : dev.r[b - ny];
}

}  // namespace gadget_detail

// Perfect matching between W0 and W1 u U in G, assembled from an aux-graph
// matching: matched subdivided edges split into their end segments, the rest
// contribute their middle edge whole.
inline std::vector<std::pair<int, int>> device_matching(
    const Graph& g, const LambdaDevice& dev, const std::vector<int>& u) {
  if (!dev.match_variant)
    throw std::invalid_argument("device_matching: match variant only");
  std::set<int> uset(u.begin(), u.end());
  if (static_cast<int>(u.size()) != 3 * dev.lambda ||
      uset.size() != u.size())
    throw std::invalid_argument("device_matching: need 3*lambda targets");
  for (int v : u)
    if (!std::count(dev.r.begin(), dev.r.end(), v))
      throw std::invalid_argument("device_matching: target outside R");
  int ny = static_cast<int>(dev.ys.size());
  std::vector<char> allowed(dev.aux.nb, 0);
  for (int b = 0; b < ny; ++b) allowed[b] = 1;
  for (std::size_t i = 0; i < dev.r.size(); ++i)
    if (uset.count(dev.r[i])) allowed[ny + static_cast<int>(i)] = 1;
  BipartiteGraph sub(dev.aux.na, dev.aux.nb);
  for (int a = 0; a < dev.aux.na; ++a)
    for (int b : dev.aux.adj_a[a])
      if (allowed[b]) sub.add_edge(a, b);
  sub.finalize();
  auto fm = f_matching(sub, std::vector<int>(dev.aux.na, 1));
  if (!fm.ok)
    throw std::runtime_error("device_matching: no aux matching for U");
  std::vector<int> partner(dev.aux.na, -1);
  for (int a = 0; a < dev.aux.na; ++a) partner[a] = fm.assign[a][0];
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < dev.aux.na; ++a)
    for (int b : dev.aux.adj_a[a]) {
      auto re = dev.realized.at({a, b});
      int host_b = gadget_detail::aux_host(dev, b);
      if (partner[a] == b) {
        if (re[0] < 0) {
          out.push_back({dev.xs[a], host_b});
        } else {
          out.push_back({dev.xs[a], re[0]});
          out.push_back({re[1], host_b});
        }
      } else if (re[0] >= 0) {
        // Unmatched subdivided edge donates its middle edge whole.
        out.push_back({re[1], re[0]});
      }
    }
  // Verify: disjoint G-edges covering W0 against W1 u U exactly.
  std::set<int> left(dev.w0.begin(), dev.w0.end());
  std::set<int> right(dev.w1.begin(), dev.w1.end());
  right.insert(uset.begin(), uset.end());
  std::set<int> seen;
  for (auto [a, b] : out) {
    if (!g.has_edge(a, b) || !left.count(a) || !right.count(b) ||
        !seen.insert(a).second || !seen.insert(b).second)
      throw std::logic_error("device_matching: invalid matching assembled");
  }
  if (seen.size() != left.size() + right.size())
    throw std::logic_error("device_matching: matching not perfect");
  return out;
}

// Vertex-disjoint x_i,y_i-paths of length ell-1 covering X u U exactly:
// route each composite through its guide-matched target.
inline std::vector<std::vector<int>> device_paths(const Graph& g,
                                                  const LambdaDevice& dev,
                                                  const std::vector<int>& u) {
  if (dev.match_variant)
    throw std::invalid_argument("device_paths: path variant only");
  std::set<int> uset(u.begin(), u.end());
  if (static_cast<int>(u.size()) != 3 * dev.lambda || uset.size() != u.size())
    throw std::invalid_argument("device_paths: need 3*lambda targets");
  int nrp = static_cast<int>(dev.rprime.size());
  std::vector<char> allowed(dev.guide.nb, 0);
  for (int b = 0; b < nrp; ++b) allowed[b] = 1;
  for (std::size_t i = 0; i < dev.r.size(); ++i)
    if (uset.count(dev.r[i])) allowed[nrp + static_cast<int>(i)] = 1;
  BipartiteGraph sub(dev.guide.na, dev.guide.nb);
  for (int a = 0; a < dev.guide.na; ++a)
    for (int b : dev.guide.adj_a[a])
      if (allowed[b]) sub.add_edge(a, b);
  sub.finalize();
  auto fm = f_matching(sub, std::vector<int>(dev.guide.na, 1));
  if (!fm.ok)
    throw std::runtime_error("device_paths: no guide matching for U");
  std::vector<std::vector<int>> out;
  std::set<int> covered;
  for (int i = 0; i < dev.guide.na; ++i) {
    int b = fm.assign[i][0];
    int host_v = b < nrp ? dev.rprime[b] : dev.r[b - nrp];
    const auto& p = dev.composites[i].path_with.at(host_v);
    if (static_cast<int>(p.size()) != dev.ell)
      throw std::logic_error("device_paths: wrong path length");
    for (int v : p)
      if (!covered.insert(v).second)
        throw std::logic_error("device_paths: paths overlap");
    out.push_back(p);
  }
  std::set<int> want;
  for (const auto& c : dev.composites) want.insert(c.a.begin(), c.a.end());
  want.insert(dev.rprime.begin(), dev.rprime.end());
  want.insert(uset.begin(), uset.end());
  if (covered != want)
    throw std::logic_error("device_paths: cover not exact");
  return out;
}

namespace gadget_detail {

inline LambdaDevice build_match_device(EmbeddingState& st,
                                       const std::vector<int>& r, int lambda,
                                       const GadgetConfig& cfg,
                                       std::uint64_t seed) {
  const Graph& g = *st.host;
  for (int attempt = 0; attempt < cfg.retries; ++attempt) {
    Rng rng = Rng(seed, hash_label("lambda-match"))
                  .derive(static_cast<std::uint64_t>(attempt));
    LambdaDevice dev;
    dev.lambda = lambda;
    dev.match_variant = true;
    dev.r = r;
    std::vector<char> taken(g.n, 0);
    for (int v : r) taken[v] = 1;
    for (int v = 0; v < g.n; ++v)
      if (st.in_s[v]) taken[v] = 1;
    std::vector<int> pool;
    for (int v = 0; v < g.n; ++v)
      if (!taken[v]) pool.push_back(v);
    shuffle_vec(pool, rng);
    if (static_cast<int>(pool.size()) < 15 * lambda)
      throw std::runtime_error("lambda device: host too small");
    dev.xs.assign(pool.begin(), pool.begin() + 9 * lambda);
    dev.ys.assign(pool.begin() + 9 * lambda, pool.begin() + 15 * lambda);
    for (int v : dev.xs) taken[v] = 1;
    for (int v : dev.ys) taken[v] = 1;
    // Disjoint star sets around every class vertex.
    std::vector<int> core = dev.xs;
    core.insert(core.end(), dev.ys.begin(), dev.ys.end());
    core.insert(core.end(), r.begin(), r.end());
    std::map<int, std::vector<int>> star;
    bool stars_ok = true;
    for (int z : core) {
      std::vector<int> az;
      for (int w : g.adjacency[z])
        if (!taken[w]) {
          az.push_back(w);
          taken[w] = 1;
          if (static_cast<int>(az.size()) == cfg.star_size) break;
        }
      if (static_cast<int>(az.size()) < cfg.star_size) {
        stars_ok = false;
        break;
      }
      std::sort(az.begin(), az.end());
      star[z] = az;
    }
    if (!stars_ok) continue;
    dev.aux = BipartiteGraph(9 * lambda, 12 * lambda);
    std::set<std::pair<int, int>> aux_seen;
    int six = 6 * lambda;
    auto host_b = [&](int b) { return b < six ? dev.ys[b] : r[b - six]; };
    // Four class pairs per round: (X1,Y), (X2,Y), (X1,R), (X2,R) where
    // X1 is the first and X2 the last 6L block of X.
    for (int round = 0; round < cfg.match_rounds; ++round) {
      for (int cls = 0; cls < 4; ++cls) {
        int a_off = (cls % 2 == 0) ? 0 : 3 * lambda;
        int b_off = (cls < 2) ? 0 : six;
        std::vector<int> aperm(six), bperm(six);
        for (int i = 0; i < six; ++i) aperm[i] = i;
        for (int i = 0; i < six; ++i) bperm[i] = i;
        shuffle_vec(aperm, rng);
        shuffle_vec(bperm, rng);
        // Grouped graph on current star sets, with the lex-least witness
        // edge per pair.
        std::map<std::pair<int, int>, std::pair<int, int>> witness;
        std::vector<std::vector<int>> adj(six);
        for (int ai = 0; ai < six; ++ai) {
          int a = a_off + aperm[ai];
          for (int bi = 0; bi < six; ++bi) {
            int b = b_off + bperm[bi];
            const auto& ax = star[dev.xs[a]];
            const auto& ab = star[host_b(b)];
            std::pair<int, int> w{-1, -1};
            for (int v1 : ax) {
              for (int v2 : ab)
                if (g.has_edge(v1, v2)) {
                  w = {v1, v2};
                  break;
                }
              if (w.first >= 0) break;
            }
            if (w.first >= 0) {
              adj[ai].push_back(bi);
              witness[{a, b}] = w;
            }
          }
        }
        auto ma = kuhn_matching(six, six, adj);
        std::set<int> shrunk;
        for (int ai = 0; ai < six; ++ai) {
          if (ma[ai] < 0) continue;
          int a = a_off + aperm[ai];
          int b = b_off + bperm[ma[ai]];
          if (!aux_seen.insert({a, b}).second) continue;
          auto [vf, wf] = witness.at({a, b});
          dev.aux.add_edge(a, b);
          dev.realized[{a, b}] = {vf, wf};
          auto& sx = star[dev.xs[a]];
          auto& sb = star[host_b(b)];
          sx.erase(std::find(sx.begin(), sx.end(), vf));
          sb.erase(std::find(sb.begin(), sb.end(), wf));
          shrunk.insert(dev.xs[a]);
          shrunk.insert(host_b(b));
        }
        // Keep the star sets level: untouched classes drop their top vertex.
        for (int z : core)
          if (!shrunk.count(z) && !star[z].empty()) star[z].pop_back();
      }
    }
    dev.aux.finalize();
    dev.w0 = dev.xs;
    dev.w1 = dev.ys;
    for (const auto& [f, vw] : dev.realized) {
      dev.w0.push_back(vw[1]);
      dev.w1.push_back(vw[0]);
    }
    std::sort(dev.w0.begin(), dev.w0.end());
    std::sort(dev.w1.begin(), dev.w1.end());
    // The defining property, sampled or exhausted over U.
    bool good = true;
    double all = detail::binom(6 * lambda, 3 * lambda);
    if (static_cast<int>(r.size()) <= 12 && all <= 4000) {
      detail::for_each_subset(6 * lambda, 3 * lambda,
                              [&](const std::vector<int>& pick) {
                                std::vector<int> u;
                                for (int i : pick) u.push_back(r[i]);
                                try {
                                  device_matching(g, dev, u);
                                } catch (const std::exception&) {
                                  good = false;
                                }
                                return good;
                              });
    } else {
      for (int t = 0; t < cfg.verify_samples && good; ++t) {
        std::vector<int> perm = r;
        shuffle_vec(perm, rng);
        std::vector<int> u(perm.begin(), perm.begin() + 3 * lambda);
        try {
          device_matching(g, dev, u);
        } catch (const std::exception&) {
          good = false;
        }
      }
    }
    if (good) return dev;
  }
  throw std::runtime_error("lambda device: retries exhausted");
}

inline LambdaDevice build_path_device(EmbeddingState& st,
                                      const std::vector<int>& r, int lambda,
                                      const GadgetConfig& cfg,
                                      std::uint64_t seed) {
  const Graph& g = *st.host;
  int h = 9 * lambda;
  for (int attempt = 0; attempt < cfg.retries; ++attempt) {
    Rng rng = Rng(seed, hash_label("lambda-path"))
                  .derive(static_cast<std::uint64_t>(attempt));
    EmbeddingState snap = st;
    try {
      LambdaDevice dev;
      dev.lambda = lambda;
      dev.match_variant = false;
      dev.r = r;
      for (int v : r)
        if (!st.in_s[v]) add_isolated(st, v);
      // R' and the 9L end pairs come from fresh vertices.
      std::vector<int> pool;
      for (int v = 0; v < g.n; ++v)
        if (!st.in_s[v]) pool.push_back(v);
      shuffle_vec(pool, rng);
      if (static_cast<int>(pool.size()) < 6 * lambda + 2 * h)
        throw std::runtime_error("lambda device: host too small");
      dev.rprime.assign(pool.begin(), pool.begin() + 6 * lambda);
      std::vector<int> ends(pool.begin() + 6 * lambda,
                            pool.begin() + 6 * lambda + 2 * h);
      for (int v : dev.rprime) add_isolated(st, v);
      for (int v : ends) add_isolated(st, v);
      auto tmpl = flexible_template(h, cfg.template_count,
                                    rng.derive("guide"), 50,
                                    cfg.template_retries);
      dev.guide = tmpl.h_graph;
      // Elementary absorbers per guide neighbour: c_v numbers them.
      int k = cfg.absorber_k;
      std::map<std::pair<int, int>, Absorber> elem;  // (b, index) -> absorber
      int t_max = 1;
      for (int i = 0; i < h; ++i)
        t_max = std::max(t_max,
                         static_cast<int>(dev.guide.adj_a[i].size()));
      if (t_max > cfg.per_vertex)
        throw std::runtime_error("lambda device: guide degree too high");
      for (int b = 0; b < dev.guide.nb; ++b) {
        int host_v = b < 6 * lambda ? dev.rprime[b] : r[b - 6 * lambda];
        int need = static_cast<int>(dev.guide.adj_b[b].size());
        for (int c = 0; c < need; ++c)
          elem[{b, c}] = build_absorber(st, host_v, k);
      }
      int lmin = 2 * connect_depth(st.d, st.m) + 1;
      dev.ell = 3 + (k * k + 2) * t_max + (t_max + 1) * (lmin - 1);
      for (int i = 0; i < h; ++i) {
        std::vector<Absorber> parts;
        for (int b : dev.guide.adj_a[i]) {
          const auto& order = dev.guide.adj_b[b];
          int c = static_cast<int>(
              std::find(order.begin(), order.end(), i) - order.begin());
          parts.push_back(elem.at({b, c}));
        }
        if (parts.empty())
          throw std::runtime_error("lambda device: guide left a pair idle");
        dev.composites.push_back(chain_absorbers(
            st, parts, ends[2 * i], ends[2 * i + 1], dev.ell - 1));
      }
      // Property check: exhaustive for small R, sampled otherwise.
      bool good = true;
      double all = detail::binom(6 * lambda, 3 * lambda);
      if (static_cast<int>(r.size()) <= 12 && all <= 4000) {
        detail::for_each_subset(6 * lambda, 3 * lambda,
                                [&](const std::vector<int>& pick) {
                                  std::vector<int> u;
                                  for (int i : pick) u.push_back(r[i]);
                                  try {
                                    device_paths(g, dev, u);
                                  } catch (const std::exception&) {
                                    good = false;
                                  }
                                  return good;
                                });
      } else {
        for (int t = 0; t < cfg.verify_samples && good; ++t) {
          std::vector<int> perm = r;
          shuffle_vec(perm, rng);
          std::vector<int> u(perm.begin(), perm.begin() + 3 * lambda);
          try {
            device_paths(g, dev, u);
          } catch (const std::exception&) {
            good = false;
          }
        }
      }
      if (!good) throw std::runtime_error("lambda device: property failed");
      return dev;
    } catch (const std::exception&) {
      st = snap;
      if (attempt + 1 == cfg.retries) throw;
    }
  }
  throw std::runtime_error("lambda device: retries exhausted");
}

}  // namespace gadget_detail

// Device for R with |R| = 6*lambda. The match variant is stateless in S; the
// path variant builds its absorbers through the supplied state and leaves
// them there (R, R', the pair ends and every composite enter S).
inline LambdaDevice build_lambda_device(EmbeddingState& st,
                                        const std::vector<int>& r, int lambda,
                                        bool match_variant,
                                        const GadgetConfig& cfg = {},
                                        std::uint64_t seed = 0) {
  if (lambda < 1 || static_cast<int>(r.size()) != 6 * lambda)
    throw std::invalid_argument("build_lambda_device: need |R| = 6*lambda");
  std::set<int> rs(r.begin(), r.end());
  if (rs.size() != r.size() || *rs.begin() < 0 || *rs.rbegin() >= st.n())
    throw std::invalid_argument("build_lambda_device: bad R");
  if (match_variant)
    return gadget_detail::build_match_device(st, r, lambda, cfg, seed);
  return gadget_detail::build_path_device(st, r, lambda, cfg, seed);
}

// ---------------------------------------------------------------------------
// Reservoirs.

struct Reservoir {
  const Graph* host = nullptr;
  std::vector<int> v_h;  // vertex set of the reservoir subgraph
  std::vector<int> r;
  int v = -1;  // anchor, image of t
  Tree tree;
  int t = -1;
  LambdaDevice device;
  std::map<int, int> partial;     // tree vertex -> host vertex, gaps open
  std::map<int, int> leaf_at;     // match variant: W0 vertex -> tree leaf
  std::vector<std::vector<int>> gap_paths;  // path variant: tree bare paths
  std::vector<std::array<std::vector<int>, 2>> gap_links;  // host links a->x, b->y
};

// Complete the partial embedding against a forbidden half U of R and verify
// the result is a copy of the tree on exactly V(H) \ U with t on v.
inline std::map<int, int> reservoir_absorb(const Reservoir& res,
                                           const std::vector<int>& u) {
  const Graph& g = *res.host;
  std::map<int, int> image = res.partial;
  std::set<int> uset(u.begin(), u.end());
  if (static_cast<int>(u.size() * 2) != static_cast<int>(res.r.size()) ||
      uset.size() != u.size())
    throw std::invalid_argument("reservoir_absorb: need half of R");
  std::vector<int> rest;
  for (int v : res.r)
    if (!uset.count(v)) rest.push_back(v);
  if (res.device.match_variant) {
    auto pairs = device_matching(g, res.device, rest);
    for (auto [a, b] : pairs) {
      auto it = res.leaf_at.find(a);
      if (it != res.leaf_at.end()) image[it->second] = b;
    }
  } else {
    auto paths = device_paths(g, res.device, rest);
    for (std::size_t i = 0; i < res.gap_paths.size(); ++i) {
      const auto& tp = res.gap_paths[i];       // tree vertices a_i .. b_i
      const auto& la = res.gap_links[i][0];    // host: image(a_i) .. x_i
      const auto& lb = res.gap_links[i][1];    // host: image(b_i) .. y_i
      std::vector<int> hostseq(la.begin(), la.end() - 1);
      hostseq.insert(hostseq.end(), paths[i].begin(), paths[i].end());
      for (auto it = lb.rbegin() + 1; it != lb.rend(); ++it)
        hostseq.push_back(*it);
      if (hostseq.size() != tp.size())
        throw std::logic_error("reservoir_absorb: gap length mismatch");
      for (std::size_t j = 0; j < tp.size(); ++j) image[tp[j]] = hostseq[j];
    }
  }
  auto chk = verify_embedding(g, res.tree, image);
  if (!chk.ok)
    throw std::runtime_error("reservoir_absorb: verification failed: " +
                             chk.reason);
  std::set<int> got;
  for (const auto& [tv, hv] : image) got.insert(hv);
  std::set<int> want(res.v_h.begin(), res.v_h.end());
  for (int v : u) want.erase(v);
  if (got != want)
    throw std::runtime_error("reservoir_absorb: cover not exact");
  if (image.at(res.t) != res.v)
    throw std::runtime_error("reservoir_absorb: anchor moved");
  return image;
}

// Make R into a reservoir via the device. Match variant: embed the tree
// minus a separated leaf set so the leaf parents cover W0, re-attach all
// other leaves, and let absorb add the final |W0| leaves through the device
// matching. Path variant: embed the tree minus 9L bare paths, connect the
// gap ends to the composite ends, and let absorb insert the covering paths.
inline Reservoir make_reservoir(EmbeddingState& st, const LambdaDevice& dev,
                                const Tree& tr, int t_id,
                                const GadgetConfig& cfg = {}) {
  const Graph& g = *st.host;
  if (t_id < 0 || t_id >= tr.n)
    throw std::invalid_argument("make_reservoir: bad t");
  Reservoir res;
  res.host = &g;
  res.r = dev.r;
  res.tree = tr;
  res.t = t_id;
  res.device = dev;
  EmbeddingState snap = st;
  try {
    if (dev.match_variant) {
      auto leaves = greedy_separated_leaves(tr, cfg.leaf_separation);
      leaves.erase(std::remove(leaves.begin(), leaves.end(), t_id),
                   leaves.end());
      if (static_cast<int>(leaves.size()) < 3 * static_cast<int>(dev.w0.size()))
        throw std::invalid_argument("make_reservoir: tree lacks leaf structure");
      std::vector<char> drop(tr.n, 0);
      std::vector<int> parent_of(tr.n, -1);
      for (int lf : leaves) {
        drop[lf] = 1;
        parent_of[lf] = tr.adjacency[lf][0];
      }
      // Reduced tree with relabelling.
      std::vector<int> to_new(tr.n, -1), to_old;
      for (int v = 0; v < tr.n; ++v)
        if (!drop[v]) {
          to_new[v] = static_cast<int>(to_old.size());
          to_old.push_back(v);
        }
      std::vector<std::pair<int, int>> edges;
      for (int v = 0; v < tr.n; ++v)
        for (int w : tr.adjacency[v])
          if (v < w && !drop[v] && !drop[w])
            edges.push_back({to_new[v], to_new[w]});
      Tree reduced(static_cast<int>(to_old.size()), edges);
      std::vector<int> q;
      for (int lf : leaves) q.push_back(to_new[parent_of[lf]]);
      std::sort(q.begin(), q.end());
      q.erase(std::unique(q.begin(), q.end()), q.end());
      for (int v : dev.w1) gadget_detail::add_isolated(st, v);
      for (int v : dev.r) gadget_detail::add_isolated(st, v);
      std::set<int> w0set(dev.w0.begin(), dev.w0.end());
      int anchor = -1, best = -1;
      for (int v = 0; v < g.n; ++v)
        if (!st.in_s[v] && !w0set.count(v)) {
          int fd = ext_detail::fresh_degree(st, v);
          if (fd > best) {
            best = fd;
            anchor = v;
          }
        }
      if (anchor < 0) throw std::runtime_error("make_reservoir: no anchor");
      embed_cover(st, reduced, q, dev.w0, to_new[t_id], anchor);
      for (const auto& [tv, hv] : st.image) res.partial[to_old[tv]] = hv;
      st.image.clear();
      std::set<int> w0s(dev.w0.begin(), dev.w0.end());
      for (int lf : leaves) {
        int pimg = res.partial.at(parent_of[lf]);
        if (w0s.count(pimg)) {
          res.leaf_at[pimg] = lf;
        } else {
          res.partial[lf] = extend_leaf(st, pimg);
        }
      }
      if (static_cast<int>(res.leaf_at.size()) !=
          static_cast<int>(dev.w0.size()))
        throw std::logic_error("make_reservoir: cover missed some of W0");
      res.v = res.partial.at(t_id);
      std::set<int> vh;
      for (const auto& [tv, hv] : res.partial) vh.insert(hv);
      vh.insert(dev.w1.begin(), dev.w1.end());
      vh.insert(dev.r.begin(), dev.r.end());
      res.v_h.assign(vh.begin(), vh.end());
    } else {
      // The state already carries the device (composites, R, R' in S).
      int gap_len = dev.ell - 1 + 2 * cfg.link_len;
      auto bp = disjoint_bare_paths(tr, gap_len);
      std::vector<std::vector<int>> chosen;
      for (auto& p : bp.paths) {
        if (std::find(p.begin(), p.end(), t_id) != p.end()) continue;
        chosen.push_back(p);
        if (static_cast<int>(chosen.size()) ==
            static_cast<int>(dev.composites.size()))
          break;
      }
      if (static_cast<int>(chosen.size()) <
          static_cast<int>(dev.composites.size()))
        throw std::invalid_argument("make_reservoir: tree lacks bare paths");
      std::vector<char> drop(tr.n, 0);
      for (const auto& p : chosen)
        for (std::size_t i = 1; i + 1 < p.size(); ++i) drop[p[i]] = 1;
      // Components of the reduced forest, embedded one by one.
      std::vector<int> comp(tr.n, -1);
      int ncomp = 0;
      for (int v0 = 0; v0 < tr.n; ++v0) {
        if (drop[v0] || comp[v0] >= 0) continue;
        std::queue<int> bfs;
        bfs.push(v0);
        comp[v0] = ncomp;
        while (!bfs.empty()) {
          int v = bfs.front();
          bfs.pop();
          for (int w : tr.adjacency[v])
            if (!drop[w] && comp[w] < 0) {
              comp[w] = ncomp;
              bfs.push(w);
            }
        }
        ++ncomp;
      }
      int root_comp = comp[t_id];
      for (int c = 0; c < ncomp; ++c) {
        int order = c == 0 ? root_comp : (c <= root_comp ? c - 1 : c);
        std::vector<int> to_new(tr.n, -1), to_old;
        for (int v = 0; v < tr.n; ++v)
          if (comp[v] == order) {
            to_new[v] = static_cast<int>(to_old.size());
            to_old.push_back(v);
          }
        std::vector<std::pair<int, int>> edges;
        for (int v = 0; v < tr.n; ++v)
          if (comp[v] == order)
            for (int w : tr.adjacency[v])
              if (v < w && comp[w] == order)
                edges.push_back({to_new[v], to_new[w]});
        Tree part(static_cast<int>(to_old.size()), edges);
        int root_old = order == root_comp ? t_id : to_old[0];
        int target = -1, best = -1;
        for (int v = 0; v < g.n; ++v)
          if (!st.in_s[v]) {
            int fd = ext_detail::fresh_degree(st, v);
            if (fd > best) {
              best = fd;
              target = v;
            }
          }
        if (target < 0)
          throw std::runtime_error("make_reservoir: no room for components");
        embed_tree(st, part, to_new[root_old], target);
        for (const auto& [tv, hv] : st.image) res.partial[to_old[tv]] = hv;
        st.image.clear();
      }
      res.v = res.partial.at(t_id);
      for (std::size_t i = 0; i < chosen.size(); ++i) {
        const auto& p = chosen[i];
        const auto& comp_i = dev.composites[i];
        auto la = gadget_detail::any_path(st, res.partial.at(p.front()),
                                          comp_i.x, cfg.link_len);
        auto lb = gadget_detail::any_path(st, res.partial.at(p.back()),
                                          comp_i.y, cfg.link_len);
        res.gap_paths.push_back(p);
        res.gap_links.push_back({la, lb});
      }
      std::set<int> vh;
      for (int v = 0; v < g.n; ++v)
        if (st.in_s[v]) vh.insert(v);
      for (const auto& [tv, hv] : res.partial) vh.insert(hv);
      res.v_h.assign(vh.begin(), vh.end());
    }
    long long expect =
        static_cast<long long>(res.v_h.size()) - res.tree.n;
    if (expect != static_cast<long long>(res.r.size()) / 2)
      throw std::logic_error("make_reservoir: size bookkeeping off");
    return res;
  } catch (...) {
    st = snap;
    throw;
  }
}

}  // namespace spanforge
