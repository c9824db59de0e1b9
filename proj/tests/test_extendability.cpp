#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "spanforge/extend.hpp"
#include "spanforge/graph.hpp"
#include "spanforge/rng.hpp"
#include "spanforge/tree.hpp"

using namespace spanforge;
using Catch::Matchers::ContainsSubstring;

namespace {

// Independent re-derivation of the extendability inequality. Recursive subset
// generation and std::set unions, nothing shared with the library's
// stamp-clock enumerator. Returns some violating set if one exists.
std::optional<std::vector<int>> oracle_violator(
    const Graph& g, const std::vector<int>& sverts,
    const std::vector<std::pair<int, int>>& sedges, int d, int m) {
  std::set<int> sv(sverts.begin(), sverts.end());
  std::map<int, int> sdeg;
  for (auto [u, v] : sedges) {
    ++sdeg[u];
    ++sdeg[v];
  }
  std::optional<std::vector<int>> bad;
  std::vector<int> cur;
  std::function<void(int)> rec = [&](int next) {
    if (bad) return;
    if (!cur.empty()) {
      std::set<int> np;
      for (int x : cur)
        for (int w : g.adjacency[x]) np.insert(w);
      long long lhs = 0;
      for (int w : np)
        if (!sv.count(w)) ++lhs;
      long long rhs = static_cast<long long>(d - 1) * cur.size();
      for (int x : cur)
        if (sv.count(x)) {
          auto it = sdeg.find(x);
          rhs -= (it == sdeg.end() ? 0 : it->second) - 1;
        }
      if (lhs < rhs) {
        bad = cur;
        return;
      }
    }
    if (static_cast<int>(cur.size()) == 2 * m) return;
    for (int v = next; v < g.n; ++v) {
      cur.push_back(v);
      rec(v + 1);
      cur.pop_back();
      if (bad) return;
    }
  };
  rec(0);
  return bad;
}

std::optional<std::vector<int>> oracle_violator(const EmbeddingState& st) {
  return oracle_violator(*st.host, st.s_vertices(), st.s_edges(), st.d, st.m);
}

// Direct inequality evaluation for one given set, for witness genuineness.
bool oracle_set_violates(const EmbeddingState& st, const std::vector<int>& u) {
  std::set<int> sv;
  for (int v : st.s_vertices()) sv.insert(v);
  std::set<int> np;
  for (int x : u)
    for (int w : st.host->adjacency[x]) np.insert(w);
  long long lhs = 0;
  for (int w : np)
    if (!sv.count(w)) ++lhs;
  long long rhs = static_cast<long long>(st.d - 1) * u.size();
  for (int x : u)
    if (sv.count(x)) rhs -= st.deg_s(x) - 1;
  return lhs < rhs;
}

Graph complete_graph(int n) {
  Graph g(n);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) g.add_edge(u, v);
  g.sort_lists();
  return g;
}

Graph two_cliques(int half) {
  Graph g(2 * half);
  for (int u = 0; u < half; ++u)
    for (int v = u + 1; v < half; ++v) {
      g.add_edge(u, v);
      g.add_edge(half + u, half + v);
    }
  g.sort_lists();
  return g;
}

// Certified suites need the joinedness hypothesis; draw until it holds.
Graph sample_joined_host(int n, double p, std::uint64_t seed, int m) {
  for (std::uint64_t off = 1; off <= 60; ++off) {
    Graph g = gen_gnp({n, p, seed + 1000 * off});
    if (check_m_joined(g, m).joined) return g;
  }
  throw std::runtime_error("sample_joined_host: no joined draw");
}

// Random connected S: start anywhere, repeatedly attach a fresh host
// neighbour of a uniformly chosen S-edge slot.
std::vector<int> grow_random_subtree(EmbeddingState& st, int size, Rng rng) {
  const Graph& g = *st.host;
  int v0 = static_cast<int>(rng.below(g.n));
  st.raw_add_vertex(v0);
  std::vector<int> verts{v0};
  while (static_cast<int>(verts.size()) < size) {
    std::vector<std::pair<int, int>> opts;
    for (int v : verts)
      for (int w : g.adjacency[v])
        if (!st.in_s[w]) opts.push_back({v, w});
    if (opts.empty()) break;
    auto [v, w] = opts[rng.below(opts.size())];
    st.raw_add_vertex(w);
    st.raw_add_edge(v, w);
    verts.push_back(w);
  }
  return verts;
}

// Spine with a depth-`depth` branch every `spacing` spine vertices; tips of
// neighbouring branches sit exactly 2*depth + spacing apart.
struct BranchTree {
  Tree tree;
  std::vector<int> tips;
};

BranchTree make_branch_tree(int branches, int depth, int spacing) {
  int spine = branches * spacing;
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < spine; ++i) e.push_back({i - 1, i});
  int next = spine;
  std::vector<int> tips;
  for (int b = 0; b < branches; ++b) {
    int prev = b * spacing;
    for (int j = 0; j < depth; ++j) {
      e.push_back({prev, next});
      prev = next++;
    }
    tips.push_back(prev);
  }
  return {Tree(next, e), tips};
}

void require_s_path(const EmbeddingState& st, const std::vector<int>& path) {
  std::set<int> seen(path.begin(), path.end());
  REQUIRE(seen.size() == path.size());
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    REQUIRE(st.host->has_edge(path[i], path[i + 1]));
    REQUIRE(st.in_s[path[i]]);
  }
  REQUIRE(st.in_s[path.back()]);
}

}  // namespace

TEST_CASE("connection depth arithmetic") {
  REQUIRE(connect_depth(4, 2) == 2);   // 3 < 4 <= 9
  REQUIRE(connect_depth(3, 2) == 2);   // 2 < 4 = 4
  REQUIRE(connect_depth(3, 8) == 4);   // 2,4,8 < 16 = 16
  REQUIRE(connect_depth(8, 4) == 2);   // 7 < 8 <= 49
  REQUIRE(connect_depth(10, 1) == 1);
  REQUIRE(connect_depth(6, 1) == 1);
  REQUIRE_THROWS_AS(connect_depth(2, 2), std::invalid_argument);
  REQUIRE_THROWS_AS(connect_depth(4, 0), std::invalid_argument);
}

TEST_CASE("extendability verdicts") {
  SECTION("single vertex in a clique") {
    Graph g = complete_graph(20);
    EmbeddingState st(g, 3, 2);
    st.raw_add_vertex(0);
    auto v = check_extendable(st);
    REQUIRE(v.extendable);
    REQUIRE(v.checked_exhaustively);
    REQUIRE_FALSE(v.violating_set.has_value());
    REQUIRE_FALSE(oracle_violator(st).has_value());
  }

  SECTION("two disjoint cliques cannot expand across") {
    Graph g = two_cliques(5);
    EmbeddingState st(g, 3, 2);
    st.raw_add_vertex(0);
    auto v = check_extendable(st);
    REQUIRE_FALSE(v.extendable);
    REQUIRE(v.violating_set.has_value());
    REQUIRE(v.violating_set->size() <= 4);
    REQUIRE(oracle_set_violates(st, *v.violating_set));
    REQUIRE(oracle_violator(st).has_value());
  }

  SECTION("random host agrees with the independent enumerator") {
    Graph g = gen_gnp({40, 0.4, 9});
    EmbeddingState st(g, 3, 2);
    grow_random_subtree(st, 5, Rng(9, 0).derive("subtree"));
    REQUIRE(st.s_count == 5);
    auto v = check_extendable(st);
    REQUIRE(v.checked_exhaustively);
    auto ov = oracle_violator(st);
    REQUIRE(v.extendable == !ov.has_value());
    if (v.violating_set) REQUIRE(oracle_set_violates(st, *v.violating_set));

    EmbeddingState hs(g, 3, 2, ExtMode::heuristic);
    grow_random_subtree(hs, 5, Rng(9, 0).derive("subtree"));
    auto hv = check_extendable(hs);
    REQUIRE_FALSE(hv.checked_exhaustively);
    if (hv.violating_set) REQUIRE(oracle_set_violates(hs, *hv.violating_set));
  }

  SECTION("degree gate and enumeration cap") {
    Graph g = complete_graph(20);
    EmbeddingState st(g, 3, 2);
    for (int v : {0, 1, 2, 3, 4}) st.raw_add_vertex(v);
    for (int v : {1, 2, 3, 4}) st.raw_add_edge(0, v);
    REQUIRE_THROWS_AS(check_extendable(st), std::invalid_argument);

    EmbeddingState st2(g, 3, 2);
    st2.raw_add_vertex(0);
    st2.subset_cap = 100;
    REQUIRE_THROWS_WITH(check_extendable(st2),
                        ContainsSubstring("budget exceeded"));
  }
}

TEST_CASE("leaf extension") {
  SECTION("clique leaf") {
    Graph g = complete_graph(20);
    EmbeddingState st(g, 3, 2);
    st.raw_add_vertex(5);
    int y = extend_leaf(st, 5);
    REQUIRE(y != 5);
    REQUIRE(st.in_s[y]);
    REQUIRE(st.has_s_edge(5, y));
    REQUIRE(st.s_count == 2);
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("size gate fires before any search") {
    Graph g = complete_graph(20);
    EmbeddingState st(g, 3, 2);  // bound: |S| <= 20 - 12 - 6 - 1 = 1
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    REQUIRE_THROWS_WITH(extend_leaf(st, 0),
                        ContainsSubstring("size condition"));
    REQUIRE(st.s_count == 2);
    REQUIRE(st.s_edges().empty());
  }

  SECTION("no candidate when the neighbourhood is used up") {
    Graph g(13);  // star: leaves only reach the centre
    for (int v = 1; v < 13; ++v) g.add_edge(0, v);
    g.sort_lists();
    EmbeddingState st(g, 3, 1, ExtMode::heuristic);
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    st.raw_add_edge(0, 1);
    REQUIRE_THROWS_WITH(extend_leaf(st, 1),
                        ContainsSubstring("no viable leaf"));
  }

  SECTION("random certified instances stay extendable") {
    for (int inst = 0; inst < 200; ++inst) {
      int d = (inst % 4 == 3) ? 4 : 3;
      int n = (d == 4) ? 24 + inst % 3 : 20 + inst % 7;
      Graph g = sample_joined_host(n, 0.95, 5000 + inst, 2);
      EmbeddingState st(g, d, 2);
      int cap = n - 4 * d - 7;  // extend_leaf size bound at m = 2
      int target = 1 + inst % 2;
      if (target >= cap) target = 1;
      auto verts = grow_random_subtree(st, target, Rng(500 + inst, 0));
      int s = verts.front();
      for (int v : verts)
        if (st.deg_s(v) <= d - 1) s = v;
      int y = extend_leaf(st, s);
      REQUIRE(st.in_s[y]);
      REQUIRE(st.has_s_edge(s, y));
      REQUIRE(check_extendable(st).extendable);
    }
  }
}

TEST_CASE("leaf removal and edge insertion") {
  Graph g = complete_graph(20);

  SECTION("single edge collapses to a vertex") {
    EmbeddingState st(g, 3, 2);
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    st.raw_add_edge(0, 1);
    st.image[7] = 1;
    remove_leaf(st, 1);
    REQUIRE(st.s_count == 1);
    REQUIRE_FALSE(st.in_s[1]);
    REQUIRE(st.image.empty());  // entries pointing at y go with it
  }

  SECTION("interior vertices refuse removal") {
    EmbeddingState st(g, 3, 2);
    for (int v : {0, 1, 2}) st.raw_add_vertex(v);
    st.raw_add_edge(0, 1);
    st.raw_add_edge(1, 2);
    REQUIRE_THROWS_WITH(remove_leaf(st, 1), ContainsSubstring("not an S-leaf"));
  }

  SECTION("extend then remove is the identity") {
    EmbeddingState st(g, 3, 2);
    st.raw_add_vertex(4);
    int y = extend_leaf(st, 4);
    remove_leaf(st, y);
    REQUIRE(st.s_vertices() == std::vector<int>{4});
    REQUIRE(st.s_edges().empty());
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("edge insertion between isolated S-vertices") {
    EmbeddingState st(g, 3, 2);
    st.raw_add_vertex(0);
    st.raw_add_vertex(7);
    insert_edge(st, 0, 7);
    REQUIRE(st.has_s_edge(0, 7));
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("degree-saturated endpoint rejects insertion") {
    EmbeddingState st(g, 3, 2);
    for (int v : {0, 1, 2, 3, 4}) st.raw_add_vertex(v);
    for (int v : {1, 2, 3}) st.raw_add_edge(0, v);  // deg_S(0) = d
    REQUIRE_THROWS_WITH(insert_edge(st, 0, 4),
                        ContainsSubstring("degree bound"));
  }

  SECTION("non-host edges are rejected") {
    Graph h = two_cliques(5);
    EmbeddingState st(h, 3, 2, ExtMode::heuristic);
    st.raw_add_vertex(0);
    st.raw_add_vertex(5);
    REQUIRE_THROWS_WITH(insert_edge(st, 0, 5),
                        ContainsSubstring("not a host edge"));
  }

  SECTION("random certified insertions pass the post-check") {
    for (int inst = 0; inst < 30; ++inst) {
      int n = 20 + inst % 7;
      Graph h = sample_joined_host(n, 0.95, 9000 + inst, 2);
      EmbeddingState st(h, 3, 2);
      Rng rng(700 + inst, 0);
      int u = static_cast<int>(rng.below(n));
      int w = h.adjacency[u][rng.below(h.adjacency[u].size())];
      st.raw_add_vertex(u);
      st.raw_add_vertex(w);
      insert_edge(st, u, w);
      REQUIRE(st.has_s_edge(u, w));
      REQUIRE_FALSE(oracle_violator(st).has_value());
    }
  }
}

TEST_CASE("tree replay onto a host") {
  SECTION("path into a clique, certified") {
    Graph g = complete_graph(50);
    Tree t = make_path(10);
    EmbeddingState st(g, 4, 2);
    embed_tree(st, t, 0, 0);
    REQUIRE(st.image.size() == 10);
    REQUIRE(st.s_count == 10);
    auto chk = verify_embedding(g, t, st.image);
    REQUIRE(chk.ok);
    for (int v = 0; v + 1 < 10; ++v)
      REQUIRE(st.has_s_edge(st.image.at(v), st.image.at(v + 1)));
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("tree degree must stay below d/2") {
    Graph g = complete_graph(50);
    Tree t = make_star(5);  // max degree 4, 2*4 > 6
    EmbeddingState st(g, 6, 2);
    REQUIRE_THROWS_WITH(embed_tree(st, t, 0, 0),
                        ContainsSubstring("tree degree"));
  }

  SECTION("size gate") {
    Graph g = complete_graph(20);
    Tree t = make_path(5);
    EmbeddingState st(g, 4, 2);  // 5 > 20 - 16 - 6
    REQUIRE_THROWS_WITH(embed_tree(st, t, 0, 0),
                        ContainsSubstring("size condition"));
  }

  SECTION("heuristic Monte Carlo on a random host") {
    Graph g = gen_gnp({200, 0.25, 4});
    int ok = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Tree t = make_random_tree(80, 3, 40000 + trial);
      EmbeddingState st(g, 8, 4, ExtMode::heuristic);
      try {
        embed_tree(st, t, 0, static_cast<int>(Rng(trial, 7).below(200)));
      } catch (const std::runtime_error&) {
        continue;
      }
      if (verify_embedding(g, t, st.image).ok) ++ok;
    }
    REQUIRE(ok >= 95);
  }
}

TEST_CASE("fresh path connections") {
  SECTION("clique path of the minimum length") {
    Graph g = complete_graph(30);
    EmbeddingState st(g, 4, 2);
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    auto path = connect_path(st, 0, 1, 5);
    REQUIRE(path.size() == 6);
    REQUIRE(path.front() == 0);
    REQUIRE(path.back() == 1);
    require_s_path(st, path);
    for (std::size_t i = 0; i + 1 < path.size(); ++i)
      REQUIRE(st.has_s_edge(path[i], path[i + 1]));
    REQUIRE(st.s_count == 6);
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("length below the bound leaves the state untouched") {
    Graph g = complete_graph(30);
    EmbeddingState st(g, 4, 2);
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    REQUIRE_THROWS_WITH(connect_path(st, 0, 1, 4),
                        ContainsSubstring("length condition"));
    REQUIRE(st.s_count == 2);
    REQUIRE(st.s_edges().empty());
  }

  SECTION("random hosts, random lengths, posts verified") {
    int ok = 0;
    for (int seed = 0; seed < 100; ++seed) {
      Graph g = gen_gnp({150, 0.2, 77000ull + seed});
      EmbeddingState st(g, 4, 2, ExtMode::heuristic);
      Rng rng(seed, 0);
      int a = static_cast<int>(rng.below(150));
      int b = a;
      while (b == a) b = static_cast<int>(rng.below(150));
      st.raw_add_vertex(a);
      st.raw_add_vertex(b);
      int len = 5 + seed % 7;
      std::vector<int> path;
      try {
        path = connect_path(st, a, b, len);
      } catch (const std::runtime_error&) {
        continue;
      }
      REQUIRE(path.size() == static_cast<std::size_t>(len) + 1);
      REQUIRE(path.front() == a);
      REQUIRE(path.back() == b);
      require_s_path(st, path);
      for (std::size_t i = 0; i + 1 < path.size(); ++i)
        REQUIRE(st.has_s_edge(path[i], path[i + 1]));
      REQUIRE(check_extendable(st).extendable);
      ++ok;
    }
    REQUIRE(ok >= 90);
  }
}

TEST_CASE("set to set connections") {
  SECTION("clique singletons at the short depth") {
    Graph g = complete_graph(40);
    EmbeddingState st(g, 4, 2);
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    auto res = connect_sets(st, {0}, {1}, 2);
    REQUIRE(res.a == 0);
    REQUIRE(res.b == 1);
    REQUIRE(res.path.size() == 6);
    REQUIRE(res.missing.first == res.path[2]);
    REQUIRE(res.missing.second == res.path[3]);
    REQUIRE_FALSE(st.has_s_edge(res.missing.first, res.missing.second));
    REQUIRE(g.has_edge(res.missing.first, res.missing.second));
    REQUIRE(st.s_edges().size() == 4);
    require_s_path(st, res.path);
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("long connections route through a grown lead-out") {
    Graph g = complete_graph(40);
    EmbeddingState st(g, 4, 2);
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    auto res = connect_sets(st, {0}, {1}, 3);
    REQUIRE(res.path.size() == 8);
    REQUIRE(res.a == 0);
    REQUIRE(res.b == 1);
    REQUIRE(res.missing.first == res.path[4]);
    REQUIRE(res.missing.second == res.path[5]);
    REQUIRE(st.s_edges().size() == 6);
    require_s_path(st, res.path);
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("precondition errors") {
    Graph g = complete_graph(40);
    EmbeddingState st(g, 4, 2);
    st.raw_add_vertex(0);
    st.raw_add_vertex(1);
    REQUIRE_THROWS_AS(connect_sets(st, {}, {1}, 2), std::invalid_argument);
    REQUIRE_THROWS_WITH(connect_sets(st, {0}, {0}, 2),
                        ContainsSubstring("overlap"));
    // j = 1: (d-1)^1 * 1 = 3 < 2m = 4
    REQUIRE_THROWS_WITH(connect_sets(st, {0}, {1}, 1),
                        ContainsSubstring("too small"));
    REQUIRE(st.s_count == 2);
  }

  SECTION("round trip: peel both halves back off") {
    for (int inst = 0; inst < 15; ++inst) {
      int n = 22 + inst % 5;
      Graph g = sample_joined_host(n, 0.95, 13000 + inst, 2);
      EmbeddingState st(g, 3, 2);
      Rng rng(1300 + inst, 0);
      int a = static_cast<int>(rng.below(n));
      int b = a;
      while (b == a) b = static_cast<int>(rng.below(n));
      st.raw_add_vertex(a);
      st.raw_add_vertex(b);
      int j = 2;  // = connect_depth(3, 2)
      auto res = connect_sets(st, {a}, {b}, j);
      REQUIRE(res.path.size() == static_cast<std::size_t>(2 * j) + 2);
      REQUIRE_FALSE(st.has_s_edge(res.missing.first, res.missing.second));
      for (int i = j; i >= 1; --i) remove_leaf(st, res.path[i]);
      for (int i = j + 1; i <= 2 * j; ++i) remove_leaf(st, res.path[i]);
      std::vector<int> want{std::min(a, b), std::max(a, b)};
      REQUIRE(st.s_vertices() == want);
      REQUIRE(st.s_edges().empty());
      REQUIRE(check_extendable(st).extendable);
      REQUIRE_FALSE(oracle_violator(st).has_value());
    }
  }
}

TEST_CASE("covering embeddings") {
  SECTION("empty cover set reduces to plain replay") {
    Graph g = complete_graph(60);
    Tree t = make_spider(3, 4);
    EmbeddingState st(g, 6, 1);
    embed_cover(st, t, {4, 8, 12}, {}, 0, 0);
    REQUIRE(st.image.size() == static_cast<std::size_t>(t.n));
    REQUIRE(verify_embedding(g, t, st.image).ok);
  }

  SECTION("certified spider cover lands the designated vertex") {
    Graph g = complete_graph(150);
    Tree t = make_spider(5, 8);  // 41 vertices, tips 16 apart
    std::vector<int> tips{8, 16, 24, 32, 40};
    REQUIRE(pairwise_separated(t, tips, 16));
    EmbeddingState st(g, 10, 1);
    embed_cover(st, t, tips, {77}, 0, 0);
    REQUIRE(verify_embedding(g, t, st.image).ok);
    bool covered = false;
    for (int q : tips)
      if (st.image.at(q) == 77) covered = true;
    REQUIRE(covered);
    REQUIRE(check_extendable(st).extendable);
  }

  SECTION("wide spider cover at the exact size budget") {
    Graph g = complete_graph(340);
    Tree t = make_spider(12, 8);  // 97 vertices, centre degree 12
    std::vector<int> tips;
    for (int i = 1; i <= 12; ++i) tips.push_back(8 * i);
    EmbeddingState st(g, 24, 1, ExtMode::heuristic);
    embed_cover(st, t, tips, {100}, 0, 0);
    REQUIRE(verify_embedding(g, t, st.image).ok);
    bool covered = false;
    for (int q : tips)
      if (st.image.at(q) == 100) covered = true;
    REQUIRE(covered);
  }

  SECTION("validation and size errors") {
    Graph g = complete_graph(150);
    Tree t = make_spider(5, 8);
    std::vector<int> tips{8, 16, 24, 32, 40};
    EmbeddingState st(g, 10, 1);
    REQUIRE_THROWS_WITH(embed_cover(st, t, {8, 10}, {77}, 0, 0),
                        ContainsSubstring("16-separated"));
    REQUIRE_THROWS_WITH(embed_cover(st, t, tips, {77, 78}, 0, 0),
                        ContainsSubstring("|Q| >= 3|X|"));
    REQUIRE_THROWS_WITH(embed_cover(st, t, tips, {77, 77, 78}, 0, 0),
                        ContainsSubstring("cover targets"));
    EmbeddingState st2(g, 10, 2);  // 10dm = 200 > 150
    REQUIRE_THROWS_WITH(embed_cover(st2, t, tips, {77}, 0, 0),
                        ContainsSubstring("size condition"));
    REQUIRE(st.s_count == 0);
    REQUIRE(st2.s_count == 0);
  }

  SECTION("unreachable target stalls and rolls back") {
    Graph g(101);  // complete on 0..99, vertex 100 isolated
    for (int u = 0; u < 100; ++u)
      for (int v = u + 1; v < 100; ++v) g.add_edge(u, v);
    g.sort_lists();
    Tree t = make_spider(3, 8);
    std::vector<int> tips{8, 16, 24};
    EmbeddingState st(g, 6, 1, ExtMode::heuristic);
    REQUIRE_THROWS_WITH(embed_cover(st, t, tips, {100}, 0, 0),
                        ContainsSubstring("coverage stalled"));
    REQUIRE(st.s_count == 0);
    REQUIRE(st.image.empty());
  }

  SECTION("random hosts cover three targets") {
    auto bt = make_branch_tree(24, 7, 2);  // 216 vertices, tips 16-separated
    REQUIRE(bt.tree.n == 216);
    REQUIRE(bt.tree.max_degree == 3);
    REQUIRE(pairwise_separated(bt.tree, bt.tips, 16));
    int ok = 0;
    for (int seed = 0; seed < 100; ++seed) {
      Graph g = gen_gnp({300, 0.15, 6000ull + seed});
      EmbeddingState st(g, 6, 1, ExtMode::heuristic);
      std::vector<int> x{10, 20, 30};
      try {
        embed_cover(st, bt.tree, bt.tips, x, 0, 0);
      } catch (const std::runtime_error&) {
        continue;
      }
      if (!verify_embedding(g, bt.tree, st.image).ok) continue;
      std::set<int> tipimg;
      for (int q : bt.tips) tipimg.insert(st.image.at(q));
      bool all = true;
      for (int t : x)
        if (!tipimg.count(t)) all = false;
      if (all) ++ok;
    }
    REQUIRE(ok >= 90);
  }
}

TEST_CASE("certified operation sequences keep the invariant") {
  for (int run = 0; run < 6; ++run) {
    int n = 26;
    Graph g = sample_joined_host(n, 0.95, 21000 + run, 2);
    EmbeddingState st(g, 3, 2);
    Rng rng(2100 + run, 0);
    std::vector<int> verts = grow_random_subtree(st, 1, rng.derive("seed"));
    std::set<int> expect(verts.begin(), verts.end());
    for (int op = 0; op < 8; ++op) {
      int roll = static_cast<int>(rng.below(10));
      if (roll < 6) {
        auto sv = st.s_vertices();
        int s = sv[rng.below(sv.size())];
        if (st.deg_s(s) > st.d - 1) continue;
        try {
          int y = extend_leaf(st, s);
          expect.insert(y);
        } catch (const std::runtime_error&) {
        }
      } else if (roll < 8) {
        auto sv = st.s_vertices();
        int u = sv[rng.below(sv.size())];
        int w = sv[rng.below(sv.size())];
        try {
          insert_edge(st, u, w);
        } catch (const std::invalid_argument&) {
        }
      } else {
        auto sv = st.s_vertices();
        int y = -1;
        for (int v : sv)
          if (st.deg_s(v) == 1) y = v;
        if (y >= 0 && st.s_count > 1) {
          remove_leaf(st, y);
          expect.erase(y);
        }
      }
      // After every mutation: library verdict and independent oracle agree
      // that S is extendable, the S-edges live in the host, degrees bounded.
      REQUIRE(check_extendable(st).extendable);
      REQUIRE_FALSE(oracle_violator(st).has_value());
      std::vector<int> want(expect.begin(), expect.end());
      REQUIRE(st.s_vertices() == want);
      for (auto [u, w] : st.s_edges()) {
        REQUIRE(g.has_edge(u, w));
      }
      REQUIRE(st.max_deg_s() <= st.d);
    }
  }
}

TEST_CASE("embedding dumps parse back") {
  Graph g = complete_graph(30);
  Tree t = make_path(4);
  EmbeddingState st(g, 4, 2);
  embed_tree(st, t, 0, 0);
  auto parsed = nlohmann::json::parse(dump_embedding(st));
  REQUIRE(parsed["image"].size() == 4);
  REQUIRE(parsed["image"]["0"] == 0);
  REQUIRE(parsed["s_edges"].size() == 3);
}
