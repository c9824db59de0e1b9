#include <catch2/catch_amalgamated.hpp>

#include <functional>
#include <set>
#include <sstream>

#include "spanforge/graph.hpp"

using namespace spanforge;

namespace {

// Independent oracle: recursive enumeration of disjoint m-set pairs over a
// plain adjacency matrix. No shared code with check_m_joined.
struct JoinedOracle {
  std::vector<std::vector<char>> adj;
  int n, m;
  std::vector<int> a, b;
  bool joined = true;
  std::pair<std::vector<int>, std::vector<int>> bad;

  bool crossing() const {
    for (int x : a)
      for (int y : b)
        if (adj[x][y]) return true;
    return false;
  }
  void pick_b(int start) {
    if (!joined) return;
    if (static_cast<int>(b.size()) == m) {
      if (!crossing()) {
        joined = false;
        bad = {a, b};
      }
      return;
    }
    for (int v = start; v < n && joined; ++v) {
      bool used = false;
      for (int x : a) used |= (x == v);
      if (used) continue;
      b.push_back(v);
      pick_b(v + 1);
      b.pop_back();
    }
  }
  void pick_a(int start) {
    if (!joined) return;
    if (static_cast<int>(a.size()) == m) {
      pick_b(0);
      return;
    }
    for (int v = start; v < n && joined; ++v) {
      a.push_back(v);
      pick_a(v + 1);
      a.pop_back();
    }
  }
  bool run(const Graph& g, int mm) {
    n = g.n;
    m = mm;
    adj.assign(n, std::vector<char>(n, 0));
    for (int u = 0; u < n; ++u)
      for (int v : g.adjacency[u]) adj[u][v] = 1;
    joined = true;
    pick_a(0);
    return joined;
  }
};

// Independent oracle for expansion: enumerate subsets of the domain by bitmask
// recursion and count neighbours in W directly.
bool expansion_oracle(const Graph& g, const std::vector<int>& w, int d,
                      int size_cap, std::vector<int>* violator = nullptr) {
  std::vector<char> in_w(g.n, 0);
  for (int v : w) in_w[v] = 1;
  std::vector<int> u;
  bool ok = true;
  std::function<void(int)> rec = [&](int start) {
    if (!ok) return;
    if (!u.empty()) {
      std::vector<char> in_u(g.n, 0);
      for (int x : u) in_u[x] = 1;
      std::set<int> nb;
      for (int x : u)
        for (int y : g.adjacency[x])
          if (in_w[y] && !in_u[y]) nb.insert(y);
      if (static_cast<int>(nb.size()) < d * static_cast<int>(u.size())) {
        ok = false;
        if (violator) *violator = u;
        return;
      }
    }
    if (static_cast<int>(u.size()) == size_cap) return;
    for (int v = start; v < g.n && ok; ++v) {
      u.push_back(v);
      rec(v + 1);
      u.pop_back();
    }
  };
  rec(0);
  return ok;
}

}  // namespace

TEST_CASE("gen_gnp degenerate probabilities") {
  Graph empty = gen_gnp({5, 0.0, 42});
  CHECK(empty.n == 5);
  CHECK(empty.edge_count == 0);

  Graph full = gen_gnp({5, 1.0, 42});
  CHECK(full.edge_count == 10);
  for (int u = 0; u < 5; ++u)
    for (int v = u + 1; v < 5; ++v) CHECK(full.has_edge(u, v));
}

TEST_CASE("gen_gnp edge count lands in the concentration window") {
  Graph g = gen_gnp({100, 0.1, 1});
  CHECK(g.edge_count >= 300);
  CHECK(g.edge_count <= 700);
}

TEST_CASE("gen_gnp determinism and seed sensitivity") {
  Graph a = gen_gnp({60, 0.25, 7});
  Graph b = gen_gnp({60, 0.25, 7});
  Graph c = gen_gnp({60, 0.25, 8});
  CHECK(to_edge_list(a) == to_edge_list(b));
  CHECK(to_edge_list(a) != to_edge_list(c));
}

TEST_CASE("gen_gnp empirical rate tracks p") {
  // 40 samples at n=80: mean density within 0.03 of p.
  double total = 0;
  const double p = 0.3;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Graph g = gen_gnp({80, p, 1000 + s});
    total += static_cast<double>(g.edge_count) / (80.0 * 79.0 / 2.0);
  }
  CHECK(std::abs(total / 40 - p) < 0.03);
}

TEST_CASE("neighborhood open, closed, restricted") {
  // Path 0-1-2-3-4.
  Graph g(5);
  for (int i = 0; i + 1 < 5; ++i) g.add_edge(i, i + 1);
  g.sort_lists();
  CHECK(neighborhood(g, {2}) == VertexSet{1, 3});
  CHECK(neighborhood(g, {1, 2}) == VertexSet{0, 3});
  CHECK(neighborhood(g, {1, 2}, nullptr, true) == VertexSet{0, 1, 2, 3});
  VertexSet w{3, 4};
  CHECK(neighborhood(g, {1, 2}, &w) == VertexSet{3});
}

TEST_CASE("check_m_joined matches the recursive oracle") {
  Graph g = gen_gnp({60, 0.3, 3});
  JoinedOracle oracle;
  bool oracle_says = oracle.run(g, 2);
  // C(60,2)^2 pairs sit just above the default cap; configure it up.
  auto rep = check_m_joined(g, 2, CheckMode::exhaustive, 2000, 0, 4'000'000);
  CHECK(rep.exhaustive);
  CHECK(rep.joined == oracle_says);
  if (!rep.joined) {
    REQUIRE(rep.witness.has_value());
    auto [a, b] = *rep.witness;
    CHECK_FALSE(sets_joined(g, a, b));
  }
}

TEST_CASE("check_m_joined verdicts on structured graphs") {
  // Two disjoint triangles: not even 1-joined.
  Graph two(6);
  two.add_edge(0, 1); two.add_edge(1, 2); two.add_edge(0, 2);
  two.add_edge(3, 4); two.add_edge(4, 5); two.add_edge(3, 5);
  two.sort_lists();
  auto rep = check_m_joined(two, 1);
  CHECK_FALSE(rep.joined);
  REQUIRE(rep.witness.has_value());
  CHECK_FALSE(sets_joined(two, rep.witness->first, rep.witness->second));

  // Complete graph: m-joined for every feasible m.
  Graph k8 = gen_gnp({8, 1.0, 0});
  CHECK(check_m_joined(k8, 1).joined);
  CHECK(check_m_joined(k8, 2).joined);
  CHECK(check_m_joined(k8, 4).joined);
  Graph k10 = gen_gnp({10, 1.0, 0});
  CHECK(check_m_joined(k10, 1).joined);

  // Two disjoint K5 components at m=5: the components are the witness.
  Graph twok5(10);
  for (int u = 0; u < 5; ++u)
    for (int v = u + 1; v < 5; ++v) { twok5.add_edge(u, v); twok5.add_edge(u + 5, v + 5); }
  twok5.sort_lists();
  auto k5rep = check_m_joined(twok5, 5);
  CHECK_FALSE(k5rep.joined);
  REQUIRE(k5rep.witness.has_value());
  CHECK(k5rep.witness->first == VertexSet{0, 1, 2, 3, 4});
  CHECK(k5rep.witness->second == VertexSet{5, 6, 7, 8, 9});

  // Sampled mode finds the triangle witness too.
  auto srep = check_m_joined(two, 1, CheckMode::sampled, 50, 9);
  CHECK_FALSE(srep.joined);
}

TEST_CASE("check_m_joined budget guard") {
  Graph g = gen_gnp({200, 0.5, 1});
  CHECK_THROWS_AS(check_m_joined(g, 5, CheckMode::exhaustive),
                  std::runtime_error);
}

TEST_CASE("expansion_check on complete and star hosts") {
  Graph k10 = gen_gnp({10, 1.0, 0});
  VertexSet all(10);
  for (int i = 0; i < 10; ++i) all[i] = i;
  // K10: singletons have 9 neighbours, pairs have 8.
  CHECK(expansion_check(k10, all, 4, 2).passes);
  CHECK_FALSE(expansion_check(k10, all, 5, 2).passes);

  Graph star(10);
  for (int i = 1; i < 10; ++i) star.add_edge(0, i);
  star.sort_lists();
  auto v = expansion_check(star, all, 2, 2);
  CHECK_FALSE(v.passes);
  REQUIRE(v.violator.has_value());
  // Violator is genuine.
  auto u = *v.violator;
  VertexSet nb = neighborhood(star, u, &all);
  CHECK(static_cast<int>(nb.size()) < 2 * static_cast<int>(u.size()));
}

TEST_CASE("expansion_check agrees with the oracle on a random host") {
  Graph g = gen_gnp({80, 0.2, 5});
  Rng rng(5, hash_label("w-pick"));
  std::vector<int> perm(80);
  for (int i = 0; i < 80; ++i) perm[i] = i;
  shuffle_vec(perm, rng);
  VertexSet w(perm.begin(), perm.begin() + 40);
  std::sort(w.begin(), w.end());

  bool oracle_says = expansion_oracle(g, w, 3, 2);
  auto verdict = expansion_check(g, w, 3, 2);
  CHECK(verdict.exhaustive);
  CHECK(verdict.passes == oracle_says);
  if (!verdict.passes) {
    auto u = *verdict.violator;
    VertexSet nb = neighborhood(g, u, &w);
    CHECK(static_cast<int>(nb.size()) < 3 * static_cast<int>(u.size()));
  }
}

TEST_CASE("expansion_check sampled mode flags a planted weak set") {
  // 30-vertex random host plus three isolated-ish vertices tied to one hub.
  Graph g(33);
  {
    Graph base = gen_gnp({30, 0.4, 11});
    for (int u = 0; u < 30; ++u)
      for (int v : base.adjacency[u])
        if (u < v) g.add_edge(u, v);
  }
  g.add_edge(30, 0); g.add_edge(31, 0); g.add_edge(32, 0);
  g.sort_lists();
  VertexSet w(33);
  for (int i = 0; i < 33; ++i) w[i] = i;
  auto verdict = expansion_check(g, w, 2, 3, CheckMode::sampled, 500, 3);
  CHECK_FALSE(verdict.passes);
  auto u = *verdict.violator;
  VertexSet nb = neighborhood(g, u, &w);
  CHECK(static_cast<int>(nb.size()) < 2 * static_cast<int>(u.size()));
}

TEST_CASE("edge list round trip") {
  Graph g = gen_gnp({40, 0.3, 17});
  std::string text = to_edge_list(g);
  Graph h = graph_from_edge_list(text);
  CHECK(h.n == g.n);
  CHECK(h.edge_count == g.edge_count);
  CHECK(to_edge_list(h) == text);

  std::istringstream head(text);
  int n; long long m;
  head >> n >> m;
  CHECK(n == 40);
  CHECK(m == g.edge_count);
}

TEST_CASE("edge list rejects malformed input") {
  CHECK_THROWS(graph_from_edge_list(std::string("3 1\n2 1\n")));  // u>=v
  CHECK_THROWS(graph_from_edge_list(std::string("3 2\n0 1\n")));  // truncated
  CHECK_THROWS(graph_from_edge_list(std::string("3 1\n0 5\n")));  // range
}
