#include "graphnlp/partition.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <string>

namespace gnlp {

namespace {

constexpr int kUnreached = std::numeric_limits<int>::max();

std::vector<int> bfs_distances(const AdjacencyList& adj,
                               const std::vector<int>& sources) {
  std::vector<int> dist(adj.size(), kUnreached);
  std::deque<int> queue;
  for (int s : sources) {
    dist[s] = 0;
    queue.push_back(s);
  }
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    for (int v : adj[u]) {
      if (dist[v] != kUnreached) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

}  // namespace

std::vector<std::vector<int>> partition_graph(const AdjacencyList& adj,
                                              int K) {
  const int n = static_cast<int>(adj.size());
  if (K < 1 || K > n)
    throw TooManyParts("K=" + std::to_string(K) + " blocks for " +
                       std::to_string(n) + " nodes");

  // Farthest-point seeds starting from node 0; unreached components have
  // infinite distance and therefore get seeded first. Ties break to the
  // lowest node index. Seeds are then sorted so growth order is stable.
  std::vector<int> seeds{0};
  std::vector<int> mindist = bfs_distances(adj, seeds);
  while (static_cast<int>(seeds.size()) < K) {
    int best = -1;
    for (int v = 0; v < n; ++v) {
      if (mindist[v] == 0) continue;
      if (best < 0 || mindist[v] > mindist[best]) best = v;
    }
    seeds.push_back(best);
    std::vector<int> d = bfs_distances(adj, {best});
    for (int v = 0; v < n; ++v) mindist[v] = std::min(mindist[v], d[v]);
  }
  std::sort(seeds.begin(), seeds.end());

  std::vector<int> owner(n, -1);
  std::vector<std::vector<int>> parts(K);
  for (int k = 0; k < K; ++k) owner[seeds[k]] = k;  // protect later seeds

  // Grow each block breadth-first over unassigned nodes until its quota.
  for (int k = 0; k < K; ++k) {
    const int quota = n / K + (k < n % K ? 1 : 0);
    std::deque<int> queue{seeds[k]};
    std::vector<char> seen(n, 0);
    seen[seeds[k]] = 1;
    while (!queue.empty() && static_cast<int>(parts[k].size()) < quota) {
      int u = queue.front();
      queue.pop_front();
      parts[k].push_back(u);
      for (int v : adj[u]) {
        if (seen[v] || owner[v] >= 0) continue;
        seen[v] = 1;
        owner[v] = k;
        queue.push_back(v);
      }
    }
    for (int u : queue) owner[u] = -1;  // unconsumed frontier goes back
    for (int u : parts[k]) owner[u] = k;
  }

  // Leftovers: attach to the smallest adjacent block; isolated remainders
  // (disconnected graphs) go to the globally smallest block.
  int unassigned = n - std::accumulate(
                           parts.begin(), parts.end(), 0,
                           [](int a, const auto& p) {
                             return a + static_cast<int>(p.size());
                           });
  while (unassigned > 0) {
    bool progress = false;
    for (int v = 0; v < n; ++v) {
      if (owner[v] >= 0) continue;
      int pick = -1;
      for (int u : adj[v]) {
        if (owner[u] < 0) continue;
        if (pick < 0 || parts[owner[u]].size() < parts[pick].size() ||
            (parts[owner[u]].size() == parts[pick].size() && owner[u] < pick))
          pick = owner[u];
      }
      if (pick >= 0) {
        owner[v] = pick;
        parts[pick].push_back(v);
        --unassigned;
        progress = true;
      }
    }
    if (!progress) {
      for (int v = 0; v < n && unassigned > 0; ++v) {
        if (owner[v] >= 0) continue;
        int pick = 0;
        for (int k = 1; k < K; ++k)
          if (parts[k].size() < parts[pick].size()) pick = k;
        owner[v] = pick;
        parts[pick].push_back(v);
        --unassigned;
      }
    }
  }

  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

std::vector<int> expand_part(const AdjacencyList& adj,
                             const std::vector<int>& part, int omega) {
  std::vector<int> dist = bfs_distances(adj, part);
  std::vector<int> out;
  for (int v = 0; v < static_cast<int>(adj.size()); ++v)
    if (dist[v] <= omega) out.push_back(v);
  return out;
}

int graph_diameter(const AdjacencyList& adj) {
  int diameter = 0;
  for (int v = 0; v < static_cast<int>(adj.size()); ++v) {
    std::vector<int> d = bfs_distances(adj, {v});
    for (int u = 0; u < static_cast<int>(adj.size()); ++u)
      if (d[u] != kUnreached) diameter = std::max(diameter, d[u]);
  }
  return diameter;
}

void SubdomainMap::rebuild_expanded() {
  expanded.assign(K, {});
  W.assign(K, {});
  W_expanded.assign(K, {});
  restrict_pos.assign(K, {});
  for (int k = 0; k < K; ++k) {
    expanded[k] = expand_part(adjacency, parts[k], omega[k]);
    for (int i : parts[k])
      W[k].insert(W[k].end(), node_index_sets[i].begin(),
                  node_index_sets[i].end());
    std::sort(W[k].begin(), W[k].end());
    for (int i : expanded[k])
      W_expanded[k].insert(W_expanded[k].end(), node_index_sets[i].begin(),
                           node_index_sets[i].end());
    std::sort(W_expanded[k].begin(), W_expanded[k].end());
    restrict_pos[k].resize(W[k].size());
    size_t pos = 0;
    for (size_t i = 0; i < W[k].size(); ++i) {
      while (pos < W_expanded[k].size() && W_expanded[k][pos] != W[k][i])
        ++pos;
      restrict_pos[k][i] = static_cast<int>(pos);
    }
  }
}

void SubdomainMap::expand_all(int levels) {
  for (int k = 0; k < K; ++k)
    omega[k] = std::min(omega[k] + levels, diameter);
  rebuild_expanded();
}

SubdomainMap build_subdomains(const AdjacencyList& adj,
                              const std::vector<std::vector<int>>& index_sets,
                              int K, int omega) {
  if (adj.size() != index_sets.size())
    throw Error("adjacency and index sets disagree on the node count");
  SubdomainMap map;
  map.K = K;
  map.adjacency = adj;
  map.node_index_sets = index_sets;
  map.diameter = graph_diameter(adj);
  map.parts = partition_graph(adj, K);
  map.omega.assign(K, 0);
  if (omega >= 0) {
    for (int k = 0; k < K; ++k) map.omega[k] = std::min(omega, map.diameter);
  } else {
    // Automatic rule: the closure should carry at least 1.5x the block.
    const int n = static_cast<int>(adj.size());
    for (int k = 0; k < K; ++k) {
      const int want = (3 * static_cast<int>(map.parts[k].size()) + 1) / 2;
      int w = 0;
      std::vector<int> closure = map.parts[k];
      while (w < map.diameter && static_cast<int>(closure.size()) < want &&
             static_cast<int>(closure.size()) < n) {
        ++w;
        closure = expand_part(adj, map.parts[k], w);
      }
      map.omega[k] = w;
    }
  }
  map.rebuild_expanded();
  return map;
}

void validate_subdomains(const SubdomainMap& map, int total_indices) {
  auto fail = [](const std::string& what) { throw Error("subdomain map: " + what); };
  const int n = static_cast<int>(map.adjacency.size());
  std::vector<int> node_owner(n, -1);
  for (int k = 0; k < map.K; ++k) {
    if (map.parts[k].empty()) fail("empty block " + std::to_string(k));
    for (int v : map.parts[k]) {
      if (v < 0 || v >= n) fail("node index out of range");
      if (node_owner[v] >= 0) fail("blocks overlap at node " + std::to_string(v));
      node_owner[v] = k;
    }
    if (!std::includes(map.expanded[k].begin(), map.expanded[k].end(),
                       map.parts[k].begin(), map.parts[k].end()))
      fail("closure does not contain its block");
  }
  for (int v = 0; v < n; ++v)
    if (node_owner[v] < 0) fail("node " + std::to_string(v) + " unassigned");

  std::vector<int> index_owner(total_indices, -1);
  for (int k = 0; k < map.K; ++k) {
    if (!std::is_sorted(map.W[k].begin(), map.W[k].end()) ||
        !std::is_sorted(map.W_expanded[k].begin(), map.W_expanded[k].end()))
      fail("index sets not sorted");
    for (int i : map.W[k]) {
      if (i < 0 || i >= total_indices) fail("index out of range");
      if (index_owner[i] >= 0) fail("owned index sets overlap");
      index_owner[i] = k;
    }
    if (!std::includes(map.W_expanded[k].begin(), map.W_expanded[k].end(),
                       map.W[k].begin(), map.W[k].end()))
      fail("W_expanded does not contain W");
    if (map.restrict_pos[k].size() != map.W[k].size())
      fail("restriction positions missing");
    for (size_t i = 0; i < map.W[k].size(); ++i)
      if (map.W_expanded[k][map.restrict_pos[k][i]] != map.W[k][i])
        fail("restriction positions wrong");
  }
  for (int i = 0; i < total_indices; ++i)
    if (index_owner[i] < 0)
      fail("index " + std::to_string(i) + " not covered");
}

}  // namespace gnlp
