#pragma once

#include <vector>

#include "graphnlp/errors.hpp"

namespace gnlp {

/// Sorted neighbor lists over 0-based node indices.
using AdjacencyList = std::vector<std::vector<int>>;

/// Splits the nodes into K non-empty blocks V_k that are disjoint and cover
/// the graph. Deterministic: farthest-point seeds grown breadth-first under
/// balanced quotas, leftovers attached to the smallest adjacent block.
/// Throws TooManyParts when K is out of range.
std::vector<std::vector<int>> partition_graph(const AdjacencyList& adj, int K);

/// BFS closure of a block: every node within omega hops. Sorted.
std::vector<int> expand_part(const AdjacencyList& adj,
                             const std::vector<int>& part, int omega);

/// Longest shortest path, maximized over connected components.
int graph_diameter(const AdjacencyList& adj);

/// Subdomain geometry for the restricted additive Schwarz preconditioner:
/// W_k collects the owned primal-dual indices of V_k (solution scatter set),
/// W_expanded those of the overlapping closure V_k^omega (solve set).
struct SubdomainMap {
  int K{0};
  int diameter{0};
  AdjacencyList adjacency;
  std::vector<std::vector<int>> node_index_sets;  // U_i per graph node
  std::vector<std::vector<int>> parts;            // V_k, disjoint cover
  std::vector<int> omega;                         // overlap per block
  std::vector<std::vector<int>> expanded;         // V_k^omega
  std::vector<std::vector<int>> W;                // sorted, disjoint cover
  std::vector<std::vector<int>> W_expanded;       // sorted, superset of W[k]
  std::vector<std::vector<int>> restrict_pos;     // W[k][i] at
                                                  // W_expanded[k][restrict_pos[k][i]]

  /// Raises every block's overlap by `levels`, capped at the graph diameter
  /// (where the closure is the whole graph), and rebuilds the index sets.
  void expand_all(int levels);

 private:
  friend SubdomainMap build_subdomains(const AdjacencyList&,
                                       const std::vector<std::vector<int>>&,
                                       int, int);
  void rebuild_expanded();
};

/// omega >= 0 applies one overlap everywhere; omega < 0 selects it per block
/// as the smallest value with |V_k^omega| >= ceil(1.5 |V_k|), capped at the
/// graph diameter.
SubdomainMap build_subdomains(const AdjacencyList& adj,
                              const std::vector<std::vector<int>>& index_sets,
                              int K, int omega);

/// Checks every structural invariant of the map against the total
/// primal-dual index count; throws Error with a description on violation.
void validate_subdomains(const SubdomainMap& map, int total_indices);

}  // namespace gnlp
