#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace efr::detail {

// Strongly connected components over adjacency lists; one component id per
// node, assigned deterministically (iterative Tarjan from node 0 upward).
inline std::vector<int> strongly_connected_components(
    int n, const std::vector<std::vector<int>>& adjacency) {
  std::vector<int> comp(n, -1), low(n, 0), num(n, -1);
  std::vector<int> tarjan_stack;
  std::vector<char> on_stack(n, 0);
  int counter = 0, comp_count = 0;

  struct Frame {
    int node;
    size_t next_child;
  };
  for (int root = 0; root < n; ++root) {
    if (num[root] >= 0) continue;
    std::vector<Frame> frames{{root, 0}};
    num[root] = low[root] = counter++;
    tarjan_stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      Frame& f = frames.back();
      bool descended = false;
      while (f.next_child < adjacency[f.node].size()) {
        const int v = adjacency[f.node][f.next_child++];
        if (v == f.node) continue;
        if (num[v] < 0) {
          num[v] = low[v] = counter++;
          tarjan_stack.push_back(v);
          on_stack[v] = 1;
          frames.push_back({v, 0});
          descended = true;
          break;
        }
        if (on_stack[v]) low[f.node] = std::min(low[f.node], num[v]);
      }
      if (descended) continue;
      if (low[f.node] == num[f.node]) {
        int v;
        do {
          v = tarjan_stack.back();
          tarjan_stack.pop_back();
          on_stack[v] = 0;
          comp[v] = comp_count;
        } while (v != f.node);
        ++comp_count;
      }
      const int child = f.node;
      frames.pop_back();
      if (!frames.empty()) {
        low[frames.back().node] = std::min(low[frames.back().node], low[child]);
      }
    }
  }
  return comp;
}

// Same over the strictly positive entries of a dense weight matrix.
inline std::vector<int> strongly_connected_components(const Eigen::MatrixXd& weights) {
  const int n = static_cast<int>(weights.rows());
  std::vector<std::vector<int>> adjacency(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && weights(i, j) > 0.0) adjacency[i].push_back(j);
  return strongly_connected_components(n, adjacency);
}

inline int component_count(const std::vector<int>& comp) {
  int count = 0;
  for (int c : comp) count = std::max(count, c + 1);
  return count;
}

// Nodes of a component with no outgoing edges to other components, or an
// empty vector when the graph is strongly connected.
inline std::vector<int> terminal_component(const Eigen::MatrixXd& weights,
                                           const std::vector<int>& comp) {
  const int n = static_cast<int>(weights.rows());
  const int k = component_count(comp);
  if (k <= 1) return {};
  std::vector<char> has_exit(k, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (weights(i, j) > 0.0 && comp[i] != comp[j]) has_exit[comp[i]] = 1;
  for (int c = 0; c < k; ++c) {
    if (has_exit[c]) continue;
    std::vector<int> cut;
    for (int i = 0; i < n; ++i)
      if (comp[i] == c) cut.push_back(i);
    return cut;
  }
  return {};  // unreachable: a finite condensation always has a sink
}

}  // namespace efr::detail
