#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace skygp {

class TreeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TreeNode {
  int parent = -1;
  int left = -1;
  int right = -1;
  double height = 0.0;  // backward time: 0 = most recent tip, increasing into the past

  bool is_tip() const { return left < 0; }
};

/// Rooted binary genealogy with dated tips. Tips occupy ids [0, n_tips);
/// internal nodes follow in no particular order.
struct TimeTree {
  std::vector<TreeNode> nodes;
  std::vector<std::string> tip_labels;
  int root = -1;

  int n_tips() const { return static_cast<int>(tip_labels.size()); }
  int n_nodes() const { return static_cast<int>(nodes.size()); }
  double root_height() const { return nodes[static_cast<std::size_t>(root)].height; }
};

inline std::vector<int> postorder(const TimeTree& tree) {
  std::vector<int> out;
  out.reserve(tree.nodes.size());
  std::vector<int> stack{tree.root};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    out.push_back(id);
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(id)];
    if (!n.is_tip()) {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  std::reverse(out.begin(), out.end());
  return out;
}

/// Checks the structural invariants: binary topology, one root, all nodes
/// reachable, finite heights that never decrease toward the root, and the
/// most recent tip at height 0. Zero-length branches are allowed.
inline void validate_tree(const TimeTree& tree) {
  const int n = tree.n_tips();
  if (n < 2) throw TreeError("tree must have at least 2 tips");
  if (tree.n_nodes() != 2 * n - 1)
    throw TreeError("binary tree with " + std::to_string(n) + " tips must have " +
                    std::to_string(2 * n - 1) + " nodes, found " + std::to_string(tree.n_nodes()));
  if (tree.root < 0 || tree.root >= tree.n_nodes()) throw TreeError("invalid root id");

  int parentless = 0;
  for (int id = 0; id < tree.n_nodes(); ++id) {
    const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (!std::isfinite(node.height)) throw TreeError("non-finite height at node " + std::to_string(id));
    if (node.parent < 0) {
      ++parentless;
      if (id != tree.root) throw TreeError("parentless node that is not the root");
    }
    const bool tip_slot = id < n;
    if (tip_slot != node.is_tip())
      throw TreeError("node " + std::to_string(id) + ": tip/internal id convention violated");
    if (node.is_tip()) {
      if (node.height < 0) throw TreeError("tip height below 0 at node " + std::to_string(id));
    } else {
      if (node.right < 0) throw TreeError("internal node " + std::to_string(id) + " lacks a second child");
      for (int child : {node.left, node.right}) {
        if (child < 0 || child >= tree.n_nodes()) throw TreeError("child id out of range");
        const TreeNode& c = tree.nodes[static_cast<std::size_t>(child)];
        if (c.parent != id) throw TreeError("parent/child link mismatch at node " + std::to_string(id));
        if (c.height > node.height)
          throw TreeError("node " + std::to_string(id) + " is younger than its child " +
                          std::to_string(child));
      }
    }
  }
  if (parentless != 1) throw TreeError("tree must have exactly one root");

  const std::vector<int> order = postorder(tree);
  if (static_cast<int>(order.size()) != tree.n_nodes())
    throw TreeError("not all nodes reachable from the root");

  double min_tip = tree.nodes[0].height;
  for (int id = 1; id < n; ++id) min_tip = std::min(min_tip, tree.nodes[static_cast<std::size_t>(id)].height);
  const double scale = std::max(1.0, std::abs(tree.root_height()));
  if (std::abs(min_tip) > 1e-9 * scale)
    throw TreeError("most recent tip must sit at height 0 (found " + std::to_string(min_tip) + ")");
}

}  // namespace skygp
