#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "skygp/tree.hpp"

namespace skygp {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t pos)
      : std::runtime_error(what + " (at position " + std::to_string(pos) + ")"), pos_(pos) {}
  std::size_t position() const { return pos_; }

 private:
  std::size_t pos_;
};

namespace detail {

// Parse tree held as a flat node list before tip/internal ids are assigned.
struct NewickNode {
  std::string label;
  std::optional<double> branch_length;
  std::vector<int> children;
  std::size_t pos = 0;
};

class NewickCursor {
 public:
  explicit NewickCursor(const std::string& text) : text_(text) {}

  std::size_t pos() const { return pos_; }

  void skip_space() {
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '[') {  // bracketed comments are skipped
        const std::size_t open = pos_;
        while (pos_ < text_.size() && text_[pos_] != ']') ++pos_;
        if (pos_ == text_.size()) throw ParseError("unterminated '[' comment", open);
        ++pos_;
      } else {
        break;
      }
    }
  }

  char peek() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    return text_[pos_];
  }

  bool at_end() {
    skip_space();
    return pos_ >= text_.size();
  }

  void expect(char c) {
    if (peek() != c) throw ParseError(std::string("expected '") + c + "'", pos_);
    ++pos_;
  }

  bool accept(char c) {
    if (!at_end() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string read_label() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(' || c == ')' || c == ',' || c == ':' || c == ';' || c == '[' ||
          std::isspace(static_cast<unsigned char>(c)))
        break;
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  double read_number() {
    skip_space();
    const char* begin = text_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("expected a branch length", pos_);
    pos_ += static_cast<std::size_t>(end - begin);
    if (!std::isfinite(v)) throw ParseError("non-finite branch length", pos_);
    return v;
  }

 private:
  const std::string& text_;
  std::size_t pos_ = 0;
};

inline int parse_clade(NewickCursor& cur, std::vector<NewickNode>& nodes) {
  NewickNode node;
  cur.skip_space();
  const std::size_t clade_pos = cur.pos();
  node.pos = clade_pos;
  if (cur.peek() == '(') {
    cur.expect('(');
    node.children.push_back(parse_clade(cur, nodes));
    while (cur.accept(',')) node.children.push_back(parse_clade(cur, nodes));
    cur.expect(')');
    if (node.children.size() != 2)
      throw ParseError("non-binary node with " + std::to_string(node.children.size()) + " children",
                       clade_pos);
    node.label = cur.read_label();  // internal labels are parsed and ignored
  } else {
    node.label = cur.read_label();
    if (node.label.empty()) throw ParseError("expected a tip label", cur.pos());
  }
  if (cur.accept(':')) node.branch_length = cur.read_number();
  nodes.push_back(std::move(node));
  return static_cast<int>(nodes.size()) - 1;
}

}  // namespace detail

/// Parses a single rooted Newick expression. Branch lengths are required on
/// every non-root edge; internal labels and bracketed comments are ignored.
/// Node heights are derived from branch lengths with the deepest tip at 0.
inline TimeTree parse_newick(const std::string& text) {
  detail::NewickCursor cur(text);
  std::vector<detail::NewickNode> raw;
  const int raw_root = detail::parse_clade(cur, raw);
  cur.expect(';');
  if (!cur.at_end()) throw ParseError("trailing content after ';'", cur.pos());

  const detail::NewickNode& top = raw[static_cast<std::size_t>(raw_root)];
  if (top.children.empty()) throw ParseError("non-binary root: a tree needs at least 2 tips", 0);

  // Assign final ids: tips in order of appearance, then internal nodes.
  int n_tips = 0;
  for (const auto& r : raw)
    if (r.children.empty()) ++n_tips;

  TimeTree tree;
  tree.nodes.resize(raw.size());
  tree.tip_labels.resize(static_cast<std::size_t>(n_tips));
  std::unordered_set<std::string> seen;
  std::vector<int> final_id(raw.size(), -1);
  int next_tip = 0;
  int next_internal = n_tips;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].children.empty()) {
      if (!seen.insert(raw[i].label).second)
        throw ParseError("duplicate tip label '" + raw[i].label + "'", raw[i].pos);
      final_id[i] = next_tip;
      tree.tip_labels[static_cast<std::size_t>(next_tip)] = raw[i].label;
      ++next_tip;
    } else {
      final_id[i] = next_internal++;
    }
  }
  tree.root = final_id[static_cast<std::size_t>(raw_root)];

  // Depth-first pass turns branch lengths into depths from the root.
  std::vector<double> depth(raw.size(), 0.0);
  std::vector<int> stack{raw_root};
  double max_tip_depth = 0.0;
  while (!stack.empty()) {
    const int ri = stack.back();
    stack.pop_back();
    const detail::NewickNode& r = raw[static_cast<std::size_t>(ri)];
    const int id = final_id[static_cast<std::size_t>(ri)];
    TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
    if (r.children.empty()) {
      max_tip_depth = std::max(max_tip_depth, depth[static_cast<std::size_t>(ri)]);
    } else {
      node.left = final_id[static_cast<std::size_t>(r.children[0])];
      node.right = final_id[static_cast<std::size_t>(r.children[1])];
      for (int child : r.children) {
        const detail::NewickNode& rc = raw[static_cast<std::size_t>(child)];
        if (!rc.branch_length.has_value())
          throw ParseError("missing branch length on a non-root edge", rc.pos);
        depth[static_cast<std::size_t>(child)] =
            depth[static_cast<std::size_t>(ri)] + *rc.branch_length;
        tree.nodes[static_cast<std::size_t>(final_id[static_cast<std::size_t>(child)])].parent = id;
        stack.push_back(child);
      }
    }
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    tree.nodes[static_cast<std::size_t>(final_id[i])].height = max_tip_depth - depth[i];
  }
  validate_tree(tree);
  return tree;
}

namespace detail {

inline std::string format_length(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_clade(const TimeTree& tree, int id, std::string& out) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  if (node.is_tip()) {
    out += tree.tip_labels[static_cast<std::size_t>(id)];
  } else {
    out += '(';
    write_clade(tree, node.left, out);
    out += ',';
    write_clade(tree, node.right, out);
    out += ')';
  }
  if (node.parent >= 0) {
    out += ':';
    out += format_length(tree.nodes[static_cast<std::size_t>(node.parent)].height - node.height);
  }
}

}  // namespace detail

inline std::string serialize_newick(const TimeTree& tree) {
  std::string out;
  detail::write_clade(tree, tree.root, out);
  out += ';';
  return out;
}

}  // namespace skygp
