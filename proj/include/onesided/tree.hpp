#pragma once

// Finite rooted planar trees with a degree-one root.
//
// Nodes live in a flat arena in depth-first preorder: node 0 is the root,
// node 1 its unique child. Children of every node are stored contiguously
// and ordered left to right. Trees are immutable once built.
//
// Canonical code: the balanced-parentheses word obtained by a depth-first
// walk that starts at node 1, writing '(' when descending an edge and ')'
// when climbing back. A tree of size N (edges) has a code of length
// 2(N - 1); the single edge has the empty code.

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "onesided/numeric.hpp"

namespace onesided {

using NodeId = std::uint32_t;

class PlanarTree {
 public:
  /// The single edge.
  PlanarTree() : PlanarTree(std::vector<std::vector<NodeId>>{{1}, {}}) {}

  /// Builds a tree from per-node ordered child lists. Node 0 must be the
  /// root with exactly one child; every other node must be reachable from
  /// it exactly once. Ids are renumbered into preorder.
  explicit PlanarTree(const std::vector<std::vector<NodeId>>& children) {
    if (children.empty() || children[0].size() != 1)
      throw Error("PlanarTree: root must have exactly one child");
    std::vector<std::uint8_t> seen(children.size(), 0);
    parent_.reserve(children.size());
    depth_.reserve(children.size());
    // explicit stack preorder walk; each entry is (old id, new parent, depth)
    struct Frame {
      NodeId old;
      NodeId parent;
      std::uint32_t depth;
    };
    std::vector<Frame> stack{{0, 0, 0}};
    std::vector<NodeId> new_id(children.size(), 0);
    std::vector<NodeId> order;
    order.reserve(children.size());
    while (!stack.empty()) {
      Frame f = stack.back();
      stack.pop_back();
      if (f.old >= children.size() || seen[f.old])
        throw Error("PlanarTree: child lists do not form a tree");
      seen[f.old] = 1;
      NodeId id = static_cast<NodeId>(order.size());
      new_id[f.old] = id;
      order.push_back(f.old);
      parent_.push_back(f.old == 0 ? 0 : new_id[f.parent]);
      depth_.push_back(f.depth);
      const auto& ch = children[f.old];
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back({*it, f.old, f.depth + 1});
    }
    if (order.size() != children.size()) throw Error("PlanarTree: unreachable nodes");
    // parent_ currently holds new ids (set when the parent was visited first)
    child_begin_.assign(order.size() + 1, 0);
    for (std::size_t v = 1; v < order.size(); ++v) ++child_begin_[parent_[v] + 1];
    for (std::size_t v = 0; v < order.size(); ++v) child_begin_[v + 1] += child_begin_[v];
    children_.resize(order.size() - 1);
    std::vector<std::uint32_t> fill(child_begin_.begin(), child_begin_.end() - 1);
    // preorder ids are increasing left to right among siblings
    for (std::size_t v = 1; v < order.size(); ++v) children_[fill[parent_[v]]++] = static_cast<NodeId>(v);
    height_ = *std::max_element(depth_.begin(), depth_.end());
  }

  static PlanarTree from_code(std::string_view code) {
    std::vector<std::vector<NodeId>> ch{{1}, {}};
    std::vector<NodeId> stack{1};
    for (char c : code) {
      if (c == '(') {
        NodeId id = static_cast<NodeId>(ch.size());
        ch.emplace_back();
        ch[stack.back()].push_back(id);
        stack.push_back(id);
      } else if (c == ')') {
        if (stack.size() < 2) throw Error("from_code: unbalanced ')'");
        stack.pop_back();
      } else {
        throw Error(std::string("from_code: invalid character '") + c + "'");
      }
    }
    if (stack.size() != 1) throw Error("from_code: unbalanced '('");
    return PlanarTree(ch);
  }

  /// Path with `length` edges.
  static PlanarTree path(std::size_t length) {
    if (length == 0) throw Error("path: length must be >= 1");
    return from_code(std::string(length - 1, '(') + std::string(length - 1, ')'));
  }

  /// Node 1 carrying `leaves` leaf children; size leaves + 1, height 2.
  static PlanarTree star(std::size_t leaves) {
    std::string code;
    for (std::size_t i = 0; i < leaves; ++i) code += "()";
    return from_code(code);
  }

  std::size_t node_count() const { return parent_.size(); }
  /// |T|, the number of edges.
  std::size_t size() const { return parent_.size() - 1; }
  std::uint32_t height() const { return height_; }

  NodeId parent(NodeId v) const { return parent_[v]; }
  std::uint32_t depth(NodeId v) const { return depth_[v]; }
  std::span<const NodeId> children(NodeId v) const {
    return {children_.data() + child_begin_[v], children_.data() + child_begin_[v + 1]};
  }
  std::size_t child_count(NodeId v) const { return child_begin_[v + 1] - child_begin_[v]; }
  /// Vertex degree σ(v); for v != root this is child_count + 1.
  std::size_t degree(NodeId v) const { return child_count(v) + (v == 0 ? 0 : 1); }

  std::string code() const {
    std::string out;
    out.reserve(2 * (size() - 1));
    struct Frame {
      NodeId v;
      std::size_t next;
    };
    std::vector<Frame> stack{{1, 0}};
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < child_count(f.v)) {
        NodeId c = children(f.v)[f.next++];
        out.push_back('(');
        stack.push_back({c, 0});
      } else {
        stack.pop_back();
        if (!stack.empty()) out.push_back(')');
      }
    }
    return out;
  }

  /// Ordered child lists indexed by node id; the inverse of the constructor.
  std::vector<std::vector<NodeId>> child_lists() const {
    std::vector<std::vector<NodeId>> out(node_count());
    for (NodeId v = 0; v < node_count(); ++v) {
      auto ch = children(v);
      out[v].assign(ch.begin(), ch.end());
    }
    return out;
  }

  friend bool operator==(const PlanarTree& a, const PlanarTree& b) {
    return a.parent_ == b.parent_ && a.child_begin_ == b.child_begin_;
  }

 private:
  std::vector<NodeId> parent_;
  std::vector<std::uint32_t> depth_;
  std::vector<std::uint32_t> child_begin_;
  std::vector<NodeId> children_;
  std::uint32_t height_ = 0;
};

inline std::uint32_t height(const PlanarTree& t) { return t.height(); }

/// |D_s| for s = 0..r_max (vertex counts per depth).
inline std::vector<std::size_t> level_sizes(const PlanarTree& t, std::size_t r_max) {
  std::vector<std::size_t> out(r_max + 1, 0);
  for (NodeId v = 0; v < t.node_count(); ++v)
    if (t.depth(v) <= r_max) ++out[t.depth(v)];
  return out;
}

/// |B_s| for s = 0..r_max, counted in edges: |B_s| = sum_{1<=k<=s} |D_k|.
inline std::vector<std::size_t> ball_volumes(std::span<const std::size_t> levels) {
  std::vector<std::size_t> out(levels.size(), 0);
  for (std::size_t s = 1; s < levels.size(); ++s) out[s] = out[s - 1] + levels[s];
  return out;
}

/// Vertices at depth r, left to right.
inline std::vector<NodeId> level_vertices(const PlanarTree& t, std::uint32_t r) {
  std::vector<NodeId> out;
  // preorder visits each level left to right
  for (NodeId v = 0; v < t.node_count(); ++v)
    if (t.depth(v) == r) out.push_back(v);
  return out;
}

/// Length of the leftmost-child chain from the root.
inline std::uint32_t leftmost_path_length(const PlanarTree& t) {
  NodeId v = 0;
  std::uint32_t len = 0;
  while (t.child_count(v) > 0) {
    v = t.children(v)[0];
    ++len;
  }
  return len;
}

inline bool is_one_sided(const PlanarTree& t) { return leftmost_path_length(t) == t.height(); }

/// Subtree spanned by the vertices at distance at most r from the root.
inline PlanarTree ball(const PlanarTree& t, std::uint32_t r) {
  if (r < 1) throw Error("ball: radius must be >= 1");
  if (r >= t.height()) return t;
  std::vector<NodeId> new_id(t.node_count(), 0);
  std::vector<std::vector<NodeId>> ch;
  for (NodeId v = 0; v < t.node_count(); ++v) {
    if (t.depth(v) > r) continue;
    new_id[v] = static_cast<NodeId>(ch.size());
    ch.emplace_back();
    if (v != 0) ch[new_id[t.parent(v)]].push_back(new_id[v]);
  }
  return PlanarTree(ch);
}

/// One grafting instruction: `tree` is grafted at sector `sector` (1-based)
/// of vertex `vertex`.
struct Attachment {
  NodeId vertex;
  std::size_t sector;
  PlanarTree tree;
};

/// Grafts trees onto `base`. The root edge of each grafted tree is
/// identified with the edge from `vertex` to its parent; the children of the
/// grafted tree's node 1 are inserted into the sector. Sectors at a vertex
/// with c children are numbered 1..c+1: sector n lies immediately before
/// the n-th child, sector c+1 after the last one. The result has size
/// |base| + sum(|tree| - 1).
inline PlanarTree graft(const PlanarTree& base, const std::vector<Attachment>& attachments) {
  std::map<std::pair<NodeId, std::size_t>, const PlanarTree*> by_sector;
  for (const auto& a : attachments) {
    if (a.vertex == 0 || a.vertex >= base.node_count())
      throw Error("graft: invalid vertex " + std::to_string(a.vertex));
    if (a.sector < 1 || a.sector > base.degree(a.vertex))
      throw Error("graft: invalid sector " + std::to_string(a.sector) + " at vertex " +
                  std::to_string(a.vertex));
    if (!by_sector.emplace(std::make_pair(a.vertex, a.sector), &a.tree).second)
      throw Error("graft: two trees grafted into the same sector");
  }
  const std::vector<std::vector<NodeId>> base_lists = base.child_lists();
  std::vector<std::vector<NodeId>> ch = base_lists;
  // copy a grafted tree's nodes below node 1 into the arena; returns the new
  // ids of its node-1 children
  auto import = [&ch](const PlanarTree& g) {
    std::vector<NodeId> id(g.node_count(), 0);
    for (NodeId v = 2; v < g.node_count(); ++v) {
      id[v] = static_cast<NodeId>(ch.size());
      ch.emplace_back();
    }
    for (NodeId v = 2; v < g.node_count(); ++v)
      for (NodeId c : g.children(v)) ch[id[v]].push_back(id[c]);
    std::vector<NodeId> top;
    for (NodeId c : g.children(1)) top.push_back(id[c]);
    return top;
  };
  auto it = by_sector.begin();
  while (it != by_sector.end()) {
    NodeId v = it->first.first;
    const std::vector<NodeId>& original = base_lists[v];
    std::vector<NodeId> merged;
    for (std::size_t n = 1; n <= original.size() + 1; ++n) {
      if (it != by_sector.end() && it->first.first == v && it->first.second == n) {
        auto top = import(*it->second);
        merged.insert(merged.end(), top.begin(), top.end());
        ++it;
      }
      if (n <= original.size()) merged.push_back(original[n - 1]);
    }
    ch[v] = std::move(merged);
  }
  return PlanarTree(ch);
}

/// Grafts `branches` (left to right) at the vertices of maximal depth of
/// `base`, realising the identification of a ball with K-tuples of trees.
inline PlanarTree graft_at_top(const PlanarTree& base, const std::vector<PlanarTree>& branches) {
  auto top = level_vertices(base, base.height());
  if (top.size() != branches.size())
    throw Error("graft_at_top: expected " + std::to_string(top.size()) + " branches");
  std::vector<Attachment> att;
  for (std::size_t i = 0; i < top.size(); ++i) att.push_back({top[i], 1, branches[i]});
  return graft(base, att);
}

/// True iff every vertex above the maximal depth has at least one child,
/// i.e. the tree is the radius-h ball of a leafless (spine) tree.
inline bool is_spine_ball(const PlanarTree& t) {
  for (NodeId v = 0; v < t.node_count(); ++v)
    if (t.depth(v) < t.height() && t.child_count(v) == 0) return false;
  return true;
}

/// Sectors of a spine ball that receive finite branches: every sector of a
/// vertex at depth 1..r-1 except the first sector of the leftmost vertex at
/// each depth. Listed depth-first, sectors in order per vertex.
inline std::vector<std::pair<NodeId, std::size_t>> free_sectors(const PlanarTree& spine) {
  if (!is_spine_ball(spine)) throw Error("free_sectors: not a spine ball");
  std::vector<std::uint8_t> leftmost(spine.node_count(), 0);
  for (NodeId v = 0;; v = spine.children(v)[0]) {
    leftmost[v] = 1;
    if (spine.child_count(v) == 0) break;
  }
  std::vector<std::pair<NodeId, std::size_t>> out;
  for (NodeId v = 1; v < spine.node_count(); ++v) {
    if (spine.depth(v) >= spine.height()) continue;
    for (std::size_t n = 1; n <= spine.degree(v); ++n)
      if (!(n == 1 && leftmost[v])) out.emplace_back(v, n);
  }
  return out;
}

/// Number of free sectors of a spine ball: 2|T| - R - r.
inline std::size_t sector_count(const PlanarTree& spine) {
  if (!is_spine_ball(spine)) throw Error("sector_count: not a spine ball");
  const std::size_t r = spine.height();
  const std::size_t big_r = level_vertices(spine, spine.height()).size();
  return 2 * spine.size() - big_r - r;
}

/// A finite tree viewed as the centre of the ball of radius 1/h(T) in the
/// local metric; carries r = h(T), K = |D_r(T)|.
struct BallSpec {
  PlanarTree tree;
  std::uint32_t r = 1;
  std::size_t K = 1;
  bool one_sided = true;

  BallSpec() = default;
  explicit BallSpec(PlanarTree t)
      : tree(std::move(t)),
        r(tree.height()),
        K(level_vertices(tree, tree.height()).size()),
        one_sided(is_one_sided(tree)) {}

  std::size_t size() const { return tree.size(); }
};

inline nlohmann::json to_json(const PlanarTree& t) {
  return {{"code", t.code()}, {"size", t.size()}, {"height", t.height()}};
}

}  // namespace onesided
