/*
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================
*/
#ifndef ATE_KDTREE_HPP
#define ATE_KDTREE_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <queue>
#include <span>
#include <vector>

namespace ate {

/// Candidate neighbor ordered by (squared distance, original index). Ties in
/// distance go to the smaller index.
struct Neighbor {
  double dist2;
  std::size_t index;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

/// Squared Euclidean distance, accumulated in coordinate order. Both search
/// paths use this exact routine so their distances agree bit for bit.
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

/// Exhaustive k-NN over `ids`, points stored row-major in `coords`.
inline std::vector<Neighbor> brute_force_knn(std::span<const double> coords, std::size_t dim,
                                             std::span<const std::size_t> ids,
                                             std::span<const double> query, std::size_t k) {
  std::vector<Neighbor> all;
  all.reserve(ids.size());
  for (std::size_t id : ids) {
    all.push_back({squared_distance(query, coords.subspan(id * dim, dim)), id});
  }
  k = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  all.resize(k);
  return all;
}

/// Static k-d tree over a subset of rows of a row-major coordinate matrix.
/// Exact search; results are identical to brute_force_knn including tie order.
class KdTree {
 public:
  KdTree(std::span<const double> coords, std::size_t dim, std::vector<std::size_t> ids,
         std::size_t leaf_size = 16)
      : coords_(coords), dim_(dim), ids_(std::move(ids)), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    if (!ids_.empty()) build(0, ids_.size());
  }

  std::size_t size() const { return ids_.size(); }

  /// The k nearest points to `query`, sorted ascending by (distance, index).
  std::vector<Neighbor> knn(std::span<const double> query, std::size_t k) const {
    k = std::min(k, ids_.size());
    std::vector<Neighbor> heap;  // max-heap on (dist2, index)
    heap.reserve(k + 1);
    if (k > 0) search(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end());
    return heap;
  }

 private:
  struct Node {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t axis = 0;
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    bool leaf = true;
  };

  double coord(std::size_t id, std::size_t axis) const { return coords_[id * dim_ + axis]; }

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto node_id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return node_id;

    std::size_t best_axis = 0;
    double best_spread = -1.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      double lo = coord(ids_[begin], a), hi = lo;
      for (std::size_t i = begin + 1; i < end; ++i) {
        const double v = coord(ids_[i], a);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_axis = a;
      }
    }
    if (best_spread <= 0.0) return node_id;  // all points coincide

    const std::size_t mid = begin + (end - begin) / 2;
    auto first = ids_.begin();
    std::nth_element(first + static_cast<std::ptrdiff_t>(begin), first + static_cast<std::ptrdiff_t>(mid),
                     first + static_cast<std::ptrdiff_t>(end), [&](std::size_t a, std::size_t b) {
                       return coord(a, best_axis) < coord(b, best_axis);
                     });
    const double split = coord(ids_[mid], best_axis);
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    Node& n = nodes_[node_id];
    n.leaf = false;
    n.axis = best_axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return node_id;
  }

  void offer(std::vector<Neighbor>& heap, std::size_t k, Neighbor cand) const {
    if (heap.size() < k) {
      heap.push_back(cand);
      std::push_heap(heap.begin(), heap.end());
    } else if (cand < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = cand;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  void search(std::uint32_t node_id, std::span<const double> query, std::size_t k,
              std::vector<Neighbor>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.leaf) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t id = ids_[i];
        offer(heap, k, {squared_distance(query, coords_.subspan(id * dim_, dim_)), id});
      }
      return;
    }
    // Left subtree holds coordinates <= split, right holds >= split.
    const double diff = query[node.axis] - node.split;
    const bool go_left = diff < 0.0;
    search(go_left ? node.left : node.right, query, k, heap);
    const double bound = diff * diff;
    if (heap.size() < k || bound <= heap.front().dist2) {
      search(go_left ? node.right : node.left, query, k, heap);
    }
  }

  std::span<const double> coords_;
  std::size_t dim_;
  std::vector<std::size_t> ids_;
  std::size_t leaf_size_;
  std::vector<Node> nodes_;
};

}  // namespace ate

#endif  // ATE_KDTREE_HPP
