#include "carimorph/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace carimorph {

KdTree3::KdTree3(Points<double> points) : points_(std::move(points)) {
  std::vector<int> order(static_cast<std::size_t>(points_.rows()));
  std::iota(order.begin(), order.end(), 0);
  nodes_.reserve(order.size());
  root_ = build(order, 0, static_cast<int>(order.size()), 0);
}

int KdTree3::build(std::vector<int>& order, int begin, int end, int depth) {
  if (begin >= end) return -1;
  const int axis = depth % 3;
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order.begin() + begin, order.begin() + mid, order.begin() + end, [&](int a, int b) {
    const double pa = points_(a, axis), pb = points_(b, axis);
    return pa < pb || (pa == pb && a < b);
  });
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back({order[static_cast<std::size_t>(mid)], axis, -1, -1});
  const int left = build(order, begin, mid, depth + 1);
  const int right = build(order, mid + 1, end, depth + 1);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

KdTree3::Hit KdTree3::nearest(const Eigen::Vector3d& query) const {
  Hit best{-1, std::numeric_limits<double>::infinity()};
  search(root_, query, best);
  return best;
}

void KdTree3::search(int node_id, const Eigen::Vector3d& query, Hit& best) const {
  if (node_id < 0) return;
  const Node& node = nodes_[static_cast<std::size_t>(node_id)];
  const double d2 = (points_.row(node.point).transpose() - query).squaredNorm();
  if (d2 < best.squared_distance || (d2 == best.squared_distance && node.point < best.index)) {
    best = {node.point, d2};
  }
  const double delta = query(node.axis) - points_(node.point, node.axis);
  const int near = delta < 0 ? node.left : node.right;
  const int far = delta < 0 ? node.right : node.left;
  search(near, query, best);
  // <= keeps equal-distance candidates on the far side reachable for the tie rule.
  if (delta * delta <= best.squared_distance) search(far, query, best);
}

}  // namespace carimorph
