#pragma once

#include <vector>

#include <Eigen/Core>

#include "carimorph/types.hpp"

namespace carimorph {

/// Static 3-d tree over a point set for exact nearest-neighbour queries.
/// Ties resolve to the lowest point index so queries are deterministic.
class KdTree3 {
 public:
  explicit KdTree3(Points<double> points);

  struct Hit {
    int index = -1;
    double squared_distance = 0.0;
  };

  Hit nearest(const Eigen::Vector3d& query) const;

  const Points<double>& points() const { return points_; }

 private:
  struct Node {
    int point = -1;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  int build(std::vector<int>& order, int begin, int end, int depth);
  void search(int node, const Eigen::Vector3d& query, Hit& best) const;

  Points<double> points_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace carimorph
