#pragma once

#include <Eigen/Dense>

namespace cmes {

// Axis-aligned search domain [lower, upper].
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Box() = default;
  Box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static Box unit(int d);
  static Box uniform(int d, double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd width() const { return upper - lower; }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
  Eigen::VectorXd clamp(const Eigen::VectorXd& x) const;
  // Maps a point of the unit cube into the box.
  Eigen::VectorXd from_unit(const Eigen::VectorXd& u) const;
};

// Points of a regular grid with n points per axis, ordered lexicographically
// with the first coordinate varying slowest. Rows are points.
Eigen::MatrixXd regular_grid(const Box& box, int per_axis);
// Row r of regular_grid(box, per_axis) without materializing the grid.
Eigen::VectorXd grid_point(const Box& box, int per_axis, Eigen::Index r);
Eigen::Index grid_size(int d, int per_axis);

}  // namespace cmes
