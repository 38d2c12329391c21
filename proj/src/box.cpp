#include "cmes/box.hpp"

#include <stdexcept>

namespace cmes {

Box::Box(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) {
  if (lower.size() != upper.size()) throw std::invalid_argument("box bounds differ in dimension");
  if (lower.size() == 0) throw std::invalid_argument("box must have at least one dimension");
  if ((upper.array() < lower.array()).any()) throw std::invalid_argument("box upper bound below lower bound");
}

Box Box::unit(int d) { return uniform(d, 0.0, 1.0); }

Box Box::uniform(int d, double lo, double hi) {
  return Box(Eigen::VectorXd::Constant(d, lo), Eigen::VectorXd::Constant(d, hi));
}

bool Box::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != lower.size()) return false;
  return ((x.array() >= lower.array() - tol) && (x.array() <= upper.array() + tol)).all();
}

Eigen::VectorXd Box::clamp(const Eigen::VectorXd& x) const {
  return x.cwiseMax(lower).cwiseMin(upper);
}

Eigen::VectorXd Box::from_unit(const Eigen::VectorXd& u) const {
  return lower + u.cwiseProduct(upper - lower);
}

Eigen::Index grid_size(int d, int per_axis) {
  if (per_axis < 1) throw std::invalid_argument("grid needs at least one point per axis");
  Eigen::Index total = 1;
  for (int i = 0; i < d; ++i) total *= per_axis;
  return total;
}

Eigen::VectorXd grid_point(const Box& box, int per_axis, Eigen::Index r) {
  const int d = box.dim();
  Eigen::VectorXd x(d);
  for (int i = d - 1; i >= 0; --i) {
    const Eigen::Index k = r % per_axis;
    r /= per_axis;
    const double t = per_axis == 1 ? 0.5 : static_cast<double>(k) / (per_axis - 1);
    x(i) = box.lower(i) + t * (box.upper(i) - box.lower(i));
  }
  return x;
}

Eigen::MatrixXd regular_grid(const Box& box, int per_axis) {
  const int d = box.dim();
  const Eigen::Index total = grid_size(d, per_axis);
  Eigen::MatrixXd pts(total, d);
  std::vector<int> idx(d, 0);
  for (Eigen::Index r = 0; r < total; ++r) {
    for (int i = 0; i < d; ++i) {
      const double t = per_axis == 1 ? 0.5 : static_cast<double>(idx[i]) / (per_axis - 1);
      pts(r, i) = box.lower(i) + t * (box.upper(i) - box.lower(i));
    }
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[i] < per_axis) break;
      idx[i] = 0;
    }
  }
  return pts;
}

}  // namespace cmes
