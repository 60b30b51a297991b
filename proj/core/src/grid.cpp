#include "swave/grid.hpp"

#include <algorithm>
#include <cmath>

namespace swave {

Grid::Grid(double length, int interior_points, const std::function<double(double)>& a)
    : L_(length), M_(interior_points) {
  if (length <= 0.0) throw std::invalid_argument("grid length must be positive");
  if (interior_points < 1) throw std::invalid_argument("need at least one interior point");
  dx_ = L_ / (M_ + 1);

  a_node_.resize(static_cast<std::size_t>(M_) + 2);
  for (int i = 0; i <= M_ + 1; ++i) a_node_[static_cast<std::size_t>(i)] = a(x(i));
  a_min_ = *std::min_element(a_node_.begin(), a_node_.end());
  a_max_ = *std::max_element(a_node_.begin(), a_node_.end());
  if (a_min_ <= 0.0) throw std::invalid_argument("diffusion coefficient must be positive");

  const double idx2 = 1.0 / (dx_ * dx_);
  A_ = Eigen::MatrixXd::Zero(M_, M_);
  for (int i = 0; i < M_; ++i) {
    const double am = a_mid(i);      // face toward x_{i-1} (node index i ~ x_{i+1})
    const double ap = a_mid(i + 1);  // face toward x_{i+1}
    A_(i, i) = -(am + ap) * idx2;
    if (i > 0) A_(i, i - 1) = am * idx2;
    if (i < M_ - 1) A_(i, i + 1) = ap * idx2;
  }

  D_ = Eigen::MatrixXd::Zero(M_, M_);
  const double half_idx = 0.5 / dx_;
  for (int i = 0; i < M_; ++i) {
    if (i > 0) D_(i, i - 1) = -half_idx;
    if (i < M_ - 1) D_(i, i + 1) = half_idx;
  }
}

Eigen::VectorXd Grid::solve_neg_elliptic(const Eigen::VectorXd& f) const {
  if (!neg_llt_) {
    neg_llt_ = std::make_unique<Eigen::LLT<Eigen::MatrixXd>>(Eigen::MatrixXd(-A_));
    if (neg_llt_->info() != Eigen::Success)
      throw std::runtime_error("negative elliptic matrix is not positive definite");
  }
  return neg_llt_->solve(f);
}

Eigen::VectorXd apply_elliptic(const Grid& grid, const Eigen::VectorXd& z,
                               double left_value, double right_value) {
  Eigen::VectorXd out = grid.elliptic_matrix() * z;
  const int M = grid.points();
  const double idx2 = 1.0 / (grid.dx() * grid.dx());
  if (left_value != 0.0) out(0) += grid.a_mid(0) * left_value * idx2;
  if (right_value != 0.0) out(M - 1) += grid.a_mid(M) * right_value * idx2;
  return out;
}

Norms norms(const Grid& grid, const Eigen::VectorXd& u) {
  Norms n;
  n.l2 = std::sqrt(inner_l2(grid, u, u));
  n.h01 = std::sqrt(inner_h01(grid, u, u));
  n.hneg1 = std::sqrt(inner_hneg1(grid, u, u));
  return n;
}

double inner_l2(const Grid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return grid.dx() * u.dot(v);
}

double inner_h01(const Grid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  // -dx u'Av telescopes to the weighted sum of difference quotients over all
  // M+1 faces, zero boundary included, so this is the exact discrete energy.
  return -grid.dx() * u.dot(grid.elliptic_matrix() * v);
}

double inner_hneg1(const Grid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
  return grid.dx() * u.dot(grid.solve_neg_elliptic(v));
}

NormalTrace normal_trace(const Grid& grid, const Eigen::VectorXd& z) {
  NormalTrace t;
  t.left = -z(0) / grid.dx();
  t.right = -z(grid.points() - 1) / grid.dx();
  return t;
}

CoefficientSet CoefficientSet::zero(const Grid& grid) {
  CoefficientSet c;
  const int M = grid.points();
  c.a1 = Eigen::VectorXd::Zero(M);
  c.a2 = Eigen::VectorXd::Zero(M);
  c.a3 = Eigen::VectorXd::Zero(M);
  c.a4 = Eigen::VectorXd::Zero(M);
  c.a5 = Eigen::VectorXd::Zero(M);
  return c;
}

void CoefficientSet::validate(const Grid& grid) const {
  const int M = grid.points();
  for (const auto* v : {&a1, &a2, &a3, &a4, &a5}) {
    if (v->size() != M) throw std::invalid_argument("coefficient size mismatch");
  }
  // a5 enters through its product with the boundary trace stencil; requiring
  // it to vanish at the nodes adjacent to the walls keeps the transposed
  // system's boundary data clean.
  if (a5(0) != 0.0 || a5(M - 1) != 0.0)
    throw std::invalid_argument("a5 must vanish at the interior nodes next to the boundary");
}

double CoefficientSet::coupling_strength(const Grid& grid) const {
  const int M = grid.points();
  auto sup = [](const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  auto sup_deriv = [&](const Eigen::VectorXd& v) {
    // centered quotients with zero extension, matching gradient_matrix
    double s = 0.0;
    for (int i = 0; i < M; ++i) {
      const double lo = (i > 0) ? v(i - 1) : 0.0;
      const double hi = (i < M - 1) ? v(i + 1) : 0.0;
      s = std::max(s, std::abs(hi - lo) / (2.0 * grid.dx()));
    }
    return s;
  };
  const double w1 = sup(a1) + sup_deriv(a1);
  const double w5 = sup(a5) + sup_deriv(a5);
  return w1 * w1 + sup(a2) * sup(a2) + sup(a3) * sup(a3) + sup(a4) * sup(a4) + w5 * w5;
}

}  // namespace swave
