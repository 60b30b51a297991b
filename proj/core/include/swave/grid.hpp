#pragma once

// One dimensional spatial discretization on (0, L): M interior points,
// dx = L/(M+1), zero Dirichlet boundary unless a boundary value is injected
// explicitly.  The elliptic operator is the conservative three point stencil
//   (A z)_i = [ a_{i+1/2} (z_{i+1} - z_i) - a_{i-1/2} (z_i - z_{i-1}) ] / dx^2
// with midpoint-averaged coefficients, so -A is symmetric positive definite
// and the discrete H^1_0 seminorm is exactly -dx * z'Az.

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <stdexcept>

namespace swave {

struct BoundarySpec {
  bool left = false;
  bool right = false;

  int count() const { return (left ? 1 : 0) + (right ? 1 : 0); }
  bool any() const { return left || right; }
};

class Grid {
public:
  // `a` is sampled on all nodes x_0..x_{M+1} including the boundary, so the
  // midpoint averages next to the wall are available.
  Grid(double length, int interior_points, const std::function<double(double)>& a);

  double length() const { return L_; }
  int points() const { return M_; }
  double dx() const { return dx_; }
  double x(int i) const { return dx_ * i; }  // i in 0..M+1

  double a_node(int i) const { return a_node_[static_cast<std::size_t>(i)]; }
  double a_mid(int i) const {  // face between x_i and x_{i+1}, i in 0..M
    return 0.5 * (a_node(i) + a_node(i + 1));
  }
  double a_min() const { return a_min_; }
  double a_max() const { return a_max_; }

  // Wave transit time across the interval at the slowest local speed; the
  // natural discrete control-time scale for this grid.
  double transit_time() const { return 2.0 * L_ / std::sqrt(a_min_); }

  const Eigen::MatrixXd& elliptic_matrix() const { return A_; }
  const Eigen::MatrixXd& gradient_matrix() const { return D_; }

  // Solves (-A) u = f; backs the H^{-1} norm and its inner products.
  Eigen::VectorXd solve_neg_elliptic(const Eigen::VectorXd& f) const;

private:
  double L_;
  int M_;
  double dx_;
  std::vector<double> a_node_;
  double a_min_, a_max_;
  Eigen::MatrixXd A_;  // conservative elliptic stencil, zero boundary
  Eigen::MatrixXd D_;  // centered first difference, zero extension
  mutable std::unique_ptr<Eigen::LLT<Eigen::MatrixXd>> neg_llt_;
};

// A z with optional boundary values (left_value at x_0, right_value at
// x_{M+1}) folded into the stencil.
Eigen::VectorXd apply_elliptic(const Grid& grid, const Eigen::VectorXd& z,
                               double left_value = 0.0, double right_value = 0.0);

struct Norms {
  double l2;
  double h01;
  double hneg1;
};

Norms norms(const Grid& grid, const Eigen::VectorXd& u);

// Discrete inner products matching the squared norms above.
double inner_l2(const Grid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double inner_h01(const Grid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v);
double inner_hneg1(const Grid& grid, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

// One sided difference quotients at the walls for a zero-boundary field:
// outward normal derivative, (-z_1/dx, -z_M/dx).
struct NormalTrace {
  double left;
  double right;
};
NormalTrace normal_trace(const Grid& grid, const Eigen::VectorXd& z);

// Lower-order coefficient profiles for the wave systems, sampled on the
// interior nodes.  Frozen in time; every preset in this laboratory uses
// time-independent profiles.
struct CoefficientSet {
  Eigen::VectorXd a1;  // gradient drift
  Eigen::VectorXd a2;  // zero order drift
  Eigen::VectorXd a3;  // state noise in the velocity equation
  Eigen::VectorXd a4;  // state noise in the displacement equation
  Eigen::VectorXd a5;  // cross coupling; must vanish at the first and last
                       // interior nodes (discrete analogue of a W^{1,inf}_0
                       // profile)

  static CoefficientSet zero(const Grid& grid);
  void validate(const Grid& grid) const;

  // Aggregate coupling strength r2 = |a1|_{W^{1,inf}}^2 + sum |a_k|_inf^2
  // + |a5|_{W^{1,inf}}^2 with discrete derivative sups.
  double coupling_strength(const Grid& grid) const;
};

}  // namespace swave
