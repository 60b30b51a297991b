#pragma once

// Weighted-energy (Carleman) machinery for the wave systems: the quadratic
// weight phi(x) = alpha (x - x0)^2 centered outside the domain, the two
// convexity conditions on (phi, mu0, c0, c1, T), the observed boundary set
// determined by the sign of a phi' nu, the derived space-time weight fields,
// and a numerical residual test for the pointwise identity that drives the
// observability estimate.

#include "swave/grid.hpp"

#include <functional>
#include <string>
#include <vector>

namespace swave {

struct CarlemanConfig {
  double x0 = -1.0;    // weight center, to the left or right of (0, L)
  double alpha = 4.0;  // weight amplitude
  double mu0 = 8.0;    // convexity constant in use (see check_condition1)
  double c0 = 0.5;
  double c1 = 0.55;
  double lambda = 1.0;  // large parameter of the weight theta = exp(ell)
  double T = 3.0;       // time horizon the weight is built for

  double phi(double x) const { return alpha * (x - x0) * (x - x0); }
  double phi_x(double x) const { return 2.0 * alpha * (x - x0); }
  double phi_xx() const { return 2.0 * alpha; }

  // ell(t,x) = lambda [ phi(x) - c1 (t - T/2)^2 ]
  double ell(double t, double x) const {
    const double s = t - 0.5 * T;
    return lambda * (phi(x) - c1 * s * s);
  }
  double ell_t(double t) const { return -2.0 * lambda * c1 * (t - 0.5 * T); }
  double ell_tt() const { return -2.0 * lambda * c1; }
  double ell_x(double x) const { return lambda * phi_x(x); }
  double theta(double t, double x) const { return std::exp(ell(t, x)); }
};

// First convexity condition: the reduced 1D quadratic form
//   a (a phi')' - (1/2) a' a phi'  >=  mu0 a   pointwise,
// plus absence of critical points of phi.  mu0_max is the largest admissible
// mu0 (pointwise minimum of form/a over the closed node set).
struct Condition1Report {
  bool holds = false;
  double mu0_max = 0.0;
  double min_grad = 0.0;  // min |phi'| over the closed node set
  int worst_index = -1;   // node where form/a attains its minimum
  int critical_index = -1;  // node with |phi'| below tolerance, -1 if none
};
Condition1Report check_condition1(const Grid& grid, const CarlemanConfig& cfg);

// Second condition, four items.  Items use two time scales: the weight scale
// 2 sqrt(max phi) (reported) and the wave transit scale 2L/sqrt(s0) which
// governs items (2)-(3); see the decision notes.  Item (1) compares
// (1/4) a phi'^2 against max phi over the interior computational nodes.
struct Condition2Report {
  struct Item {
    bool holds = false;
    double slack = 0.0;
  };
  Item items[4];
  bool holds = false;
  double R0sq = 0.0, R1sq = 0.0;  // min / max of phi over interior nodes
  double T0_weight = 0.0;         // 2 sqrt(R1sq)
  double T0_transit = 0.0;        // 2 L / sqrt(min a)
  double c1_cap_noise = 1.0;      // min(1, 1/(16 |a5|^4))
};
Condition2Report check_condition2(const Grid& grid, const CarlemanConfig& cfg,
                                  const CoefficientSet& coeffs);

// Deterministic scan for (c0, c1) maximizing the minimum item slack, with
// 0 < c0 < c1 enforced.  ok is false when the feasible interval is empty.
struct ConstantSearch {
  double c0 = 0.0;
  double c1 = 0.0;
  bool ok = false;
  double min_slack = 0.0;
};
ConstantSearch find_condition2_constants(const Grid& grid, const CarlemanConfig& cfg,
                                         const CoefficientSet& coeffs);

// Observed boundary: an endpoint belongs iff a phi' nu > 0 there.
BoundarySpec compute_gamma0(const Grid& grid, const CarlemanConfig& cfg);

// Space-time tables of the derived weight fields on (time levels) x (closed
// node set).  A_field has the exact closed form
//   lambda^2 [ c1^2 (2t-T)^2 - a phi'^2 ] + 4 c1 lambda + c0 lambda;
// c11 and B_field use analytic t- and phi-derivatives and centered
// differences for derivatives of a.
struct WeightTables {
  std::vector<double> times;   // nt+1 levels, 0..T
  std::vector<double> xs;      // nodes x_0..x_{M+1}
  Eigen::MatrixXd ell;         // (nt+1) x (M+2), likewise below
  Eigen::MatrixXd theta;
  Eigen::MatrixXd psi;
  Eigen::MatrixXd A_field;
  Eigen::MatrixXd B_field;
  Eigen::MatrixXd c11;
};
WeightTables weight_fields(const Grid& grid, const CarlemanConfig& cfg, int time_levels);

void write_weight_csv(std::ostream& os, const WeightTables& tables);

// Time windows around T/2 used by the observability argument: level sets
//   Lambda_i = { (t,x) : phi(x) - c1 (t - T/2)^2 > R0sq / (2 (i+2)) }
// and windows Q_i = (T/2 - eps_i T, T/2 + eps_i T) x G.  eps1 is the largest
// value (grid scan) with Lambda_2 inside Q_1 and ell < 0 outside the window;
// eps0 the largest with Q_0 inside Lambda_0.
struct WindowReport {
  bool ok = false;
  double eps0 = 0.0, eps1 = 0.0;
  bool ends_negative = false;  // ell(0,x) = ell(T,x) < 0 on all nodes
};
WindowReport find_windows(const Grid& grid, const CarlemanConfig& cfg, int time_levels);

// Residual of the pointwise identity behind the weighted energy estimate,
// deterministic part: for a smooth test field v(t,x) the identity reads
//   P + dM/dx + dN/dt = R
// with P the product of the multiplier against the wave operator of
// z = theta^{-1} v, M the spatial flux, N the time flux, and R the quadratic
// form with coefficients (c0 lambda, c11, B) plus the completed square.  All
// derivatives are centered differences on a ghost-extended grid; the returned
// norm is the trapezoid L2 norm of the pointwise mismatch.
double identity_residual_norm(const CarlemanConfig& cfg,
                              const std::function<double(double)>& a,
                              const std::function<double(double, double)>& v,
                              double L, int interior_points, int time_steps);

struct IdentityResidualReport {
  std::vector<double> residuals;  // one per resolution
  std::vector<double> orders;     // log2(r_i / r_{i+1})
  double order_min = 0.0;
};
IdentityResidualReport identity_residual(const CarlemanConfig& cfg,
                                         const std::function<double(double)>& a,
                                         const std::function<double(double, double)>& v,
                                         double L,
                                         const std::vector<int>& interior_resolutions);

}  // namespace swave
