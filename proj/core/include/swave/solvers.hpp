#pragma once

// Time steppers on the tree x grid product.
//
// Four schemes, arranged in two exact adjoint/inverse pairs:
//   - forward "dual" stepping (explicit) and backward "controlled" induction:
//     the backward sweep is the literal matrix transpose of the forward sweep
//     with respect to the dx-weighted pairings, so the transposition identity
//     between them holds to machine precision, not just to O(dt).
//   - forward "refined" stepping (one small implicit solve per node) and the
//     backward controlled sweep are exact path-inverses of each other, as are
//     backward "reference" induction and the forward dual stepping.
// The classical single-equation scheme stands alone; its endpoint is
// measurable one step early, which is the structural fact the negative
// controllability experiments certify.
//
// Lower-order coefficients are frozen in time, so each implicit node system
// shares one matrix factorization per solve.

#include "swave/grid.hpp"
#include "swave/tree.hpp"

namespace swave {

struct StatePair {
  AdaptedField y;
  AdaptedField yhat;
};

struct DualPair {
  AdaptedField z;
  AdaptedField zhat;
};

struct AdjointQuad {
  AdaptedField z, Z;        // H^1_0 role, zero boundary
  AdaptedField zhat, Zhat;  // L^2 role
};

struct BackwardQuad {
  AdaptedField y, Y;
  AdaptedField yhat, Yhat;
};

// Boundary control values, dim 2 per node: (left, right).  Entries outside
// the active boundary set are ignored (read as zero).
struct BoundaryControl {
  BoundarySpec where;
  AdaptedField values;  // levels 0..K-1

  static BoundaryControl zero(const BinaryTree& tree, BoundarySpec where);
  bool empty() const { return values.dim() == 0; }
  double left(int k, std::int64_t p) const {
    return (!empty() && where.left) ? values.node(k, p)(0) : 0.0;
  }
  double right(int k, std::int64_t p) const {
    return (!empty() && where.right) ? values.node(k, p)(1) : 0.0;
  }
};

struct ControlTriple {
  AdaptedField f;  // L^2 internal control, levels 0..K-1
  AdaptedField g;  // H^-1 internal control, levels 0..K-1
  BoundaryControl h;

  static ControlTriple zero(const Grid& grid, const BinaryTree& tree, BoundarySpec where);
};

// Advection realization plus zero/noise coefficients for the backward
// reference equation.  adjoint_of builds the exact discrete adjoint of the
// forward coefficient set: advection -D diag(a1) (the matrix transpose of
// a1-weighted centered differences), b2 = a2 - a3 a5, b3 = a3, b4 = -a4,
// b5 = -a5.
struct ReferenceCoefficients {
  Eigen::MatrixXd advection;
  Eigen::VectorXd b2, b3, b4, b5;

  static ReferenceCoefficients literal(const Grid& grid, const Eigen::VectorXd& b1,
                                       const Eigen::VectorXd& b2, const Eigen::VectorXd& b3,
                                       const Eigen::VectorXd& b4, const Eigen::VectorXd& b5);
  static ReferenceCoefficients adjoint_of(const Grid& grid, const CoefficientSet& coeffs);
};

// Explicit stepping stability bound dt <= dx / sqrt(max a); throws on
// violation.
void require_cfl(const Grid& grid, const BinaryTree& tree);

// Single second-order equation driven by (g1, g2, h); g1, g2 may be empty
// fields (treated as zero).  The displacement update never sees the current
// increment, so y at the final level is measurable one step early.
StatePair solve_forward_classical(const Grid& grid, const CoefficientSet& coeffs,
                                  const BinaryTree& tree, const Eigen::VectorXd& y0,
                                  const Eigen::VectorXd& y1, const AdaptedField& g1,
                                  const AdaptedField& g2, const BoundaryControl& h);

// First-order system with controls in both diffusion terms; one shared
// (I - dt^2 (A + a1 D + a2)) factorization, then per node
//   m_y = solve(y_k + dt yhat_k + dt^2 (boundary(h) + a5 g)),  m_yhat = (m_y - y_k)/dt,
//   children: y_{k+1} = m_y -+ s (a4 m_y + f),  yhat_{k+1} = m_yhat -+ s (a3 m_y + g).
StatePair solve_forward_refined(const Grid& grid, const CoefficientSet& coeffs,
                                const BinaryTree& tree, const Eigen::VectorXd& y0,
                                const Eigen::VectorXd& yhat0, const ControlTriple& controls);

// Backward induction for the reference equation; terminal data on the leaf
// level, possibly random.  One dense factorization shared by all nodes.
AdjointQuad solve_backward_reference(const Grid& grid, const ReferenceCoefficients& ref,
                                     const BinaryTree& tree, const AdaptedField& zT,
                                     const AdaptedField& zhatT);

// Explicit forward stepping of the dual (adjoint) system with sources
// (f_src, fhat_src), either empty or adapted on levels 0..K-1:
//   z_{k+1}    = z_k + dt zhat_k -+ s (f - a5 z_k)
//   zhat_{k+1} = zhat_k + dt (Q z_k + a3 f - a4 fhat) -+ s fhat
// with Q = A - D diag(a1) + diag(a2 - a3 a5).
DualPair solve_forward_dual(const Grid& grid, const CoefficientSet& coeffs,
                            const BinaryTree& tree, const Eigen::VectorXd& z0,
                            const Eigen::VectorXd& zhat0, const AdaptedField& f_src,
                            const AdaptedField& fhat_src);

// Backward induction that is the exact transpose of solve_forward_dual; the
// martingale integrands (Y, Yhat) it produces are the internal controls that
// the synthesis layer reads off.
BackwardQuad solve_backward_controlled(const Grid& grid, const CoefficientSet& coeffs,
                                       const BinaryTree& tree, const AdaptedField& yT,
                                       const AdaptedField& yhatT, const BoundaryControl& h);

enum class EnergyKind {
  adjoint,  // |z|_{H^1_0}^2 + |zhat|_{L^2}^2
  state,    // |y|_{L^2}^2 + |yhat|_{H^-1}^2
};

// Expected energy of a field pair at one level.
double level_energy(const Grid& grid, const AdaptedField& a, const AdaptedField& b, int level,
                    EnergyKind kind);

struct RegularityReport {
  double energy_ratio = 0.0;  // sup over levels of E[energy] / data energy
  double trace_ratio = 0.0;   // E sum_k dt (trace_left^2 + trace_right^2) / data energy
};
RegularityReport energy_and_hidden_regularity(const Grid& grid, const BinaryTree& tree,
                                              const AdaptedField& z, const AdaptedField& zhat,
                                              int data_level, EnergyKind kind);

}  // namespace swave
