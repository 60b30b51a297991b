#include "swave/solvers.hpp"

#include <Eigen/LU>

#include <cmath>
#include <sstream>

namespace swave {

namespace {

// Boundary injection of Dirichlet data into the conservative stencil.
void add_boundary(const Grid& grid, double hl, double hr, Eigen::VectorXd& out) {
  const int M = grid.points();
  const double idx2 = 1.0 / (grid.dx() * grid.dx());
  if (hl != 0.0) out(0) += grid.a_mid(0) * hl * idx2;
  if (hr != 0.0) out(M - 1) += grid.a_mid(M) * hr * idx2;
}

Eigen::VectorXd node_or_zero(const AdaptedField& f, int k, std::int64_t p, int dim) {
  if (f.dim() == 0) return Eigen::VectorXd::Zero(dim);
  return f.node(k, p);
}

Eigen::MatrixXd forward_drift_matrix(const Grid& grid, const CoefficientSet& c) {
  // A + diag(a1) D + diag(a2); primal advection
  return grid.elliptic_matrix() + c.a1.asDiagonal() * grid.gradient_matrix() +
         Eigen::MatrixXd(c.a2.asDiagonal());
}

Eigen::MatrixXd dual_drift_matrix(const Grid& grid, const CoefficientSet& c) {
  // Q = A - D diag(a1) + diag(a2 - a3 a5); the advection part is the exact
  // transpose of diag(a1) D, absorbing the divergence correction.
  return grid.elliptic_matrix() - grid.gradient_matrix() * c.a1.asDiagonal() +
         Eigen::MatrixXd((c.a2.array() - c.a3.array() * c.a5.array()).matrix().asDiagonal());
}

Eigen::FullPivLU<Eigen::MatrixXd> factor_node_system(const Eigen::MatrixXd& drift, double dt,
                                                     const char* who) {
  const int M = static_cast<int>(drift.rows());
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Eigen::MatrixXd::Identity(M, M) - dt * dt * drift);
  if (!lu.isInvertible()) {
    std::ostringstream os;
    os << who << ": node system I - dt^2 L is singular at dt = " << dt;
    throw std::runtime_error(os.str());
  }
  return lu;
}

}  // namespace

BoundaryControl BoundaryControl::zero(const BinaryTree& tree, BoundarySpec where) {
  BoundaryControl h;
  h.where = where;
  h.values = AdaptedField(tree, 2, tree.steps() - 1);
  return h;
}

ControlTriple ControlTriple::zero(const Grid& grid, const BinaryTree& tree, BoundarySpec where) {
  ControlTriple c;
  c.f = AdaptedField(tree, grid.points(), tree.steps() - 1);
  c.g = AdaptedField(tree, grid.points(), tree.steps() - 1);
  c.h = BoundaryControl::zero(tree, where);
  return c;
}

void require_cfl(const Grid& grid, const BinaryTree& tree) {
  const double limit = grid.dx() / std::sqrt(grid.a_max());
  if (tree.dt() > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "CFL violation: dt = " << tree.dt() << " exceeds dx/sqrt(max a) = " << limit;
    throw std::invalid_argument(os.str());
  }
}

StatePair solve_forward_classical(const Grid& grid, const CoefficientSet& coeffs,
                                  const BinaryTree& tree, const Eigen::VectorXd& y0,
                                  const Eigen::VectorXd& y1, const AdaptedField& g1,
                                  const AdaptedField& g2, const BoundaryControl& h) {
  require_cfl(grid, tree);
  coeffs.validate(grid);
  const int M = grid.points();
  const int K = tree.steps();
  const double dt = tree.dt();
  const double s = tree.sqrt_dt();
  if (y0.size() != M || y1.size() != M)
    throw std::invalid_argument("solve_forward_classical: initial data size mismatch");

  const Eigen::MatrixXd G = forward_drift_matrix(grid, coeffs);

  StatePair out;
  out.y = AdaptedField(tree, M, K);
  out.yhat = AdaptedField(tree, M, K);
  out.y.node(0, 0) = y0;
  out.yhat.node(0, 0) = y1;

  for (int k = 0; k < K; ++k) {
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const Eigen::VectorXd yk = out.y.node(k, p);
      const Eigen::VectorXd vk = out.yhat.node(k, p);
      Eigen::VectorXd drift = G * yk + node_or_zero(g1, k, p, M);
      add_boundary(grid, h.left(k, p), h.right(k, p), drift);
      const Eigen::VectorXd ynext = yk + dt * vk;  // same for both children
      const Eigen::VectorXd vmean = vk + dt * drift;
      const Eigen::VectorXd noise =
          coeffs.a3.cwiseProduct(yk) + node_or_zero(g2, k, p, M);
      out.y.node(k + 1, BinaryTree::child(p, 0)) = ynext;
      out.y.node(k + 1, BinaryTree::child(p, 1)) = ynext;
      out.yhat.node(k + 1, BinaryTree::child(p, 0)) = vmean - s * noise;
      out.yhat.node(k + 1, BinaryTree::child(p, 1)) = vmean + s * noise;
    }
  }
  return out;
}

StatePair solve_forward_refined(const Grid& grid, const CoefficientSet& coeffs,
                                const BinaryTree& tree, const Eigen::VectorXd& y0,
                                const Eigen::VectorXd& yhat0, const ControlTriple& controls) {
  require_cfl(grid, tree);
  coeffs.validate(grid);
  const int M = grid.points();
  const int K = tree.steps();
  const double dt = tree.dt();
  const double s = tree.sqrt_dt();
  if (y0.size() != M || yhat0.size() != M)
    throw std::invalid_argument("solve_forward_refined: initial data size mismatch");

  const auto lu = factor_node_system(forward_drift_matrix(grid, coeffs), dt,
                                     "solve_forward_refined");

  StatePair out;
  out.y = AdaptedField(tree, M, K);
  out.yhat = AdaptedField(tree, M, K);
  out.y.node(0, 0) = y0;
  out.yhat.node(0, 0) = yhat0;

  for (int k = 0; k < K; ++k) {
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const Eigen::VectorXd yk = out.y.node(k, p);
      const Eigen::VectorXd yhk = out.yhat.node(k, p);
      const Eigen::VectorXd fk = node_or_zero(controls.f, k, p, M);
      const Eigen::VectorXd gk = node_or_zero(controls.g, k, p, M);

      Eigen::VectorXd rhs = yk + dt * yhk + dt * dt * coeffs.a5.cwiseProduct(gk);
      {
        Eigen::VectorXd bc = Eigen::VectorXd::Zero(M);
        add_boundary(grid, controls.h.left(k, p), controls.h.right(k, p), bc);
        rhs += dt * dt * bc;
      }
      const Eigen::VectorXd my = lu.solve(rhs);
      const Eigen::VectorXd myh = (my - yk) / dt;
      const Eigen::VectorXd ynoise = coeffs.a4.cwiseProduct(my) + fk;
      const Eigen::VectorXd vnoise = coeffs.a3.cwiseProduct(my) + gk;
      out.y.node(k + 1, BinaryTree::child(p, 0)) = my - s * ynoise;
      out.y.node(k + 1, BinaryTree::child(p, 1)) = my + s * ynoise;
      out.yhat.node(k + 1, BinaryTree::child(p, 0)) = myh - s * vnoise;
      out.yhat.node(k + 1, BinaryTree::child(p, 1)) = myh + s * vnoise;
    }
  }
  return out;
}

ReferenceCoefficients ReferenceCoefficients::literal(const Grid& grid, const Eigen::VectorXd& b1,
                                                     const Eigen::VectorXd& b2,
                                                     const Eigen::VectorXd& b3,
                                                     const Eigen::VectorXd& b4,
                                                     const Eigen::VectorXd& b5) {
  ReferenceCoefficients r;
  r.advection = b1.asDiagonal() * grid.gradient_matrix();
  r.b2 = b2;
  r.b3 = b3;
  r.b4 = b4;
  r.b5 = b5;
  return r;
}

ReferenceCoefficients ReferenceCoefficients::adjoint_of(const Grid& grid,
                                                        const CoefficientSet& coeffs) {
  ReferenceCoefficients r;
  r.advection = -(grid.gradient_matrix() * coeffs.a1.asDiagonal());
  r.b2 = (coeffs.a2.array() - coeffs.a3.array() * coeffs.a5.array()).matrix();
  r.b3 = coeffs.a3;
  r.b4 = -coeffs.a4;
  r.b5 = -coeffs.a5;
  return r;
}

AdjointQuad solve_backward_reference(const Grid& grid, const ReferenceCoefficients& ref,
                                     const BinaryTree& tree, const AdaptedField& zT,
                                     const AdaptedField& zhatT) {
  const int M = grid.points();
  const int K = tree.steps();
  const double dt = tree.dt();
  const double s = tree.sqrt_dt();
  if (zT.dim() != M || zhatT.dim() != M || zT.last_level() != K || zhatT.last_level() != K)
    throw std::invalid_argument("solve_backward_reference: terminal data shape mismatch");

  // L = A + advection + diag(b2 - b3 b5); the b3 Z coupling contributes the
  // -b3 b5 z piece once Z is eliminated.
  Eigen::MatrixXd L = grid.elliptic_matrix() + ref.advection;
  L += Eigen::MatrixXd(
      (ref.b2.array() - ref.b3.array() * ref.b5.array()).matrix().asDiagonal());
  const auto lu = factor_node_system(L, dt, "solve_backward_reference");

  AdjointQuad out;
  out.z = AdaptedField(tree, M, K);
  out.zhat = AdaptedField(tree, M, K);
  out.Z = AdaptedField(tree, M, K - 1);
  out.Zhat = AdaptedField(tree, M, K - 1);
  out.z.level(K) = zT.level(K);
  out.zhat.level(K) = zhatT.level(K);

  for (int k = K - 1; k >= 0; --k) {
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const Eigen::VectorXd zlo = out.z.node(k + 1, BinaryTree::child(p, 0));
      const Eigen::VectorXd zhi = out.z.node(k + 1, BinaryTree::child(p, 1));
      const Eigen::VectorXd hlo = out.zhat.node(k + 1, BinaryTree::child(p, 0));
      const Eigen::VectorXd hhi = out.zhat.node(k + 1, BinaryTree::child(p, 1));
      const Eigen::VectorXd mz = 0.5 * (zhi + zlo);
      const Eigen::VectorXd mzh = 0.5 * (hhi + hlo);
      const Eigen::VectorXd dz2s = (zhi - zlo) / (2.0 * s);
      const Eigen::VectorXd Zh = (hhi - hlo) / (2.0 * s);

      const Eigen::VectorXd rhs =
          mzh - dt * (L * mz + ref.b3.cwiseProduct(dz2s) + ref.b4.cwiseProduct(Zh));
      const Eigen::VectorXd zh = lu.solve(rhs);
      const Eigen::VectorXd z = mz - dt * zh;
      out.zhat.node(k, p) = zh;
      out.z.node(k, p) = z;
      out.Z.node(k, p) = dz2s - ref.b5.cwiseProduct(z);
      out.Zhat.node(k, p) = Zh;
    }
  }
  return out;
}

DualPair solve_forward_dual(const Grid& grid, const CoefficientSet& coeffs,
                            const BinaryTree& tree, const Eigen::VectorXd& z0,
                            const Eigen::VectorXd& zhat0, const AdaptedField& f_src,
                            const AdaptedField& fhat_src) {
  require_cfl(grid, tree);
  coeffs.validate(grid);
  const int M = grid.points();
  const int K = tree.steps();
  const double dt = tree.dt();
  const double s = tree.sqrt_dt();
  if (z0.size() != M || zhat0.size() != M)
    throw std::invalid_argument("solve_forward_dual: initial data size mismatch");

  const Eigen::MatrixXd Q = dual_drift_matrix(grid, coeffs);

  DualPair out;
  out.z = AdaptedField(tree, M, K);
  out.zhat = AdaptedField(tree, M, K);
  out.z.node(0, 0) = z0;
  out.zhat.node(0, 0) = zhat0;

  for (int k = 0; k < K; ++k) {
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const Eigen::VectorXd zk = out.z.node(k, p);
      const Eigen::VectorXd zhk = out.zhat.node(k, p);
      const Eigen::VectorXd fk = node_or_zero(f_src, k, p, M);
      const Eigen::VectorXd fhk = node_or_zero(fhat_src, k, p, M);

      const Eigen::VectorXd mz = zk + dt * zhk;
      const Eigen::VectorXd mzh =
          zhk + dt * (Q * zk + coeffs.a3.cwiseProduct(fk) - coeffs.a4.cwiseProduct(fhk));
      const Eigen::VectorXd znoise = fk - coeffs.a5.cwiseProduct(zk);
      out.z.node(k + 1, BinaryTree::child(p, 0)) = mz - s * znoise;
      out.z.node(k + 1, BinaryTree::child(p, 1)) = mz + s * znoise;
      out.zhat.node(k + 1, BinaryTree::child(p, 0)) = mzh - s * fhk;
      out.zhat.node(k + 1, BinaryTree::child(p, 1)) = mzh + s * fhk;
    }
  }
  return out;
}

BackwardQuad solve_backward_controlled(const Grid& grid, const CoefficientSet& coeffs,
                                       const BinaryTree& tree, const AdaptedField& yT,
                                       const AdaptedField& yhatT, const BoundaryControl& h) {
  coeffs.validate(grid);
  const int M = grid.points();
  const int K = tree.steps();
  const double dt = tree.dt();
  const double s = tree.sqrt_dt();
  if (yT.dim() != M || yhatT.dim() != M || yT.last_level() != K || yhatT.last_level() != K)
    throw std::invalid_argument("solve_backward_controlled: terminal data shape mismatch");

  const Eigen::MatrixXd Qt = dual_drift_matrix(grid, coeffs).transpose();

  BackwardQuad out;
  out.y = AdaptedField(tree, M, K);
  out.yhat = AdaptedField(tree, M, K);
  out.Y = AdaptedField(tree, M, K - 1);
  out.Yhat = AdaptedField(tree, M, K - 1);
  out.y.level(K) = yT.level(K);
  out.yhat.level(K) = yhatT.level(K);

  for (int k = K - 1; k >= 0; --k) {
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const Eigen::VectorXd ylo = out.y.node(k + 1, BinaryTree::child(p, 0));
      const Eigen::VectorXd yhi = out.y.node(k + 1, BinaryTree::child(p, 1));
      const Eigen::VectorXd hlo = out.yhat.node(k + 1, BinaryTree::child(p, 0));
      const Eigen::VectorXd hhi = out.yhat.node(k + 1, BinaryTree::child(p, 1));
      const Eigen::VectorXd my = 0.5 * (yhi + ylo);
      const Eigen::VectorXd myh = 0.5 * (hhi + hlo);
      const Eigen::VectorXd Yt = (yhi - ylo) / (2.0 * s);   // raw y integrand
      const Eigen::VectorXd Yht = (hhi - hlo) / (2.0 * s);  // raw yhat integrand

      Eigen::VectorXd drift = Qt * my + coeffs.a5.cwiseProduct(Yht);
      add_boundary(grid, h.left(k, p), h.right(k, p), drift);

      out.yhat.node(k, p) = myh - dt * drift;
      out.y.node(k, p) = my - dt * myh;
      out.Y.node(k, p) = Yt - coeffs.a4.cwiseProduct(my);
      out.Yhat.node(k, p) = Yht - coeffs.a3.cwiseProduct(my);
    }
  }
  return out;
}

double level_energy(const Grid& grid, const AdaptedField& a, const AdaptedField& b, int level,
                    EnergyKind kind) {
  const std::int64_t n = a.level(level).size() / a.dim();
  double acc = 0.0;
  for (std::int64_t p = 0; p < n; ++p) {
    const Eigen::VectorXd av = a.node(level, p);
    const Eigen::VectorXd bv = b.node(level, p);
    if (kind == EnergyKind::adjoint)
      acc += inner_h01(grid, av, av) + inner_l2(grid, bv, bv);
    else
      acc += inner_l2(grid, av, av) + inner_hneg1(grid, bv, bv);
  }
  return acc / static_cast<double>(n);
}

RegularityReport energy_and_hidden_regularity(const Grid& grid, const BinaryTree& tree,
                                              const AdaptedField& z, const AdaptedField& zhat,
                                              int data_level, EnergyKind kind) {
  RegularityReport rep;
  const double ref = level_energy(grid, z, zhat, data_level, kind);
  if (ref == 0.0) return rep;

  double emax = 0.0;
  for (int k = 0; k <= z.last_level(); ++k)
    emax = std::max(emax, level_energy(grid, z, zhat, k, kind));
  rep.energy_ratio = emax / ref;

  double tr = 0.0;
  for (int k = 0; k < z.last_level(); ++k) {
    double level_acc = 0.0;
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const NormalTrace t = normal_trace(grid, z.node(k, p));
      level_acc += t.left * t.left + t.right * t.right;
    }
    tr += tree.dt() * level_acc / static_cast<double>(tree.nodes(k));
  }
  rep.trace_ratio = tr / ref;
  return rep;
}

}  // namespace swave
