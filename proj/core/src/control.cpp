#include <swave/control.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <utility>

namespace swave {

namespace {

double field_gap(const AdaptedField& a, const AdaptedField& b, int last) {
  double m = 0.0;
  for (int k = 0; k <= last; ++k)
    m = std::max(m, (a.level(k) - b.level(k)).cwiseAbs().maxCoeff());
  return m;
}

double field_scale(const AdaptedField& a, int last) {
  double m = 0.0;
  for (int k = 0; k <= last; ++k) m = std::max(m, a.level(k).cwiseAbs().maxCoeff());
  return m;
}

// mean over the nodes of one level of the duality bracket between two pairs
double bracket_mean(const Grid& grid, const BinaryTree& tree, const AdaptedField& y,
                    const AdaptedField& yhat, const AdaptedField& z, const AdaptedField& zhat,
                    int k) {
  double acc = 0.0;
  for (std::int64_t p = 0; p < tree.nodes(k); ++p)
    acc += duality_bracket(grid, y.node(k, p), yhat.node(k, p), z.node(k, p), zhat.node(k, p));
  return acc / static_cast<double>(tree.nodes(k));
}

// last-increment sign payoff xi = dW_{K-1}/sqrt(dt) and its mean conditional
// variance given F_{K-1} (identically one for the +-sqrt(dt) walk, but
// computed rather than assumed)
double xi_conditional_variance(const BinaryTree& tree) {
  const int K = tree.steps();
  AdaptedField xi(tree, 1, K);
  for (std::int64_t q = 0; q < tree.nodes(K); ++q)
    xi.node(K, q)(0) = BinaryTree::increment_sign(q);
  const AdaptedField var = conditional_variance_last_step(tree, xi);
  return expectation(var, K - 1)(0);
}

std::pair<int, bool> conjugate_gradient(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                        Eigen::VectorXd& x, double rel_tol, int max_iter,
                                        std::vector<double>& objective) {
  x = Eigen::VectorXd::Zero(b.size());
  objective.clear();
  const double b_norm = b.norm();
  if (b_norm == 0.0) return {0, true};
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  for (int it = 1; it <= max_iter; ++it) {
    const Eigen::VectorXd Ap = A * p;
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) return {it, false};  // operator not positive along p
    const double alpha = rr / pAp;
    x += alpha * p;
    r -= alpha * Ap;
    objective.push_back(0.5 * x.dot(A * x) - b.dot(x));
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= rel_tol * b_norm) return {it, true};
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  return {max_iter, false};
}

}  // namespace

double duality_bracket(const Grid& grid, const Eigen::VectorXd& y, const Eigen::VectorXd& yhat,
                       const Eigen::VectorXd& z, const Eigen::VectorXd& zhat) {
  return grid.dx() * (yhat.dot(z) - y.dot(zhat));
}

double boundary_bracket(const Grid& grid, const BoundarySpec& where, double h_left,
                        double h_right, const NormalTrace& trace) {
  double acc = 0.0;
  if (where.left) acc += grid.a_mid(0) * h_left * trace.left;
  if (where.right) acc += grid.a_mid(grid.points()) * h_right * trace.right;
  return acc;
}

TraceProcess observation_traces(const Grid& grid, const BinaryTree& tree,
                                const BoundarySpec& where, const AdaptedField& z) {
  const int K = tree.steps();
  if (z.dim() != grid.points() || z.last_level() < K - 1)
    throw std::invalid_argument("observation_traces: field shape mismatch");
  TraceProcess out;
  out.where = where;
  out.values = AdaptedField(tree, 2, K - 1);
  for (int k = 0; k < K; ++k)
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      const NormalTrace tr = normal_trace(grid, z.node(k, p));
      out.values.node(k, p)(0) = where.left ? tr.left : 0.0;
      out.values.node(k, p)(1) = where.right ? tr.right : 0.0;
    }
  return out;
}

DualityCheck duality_gap(const Grid& grid, const BinaryTree& tree, const BackwardQuad& controlled,
                         const BoundaryControl& h, const DualPair& dual,
                         const AdaptedField& f_src, const AdaptedField& fhat_src) {
  const int K = tree.steps();
  const double dt = tree.dt();
  const double dx = grid.dx();

  DualityCheck out;
  out.lhs = bracket_mean(grid, tree, controlled.y, controlled.yhat, dual.z, dual.zhat, K) -
            bracket_mean(grid, tree, controlled.y, controlled.yhat, dual.z, dual.zhat, 0);

  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      double term = 0.0;
      if (f_src.dim() > 0) term += dx * controlled.Yhat.node(k, p).dot(f_src.node(k, p));
      if (fhat_src.dim() > 0) term -= dx * controlled.Y.node(k, p).dot(fhat_src.node(k, p));
      const NormalTrace tr = normal_trace(grid, dual.z.node(k, p));
      term -= boundary_bracket(grid, h.where, h.left(k, p), h.right(k, p), tr);
      acc += term;
    }
    out.rhs += dt * acc / static_cast<double>(tree.nodes(k));
  }
  return out;
}

Gramian assemble_gramian(const Grid& grid, const CoefficientSet& coeffs, const BinaryTree& tree,
                         const BoundarySpec& where) {
  const int M = grid.points();
  const int K = tree.steps();
  const int n = 2 * M;
  const double dt = tree.dt();
  const double dx = grid.dx();
  const AdaptedField no_src;

  std::vector<TraceProcess> traces;
  traces.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd z0 = Eigen::VectorXd::Zero(M);
    Eigen::VectorXd zhat0 = Eigen::VectorXd::Zero(M);
    if (j < M)
      z0(j) = 1.0;
    else
      zhat0(j - M) = 1.0;
    const DualPair dual = solve_forward_dual(grid, coeffs, tree, z0, zhat0, no_src, no_src);
    traces.push_back(observation_traces(grid, tree, where, dual.z));
  }

  // direct route: the weighted trace products, symmetric by construction
  Eigen::MatrixXd direct = Eigen::MatrixXd::Zero(n, n);
  const double a_left = grid.a_mid(0);
  const double a_right = grid.a_mid(M);
  Eigen::VectorXd tl(n), tr(n);
  for (int k = 0; k < K; ++k) {
    const double w = dt / static_cast<double>(tree.nodes(k));
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      for (int j = 0; j < n; ++j) {
        tl(j) = traces[static_cast<std::size_t>(j)].left(k, p);
        tr(j) = traces[static_cast<std::size_t>(j)].right(k, p);
      }
      if (where.left) direct.selfadjointView<Eigen::Lower>().rankUpdate(tl, w * a_left);
      if (where.right) direct.selfadjointView<Eigen::Lower>().rankUpdate(tr, w * a_right);
    }
  }
  const Eigen::MatrixXd direct_full = direct.selfadjointView<Eigen::Lower>();

  // adjoint route: drive the controlled backward solver with each trace and
  // read the Gramian column off the recovered initial data
  Eigen::MatrixXd adjoint(n, n);
  AdaptedField zero_terminal(tree, M, K);
  for (int j = 0; j < n; ++j) {
    BoundaryControl hj;
    hj.where = where;
    hj.values = traces[static_cast<std::size_t>(j)].values;
    const BackwardQuad bq =
        solve_backward_controlled(grid, coeffs, tree, zero_terminal, zero_terminal, hj);
    adjoint.col(j).head(M) = dx * bq.yhat.node(0, 0);
    adjoint.col(j).tail(M) = -dx * bq.y.node(0, 0);
  }

  Gramian out;
  out.where = where;
  out.route_gap = (direct_full - adjoint).cwiseAbs().maxCoeff();
  const double scale =
      std::max({direct_full.cwiseAbs().maxCoeff(), adjoint.cwiseAbs().maxCoeff(), 1e-300});
  if (out.route_gap > 1e-10 * scale)
    throw std::runtime_error(
        "assemble_gramian: trace-product and adjoint assemblies disagree; "
        "the solver pair is not transposed");
  out.matrix = std::move(adjoint);
  out.asymmetry = (out.matrix - out.matrix.transpose()).cwiseAbs().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out.matrix);
  out.eigenvalues = es.eigenvalues();
  return out;
}

ObservabilityReport observability(const Grid& grid, const Gramian& gram, int samples,
                                  std::uint64_t seed) {
  const int M = grid.points();
  const int n = 2 * M;
  if (gram.matrix.rows() != n || gram.matrix.cols() != n)
    throw std::invalid_argument("observability: Gramian size mismatch");

  ObservabilityReport rep;
  rep.lambda_min = gram.eigenvalues(0);
  rep.lambda_max = gram.eigenvalues(n - 1);

  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(n, n);
  N.topLeftCorner(M, M) = -grid.dx() * grid.elliptic_matrix();
  N.bottomRightCorner(M, M) = grid.dx() * Eigen::MatrixXd::Identity(M, M);

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(gram.matrix, N);
  const double mu_min = ges.eigenvalues()(0);
  const double mu_max = ges.eigenvalues()(n - 1);
  rep.observable = mu_min > 1e-12 * std::max(mu_max, 0.0) && mu_min > 0.0;
  rep.constant = rep.observable ? 1.0 / mu_min : std::numeric_limits<double>::infinity();

  auto ratio = [&](const Eigen::VectorXd& w) {
    const double num = w.dot(N * w);
    const double den = w.dot(gram.matrix * w);
    return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
  };
  double worst = ratio(ges.eigenvectors().col(0));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = gauss(rng);
    worst = std::max(worst, ratio(w));
  }
  rep.constant_sampled = worst;
  return rep;
}

HumResult hum_synthesize(const Grid& grid, const CoefficientSet& coeffs, const BinaryTree& tree,
                         const BoundarySpec& where, const Eigen::VectorXd& y0_target,
                         const Eigen::VectorXd& yhat0_target, const AdaptedField& yT,
                         const AdaptedField& yhatT) {
  const int M = grid.points();
  const int K = tree.steps();
  if (y0_target.size() != M || yhat0_target.size() != M)
    throw std::invalid_argument("hum_synthesize: target size mismatch");

  // the free backward solution fixes the defect the control must produce
  const BackwardQuad free_bq =
      solve_backward_controlled(grid, coeffs, tree, yT, yhatT, BoundaryControl::zero(tree, where));
  const Eigen::VectorXd d_y = y0_target - free_bq.y.node(0, 0);
  const Eigen::VectorXd d_yhat = yhat0_target - free_bq.yhat.node(0, 0);

  const Gramian gram = assemble_gramian(grid, coeffs, tree, where);
  Eigen::VectorXd rhs(2 * M);
  rhs.head(M) = -grid.dx() * d_yhat;
  rhs.tail(M) = grid.dx() * d_y;

  Eigen::VectorXd w;
  std::vector<double> objective;
  const auto [iterations, converged] =
      conjugate_gradient(gram.matrix, rhs, w, 1e-10, 4 * M, objective);
  if (!converged)
    throw std::runtime_error("hum_synthesize: conjugate gradients failed on the Gramian");

  const AdaptedField no_src;
  const DualPair dual =
      solve_forward_dual(grid, coeffs, tree, w.head(M), w.tail(M), no_src, no_src);
  const TraceProcess tp = observation_traces(grid, tree, where, dual.z);

  HumResult out;
  out.cg_objective = std::move(objective);
  out.h.where = where;
  out.h.values = tp.values;
  for (int k = 0; k < K; ++k) out.h.values.level(k) *= -1.0;

  out.trajectory = solve_backward_controlled(grid, coeffs, tree, yT, yhatT, out.h);
  out.f = out.trajectory.Y;
  out.g = out.trajectory.Yhat;
  out.y0 = out.trajectory.y.node(0, 0);
  out.yhat0 = out.trajectory.yhat.node(0, 0);
  out.iterations = iterations;
  out.converged = converged;

  const Norms err_y = norms(grid, y0_target - out.y0);
  const Norms err_yhat = norms(grid, yhat0_target - out.yhat0);
  out.residual_abs = std::hypot(err_y.l2, err_yhat.hneg1);
  const double target_scale =
      std::hypot(norms(grid, y0_target).l2, norms(grid, yhat0_target).hneg1);
  const double defect_scale = std::hypot(norms(grid, d_y).l2, norms(grid, d_yhat).hneg1);
  out.residual_rel = out.residual_abs / std::max({target_scale, defect_scale, 1e-300});
  return out;
}

ClassicalCertificate negative_classical(const Grid& grid, const CoefficientSet& coeffs,
                                        const BinaryTree& tree, const BoundarySpec& where,
                                        const Eigen::VectorXd& psi) {
  const int M = grid.points();
  const int K = tree.steps();
  if (psi.size() != M) throw std::invalid_argument("negative_classical: psi size mismatch");
  const double dx = grid.dx();
  const std::int64_t leaves = tree.nodes(K);
  const std::int64_t node_count = (std::int64_t{1} << K) - 1;  // levels 0..K-1
  const std::int64_t cols = node_count * (2 * M + where.count());
  const std::int64_t rows = leaves * M;
  if (rows * cols > 50'000'000)
    throw std::invalid_argument("negative_classical: control basis too large to enumerate");

  ClassicalCertificate cert;
  const double evar = xi_conditional_variance(tree);
  cert.bound = evar * inner_l2(grid, psi, psi);

  // response matrix of every admissible control direction, rows weighted so
  // the squared residual is the expected squared L^2 distance at the leaves
  const double wl = std::sqrt(dx / static_cast<double>(leaves));
  const Eigen::VectorXd zeroM = Eigen::VectorXd::Zero(M);
  const AdaptedField no_field;
  const BoundaryControl no_h;
  Eigen::MatrixXd B(rows, cols);
  Eigen::Index col = 0;
  auto store = [&](const StatePair& sol) {
    for (std::int64_t q = 0; q < leaves; ++q)
      B.col(col).segment(q * M, M) = wl * sol.y.node(K, q);
    ++col;
  };
  for (int k = 0; k < K; ++k)
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      for (int i = 0; i < M; ++i) {
        AdaptedField g1(tree, M, K - 1);
        g1.node(k, p)(i) = 1.0;
        store(solve_forward_classical(grid, coeffs, tree, zeroM, zeroM, g1, no_field, no_h));
      }
      for (int i = 0; i < M; ++i) {
        AdaptedField g2(tree, M, K - 1);
        g2.node(k, p)(i) = 1.0;
        store(solve_forward_classical(grid, coeffs, tree, zeroM, zeroM, no_field, g2, no_h));
      }
      for (int side = 0; side < 2; ++side) {
        if ((side == 0 && !where.left) || (side == 1 && !where.right)) continue;
        BoundaryControl h = BoundaryControl::zero(tree, where);
        h.values.node(k, p)(side) = 1.0;
        store(solve_forward_classical(grid, coeffs, tree, zeroM, zeroM, no_field, no_field, h));
      }
    }

  Eigen::VectorXd target(rows);
  for (std::int64_t q = 0; q < leaves; ++q)
    target.segment(q * M, M) = wl * BinaryTree::increment_sign(q) * psi;

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  const Eigen::VectorXd c = qr.solve(target);
  cert.basis_minimum = (B * c - target).squaredNorm();

  // the refined scheme reaches the same target exactly through its
  // displacement noise channel
  ControlTriple tri = ControlTriple::zero(grid, tree, where);
  for (std::int64_t p = 0; p < tree.nodes(K - 1); ++p)
    tri.f.node(K - 1, p) = psi / tree.sqrt_dt();
  const StatePair refined = solve_forward_refined(grid, coeffs, tree, zeroM, zeroM, tri);
  double contrast = 0.0;
  for (std::int64_t q = 0; q < leaves; ++q)
    contrast += dx *
                (refined.y.node(K, q) - BinaryTree::increment_sign(q) * psi).squaredNorm() /
                static_cast<double>(leaves);
  cert.refined_contrast = contrast;

  const double tol = 1e-12 * std::max(1.0, cert.bound);
  cert.holds = std::abs(cert.basis_minimum - cert.bound) <= tol && cert.refined_contrast <= tol;
  return cert;
}

LocalizedCertificate negative_localized(const Grid& grid, const CoefficientSet& coeffs,
                                        const BinaryTree& tree, const BoundarySpec& where,
                                        MaskedControl which, const std::vector<bool>& mask,
                                        const Eigen::VectorXd& rho) {
  const int M = grid.points();
  const int K = tree.steps();
  if (static_cast<int>(mask.size()) != M || rho.size() != M)
    throw std::invalid_argument("negative_localized: mask or profile size mismatch");
  if (which == MaskedControl::f && coeffs.a4.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("negative_localized: the f-channel certificate needs a4 == 0");
  if (which == MaskedControl::g && coeffs.a3.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("negative_localized: the g-channel certificate needs a3 == 0");

  bool clean = true;
  int masked_count = 0;
  for (int i = 0; i < M; ++i) {
    if (mask[static_cast<std::size_t>(i)]) ++masked_count;
    if (mask[static_cast<std::size_t>(i)] && rho(i) != 0.0) clean = false;
  }

  LocalizedCertificate cert;
  const double evar = xi_conditional_variance(tree);
  const double rho_l2sq = inner_l2(grid, rho, rho);
  if (clean) {
    if (which == MaskedControl::f)
      cert.bound = evar * rho_l2sq;
    else
      cert.bound = evar * rho_l2sq * rho_l2sq / inner_h01(grid, rho, rho);
  }

  const std::int64_t leaves = tree.nodes(K);
  const std::int64_t node_count = (std::int64_t{1} << K) - 1;
  const std::int64_t masked_cols = node_count * masked_count;
  const std::int64_t free_cols = node_count * M;
  const std::int64_t cols = masked_cols + free_cols + node_count * where.count();
  const std::int64_t rows = leaves * M;
  if (rows * cols > 50'000'000)
    throw std::invalid_argument("negative_localized: control basis too large to enumerate");

  // in the g case the residual is measured in H^-1, realized through the
  // Cholesky factor of the stiffness matrix
  const Eigen::MatrixXd neg_elliptic = -grid.elliptic_matrix();
  const Eigen::LLT<Eigen::MatrixXd> llt(neg_elliptic);
  const double wl = std::sqrt(grid.dx() / static_cast<double>(leaves));
  const bool f_case = which == MaskedControl::f;

  Eigen::MatrixXd B(rows, cols);
  Eigen::Index col = 0;
  auto store = [&](const StatePair& sol) {
    const AdaptedField& comp = f_case ? sol.y : sol.yhat;
    for (std::int64_t q = 0; q < leaves; ++q) {
      const Eigen::VectorXd u = comp.node(K, q);
      B.col(col).segment(q * M, M) =
          wl * (f_case ? u : Eigen::VectorXd(llt.matrixL().solve(u)));
    }
    ++col;
  };

  const Eigen::VectorXd zeroM = Eigen::VectorXd::Zero(M);
  for (int k = 0; k < K; ++k)
    for (std::int64_t p = 0; p < tree.nodes(k); ++p) {
      for (int i = 0; i < M; ++i) {  // masked channel
        if (!mask[static_cast<std::size_t>(i)]) continue;
        ControlTriple tri = ControlTriple::zero(grid, tree, where);
        (f_case ? tri.f : tri.g).node(k, p)(i) = 1.0;
        store(solve_forward_refined(grid, coeffs, tree, zeroM, zeroM, tri));
      }
      for (int i = 0; i < M; ++i) {  // unrestricted channel
        ControlTriple tri = ControlTriple::zero(grid, tree, where);
        (f_case ? tri.g : tri.f).node(k, p)(i) = 1.0;
        store(solve_forward_refined(grid, coeffs, tree, zeroM, zeroM, tri));
      }
      for (int side = 0; side < 2; ++side) {
        if ((side == 0 && !where.left) || (side == 1 && !where.right)) continue;
        ControlTriple tri = ControlTriple::zero(grid, tree, where);
        tri.h.values.node(k, p)(side) = 1.0;
        store(solve_forward_refined(grid, coeffs, tree, zeroM, zeroM, tri));
      }
    }

  Eigen::VectorXd target(rows);
  for (std::int64_t q = 0; q < leaves; ++q) {
    const Eigen::VectorXd u = BinaryTree::increment_sign(q) * rho;
    target.segment(q * M, M) = wl * (f_case ? u : Eigen::VectorXd(llt.matrixL().solve(u)));
  }

  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(B);
  const Eigen::VectorXd c = qr.solve(target);
  cert.basis_minimum = (B * c - target).squaredNorm();
  cert.holds = cert.basis_minimum >= cert.bound - 1e-10 * std::max(1.0, cert.bound);
  return cert;
}

NoBoundaryCertificate negative_no_boundary(const Grid& grid, const CoefficientSet& coeffs,
                                           const BinaryTree& tree, const Eigen::VectorXd& eta0,
                                           const Eigen::VectorXd& eta1) {
  const int M = grid.points();
  const int K = tree.steps();
  if (eta0.size() != M || eta1.size() != M)
    throw std::invalid_argument("negative_no_boundary: witness data size mismatch");
  if (coeffs.a5.cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("negative_no_boundary: the certificate needs a5 == 0");

  const ReferenceCoefficients ref = ReferenceCoefficients::adjoint_of(grid, coeffs);
  const int n = 4 * M;
  const double dt = tree.dt();

  // backward solves for the enriched terminal basis: deterministic
  // directions first, then the same directions carrying the last increment
  std::vector<AdaptedField> Zs, Zhats;
  Zs.reserve(static_cast<std::size_t>(n));
  Zhats.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    AdaptedField zT(tree, M, K);
    AdaptedField zhatT(tree, M, K);
    const int base = j % (2 * M);
    const bool randomized = j >= 2 * M;
    for (std::int64_t q = 0; q < tree.nodes(K); ++q) {
      const double sgn = randomized ? BinaryTree::increment_sign(q) : 1.0;
      if (base < M)
        zT.node(K, q)(base) = sgn;
      else
        zhatT.node(K, q)(base - M) = sgn;
    }
    AdjointQuad quad = solve_backward_reference(grid, ref, tree, zT, zhatT);
    Zs.push_back(std::move(quad.Z));
    Zhats.push_back(std::move(quad.Zhat));
  }

  auto observation_form = [&](const AdaptedField& Zi, const AdaptedField& Zhi,
                              const AdaptedField& Zj, const AdaptedField& Zhj) {
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      double lvl = 0.0;
      for (std::int64_t p = 0; p < tree.nodes(k); ++p)
        lvl += inner_h01(grid, Zi.node(k, p), Zj.node(k, p)) +
               inner_l2(grid, Zhi.node(k, p), Zhj.node(k, p));
      acc += dt * lvl / static_cast<double>(tree.nodes(k));
    }
    return acc;
  };

  Eigen::MatrixXd Q(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const std::size_t si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
      Q(i, j) = Q(j, i) = observation_form(Zs[si], Zhats[si], Zs[sj], Zhats[sj]);
    }

  NoBoundaryCertificate cert;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q);
  const double lambda_max = es.eigenvalues()(n - 1);
  for (int j = 0; j < 2 * M; ++j) {
    cert.deterministic_max = std::max(cert.deterministic_max, Q(j, j));
    cert.kernel_image = std::max(cert.kernel_image, Q.col(j).cwiseAbs().maxCoeff());
  }
  for (int j = 2 * M; j < n; ++j) cert.random_max = std::max(cert.random_max, Q(j, j));

  // deterministic wave trajectory, fed in as terminal data: the backward
  // solve must see it with vanishing integrands
  Eigen::MatrixXd drift = grid.elliptic_matrix() + ref.advection;
  drift.diagonal() += ref.b2 - ref.b3.cwiseProduct(ref.b5);
  Eigen::VectorXd z = eta0;
  Eigen::VectorXd zhat = eta1;
  for (int k = 0; k < K; ++k) {
    const Eigen::VectorXd z_next = z + dt * zhat;
    zhat += dt * (drift * z);
    z = z_next;
  }
  AdaptedField zT(tree, M, K);
  AdaptedField zhatT(tree, M, K);
  for (std::int64_t q = 0; q < tree.nodes(K); ++q) {
    zT.node(K, q) = z;
    zhatT.node(K, q) = zhat;
  }
  const AdjointQuad witness = solve_backward_reference(grid, ref, tree, zT, zhatT);
  cert.witness_energy = observation_form(witness.Z, witness.Zhat, witness.Z, witness.Zhat);
  const Norms nz = norms(grid, z);
  const Norms nzh = norms(grid, zhat);
  cert.witness_norm = nz.h01 * nz.h01 + nzh.l2 * nzh.l2;

  const double floor_scale = std::max(lambda_max, 1e-300);
  cert.holds = cert.random_max > 0.0 &&
               cert.deterministic_max <= 1e-12 * floor_scale &&
               cert.kernel_image <= 1e-12 * floor_scale &&
               cert.witness_energy <= 1e-12 * std::max(cert.witness_norm, 1e-300);
  return cert;
}

ReductionReport reduction_check(const Grid& grid, const CoefficientSet& coeffs,
                                const BinaryTree& tree, const BoundarySpec& where,
                                std::uint64_t seed, bool with_synthesis) {
  const int M = grid.points();
  const int K = tree.steps();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto rand_vec = [&](Eigen::Index m) {
    Eigen::VectorXd v(m);
    for (Eigen::Index i = 0; i < m; ++i) v(i) = gauss(rng);
    return v;
  };
  auto rand_leaf_field = [&]() {
    AdaptedField fld(tree, M, K);
    fld.level(K) = rand_vec(fld.level(K).size());
    return fld;
  };

  ReductionReport rep;

  // (a) backward reference solve replayed by the driven forward dual solver
  {
    const AdaptedField zT = rand_leaf_field();
    const AdaptedField zhatT = rand_leaf_field();
    const ReferenceCoefficients ref = ReferenceCoefficients::adjoint_of(grid, coeffs);
    const AdjointQuad rq = solve_backward_reference(grid, ref, tree, zT, zhatT);
    const DualPair replay = solve_forward_dual(grid, coeffs, tree, rq.z.node(0, 0),
                                               rq.zhat.node(0, 0), rq.Z, rq.Zhat);
    const double scale =
        std::max({field_scale(rq.z, K), field_scale(rq.zhat, K), 1.0});
    rep.dual_roundtrip =
        std::max(field_gap(replay.z, rq.z, K), field_gap(replay.zhat, rq.zhat, K)) / scale;
  }

  // (b) forward refined solve recovered by the backward controlled solver
  {
    ControlTriple tri = ControlTriple::zero(grid, tree, where);
    for (int k = 0; k < K; ++k) {
      tri.f.level(k) = rand_vec(tri.f.level(k).size());
      tri.g.level(k) = rand_vec(tri.g.level(k).size());
      tri.h.values.level(k) = rand_vec(tri.h.values.level(k).size());
    }
    const Eigen::VectorXd y0 = rand_vec(M);
    const Eigen::VectorXd yhat0 = rand_vec(M);
    const StatePair fw = solve_forward_refined(grid, coeffs, tree, y0, yhat0, tri);
    const BackwardQuad bq = solve_backward_controlled(grid, coeffs, tree, fw.y, fw.yhat, tri.h);
    const double scale = std::max({field_scale(fw.y, K), field_scale(fw.yhat, K),
                                   field_scale(tri.f, K - 1), field_scale(tri.g, K - 1), 1.0});
    rep.controlled_roundtrip =
        std::max({field_gap(bq.y, fw.y, K), field_gap(bq.yhat, fw.yhat, K),
                  field_gap(bq.Y, tri.f, K - 1), field_gap(bq.Yhat, tri.g, K - 1)}) /
        scale;
  }

  // (c) HUM controls fed back into the forward solver reproduce the
  // prescribed terminal data
  if (with_synthesis) {
    const AdaptedField yT = rand_leaf_field();
    const AdaptedField yhatT = rand_leaf_field();
    const Eigen::VectorXd y0_target = rand_vec(M);
    const Eigen::VectorXd yhat0_target = rand_vec(M);
    const HumResult hum =
        hum_synthesize(grid, coeffs, tree, where, y0_target, yhat0_target, yT, yhatT);
    ControlTriple tri;
    tri.f = hum.f;
    tri.g = hum.g;
    tri.h = hum.h;
    const StatePair fw = solve_forward_refined(grid, coeffs, tree, hum.y0, hum.yhat0, tri);
    const double scale = std::max({yT.level(K).cwiseAbs().maxCoeff(),
                                   yhatT.level(K).cwiseAbs().maxCoeff(), 1.0});
    rep.synthesis_replay = std::max((fw.y.level(K) - yT.level(K)).cwiseAbs().maxCoeff(),
                                    (fw.yhat.level(K) - yhatT.level(K)).cwiseAbs().maxCoeff()) /
                           scale;
  }

  rep.holds = rep.dual_roundtrip <= 1e-10 && rep.controlled_roundtrip <= 1e-10 &&
              rep.synthesis_replay <= 1e-10;
  return rep;
}

}  // namespace swave
