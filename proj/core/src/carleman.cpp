#include "swave/carleman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace swave {

namespace {

// centered interior, second-order one-sided at the ends
std::vector<double> fd_derivative(const std::vector<double>& f, double dx) {
  const int n = static_cast<int>(f.size());
  std::vector<double> d(static_cast<std::size_t>(n), 0.0);
  if (n < 3) return d;
  for (int i = 1; i + 1 < n; ++i)
    d[static_cast<std::size_t>(i)] =
        (f[static_cast<std::size_t>(i + 1)] - f[static_cast<std::size_t>(i - 1)]) / (2.0 * dx);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
  d[static_cast<std::size_t>(n - 1)] =
      (3.0 * f[static_cast<std::size_t>(n - 1)] - 4.0 * f[static_cast<std::size_t>(n - 2)] +
       f[static_cast<std::size_t>(n - 3)]) /
      (2.0 * dx);
  return d;
}

double sup_abs(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

Condition1Report check_condition1(const Grid& grid, const CarlemanConfig& cfg) {
  const int M = grid.points();
  Condition1Report rep;

  std::vector<double> a(static_cast<std::size_t>(M) + 2);
  for (int i = 0; i <= M + 1; ++i) a[static_cast<std::size_t>(i)] = grid.a_node(i);
  const std::vector<double> da = fd_derivative(a, grid.dx());

  // form/a = (1/2) a' phi' + a phi''; for a == 1 this is exactly phi''.
  double best = std::numeric_limits<double>::infinity();
  double min_grad = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= M + 1; ++i) {
    const double x = grid.x(i);
    const double px = cfg.phi_x(x);
    const double value = 0.5 * da[static_cast<std::size_t>(i)] * px + grid.a_node(i) * cfg.phi_xx();
    if (value < best) {
      best = value;
      rep.worst_index = i;
    }
    if (std::abs(px) < min_grad) min_grad = std::abs(px);
    if (std::abs(px) <= 1e-12 && rep.critical_index < 0) rep.critical_index = i;
  }
  rep.mu0_max = best;
  rep.min_grad = min_grad;
  rep.holds = (rep.critical_index < 0) && (best > 0.0);
  return rep;
}

Condition2Report check_condition2(const Grid& grid, const CarlemanConfig& cfg,
                                  const CoefficientSet& coeffs) {
  const int M = grid.points();
  Condition2Report rep;

  double phi_min = std::numeric_limits<double>::infinity();
  double phi_max = -std::numeric_limits<double>::infinity();
  double quarter_min = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= M; ++i) {
    const double x = grid.x(i);
    const double p = cfg.phi(x);
    phi_min = std::min(phi_min, p);
    phi_max = std::max(phi_max, p);
    const double px = cfg.phi_x(x);
    quarter_min = std::min(quarter_min, 0.25 * grid.a_node(i) * px * px);
  }
  rep.R0sq = phi_min;
  rep.R1sq = phi_max;
  rep.T0_weight = 2.0 * std::sqrt(phi_max);
  rep.T0_transit = grid.transit_time();

  const double a5max = sup_abs(coeffs.a5);
  rep.c1_cap_noise = (a5max > 0.0) ? std::min(1.0, 1.0 / (16.0 * std::pow(a5max, 4))) : 1.0;

  rep.items[0].slack = quarter_min - rep.R1sq;
  rep.items[0].holds = rep.items[0].slack >= 0.0 && rep.R1sq >= rep.R0sq;

  rep.items[1].slack = cfg.T - rep.T0_transit;
  rep.items[1].holds = rep.items[1].slack > 0.0;

  const double lo = (rep.T0_transit / cfg.T) * (rep.T0_transit / cfg.T);
  const double hi = std::min(rep.T0_transit / cfg.T, rep.c1_cap_noise);
  rep.items[2].slack = std::min(cfg.c1 - lo, hi - cfg.c1);
  rep.items[2].holds = rep.items[2].slack > 0.0;

  rep.items[3].slack = cfg.mu0 - 4.0 * cfg.c1 - cfg.c0 - std::pow(rep.R1sq, 0.25);
  rep.items[3].holds = rep.items[3].slack > 0.0;

  rep.holds = rep.items[0].holds && rep.items[1].holds && rep.items[2].holds && rep.items[3].holds;
  return rep;
}

ConstantSearch find_condition2_constants(const Grid& grid, const CarlemanConfig& cfg,
                                         const CoefficientSet& coeffs) {
  ConstantSearch out;
  CarlemanConfig probe = cfg;
  probe.c0 = probe.c1 = 0.0;
  const Condition2Report base = check_condition2(grid, probe, coeffs);

  const double lo = (base.T0_transit / cfg.T) * (base.T0_transit / cfg.T);
  const double hi = std::min(base.T0_transit / cfg.T, base.c1_cap_noise);
  if (!(hi > lo)) return out;

  const double root_r1 = std::pow(base.R1sq, 0.25);
  const int n = 400;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 1; i < n; ++i) {
    const double c1 = lo + (hi - lo) * i / n;
    const double c0_hi = std::min(c1, cfg.mu0 - 4.0 * c1 - root_r1);
    if (c0_hi <= 0.0) continue;
    for (int j = 1; j < n; ++j) {
      const double c0 = c0_hi * j / n;
      const double s3 = std::min(c1 - lo, hi - c1);
      const double s4 = cfg.mu0 - 4.0 * c1 - c0 - root_r1;
      const double score = std::min(std::min(s3, s4), std::min(c0, c1 - c0));
      if (score > best_score) {
        best_score = score;
        out.c0 = c0;
        out.c1 = c1;
      }
    }
  }
  if (best_score <= 0.0) return out;

  probe.c0 = out.c0;
  probe.c1 = out.c1;
  const Condition2Report final_rep = check_condition2(grid, probe, coeffs);
  out.ok = final_rep.holds;
  out.min_slack = std::numeric_limits<double>::infinity();
  for (const auto& item : final_rep.items) out.min_slack = std::min(out.min_slack, item.slack);
  return out;
}

BoundarySpec compute_gamma0(const Grid& grid, const CarlemanConfig& cfg) {
  BoundarySpec spec;
  spec.left = grid.a_node(0) * cfg.phi_x(0.0) * (-1.0) > 0.0;
  spec.right = grid.a_node(grid.points() + 1) * cfg.phi_x(grid.length()) > 0.0;
  return spec;
}

WeightTables weight_fields(const Grid& grid, const CarlemanConfig& cfg, int time_levels) {
  const int M = grid.points();
  const int nt = time_levels;
  const double dt = cfg.T / nt;
  const double lam = cfg.lambda;

  WeightTables t;
  t.times.resize(static_cast<std::size_t>(nt) + 1);
  for (int n = 0; n <= nt; ++n) t.times[static_cast<std::size_t>(n)] = n * dt;
  t.xs.resize(static_cast<std::size_t>(M) + 2);
  for (int i = 0; i <= M + 1; ++i) t.xs[static_cast<std::size_t>(i)] = grid.x(i);

  std::vector<double> a(static_cast<std::size_t>(M) + 2);
  for (int i = 0; i <= M + 1; ++i) a[static_cast<std::size_t>(i)] = grid.a_node(i);
  const std::vector<double> da = fd_derivative(a, grid.dx());

  // spatial (time-independent) columns
  std::vector<double> psi_col(static_cast<std::size_t>(M) + 2);
  std::vector<double> c11_col(static_cast<std::size_t>(M) + 2);
  std::vector<double> aphi2(static_cast<std::size_t>(M) + 2);   // a phi'^2
  std::vector<double> daphi(static_cast<std::size_t>(M) + 2);   // (a phi')'
  std::vector<double> dA_col(static_cast<std::size_t>(M) + 2);  // d/dx of the spatial part of A
  for (int i = 0; i <= M + 1; ++i) {
    const std::size_t s = static_cast<std::size_t>(i);
    const double x = grid.x(i);
    const double px = cfg.phi_x(x);
    daphi[s] = da[s] * px + a[s] * cfg.phi_xx();
    aphi2[s] = a[s] * px * px;
    psi_col[s] = lam * (-2.0 * cfg.c1 + daphi[s] - cfg.c0);
    c11_col[s] = 2.0 * a[s] * cfg.ell_tt() + lam * (2.0 * a[s] * daphi[s] - da[s] * a[s] * px) -
                 a[s] * cfg.c0 * lam;
    dA_col[s] = -lam * lam * (da[s] * px * px + 2.0 * a[s] * px * cfg.phi_xx());
  }
  const std::vector<double> psi_x = fd_derivative(psi_col, grid.dx());
  std::vector<double> a_psi_x(static_cast<std::size_t>(M) + 2);
  for (int i = 0; i <= M + 1; ++i)
    a_psi_x[static_cast<std::size_t>(i)] =
        a[static_cast<std::size_t>(i)] * psi_x[static_cast<std::size_t>(i)];
  const std::vector<double> div_a_psi_x = fd_derivative(a_psi_x, grid.dx());

  t.ell.resize(nt + 1, M + 2);
  t.theta.resize(nt + 1, M + 2);
  t.psi.resize(nt + 1, M + 2);
  t.A_field.resize(nt + 1, M + 2);
  t.B_field.resize(nt + 1, M + 2);
  t.c11.resize(nt + 1, M + 2);

  for (int n = 0; n <= nt; ++n) {
    const double tm = n * dt;
    const double two_t_T = 2.0 * tm - cfg.T;
    for (int i = 0; i <= M + 1; ++i) {
      const std::size_t s = static_cast<std::size_t>(i);
      const double x = grid.x(i);
      t.ell(n, i) = cfg.ell(tm, x);
      t.theta(n, i) = cfg.theta(tm, x);
      t.psi(n, i) = psi_col[s];
      const double A = lam * lam * (cfg.c1 * cfg.c1 * two_t_T * two_t_T - aphi2[s]) +
                       4.0 * cfg.c1 * lam + cfg.c0 * lam;
      t.A_field(n, i) = A;
      t.c11(n, i) = c11_col[s];
      // B = A Psi + (A ell_t)_t - (A a ell_x)_x + (Psi_tt - (a Psi_x)_x)/2 with
      // (A ell_t)_t = -4 lam^3 c1^3 (2t-T)^2 + A ell_tt and
      // (A a ell_x)_x = A_x (a lam phi') + A lam (a phi')'.
      const double At_ellt =
          -4.0 * std::pow(lam * cfg.c1, 3) * two_t_T * two_t_T + A * cfg.ell_tt();
      const double div_A_a_ellx =
          dA_col[s] * lam * a[s] * cfg.phi_x(x) + A * lam * daphi[s];
      t.B_field(n, i) = A * psi_col[s] + At_ellt - div_A_a_ellx - 0.5 * div_a_psi_x[s];
    }
  }
  return t;
}

void write_weight_csv(std::ostream& os, const WeightTables& tables) {
  os << "t,x,ell,theta,Psi,A,B,c11\n";
  for (int n = 0; n < static_cast<int>(tables.times.size()); ++n) {
    for (int i = 0; i < static_cast<int>(tables.xs.size()); ++i) {
      os << tables.times[static_cast<std::size_t>(n)] << ','
         << tables.xs[static_cast<std::size_t>(i)] << ',' << tables.ell(n, i) << ','
         << tables.theta(n, i) << ',' << tables.psi(n, i) << ',' << tables.A_field(n, i) << ','
         << tables.B_field(n, i) << ',' << tables.c11(n, i) << '\n';
    }
  }
}

WindowReport find_windows(const Grid& grid, const CarlemanConfig& cfg, int time_levels) {
  const int M = grid.points();
  const int nt = time_levels;
  const double dt = cfg.T / nt;
  WindowReport rep;

  double phi_min = std::numeric_limits<double>::infinity();
  for (int i = 1; i <= M; ++i) phi_min = std::min(phi_min, cfg.phi(grid.x(i)));
  const double R0sq = phi_min;

  rep.ends_negative = true;
  for (int i = 1; i <= M; ++i)
    if (cfg.ell(0.0, grid.x(i)) >= 0.0) rep.ends_negative = false;

  auto in_lambda = [&](int level_set, double tm, double x) {
    const double s = tm - 0.5 * cfg.T;
    return cfg.phi(x) - cfg.c1 * s * s > R0sq / (2.0 * (level_set + 2));
  };

  // largest eps1 < 1/2 with: Lambda_2 inside the (T1, T1') slab, and
  // ell < 0 on the grid outside [T1, T1'].
  bool found1 = false;
  double eps1 = 0.0;
  for (int step = 4999; step >= 1; --step) {
    const double e = step * 1e-4;
    const double T1 = 0.5 * cfg.T - e * cfg.T;
    const double T1p = 0.5 * cfg.T + e * cfg.T;
    bool ok = true;
    for (int n = 0; n <= nt && ok; ++n) {
      const double tm = n * dt;
      const bool inside = (tm > T1 && tm < T1p);
      for (int i = 1; i <= M && ok; ++i) {
        const double x = grid.x(i);
        if (!inside && in_lambda(2, tm, x)) ok = false;
        if (!inside && cfg.ell(tm, x) >= 0.0) ok = false;
      }
    }
    if (ok) {
      found1 = true;
      eps1 = e;
      break;
    }
  }

  bool found0 = false;
  double eps0 = 0.0;
  for (int step = 4999; step >= 1; --step) {
    const double e = step * 1e-4;
    const double T0 = 0.5 * cfg.T - e * cfg.T;
    const double T0p = 0.5 * cfg.T + e * cfg.T;
    bool ok = true;
    for (int n = 0; n <= nt && ok; ++n) {
      const double tm = n * dt;
      if (tm <= T0 || tm >= T0p) continue;
      for (int i = 1; i <= M && ok; ++i)
        if (!in_lambda(0, tm, grid.x(i))) ok = false;
    }
    if (ok) {
      found0 = true;
      eps0 = e;
      break;
    }
  }

  rep.eps0 = eps0;
  rep.eps1 = eps1;
  rep.ok = found0 && found1 && rep.ends_negative;
  return rep;
}

namespace {

// dense tabulation on a grid extended by `margin` ghost nodes/levels per side
struct Table {
  int K, M, margin;
  double dt, dx;
  Eigen::MatrixXd data;  // (K+1+2*margin) x (M+2+2*margin)

  Table(int K_, int M_, int margin_, double dt_, double dx_)
      : K(K_), M(M_), margin(margin_), dt(dt_), dx(dx_),
        data(Eigen::MatrixXd::Zero(K + 1 + 2 * margin, M + 2 + 2 * margin)) {}

  double& at(int n, int i) { return data(n + margin, i + margin); }
  double at(int n, int i) const { return data(n + margin, i + margin); }
};

}  // namespace

double identity_residual_norm(const CarlemanConfig& cfg,
                              const std::function<double(double)>& a,
                              const std::function<double(double, double)>& v,
                              double L, int interior_points, int time_steps) {
  const int M = interior_points;
  const int K = time_steps;
  const double dx = L / (M + 1);
  const double dt = cfg.T / K;
  const double lam = cfg.lambda;
  const int mg = 2;

  auto x_of = [&](int i) { return i * dx; };
  auto t_of = [&](int n) { return n * dt; };

  Table vt(K, M, mg, dt, dx), zt(K, M, mg, dt, dx), theta(K, M, mg, dt, dx);
  for (int n = -mg; n <= K + mg; ++n)
    for (int i = -mg; i <= M + 1 + mg; ++i) {
      const double tm = t_of(n), x = x_of(i);
      vt.at(n, i) = v(tm, x);
      theta.at(n, i) = cfg.theta(tm, x);
      zt.at(n, i) = vt.at(n, i) / theta.at(n, i);
    }

  // first derivatives of v and the wave operator of z, on the margin-1 set
  Table vhat(K, M, mg, dt, dx), vx(K, M, mg, dt, dx), wave_z(K, M, mg, dt, dx);
  for (int n = -mg + 1; n <= K + mg - 1; ++n)
    for (int i = -mg + 1; i <= M + mg; ++i) {
      vhat.at(n, i) = (vt.at(n + 1, i) - vt.at(n - 1, i)) / (2.0 * dt);
      vx.at(n, i) = (vt.at(n, i + 1) - vt.at(n, i - 1)) / (2.0 * dx);
      const double ztt = (zt.at(n + 1, i) - 2.0 * zt.at(n, i) + zt.at(n - 1, i)) / (dt * dt);
      const double ap = 0.5 * (a(x_of(i)) + a(x_of(i + 1)));
      const double am = 0.5 * (a(x_of(i)) + a(x_of(i - 1)));
      const double div_a_grad =
          (ap * (zt.at(n, i + 1) - zt.at(n, i)) - am * (zt.at(n, i) - zt.at(n, i - 1))) /
          (dx * dx);
      wave_z.at(n, i) = ztt - div_a_grad;
    }

  // pointwise weight coefficients; a-derivatives by centered differences
  auto a_x = [&](double x) { return (a(x + dx) - a(x - dx)) / (2.0 * dx); };
  auto daphi = [&](double x) { return a_x(x) * cfg.phi_x(x) + a(x) * cfg.phi_xx(); };
  auto psi_f = [&](double x) { return lam * (-2.0 * cfg.c1 + daphi(x) - cfg.c0); };
  auto A_f = [&](double tm, double x) {
    const double two_t_T = 2.0 * tm - cfg.T;
    const double px = cfg.phi_x(x);
    return lam * lam * (cfg.c1 * cfg.c1 * two_t_T * two_t_T - a(x) * px * px) +
           4.0 * cfg.c1 * lam + cfg.c0 * lam;
  };
  auto c11_f = [&](double x) {
    const double px = cfg.phi_x(x);
    return 2.0 * a(x) * cfg.ell_tt() + lam * (2.0 * a(x) * daphi(x) - a_x(x) * a(x) * px) -
           a(x) * cfg.c0 * lam;
  };
  auto B_f = [&](double tm, double x) {
    const double two_t_T = 2.0 * tm - cfg.T;
    const double px = cfg.phi_x(x);
    const double A = A_f(tm, x);
    const double A_x = -lam * lam * (a_x(x) * px * px + 2.0 * a(x) * px * cfg.phi_xx());
    const double psi_xx_part =
        (a(x + dx) * (psi_f(x + 2.0 * dx) - psi_f(x)) / (2.0 * dx) -
         a(x - dx) * (psi_f(x) - psi_f(x - 2.0 * dx)) / (2.0 * dx)) /
        (2.0 * dx);  // (a Psi_x)_x by nested centered differences
    return A * psi_f(x) - 4.0 * std::pow(lam * cfg.c1, 3) * two_t_T * two_t_T +
           A * cfg.ell_tt() - (A_x * a(x) * lam * px + A * lam * daphi(x)) - 0.5 * psi_xx_part;
  };

  // flux fields M (space) and N (time), then the residual on the closure
  Table Mf(K, M, mg, dt, dx), Nf(K, M, mg, dt, dx);
  for (int n = -mg + 1; n <= K + mg - 1; ++n)
    for (int i = -mg + 1; i <= M + mg; ++i) {
      const double tm = t_of(n), x = x_of(i);
      const double lt = cfg.ell_t(tm);
      const double lx = lam * cfg.phi_x(x);
      const double aa = a(x);
      const double psi = psi_f(x);
      const double A = A_f(tm, x);
      const double vv = vt.at(n, i), vh = vhat.at(n, i), vxx = vx.at(n, i);
      const double psi_x = (psi_f(x + dx) - psi_f(x - dx)) / (2.0 * dx);
      Mf.at(n, i) = aa * aa * lx * vxx * vxx - 2.0 * lt * aa * vxx * vh + aa * lx * vh * vh +
                    psi * aa * vxx * vv - 0.5 * psi_x * aa * vv * vv - A * aa * lx * vv * vv;
      Nf.at(n, i) = lt * aa * vxx * vxx + lt * vh * vh - 2.0 * aa * lx * vxx * vh -
                    psi * vv * vh + A * lt * vv * vv;
    }

  double acc = 0.0;
  for (int n = 0; n <= K; ++n) {
    const double wn = (n == 0 || n == K) ? 0.5 : 1.0;
    for (int i = 0; i <= M + 1; ++i) {
      const double wi = (i == 0 || i == M + 1) ? 0.5 : 1.0;
      const double tm = t_of(n), x = x_of(i);
      const double lt = cfg.ell_t(tm);
      const double lx = lam * cfg.phi_x(x);
      const double aa = a(x);
      const double psi = psi_f(x);
      const double vv = vt.at(n, i), vh = vhat.at(n, i), vxx = vx.at(n, i);

      const double mult = -2.0 * lt * vh + 2.0 * aa * lx * vxx + psi * vv;
      const double P = theta.at(n, i) * mult * wave_z.at(n, i);
      const double Mx = (Mf.at(n, i + 1) - Mf.at(n, i - 1)) / (2.0 * dx);
      const double Nt = (Nf.at(n + 1, i) - Nf.at(n - 1, i)) / (2.0 * dt);
      const double R = cfg.c0 * lam * vh * vh + c11_f(x) * vxx * vxx + B_f(tm, x) * vv * vv +
                       mult * mult;
      const double r = P + Mx + Nt - R;
      acc += wn * wi * r * r;
    }
  }
  return std::sqrt(acc * dx * dt);
}

IdentityResidualReport identity_residual(const CarlemanConfig& cfg,
                                         const std::function<double(double)>& a,
                                         const std::function<double(double, double)>& v,
                                         double L,
                                         const std::vector<int>& interior_resolutions) {
  IdentityResidualReport rep;
  for (int M : interior_resolutions) {
    const double dx = L / (M + 1);
    const int K = static_cast<int>(std::lround(cfg.T / dx));
    rep.residuals.push_back(identity_residual_norm(cfg, a, v, L, M, K));
  }
  rep.order_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < rep.residuals.size(); ++i) {
    const double order = std::log2(rep.residuals[i] / rep.residuals[i + 1]);
    rep.orders.push_back(order);
    rep.order_min = std::min(rep.order_min, order);
  }
  if (rep.orders.empty()) rep.order_min = 0.0;
  return rep;
}

}  // namespace swave
