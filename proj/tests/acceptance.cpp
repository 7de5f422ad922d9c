// Acceptance suite: one criterion per invocation (argv[1] = 1..9), printing a
// PASS/FAIL line per criterion.  Exit code 0 iff the criterion passed.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "fibrehom/dense_oracle.hpp"
#include "fibrehom/study.hpp"

using namespace fibrehom;

namespace {

constexpr double kJ11 = 3.8317059702075123;  // first zero of J_1

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

bool check(bool ok, const char* what) {
  std::printf("  %-4s %s\n", ok ? "ok" : "BAD", what);
  return ok;
}

CoefficientProfile study_profile() {
  return CoefficientProfile::piecewise({1.0, 4.0}, {0.0, 0.5});
}

// 1. Exact-constant end-to-end test: f = 1, theta = 0: u = 1, z = (1, 0).
bool criterion1() {
  bool ok = true;
  auto prof = study_profile();
  StudyContext ctx(0.25, 0.05, 16, prof);
  VecXc f = VecXc::Ones(ctx.cell.n());
  for (double eps : {0.5, 0.17, 0.05}) {
    VecXc u = solve_epsilon_resolvent(ctx.cell, eps, Vec3::Zero(), f);
    ok &= check((u - f).cwiseAbs().maxCoeff() <= 1e-10, "u identically one");

    const KronForm mass = ctx.cell.mass();
    const VecXc w = mass.apply(f);
    VecXc s2(ctx.cell.n2());
    for (Index d = 0; d < ctx.cell.n2(); ++d)
      s2[d] = w.segment(d * ctx.cell.n1(), ctx.cell.n1()).sum();
    const LimitElement z = solve_limit_resolvent(Xi(Vec3::Zero()), ctx.op.restrict_load(s2),
                                                 ctx.hc, ctx.op);
    ok &= check(std::abs(z.z0 - Complex(1.0, 0.0)) <= 1e-10, "z0 = 1");
    ok &= check(z.z1.cwiseAbs().maxCoeff() <= 1e-10, "z1 = 0");

    const double err = detail::resolvent_error(ctx, eps, Vec3::Zero(), f);
    ok &= check(err <= 1e-10, "|| u - E*(z0+z1) || below 1e-10");
  }
  return ok;
}

// 2. Eigenvalue rate: fixed-xi study at r=0.25, h=0.02, n3=64.
bool criterion2() {
  StudyConfig cfg;
  cfg.r = 0.25;
  cfg.h = 0.02;
  cfg.n3 = 64;
  cfg.profile = study_profile();
  cfg.eps = {0.4, 0.2, 0.1, 0.05};
  cfg.xi = {Vec3(0, 0, 1), Vec3(1, 0, 0), Vec3(1, 1, 2)};
  cfg.k = 3;
  auto res = eigenvalue_convergence_study(cfg);

  bool ok = true;
  for (const auto& f : res.fits) {
    double emax = 0.0, emin = 1e300;
    for (const auto& row : res.rows)
      if (row.xi == f.xi && row.k == f.k) {
        emax = std::max(emax, row.abs_err() / row.eps);
        emin = std::min(emin, row.abs_err() / row.eps);
      }
    const double ratio = emax / emin;
    char line[256];
    std::snprintf(line, sizeof line,
                  "xi=(%g,%g,%g) k=%lld slope=%.3f err/eps ratio=%.2f cluster_end=%lld %s",
                  f.xi[0], f.xi[1], f.xi[2], static_cast<long long>(f.k), f.fit.slope, ratio,
                  static_cast<long long>(f.cluster_end),
                  f.trusted ? "[trusted]" : "[untrusted]");
    if (f.trusted)
      ok &= check(f.fit.slope >= 0.9 && ratio <= 5.0, line);
    else
      std::printf("  --   %s (excluded: discretisation drift over 10%%)\n", line);
  }
  bool any_trusted = false;
  for (const auto& f : res.fits) any_trusted |= f.trusted;
  ok &= check(any_trusted, "at least one series passed the h -> h/2 stability check");
  return ok;
}

// 3. Resolvent rate: fixed-xi study with the three canonical loads.
bool criterion3() {
  StudyConfig cfg;
  cfg.r = 0.25;
  cfg.h = 0.02;
  cfg.n3 = 64;
  cfg.profile = study_profile();
  cfg.eps = {0.4, 0.2, 0.1, 0.05};
  cfg.xi = {Vec3(0, 0, 1)};
  cfg.f_tags = {"expy3", "fibrebump", "matrixbump"};
  auto res = resolvent_convergence_study(cfg);

  bool ok = true;
  for (const auto& f : res.fits) {
    char line[256];
    std::snprintf(line, sizeof line, "xi=(%g,%g,%g) f=%s slope=%.3f %s", f.xi[0], f.xi[1],
                  f.xi[2], f.ftag.c_str(), f.fit.slope, f.trusted ? "[trusted]" : "[untrusted]");
    if (f.trusted)
      ok &= check(f.fit.slope >= 0.9, line);
    else
      std::printf("  --   %s (excluded: discretisation drift over 10%%)\n", line);
  }
  bool any_trusted = false;
  for (const auto& f : res.fits) any_trusted |= f.trusted;
  ok &= check(any_trusted, "at least one series passed the h -> h/2 stability check");
  return ok;
}

// 4. Oracle equivalence on tiny meshes for 5 random (eps, theta).
bool criterion4() {
  auto prof = study_profile();
  auto m2 = build_cross_section_mesh(0.25, 0.125);
  auto m1 = build_interval_mesh(4, prof);
  CellForms cell(m2, m1, prof);
  std::printf("  oracle dimension n = %lld\n", static_cast<long long>(cell.n()));

  std::mt19937_64 rng(20260808);
  std::uniform_real_distribution<double> ueps(0.2, 0.9);
  std::uniform_real_distribution<double> uth(-kPi, kPi * 0.999);
  std::normal_distribution<double> dist;
  bool ok = true;
  for (int trial = 0; trial < 5; ++trial) {
    const double eps = ueps(rng);
    const Vec3 theta(uth(rng), uth(rng), uth(rng));
    auto [k, m] = compose_pencil(eps, theta, cell);
    auto [kd, md] = dense_oracle_form(eps, theta, m2, m1, prof);

    VecXc x(cell.n());
    for (Index i = 0; i < x.size(); ++i) x[i] = Complex(dist(rng), dist(rng));
    const double kerr = (k.apply(x) - kd * x).norm() / (kd * x).norm();
    const double merr = (m.apply(x) - md * x).norm() / (md * x).norm();

    auto dense = dense_eigs(kd, md);
    EigOptions opts;
    opts.k = 10;
    opts.tol = 1e-9;
    opts.seed = 777 + static_cast<std::uint64_t>(trial);
    auto tp = TensorPreconditioner::for_pencil(cell, eps, theta);
    auto precond = tp.as_linop();
    auto it = smallest_eigs(LinOp::from(k), LinOp::from(m), opts, &precond);
    double eig_err = 0.0;
    for (Index i = 0; i < 10; ++i)
      eig_err = std::max(eig_err, std::abs(it.eigenvalues[i] - dense.values[i]) /
                                      std::max(1.0, std::abs(dense.values[i])));
    char line[160];
    std::snprintf(line, sizeof line,
                  "eps=%.3f theta=(%.2f,%.2f,%.2f): matvec %.1e (<=1e-12), eigs %.1e (<=1e-9)",
                  eps, theta[0], theta[1], theta[2], std::max(kerr, merr), eig_err);
    ok &= check(kerr <= 1e-12 && merr <= 1e-12 && eig_err <= 1e-9, line);
  }
  return ok;
}

// 5. Homogenised coefficients.
bool criterion5() {
  bool ok = true;
  auto prof = study_profile();
  {
    auto m = build_cross_section_mesh(0.25, 0.02);
    auto hc = homogenize(m, prof);
    ok &= check(std::abs(hc.Ah(2, 2) - (1.0 - m.fibre_area())) <= 1e-12,
                "Ah33 equals 1 - polygonal disk area to 1e-12");
    ok &= check(std::abs(hc.Ah(0, 0) - hc.Ah(1, 1)) <= 1e-8, "Ah11 = Ah22 on the symmetric mesh");
    ok &= check(std::abs(hc.Ah(0, 1)) <= 1e-8, "|Ah12| <= 1e-8");
    ok &= check(std::abs(hc.ah - 1.6) <= 1e-12, "ah for values (1,4) on halves is 1.6");
  }
  {
    auto m = build_cross_section_mesh(0.1, 0.0125);
    auto hc = homogenize(m, CoefficientProfile::constant(1.0));
    const double f = kPi * 0.01;
    const double cm = (1.0 - f) / (1.0 + f);
    char line[128];
    std::snprintf(line, sizeof line, "dilute r=0.1: |Ah11 - %.6f| = %.2e (<= 1e-2)", cm,
                  std::abs(hc.Ah(0, 0) - cm));
    ok &= check(std::abs(hc.Ah(0, 0) - cm) <= 1e-2, line);
  }
  return ok;
}

// 6. Limit-operator spectrum at xi = 0.
bool criterion6() {
  bool ok = true;
  auto prof = study_profile();
  const double target = (kJ11 / 0.25) * (kJ11 / 0.25);

  auto closest = [](const SpectralResult& r, double t) {
    double best = 1e300;
    for (Index i = 0; i < r.eigenvalues.size(); ++i)
      best = std::min(best, std::abs(r.eigenvalues[i] - t));
    return best;
  };

  StudyContext coarse(0.25, 0.02, 8, prof);
  StudyContext fine(0.25, 0.01, 8, prof);
  auto b_coarse = limit_bands(Xi(Vec3::Zero()), 12, coarse.hc, coarse.op);
  auto b_fine = limit_bands(Xi(Vec3::Zero()), 16, fine.hc, fine.op);

  ok &= check(std::abs(b_coarse.eigenvalues[0]) <= 2e-8, "Lambda1(0) = 0 within 2 tol");

  const double e_coarse = closest(b_coarse, target);
  const double e_fine = closest(b_fine, target);
  char line[160];
  std::snprintf(line, sizeof line,
                "(j11/r)^2 = %.4f: rel err %.2e at h=0.02 (<= 1e-2), improvement x%.1f (>= 3)",
                target, e_coarse / target, e_coarse / e_fine);
  ok &= check(e_coarse / target <= 1e-2 && e_coarse / e_fine >= 3.0, line);

  auto oracle = radial_oracle(0.0, 0.25, coarse.hc, 3, 10001);
  ok &= check(std::abs(oracle[0]) <= 1e-6, "radial oracle reproduces Lambda1(0) = 0");
  ok &= check(closest(b_coarse, oracle[1]) <= 0.01 * std::max(1.0, oracle[1]),
              "first nonzero radial value matches within 1% at h=0.02");
  ok &= check(closest(b_fine, oracle[2]) <= 0.01 * std::max(1.0, oracle[2]),
              "second nonzero radial value matches within 1% at h=0.01");
  return ok;
}

// 7. Bloch consistency checks.
bool criterion7() {
  bool ok = true;
  const Vec2 theta_p(0.3, 0.0);
  auto lowest = [&](double h, Index band) {
    auto mesh = build_cross_section_mesh(0.25, h);
    auto ks = bloch_stiffness_2d(mesh, theta_p, Region::All);
    auto ms = mass_2d(mesh, Region::All);
    EigOptions opts;
    opts.k = band;
    opts.tol = 1e-10;
    auto r = shift_invert_eigs(ks.matrix(), ms.matrix(), opts);
    return r.eigenvalues[band - 1];
  };
  const double e1 = std::abs(lowest(0.05, 1) - 0.09);
  const double e2 = std::abs(lowest(0.025, 1) - 0.09);
  char line[200];
  std::snprintf(line, sizeof line,
                "lowest band at theta'=(0.3,0): errors %.2e -> %.2e vs 0.09", e1, e2);
  // the constant mode represents the minimiser exactly, so both errors sit at
  // the machine floor; the O(h^2) ratio is demonstrated on the second band,
  // whose eigenfunction the P1 space cannot represent
  const bool at_floor = e1 <= 1e-11 && e2 <= 1e-11;
  ok &= check(at_floor || e2 < e1, line);
  if (at_floor) std::printf("  note  lowest band exact at machine precision for every h\n");

  const double exact2 = (0.3 - 2.0 * kPi) * (0.3 - 2.0 * kPi);
  const double s1 = std::abs(lowest(0.05, 2) - exact2);
  const double s2 = std::abs(lowest(0.025, 2) - exact2);
  std::snprintf(line, sizeof line, "second band errors %.3e -> %.3e, ratio %.2f (>= 3)", s1, s2,
                s1 / s2);
  ok &= check(s1 / s2 >= 3.0, line);

  {
    auto prof = study_profile();
    auto mesh = build_interval_mesh(64, prof);
    const double theta3 = 0.01;
    auto k = bloch_stiffness_1d(mesh, theta3, &prof);
    auto eig = dense_eigs(k.dense(), mass_1d(mesh).dense());
    const double ratio = eig.values[0] / (theta3 * theta3);
    std::snprintf(line, sizeof line, "1D small-theta ratio %.6f vs ah=1.6 (within 1%%)", ratio);
    ok &= check(std::abs(ratio - 1.6) <= 0.016, line);
  }
  return ok;
}

// 8. Gap scans over the 5x5x5 quasimomentum grid.
bool criterion8() {
  StudyConfig cfg;
  cfg.r = 0.25;
  cfg.profile = study_profile();
  cfg.grid = 5;
  cfg.n3 = 16;

  cfg.h = 0.1;
  auto coarse = gap_scan(cfg);
  cfg.h = 0.05;
  auto fine = gap_scan(cfg);

  bool ok = true;
  char line[200];
  std::snprintf(line, sizeof line, "min gamma  = %.6f -> %.6f (drift %.2f%%)",
                coarse.min_gamma(), fine.min_gamma(),
                100.0 * std::abs(coarse.min_gamma() - fine.min_gamma()) / coarse.min_gamma());
  ok &= check(coarse.min_gamma() > 0.0 && fine.min_gamma() > 0.0 &&
                  std::abs(coarse.min_gamma() - fine.min_gamma()) < 0.05 * coarse.min_gamma(),
              line);
  std::snprintf(line, sizeof line, "min gamma* = %.6f -> %.6f (drift %.2f%%)",
                coarse.min_gamma_star(), fine.min_gamma_star(),
                100.0 * std::abs(coarse.min_gamma_star() - fine.min_gamma_star()) /
                    coarse.min_gamma_star());
  ok &= check(coarse.min_gamma_star() > 0.0 && fine.min_gamma_star() > 0.0 &&
                  std::abs(coarse.min_gamma_star() - fine.min_gamma_star()) <
                      0.05 * coarse.min_gamma_star(),
              line);
  return ok;
}

// 9. Determinism: identical configs produce byte-identical CSV.
bool criterion9() {
  const char* cfg_text =
      "[geometry] r=0.25 h=0.1\n[axial] n3=8\n"
      "[coefficient] kind=piecewise values=1,4 breakpoints=0,0.5\n"
      "[sweep] eps=0.4,0.2,0.1 xi=0,0,1 mode=fixed-xi f=expy3\n[solver] tol=1e-8 k=2\n";
  bool ok = true;
  {
    std::stringstream s1(cfg_text), s2(cfg_text);
    std::stringstream c1, c2;
    write_csv(eigenvalue_convergence_study(parse_config(s1)).to_table(), c1);
    write_csv(eigenvalue_convergence_study(parse_config(s2)).to_table(), c2);
    ok &= check(c1.str() == c2.str(), "eigenvalue study CSV byte-identical across runs");
  }
  {
    std::stringstream s1(cfg_text), s2(cfg_text);
    std::stringstream c1, c2;
    write_csv(resolvent_convergence_study(parse_config(s1)).to_table(), c1);
    write_csv(resolvent_convergence_study(parse_config(s2)).to_table(), c2);
    ok &= check(c1.str() == c2.str(), "resolvent study CSV byte-identical across runs");
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <criterion 1..9>\n");
    return 2;
  }
  const int which = std::atoi(argv[1]);
  static const struct {
    int id;
    const char* name;
    bool (*run)();
  } criteria[] = {
      {1, "exact-constant end-to-end resolvent", criterion1},
      {2, "eigenvalue convergence rate O(eps)", criterion2},
      {3, "resolvent convergence rate O(eps)", criterion3},
      {4, "Kronecker pencil vs dense oracle", criterion4},
      {5, "homogenised coefficients", criterion5},
      {6, "limit-operator spectrum", criterion6},
      {7, "Bloch consistency", criterion7},
      {8, "gap scans positive and stable", criterion8},
      {9, "deterministic study output", criterion9},
  };
  for (const auto& c : criteria) {
    if (c.id != which) continue;
    Timer t;
    bool ok = false;
    try {
      ok = c.run();
    } catch (const std::exception& e) {
      std::printf("  BAD  exception: %s\n", e.what());
      ok = false;
    }
    std::printf("%s criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", c.id, c.name,
                t.seconds());
    return ok ? 0 : 1;
  }
  std::fprintf(stderr, "unknown criterion %d\n", which);
  return 2;
}
