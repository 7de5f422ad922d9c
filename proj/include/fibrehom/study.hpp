#pragma once

#include <atomic>
#include <cstdio>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "fibrehom/bloch.hpp"
#include "fibrehom/radial.hpp"

namespace fibrehom {

// ---------------------------------------------------------------- config ---

struct StudyConfig {
  Real r = 0.25;
  Real h = 0.02;
  Index n3 = 64;
  CoefficientProfile profile = CoefficientProfile::constant(1.0);
  std::vector<Real> eps;
  enum class Mode { FixedXi, FixedTheta } mode = Mode::FixedXi;
  std::vector<Vec3> xi;
  std::vector<Vec3> theta;
  std::vector<std::string> f_tags;
  Index k = 3;
  Real tol = 1e-8;
  int max_iter = 2000;
  std::uint64_t seed = 0x5eedf1b5u;
  Index grid = 5;

  void validate_eps_decreasing() const {
    for (std::size_t i = 0; i + 1 < eps.size(); ++i)
      if (!(eps[i] > eps[i + 1]))
        throw ParameterError("config: eps values must be strictly decreasing");
    for (Real e : eps)
      if (!(e > 0.0 && e < 1.0)) throw ParameterError("config: eps values must lie in (0,1)");
  }

  void validate_fixed_xi_thetas() const {
    for (const Vec3& x : xi)
      for (Real e : eps)
        if (!in_dual_cell(Vec3(e * x)))
          throw ParameterError("config: theta = eps*xi leaves the dual cell");
  }
};

namespace detail {

inline std::vector<Real> parse_real_list(const std::string& s) {
  std::vector<Real> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

inline std::vector<Vec3> parse_vec3_list(const std::string& s) {
  std::vector<Vec3> out;
  std::stringstream ss(s);
  std::string group;
  while (std::getline(ss, group, ';')) {
    auto v = parse_real_list(group);
    if (v.size() != 3) throw ParameterError("config: expected a triple, got '" + group + "'");
    out.emplace_back(v[0], v[1], v[2]);
  }
  return out;
}

inline std::vector<std::string> parse_string_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace detail

/// Line-oriented config: a line starts with a [section] tag followed by
/// key=value tokens; bare key=value lines extend the current section.  Keys
/// are case-sensitive and unknown keys are errors.
inline StudyConfig parse_config(std::istream& is) {
  StudyConfig cfg;
  std::string line, section;
  std::string coeff_kind = "constant";
  std::vector<Real> coeff_values{1.0};
  std::vector<Real> coeff_breaks{0.0};

  auto apply = [&](const std::string& sec, const std::string& key, const std::string& value) {
    if (sec == "geometry") {
      if (key == "r") cfg.r = std::stod(value);
      else if (key == "h") cfg.h = std::stod(value);
      else throw ParameterError("config: unknown key '" + key + "' in [geometry]");
    } else if (sec == "axial") {
      if (key == "n3") cfg.n3 = std::stoll(value);
      else throw ParameterError("config: unknown key '" + key + "' in [axial]");
    } else if (sec == "coefficient") {
      if (key == "kind") coeff_kind = value;
      else if (key == "values") coeff_values = detail::parse_real_list(value);
      else if (key == "breakpoints") coeff_breaks = detail::parse_real_list(value);
      else throw ParameterError("config: unknown key '" + key + "' in [coefficient]");
    } else if (sec == "sweep") {
      if (key == "eps") cfg.eps = detail::parse_real_list(value);
      else if (key == "xi") cfg.xi = detail::parse_vec3_list(value);
      else if (key == "theta") cfg.theta = detail::parse_vec3_list(value);
      else if (key == "f") cfg.f_tags = detail::parse_string_list(value);
      else if (key == "grid") cfg.grid = std::stoll(value);
      else if (key == "mode") {
        if (value == "fixed-xi") cfg.mode = StudyConfig::Mode::FixedXi;
        else if (value == "fixed-theta") cfg.mode = StudyConfig::Mode::FixedTheta;
        else throw ParameterError("config: unknown mode '" + value + "'");
      } else throw ParameterError("config: unknown key '" + key + "' in [sweep]");
    } else if (sec == "solver") {
      if (key == "tol") cfg.tol = std::stod(value);
      else if (key == "k") cfg.k = std::stoll(value);
      else if (key == "maxit") cfg.max_iter = std::stoi(value);
      else if (key == "seed") cfg.seed = std::stoull(value);
      else throw ParameterError("config: unknown key '" + key + "' in [solver]");
    } else {
      throw ParameterError("config: unknown section '[" + sec + "]'");
    }
  };

  while (std::getline(is, line)) {
    std::stringstream ls(line);
    std::string token;
    while (ls >> token) {
      if (token.front() == '#') break;  // comment to end of line
      if (token.front() == '[') {
        if (token.back() != ']') throw ParameterError("config: malformed section tag " + token);
        section = token.substr(1, token.size() - 2);
        continue;
      }
      auto eq = token.find('=');
      if (eq == std::string::npos)
        throw ParameterError("config: expected key=value, got '" + token + "'");
      if (section.empty()) throw ParameterError("config: key before any [section]");
      apply(section, token.substr(0, eq), token.substr(eq + 1));
    }
  }

  if (coeff_kind == "constant") {
    if (coeff_values.size() != 1)
      throw ParameterError("config: constant coefficient takes one value");
    cfg.profile = CoefficientProfile::constant(coeff_values[0]);
  } else if (coeff_kind == "piecewise") {
    cfg.profile = CoefficientProfile::piecewise(coeff_values, coeff_breaks);
  } else {
    throw ParameterError("config: unknown coefficient kind '" + coeff_kind + "'");
  }
  cfg.validate_eps_decreasing();
  if (cfg.mode == StudyConfig::Mode::FixedXi) cfg.validate_fixed_xi_thetas();
  return cfg;
}

// ----------------------------------------------------------------- tables ---

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  bool operator==(const Table& o) const { return columns == o.columns && rows == o.rows; }
};

inline std::string format_real(Real v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_csv(const Table& t, std::ostream& os) {
  if (t.columns.empty()) throw ParameterError("write_csv: empty table");
  for (std::size_t i = 0; i < t.columns.size(); ++i)
    os << t.columns[i] << (i + 1 < t.columns.size() ? "," : "\n");
  for (const auto& row : t.rows)
    for (std::size_t i = 0; i < row.size(); ++i)
      os << row[i] << (i + 1 < row.size() ? "," : "\n");
}

inline Table parse_csv(std::istream& is) {
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw IoError("parse_csv: empty input");
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.columns.push_back(cell);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream rs(line);
    while (std::getline(rs, cell, ',')) row.push_back(cell);
    t.rows.push_back(std::move(row));
  }
  return t;
}

/// Log-log line plot, one polyline per series.
struct PlotSeries {
  std::string name;
  std::vector<std::pair<Real, Real>> points;  // (eps, error), all positive
};

inline void write_svg_loglog(const std::vector<PlotSeries>& series, std::ostream& os) {
  if (series.empty()) throw ParameterError("write_svg_loglog: no series");
  Real xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!(x > 0.0 && y > 0.0)) continue;
      xmin = std::min(xmin, std::log10(x));
      xmax = std::max(xmax, std::log10(x));
      ymin = std::min(ymin, std::log10(y));
      ymax = std::max(ymax, std::log10(y));
    }
  if (!(xmin <= xmax && ymin <= ymax)) throw ParameterError("write_svg_loglog: no positive data");
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  const Real w = 640, hgt = 480, margin = 60;
  auto px = [&](Real lx) { return margin + (lx - xmin) / (xmax - xmin) * (w - 2 * margin); };
  auto py = [&](Real ly) { return hgt - margin - (ly - ymin) / (ymax - ymin) * (hgt - 2 * margin); };
  static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << hgt
     << "\" viewBox=\"0 0 " << w << " " << hgt << "\">\n";
  os << "  <rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << w - 2 * margin
     << "\" height=\"" << hgt - 2 * margin << "\" fill=\"none\" stroke=\"black\"/>\n";
  int ci = 0;
  Real legend_y = margin + 14;
  for (const auto& s : series) {
    const char* colour = colours[ci % 8];
    os << "  <polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.points)
      if (x > 0.0 && y > 0.0) os << px(std::log10(x)) << "," << py(std::log10(y)) << " ";
    os << "\"/>\n";
    os << "  <text x=\"" << w - margin - 200 << "\" y=\"" << legend_y << "\" fill=\"" << colour
       << "\" font-size=\"12\">" << s.name << "</text>\n";
    legend_y += 14;
    ++ci;
  }
  os << "  <text x=\"" << w / 2 << "\" y=\"" << hgt - 16
     << "\" font-size=\"12\" text-anchor=\"middle\">eps (log)</text>\n";
  os << "  <text x=\"16\" y=\"" << hgt / 2
     << "\" font-size=\"12\" transform=\"rotate(-90 16 " << hgt / 2
     << ")\" text-anchor=\"middle\">error (log)</text>\n";
  os << "</svg>\n";
}

// ------------------------------------------------------------------- fits ---

struct RateFit {
  Real slope = 0.0;
  Real intercept = 0.0;
  Real residual = 0.0;
  Index points_used = 0;
  std::string note;
};

/// Least squares on (log eps, log error); isolated nonpositive errors are
/// dropped with a note; fewer than 3 usable points is a refusal.
inline RateFit fit_rate(const std::vector<std::pair<Real, Real>>& points) {
  std::vector<std::pair<Real, Real>> usable;
  Index dropped = 0;
  for (const auto& [e, err] : points) {
    if (!(e > 0.0)) throw ParameterError("fit_rate: eps values must be positive");
    if (err > 0.0) usable.emplace_back(std::log(e), std::log(err));
    else ++dropped;
  }
  if (usable.size() < 3)
    throw ParameterError("fit_rate: need at least 3 positive points");
  const Index n = static_cast<Index>(usable.size());
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [x, y] : usable) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  RateFit fit;
  const Real denom = n * sxx - sx * sx;
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy * sxx - sx * sxy) / denom;
  Real ss = 0;
  for (const auto& [x, y] : usable) {
    const Real d = y - (fit.slope * x + fit.intercept);
    ss += d * d;
  }
  fit.residual = std::sqrt(ss / static_cast<Real>(n));
  fit.points_used = n;
  if (dropped > 0) fit.note = std::to_string(dropped) + " zero-error points dropped";
  return fit;
}

// ------------------------------------------------------------ f selectors ---

/// Named load fields for the resolvent study, evaluated at (y', y3).
inline std::function<Complex(const Vec2&, Real)> load_by_tag(const std::string& tag, Real r) {
  if (tag == "const") return [](const Vec2&, Real) { return Complex(1.0, 0.0); };
  if (tag == "expy3")
    return [](const Vec2&, Real y3) { return std::polar(1.0, 2.0 * kPi * y3); };
  if (tag == "fibrebump") {
    const Real rad = 0.95 * r;
    return [rad](const Vec2& yp, Real) {
      const Real t = yp.norm() / rad;
      return Complex(t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0, 0.0);
    };
  }
  if (tag == "matrixbump") {
    const Real rad = std::min(0.35, 0.9 * (0.5 * std::sqrt(2.0) - r));
    return [rad](const Vec2& yp, Real) {
      // distance to the nearest cell corner through the periodic lattice
      Real dx = std::abs(std::abs(yp.x()) - 0.5);
      Real dy = std::abs(std::abs(yp.y()) - 0.5);
      const Real t = std::sqrt(dx * dx + dy * dy) / rad;
      return Complex(t < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - t * t)) : 0.0, 0.0);
    };
  }
  throw ParameterError("unknown load tag '" + tag + "'");
}

/// Nodal interpolation of a load on the tensor mesh (axial index fastest).
inline VecXc evaluate_load(const PeriodicMesh2D& m2, const PeriodicMesh1D& m1,
                           const std::function<Complex(const Vec2&, Real)>& f) {
  const auto coords = m2.dof_coordinates();
  const Index n1 = m1.n_nodes();
  VecXc out(m2.n_dofs * n1);
  for (Index d = 0; d < m2.n_dofs; ++d)
    for (Index i1 = 0; i1 < n1; ++i1)
      out[d * n1 + i1] = f(coords[static_cast<std::size_t>(d)], m1.nodes[static_cast<std::size_t>(i1)]);
  return out;
}

// ------------------------------------------------------------- studies ------

/// Everything a study needs at one mesh resolution.
struct StudyContext {
  PeriodicMesh2D m2;
  PeriodicMesh1D m1;
  const CoefficientProfile* profile;
  CellForms cell;
  DiskMesh dm;
  HomogenizedCoefficients hc;
  LimitOperator op;

  StudyContext(Real r, Real h, Index n3, const CoefficientProfile& prof)
      : m2(build_cross_section_mesh(r, h)), m1(build_interval_mesh(n3, prof)), profile(&prof),
        cell(m2, m1, prof), dm(fibre_submesh(m2)), hc(homogenize(m2, prof)), op(dm) {}
};

struct EigStudyRow {
  Vec3 xi;
  Real eps;
  Index k;  // 1-based band index
  Real lambda;   // eps-problem band
  Real limit;    // limit-operator band
  bool trusted;

  Real abs_err() const { return std::abs(lambda - limit); }
};

struct SeriesFit {
  Vec3 xi;
  Index k = 0;
  std::string ftag;
  RateFit fit;
  bool trusted = false;
  Index cluster_end = 0;  // last band index of the degenerate cluster at k
};

struct EigStudyResult {
  std::vector<EigStudyRow> rows;
  std::vector<SeriesFit> fits;

  Table to_table() const {
    Table t;
    t.columns = {"xi1", "xi2", "xi3", "eps", "k", "lambda", "Lambda", "abs_err", "trusted"};
    for (const auto& r : rows)
      t.rows.push_back({format_real(r.xi[0]), format_real(r.xi[1]), format_real(r.xi[2]),
                        format_real(r.eps), std::to_string(r.k), format_real(r.lambda),
                        format_real(r.limit), format_real(r.abs_err()),
                        r.trusted ? "1" : "0"});
    return t;
  }
};

namespace detail {

template <class Item, class Fn>
void parallel_for_each(const std::vector<Item>& items, Fn&& fn) {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(items.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) fn(i, items[i]);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= items.size()) return;
        fn(i, items[i]);
      }
    });
  for (auto& th : pool) th.join();
}

/// Bands of the eps-problem and the limit problem paired by ascending index;
/// returns at least k of each, extended past degenerate clusters.
struct BandPair {
  VecX lambda;
  VecX limit;
  Index cluster_end;
};

}  // namespace detail

namespace detail {

/// (theta, xi) pairs per eps sample for the two study modes.  Fixed-xi keeps
/// the limit point still while theta = eps*xi shrinks; fixed-theta keeps the
/// fibre problem still while xi = theta/eps grows (exploratory: the limit
/// problem hardens as eps decreases).
struct SweepPoint {
  Vec3 theta;
  Vec3 xi;
};

inline std::vector<Vec3> study_samples(const StudyConfig& cfg) {
  if (cfg.mode == StudyConfig::Mode::FixedXi) {
    if (cfg.xi.empty()) throw ParameterError("study: [sweep] xi=... required in fixed-xi mode");
    return cfg.xi;
  }
  if (cfg.theta.empty())
    throw ParameterError("study: [sweep] theta=... required in fixed-theta mode");
  for (const Vec3& t : cfg.theta)
    if (!in_dual_cell(t)) throw ParameterError("study: theta outside the dual cell");
  return cfg.theta;
}

inline SweepPoint sweep_point(const StudyConfig& cfg, const Vec3& sample, Real eps) {
  if (cfg.mode == StudyConfig::Mode::FixedXi) return {Vec3(eps * sample), sample};
  return {sample, Vec3(sample / eps)};
}

}  // namespace detail

/// Verification of the eigenvalue estimate: per (sample, k) the base-mesh
/// errors |lambda_eps^k(theta) - Lambda^k(theta/eps)| over the eps list, a
/// trust flag from an automatic h -> h/2 stability check, and the log-log
/// rate fit.  In fixed-xi mode the limit bands are computed once per sample.
inline EigStudyResult eigenvalue_convergence_study(const StudyConfig& cfg) {
  cfg.validate_eps_decreasing();
  if (cfg.mode == StudyConfig::Mode::FixedXi) cfg.validate_fixed_xi_thetas();

  StudyContext base(cfg.r, cfg.h, cfg.n3, cfg.profile);
  StudyContext fine(cfg.r, 0.5 * cfg.h, cfg.n3, cfg.profile);

  EigOptions eig_opts;
  eig_opts.tol = cfg.tol;
  eig_opts.max_iter = cfg.max_iter;
  eig_opts.seed = cfg.seed;

  EigStudyResult out;
  for (const Vec3& sample : detail::study_samples(cfg)) {
    struct EpsData {
      Vec3 xi;
      VecX lam_base, lam_fine, lim_base, lim_fine;
    };
    std::vector<EpsData> per_eps(cfg.eps.size());
    const bool still_xi = cfg.mode == StudyConfig::Mode::FixedXi;
    VecX lim_base_cached, lim_fine_cached;
    if (still_xi) {
      lim_base_cached = limit_bands(Xi(sample), cfg.k, base.hc, base.op, eig_opts).eigenvalues;
      lim_fine_cached = limit_bands(Xi(sample), cfg.k, fine.hc, fine.op, eig_opts).eigenvalues;
    }
    std::vector<std::size_t> idx(cfg.eps.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    detail::parallel_for_each(idx, [&](std::size_t, std::size_t i) {
      const Real eps = cfg.eps[i];
      const auto pt = detail::sweep_point(cfg, sample, eps);
      auto b = epsilon_bands(base.cell, eps, pt.theta, cfg.k, eig_opts);
      auto f = epsilon_bands(fine.cell, eps, pt.theta, cfg.k, eig_opts);
      if (still_xi) {
        per_eps[i] = {pt.xi, b.eigenvalues, f.eigenvalues, lim_base_cached, lim_fine_cached};
      } else {
        auto lb = limit_bands(Xi(pt.xi), cfg.k, base.hc, base.op, eig_opts);
        auto lf = limit_bands(Xi(pt.xi), cfg.k, fine.hc, fine.op, eig_opts);
        per_eps[i] = {pt.xi, b.eigenvalues, f.eigenvalues, lb.eigenvalues, lf.eigenvalues};
      }
    });

    Index k_eff = cfg.k;
    Index cluster_end = cfg.k;
    for (const auto& d : per_eps) {
      k_eff = std::min<Index>(
          k_eff, std::min<Index>(std::min<Index>(d.lam_base.size(), d.lam_fine.size()),
                                 std::min<Index>(d.lim_base.size(), d.lim_fine.size())));
      cluster_end = std::max<Index>(cluster_end, d.lim_base.size());
    }

    for (Index k = 1; k <= k_eff; ++k) {
      std::vector<std::pair<Real, Real>> pts;
      bool series_trusted = true;
      for (std::size_t i = 0; i < cfg.eps.size(); ++i) {
        const auto& d = per_eps[i];
        const Real err_base = std::abs(d.lam_base[k - 1] - d.lim_base[k - 1]);
        const Real err_fine = std::abs(d.lam_fine[k - 1] - d.lim_fine[k - 1]);
        // both-below-floor counts as stable; otherwise require < 10% drift
        const Real floor = 100.0 * cfg.tol;
        const bool row_trusted = (err_base < floor && err_fine < floor) ||
                                 std::abs(err_base - err_fine) < 0.1 * err_base;
        series_trusted = series_trusted && row_trusted;
        out.rows.push_back({d.xi, cfg.eps[i], k, d.lam_base[k - 1], d.lim_base[k - 1],
                            row_trusted});
        pts.emplace_back(cfg.eps[i], err_base);
      }
      SeriesFit sf;
      sf.xi = sample;
      sf.k = k;
      sf.trusted = series_trusted;
      sf.cluster_end = cluster_end;  // degenerate-cluster boundary at cfg.k
      try {
        sf.fit = fit_rate(pts);
      } catch (const ParameterError& e) {
        sf.fit.note = e.what();
        sf.trusted = false;
      }
      out.fits.push_back(std::move(sf));
    }
  }
  return out;
}

struct ResStudyRow {
  Vec3 xi;
  Real eps;
  std::string ftag;
  Real rel_err;
  bool trusted;
};

struct ResStudyResult {
  std::vector<ResStudyRow> rows;
  std::vector<SeriesFit> fits;

  Table to_table() const {
    Table t;
    t.columns = {"xi1", "xi2", "xi3", "eps", "ftag", "rel_err", "trusted"};
    for (const auto& r : rows)
      t.rows.push_back({format_real(r.xi[0]), format_real(r.xi[1]), format_real(r.xi[2]),
                        format_real(r.eps), r.ftag, format_real(r.rel_err), r.trusted ? "1" : "0"});
    return t;
  }
};

namespace detail {

/// || u_{eps,theta} - E_theta^* (z0 + z1) ||_M / || f ||_M for one load, with
/// the limit problem solved at xi = theta / eps.
inline Real resolvent_error_at(const StudyContext& ctx, Real eps, const Vec3& theta,
                               const Vec3& xi, const VecXc& f) {
  const Vec2 theta_p(theta[0], theta[1]);
  const Index n1 = ctx.cell.n1();

  const VecXc u = solve_epsilon_resolvent(ctx.cell, eps, theta, f);

  // limit side: modulated load, averaged against the V test functions
  const VecXc g = modulate(ctx.m2, theta_p, f, ModulateDir::Forward);
  const KronForm mass = ctx.cell.mass();
  const VecXc w = mass.apply(g);
  VecXc s2(ctx.cell.n2());
  for (Index d = 0; d < ctx.cell.n2(); ++d) s2[d] = w.segment(d * n1, n1).sum();
  const LimitElement z =
      solve_limit_resolvent(Xi(xi), ctx.op.restrict_load(s2), ctx.hc, ctx.op);

  // comparison field E*(z0 + z1), extended axially constant
  VecXc field2 = VecXc::Constant(ctx.cell.n2(), z.z0);
  for (Index i = 0; i < ctx.dm.n_interior(); ++i)
    field2[ctx.dm.parent_dof[static_cast<std::size_t>(ctx.dm.interior_nodes[static_cast<std::size_t>(i)])]] +=
        z.z1[i];
  field2 = modulate(ctx.m2, theta_p, field2, ModulateDir::Adjoint);
  VecXc u_limit(ctx.cell.n());
  for (Index d = 0; d < ctx.cell.n2(); ++d) u_limit.segment(d * n1, n1).setConstant(field2[d]);

  const VecXc diff = u - u_limit;
  const Real num = std::sqrt(std::abs(diff.dot(mass.apply(diff))));
  const Real den = std::sqrt(std::abs(f.dot(mass.apply(f))));
  return num / den;
}

inline Real resolvent_error(const StudyContext& ctx, Real eps, const Vec3& xi, const VecXc& f) {
  return resolvent_error_at(ctx, eps, Vec3(eps * xi), xi, f);
}

}  // namespace detail

/// Verification of the resolvent estimate for the configured loads; modes as
/// in the eigenvalue study.
inline ResStudyResult resolvent_convergence_study(const StudyConfig& cfg) {
  cfg.validate_eps_decreasing();
  if (cfg.mode == StudyConfig::Mode::FixedXi) cfg.validate_fixed_xi_thetas();
  if (cfg.f_tags.empty()) throw ParameterError("resolvent_convergence_study: no load tags");

  StudyContext base(cfg.r, cfg.h, cfg.n3, cfg.profile);
  StudyContext fine(cfg.r, 0.5 * cfg.h, cfg.n3, cfg.profile);

  ResStudyResult out;
  for (const Vec3& sample : detail::study_samples(cfg)) {
    for (const auto& tag : cfg.f_tags) {
      const auto ffun = load_by_tag(tag, cfg.r);
      const VecXc f_base = evaluate_load(base.m2, base.m1, ffun);
      const VecXc f_fine = evaluate_load(fine.m2, fine.m1, ffun);
      std::vector<std::pair<Real, Real>> pts;
      bool series_trusted = true;
      for (Real eps : cfg.eps) {
        const auto pt = detail::sweep_point(cfg, sample, eps);
        const Real err_base = detail::resolvent_error_at(base, eps, pt.theta, pt.xi, f_base);
        const Real err_fine = detail::resolvent_error_at(fine, eps, pt.theta, pt.xi, f_fine);
        const Real floor = 100.0 * cfg.tol;
        const bool row_trusted = (err_base < floor && err_fine < floor) ||
                                 std::abs(err_base - err_fine) < 0.1 * err_base;
        series_trusted = series_trusted && row_trusted;
        out.rows.push_back({pt.xi, eps, tag, err_base, row_trusted});
        pts.emplace_back(eps, err_base);
      }
      SeriesFit sf;
      sf.xi = sample;
      sf.ftag = tag;
      sf.trusted = series_trusted;
      try {
        sf.fit = fit_rate(pts);
      } catch (const ParameterError& e) {
        sf.fit.note = e.what();
        sf.trusted = false;
      }
      out.fits.push_back(std::move(sf));
    }
  }
  return out;
}

// ------------------------------------------------------------- gap scans ----

struct GapScanRow {
  Vec3 theta;
  Real gamma;
  Real gamma_star;  // NaN at the origin, where the directional mass vanishes
};

struct GapScanResult {
  std::vector<GapScanRow> rows;

  Table to_table() const {
    Table t;
    t.columns = {"theta1", "theta2", "theta3", "gamma", "gamma_star"};
    for (const auto& r : rows)
      t.rows.push_back({format_real(r.theta[0]), format_real(r.theta[1]), format_real(r.theta[2]),
                        format_real(r.gamma), format_real(r.gamma_star)});
    return t;
  }

  Real min_gamma() const {
    Real m = 1e300;
    for (const auto& r : rows) m = std::min(m, r.gamma);
    return m;
  }
  Real min_gamma_star() const {
    Real m = 1e300;
    for (const auto& r : rows)
      if (!std::isnan(r.gamma_star)) m = std::min(m, r.gamma_star);
    return m;
  }
};

/// Per-axis grid: the n-th roots of unity on the torus, mapped to [-pi, pi).
/// Contains the origin for odd n and stays clear of the +-pi edge.
inline std::vector<Real> gap_grid_axis(Index n) {
  std::vector<Real> out;
  for (Index k = 0; k < n; ++k) {
    Real t = 2.0 * kPi * static_cast<Real>(k) / static_cast<Real>(n);
    if (t >= kPi) t -= 2.0 * kPi;
    out.push_back(t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Scan gamma and gamma* over the quasimomentum grid.
inline GapScanResult gap_scan(const StudyConfig& cfg) {
  StudyContext ctx(cfg.r, cfg.h, cfg.n3, cfg.profile);
  SubspaceBasis basis(ctx.cell);
  EigOptions opts;
  opts.tol = std::max(cfg.tol, 1e-8);
  opts.max_iter = cfg.max_iter;
  opts.seed = cfg.seed;

  const auto axis = gap_grid_axis(cfg.grid);
  std::vector<Vec3> thetas;
  for (Real t1 : axis)
    for (Real t2 : axis)
      for (Real t3 : axis) thetas.emplace_back(t1, t2, t3);

  GapScanResult out;
  out.rows.resize(thetas.size());
  std::vector<std::size_t> idx(thetas.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  detail::parallel_for_each(idx, [&](std::size_t, std::size_t i) {
    const Vec3& theta = thetas[i];
    GapScanRow row;
    row.theta = theta;
    row.gamma = coercivity_gap(ctx.cell, basis, theta, opts);
    row.gamma_star = theta.isZero(0.0) ? std::numeric_limits<Real>::quiet_NaN()
                                       : directional_gap(ctx.cell, theta, opts);
    out.rows[i] = row;
  });
  return out;
}

}  // namespace fibrehom
