#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fibrehom/study.hpp"

namespace fs = std::filesystem;
using namespace fibrehom;

namespace {

StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  return parse_config(in);
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open output file: " + p.string());
  return out;
}

Table fits_table(const std::vector<SeriesFit>& fits, bool eig_style) {
  Table t;
  if (eig_style)
    t.columns = {"xi1", "xi2", "xi3", "k", "slope", "intercept", "fit_residual",
                 "points", "trusted", "cluster_end", "note"};
  else
    t.columns = {"xi1", "xi2", "xi3", "ftag", "slope", "intercept", "fit_residual",
                 "points", "trusted", "note"};
  for (const auto& f : fits) {
    std::vector<std::string> row{format_real(f.xi[0]), format_real(f.xi[1]),
                                 format_real(f.xi[2])};
    if (eig_style) row.push_back(std::to_string(f.k));
    else row.push_back(f.ftag);
    row.push_back(format_real(f.fit.slope));
    row.push_back(format_real(f.fit.intercept));
    row.push_back(format_real(f.fit.residual));
    row.push_back(std::to_string(f.fit.points_used));
    row.push_back(f.trusted ? "1" : "0");
    if (eig_style) row.push_back(std::to_string(f.cluster_end));
    row.push_back(f.fit.note.empty() ? "-" : f.fit.note);
    t.rows.push_back(std::move(row));
  }
  return t;
}

int run_homogenize(const std::string& cfg_path, const std::string& out_dir) {
  auto cfg = load_config(cfg_path);
  StudyContext ctx(cfg.r, cfg.h, cfg.n3, cfg.profile);
  auto out = open_out(out_dir, "coefficients.txt");
  ctx.hc.write(out);
  std::cout << "homogenize: Ah11=" << format_real(ctx.hc.Ah(0, 0))
            << " Ah33=" << format_real(ctx.hc.Ah(2, 2)) << " ah=" << format_real(ctx.hc.ah)
            << "\n";
  return 0;
}

int run_bands_eps(const std::string& cfg_path, const std::string& out_dir) {
  auto cfg = load_config(cfg_path);
  if (cfg.theta.empty()) throw ParameterError("bands-eps: [sweep] theta=... is required");
  if (cfg.eps.empty()) throw ParameterError("bands-eps: [sweep] eps=... is required");
  StudyContext ctx(cfg.r, cfg.h, cfg.n3, cfg.profile);
  EigOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  opts.seed = cfg.seed;
  Table t;
  t.columns = {"theta1", "theta2", "theta3", "epsilon", "k", "lambda"};
  for (const Vec3& theta : cfg.theta)
    for (Real eps : cfg.eps) {
      auto r = epsilon_bands(ctx.cell, eps, theta, cfg.k, opts);
      for (Index k = 1; k <= r.eigenvalues.size(); ++k)
        t.rows.push_back({format_real(theta[0]), format_real(theta[1]), format_real(theta[2]),
                          format_real(eps), std::to_string(k), format_real(r.eigenvalues[k - 1])});
    }
  auto out = open_out(out_dir, "bands_eps.csv");
  write_csv(t, out);
  std::cout << "bands-eps: " << t.rows.size() << " rows\n";
  return 0;
}

int run_bands_limit(const std::string& cfg_path, const std::string& out_dir) {
  auto cfg = load_config(cfg_path);
  if (cfg.xi.empty()) throw ParameterError("bands-limit: [sweep] xi=... is required");
  StudyContext ctx(cfg.r, cfg.h, cfg.n3, cfg.profile);
  EigOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  opts.seed = cfg.seed;
  Table t;
  t.columns = {"xi1", "xi2", "xi3", "k", "Lambda"};
  for (const Vec3& xi : cfg.xi) {
    auto r = limit_bands(Xi(xi), cfg.k, ctx.hc, ctx.op, opts);
    for (Index k = 1; k <= r.eigenvalues.size(); ++k)
      t.rows.push_back({format_real(xi[0]), format_real(xi[1]), format_real(xi[2]),
                        std::to_string(k), format_real(r.eigenvalues[k - 1])});
  }
  auto out = open_out(out_dir, "bands_limit.csv");
  write_csv(t, out);
  std::cout << "bands-limit: " << t.rows.size() << " rows\n";
  return 0;
}

void warn_exploratory(const StudyConfig& cfg) {
  if (cfg.mode == StudyConfig::Mode::FixedTheta)
    std::cout << "note: fixed-theta mode is exploratory; the limit point moves with eps and "
                 "discretisation demands escalate\n";
}

int run_converge_eigs(const std::string& cfg_path, const std::string& out_dir) {
  auto cfg = load_config(cfg_path);
  warn_exploratory(cfg);
  auto res = eigenvalue_convergence_study(cfg);
  {
    auto out = open_out(out_dir, "converge_eigs.csv");
    write_csv(res.to_table(), out);
  }
  {
    auto out = open_out(out_dir, "converge_eigs_rates.csv");
    write_csv(fits_table(res.fits, true), out);
  }
  {
    std::vector<PlotSeries> series;
    for (const auto& f : res.fits) {
      PlotSeries s;
      s.name = "xi=(" + format_real(f.xi[0]) + "," + format_real(f.xi[1]) + "," +
               format_real(f.xi[2]) + ") k=" + std::to_string(f.k);
      for (const auto& row : res.rows)
        if (row.xi == f.xi && row.k == f.k) s.points.emplace_back(row.eps, row.abs_err());
      series.push_back(std::move(s));
    }
    auto out = open_out(out_dir, "converge_eigs.svg");
    write_svg_loglog(series, out);
  }
  for (const auto& f : res.fits)
    std::cout << "converge-eigs: xi=(" << f.xi[0] << "," << f.xi[1] << "," << f.xi[2]
              << ") k=" << f.k << " slope=" << f.fit.slope << (f.trusted ? "" : " [untrusted]")
              << "\n";
  return 0;
}

int run_converge_resolvent(const std::string& cfg_path, const std::string& out_dir) {
  auto cfg = load_config(cfg_path);
  warn_exploratory(cfg);
  if (cfg.f_tags.empty()) cfg.f_tags = {"expy3", "fibrebump", "matrixbump"};
  auto res = resolvent_convergence_study(cfg);
  {
    auto out = open_out(out_dir, "converge_resolvent.csv");
    write_csv(res.to_table(), out);
  }
  {
    auto out = open_out(out_dir, "converge_resolvent_rates.csv");
    write_csv(fits_table(res.fits, false), out);
  }
  {
    std::vector<PlotSeries> series;
    for (const auto& f : res.fits) {
      PlotSeries s;
      s.name = "xi=(" + format_real(f.xi[0]) + "," + format_real(f.xi[1]) + "," +
               format_real(f.xi[2]) + ") f=" + f.ftag;
      for (const auto& row : res.rows)
        if (row.xi == f.xi && row.ftag == f.ftag) s.points.emplace_back(row.eps, row.rel_err);
      series.push_back(std::move(s));
    }
    auto out = open_out(out_dir, "converge_resolvent.svg");
    write_svg_loglog(series, out);
  }
  for (const auto& f : res.fits)
    std::cout << "converge-resolvent: xi=(" << f.xi[0] << "," << f.xi[1] << "," << f.xi[2]
              << ") f=" << f.ftag << " slope=" << f.fit.slope
              << (f.trusted ? "" : " [untrusted]") << "\n";
  return 0;
}

int run_gaps(const std::string& cfg_path, const std::string& out_dir) {
  auto cfg = load_config(cfg_path);
  auto res = gap_scan(cfg);
  auto out = open_out(out_dir, "gaps.csv");
  write_csv(res.to_table(), out);
  std::cout << "gaps: min gamma=" << format_real(res.min_gamma())
            << " min gamma*=" << format_real(res.min_gamma_star()) << " over "
            << res.rows.size() << " grid points\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"high-contrast fibre homogenisation toolkit"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const std::string&, const std::string&);
  };
  const Sub subs[] = {
      {"homogenize", "compute the effective tensor and the axial harmonic mean", run_homogenize},
      {"bands-eps", "band functions of the quasimomentum fibre problem", run_bands_eps},
      {"bands-limit", "band functions of the two-scale limit operator", run_bands_limit},
      {"converge-eigs", "eigenvalue error vs eps at fixed xi, with rate fits", run_converge_eigs},
      {"converge-resolvent", "resolvent error vs eps at fixed xi, with rate fits",
       run_converge_resolvent},
      {"gaps", "coercivity gap scans over the quasimomentum grid", run_gaps},
  };

  struct Opts {
    std::string config;
    std::string out;
  };
  std::vector<std::pair<CLI::App*, Opts>> parsed;
  parsed.reserve(std::size(subs));
  for (const auto& sub : subs) {
    auto* s = app.add_subcommand(sub.name, sub.help);
    parsed.emplace_back(s, Opts{});
    auto& o = parsed.back().second;
    s->add_option("--config", o.config, "config file path")->required();
    s->add_option("--out", o.out, "output directory")->required();
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < std::size(subs); ++i)
      if (parsed[i].first->parsed())
        return subs[i].run(parsed[i].second.config, parsed[i].second.out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
