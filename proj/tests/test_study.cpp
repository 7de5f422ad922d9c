#include <catch2/catch.hpp>

#include <sstream>

#include "fibrehom/study.hpp"

using namespace fibrehom;

namespace {

const char* kSmallConfig = R"cfg(
[geometry] r=0.25 h=0.1
[axial] n3=8
[coefficient] kind=piecewise values=1,4 breakpoints=0,0.5
[sweep] eps=0.4,0.2,0.1 xi=0,0,1 mode=fixed-xi f=expy3
[solver] tol=1e-8 k=2
)cfg";

}  // namespace

TEST_CASE("config parsing") {
  std::stringstream ss(kSmallConfig);
  auto cfg = parse_config(ss);
  CHECK(cfg.r == 0.25);
  CHECK(cfg.h == 0.1);
  CHECK(cfg.n3 == 8);
  CHECK(cfg.eps == std::vector<double>{0.4, 0.2, 0.1});
  REQUIRE(cfg.xi.size() == 1);
  CHECK(cfg.xi[0] == Vec3(0, 0, 1));
  CHECK(cfg.k == 2);
  CHECK(cfg.f_tags == std::vector<std::string>{"expy3"});
  CHECK(harmonic_mean(cfg.profile) == Approx(1.6));

  SECTION("unknown keys are errors") {
    std::stringstream bad("[geometry] r=0.25 hh=0.1\n");
    CHECK_THROWS_AS(parse_config(bad), ParameterError);
    std::stringstream bad2("[bogus] x=1\n");
    CHECK_THROWS_AS(parse_config(bad2), ParameterError);
  }
  SECTION("eps must decrease strictly") {
    std::stringstream bad("[sweep] eps=0.1,0.2\n");
    CHECK_THROWS_AS(parse_config(bad), ParameterError);
  }
  SECTION("fixed-xi thetas must stay in the dual cell") {
    std::stringstream bad("[sweep] eps=0.9 xi=0,0,4 mode=fixed-xi\n");
    CHECK_THROWS_AS(parse_config(bad), ParameterError);
  }
}

TEST_CASE("rate fitter") {
  SECTION("slope one") {
    auto f = fit_rate({{1.0, 1.0}, {0.5, 0.5}, {0.25, 0.25}});
    CHECK(f.slope == Approx(1.0).margin(1e-12));
  }
  SECTION("slope two") {
    auto f = fit_rate({{1.0, 1.0}, {0.5, 0.25}, {0.25, 0.0625}});
    CHECK(f.slope == Approx(2.0).margin(1e-12));
  }
  SECTION("slope independent of the constant") {
    for (double c : {0.1, 3.0, 1e4}) {
      auto f = fit_rate({{0.4, c * 0.4}, {0.2, c * 0.2}, {0.1, c * 0.1}, {0.05, c * 0.05}});
      CHECK(f.slope == Approx(1.0).margin(1e-10));
      CHECK(f.intercept == Approx(std::log(c)).margin(1e-10));
    }
  }
  SECTION("synthetic error equal to 3 eps") {
    auto f = fit_rate({{0.4, 1.2}, {0.2, 0.6}, {0.1, 0.3}, {0.05, 0.15}});
    CHECK(f.slope == Approx(1.0).margin(1e-6));
  }
  SECTION("refusals") {
    CHECK_THROWS_AS(fit_rate({{1.0, 1.0}, {0.5, 0.5}}), ParameterError);
    CHECK_THROWS_AS(fit_rate({{1.0, 0.0}, {0.5, 0.0}, {0.25, 1.0}}), ParameterError);
    CHECK_THROWS_AS(fit_rate({{-1.0, 1.0}, {0.5, 1.0}, {0.25, 1.0}}), ParameterError);
  }
  SECTION("zero errors dropped with a note") {
    auto f = fit_rate({{1.0, 1.0}, {0.5, 0.5}, {0.25, 0.25}, {0.125, 0.0}});
    CHECK(f.points_used == 3);
    CHECK(!f.note.empty());
  }
}

TEST_CASE("csv round trip") {
  Table t;
  t.columns = {"a", "b"};
  t.rows = {{format_real(0.1), "x"}, {format_real(-2.5e-17), "y"}};
  std::stringstream ss;
  write_csv(t, ss);
  auto t2 = parse_csv(ss);
  CHECK(t2 == t);

  Table one;
  one.columns = {"v"};
  one.rows = {{"1"}};
  std::stringstream s1;
  write_csv(one, s1);
  CHECK(s1.str() == "v\n1\n");
}

TEST_CASE("svg plot is structurally well-formed") {
  std::vector<PlotSeries> series{
      {"s1", {{0.4, 0.1}, {0.2, 0.05}, {0.1, 0.025}}},
      {"s2", {{0.4, 0.3}, {0.2, 0.2}, {0.1, 0.1}}},
      {"s3", {{0.4, 1.0}, {0.2, 0.25}, {0.1, 0.06}}},
  };
  std::stringstream ss;
  write_svg_loglog(series, ss);
  const std::string svg = ss.str();

  // structural re-parse: tags balance and exactly one root element
  Index depth = 0, roots = 0, polylines = 0;
  std::size_t pos = 0;
  while ((pos = svg.find('<', pos)) != std::string::npos) {
    std::size_t end = svg.find('>', pos);
    REQUIRE(end != std::string::npos);
    std::string tag = svg.substr(pos + 1, end - pos - 1);
    if (tag.rfind("polyline", 0) == 0) ++polylines;
    if (tag.front() == '/') {
      --depth;
    } else if (tag.back() != '/') {
      if (depth == 0) ++roots;
      ++depth;
    }
    pos = end + 1;
  }
  CHECK(depth == 0);
  CHECK(roots == 1);
  CHECK(polylines == 3);
}

TEST_CASE("gap grid axis") {
  auto axis = gap_grid_axis(5);
  REQUIRE(axis.size() == 5);
  CHECK(std::count_if(axis.begin(), axis.end(), [](double t) { return t == 0.0; }) == 1);
  for (double t : axis) {
    CHECK(t >= -kPi);
    CHECK(t < kPi);
  }
}

TEST_CASE("small eigenvalue study runs end to end") {
  std::stringstream ss(kSmallConfig);
  auto cfg = parse_config(ss);
  auto res = eigenvalue_convergence_study(cfg);
  REQUIRE(!res.rows.empty());
  REQUIRE(!res.fits.empty());
  // shared kernel: xi = 0 gives zero error for k = 1
  StudyConfig zero = cfg;
  zero.xi = {Vec3::Zero()};
  zero.k = 1;
  auto rz = eigenvalue_convergence_study(zero);
  for (const auto& row : rz.rows)
    if (row.k == 1) CHECK(row.abs_err() <= 2.0 * cfg.tol);

  SECTION("table emission matches the column contract") {
    auto t = res.to_table();
    CHECK(t.columns == std::vector<std::string>{"xi1", "xi2", "xi3", "eps", "k", "lambda",
                                                "Lambda", "abs_err", "trusted"});
    CHECK(t.rows.size() == res.rows.size());
  }
}

TEST_CASE("small resolvent study runs end to end") {
  std::stringstream ss(kSmallConfig);
  auto cfg = parse_config(ss);
  cfg.f_tags = {"const", "expy3"};
  auto res = resolvent_convergence_study(cfg);
  REQUIRE(!res.rows.empty());
  auto t = res.to_table();
  CHECK(t.columns == std::vector<std::string>{"xi1", "xi2", "xi3", "eps", "ftag", "rel_err", "trusted"});

  SECTION("unimodular scaling of f leaves the error unchanged") {
    StudyContext ctx(cfg.r, cfg.h, cfg.n3, cfg.profile);
    const auto fn = load_by_tag("expy3", cfg.r);
    VecXc f = evaluate_load(ctx.m2, ctx.m1, fn);
    const double e1 = detail::resolvent_error(ctx, 0.3, Vec3(0, 0, 1), f);
    const double e2 = detail::resolvent_error(ctx, 0.3, Vec3(0, 0, 1), VecXc(std::polar(1.0, 1.234) * f));
    CHECK(e1 == Approx(e2).epsilon(1e-9));
  }
}

TEST_CASE("resolvent error vanishes for the constant pair") {
  std::stringstream ss(kSmallConfig);
  auto cfg = parse_config(ss);
  StudyContext ctx(cfg.r, cfg.h, cfg.n3, cfg.profile);
  VecXc f = VecXc::Ones(ctx.cell.n());
  for (double eps : {0.5, 0.2}) {
    const double err = detail::resolvent_error(ctx, eps, Vec3::Zero(), f);
    CHECK(err <= 1e-10);
  }
}

TEST_CASE("studies are deterministic") {
  std::stringstream s1(kSmallConfig), s2(kSmallConfig);
  auto r1 = eigenvalue_convergence_study(parse_config(s1));
  auto r2 = eigenvalue_convergence_study(parse_config(s2));
  std::stringstream c1, c2;
  write_csv(r1.to_table(), c1);
  write_csv(r2.to_table(), c2);
  CHECK(c1.str() == c2.str());
}

TEST_CASE("fixed-theta mode is available") {
  std::stringstream ss(
      "[geometry] r=0.25 h=0.1\n[axial] n3=8\n"
      "[coefficient] kind=piecewise values=1,4 breakpoints=0,0.5\n"
      "[sweep] eps=0.4,0.2 theta=0,0,0.5 mode=fixed-theta\n[solver] tol=1e-8 k=1\n");
  auto cfg = parse_config(ss);
  auto res = eigenvalue_convergence_study(cfg);
  REQUIRE(!res.rows.empty());
  // xi = theta / eps varies along the sweep
  CHECK(res.rows[0].xi[2] == Approx(0.5 / 0.4));
  CHECK(res.rows[1].xi[2] == Approx(0.5 / 0.2));
}
