#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <regex>
#include <sstream>
#include <string>

#include "polytransfer/config.hpp"
#include "polytransfer/error.hpp"
#include "polytransfer/experiments.hpp"
#include "polytransfer/svg.hpp"

using namespace polytransfer;
namespace fs = std::filesystem;

namespace {

config::Config parse(const std::string& text) {
  std::istringstream in(text);
  return config::Config::parse(in, "test");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("polytransfer-unit-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> cell_fills(const std::string& svg) {
  std::vector<std::string> fills;
  const auto begin = svg.find("<g shape-rendering");
  const auto end = svg.find("</g>", begin);
  const std::string cells = svg.substr(begin, end - begin);
  const std::regex fill("fill=\"(#[0-9a-f]{6})\"");
  for (auto it = std::sregex_iterator(cells.begin(), cells.end(), fill); it != std::sregex_iterator(); ++it)
    fills.push_back((*it)[1]);
  return fills;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("parsing and typed lookups") {
    auto c = parse("# comment\nexperiment = fig\nfig.degree = 12\nfig.rate = 1e-3  # trailing\nfig.mus = 0, 1.5, 3\n"
                   "fig.flag = yes\nfig.hi = inf\n");
    CHECK(c.require_string("experiment") == "fig");
    CHECK(c.get_size("fig.degree", 20) == 12);
    CHECK(c.get_double("fig.rate", 0.0) == 1e-3);
    CHECK(c.get_doubles("fig.mus", {}) == std::vector<double>{0.0, 1.5, 3.0});
    CHECK(c.get_bool("fig.flag", false));
    CHECK(std::isinf(c.get_double("fig.hi", 0.0)));
    CHECK(c.get_int("fig.missing", -4) == -4);
    CHECK(c.unused_keys().empty());
    CHECK_NOTHROW(c.reject_unknown());
  }

  TEST_CASE("errors") {
    CHECK_THROWS(parse("a = 1\na = 2\n"));
    CHECK_THROWS(parse("just words\n"));
    CHECK_THROWS(parse("bad key! = 1\n"));
    auto c = parse("x = abc\ny = nan\nz = 1\n");
    CHECK_THROWS(c.get_double("x", 0.0));
    CHECK_THROWS(c.get_double("y", 0.0));
    CHECK_THROWS(c.require_string("w"));
    try {
      c.reject_unknown();
      FAIL("expected rejection");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("'z'") != std::string::npos);
    }
  }

  TEST_CASE("resolved output records defaults and round-trips doubles") {
    auto c = parse("b = 0.1\n");
    c.get_double("b", 0.0);
    c.get_size("a", 7);
    std::ostringstream out;
    c.write_resolved(out);
    CHECK(out.str() == "a = 7\nb = 0.1\n");
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5})
      CHECK(std::stod(config::format_double(v)) == v);
  }
}

TEST_SUITE("svg") {
  TEST_CASE("diverging scale") {
    CHECK(svg::diverging_color(0.0, 1.0) == svg::Rgb{255, 255, 255});
    CHECK(svg::diverging_color(1.0, 1.0) == svg::Rgb{178, 24, 43});
    CHECK(svg::diverging_color(-1.0, 1.0) == svg::Rgb{33, 102, 172});
    CHECK(svg::diverging_color(50.0, 1.0) == svg::Rgb{178, 24, 43});
    CHECK(svg::diverging_color(-0.5, 2.0) == svg::diverging_color(-0.25, 1.0));
  }

  TEST_CASE("2x2 grid colors in row order from the bottom") {
    svg::Heatmap h{0, 1, 0, 1, 2, 2, {-1.0, 0.0, 0.0, 1.0}, 1.0, "t"};
    std::ostringstream out;
    svg::write_heatmap(out, h);
    const auto fills = cell_fills(out.str());
    REQUIRE(fills.size() == 4);
    CHECK(fills[0] == "#2166ac");
    CHECK(fills[1] == "#ffffff");
    CHECK(fills[2] == "#ffffff");
    CHECK(fills[3] == "#b2182b");
  }

  TEST_CASE("constant grid is one color and output is deterministic") {
    const auto h = svg::sample_grid([](double, double) { return 0.3; }, 0, 1, 0, 1, 10, 10, 1.0);
    std::ostringstream a, b;
    svg::write_heatmap(a, h);
    svg::write_heatmap(b, h);
    CHECK(a.str() == b.str());
    const auto fills = cell_fills(a.str());
    REQUIRE(fills.size() == 100);
    for (const auto& f : fills) CHECK(f == fills.front());
  }

  TEST_CASE("checkerboard sign pattern") {
    const auto f = [](double x, double y) { return std::sin(2 * std::numbers::pi * x) * std::sin(2 * std::numbers::pi * y); };
    const std::size_t n = 40;
    const auto h = svg::sample_grid(f, -1, 1, -1, 1, n, n, 1.0);
    std::ostringstream out;
    svg::write_heatmap(out, h);
    const auto fills = cell_fills(out.str());
    REQUIRE(fills.size() == n * n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        const double x = -1 + (i + 0.5) * 2.0 / n, y = -1 + (j + 0.5) * 2.0 / n;
        const int red = std::stoi(fills[j * n + i].substr(1, 2), nullptr, 16);
        const int blue = std::stoi(fills[j * n + i].substr(5, 2), nullptr, 16);
        if (f(x, y) > 1e-9) CHECK(red > blue);
        if (f(x, y) < -1e-9) CHECK(blue > red);
      }
  }

  TEST_CASE("invalid heatmaps") {
    svg::Heatmap h{0, 1, 0, 1, 2, 2, {0, 0, 0, std::nan("")}, 1.0, ""};
    std::ostringstream out;
    CHECK_THROWS(svg::write_heatmap(out, h));
    h.values[3] = 0.0;
    h.range = 0.0;
    CHECK_THROWS(svg::write_heatmap(out, h));
  }
}

TEST_SUITE("experiments") {
  TEST_CASE("catalog and unknown names") {
    const auto& cat = experiments::catalog();
    CHECK(cat.size() == 8);
    auto c = parse("experiment = nope\n");
    std::ostringstream log;
    CHECK_THROWS_AS(experiments::run(c, log, scratch("unknown")), InvalidArgument);
    auto bad = parse("experiment = gaussian1d-coeffs\ngaussian1d-coeffs.typo = 1\n");
    CHECK_THROWS_AS(experiments::run(bad, log, scratch("typo")), InvalidArgument);
  }

  TEST_CASE("runs are reproducible from the resolved configuration") {
    const std::string text =
        "experiment = truncated\nseed = 3\ntruncated.alphas = 0.5, 0.1\ntruncated.points = 7\n"
        "truncated.mc_samples = 2000\n";
    std::ostringstream log;
    auto c1 = parse(text);
    const auto root1 = scratch("repro1");
    const auto dir1 = experiments::run(c1, log, root1);
    auto c2 = config::Config::load(dir1 / "resolved.cfg");
    const auto root2 = scratch("repro2");
    const auto dir2 = experiments::run(c2, log, root2);
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir1)) {
      if (entry.path().extension() != ".csv") continue;
      CHECK(slurp(entry.path()) == slurp(dir2 / entry.path().filename()));
      ++compared;
    }
    CHECK(compared >= 2);
    CHECK(slurp(dir1 / "resolved.cfg") == slurp(dir2 / "resolved.cfg"));
  }

  TEST_CASE("figure run writes every region for every model") {
    auto c = parse("experiment = fig1\nfig1.samples = 400\nfig1.degree = 6\nfig1.epochs = 2\n"
                   "fig1.eval_samples = 500\nfig1.resolution = 20\n");
    std::ostringstream log;
    const auto dir = experiments::run(c, log, scratch("fig"));
    const std::string csv = slurp(dir / "region_mse.csv");
    for (const std::string model : {"poly", "relu"})
      for (const std::string region : {"seen", "band", "wide"})
        CHECK(csv.find("," + model + "," + region + ",") != std::string::npos);
    for (const std::string f : {"target.svg", "poly.svg", "relu.svg", "poly.txt", "relu.ckpt", "resolved.cfg"})
      CHECK(fs::exists(dir / f));
  }

  TEST_CASE("output root from the environment") {
    ::setenv("POLYTRANSFER_OUTPUT_ROOT", "/tmp/elsewhere", 1);
    CHECK(experiments::output_root() == fs::path("/tmp/elsewhere"));
    ::unsetenv("POLYTRANSFER_OUTPUT_ROOT");
    CHECK(experiments::output_root() == fs::path("results"));
  }
}
