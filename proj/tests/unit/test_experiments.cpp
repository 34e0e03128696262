#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "exb/error.hpp"
#include "exb/experiments.hpp"

using namespace exb;
using nlohmann::json;

namespace {

const std::string kData = EXB_TEST_DATA;

json golden_config() {
  std::ifstream is(kData + "/golden_base.json");
  return json::parse(is);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t count(const std::string& s, const std::string& what) {
  std::size_t n = 0;
  for (auto p = s.find(what); p != std::string::npos; p = s.find(what, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("FNV-1a reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("bump profile") {
  CHECK(bump(0.0) == 1.0);
  CHECK(bump(0.5) == doctest::Approx(0.421875));
  CHECK(bump(1.0) == 0.0);
  CHECK(bump(1.5) == 0.0);
  // C^2 at s = 1: first and second one-sided differences vanish.
  const double e = 1e-4;
  CHECK(std::abs(bump(1.0 - e)) < 1e-11);
}

TEST_CASE("ball radius bound for the lateral chain") {
  CHECK(lateral_eps1_bound(0.8, 0.05, 1.0) == doctest::Approx(std::pow(0.8, 20.0)).epsilon(1e-13));
  CHECK(lateral_eps1_bound(0.8, 0.05, 1.0) == doctest::Approx(1.1529e-2).epsilon(1e-4));
  // At the bound C1 eps^{-delta} equals L.
  const double e = lateral_eps1_bound(0.3, 0.2, 0.1);
  CHECK(0.3 * std::pow(e, -0.2) == doctest::Approx(0.1).epsilon(1e-13));
  CHECK_THROWS_AS(lateral_eps1_bound(0.3, 0.0, 0.1), ParameterError);
}

TEST_CASE("geometric widths") {
  const auto w = ExperimentConfig::geometric_widths(0.4, 0.5, 4);
  REQUIRE(w.size() == 4u);
  CHECK(w[3] == doctest::Approx(0.05));
  CHECK(ExperimentConfig::geometric_widths(1.0, 0.5, 0).empty());
  CHECK_THROWS_AS(ExperimentConfig::geometric_widths(1.0, 1.5, 3), ConfigError);
}

TEST_CASE("config validation") {
  const json good = golden_config();
  CHECK_NOTHROW(ExperimentConfig::from_json(good));
  const ExperimentConfig c = ExperimentConfig::from_json(good);
  CHECK(c.which == ExperimentKind::Base);
  CHECK(c.cells == 32);
  CHECK(c.widths.size() == 3u);
  CHECK(c.cantor.length() == doctest::Approx(0.4));

  auto broken = [&](auto edit) {
    json j = good;
    edit(j);
    return j;
  };
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j.erase("schema_version"); })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["schema_version"] = 2; })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["experiment"] = "middle"; })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["ellipticity"]["lambda"] = 2.0; })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["dip"] = 5.0; })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) { j["L"] = "big"; })), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) {
                    j["sweep"] = {{"widths", {0.01, 0.02}}};
                  })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(broken([](json& j) {
                    j["coefficients"]["b0"] = {{"kind", "wavy"}, {"a", 1}};
                  })),
                  ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_file(kData + "/missing.json"), IoError);
}

TEST_CASE("patch wider than the admissible balls is rejected") {
  json j = golden_config();
  j["sweep"] = {{"widths", {0.05}}};
  CHECK_THROWS_AS(run_experiment(ExperimentConfig::from_json(j)), ConfigError);
}

TEST_CASE("SVG plot is well formed") {
  const std::string svg = svg_line_plot("t", "x", "y", {{"a", {{1.0, 2.0}, {2.0, 1.0}}}, {"b & c", {{1.0, 0.5}}}}, true);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(count(svg, "<svg") == count(svg, "</svg>"));
  CHECK(count(svg, "<text") == count(svg, "</text>"));
  CHECK(svg.find("b &amp; c") != std::string::npos);
  const std::string empty = svg_line_plot("t", "x", "y", {}, false);
  CHECK(count(empty, "<svg") == 1u);
  CHECK(count(empty, "</svg>") == 1u);
}

TEST_CASE("empty sweep yields an empty table") {
  json j = golden_config();
  j["sweep"] = {{"widths", json::array()}};
  const ExperimentReport r = run_experiment(ExperimentConfig::from_json(j));
  CHECK(r.sweep.empty());
  CHECK_FALSE(r.trend_ok);
  CHECK(sweep_csv(r).find('\n') == sweep_csv(r).size() - 1);
}

TEST_CASE("no dip leaves the solution nonnegative") {
  json j = golden_config();
  j["dip"] = 0.0;
  const ExperimentReport r = run_experiment(ExperimentConfig::from_json(j));
  REQUIRE(r.sweep.size() == 3u);
  for (const auto& e : r.sweep) {
    CHECK(e.probe_min >= -1e-10);
    CHECK(e.control_min >= -1e-10);
    CHECK(e.u_min >= -1e-10);
  }
}

TEST_CASE("small base run matches the golden table and is deterministic") {
  const ExperimentConfig c = ExperimentConfig::from_json(golden_config());
  ExperimentReport a = run_experiment(c);
  const ExperimentReport b = run_experiment(c);
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16u);
  CHECK(sweep_csv(a) == slurp(kData + "/golden_sweep.csv"));
  CHECK(a.cases_ok);
  CHECK(a.Lw_ok);
  for (const auto& e : a.sweep) {
    CHECK(e.tail_ratio_max <= 1.0);
    CHECK(e.Lw_max < 1e-8);
    CHECK(e.balls == (std::size_t{1} << e.level));
  }

  const auto dir = std::filesystem::temp_directory_path() / "exb_experiment_test";
  std::filesystem::remove_all(dir);
  emit_report(a, dir.string());
  CHECK(a.artifacts.size() == 4u);
  for (const char* f : {"report.json", "sweep.csv", "min_vs_width.svg", "case_margins.svg"})
    CHECK(std::filesystem::exists(dir / f));
  const json rep = json::parse(slurp((dir / "report.json").string()));
  CHECK(rep.at("hash") == a.hash());
  CHECK(slurp((dir / "sweep.csv").string()) == sweep_csv(a));
  // Artifact paths do not feed the hash.
  CHECK(a.hash() == b.hash());
  std::filesystem::remove_all(dir);
}
