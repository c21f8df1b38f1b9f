#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mflab/config.hpp"
#include "mflab/errors.hpp"
#include "mflab/experiments.hpp"
#include "mflab/table.hpp"

using namespace mflab;

TEST_SUITE("experiments_cli") {
  TEST_CASE("config parsing") {
    const auto c = Config::parse("# comment\nexperiment = x\n a = 1.5 # trailing\nlist = 1, 2,3\nflag = false\n\nn = 4\n");
    CHECK(c.get_string("experiment") == "x");
    CHECK(c.get_double("a") == 1.5);
    CHECK(c.get_list("list") == std::vector<double>{1, 2, 3});
    CHECK(!c.get_bool("flag", true));
    CHECK(c.get_count("n") == 4);
    CHECK(c.get_double("missing", 2.0) == 2.0);
    CHECK_NOTHROW(c.check_all_used());
  }

  TEST_CASE("config errors") {
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("no equals sign\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("a =\n"), ConfigError);
    CHECK_THROWS_AS(Config::parse("bad key = 1\n"), ConfigError);
    try {
      Config::parse("a = 1\n\nbroken\n", "f.cfg");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("f.cfg:3") != std::string::npos);
    }
    const auto c = Config::parse("a = x\nb = -1\nc = 1.5\nunused = 1\n");
    CHECK_THROWS_AS(c.get_double("a"), ConfigError);
    CHECK_THROWS_AS(c.get_positive("b"), ConfigError);
    CHECK_THROWS_AS(c.get_count("c"), ConfigError);
    CHECK_THROWS_AS(c.get_string("nope"), ConfigError);
    try {
      c.check_all_used();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("unused") != std::string::npos);
    }
    CHECK_THROWS_AS(Config::load("/nonexistent/file.cfg"), IoError);
  }

  TEST_CASE("csv round trip") {
    ResultTable t;
    t.name = "t";
    t.columns = {"a", "b"};
    t.add_row({0.1, 1.0 / 3.0});
    t.add_row({std::numeric_limits<double>::quiet_NaN(), -std::numeric_limits<double>::infinity()});
    t.add_row({1e-300, 12345678901234567.0});
    CHECK_THROWS_AS(t.add_row({1.0}), InvalidInput);
    const ResultTable back = parse_csv(to_csv(t));
    REQUIRE(back.rows.size() == 3);
    CHECK(back.columns == t.columns);
    CHECK(back.rows[0] == t.rows[0]);
    CHECK(std::isnan(back.rows[1][0]));
    CHECK(back.rows[1][1] == -std::numeric_limits<double>::infinity());
    CHECK(back.rows[2] == t.rows[2]);
    CHECK(t.column("b")[0] == 1.0 / 3.0);
    CHECK_THROWS_AS(t.col("c"), InvalidInput);
  }

  TEST_CASE("svg output") {
    ResultTable t;
    t.name = "s";
    t.columns = {"x", "y", "env"};
    PlotSpec spec{"s", "title", "x", {"y"}, {"env"}, false, true, false};
    CHECK(render_svg(t, spec).empty());
    for (int i = 1; i <= 10; ++i) t.add_row({double(i), std::exp(-i), 2 * std::exp(-i)});
    const std::string svg = render_svg(t, spec);
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("stroke-dasharray") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
  }

  TEST_CASE("empty table writes a header and no svg") {
    const auto dir = std::filesystem::temp_directory_path() / "mflab_test_empty";
    std::filesystem::remove_all(dir);
    ResultTable t;
    t.name = "empty";
    t.columns = {"a", "b"};
    t.plots.push_back({"empty", "e", "a", {"b"}, {}, false, false, false});
    const auto paths = emit_outputs(t, dir.string(), true);
    CHECK(paths.size() == 2);
    std::ifstream in(dir / "empty.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "a,b\n");
    CHECK(!std::filesystem::exists(dir / "empty.svg"));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("fit_line") {
    const auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
    CHECK(f.slope == doctest::Approx(2.0));
    CHECK(f.intercept == doctest::Approx(1.0));
  }

  TEST_CASE("unknown experiments and keys are config errors") {
    CHECK_THROWS_AS(make_experiment_config(Config::parse("experiment = nope\n")), ConfigError);
    auto cfg = make_experiment_config(Config::parse("experiment = index_bound_table\ntypo_key = 1\n"));
    CHECK_THROWS_AS(check_experiment(cfg), ConfigError);
    CHECK(experiment_registry().size() == 16);
  }

  TEST_CASE("runs are deterministic") {
    const auto text = "experiment = condition_scan\nmodel = langevin\nU = quadratic(1)\nV = quadratic_interaction(0.5)\n"
                      "d = 2\nN = 8\nsamples = 8\n";
    const auto cfg = make_experiment_config(Config::parse(text));
    const auto a = run_experiment(cfg), b = run_experiment(cfg);
    REQUIRE(a.tables.size() == b.tables.size());
    for (std::size_t i = 0; i < a.tables.size(); ++i) CHECK(to_csv(a.tables[i]) == to_csv(b.tables[i]));
    CHECK(a.summary == b.summary);
    CHECK(a.tables[0].meta["seed"] == kDefaultSeed);
  }

  TEST_CASE("divergence yields an error table") {
    const auto text = "experiment = oracle_linear_gaussian\nmodel = linear_gaussian\nA1 = 0\nA2 = -3000\nR = 1\n"
                      "replicas = 2\n";
    const auto res = run_experiment(make_experiment_config(Config::parse(text)));
    CHECK(res.diverged);
    REQUIRE(!res.tables.empty());
    CHECK(res.tables.back().name == "oracle_linear_gaussian_error");
    CHECK(res.tables.back().columns == std::vector<std::string>{"time", "particle"});
    CHECK(res.tables.back().meta.contains("error"));
  }
}
