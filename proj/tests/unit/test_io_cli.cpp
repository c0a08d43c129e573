#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqgp/cli.hpp"
#include "seqgp/error.hpp"
#include "seqgp/io.hpp"

using namespace seqgp;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("seqgp_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "seqgp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

const char* kSmallRun =
    "# small regression run\n"
    "model=regression\n"
    "t_steps=2\n"
    "n_per_step=6\n"
    "m_samples=20\n"
    "n_initial=300\n"
    "burn_in=100\n"
    "thin=5\n"
    "seed=3\n";

}  // namespace

TEST_CASE("config parsing") {
  const fs::path dir = scratch("config");
  write_text(dir / "a.cfg", kSmallRun);
  const auto s = settings_from_config(read_config_file(dir / "a.cfg"));
  CHECK(s.model == ModelKind::Regression);
  CHECK(s.run.t_steps == 2);
  CHECK(s.n_per_step == 6);
  CHECK(s.run.seed == 3);
  CHECK(s.run.kappa_max.size() == 4);

  const auto round = settings_from_config(settings_to_config(s));
  CHECK(settings_to_config(round) == settings_to_config(s));

  auto with = [&](const std::string& extra) {
    write_text(dir / "b.cfg", std::string(kSmallRun) + extra);
    return settings_from_config(read_config_file(dir / "b.cfg"));
  };
  CHECK_THROWS_AS(with("bogus_key=1\n"), InvalidInput);
  CHECK_THROWS_AS(with("thin=0\n"), InvalidInput);
  CHECK_THROWS_AS(with("kappa_max=1,2\n"), InvalidInput);
  CHECK_THROWS_AS(with("tau=abc\n"), InvalidInput);
  CHECK(with("tau=2\n").run.tau == 2);

  try {
    read_config_file(dir / "missing.cfg");
    FAIL("expected an exception");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("missing.cfg") != std::string::npos);
  }

  const auto opts = default_settings(ModelKind::Options);
  CHECK(opts.n_per_step == 75);
  CHECK(opts.run.kappa_max.size() == 4);
}

TEST_CASE("list and number formatting round trips") {
  const Eigen::Vector3d v(0.1, 1.0 / 3.0, -2.5e-17);
  CHECK(parse_list(format_list(v)) == v);
  CHECK(std::stod(format_double(0.1)) == 0.1);
}

TEST_CASE("sample and timing files round trip") {
  const fs::path dir = scratch("samples");
  RngStream rng(1);
  SampleSet set;
  set.t = 2;
  for (int i = 0; i < 5; ++i) {
    set.states.push_back({rng.normal_vector(3), rng.normal_vector(4), rng.normal_vector(2), {}});
  }
  write_samples_csv(samples_path(dir, 2), set);
  CHECK(samples_path(dir, 2).filename() == "samples_t2.csv");
  const auto back = read_samples_csv(samples_path(dir, 2));
  REQUIRE(back.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(back[i].f == set.states[i].f);
    CHECK(back[i].kappa == set.states[i].kappa);
    CHECK(back[i].alpha == set.states[i].alpha);
  }
  std::vector<StepDiagnostics> diag(2);
  diag[0].t = 1;
  diag[0].wall_time_s = 0.125;
  diag[1].t = 2;
  diag[1].wall_time_s = 1.0 / 3.0;
  write_timings_csv(dir / "timings.csv", diag);
  CHECK(read_timings_csv(dir / "timings.csv") == std::vector<double>{0.125, 1.0 / 3.0});
}

TEST_CASE("dataset files round trip") {
  const fs::path dir = scratch("datasets");
  RegressionConfig rc;
  rc.t_steps = 2;
  rc.n_per_step = 4;
  const auto d = generate_regression_dataset(rc);
  write_regression_dataset(dir / "reg", d, rc);
  CHECK(dataset_kind(dir / "reg") == ModelKind::Regression);
  const auto r = read_regression_dataset(dir / "reg");
  CHECK(r.y[1] == d.y[1]);
  CHECK(r.inputs[1].x == d.inputs[1].x);
  CHECK(r.f_true[0] == d.f_true[0]);
  CHECK(r.kappa_true == d.kappa_true);

  OptionConfig oc;
  oc.t_steps = 2;
  oc.grid.n_k = 60;
  oc.grid.n_t = 20;
  const auto o = generate_option_dataset(oc);
  write_option_dataset(dir / "opt", o, oc);
  CHECK(dataset_kind(dir / "opt") == ModelKind::Options);
  const auto ob = read_option_dataset(dir / "opt");
  CHECK(ob.steps[1].prices == o.steps[1].prices);
  CHECK(ob.steps[1].spot == o.steps[1].spot);
  CHECK(ob.f_true[1] == o.f_true[1]);
  CHECK(ob.grid.n_k == o.grid.n_k);
}

TEST_CASE("command line end to end") {
  const fs::path dir = scratch("cli");
  write_text(dir / "run.cfg", kSmallRun);
  const std::string cfg = (dir / "run.cfg").string();

  CHECK(cli({"run", "--config", cfg, "--out", (dir / "a").string()}) == 0);
  CHECK(cli({"run", "--config", cfg, "--out", (dir / "b").string()}) == 0);
  CHECK(slurp(dir / "a" / "samples_t2.csv") == slurp(dir / "b" / "samples_t2.csv"));
  CHECK(fs::exists(dir / "a" / "timings.csv"));

  const std::string metrics = slurp(dir / "a" / "metrics.jsonl");
  std::istringstream lines(metrics);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("t"));
    CHECK(j.contains("metric"));
    CHECK(j.contains("value"));
    CHECK(j["seed"] == 3);
    ++count;
  }
  CHECK(count > 0);
  CHECK(metrics.find("\"coverage\"") != std::string::npos);

  regenerate_report(dir / "a");
  CHECK(slurp(dir / "a" / "metrics.jsonl") == metrics);
  CHECK(cli({"report", "--run", (dir / "a").string()}) == 0);
  CHECK(slurp(dir / "a" / "metrics.jsonl") == metrics);

  CHECK(cli({"baseline", "--config", cfg, "--out", (dir / "full").string(), "--data",
             (dir / "a" / "data").string()}) == 0);
  CHECK(cli({"compare", "--seq", (dir / "a").string(), "--full", (dir / "full").string(), "--out",
             (dir / "cmp").string()}) == 0);
  CHECK(fs::exists(dir / "cmp" / "compare.csv"));
  CHECK(cli({"compare", "--seq", (dir / "a").string(), "--full", (dir / "full").string(), "--out",
             (dir / "cmp_level").string(), "--phi", "level"}) == 0);
  CHECK(cli({"compare", "--seq", (dir / "a").string(), "--full", (dir / "full").string(), "--out",
             (dir / "cmp_bad").string(), "--phi", "median"}) == 1);
  CHECK(cli({"predict", "--config", cfg, "--out", (dir / "pred").string()}) == 0);
  CHECK(fs::exists(dir / "pred" / "predict_trace.csv"));

  CHECK(cli({"run", "--config", (dir / "nope.cfg").string()}) == 1);
  CHECK(cli({"run", "--config", cfg, "--bogus"}) == 1);
  CHECK(cli({}) == 1);
  CHECK(cli({"--help"}) == 0);
  write_text(dir / "bad.cfg", std::string(kSmallRun) + "unknown=1\n");
  CHECK(cli({"run", "--config", (dir / "bad.cfg").string()}) == 1);
}

TEST_CASE("generate writes a dataset") {
  const fs::path dir = scratch("generate");
  CHECK(cli({"generate", "--model", "regression", "--t-steps", "2", "--n", "5", "--seed", "4",
             "--out", (dir / "d").string()}) == 0);
  const auto d = read_regression_dataset(dir / "d");
  CHECK(d.inputs.size() == 2);
  CHECK(d.inputs[0].size() == 5);
  CHECK(cli({"generate", "--model", "bogus", "--out", (dir / "x").string()}) == 1);
}
