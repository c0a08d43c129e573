#include "seqgp/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqgp/diagnostics.hpp"
#include "seqgp/engine.hpp"
#include "seqgp/error.hpp"
#include "seqgp/io.hpp"
#include "seqgp/option_model.hpp"

namespace seqgp {

namespace {

// Streams derived from the run seed: data generation uses the seed itself.
constexpr std::uint64_t kSamplerSalt = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kReportSalt = 0xc2b2ae3d27d4eb4fULL;

constexpr const char* kRunConfigName = "run.cfg";

/// Dataset of either kind plus the model view used by the samplers.
struct LoadedData {
  ModelKind kind = ModelKind::Regression;
  std::optional<RegressionDataset> regression;
  std::optional<OptionDataset> options;
  std::unique_ptr<LikelihoodModel> model;

  std::size_t n_per_step() const { return static_cast<std::size_t>(model->inputs(0).size()); }
};

LoadedData attach_model(LoadedData d) {
  if (d.kind == ModelKind::Regression) {
    d.model = std::make_unique<RegressionModel>(d.regression->model());
  } else {
    d.model = std::make_unique<OptionModel>(d.options->model());
  }
  return d;
}

LoadedData load_dataset(const fs::path& dir) {
  LoadedData d;
  d.kind = dataset_kind(dir);
  if (d.kind == ModelKind::Regression) d.regression = read_regression_dataset(dir);
  else d.options = read_option_dataset(dir);
  return attach_model(std::move(d));
}

void generate_dataset(ModelKind kind, std::size_t t_steps, std::size_t n, std::uint64_t seed,
                      const fs::path& out) {
  if (kind == ModelKind::Regression) {
    RegressionConfig rc;
    rc.t_steps = t_steps;
    rc.n_per_step = n;
    rc.seed = seed;
    write_regression_dataset(out, generate_regression_dataset(rc), rc);
  } else {
    if (n != 75) throw InvalidInput("--n must be 75 for the options model");
    OptionConfig oc;
    oc.t_steps = t_steps;
    oc.seed = seed;
    write_option_dataset(out, generate_option_dataset(oc), oc);
  }
}

/// Loads `data_dir` or generates (and persists) a dataset from the run seed.
LoadedData prepare_data(RunSettings& s) {
  if (!s.data_dir) {
    s.data_dir = s.out_dir / "data";
    generate_dataset(s.model, s.run.t_steps, s.n_per_step, s.run.seed, *s.data_dir);
  }
  LoadedData d = load_dataset(*s.data_dir);
  if (d.kind != s.model) {
    throw InvalidInput("dataset in " + s.data_dir->string() + " is " + to_string(d.kind) +
                       " but the config says " + to_string(s.model));
  }
  if (d.n_per_step() != s.n_per_step) {
    throw InvalidInput("dataset has " + std::to_string(d.n_per_step()) +
                       " points per step, config says n_per_step=" +
                       std::to_string(s.n_per_step));
  }
  if (d.model->num_steps() < s.run.t_steps) {
    throw InvalidInput("dataset has only " + std::to_string(d.model->num_steps()) + " steps");
  }
  return d;
}

RunSettings load_settings(const fs::path& config, const std::optional<std::uint64_t>& seed,
                          const std::optional<std::string>& out,
                          const std::optional<std::string>& data) {
  ConfigMap cfg = read_config_file(config);
  if (seed) cfg["seed"] = std::to_string(*seed);
  if (out) cfg["out_dir"] = *out;
  if (data) cfg["data_dir"] = *data;
  return settings_from_config(cfg);
}

void persist_run(const RunSettings& s, const SequenceResult& res) {
  fs::create_directories(s.out_dir);
  for (const auto& set : res.sets) write_samples_csv(samples_path(s.out_dir, set.t), set);
  write_timings_csv(s.out_dir / "timings.csv", res.diagnostics);
  write_config_file(s.out_dir / kRunConfigName, settings_to_config(s));
}

std::vector<SampleSet> load_samples(const fs::path& dir, const LikelihoodModel& model,
                                    std::size_t t_steps) {
  std::vector<SampleSet> sets;
  for (std::size_t t = 1; t <= t_steps; ++t) {
    SampleSet set;
    set.t = t;
    set.inputs = model.inputs(t - 1);
    set.states = read_samples_csv(samples_path(dir, t));
    if (set.states.empty() || set.states[0].f.size() != set.inputs.size()) {
      throw InvalidInput(samples_path(dir, t).string() + " does not match the dataset");
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

struct RunDir {
  RunSettings settings;
  LoadedData data;
  std::vector<SampleSet> sets;
  std::vector<double> timings;
};

RunDir open_run_dir(const fs::path& dir) {
  RunDir r;
  r.settings = settings_from_config(read_config_file(dir / kRunConfigName));
  if (!r.settings.data_dir) throw InvalidInput(dir.string() + "/run.cfg: missing data_dir");
  r.data = load_dataset(*r.settings.data_dir);
  r.sets = load_samples(dir, *r.data.model, r.settings.run.t_steps);
  if (fs::exists(dir / "timings.csv")) r.timings = read_timings_csv(dir / "timings.csv");
  return r;
}

Eigen::MatrixXd sigma_samples(const SampleSet& set) {
  Eigen::MatrixXd s = set.f_matrix();
  const Eigen::MatrixXd a = set.alpha_matrix();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.cols(); ++j) s(i, j) = softplus(s(i, j) + a(i, 0));
  }
  return s;
}

void write_report(const fs::path& dir, const RunDir& r) {
  MetricsWriter out(dir / "metrics.jsonl", r.settings.run.seed);
  RngStream rng(r.settings.run.seed ^ kReportSalt);
  for (std::size_t k = 0; k < r.sets.size(); ++k) {
    const SampleSet& set = r.sets[k];
    const std::size_t t = set.t;
    if (k < r.timings.size()) out.write(t, "wall_time_s", r.timings[k]);
    out.write(t, "posterior_sd_mean", column_sds(set.f_matrix()).mean());
    const Eigen::VectorXd km = column_means(set.kappa_matrix());
    const Eigen::VectorXd am = column_means(set.alpha_matrix());
    for (Eigen::Index j = 0; j < km.size(); ++j) out.write(t, "kappa_mean_" + std::to_string(j + 1), km[j]);
    for (Eigen::Index j = 0; j < am.size(); ++j) out.write(t, "alpha_mean_" + std::to_string(j + 1), am[j]);
    if (r.data.kind == ModelKind::Regression) {
      const auto& ds = *r.data.regression;
      const Eigen::VectorXd truth = ds.f_true[k].array() + ds.alpha_true[0];
      const auto cov = coverage_report(set, truth, ds.y[k], rng);
      out.write(t, "coverage", *cov.coverage);
      out.write(t, "y_outside", static_cast<double>(*cov.y_outside));
    } else {
      const auto& ds = *r.data.options;
      const auto& sig = ds.surfaces[k].sigma;
      Eigen::VectorXd truth(static_cast<Eigen::Index>(sig.size()));
      for (Eigen::Index kk = 0; kk < sig.cols(); ++kk) {
        for (Eigen::Index m = 0; m < sig.rows(); ++m) truth[kk * sig.rows() + m] = sig(m, kk);
      }
      const Eigen::MatrixXd s = sigma_samples(set);
      out.write(t, "sigma_coverage", band_coverage(s, truth));
      out.write(t, "sigma_sd_mean", column_sds(s).mean());
    }
  }
}

int cmd_generate(const std::string& model, std::size_t t_steps, std::size_t n, std::uint64_t seed,
                 const std::string& out) {
  generate_dataset(parse_model_kind(model), t_steps, n, seed, out);
  std::cout << "wrote " << model << " dataset to " << out << '\n';
  return 0;
}

int cmd_run(RunSettings s, bool baseline, bool override_guard) {
  LoadedData d = prepare_data(s);
  RngStream rng(s.run.seed ^ kSamplerSalt);
  const SequenceResult res = baseline ? full_gibbs_baseline(*d.model, s.run, rng, override_guard)
                                      : run_sequence(*d.model, s.run, rng);
  persist_run(s, res);
  regenerate_report(s.out_dir);
  std::cout << "wrote " << res.sets.size() << " sample files to " << s.out_dir.string() << '\n';
  return 0;
}

int cmd_predict(RunSettings s, std::size_t step) {
  if (s.model != ModelKind::Regression) throw InvalidInput("predict supports the regression model only");
  if (step == 0) step = s.run.t_steps;
  if (step < 2) throw InvalidInput("--step must be >= 2");
  s.run.t_steps = step;
  LoadedData d = prepare_data(s);
  RngStream rng(s.run.seed ^ kSamplerSalt);
  RunConfig hist_cfg = s.run;
  hist_cfg.t_steps = step - 1;
  const SequenceResult hist = run_sequence(*d.model, hist_cfg, rng);
  const std::size_t first = hist.sets.size() > s.run.tau ? hist.sets.size() - s.run.tau : 0;
  const std::span<const SampleSet> window(hist.sets.data() + first, hist.sets.size() - first);
  const auto& reg = static_cast<const RegressionModel&>(*d.model);
  const auto split = half_plane_split(reg.inputs(step - 1));
  const PredictTraces tr = predict_experiment(window, reg, step - 1, split, s.run, rng);

  fs::create_directories(s.out_dir);
  std::ofstream out(s.out_dir / "predict_trace.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + (s.out_dir / "predict_trace.csv").string());
  out << "iter,sequential,history_free,ll_sequential,ll_history_free\n";
  for (Eigen::Index i = 0; i < tr.sequential.size(); ++i) {
    out << i + 1 << ',' << format_double(tr.sequential[i]) << ','
        << format_double(tr.history_free[i]) << ',' << format_double(tr.ll_sequential[i]) << ','
        << format_double(tr.ll_history_free[i]) << '\n';
  }
  write_config_file(s.out_dir / kRunConfigName, settings_to_config(s));
  MetricsWriter m(s.out_dir / "metrics.jsonl", s.run.seed);
  m.write(step, "predictive_ll_sequential", tr.sequential[tr.sequential.size() - 1]);
  m.write(step, "predictive_ll_history_free", tr.history_free[tr.history_free.size() - 1]);
  std::cout << "sequential " << format_double(tr.sequential[tr.sequential.size() - 1])
            << " history-free " << format_double(tr.history_free[tr.history_free.size() - 1])
            << '\n';
  return 0;
}

Functional parse_phi(const std::string& spec) {
  if (spec == "mean") return spatial_mean;
  if (spec == "level") return level_mean;
  if (spec.rfind("coord:", 0) == 0) {
    const long j = std::stol(spec.substr(6));
    if (j < 1) throw InvalidInput("--phi coord index is one-based");
    return [j](const SampleState& s) {
      if (j > s.f.size()) throw InvalidInput("--phi coord index exceeds N");
      return s.f[j - 1];
    };
  }
  throw InvalidInput("--phi must be 'mean', 'level' or 'coord:<j>'");
}

int cmd_compare(const fs::path& seq_dir, const fs::path& full_dir, const fs::path& out_dir,
                const std::string& phi, double budget) {
  const RunDir seq = open_run_dir(seq_dir);
  const RunDir full = open_run_dir(full_dir);
  if (seq.sets.size() != full.sets.size()) throw InvalidInput("runs cover different step counts");
  if (seq.timings.size() != seq.sets.size() || full.timings.size() != full.sets.size()) {
    throw InvalidInput("timings.csv missing or incomplete");
  }
  BiasVarianceOptions opts;
  opts.phi = parse_phi(phi);
  opts.tau = seq.settings.run.tau;
  opts.t_budget = budget;
  const auto rep = bias_variance_report(seq.sets, full.sets, seq.timings, full.timings, opts);

  fs::create_directories(out_dir);
  std::ofstream out(out_dir / "compare.csv", std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write " + (out_dir / "compare.csv").string());
  out << "t,var_full,var_seq,ratio,se_ratio,bias,time_full_s,time_seq_s,delta\n";
  MetricsWriter m(out_dir / "metrics.jsonl", seq.settings.run.seed);
  for (const auto& r : rep.rows) {
    out << r.t << ',' << format_double(r.var_full) << ',' << format_double(r.var_seq) << ','
        << format_double(r.ratio) << ',' << format_double(r.se_ratio) << ','
        << format_double(r.bias) << ',' << format_double(r.time_full_s) << ','
        << format_double(r.time_seq_s) << ',' << format_double(r.delta) << '\n';
    m.write(r.t, "R_t", r.ratio);
    m.write(r.t, "bias", r.bias);
    m.write(r.t, "delta", r.delta);
  }
  m.write(0, "C_full", rep.c_full);
  m.write(0, "C_seq", rep.c_seq);
  m.write(0, "t_budget", rep.t_budget);
  std::cout << "wrote comparison of " << rep.rows.size() << " steps to " << out_dir.string() << '\n';
  return 0;
}

}  // namespace

void regenerate_report(const fs::path& run_dir) { write_report(run_dir, open_run_dir(run_dir)); }

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Sequential Gaussian-process posterior sampling"};
  app.require_subcommand(1);

  std::string gen_model = "regression", gen_out = "data";
  std::size_t gen_t = 10, gen_n = 50;
  std::uint64_t gen_seed = 1;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--model", gen_model, "regression or options")->check(CLI::IsMember({"regression", "options"}));
  gen->add_option("--t-steps", gen_t, "number of steps")->check(CLI::PositiveNumber);
  gen->add_option("--n", gen_n, "points per step (75 for options)")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--out", gen_out, "output directory");

  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, data;
  bool override_guard = false;
  std::size_t step = 0;
  auto add_run_opts = [&](CLI::App* sub) {
    sub->add_option("--config", config, "key=value config file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "override out_dir");
    sub->add_option("--data", data, "dataset directory (default: generate into <out>/data)");
  };
  auto* run = app.add_subcommand("run", "Sequential sampler over all steps");
  add_run_opts(run);
  auto* base = app.add_subcommand("baseline", "Full joint Gibbs baseline");
  add_run_opts(base);
  base->add_flag("--override-guard", override_guard, "allow t*N above full_size_guard");
  auto* pred = app.add_subcommand("predict", "Held-out half-plane predictive comparison");
  add_run_opts(pred);
  pred->add_option("--step", step, "one-based step to predict (default: t_steps)");

  std::string seq_dir, full_dir, cmp_out = "compare", phi = "mean";
  double budget = 0.0;
  auto* cmp = app.add_subcommand("compare", "Bias-variance comparison of two runs");
  cmp->add_option("--seq", seq_dir, "sequential run directory")->required();
  cmp->add_option("--full", full_dir, "baseline run directory")->required();
  cmp->add_option("--out", cmp_out, "output directory");
  cmp->add_option("--phi", phi, "functional: mean, level or coord:<j>");
  cmp->add_option("--budget", budget, "time budget t_c in seconds (default: full run time)");

  std::string report_dir;
  auto* rep = app.add_subcommand("report", "Recompute metrics.jsonl from a run directory");
  rep->add_option("--run", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_generate(gen_model, gen_t, gen_n, gen_seed, gen_out);
    if (*run) return cmd_run(load_settings(config, seed, out, data), false, false);
    if (*base) return cmd_run(load_settings(config, seed, out, data), true, override_guard);
    if (*pred) return cmd_predict(load_settings(config, seed, out, data), step);
    if (*cmp) return cmd_compare(seq_dir, full_dir, cmp_out, phi, budget);
    if (*rep) {
      regenerate_report(report_dir);
      return 0;
    }
  } catch (const InvalidInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sampler error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace seqgp
