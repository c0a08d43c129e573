#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "seqgp/engine.hpp"
#include "seqgp/likelihood.hpp"
#include "seqgp/option_model.hpp"

namespace seqgp {

namespace fs = std::filesystem;

enum class ModelKind { Regression, Options };

ModelKind parse_model_kind(const std::string& name);
std::string to_string(ModelKind kind);

/// Parsed key=value config. Blank lines and lines starting with '#' are skipped.
using ConfigMap = std::map<std::string, std::string>;

/// Throws InvalidInput naming the file when it cannot be opened or a line is
/// malformed.
ConfigMap read_config_file(const fs::path& path);

/// Resolved run settings after schema validation.
struct RunSettings {
  ModelKind model = ModelKind::Regression;
  std::size_t n_per_step = 50;
  RunConfig run;
  fs::path out_dir = "out";
  std::optional<fs::path> data_dir;
};

/// Model-specific default bounds and sampler settings.
RunSettings default_settings(ModelKind model);

/// Validates keys and values; unknown keys are an error.
RunSettings settings_from_config(const ConfigMap& cfg);

/// Inverse of settings_from_config; round-trips exactly.
ConfigMap settings_to_config(const RunSettings& s);
void write_config_file(const fs::path& path, const ConfigMap& cfg);

/// %.17g formatting.
std::string format_double(double v);
Eigen::VectorXd parse_list(const std::string& text);
std::string format_list(const Eigen::VectorXd& v);

/// samples_t<t>.csv: header iter,f_1..f_N,kappa_1..,alpha_1..
void write_samples_csv(const fs::path& path, const SampleSet& set);
/// Reads states back; `inputs` and `t` are attached by the caller.
std::vector<SampleState> read_samples_csv(const fs::path& path);
fs::path samples_path(const fs::path& dir, std::size_t t);

/// Per-step wall times: timings.csv with header t,wall_time_s.
void write_timings_csv(const fs::path& path, const std::vector<StepDiagnostics>& diag);
std::vector<double> read_timings_csv(const fs::path& path);

/// Appends {"t","metric","value","seed"} lines.
class MetricsWriter {
 public:
  MetricsWriter(const fs::path& path, std::uint64_t seed);
  void write(std::size_t t, const std::string& metric, double value);

 private:
  fs::path path_;
  std::uint64_t seed_;
};

/// data_t<t>.csv (t_index,t_value,x1..xD,f_true,y) plus truth.txt.
void write_regression_dataset(const fs::path& dir, const RegressionDataset& data,
                              const RegressionConfig& cfg);
RegressionDataset read_regression_dataset(const fs::path& dir);

/// quotes.csv (t_index,t_value,spot,maturity_years,strike,price),
/// surface.csv (t_index,maturity_years,strike,f_true,sigma_true) plus truth.txt.
void write_option_dataset(const fs::path& dir, const OptionDataset& data,
                          const OptionConfig& cfg);
OptionDataset read_option_dataset(const fs::path& dir);

/// Model kind recorded in a dataset directory.
ModelKind dataset_kind(const fs::path& dir);

}  // namespace seqgp
