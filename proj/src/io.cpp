#include "seqgp/io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "seqgp/error.hpp"

namespace seqgp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw InvalidInput(what + ": not a number: '" + s + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& s, const std::string& what) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidInput(what + ": expected a non-negative integer, got '" + s + "'");
  }
  errno = 0;
  const auto v = std::strtoull(s.c_str(), nullptr, 10);
  if (errno == ERANGE) throw InvalidInput(what + ": integer out of range");
  return v;
}

bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "1" || s == "true" || s == "yes") return true;
  if (s == "0" || s == "false" || s == "no") return false;
  throw InvalidInput(what + ": expected true/false, got '" + s + "'");
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open file: " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot write file: " + path.string());
  return out;
}

/// Rows of a numeric CSV keyed by header name.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw InvalidInput("missing CSV column '" + name + "'");
  }
};

Table read_table(const fs::path& path) {
  auto in = open_in(path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput("empty CSV: " + path.string());
  t.header = split(trim(line), ',');
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != t.header.size()) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(t.header.size()) + " fields");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_double(c, path.string()));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Eigen::VectorXd require_list(const ConfigMap& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw InvalidInput("missing key '" + key + "'");
  return parse_list(it->second);
}

double require_double(const ConfigMap& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw InvalidInput("missing key '" + key + "'");
  return parse_double(it->second, key);
}

std::uint64_t require_uint(const ConfigMap& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw InvalidInput("missing key '" + key + "'");
  return parse_uint(it->second, key);
}

}  // namespace

ModelKind parse_model_kind(const std::string& name) {
  if (name == "regression") return ModelKind::Regression;
  if (name == "options") return ModelKind::Options;
  throw InvalidInput("model must be 'regression' or 'options', got '" + name + "'");
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::Regression ? "regression" : "options";
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Eigen::VectorXd parse_list(const std::string& text) {
  const auto parts = split(text, ',');
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) {
    v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], "list entry");
  }
  return v;
}

std::string format_list(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

ConfigMap read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file: " + path.string());
  ConfigMap cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidInput(path.string() + ":" + std::to_string(lineno) + ": empty key");
    cfg[key] = trim(line.substr(eq + 1));
  }
  return cfg;
}

void write_config_file(const fs::path& path, const ConfigMap& cfg) {
  auto out = open_out(path);
  for (const auto& [k, v] : cfg) out << k << '=' << v << '\n';
}

RunSettings default_settings(ModelKind model) {
  RunSettings s;
  s.model = model;
  RunConfig& r = s.run;
  if (model == ModelKind::Regression) {
    s.n_per_step = 50;
    const double lmax = 3.1622776601683795;
    r.kappa_min = Eigen::VectorXd::Zero(4);
    r.kappa_max = (Eigen::VectorXd(4) << lmax, lmax, lmax, 2.0).finished();
    r.alpha_min = Eigen::VectorXd::Zero(2);
    r.alpha_max = Eigen::VectorXd::Ones(2);
  } else {
    s.n_per_step = 75;
    r.t_steps = 4;
    r.m_samples = 200;
    r.n_initial = 3000;
    r.burn_in = 1000;
    r.thin = 10;
    r.kappa_min = Eigen::VectorXd::Zero(4);
    r.kappa_max = Eigen::VectorXd::Ones(4);
    r.alpha_min = Eigen::Vector2d(-2.5, 0.0);
    r.alpha_max = Eigen::Vector2d(0.5, 0.5);
    r.mode_start = true;
  }
  return s;
}

RunSettings settings_from_config(const ConfigMap& cfg) {
  const auto model_it = cfg.find("model");
  RunSettings s = default_settings(model_it == cfg.end() ? ModelKind::Regression
                                                         : parse_model_kind(model_it->second));
  RunConfig& r = s.run;
  for (const auto& [key, value] : cfg) {
    if (key == "model") continue;
    if (key == "t_steps") r.t_steps = parse_uint(value, key);
    else if (key == "n_per_step") s.n_per_step = parse_uint(value, key);
    else if (key == "tau") r.tau = parse_uint(value, key);
    else if (key == "m_samples") r.m_samples = parse_uint(value, key);
    else if (key == "n_initial") r.n_initial = parse_uint(value, key);
    else if (key == "burn_in") r.burn_in = parse_uint(value, key);
    else if (key == "thin") r.thin = parse_uint(value, key);
    else if (key == "ess_reps") r.ess_reps = static_cast<int>(parse_uint(value, key));
    else if (key == "seed") r.seed = parse_uint(value, key);
    else if (key == "sdss_every_step") r.sdss_every_step = parse_bool(value, key);
    else if (key == "aux_scale") r.aux_scale = parse_double(value, key);
    else if (key == "mode_start") r.mode_start = parse_bool(value, key);
    else if (key == "kappa_max") r.kappa_max = parse_list(value);
    else if (key == "kappa_min") r.kappa_min = parse_list(value);
    else if (key == "alpha_max") r.alpha_max = parse_list(value);
    else if (key == "alpha_min") r.alpha_min = parse_list(value);
    else if (key == "full_size_guard") r.full_size_guard = parse_uint(value, key);
    else if (key == "out_dir") s.out_dir = value;
    else if (key == "data_dir") s.data_dir = fs::path(value);
    else throw InvalidInput("unknown config key '" + key + "'");
  }
  if (s.model == ModelKind::Options && s.n_per_step != 75) {
    throw InvalidInput("n_per_step must be 75 (5 maturities x 15 strikes) for the options model");
  }
  if (s.n_per_step < 2) throw InvalidInput("n_per_step must be >= 2");
  if (r.kappa_max.size() != 4) throw InvalidInput("kappa_max must have 4 entries (l_x1,l_x2,l_t,sigma_f)");
  if (r.kappa_min.size() != 4) throw InvalidInput("kappa_min must have 4 entries");
  if (r.alpha_max.size() != 2 || r.alpha_min.size() != 2) {
    throw InvalidInput("alpha bounds must have 2 entries");
  }
  r.validate();
  return s;
}

ConfigMap settings_to_config(const RunSettings& s) {
  const RunConfig& r = s.run;
  ConfigMap m;
  m["model"] = to_string(s.model);
  m["t_steps"] = std::to_string(r.t_steps);
  m["n_per_step"] = std::to_string(s.n_per_step);
  m["tau"] = std::to_string(r.tau);
  m["m_samples"] = std::to_string(r.m_samples);
  m["n_initial"] = std::to_string(r.n_initial);
  m["burn_in"] = std::to_string(r.burn_in);
  m["thin"] = std::to_string(r.thin);
  m["ess_reps"] = std::to_string(r.ess_reps);
  m["seed"] = std::to_string(r.seed);
  m["sdss_every_step"] = r.sdss_every_step ? "true" : "false";
  m["aux_scale"] = format_double(r.aux_scale);
  m["mode_start"] = r.mode_start ? "true" : "false";
  m["kappa_max"] = format_list(r.kappa_max);
  m["kappa_min"] = format_list(r.kappa_min);
  m["alpha_max"] = format_list(r.alpha_max);
  m["alpha_min"] = format_list(r.alpha_min);
  m["full_size_guard"] = std::to_string(r.full_size_guard);
  m["out_dir"] = s.out_dir.string();
  if (s.data_dir) m["data_dir"] = s.data_dir->string();
  return m;
}

fs::path samples_path(const fs::path& dir, std::size_t t) {
  return dir / ("samples_t" + std::to_string(t) + ".csv");
}

void write_samples_csv(const fs::path& path, const SampleSet& set) {
  auto out = open_out(path);
  if (set.states.empty()) throw InvalidInput("write_samples_csv: empty sample set");
  const auto& s0 = set.states[0];
  out << "iter";
  for (Eigen::Index i = 0; i < s0.f.size(); ++i) out << ",f_" << i + 1;
  for (Eigen::Index i = 0; i < s0.kappa.size(); ++i) out << ",kappa_" << i + 1;
  for (Eigen::Index i = 0; i < s0.alpha.size(); ++i) out << ",alpha_" << i + 1;
  out << '\n';
  for (std::size_t it = 0; it < set.states.size(); ++it) {
    const auto& s = set.states[it];
    out << it + 1;
    for (Eigen::Index i = 0; i < s.f.size(); ++i) out << ',' << format_double(s.f[i]);
    for (Eigen::Index i = 0; i < s.kappa.size(); ++i) out << ',' << format_double(s.kappa[i]);
    for (Eigen::Index i = 0; i < s.alpha.size(); ++i) out << ',' << format_double(s.alpha[i]);
    out << '\n';
  }
}

std::vector<SampleState> read_samples_csv(const fs::path& path) {
  const Table t = read_table(path);
  Eigen::Index nf = 0, nk = 0, na = 0;
  for (const auto& h : t.header) {
    if (h.rfind("f_", 0) == 0) ++nf;
    else if (h.rfind("kappa_", 0) == 0) ++nk;
    else if (h.rfind("alpha_", 0) == 0) ++na;
    else if (h != "iter") throw InvalidInput(path.string() + ": unexpected column '" + h + "'");
  }
  if (t.header.empty() || t.header[0] != "iter" ||
      static_cast<std::size_t>(1 + nf + nk + na) != t.header.size()) {
    throw InvalidInput(path.string() + ": malformed sample header");
  }
  std::vector<SampleState> states;
  states.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    SampleState s;
    s.f = Eigen::Map<const Eigen::VectorXd>(row.data() + 1, nf);
    s.kappa = Eigen::Map<const Eigen::VectorXd>(row.data() + 1 + nf, nk);
    s.alpha = Eigen::Map<const Eigen::VectorXd>(row.data() + 1 + nf + nk, na);
    states.push_back(std::move(s));
  }
  return states;
}

void write_timings_csv(const fs::path& path, const std::vector<StepDiagnostics>& diag) {
  auto out = open_out(path);
  out << "t,wall_time_s\n";
  for (const auto& d : diag) out << d.t << ',' << format_double(d.wall_time_s) << '\n';
}

std::vector<double> read_timings_csv(const fs::path& path) {
  const Table t = read_table(path);
  const auto c = t.column("wall_time_s");
  std::vector<double> out;
  for (const auto& row : t.rows) out.push_back(row[c]);
  return out;
}

MetricsWriter::MetricsWriter(const fs::path& path, std::uint64_t seed) : path_(path), seed_(seed) {
  open_out(path_);  // truncate
}

void MetricsWriter::write(std::size_t t, const std::string& metric, double value) {
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw InvalidInput("cannot write file: " + path_.string());
  nlohmann::ordered_json j;
  j["t"] = t;
  j["metric"] = metric;
  j["value"] = value;
  j["seed"] = seed_;
  out << j.dump() << '\n';
}

void write_regression_dataset(const fs::path& dir, const RegressionDataset& data,
                              const RegressionConfig& cfg) {
  fs::create_directories(dir);
  for (std::size_t t = 0; t < data.inputs.size(); ++t) {
    auto out = open_out(dir / ("data_t" + std::to_string(t + 1) + ".csv"));
    const InputSet& in = data.inputs[t];
    out << "t_index,t_value";
    for (Eigen::Index d = 0; d < in.dim(); ++d) out << ",x" << d + 1;
    out << ",f_true,y\n";
    for (Eigen::Index i = 0; i < in.size(); ++i) {
      out << t + 1 << ',' << format_double(in.t[i]);
      for (Eigen::Index d = 0; d < in.dim(); ++d) out << ',' << format_double(in.x(i, d));
      out << ',' << format_double(data.f_true[t][i]) << ',' << format_double(data.y[t][i]) << '\n';
    }
  }
  ConfigMap truth;
  truth["model"] = "regression";
  truth["t_steps"] = std::to_string(data.inputs.size());
  truth["n_per_step"] = std::to_string(data.inputs.empty() ? 0 : data.inputs[0].size());
  truth["seed"] = std::to_string(cfg.seed);
  truth["kappa_true"] = format_list(data.kappa_true);
  truth["alpha_true"] = format_list(data.alpha_true);
  write_config_file(dir / "truth.txt", truth);
}

RegressionDataset read_regression_dataset(const fs::path& dir) {
  const ConfigMap truth = read_config_file(dir / "truth.txt");
  if (truth.count("model") == 0 || truth.at("model") != "regression") {
    throw InvalidInput(dir.string() + " does not hold a regression dataset");
  }
  RegressionDataset data;
  data.kappa_true = require_list(truth, "kappa_true");
  data.alpha_true = require_list(truth, "alpha_true");
  const auto T = require_uint(truth, "t_steps");
  for (std::size_t t = 1; t <= T; ++t) {
    const Table tab = read_table(dir / ("data_t" + std::to_string(t) + ".csv"));
    const auto n = static_cast<Eigen::Index>(tab.rows.size());
    Eigen::Index dim = 0;
    while (true) {
      const std::string name = "x" + std::to_string(dim + 1);
      bool found = false;
      for (const auto& h : tab.header) found = found || h == name;
      if (!found) break;
      ++dim;
    }
    const auto ct = tab.column("t_value"), cf = tab.column("f_true"), cy = tab.column("y");
    Eigen::VectorXd tv(n), f(n), y(n);
    Eigen::MatrixXd x(n, dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = tab.rows[static_cast<std::size_t>(i)];
      tv[i] = row[ct];
      f[i] = row[cf];
      y[i] = row[cy];
      for (Eigen::Index d = 0; d < dim; ++d) x(i, d) = row[tab.column("x" + std::to_string(d + 1))];
    }
    data.inputs.emplace_back(std::move(tv), std::move(x));
    data.f_true.push_back(std::move(f));
    data.y.push_back(std::move(y));
  }
  return data;
}

void write_option_dataset(const fs::path& dir, const OptionDataset& data,
                          const OptionConfig& cfg) {
  fs::create_directories(dir);
  {
    auto out = open_out(dir / "quotes.csv");
    out << "t_index,t_value,spot,maturity_years,strike,price\n";
    for (std::size_t t = 0; t < data.steps.size(); ++t) {
      const auto& q = data.steps[t];
      for (std::size_t i = 0; i < q.quotes.size(); ++i) {
        out << t + 1 << ',' << format_double(data.t_values[static_cast<Eigen::Index>(t)]) << ','
            << format_double(q.spot) << ',' << format_double(q.quotes[i].maturity) << ','
            << format_double(q.quotes[i].strike) << ','
            << format_double(q.prices[static_cast<Eigen::Index>(i)]) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "surface.csv");
    out << "t_index,maturity_years,strike,f_true,sigma_true\n";
    const auto& g = data.grid;
    for (std::size_t t = 0; t < data.surfaces.size(); ++t) {
      for (Eigen::Index k = 0; k < g.strikes.size(); ++k) {
        for (Eigen::Index m = 0; m < g.maturities.size(); ++m) {
          out << t + 1 << ',' << format_double(g.maturities[m]) << ','
              << format_double(g.strikes[k]) << ','
              << format_double(data.f_true[t][k * g.maturities.size() + m]) << ','
              << format_double(data.surfaces[t].sigma(m, k)) << '\n';
        }
      }
    }
  }
  ConfigMap truth;
  truth["model"] = "options";
  truth["t_steps"] = std::to_string(data.steps.size());
  truth["seed"] = std::to_string(cfg.seed);
  truth["maturities"] = format_list(data.grid.maturities);
  truth["strikes"] = format_list(data.grid.strikes);
  truth["strike_scale"] = format_double(data.grid.strike_scale);
  truth["n_k"] = std::to_string(data.grid.n_k);
  truth["n_t"] = std::to_string(data.grid.n_t);
  truth["rate"] = format_double(data.grid.rate);
  truth["kappa_true"] = format_list(data.kappa_true);
  truth["alpha_true"] = format_list(data.alpha_true);
  write_config_file(dir / "truth.txt", truth);
}

OptionDataset read_option_dataset(const fs::path& dir) {
  const ConfigMap truth = read_config_file(dir / "truth.txt");
  if (truth.count("model") == 0 || truth.at("model") != "options") {
    throw InvalidInput(dir.string() + " does not hold an options dataset");
  }
  OptionDataset data;
  data.grid.maturities = require_list(truth, "maturities");
  data.grid.strikes = require_list(truth, "strikes");
  data.grid.strike_scale = require_double(truth, "strike_scale");
  data.grid.n_k = static_cast<int>(require_uint(truth, "n_k"));
  data.grid.n_t = static_cast<int>(require_uint(truth, "n_t"));
  data.grid.rate = require_double(truth, "rate");
  data.kappa_true = require_list(truth, "kappa_true");
  data.alpha_true = require_list(truth, "alpha_true");
  const auto T = static_cast<Eigen::Index>(require_uint(truth, "t_steps"));
  const Eigen::Index n = data.grid.size();
  const double mu_f = data.alpha_true.size() > 0 ? data.alpha_true[0] : 0.0;

  const Table q = read_table(dir / "quotes.csv");
  if (static_cast<Eigen::Index>(q.rows.size()) != T * n) {
    throw InvalidInput(dir.string() + "/quotes.csv: expected " + std::to_string(T * n) + " rows");
  }
  const auto ct = q.column("t_value"), cs = q.column("spot"), cm = q.column("maturity_years"),
             ck = q.column("strike"), cp = q.column("price");
  data.t_values.resize(T);
  for (Eigen::Index t = 0; t < T; ++t) {
    OptionQuotes oq;
    oq.prices.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = q.rows[static_cast<std::size_t>(t * n + i)];
      oq.spot = row[cs];
      oq.quotes.push_back({row[cm], row[ck]});
      oq.prices[i] = row[cp];
      data.t_values[t] = row[ct];
    }
    data.steps.push_back(std::move(oq));
  }

  const Table s = read_table(dir / "surface.csv");
  if (static_cast<Eigen::Index>(s.rows.size()) != T * n) {
    throw InvalidInput(dir.string() + "/surface.csv: expected " + std::to_string(T * n) + " rows");
  }
  const auto cf = s.column("f_true");
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::VectorXd f(n);
    for (Eigen::Index i = 0; i < n; ++i) f[i] = s.rows[static_cast<std::size_t>(t * n + i)][cf];
    data.surfaces.push_back(
        VolSurface::from_latent(data.grid.maturities, data.grid.strikes, f, mu_f));
    data.f_true.push_back(std::move(f));
  }
  return data;
}

ModelKind dataset_kind(const fs::path& dir) {
  const ConfigMap truth = read_config_file(dir / "truth.txt");
  const auto it = truth.find("model");
  if (it == truth.end()) throw InvalidInput(dir.string() + "/truth.txt: missing key 'model'");
  return parse_model_kind(it->second);
}

}  // namespace seqgp
