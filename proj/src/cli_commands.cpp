#include "frailty/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "frailty/error.hpp"
#include "frailty/hazard.hpp"
#include "frailty/portfolio.hpp"
#include "frailty/prediction.hpp"
#include "frailty/rng.hpp"
#include "frailty/scoring.hpp"

namespace fs = std::filesystem;

namespace frailty {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  Rng rng = Rng::stream(Rng::stream(seed, a).index(UINT64_MAX), b);
  return rng.index(UINT64_MAX);
}

void write_file_atomic(const std::string& path, const std::string& text) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
  }
}

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::string num(double v) {
  return std::isfinite(v) ? format_number(v) : std::string("nan");
}

// AUC and H-measure are undefined when a period has a single class.
double metric_or_nan(double (*fn)(std::span<const double>, std::span<const int>),
                     std::span<const double> p, std::span<const int> y) {
  const bool has0 = std::find(y.begin(), y.end(), 0) != y.end();
  const bool has1 = std::find(y.begin(), y.end(), 1) != y.end();
  if (!has0 || !has1) return std::numeric_limits<double>::quiet_NaN();
  return fn(p, y);
}

double auc_fn(std::span<const double> p, std::span<const int> y) { return auc(p, y); }
double h_fn(std::span<const double> p, std::span<const int> y) { return h_measure(p, y); }

double mean_finite(const std::vector<double>& v) {
  double s = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  }
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

Smoothness parse_nu(double nu) { return smoothness_from_value(nu); }

PanelDataset load_for_model(const FittedModel& model, const std::string& panel_path) {
  return parse_panel(read_text(panel_path), model.schema);
}

double realized_loss(const PanelDataset& panel) {
  double loss = 0.0;
  for (const auto& o : panel.observations()) loss += o.y ? o.balance : 0.0;
  return loss;
}

std::string format_predictions(const PanelDataset& data, const Eigen::VectorXd& probs) {
  std::string out = "loan_id,year,prob\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += data[i].loan_id + "," + std::to_string(data[i].period) + "," +
           format_number(probs[static_cast<Eigen::Index>(i)]) + "\n";
  }
  return out;
}

std::string theta_row(const CovarianceParams& t) {
  return format_number(t.sigma2) + "," + format_number(t.rho_s) + "," +
         (t.rho_t ? format_number(*t.rho_t) : std::string(""));
}

// ------------------------------------------------------------------ backtest

struct ModelRun {
  ModelKind kind;
  int year = 0;
  std::vector<double> probs;
  std::vector<int> labels;
  double realized = 0.0;
  LossSummary loss;
  double crps = 0.0;
  double qloss = 0.0;
};

struct TuningRecord {
  int year = 0;
  TuningReportRow row;
  bool selected = false;
};

class StagingDir {
 public:
  explicit StagingDir(const std::string& out_dir) : out_(out_dir) {
    fs::create_directories(out_);
    dir_ = out_ / ".backtest-staging";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~StagingDir() {
    std::error_code ec;
    fs::remove_all(dir_, ec);
  }

  void write(const std::string& name, const std::string& text) {
    write_file_atomic((dir_ / name).string(), text);
    names_.push_back(name);
  }

  void commit() {
    for (const auto& name : names_) {
      std::error_code ec;
      fs::rename(dir_ / name, out_ / name, ec);
      if (ec) throw Error("cannot move " + name + " into " + out_.string() + ": " + ec.message());
    }
  }

 private:
  fs::path out_;
  fs::path dir_;
  std::vector<std::string> names_;
};

}  // namespace

void run_backtest(const BacktestConfig& config) {
  if (config.models.empty()) throw ValidationError("backtest: no models requested");
  if (config.n_sims < 1) throw ValidationError("backtest: n_sims must be at least 1");
  const PanelDataset panel = load_panel(config.panel_path, config.schema_path);
  const int last = config.last_test ? config.last_test : panel.max_period();
  const SplitPlan plan = expanding_window_split(panel, config.first_test, last);
  const int min_period = panel.min_period();

  StagingDir staging(config.out_dir);
  std::vector<ModelRun> runs;
  std::vector<TuningRecord> tuning_records;
  std::string theta_csv = "model,test_year,sigma2,rho_s,rho_t\n";
  std::string predictions_csv = "model,loan_id,year,prob,default\n";
  std::optional<TreeTuning> reused;

  for (std::size_t w = 0; w < plan.windows.size(); ++w) {
    const SplitWindow& win = plan.windows[w];
    const std::string window_id = "window " + std::to_string(w) + " (test " +
                                  std::to_string(win.test) + ")";
    try {
      const PanelDataset train = panel.periods(min_period, win.train_upper);
      const PanelDataset test = panel.periods(win.test, win.test);
      const std::vector<int> labels = test.labels();
      for (std::size_t k = 0; k < config.models.size(); ++k) {
        const ModelKind kind = config.models[k];
        FitOptions options = config.fit;
        options.seed = derive_seed(config.seed, w, 2 * k);
        FittedModel model;
        if (kind == ModelKind::boost_spacetime) {
          TreeTuning tuning = config.fixed_tuning;
          if (config.tune && !(config.reuse_tuning && reused)) {
            const PanelDataset inner = panel.periods(min_period, win.inner_train_upper);
            const PanelDataset validation = panel.periods(win.validation, win.validation);
            const TuningResult tr = tune(inner, validation, config.grid, options);
            tuning = tr.best;
            for (const auto& row : tr.report) {
              tuning_records.push_back({win.test, row, row.tuning == tr.best});
            }
            reused = tuning;
          } else if (config.tune && reused) {
            tuning = *reused;
          }
          model = fit_boosted(train, tuning, options).model;
        } else {
          model = fit_linear(train, kind, options);
        }

        const ProbabilityPrediction pred = predict_default_probs(model, test, config.nodes);
        const LossDistribution dist =
            simulate_losses(model, test, config.n_sims, derive_seed(config.seed, w, 2 * k + 1),
                            config.threads);

        ModelRun run;
        run.kind = kind;
        run.year = win.test;
        run.probs.assign(pred.probs.data(), pred.probs.data() + pred.probs.size());
        run.labels = labels;
        run.realized = realized_loss(test);
        run.loss = summarize(dist);
        run.crps = crps_empirical(dist.samples, run.realized);
        run.qloss = quantile_loss(run.loss.q99, run.realized, 0.99);
        runs.push_back(std::move(run));

        const std::string name = to_string(kind);
        for (std::size_t i = 0; i < test.size(); ++i) {
          predictions_csv += name + "," + test[i].loan_id + "," + std::to_string(test[i].period) +
                             "," + format_number(pred.probs[static_cast<Eigen::Index>(i)]) + "," +
                             std::to_string(test[i].y) + "\n";
        }
        if (model.latent) {
          theta_csv += name + "," + std::to_string(win.test) + "," +
                       theta_row(model.latent->theta) + "\n";
          if (config.frailty_maps) {
            const auto rows = frailty_map(model);
            staging.write("frailty_map_" + name + "_" + std::to_string(win.test) + ".csv",
                          format_frailty_map(rows));
          }
        }
      }
    } catch (const std::exception& e) {
      throw Error("backtest " + window_id + ": " + e.what());
    }
  }

  // Bins from all models' and years' predictions pooled.
  std::vector<double> pooled;
  for (const auto& r : runs) pooled.insert(pooled.end(), r.probs.begin(), r.probs.end());
  const BinSpec bins = quantile_bins(pooled, config.ece_bins);

  std::string prob_csv = "model,year,auc,h_measure,log_loss,brier,ece\n";
  std::string loss_csv = "model,crps,qloss99,rmse\n";
  std::string by_year_csv = "model,year,realized,mean,q99,crps,qloss99\n";
  for (const ModelKind kind : config.models) {
    std::vector<double> a, h, ll, br, ec, crps, ql, means, realized;
    for (const auto& r : runs) {
      if (r.kind != kind) continue;
      a.push_back(metric_or_nan(auc_fn, r.probs, r.labels));
      h.push_back(metric_or_nan(h_fn, r.probs, r.labels));
      ll.push_back(log_loss(r.probs, r.labels));
      br.push_back(brier(r.probs, r.labels));
      ec.push_back(ece(r.probs, r.labels, bins));
      crps.push_back(r.crps);
      ql.push_back(r.qloss);
      means.push_back(r.loss.mean);
      realized.push_back(r.realized);
      prob_csv += to_string(kind) + "," + std::to_string(r.year) + "," + num(a.back()) + "," +
                  num(h.back()) + "," + num(ll.back()) + "," + num(br.back()) + "," +
                  num(ec.back()) + "\n";
      by_year_csv += to_string(kind) + "," + std::to_string(r.year) + "," + num(r.realized) +
                     "," + num(r.loss.mean) + "," + num(r.loss.q99) + "," + num(r.crps) + "," +
                     num(r.qloss) + "\n";
    }
    prob_csv += to_string(kind) + ",mean," + num(mean_finite(a)) + "," + num(mean_finite(h)) +
                "," + num(mean_finite(ll)) + "," + num(mean_finite(br)) + "," +
                num(mean_finite(ec)) + "\n";
    loss_csv += to_string(kind) + "," + num(mean_finite(crps)) + "," + num(mean_finite(ql)) + "," +
                num(rmse(means, realized)) + "\n";
  }

  std::string tuning_csv =
      "test_year,learning_rate,max_depth,min_samples_leaf,l2_lambda,best_iteration,"
      "validation_auc,selected\n";
  for (const auto& t : tuning_records) {
    const auto& tt = t.row.tuning;
    tuning_csv += std::to_string(t.year) + "," + format_number(tt.learning_rate) + "," +
                  std::to_string(tt.max_depth) + "," + std::to_string(tt.min_samples_leaf) + "," +
                  format_number(tt.l2_lambda) + "," + std::to_string(t.row.best_iteration) + "," +
                  num(t.row.validation_auc) + "," + (t.selected ? "1" : "0") + "\n";
  }

  staging.write("prob_metrics.csv", prob_csv);
  staging.write("loss_metrics.csv", loss_csv);
  staging.write("loss_by_year.csv", by_year_csv);
  staging.write("theta_by_window.csv", theta_csv);
  staging.write("predictions.csv", predictions_csv);
  if (!tuning_records.empty()) staging.write("tuning.csv", tuning_csv);
  staging.commit();
}

// ----------------------------------------------------------------------- CLI

namespace {

struct GlobalOptions {
  std::uint64_t seed = 1;
  std::string out_dir = ".";
  int threads = 1;
};

struct ModelFlags {
  double nu = 1.5;
  int neighbors = 20;
  bool no_year = false;
  int theta_steps = 10;
  int patience = 0;
  int max_outer = 50;

  void add(CLI::App* cmd) {
    cmd->add_option("--nu", nu, "Matern smoothness (0.5, 1.5 or 2.5)")->capture_default_str();
    cmd->add_option("--neighbors", neighbors, "Vecchia neighbor budget m")->capture_default_str();
    cmd->add_flag("--no-year", no_year, "Drop year fixed effects");
    cmd->add_option("--theta-steps", theta_steps, "Covariance steps per boosting iteration")
        ->capture_default_str();
    cmd->add_option("--patience", patience, "Early-stopping patience during tuning (0: off)")
        ->capture_default_str();
    cmd->add_option("--max-outer", max_outer, "Outer iterations for linear GP fits")
        ->capture_default_str();
  }

  FitOptions options(std::uint64_t seed) const {
    FitOptions o;
    o.nu = parse_nu(nu);
    o.num_neighbors = neighbors;
    o.seed = seed;
    o.include_year = !no_year;
    o.theta_steps_per_iteration = theta_steps;
    o.patience = patience;
    o.max_outer = max_outer;
    return o;
  }
};

struct TreeFlags {
  double learning_rate = 0.1;
  int max_depth = 5;
  int min_leaf = 10;
  double lambda = 0.0;
  int trees = 100;

  void add(CLI::App* cmd) {
    cmd->add_option("--learning-rate", learning_rate)->capture_default_str();
    cmd->add_option("--max-depth", max_depth)->capture_default_str();
    cmd->add_option("--min-leaf", min_leaf)->capture_default_str();
    cmd->add_option("--lambda", lambda, "L2 leaf penalty")->capture_default_str();
    cmd->add_option("--trees", trees, "Boosting iterations")->capture_default_str();
  }

  TreeTuning tuning() const {
    TreeTuning t;
    t.learning_rate = learning_rate;
    t.max_depth = max_depth;
    t.min_samples_leaf = min_leaf;
    t.l2_lambda = lambda;
    t.max_trees = trees;
    t.validate();
    return t;
  }
};

struct GridFlags {
  TuningGrid grid;
  void add(CLI::App* cmd) {
    cmd->add_option("--grid-learning-rates", grid.learning_rates)->delimiter(',');
    cmd->add_option("--grid-max-depths", grid.max_depths)->delimiter(',');
    cmd->add_option("--grid-min-leaf", grid.min_samples_leaf)->delimiter(',');
    cmd->add_option("--grid-lambdas", grid.l2_lambdas)->delimiter(',');
    cmd->add_option("--grid-max-trees", grid.max_trees)->capture_default_str();
  }
};

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// Joins a probability file to labels, either from its own `default` column
// or from a panel keyed by (loan_id, year).
void read_scored_probs(const std::string& path, const std::string& panel_path,
                       const std::string& schema_path, std::vector<double>& probs,
                       std::vector<int>& labels) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty probability file " + path, 1);
  const auto header = split_csv_line(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_prob = col("prob"), c_def = col("default"), c_id = col("loan_id"),
            c_year = col("year");
  if (c_prob < 0) throw ParseError("probability file lacks a prob column", 1);
  std::map<std::pair<std::string, int>, int> truth;
  if (!panel_path.empty()) {
    const PanelDataset panel = load_panel(panel_path, schema_path);
    for (const auto& o : panel.observations()) truth[{o.loan_id, o.period}] = o.y;
    if (c_id < 0 || c_year < 0) throw ParseError("probability file lacks loan_id/year", 1);
  } else if (c_def < 0) {
    throw ValidationError("evaluate: give --panel or a probability file with a default column");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) throw ParseError("wrong number of fields", lineno);
    try {
      probs.push_back(std::stod(f[c_prob]));
      if (!panel_path.empty()) {
        const auto it = truth.find({f[c_id], std::stoi(f[c_year])});
        if (it == truth.end()) {
          throw ValidationError("no panel row for loan " + f[c_id] + " year " + f[c_year]);
        }
        labels.push_back(it->second);
      } else {
        labels.push_back(std::stoi(f[c_def]));
      }
    } catch (const std::invalid_argument&) {
      throw ParseError("malformed number", lineno);
    } catch (const std::out_of_range&) {
      throw ParseError("number out of range", lineno);
    }
  }
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Latent spatio-temporal frailty models for loan default risk"};
  app.set_config("--config", "", "Key-value config file (flags override it)");
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for simulation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic panel");
  SynthConfig sc;
  std::string synth_mode = "nonlinear";
  double rho_t = 2.0;
  bool spatial_only = false;
  synth->add_option("--n-loans", sc.n_loans)->capture_default_str();
  synth->add_option("--n-periods", sc.n_periods)->capture_default_str();
  synth->add_option("--first-period", sc.first_period)->capture_default_str();
  synth->add_option("--n-sites", sc.n_sites, "Distinct locations (0: one per loan)")
      ->capture_default_str();
  synth->add_option("--n-features", sc.n_features)->capture_default_str();
  synth->add_option("--sigma2", sc.sigma2)->capture_default_str();
  synth->add_option("--rho-s", sc.rho_s)->capture_default_str();
  synth->add_option("--rho-t", rho_t)->capture_default_str();
  synth->add_flag("--spatial-only", spatial_only, "Generate a purely spatial latent process");
  synth->add_option("--baseline", sc.baseline)->capture_default_str();
  synth->add_option("--beta", sc.beta, "Linear-mode coefficients")->delimiter(',');
  synth->add_option("--exit-rate", sc.exit_rate)->capture_default_str();
  synth->add_option("--mode", synth_mode)
      ->check(CLI::IsMember({"linear", "nonlinear"}))
      ->capture_default_str();
  double synth_nu = 1.5;
  synth->add_option("--nu", synth_nu)->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a model to a panel");
  std::string panel_path, schema_path, model_kind = "boost-spacetime", model_out = "model.json";
  bool fit_tune = false;
  ModelFlags fit_model;
  TreeFlags fit_tree;
  GridFlags fit_grid;
  fit->add_option("--panel", panel_path)->required()->check(CLI::ExistingFile);
  fit->add_option("--schema", schema_path)->required()->check(CLI::ExistingFile);
  fit->add_option("--model", model_kind)
      ->check(CLI::IsMember({"linear-independent", "linear-spatial", "linear-spacetime",
                             "boost-spacetime"}))
      ->capture_default_str();
  fit->add_option("--output", model_out, "Model file name inside --out-dir")->capture_default_str();
  fit->add_flag("--tune", fit_tune, "Tune the boosted model with the last period as validation");
  fit_model.add(fit);
  fit_tree.add(fit);
  fit_grid.add(fit);

  // predict
  auto* predict = app.add_subcommand("predict", "Predict default probabilities");
  std::string model_path, predict_out = "predictions.csv";
  int nodes = kDefaultQuadratureNodes;
  predict->add_option("--model-file", model_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--panel", panel_path)->required()->check(CLI::ExistingFile);
  predict->add_option("--nodes", nodes, "Gauss-Hermite nodes")->capture_default_str();
  predict->add_option("--output", predict_out)->capture_default_str();

  // portfolio
  auto* portfolio = app.add_subcommand("portfolio", "Simulate the portfolio loss distribution");
  int n_sims = kDefaultSimulations;
  std::optional<int> period;
  portfolio->add_option("--model-file", model_path)->required()->check(CLI::ExistingFile);
  portfolio->add_option("--panel", panel_path)->required()->check(CLI::ExistingFile);
  portfolio->add_option("--n-sims", n_sims)->check(CLI::PositiveNumber)->capture_default_str();
  portfolio->add_option("--period", period, "Restrict the panel to one period");

  // frailty-map
  auto* fmap = app.add_subcommand("frailty-map", "Posterior-mean latent frailty");
  std::vector<int> map_periods;
  int grid_size = 0;
  std::string map_out = "frailty_map.csv";
  fmap->add_option("--model-file", model_path)->required()->check(CLI::ExistingFile);
  fmap->add_option("--periods", map_periods, "Periods for a regular grid")->delimiter(',');
  fmap->add_option("--grid", grid_size, "Grid points per axis over the training box (0: training "
                                        "locations)")
      ->capture_default_str();
  fmap->add_option("--output", map_out)->capture_default_str();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score predicted probabilities");
  std::string probs_path, eval_out = "metrics.csv";
  int ece_bins = 20;
  evaluate->add_option("--probs", probs_path)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--panel", panel_path)->check(CLI::ExistingFile);
  evaluate->add_option("--schema", schema_path)->check(CLI::ExistingFile);
  evaluate->add_option("--bins", ece_bins)->capture_default_str();
  evaluate->add_option("--output", eval_out)->capture_default_str();

  // backtest
  auto* backtest = app.add_subcommand("backtest", "Expanding-window backtest");
  BacktestConfig bc;
  std::vector<std::string> bt_models;
  ModelFlags bt_model;
  TreeFlags bt_tree;
  GridFlags bt_grid;
  bool no_tune = false, no_maps = false;
  backtest->add_option("--panel", bc.panel_path)->required()->check(CLI::ExistingFile);
  backtest->add_option("--schema", bc.schema_path)->required()->check(CLI::ExistingFile);
  backtest->add_option("--first-test", bc.first_test)->required();
  backtest->add_option("--last-test", bc.last_test, "Last test period (0: last in panel)")
      ->capture_default_str();
  backtest->add_option("--models", bt_models)->delimiter(',');
  backtest->add_option("--n-sims", bc.n_sims)->check(CLI::PositiveNumber)->capture_default_str();
  backtest->add_option("--nodes", bc.nodes)->capture_default_str();
  backtest->add_option("--bins", bc.ece_bins)->capture_default_str();
  backtest->add_flag("--no-tune", no_tune, "Use the fixed tree settings for the boosted model");
  backtest->add_flag("--reuse-tuning", bc.reuse_tuning, "Tune on the first window only");
  backtest->add_flag("--no-maps", no_maps, "Skip frailty-map files");
  bt_model.add(backtest);
  bt_tree.add(backtest);
  bt_grid.add(backtest);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) {
      sc.seed = g.seed;
      sc.mode = synth_mode == "linear" ? SynthMode::linear : SynthMode::nonlinear;
      sc.rho_t = spatial_only ? std::nullopt : std::optional<double>(rho_t);
      sc.nu = parse_nu(synth_nu);
      const SynthResult r = generate_synthetic(sc);
      write_file_atomic(join_path(g.out_dir, "panel.csv"), format_panel(r.data));
      write_file_atomic(join_path(g.out_dir, "schema.txt"), format_schema(r.data.schema()));
      write_file_atomic(join_path(g.out_dir, "truth.json"), format_truth_json(r.truth));
      print_warnings(r.data.warnings());
    } else if (*fit) {
      const PanelDataset data = load_panel(panel_path, schema_path);
      const ModelKind kind = model_kind_from_string(model_kind);
      const FitOptions options = fit_model.options(g.seed);
      FittedModel model;
      if (kind == ModelKind::boost_spacetime) {
        TreeTuning tuning = fit_tree.tuning();
        if (fit_tune) {
          const int hi = data.max_period();
          const TuningResult tr = tune(data.periods(data.min_period(), hi - 1),
                                       data.periods(hi, hi), fit_grid.grid, options);
          tuning = tr.best;
        }
        model = fit_boosted(data, tuning, options).model;
      } else {
        model = fit_linear(data, kind, options);
      }
      print_warnings(model.warnings);
      write_file_atomic(join_path(g.out_dir, model_out), serialize_model(model));
    } else if (*predict) {
      const FittedModel model = load_model(model_path);
      const PanelDataset data = load_for_model(model, panel_path);
      const ProbabilityPrediction pred = predict_default_probs(model, data, nodes);
      print_warnings(pred.latent.warnings);
      write_file_atomic(join_path(g.out_dir, predict_out), format_predictions(data, pred.probs));
    } else if (*portfolio) {
      const FittedModel model = load_model(model_path);
      PanelDataset data = load_for_model(model, panel_path);
      if (period) data = data.periods(*period, *period);
      if (data.size() == 0) throw ValidationError("portfolio: no loans in the selected period");
      const LossDistribution dist = simulate_losses(model, data, n_sims, g.seed, g.threads);
      write_file_atomic(join_path(g.out_dir, "losses.csv"), format_loss_samples(dist));
      write_file_atomic(join_path(g.out_dir, "loss_summary.csv"),
                        format_loss_summary(summarize(dist)));
    } else if (*fmap) {
      const FittedModel model = load_model(model_path);
      if (!model.latent) throw ValidationError("frailty-map: model has no latent process");
      std::vector<FrailtyMapRow> rows;
      if (grid_size > 0) {
        const auto& pts = model.latent->points;
        double x0 = pts[0].x, x1 = x0, y0 = pts[0].y, y1 = y0;
        for (const auto& p : pts) {
          x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
          y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
        }
        std::vector<std::pair<double, double>> locs;
        for (int i = 0; i < grid_size; ++i) {
          for (int j = 0; j < grid_size; ++j) {
            const double u = grid_size > 1 ? static_cast<double>(i) / (grid_size - 1) : 0.5;
            const double v = grid_size > 1 ? static_cast<double>(j) / (grid_size - 1) : 0.5;
            locs.emplace_back(x0 + u * (x1 - x0), y0 + v * (y1 - y0));
          }
        }
        if (map_periods.empty()) {
          std::set<int> ps;
          for (const auto& p : pts) ps.insert(static_cast<int>(std::lround(p.t)));
          map_periods.assign(ps.begin(), ps.end());
        }
        rows = frailty_map(model, map_periods, locs);
      } else {
        rows = frailty_map(model);
      }
      write_file_atomic(join_path(g.out_dir, map_out), format_frailty_map(rows));
    } else if (*evaluate) {
      std::vector<double> probs;
      std::vector<int> labels;
      read_scored_probs(probs_path, panel_path, schema_path, probs, labels);
      const BinSpec bins = quantile_bins(probs, ece_bins);
      const std::string out = "auc,h_measure,log_loss,brier,ece\n" +
                              num(metric_or_nan(auc_fn, probs, labels)) + "," +
                              num(metric_or_nan(h_fn, probs, labels)) + "," +
                              num(log_loss(probs, labels)) + "," + num(brier(probs, labels)) +
                              "," + num(ece(probs, labels, bins)) + "\n";
      write_file_atomic(join_path(g.out_dir, eval_out), out);
    } else if (*backtest) {
      bc.out_dir = g.out_dir;
      bc.seed = g.seed;
      bc.threads = g.threads;
      if (!bt_models.empty()) {
        bc.models.clear();
        for (const auto& m : bt_models) bc.models.push_back(model_kind_from_string(m));
      }
      bc.fit = bt_model.options(g.seed);
      bc.tune = !no_tune;
      bc.grid = bt_grid.grid;
      bc.fixed_tuning = bt_tree.tuning();
      bc.frailty_maps = !no_maps;
      run_backtest(bc);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace frailty
