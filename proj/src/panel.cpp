#include "frailty/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"

#include "frailty/error.hpp"
#include "frailty/hazard.hpp"
#include "frailty/rng.hpp"

namespace frailty {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
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

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_int(const std::string& s, int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

const std::string kPanelHeader = "loan_id,year,lon,lat,default,balance";

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// ---------------------------------------------------------------- schema

int FeatureSchema::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

void FeatureSchema::validate() const {
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (f.name.empty()) throw ValidationError("schema: empty feature name");
    if (!seen.insert(f.name).second) throw ValidationError("schema: duplicate feature " + f.name);
    if (f.kind == FeatureKind::numeric && !f.levels.empty()) {
      throw ValidationError("schema: numeric feature " + f.name + " declares levels");
    }
  }
}

FeatureSchema FeatureSchema::without_year() const {
  FeatureSchema s;
  for (const auto& f : features) {
    if (f.name != "year") s.features.push_back(f);
  }
  return s;
}

FeatureSchema parse_schema(const std::string& text) {
  FeatureSchema schema;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    auto parts = split_csv(line);
    for (auto& p : parts) p = trim(p);
    if (parts.size() < 2) throw ParseError("schema entry needs name,kind", lineno);
    FeatureSpec f;
    f.name = parts[0];
    if (parts[1] == "numeric") {
      f.kind = FeatureKind::numeric;
    } else if (parts[1] == "categorical") {
      f.kind = FeatureKind::categorical;
    } else {
      throw ParseError("unknown feature kind '" + parts[1] + "'", lineno);
    }
    f.levels.assign(parts.begin() + 2, parts.end());
    schema.features.push_back(std::move(f));
  }
  schema.validate();
  return schema;
}

FeatureSchema load_schema(const std::string& path) { return parse_schema(read_file(path)); }

std::string format_schema(const FeatureSchema& schema) {
  std::string out;
  for (const auto& f : schema.features) {
    out += f.name;
    out += f.kind == FeatureKind::numeric ? ",numeric" : ",categorical";
    for (const auto& l : f.levels) out += "," + l;
    out += "\n";
  }
  return out;
}

void write_schema(const FeatureSchema& schema, const std::string& path) {
  write_file(path, format_schema(schema));
}

// ---------------------------------------------------------------- dataset

PanelDataset::PanelDataset(FeatureSchema schema, std::vector<PanelObservation> observations)
    : schema_(std::move(schema)), obs_(std::move(observations)) {
  schema_.validate();
  if (obs_.empty()) throw ValidationError("panel has no observations");
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < obs_.size(); ++i) {
    const auto& o = obs_[i];
    if (o.x.size() != schema_.size()) {
      problems.push_back("row " + std::to_string(i) + ": feature count does not match schema");
    }
    if (o.y != 0 && o.y != 1) problems.push_back("loan " + o.loan_id + ": default must be 0 or 1");
    if (!(o.balance >= 0.0)) problems.push_back("loan " + o.loan_id + ": negative balance");
    if (!std::isfinite(o.lon) || !std::isfinite(o.lat)) {
      problems.push_back("loan " + o.loan_id + ": non-finite coordinates");
    }
    by_loan_[o.loan_id].push_back(i);
    by_period_[o.period].push_back(i);
  }
  for (auto& [loan, rows] : by_loan_) {
    std::stable_sort(rows.begin(), rows.end(),
                     [&](std::size_t a, std::size_t b) { return obs_[a].period < obs_[b].period; });
    for (std::size_t k = 1; k < rows.size(); ++k) {
      if (obs_[rows[k]].period == obs_[rows[k - 1]].period) {
        problems.push_back("loan " + loan + ": duplicate period " +
                           std::to_string(obs_[rows[k]].period));
      }
    }
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
      if (obs_[rows[k]].y == 1) {
        problems.push_back("loan " + loan + ": default not terminal (period " +
                           std::to_string(obs_[rows[k]].period) + ")");
        break;
      }
    }
  }
  if (!problems.empty()) {
    std::string msg = "panel validation failed:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
}

int PanelDataset::min_period() const { return by_period_.begin()->first; }
int PanelDataset::max_period() const { return by_period_.rbegin()->first; }

std::vector<int> PanelDataset::labels() const {
  std::vector<int> y(obs_.size());
  for (std::size_t i = 0; i < obs_.size(); ++i) y[i] = obs_[i].y;
  return y;
}

Eigen::VectorXd PanelDataset::balances() const {
  Eigen::VectorXd b(static_cast<Eigen::Index>(obs_.size()));
  for (std::size_t i = 0; i < obs_.size(); ++i) b[i] = obs_[i].balance;
  return b;
}

PanelDataset PanelDataset::periods(int lo, int hi) const {
  return filter([&](const PanelObservation& o) { return o.period >= lo && o.period <= hi; });
}

PanelDataset PanelDataset::filter(const std::function<bool(const PanelObservation&)>& keep) const {
  std::vector<PanelObservation> rows;
  for (const auto& o : obs_) {
    if (keep(o)) rows.push_back(o);
  }
  if (rows.empty()) throw ValidationError("selection produced an empty panel");
  return PanelDataset(schema_, std::move(rows));
}

// ---------------------------------------------------------------- CSV

PanelDataset parse_panel(const std::string& csv_text, const FeatureSchema& schema) {
  std::istringstream in(csv_text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty panel file", 1);
  const auto header = split_csv(line);
  const FeatureSchema file_schema = schema.without_year();
  std::vector<std::string> expected = split_csv(kPanelHeader);
  for (const auto& f : file_schema.features) expected.push_back(f.name);
  if (header != expected) {
    std::string want = kPanelHeader;
    for (const auto& f : file_schema.features) want += "," + f.name;
    throw ParseError("header mismatch, expected '" + want + "'", 1);
  }
  const int year_idx = schema.index_of("year");

  std::vector<PanelObservation> rows;
  std::size_t lineno = 1;
  std::vector<std::string> warnings;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != expected.size()) {
      throw ParseError("expected " + std::to_string(expected.size()) + " fields, got " +
                           std::to_string(cells.size()),
                       lineno);
    }
    PanelObservation o;
    o.loan_id = cells[0];
    if (o.loan_id.empty()) throw ParseError("empty loan_id", lineno);
    if (!parse_int(cells[1], o.period)) throw ParseError("year is not an integer", lineno);
    if (!parse_double(cells[2], o.lon)) throw ParseError("lon is not a number", lineno);
    if (!parse_double(cells[3], o.lat)) throw ParseError("lat is not a number", lineno);
    if (!parse_int(cells[4], o.y) || (o.y != 0 && o.y != 1)) {
      throw ParseError("default must be 0 or 1", lineno);
    }
    if (!parse_double(cells[5], o.balance)) throw ParseError("balance is not a number", lineno);
    o.x.resize(schema.size());
    std::size_t col = 6;
    for (std::size_t f = 0; f < schema.size(); ++f) {
      const auto& spec = schema.features[f];
      Cell& cell = o.x[f];
      if (static_cast<int>(f) == year_idx) {
        if (spec.kind == FeatureKind::numeric) {
          cell.value = o.period;
        } else {
          cell.level = std::to_string(o.period);
        }
        continue;
      }
      const std::string& raw = cells[col++];
      if (raw.empty()) continue;
      if (spec.kind == FeatureKind::numeric) {
        if (!parse_double(raw, cell.value) || !std::isfinite(cell.value)) {
          throw ParseError("feature " + spec.name + " is not a number", lineno);
        }
      } else {
        cell.level = raw;
      }
    }
    rows.push_back(std::move(o));
  }
  return PanelDataset(schema, std::move(rows));
}

PanelDataset load_panel(const std::string& csv_path, const std::string& schema_path) {
  return parse_panel(read_file(csv_path), load_schema(schema_path));
}

std::string format_panel(const PanelDataset& dataset) {
  const auto& schema = dataset.schema();
  const int year_idx = schema.index_of("year");
  std::string out = kPanelHeader;
  for (const auto& f : schema.features) {
    if (f.name != "year") out += "," + f.name;
  }
  out += "\n";
  for (const auto& o : dataset.observations()) {
    out += o.loan_id + "," + std::to_string(o.period) + "," + format_number(o.lon) + "," +
           format_number(o.lat) + "," + std::to_string(o.y) + "," + format_number(o.balance);
    for (std::size_t f = 0; f < schema.size(); ++f) {
      if (static_cast<int>(f) == year_idx) continue;
      out += ",";
      out += schema.features[f].kind == FeatureKind::numeric ? format_number(o.x[f].value)
                                                             : o.x[f].level;
    }
    out += "\n";
  }
  return out;
}

void write_panel(const PanelDataset& dataset, const std::string& path) {
  write_file(path, format_panel(dataset));
}

// ---------------------------------------------------------------- imputation

Imputer Imputer::fit(const PanelDataset& train) {
  const auto& schema = train.schema();
  Imputer imp;
  imp.fill_.resize(schema.size());
  for (std::size_t f = 0; f < schema.size(); ++f) {
    const auto& spec = schema.features[f];
    if (spec.kind == FeatureKind::numeric) {
      double sum = 0.0;
      std::size_t count = 0;
      for (const auto& o : train.observations()) {
        if (!std::isnan(o.x[f].value)) {
          sum += o.x[f].value;
          ++count;
        }
      }
      if (count == 0) throw ValidationError("column " + spec.name + " is entirely missing");
      imp.fill_[f].value = sum / static_cast<double>(count);
    } else {
      std::map<std::string, std::size_t> counts;
      for (const auto& o : train.observations()) {
        if (!o.x[f].level.empty()) ++counts[o.x[f].level];
      }
      if (counts.empty()) throw ValidationError("column " + spec.name + " is entirely missing");
      // Ties go to the first declared level, then to the lexicographically smallest.
      auto rank = [&](const std::string& level) {
        const auto it = std::find(spec.levels.begin(), spec.levels.end(), level);
        return it - spec.levels.begin();
      };
      const std::string* best = nullptr;
      std::size_t best_count = 0;
      for (const auto& [level, c] : counts) {
        if (!best || c > best_count || (c == best_count && rank(level) < rank(*best))) {
          best = &level;
          best_count = c;
        }
      }
      imp.fill_[f].level = *best;
    }
  }
  return imp;
}

PanelDataset Imputer::apply(const PanelDataset& data) const {
  if (fill_.size() != data.schema().size()) throw ValidationError("imputer/schema mismatch");
  std::vector<PanelObservation> rows = data.observations();
  for (auto& o : rows) {
    for (std::size_t f = 0; f < fill_.size(); ++f) {
      if (data.schema().features[f].kind == FeatureKind::numeric) {
        if (std::isnan(o.x[f].value)) o.x[f].value = fill_[f].value;
      } else if (o.x[f].level.empty()) {
        o.x[f].level = fill_[f].level;
      }
    }
  }
  PanelDataset out(data.schema(), std::move(rows));
  for (const auto& w : data.warnings()) out.add_warning(w);
  return out;
}

// ---------------------------------------------------------------- encoding

DesignEncoder DesignEncoder::fit(const PanelDataset& train, DesignMode mode, bool include_year) {
  DesignEncoder enc;
  enc.schema_ = train.schema();
  enc.mode_ = mode;
  enc.include_year_ = include_year;
  enc.levels_.resize(enc.schema_.size());
  for (std::size_t f = 0; f < enc.schema_.size(); ++f) {
    const auto& spec = enc.schema_.features[f];
    if (spec.kind != FeatureKind::categorical) continue;
    if (!spec.levels.empty()) {
      enc.levels_[f] = spec.levels;
    } else {
      std::set<std::string> seen;
      for (const auto& o : train.observations()) {
        if (!o.x[f].level.empty()) seen.insert(o.x[f].level);
      }
      enc.levels_[f].assign(seen.begin(), seen.end());
    }
  }
  enc.build_columns();
  return enc;
}

DesignEncoder DesignEncoder::from_parts(const FeatureSchema& schema, DesignMode mode,
                                        bool include_year,
                                        std::vector<std::vector<std::string>> levels) {
  DesignEncoder enc;
  enc.schema_ = schema;
  enc.mode_ = mode;
  enc.include_year_ = include_year;
  enc.levels_ = std::move(levels);
  enc.levels_.resize(schema.size());
  enc.build_columns();
  return enc;
}

void DesignEncoder::build_columns() {
  columns_.clear();
  if (mode_ == DesignMode::linear) columns_.push_back({"(intercept)", -1, ""});
  for (std::size_t f = 0; f < schema_.size(); ++f) {
    const auto& spec = schema_.features[f];
    if (spec.name == "year" && !include_year_) continue;
    if (spec.kind == FeatureKind::numeric) {
      columns_.push_back({spec.name, static_cast<int>(f), ""});
      continue;
    }
    const auto& lv = levels_[f];
    const std::size_t first = mode_ == DesignMode::linear ? 1 : 0;
    for (std::size_t l = first; l < lv.size(); ++l) {
      columns_.push_back({spec.name + "=" + lv[l], static_cast<int>(f), lv[l]});
    }
  }
}

DesignMatrix DesignEncoder::transform(const PanelDataset& data) const {
  if (data.schema().size() != schema_.size()) {
    throw ValidationError("design encoder: schema drift (feature count differs)");
  }
  for (std::size_t f = 0; f < schema_.size(); ++f) {
    if (data.schema().features[f].name != schema_.features[f].name ||
        data.schema().features[f].kind != schema_.features[f].kind) {
      throw ValidationError("design encoder: schema drift at feature " + schema_.features[f].name);
    }
  }
  DesignMatrix dm;
  dm.columns = columns_;
  const auto n = static_cast<Eigen::Index>(data.size());
  dm.X = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(columns_.size()));
  // Column lookup per (feature, level).
  std::vector<std::map<std::string, Eigen::Index>> level_col(schema_.size());
  std::vector<Eigen::Index> numeric_col(schema_.size(), -1);
  std::vector<bool> used(schema_.size(), false);
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    const auto& col = columns_[c];
    if (col.feature < 0) continue;
    used[col.feature] = true;
    if (schema_.features[col.feature].kind == FeatureKind::numeric) {
      numeric_col[col.feature] = static_cast<Eigen::Index>(c);
    } else {
      level_col[col.feature][col.level] = static_cast<Eigen::Index>(c);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = data[i];
    if (mode_ == DesignMode::linear) dm.X(i, 0) = 1.0;
    for (std::size_t f = 0; f < schema_.size(); ++f) {
      if (!used[f] && schema_.features[f].kind == FeatureKind::numeric) continue;
      if (schema_.features[f].kind == FeatureKind::numeric) {
        if (std::isnan(o.x[f].value)) {
          throw ValidationError("design encoder: missing value in " + schema_.features[f].name +
                                " (impute first)");
        }
        dm.X(i, numeric_col[f]) = o.x[f].value;
        continue;
      }
      if (schema_.features[f].name == "year" && !include_year_) continue;
      const auto& lv = levels_[f];
      if (o.x[f].level.empty()) {
        throw ValidationError("design encoder: missing value in " + schema_.features[f].name +
                              " (impute first)");
      }
      if (std::find(lv.begin(), lv.end(), o.x[f].level) == lv.end()) {
        ++dm.unseen_levels;
        continue;  // reserved "other" level
      }
      const auto it = level_col[f].find(o.x[f].level);
      if (it != level_col[f].end()) dm.X(i, it->second) = 1.0;
    }
  }
  return dm;
}

DesignMatrix encode_design_matrix(const PanelDataset& data, DesignMode mode) {
  return DesignEncoder::fit(data, mode).transform(data);
}

// ---------------------------------------------------------------- splits

SplitPlan expanding_window_split(const PanelDataset& data, int first_test_period,
                                 int last_test_period) {
  const int lo = data.min_period();
  if (first_test_period <= lo + 1) {
    throw ValidationError("first test period must exceed the earliest period by at least 2");
  }
  if (last_test_period < first_test_period) {
    throw ValidationError("last test period precedes the first test period");
  }
  SplitPlan plan;
  for (int y = first_test_period; y <= last_test_period; ++y) {
    if (!data.by_period().count(y)) {
      throw ValidationError("empty test slice for period " + std::to_string(y));
    }
    if (!data.by_period().count(y - 1)) {
      throw ValidationError("empty validation slice for period " + std::to_string(y - 1));
    }
    plan.windows.push_back({y - 1, y, y - 1, y - 2});
  }
  return plan;
}

LatentIndex build_latent_index(const PanelDataset& data, CovarianceMode mode) {
  LatentIndex idx;
  idx.obs_to_latent.resize(data.size());
  std::map<std::tuple<int, double, double>, int> key_to_point;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& o = data[i];
    const int t = mode == CovarianceMode::spacetime ? o.period : 0;
    const auto key = std::make_tuple(t, o.lon, o.lat);
    auto [it, inserted] = key_to_point.emplace(key, static_cast<int>(idx.points.size()));
    if (inserted) idx.points.push_back({static_cast<double>(t), o.lon, o.lat});
    idx.obs_to_latent[i] = it->second;
  }
  return idx;
}

// ---------------------------------------------------------------- synthetic data

double SpatialBox::diameter() const {
  return std::hypot(lon_max - lon_min, lat_max - lat_min);
}

void SynthConfig::validate() const {
  if (n_loans < 1) throw ValidationError("synth: number of loans must be positive");
  if (n_periods < 1) throw ValidationError("synth: number of periods must be positive");
  if (n_features < 1) throw ValidationError("synth: number of features must be positive");
  if (mode == SynthMode::nonlinear && n_features < 4) {
    throw ValidationError("synth: nonlinear mode needs at least 4 features");
  }
  if (mode == SynthMode::linear && static_cast<int>(beta.size()) > n_features) {
    throw ValidationError("synth: more coefficients than features");
  }
  if (!(sigma2 >= 0.0)) throw ValidationError("synth: sigma2 must be nonnegative");
  if (sigma2 > 0.0) {
    CovarianceParams p{sigma2, rho_s, rho_t, nu};
    p.validate();
  }
  if (!(box.lon_max > box.lon_min) || !(box.lat_max > box.lat_min)) {
    throw ValidationError("synth: empty spatial box");
  }
  if (n_sites < 0) throw ValidationError("synth: negative number of sites");
  if (!(exit_rate >= 0.0 && exit_rate < 1.0)) throw ValidationError("synth: exit rate out of [0,1)");
}

double synthetic_nonlinear_f(double c0, double x1, double x2, double x3, double x4) {
  return c0 + 2.0 * std::sin(std::numbers::pi * x1 * x2) + (x3 - 0.5) * (x3 - 0.5) - x4;
}

SynthResult generate_synthetic(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const SpatialBox& box = config.box;
  auto draw_location = [&] {
    const double lon = box.lon_min + (box.lon_max - box.lon_min) * rng.uniform();
    const double lat = box.lat_min + (box.lat_max - box.lat_min) * rng.uniform();
    return std::make_pair(lon, lat);
  };

  // Loan placement and origination.
  std::vector<std::pair<double, double>> sites;
  for (int s = 0; s < config.n_sites; ++s) sites.push_back(draw_location());
  struct Loan {
    double lon, lat;
    int start;
    double balance;
  };
  std::vector<Loan> loans(config.n_loans);
  for (auto& l : loans) {
    if (config.n_sites > 0) {
      std::tie(l.lon, l.lat) = sites[rng.index(sites.size())];
    } else {
      std::tie(l.lon, l.lat) = draw_location();
    }
    l.start = config.first_period +
              (config.staggered_entry ? static_cast<int>(rng.index(config.n_periods)) : 0);
    l.balance = 50000.0 + 450000.0 * rng.uniform();
  }

  // Latent process over every (location, period) a loan could occupy.
  const bool spacetime = config.rho_t.has_value();
  const int last_period = config.first_period + config.n_periods - 1;
  std::map<std::tuple<int, double, double>, int> key_to_point;
  std::vector<SpaceTimePoint> points;
  for (const auto& l : loans) {
    const int p_end = spacetime ? last_period : l.start;
    for (int t = l.start; t <= p_end; ++t) {
      const int tk = spacetime ? t : 0;
      auto [it, inserted] =
          key_to_point.emplace(std::make_tuple(tk, l.lon, l.lat), static_cast<int>(points.size()));
      if (inserted) points.push_back({static_cast<double>(tk), l.lon, l.lat});
    }
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(points.size()));
  if (config.sigma2 > 0.0) {
    if (points.size() > 20000) {
      throw ValidationError("synth: " + std::to_string(points.size()) +
                            " latent points exceed the dense simulation limit of 20000");
    }
    CovarianceParams theta{config.sigma2, config.rho_s, config.rho_t, config.nu};
    const Eigen::MatrixXd sigma = cov_matrix(points, theta, config.jitter);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("synth: generating covariance is not positive definite; increase jitter");
    }
    Eigen::VectorXd z(b.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
    b = llt.matrixL() * z;
  }

  FeatureSchema schema;
  for (int f = 0; f < config.n_features; ++f) {
    schema.features.push_back({"x" + std::to_string(f + 1), FeatureKind::numeric, {}});
  }

  SynthTruth truth;
  truth.config = config;
  truth.latent.points = points;
  truth.b = b;
  std::vector<PanelObservation> rows;
  const int width = static_cast<int>(std::to_string(config.n_loans).size());
  for (std::size_t li = 0; li < loans.size(); ++li) {
    const auto& l = loans[li];
    std::string id = std::to_string(li + 1);
    id = "L" + std::string(width - id.size(), '0') + id;
    for (int t = l.start; t <= last_period; ++t) {
      PanelObservation o;
      o.loan_id = id;
      o.period = t;
      o.lon = l.lon;
      o.lat = l.lat;
      o.balance = std::round(l.balance * std::pow(0.97, t - l.start) * 100.0) / 100.0;
      o.x.resize(config.n_features);
      std::vector<double> xv(config.n_features);
      for (int f = 0; f < config.n_features; ++f) {
        xv[f] = rng.uniform();
        o.x[f].value = xv[f];
      }
      double fx = config.baseline;
      if (config.mode == SynthMode::nonlinear) {
        fx = synthetic_nonlinear_f(config.baseline, xv[0], xv[1], xv[2], xv[3]);
      } else {
        for (std::size_t k = 0; k < config.beta.size(); ++k) fx += config.beta[k] * xv[k];
      }
      const int tk = spacetime ? t : 0;
      const int point = key_to_point.at(std::make_tuple(tk, l.lon, l.lat));
      o.y = rng.bernoulli(link(fx + b[point])) ? 1 : 0;
      truth.fixed.push_back(fx);
      truth.latent.obs_to_latent.push_back(point);
      rows.push_back(std::move(o));
      if (rows.back().y == 1) break;
      if (rng.bernoulli(config.exit_rate)) break;
    }
  }
  return {PanelDataset(std::move(schema), std::move(rows)), std::move(truth)};
}

std::string format_truth_json(const SynthTruth& truth) {
  const auto& c = truth.config;
  nlohmann::ordered_json j;
  j["mode"] = c.mode == SynthMode::nonlinear ? "nonlinear" : "linear";
  j["seed"] = c.seed;
  j["n_loans"] = c.n_loans;
  j["n_periods"] = c.n_periods;
  j["first_period"] = c.first_period;
  j["n_sites"] = c.n_sites;
  j["baseline"] = c.baseline;
  j["beta"] = c.beta;
  j["theta"] = {{"sigma2", c.sigma2}, {"rho_s", c.rho_s}, {"nu", smoothness_value(c.nu)}};
  if (c.rho_t) j["theta"]["rho_t"] = *c.rho_t;
  j["box"] = {c.box.lon_min, c.box.lon_max, c.box.lat_min, c.box.lat_max};
  nlohmann::ordered_json pts = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < truth.latent.points.size(); ++i) {
    const auto& p = truth.latent.points[i];
    pts.push_back({p.t, p.x, p.y, truth.b[static_cast<Eigen::Index>(i)]});
  }
  j["latent"] = pts;
  j["fixed_effects"] = truth.fixed;
  j["obs_to_latent"] = truth.latent.obs_to_latent;
  return j.dump(1) + "\n";
}

}  // namespace frailty
