#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "frailty/covariance.hpp"

namespace frailty {

enum class FeatureKind { numeric, categorical };

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::numeric;
  std::vector<std::string> levels;  // declared levels, may be empty for categoricals
};

// Ordered feature list. A feature named "year" is taken from the period
// column instead of a CSV feature column (year fixed effects).
struct FeatureSchema {
  std::vector<FeatureSpec> features;

  std::size_t size() const { return features.size(); }
  int index_of(const std::string& name) const;  // -1 if absent
  bool has_year_feature() const { return index_of("year") >= 0; }
  void validate() const;
  // Schema without the derived "year" feature.
  FeatureSchema without_year() const;
};

// Numeric cells use value (NaN = missing); categorical cells use level
// (empty = missing).
struct Cell {
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string level;
};

struct PanelObservation {
  std::string loan_id;
  int period = 0;
  double lon = 0.0;
  double lat = 0.0;
  int y = 0;
  double balance = 0.0;
  std::vector<Cell> x;
};

class PanelDataset {
 public:
  PanelDataset() = default;
  // Validates per-loan invariants; throws ValidationError listing every violation.
  PanelDataset(FeatureSchema schema, std::vector<PanelObservation> observations);

  const FeatureSchema& schema() const { return schema_; }
  const std::vector<PanelObservation>& observations() const { return obs_; }
  std::size_t size() const { return obs_.size(); }
  const PanelObservation& operator[](std::size_t i) const { return obs_[i]; }

  std::size_t num_loans() const { return by_loan_.size(); }
  const std::map<std::string, std::vector<std::size_t>>& by_loan() const { return by_loan_; }
  const std::map<int, std::vector<std::size_t>>& by_period() const { return by_period_; }
  int min_period() const;
  int max_period() const;

  std::vector<int> labels() const;
  Eigen::VectorXd balances() const;

  // Rows with period in [lo, hi]; per-loan invariants are preserved because
  // a prefix of a loan's periods never contains a non-terminal default.
  PanelDataset periods(int lo, int hi) const;
  PanelDataset filter(const std::function<bool(const PanelObservation&)>& keep) const;

  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  FeatureSchema schema_;
  std::vector<PanelObservation> obs_;
  std::map<std::string, std::vector<std::size_t>> by_loan_;
  std::map<int, std::vector<std::size_t>> by_period_;
  std::vector<std::string> warnings_;
};

FeatureSchema load_schema(const std::string& path);
FeatureSchema parse_schema(const std::string& text);
std::string format_schema(const FeatureSchema& schema);
void write_schema(const FeatureSchema& schema, const std::string& path);

PanelDataset load_panel(const std::string& csv_path, const std::string& schema_path);
PanelDataset parse_panel(const std::string& csv_text, const FeatureSchema& schema);
std::string format_panel(const PanelDataset& dataset);
void write_panel(const PanelDataset& dataset, const std::string& path);

// Shortest round-trip decimal formatting used by every CSV writer.
std::string format_number(double v);

// Train-fitted fill values: means for numerics, modal level for categoricals.
class Imputer {
 public:
  static Imputer fit(const PanelDataset& train);
  PanelDataset apply(const PanelDataset& data) const;

  const std::vector<Cell>& fill_values() const { return fill_; }
  static Imputer from_values(std::vector<Cell> fill) {
    Imputer imp;
    imp.fill_ = std::move(fill);
    return imp;
  }

 private:
  std::vector<Cell> fill_;
};

enum class DesignMode { linear, tree };

struct ColumnInfo {
  std::string name;
  int feature = -1;   // schema index, -1 for the intercept
  std::string level;  // for dummy columns
};

struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<ColumnInfo> columns;
  std::size_t unseen_levels = 0;
};

// Fitted categorical encoding. Levels are the declared schema levels, or the
// sorted training levels when none are declared. Unseen levels map to the
// reserved "other" level, which encodes as all-zero dummies.
class DesignEncoder {
 public:
  static DesignEncoder fit(const PanelDataset& train, DesignMode mode, bool include_year = true);
  DesignMatrix transform(const PanelDataset& data) const;

  DesignMode mode() const { return mode_; }
  bool include_year() const { return include_year_; }
  const std::vector<std::vector<std::string>>& levels() const { return levels_; }
  const std::vector<ColumnInfo>& columns() const { return columns_; }
  static DesignEncoder from_parts(const FeatureSchema& schema, DesignMode mode, bool include_year,
                                  std::vector<std::vector<std::string>> levels);

 private:
  void build_columns();

  FeatureSchema schema_;
  DesignMode mode_ = DesignMode::linear;
  bool include_year_ = true;
  std::vector<std::vector<std::string>> levels_;
  std::vector<ColumnInfo> columns_;
};

DesignMatrix encode_design_matrix(const PanelDataset& data, DesignMode mode);

struct SplitWindow {
  int train_upper = 0;        // train = periods <= train_upper
  int test = 0;               // train_upper + 1
  int validation = 0;         // train_upper
  int inner_train_upper = 0;  // train_upper - 1
};

struct SplitPlan {
  std::vector<SplitWindow> windows;
};

SplitPlan expanding_window_split(const PanelDataset& data, int first_test_period,
                                 int last_test_period);

// Unique latent locations and the observation -> latent incidence map.
struct LatentIndex {
  std::vector<SpaceTimePoint> points;
  std::vector<int> obs_to_latent;
};

// Spatial mode keys on (lon, lat); spacetime keys on (period, lon, lat).
LatentIndex build_latent_index(const PanelDataset& data, CovarianceMode mode);

enum class SynthMode { linear, nonlinear };

struct SpatialBox {
  double lon_min = 0.0, lon_max = 1.0, lat_min = 0.0, lat_max = 1.0;
  double diameter() const;
};

struct SynthConfig {
  int n_loans = 1000;
  int n_periods = 10;
  int first_period = 2000;
  SpatialBox box;
  double sigma2 = 1.0;  // 0 disables the latent process
  double rho_s = 0.2;
  std::optional<double> rho_t = 2.0;
  Smoothness nu = Smoothness::three_halves;
  SynthMode mode = SynthMode::nonlinear;
  double baseline = -2.0;          // c0
  std::vector<double> beta{1.0, -1.0};  // linear mode coefficients on x1..xp
  int n_features = 4;
  int n_sites = 0;                 // 0: every loan has its own location
  bool staggered_entry = true;     // origination uniform over the horizon
  double exit_rate = 0.05;         // per-period censoring (prepayment) probability
  double jitter = kDefaultJitter;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthTruth {
  SynthConfig config;
  LatentIndex latent;            // generating latent points and obs incidence
  Eigen::VectorXd b;             // latent draw at latent.points
  std::vector<double> fixed;     // F(x) per observation
};

struct SynthResult {
  PanelDataset data;
  SynthTruth truth;
};

// Documented nonlinear fixed effects: c0 + 2 sin(pi x1 x2) + (x3 - 0.5)^2 - x4.
double synthetic_nonlinear_f(double c0, double x1, double x2, double x3, double x4);

SynthResult generate_synthetic(const SynthConfig& config);

std::string format_truth_json(const SynthTruth& truth);

}  // namespace frailty
