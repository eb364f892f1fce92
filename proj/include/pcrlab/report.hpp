#pragma once

#include "pcrlab/risk.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace pcrlab {

using Column = std::pair<std::string, double>;

struct NamedValue {
  std::string name;
  double value = 0.0;
};

struct NamedFlag {
  std::string name;
  bool value = false;
};

/// Everything computed for one replicate. Quantities that are undefined for
/// the replicate (for example bias when lambda_hat_d = 0) are NaN.
struct RiskReport {
  static constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

  int replicate = -1;
  std::uint64_t seed = 0;
  int n = 0;
  int p = 0;
  int d = 0;
  int r = 0;
  bool degenerate = false;  // an estimator or decomposition threw; see `error`
  std::string error;

  // Thresholded estimators (the ones the risk statements are about) and
  // their raw counterparts.
  double pred_error = kUndefined;
  double h_error = kUndefined;
  double pred_error_raw = kUndefined;
  double oracle_pred_error = kUndefined;
  double oracle_h_error = kUndefined;
  double oracle_pred_error_raw = kUndefined;
  bool pcr_thresholded = false;
  bool oracle_thresholded = false;

  double lambda_hat_d = kUndefined;
  double bias = kUndefined;
  double variance = kUndefined;
  double excess_risk = kUndefined;
  double recon_empirical = kUndefined;
  double recon_population = kUndefined;
  double split_le = kUndefined;  // mu = lambda_{d+1}
  double split_gt = kUndefined;

  bool threshold_event = false;  // lambda_hat_d >= lambda_d / 2
  int halving_count = 0;         // #{j <= d : lambda_hat_j < lambda_j / 2}

  std::vector<IdentityCheck> identities;
  std::vector<InequalityCheck> inequalities;
  std::vector<NamedValue> terms;
  std::vector<NamedFlag> events;

  double max_identity_residual() const;
  int identity_failures(double tolerance) const;
  int violation_count() const;

  /// Named scalar columns in a fixed order. Booleans map to 0/1; checks
  /// that were not evaluated report NaN in their `holds` column.
  std::vector<Column> flatten() const;
};

}  // namespace pcrlab
