#include "pcrlab/report.hpp"

#include <algorithm>
#include <cmath>

namespace pcrlab {

double RiskReport::max_identity_residual() const {
  double worst = 0.0;
  for (const auto& id : identities)
    worst = std::isnan(id.residual) ? id.residual : std::max(worst, id.residual);
  return worst;
}

int RiskReport::identity_failures(double tolerance) const {
  int count = 0;
  for (const auto& id : identities)
    if (!(id.residual <= tolerance)) ++count;
  return count;
}

int RiskReport::violation_count() const {
  int count = 0;
  for (const auto& c : inequalities)
    if (c.evaluated && !c.holds) ++count;
  return count;
}

std::vector<Column> RiskReport::flatten() const {
  auto flag = [](bool b) { return b ? 1.0 : 0.0; };
  std::vector<Column> cols = {
      {"replicate", static_cast<double>(replicate)},
      {"n", static_cast<double>(n)},
      {"p", static_cast<double>(p)},
      {"d", static_cast<double>(d)},
      {"r", static_cast<double>(r)},
      {"degenerate", flag(degenerate)},
      {"pred_error", pred_error},
      {"h_error", h_error},
      {"pred_error_raw", pred_error_raw},
      {"oracle_pred_error", oracle_pred_error},
      {"oracle_h_error", oracle_h_error},
      {"oracle_pred_error_raw", oracle_pred_error_raw},
      {"pcr_thresholded", flag(pcr_thresholded)},
      {"oracle_thresholded", flag(oracle_thresholded)},
      {"lambda_hat_d", lambda_hat_d},
      {"bias", bias},
      {"variance", variance},
      {"excess_risk", excess_risk},
      {"recon_empirical", recon_empirical},
      {"recon_population", recon_population},
      {"split_le", split_le},
      {"split_gt", split_gt},
      {"threshold_event", flag(threshold_event)},
      {"halving_count", static_cast<double>(halving_count)},
  };
  for (const auto& id : identities) cols.emplace_back("id." + id.name, id.residual);
  for (const auto& c : inequalities) {
    cols.emplace_back("ineq." + c.name + ".lhs", c.lhs);
    cols.emplace_back("ineq." + c.name + ".rhs", c.rhs);
    cols.emplace_back("ineq." + c.name + ".holds",
                      c.evaluated ? flag(c.holds) : kUndefined);
  }
  for (const auto& t : terms) cols.emplace_back("term." + t.name, t.value);
  for (const auto& e : events) cols.emplace_back("event." + e.name, flag(e.value));
  return cols;
}

}  // namespace pcrlab
