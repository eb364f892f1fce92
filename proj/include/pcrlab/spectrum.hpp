#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pcrlab {

enum class SpectrumKind { Isotropic, Exponential, Polynomial, ApproxPolynomial };

std::string_view to_string(SpectrumKind kind);
SpectrumKind spectrum_kind_from_string(std::string_view name);

/// Eigenvalues lambda_1 >= ... >= lambda_p > 0 of a diagonal covariance,
/// together with the model that generated them.
///
/// Indices in the public API follow the usual 1-based convention of the
/// theory (`lambda(1)` is the largest eigenvalue); `values()` exposes the
/// underlying 0-based vector.
class Spectrum {
 public:
  Spectrum(SpectrumKind kind, double alpha, double c_ev, std::uint64_t seed,
           Eigen::VectorXd values);

  SpectrumKind kind() const noexcept { return kind_; }
  double alpha() const noexcept { return alpha_; }
  double c_ev() const noexcept { return c_ev_; }
  std::uint64_t seed() const noexcept { return seed_; }
  int p() const noexcept { return static_cast<int>(values_.size()); }

  const Eigen::VectorXd& values() const noexcept { return values_; }
  double lambda(int j) const { return values_(j - 1); }

  double trace() const { return values_.sum(); }
  /// tr_{>r}(Sigma) = sum_{k>r} lambda_k.
  double tail_trace(int r) const;

 private:
  SpectrumKind kind_;
  double alpha_;
  double c_ev_;
  std::uint64_t seed_;
  Eigen::VectorXd values_;
};

/// Builds one of the four eigenvalue models.
///   Isotropic:        lambda_j = 1
///   Exponential:      lambda_j = exp(-alpha j),             alpha > 0
///   Polynomial:       lambda_j = j^-alpha,                  alpha > 1
///   ApproxPolynomial: lambda_j = u_j j^-alpha sorted descending, with
///                     u_j log-uniform on [1/C_ev, C_ev] drawn from `seed`
Spectrum make_spectrum(SpectrumKind kind, double alpha, int p,
                       double c_ev = 1.0, std::uint64_t seed = 0);

/// Gap sums at index r (1 <= r < p).
struct GapReport {
  int r = 0;
  bool defined = false;      // false iff lambda_r == lambda_{r+1}
  double sum_below = 0.0;    // sum_{j<=r} lambda_j / (lambda_j - lambda_{r+1})
  double sum_above = 0.0;    // sum_{k>r}  lambda_k / (lambda_r - lambda_k)
  double rel_gap = 0.0;      // lambda_r / (lambda_r - lambda_{r+1})
};

GapReport gap_report(const Spectrum& spectrum, int r);

/// Natural log of (e * r).
double log_er(int r);

struct GapSearchResult {
  int r = 0;
  GapReport report;
  double below_normalized = 0.0;    // sum_below / (r log(er))
  double total_normalized = 0.0;    // (sum_below + sum_above) / (r log(er))
  double rel_gap_normalized = 0.0;  // rel_gap / r
  double criterion = 0.0;           // the minimized objective
};

/// Scans r in [ceil(c1 d), d] and returns the minimizer of
/// max(sum_below / (r log(er)), rel_gap / r), or nullopt if every candidate
/// has a zero gap.
std::optional<GapSearchResult> find_gap_index_below(const Spectrum& spectrum,
                                                    int d, double c1);

/// Scans r in [d, floor(C1 d)] (capped at p - 1) and returns the minimizer of
/// max((sum_below + sum_above) / (r log(er)), rel_gap / r).
std::optional<GapSearchResult> find_gap_index_above(const Spectrum& spectrum,
                                                    int d, double C1);

/// Breakpoints 0 = r_0 < r_1 < ... < r_{d'} grouping eigenvalues of
/// comparable size into blocks J_l = {r_{l-1}+1, ..., r_l}.
struct Grouping {
  std::vector<int> breakpoints;  // includes the leading 0
  int d = 0;
  double c2 = 1.0;               // configured ratio bound
  double ratio_bound = 1.0;      // achieved max_l lambda_{r_{l-1}+1} / lambda_{r_l}
  double overshoot = 1.0;        // r_{d'} / d

  int num_blocks() const { return static_cast<int>(breakpoints.size()) - 1; }
  /// First and last index (1-based, inclusive) of block l, 1 <= l <= d'.
  int block_begin(int l) const { return breakpoints[l - 1] + 1; }
  int block_end(int l) const { return breakpoints[l]; }
};

/// Greedy grouping: r_l is the largest index with
/// lambda_{r_{l-1}+1} / lambda_{r_l} <= C2, capped at d, until r_{d'} = d.
Grouping build_grouping(const Spectrum& spectrum, int d, double c2);

/// Normalized gap-sum profile (sum_below + sum_above) / (r log(er)) for
/// r in [r_min, r_max]; entries are NaN where the gap at r is zero.
std::vector<double> gap_sum_profile(const Spectrum& spectrum, int r_min,
                                    int r_max);

}  // namespace pcrlab
