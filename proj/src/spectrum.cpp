#include "pcrlab/spectrum.hpp"

#include "pcrlab/errors.hpp"
#include "pcrlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace pcrlab {

std::string_view to_string(SpectrumKind kind) {
  switch (kind) {
    case SpectrumKind::Isotropic: return "isotropic";
    case SpectrumKind::Exponential: return "exponential";
    case SpectrumKind::Polynomial: return "polynomial";
    case SpectrumKind::ApproxPolynomial: return "approx_polynomial";
  }
  return "unknown";
}

SpectrumKind spectrum_kind_from_string(std::string_view name) {
  if (name == "isotropic") return SpectrumKind::Isotropic;
  if (name == "exponential") return SpectrumKind::Exponential;
  if (name == "polynomial") return SpectrumKind::Polynomial;
  if (name == "approx_polynomial") return SpectrumKind::ApproxPolynomial;
  throw ParameterError("unknown spectrum kind '" + std::string(name) + "'");
}

Spectrum::Spectrum(SpectrumKind kind, double alpha, double c_ev,
                   std::uint64_t seed, Eigen::VectorXd values)
    : kind_(kind), alpha_(alpha), c_ev_(c_ev), seed_(seed),
      values_(std::move(values)) {
  if (values_.size() == 0) throw ParameterError("spectrum must be non-empty");
  for (Eigen::Index j = 0; j < values_.size(); ++j) {
    if (!(values_(j) > 0.0) || !std::isfinite(values_(j)))
      throw ParameterError("spectrum values must be finite and positive");
    if (j > 0 && values_(j) > values_(j - 1))
      throw ParameterError("spectrum values must be non-increasing");
  }
}

double Spectrum::tail_trace(int r) const {
  if (r >= p()) return 0.0;
  return values_.tail(p() - std::max(r, 0)).sum();
}

Spectrum make_spectrum(SpectrumKind kind, double alpha, int p, double c_ev,
                       std::uint64_t seed) {
  if (p < 1) throw ParameterError("p must be >= 1");
  if (!(c_ev >= 1.0)) throw ParameterError("C_ev must be >= 1");
  switch (kind) {
    case SpectrumKind::Isotropic: break;
    case SpectrumKind::Exponential:
      if (!(alpha > 0.0)) throw ParameterError("exponential decay needs alpha > 0");
      break;
    case SpectrumKind::Polynomial:
    case SpectrumKind::ApproxPolynomial:
      if (!(alpha > 1.0)) throw ParameterError("polynomial decay needs alpha > 1");
      break;
  }

  Eigen::VectorXd values(p);
  for (int j = 1; j <= p; ++j) {
    switch (kind) {
      case SpectrumKind::Isotropic: values(j - 1) = 1.0; break;
      case SpectrumKind::Exponential: values(j - 1) = std::exp(-alpha * j); break;
      case SpectrumKind::Polynomial:
      case SpectrumKind::ApproxPolynomial:
        values(j - 1) = std::pow(static_cast<double>(j), -alpha);
        break;
    }
  }

  if (kind == SpectrumKind::ApproxPolynomial) {
    CounterRng rng(derive_seed(seed, 0x5bec));
    const double log_c = std::log(c_ev);
    for (int j = 0; j < p; ++j) {
      const double u = std::exp((2.0 * rng.uniform() - 1.0) * log_c);
      values(j) *= u;
    }
    std::sort(values.begin(), values.end(), std::greater<>());
  }
  if (kind == SpectrumKind::Isotropic) alpha = 0.0;
  return Spectrum(kind, alpha, c_ev, seed, std::move(values));
}

GapReport gap_report(const Spectrum& spectrum, int r) {
  const int p = spectrum.p();
  if (r < 1 || r >= p)
    throw ParameterError("gap_report needs 1 <= r < p (r=" + std::to_string(r) +
                         ", p=" + std::to_string(p) + ")");
  const double* lam = spectrum.values().data();
  GapReport rep;
  rep.r = r;
  const double lr = lam[r - 1];
  const double lr1 = lam[r];
  if (!(lr > lr1)) {
    rep.defined = false;
    rep.sum_below = rep.sum_above = rep.rel_gap =
        std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  rep.defined = true;
  double below = 0.0;
  for (int j = 0; j < r; ++j) below += lam[j] / (lam[j] - lr1);
  double above = 0.0;
  for (int k = r; k < p; ++k) above += lam[k] / (lr - lam[k]);
  rep.sum_below = below;
  rep.sum_above = above;
  rep.rel_gap = lr / (lr - lr1);
  return rep;
}

double log_er(int r) { return 1.0 + std::log(static_cast<double>(r)); }

namespace {

GapSearchResult describe(const GapReport& rep, bool include_above) {
  GapSearchResult res;
  res.r = rep.r;
  res.report = rep;
  const double scale = rep.r * log_er(rep.r);
  res.below_normalized = rep.sum_below / scale;
  res.total_normalized = (rep.sum_below + rep.sum_above) / scale;
  res.rel_gap_normalized = rep.rel_gap / rep.r;
  res.criterion = std::max(include_above ? res.total_normalized
                                         : res.below_normalized,
                           res.rel_gap_normalized);
  return res;
}

std::optional<GapSearchResult> scan(const Spectrum& spectrum, int lo, int hi,
                                    bool include_above) {
  std::optional<GapSearchResult> best;
  for (int r = lo; r <= hi; ++r) {
    const GapReport rep = gap_report(spectrum, r);
    if (!rep.defined) continue;
    GapSearchResult cand = describe(rep, include_above);
    if (!best || cand.criterion < best->criterion) best = cand;
  }
  return best;
}

}  // namespace

std::optional<GapSearchResult> find_gap_index_below(const Spectrum& spectrum,
                                                    int d, double c1) {
  if (!(c1 > 0.0 && c1 < 1.0)) throw ParameterError("c1 must lie in (0, 1)");
  if (d < 1 || d * c1 < 1.0 - 1e-12)
    throw ParameterError("find_gap_index_below needs d >= 1/c1");
  if (d >= spectrum.p()) throw ParameterError("find_gap_index_below needs d < p");
  const int lo = std::max(1, static_cast<int>(std::ceil(c1 * d - 1e-12)));
  return scan(spectrum, lo, d, /*include_above=*/false);
}

std::optional<GapSearchResult> find_gap_index_above(const Spectrum& spectrum,
                                                    int d, double C1) {
  if (!(C1 > 1.0)) throw ParameterError("C1 must be > 1");
  if (d < 1 || d >= spectrum.p())
    throw ParameterError("find_gap_index_above needs 1 <= d < p");
  const int hi = std::min(spectrum.p() - 1,
                          static_cast<int>(std::floor(C1 * d + 1e-12)));
  return scan(spectrum, d, hi, /*include_above=*/true);
}

Grouping build_grouping(const Spectrum& spectrum, int d, double c2) {
  if (!(c2 >= 1.0)) throw ParameterError("grouping bound C2 must be >= 1");
  if (d < 1 || d >= spectrum.p())
    throw ParameterError("build_grouping needs 1 <= d < p (d=" +
                         std::to_string(d) + ")");
  Grouping g;
  g.d = d;
  g.c2 = c2;
  g.breakpoints.push_back(0);
  double worst = 1.0;
  int prev = 0;
  while (prev < d) {
    const int start = prev + 1;
    const double head = spectrum.lambda(start);
    int end = start;
    while (end < d && head / spectrum.lambda(end + 1) <= c2) ++end;
    worst = std::max(worst, head / spectrum.lambda(end));
    g.breakpoints.push_back(end);
    prev = end;
  }
  g.ratio_bound = worst;
  g.overshoot = static_cast<double>(g.breakpoints.back()) / d;
  return g;
}

std::vector<double> gap_sum_profile(const Spectrum& spectrum, int r_min,
                                    int r_max) {
  if (r_min < 1 || r_max >= spectrum.p() || r_min > r_max)
    throw ParameterError("gap_sum_profile needs 1 <= r_min <= r_max < p");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(r_max - r_min + 1));
  for (int r = r_min; r <= r_max; ++r) {
    const GapReport rep = gap_report(spectrum, r);
    out.push_back(rep.defined
                      ? (rep.sum_below + rep.sum_above) / (r * log_er(r))
                      : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

}  // namespace pcrlab
