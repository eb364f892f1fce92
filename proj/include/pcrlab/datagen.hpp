#pragma once

#include "pcrlab/spectrum.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <string_view>

namespace pcrlab {

/// How the source element h is chosen before scaling to norm L.
enum class HMode { RandomSphere, FirstCoordinate, Flat };

/// Distribution of the standardized design coordinates Z_ij
/// (mean 0, variance 1, sub-Gaussian).
enum class Family { Gaussian, Rademacher, Uniform };

std::string_view to_string(HMode mode);
std::string_view to_string(Family family);
HMode h_mode_from_string(std::string_view name);
Family family_from_string(std::string_view name);

/// Target f = Sigma^s h in the population eigenbasis, with ||h|| = L.
struct GroundTruth {
  Spectrum spectrum;
  double s = 0.0;
  double L = 1.0;
  double sigma2 = 0.0;
  Eigen::VectorXd h;
  Eigen::VectorXd f;

  int p() const { return spectrum.p(); }
};

GroundTruth make_ground_truth(const Spectrum& spectrum, double s, double L,
                              double sigma2, std::uint64_t seed, HMode h_mode);

/// n observations of Y = <f, X> + eps with X_i = Sigma^{1/2} Z_i.
struct DesignSample {
  Eigen::MatrixXd X;  // n x p, rows are observations in the population eigenbasis
  Eigen::VectorXd eps;
  Eigen::VectorXd Y;
  int n = 0;
  Family family = Family::Gaussian;
  std::uint64_t seed = 0;
};

/// Fully determined by (gt, n, family, seed). Z is drawn row-major from the
/// stream derive_seed(seed, 1); the noise from derive_seed(seed, 2) as
/// sigma * N(0, 1).
DesignSample sample_design(const GroundTruth& gt, int n, Family family,
                           std::uint64_t seed);

/// Columnar dump: header "i,x1..xp,eps,y" then one row per observation,
/// 17 significant digits.
void write_design_csv(const DesignSample& sample,
                      const std::filesystem::path& path);

}  // namespace pcrlab
