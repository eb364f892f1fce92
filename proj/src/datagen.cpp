#include "pcrlab/datagen.hpp"

#include "pcrlab/errors.hpp"
#include "pcrlab/rng.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

namespace pcrlab {

std::string_view to_string(HMode mode) {
  switch (mode) {
    case HMode::RandomSphere: return "random_sphere";
    case HMode::FirstCoordinate: return "first_coordinate";
    case HMode::Flat: return "flat";
  }
  return "unknown";
}

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Gaussian: return "gaussian";
    case Family::Rademacher: return "rademacher";
    case Family::Uniform: return "uniform";
  }
  return "unknown";
}

HMode h_mode_from_string(std::string_view name) {
  if (name == "random_sphere") return HMode::RandomSphere;
  if (name == "first_coordinate") return HMode::FirstCoordinate;
  if (name == "flat") return HMode::Flat;
  throw ParameterError("unknown h_mode '" + std::string(name) + "'");
}

Family family_from_string(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "rademacher") return Family::Rademacher;
  if (name == "uniform") return Family::Uniform;
  throw ParameterError("unknown design family '" + std::string(name) + "'");
}

GroundTruth make_ground_truth(const Spectrum& spectrum, double s, double L,
                              double sigma2, std::uint64_t seed, HMode h_mode) {
  if (!(s >= 0.0)) throw ParameterError("smoothness s must be >= 0");
  if (!(L > 0.0)) throw ParameterError("source norm L must be > 0");
  if (!(sigma2 >= 0.0)) throw ParameterError("noise variance must be >= 0");
  const int p = spectrum.p();

  Eigen::VectorXd h(p);
  switch (h_mode) {
    case HMode::RandomSphere: {
      CounterRng rng(derive_seed(seed, 3));
      do {
        for (int j = 0; j < p; ++j) h(j) = rng.normal();
      } while (h.norm() == 0.0);
      break;
    }
    case HMode::FirstCoordinate:
      h.setZero();
      h(0) = 1.0;
      break;
    case HMode::Flat:
      h.setOnes();
      break;
  }
  h *= L / h.norm();

  Eigen::VectorXd f(p);
  for (int j = 0; j < p; ++j) f(j) = std::pow(spectrum.values()(j), s) * h(j);

  return GroundTruth{spectrum, s, L, sigma2, std::move(h), std::move(f)};
}

DesignSample sample_design(const GroundTruth& gt, int n, Family family,
                           std::uint64_t seed) {
  if (n < 1) throw ParameterError("sample size n must be >= 1");
  const int p = gt.p();
  const Eigen::VectorXd scale = gt.spectrum.values().cwiseSqrt();
  constexpr double kSqrt3 = 1.7320508075688772;

  DesignSample out;
  out.n = n;
  out.family = family;
  out.seed = seed;
  out.X.resize(n, p);

  CounterRng design_rng(derive_seed(seed, 1));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      double z = 0.0;
      switch (family) {
        case Family::Gaussian: z = design_rng.normal(); break;
        case Family::Rademacher: z = design_rng.rademacher(); break;
        case Family::Uniform: z = (2.0 * design_rng.uniform() - 1.0) * kSqrt3; break;
      }
      out.X(i, j) = scale(j) * z;
    }
  }

  CounterRng noise_rng(derive_seed(seed, 2));
  const double sigma = std::sqrt(gt.sigma2);
  out.eps.resize(n);
  for (int i = 0; i < n; ++i) out.eps(i) = sigma * noise_rng.normal();

  out.Y = out.X * gt.f + out.eps;
  return out;
}

void write_design_csv(const DesignSample& sample,
                      const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open " + path.string() + " for writing");
  const auto p = sample.X.cols();
  os << "i";
  for (Eigen::Index j = 1; j <= p; ++j) os << ",x" << j;
  os << ",eps,y\n";
  os << std::setprecision(17);
  for (int i = 0; i < sample.n; ++i) {
    os << i;
    for (Eigen::Index j = 0; j < p; ++j) os << ',' << sample.X(i, j);
    os << ',' << sample.eps(i) << ',' << sample.Y(i) << '\n';
  }
}

}  // namespace pcrlab
