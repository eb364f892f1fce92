#include "pcrlab/cli.hpp"
#include "pcrlab/datagen.hpp"
#include "pcrlab/errors.hpp"
#include "pcrlab/estimators.hpp"
#include "pcrlab/harness.hpp"
#include "pcrlab/rng.hpp"
#include "pcrlab/spectrum.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

namespace py = pybind11;
using namespace pcrlab;

namespace {

py::dict report_dict(const RiskReport& report) {
  py::dict out;
  for (const auto& [name, value] : report.flatten()) out[py::str(name)] = value;
  out["seed"] = report.seed;
  out["error"] = report.error;
  return out;
}

py::dict gap_dict(const GapReport& g) {
  py::dict out;
  out["r"] = g.r;
  out["defined"] = g.defined;
  out["sum_below"] = g.sum_below;
  out["sum_above"] = g.sum_above;
  out["rel_gap"] = g.rel_gap;
  return out;
}

py::object search_dict(const std::optional<GapSearchResult>& found) {
  if (!found) return py::none();
  py::dict out;
  out["r"] = found->r;
  out["criterion"] = found->criterion;
  out["below_normalized"] = found->below_normalized;
  out["total_normalized"] = found->total_normalized;
  out["rel_gap_normalized"] = found->rel_gap_normalized;
  return out;
}

StudyConfig parse_config(const std::string& text) {
  return cli::study_config_from_json(nlohmann::json::parse(text));
}

}  // namespace

PYBIND11_MODULE(_pcrlab, m) {
  m.doc() = "Principal component regression risk laboratory";
  m.attr("__version__") = cli::version();

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<cli::ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Spectrum>(m, "Spectrum")
      .def_property_readonly("kind", [](const Spectrum& s) { return std::string(to_string(s.kind())); })
      .def_property_readonly("alpha", &Spectrum::alpha)
      .def_property_readonly("p", &Spectrum::p)
      .def_property_readonly("values", &Spectrum::values)
      .def("lam", &Spectrum::lambda, py::arg("j"), "1-based eigenvalue")
      .def("trace", &Spectrum::trace)
      .def("tail_trace", &Spectrum::tail_trace, py::arg("r"));

  m.def(
      "make_spectrum",
      [](const std::string& kind, double alpha, int p, double c_ev, std::uint64_t seed) {
        return make_spectrum(spectrum_kind_from_string(kind), alpha, p, c_ev, seed);
      },
      py::arg("kind"), py::arg("alpha"), py::arg("p"), py::arg("c_ev") = 1.0,
      py::arg("seed") = 0);

  m.def("gap_report", [](const Spectrum& s, int r) { return gap_dict(gap_report(s, r)); },
        py::arg("spectrum"), py::arg("r"));
  m.def("find_gap_index_below",
        [](const Spectrum& s, int d, double c1) { return search_dict(find_gap_index_below(s, d, c1)); },
        py::arg("spectrum"), py::arg("d"), py::arg("c1"));
  m.def("find_gap_index_above",
        [](const Spectrum& s, int d, double C1) { return search_dict(find_gap_index_above(s, d, C1)); },
        py::arg("spectrum"), py::arg("d"), py::arg("C1"));
  m.def("build_grouping",
        [](const Spectrum& s, int d, double c2) {
          const Grouping g = build_grouping(s, d, c2);
          py::dict out;
          out["breakpoints"] = g.breakpoints;
          out["ratio_bound"] = g.ratio_bound;
          out["overshoot"] = g.overshoot;
          return out;
        },
        py::arg("spectrum"), py::arg("d"), py::arg("c2"));

  m.def(
      "sample_design",
      [](const Spectrum& s, double smoothness, double L, double sigma2, const std::string& h_mode,
         int n, const std::string& family, std::uint64_t seed) {
        const GroundTruth gt = make_ground_truth(s, smoothness, L, sigma2, derive_seed(seed, 0x68),
                                                 h_mode_from_string(h_mode));
        const DesignSample d = sample_design(gt, n, family_from_string(family), seed);
        return py::make_tuple(d.X, d.Y, gt.f);
      },
      py::arg("spectrum"), py::arg("s"), py::arg("L"), py::arg("sigma2"),
      py::arg("h_mode") = "random_sphere", py::arg("n"), py::arg("family") = "gaussian",
      py::arg("seed"),
      "Returns (X, Y, f) for one design draw.");

  m.def(
      "pca",
      [](const Eigen::MatrixXd& X) {
        const PcaDecomposition dec = pca(X);
        return py::make_tuple(dec.lambda_hat, dec.U_hat);
      },
      py::arg("X"), "Eigenvalues (descending) and eigenvectors of X^T X / n.");

  m.def(
      "pcr_fit",
      [](const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int d, const Spectrum& s,
         bool threshold) {
        const PcaDecomposition dec = pca(X);
        return pcr_fit(dec, X, Y, d, s,
                       threshold ? Thresholding::OracleHalf : Thresholding::None)
            .coeffs;
      },
      py::arg("X"), py::arg("Y"), py::arg("d"), py::arg("spectrum"),
      py::arg("threshold") = true);

  m.def(
      "run_replicate",
      [](const std::string& config_json, int n, int index) {
        const StudyConfig config = parse_config(config_json);
        config.validate();
        return report_dict(run_replicate(config, n, index));
      },
      py::arg("config_json"), py::arg("n"), py::arg("index"),
      "Runs one replicate of a study config (JSON text) and returns its columns.");

  m.def(
      "mc_study",
      [](const std::string& config_json) {
        const StudyConfig config = parse_config(config_json);
        config.validate();
        StudyReport study;
        {
          py::gil_scoped_release release;
          study = mc_study(config);
        }
        py::list points;
        for (const auto& point : study.points) {
          py::dict pd;
          pd["n"] = point.n;
          pd["d"] = point.d;
          pd["r"] = point.r;
          py::dict stats;
          for (const auto& a : point.stats)
            stats[py::str(a.name)] = py::make_tuple(a.mean, a.se, a.count);
          pd["stats"] = stats;
          pd["violations"] = point.summary.violations;
          pd["identity_failures"] = point.summary.identity_failures;
          pd["max_identity_residual"] = point.summary.max_identity_residual;
          points.append(pd);
        }
        return points;
      },
      py::arg("config_json"));

  m.def(
      "run_cli",
      [](const std::string& command, const std::string& config, const std::string& out,
         std::optional<std::uint64_t> seed, std::optional<int> threads) {
        cli::Options options{command, config, out, seed, threads};
        std::ostringstream log;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = cli::run(options, log);
        }
        return py::make_tuple(code, log.str());
      },
      py::arg("command"), py::arg("config"), py::arg("out"), py::arg("seed") = py::none(),
      py::arg("threads") = py::none(),
      "Runs a CLI command in-process and returns (exit_code, log).");
}
