#pragma once

//! JSON and CSV formats for density matrices, histograms, sweeps, measurement
//! records and fit results, plus the run configuration read by the CLI.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "oamq/coincidence_sim.hpp"
#include "oamq/histogram_analysis.hpp"
#include "oamq/tomography.hpp"

namespace oamq {

using Json = nlohmann::json;

/// {"real": [[...] x4] x4, "imag": ...}, row-major.
Json density_to_json(const Matrix4cd &rho);
Matrix4cd density_from_json(const Json &j);

/// `bin_width_ns,duration_s` header, its values, then `bin_index,tau_ns,counts`
/// rows. Lines starting with '#' are skipped on read; `comments` are written
/// first, each prefixed with "# ".
void write_histogram_csv(std::ostream &os, const CoincidenceHistogram &hist,
                         const std::vector<std::string> &comments = {});
CoincidenceHistogram read_histogram_csv(std::istream &is);

Json projector_to_json(const QubitProjector &p);
QubitProjector projector_from_json(const Json &j);
Json records_to_json(const std::vector<MeasurementRecord> &records);
std::vector<MeasurementRecord> records_from_json(const Json &j);

Json sweep_points_to_json(const std::vector<SweepPoint> &pts);
std::vector<SweepPoint> sweep_points_from_json(const Json &j);

Json fit_to_json(const SweepFit &fit);
Json tomography_to_json(const TomographyResult &res);

// ---------------------------------------------------------------------------

/// Stokes analyzer of one sweep curve: a fixed displacement, or the balanced
/// displacement with the given sign.
struct SweepCurveSpec {
  std::string label;
  std::optional<double> x0;
  int balanced_sign = 0;
};

struct StateSpec {
  enum class Kind { PairState, Werner, Explicit } kind = Kind::PairState;
  std::complex<double> alpha1 = 1.0;
  double werner_p = 1.0;
  DensityMatrix4 rho = DensityMatrix4::Zero();

  DensityMatrix4 density() const;
};

struct RunConfig {
  int schema_version = 1;
  std::uint64_t seed = 20080101;
  double waist_mm = 0.8;
  QuadratureSpec quadrature{};
  SourceConfig source{};
  std::optional<double> g_target; // used to calibrate pair_rate when it is not given
  bool pair_rate_given = false;
  AnalysisWindows windows{};
  double g_tau_ns = 12.0;
  StateSpec state{};

  struct Sweep {
    double duration_s = 500.0;
    std::vector<double> x0_list;
    std::vector<SweepCurveSpec> curves;
    int antistokes_order = 1;
    int fit_order = -1;
    bool noiseless = false;
  } sweep;

  struct Tomo {
    double counts_per_setting = 1e5;
    bool physical_design = false;
    MleOptions mle{};
  } tomography;

  struct Outputs {
    std::string histogram = "histogram.csv";
    std::string analysis = "analysis.json";
    std::string sweep = "sweep.json";
    std::string fit = "fit.json";
    std::string records = "records.json";
    std::string tomography = "tomography.json";
    std::string report = "report.json";
  } outputs;

  std::string hash; // FNV-1a 64 of the canonical config text
};

/** Throws InvalidInput on unknown keys, wrong types or invalid values. */
RunConfig parse_run_config(const Json &j);
RunConfig load_run_config(const std::string &path);

std::string config_hash(const Json &j);

} // namespace oamq
