#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "exb/base_barriers.hpp"
#include "exb/cone_barrier.hpp"
#include "exb/exceptional_sets.hpp"
#include "exb/pucci.hpp"

namespace exb {

enum class ExperimentKind { Base, Lateral };

/// Segment carrying a negative patch for the control run.
struct SegmentSpec {
  std::vector<double> origin;
  std::vector<double> direction;
  double length;
};

/// {"lambda": .., "Lambda": ..}
EllipticityPair ellipticity_from_json(const nlohmann::json& j);
/// {"beta": .., "b0": envelope, "c0": envelope, "K": ..} with envelopes
/// {"kind": "constant", "a": ..} or {"kind": "power", "a": .., "p": ..}.
CoefficientBounds coefficients_from_json(const nlohmann::json& j);
nlohmann::json coefficients_to_json(const CoefficientBounds& cb);

struct ExperimentConfig {
  ExperimentKind which = ExperimentKind::Base;
  EllipticityPair ell{0.07, 0.1};
  CantorSpec cantor;
  CoefficientBounds coefficients;
  double L = 0.2;
  double tau = 0.25;
  double dip = 0.2;

  // Box [box_lo, box_hi]^2 with `cells` cells per axis.
  double box_lo = 0.2;
  double box_hi = 0.8;
  int cells = 128;

  // Base geometry.
  std::vector<double> y0;
  double r = 0.09;
  double T = 0.1;
  std::optional<double> alpha;  // psi order; chosen inside the admissible window when absent
  std::optional<double> sigma;

  // Lateral geometry. s and t0 are derived when absent.
  double theta0 = 0.55 * 3.14159265358979323846;
  std::optional<double> s;
  std::optional<double> t0;
  double s_factor = 1.25;

  SegmentSpec control;
  std::vector<double> control_probe;

  // Patch widths, descending.
  std::vector<double> widths;
  double probe_radius_cells = 4.0;
  int probe_steps = 16;
  int check_stride = 40;  // check every slab up to 32 steps, then every check_stride-th

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  /// Widths w_k = start * factor^k, k < count.
  static std::vector<double> geometric_widths(double start, double factor, int count);
};

struct CaseResult {
  std::string name;
  double min_value = 0.0;  // smallest w (or bound) found on the sampled boundary piece
  std::size_t points = 0;
  bool ok = true;
  std::vector<double> witness;  // (x..., t) of the smallest value
};

struct SweepEntry {
  double width = 0.0;
  int level = 0;
  std::size_t balls = 0;
  double radius = 0.0;
  double eps = 0.0;
  double probe_min = 0.0;
  double control_min = 0.0;
  std::vector<CaseResult> cases;
  double chain_bound = 0.0;       // -L + (barrier lower bound on the cover boundary)
  double Lw_max = 0.0;            // largest discrete L w on interior check nodes
  std::size_t Lw_nodes = 0;
  double tail_ratio_max = 0.0;    // series / closed bound, <= 1 expected
  double u_min = 0.0;
  double u_max = 0.0;
};

struct ExperimentReport {
  std::string which;
  nlohmann::json parameters;
  nlohmann::json certificates;
  std::vector<SweepEntry> sweep;
  double trend = 0.0;  // Kendall-type statistic of probe minima along the sweep, in [-1, 1]
  bool eventually_nondecreasing = false;
  double gap = 0.0;    // final probe minimum minus final control minimum
  double dip = 0.0;
  bool trend_ok = false;
  bool control_persistent = false;  // every control minimum <= -dip/2
  bool cases_ok = false;
  bool Lw_ok = false;
  std::vector<std::string> notes;
  std::vector<std::string> artifacts;

  /// Content without artifact paths.
  nlohmann::json to_json() const;
  /// FNV-1a 64 over to_json().dump(), as 16 hex digits.
  std::string hash() const;
};

/// Largest ball radius with C1 eps^{-delta} >= L, i.e. (C1/L)^{1/delta}.
double lateral_eps1_bound(double C1, double delta, double L);

/// Certification failures inside a run are rethrown with the failing stage
/// prefixed to the message.
ExperimentReport run_base_experiment(const ExperimentConfig& cfg);
ExperimentReport run_lateral_experiment(const ExperimentConfig& cfg);
ExperimentReport run_experiment(const ExperimentConfig& cfg);

/// Writes report.json, sweep.csv, min_vs_width.svg and case_margins.svg into
/// `dir` (created if missing) and records the paths in the report.
void emit_report(ExperimentReport& report, const std::string& dir);

/// CSV sweep table exactly as written by emit_report.
std::string sweep_csv(const ExperimentReport& report);

/// Minimal line plot: one polyline per series, log-scaled x when requested.
std::string svg_line_plot(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                          const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                          bool log_x);

std::uint64_t fnv1a64(const std::string& s);

/// C^2 bump (1 - s^2)^3 on [0, 1), zero beyond.
double bump(double s);

}  // namespace exb
