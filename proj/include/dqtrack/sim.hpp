#pragma once

// Scenario harness: truth propagation of both bodies, camera measurements,
// the dual quaternion UKF and the PnP baseline run side by side.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dqtrack/config.hpp"
#include "dqtrack/observability.hpp"

namespace dqtrack {

constexpr const char* kTrialCsvSchema = "dqtrack-trial/1";
constexpr const char* kSummarySchema = "dqtrack-summary/1";
constexpr const char* kObservabilitySchema = "dqtrack-observability/1";

// Random streams per trial, seeded with derive_seed(seed, trial, stream).
enum RngStream : std::uint64_t { kPixelStream = 0, kInitStream = 1 };

struct ErrorMetrics {
  double rot = 0.0;    // rad, in [0, pi]
  double pos = 0.0;    // m
  double omega = 0.0;  // rad/s
  double v = 0.0;      // m/s
};

// Rotation error 2 acos|scalar(q_truth* q_est)|; the rest are Euclidean
// norms of camera-frame differences (v is the linear velocity, not the dual
// part of the twist).
ErrorMetrics error_metrics(const BodyState& truth, const BodyState& est);
// Pose-only variant for the PnP baseline.
ErrorMetrics pose_error(const DualPose& truth, const DualPose& est);

// Linear velocity dual(w) + omega x r of a camera-relative state.
Vec3 linear_velocity(const BodyState& x);

// Target w.r.t. camera, velocity in camera coordinates.
BodyState relative_state(const BodyState& camera, const BodyState& target);

struct TrialRow {
  double t = 0.0;
  BodyState truth;
  BodyState est;
  Vec12 P_diag{Vec12::Zero()};
  ErrorMetrics err;
  std::optional<DualPose> pnp;
  ErrorMetrics pnp_err;  // NaN when pnp is empty
  int n_markers = 0;
  double nees = 0.0;
  double nis = 0.0;  // NaN without an update
};

struct TrialRecord {
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
  BodyState initial_truth;
  FilterState initial_estimate;
  std::vector<TrialRow> rows;  // t = k / rate for k = 1..steps
};

// Pose from solve_pnp on `first` (or the truth with init_at_truth), velocity
// drawn around the truth with the initial velocity sigmas, P0 from the
// initial sigmas. Throws InitializationError if PnP fails.
FilterState init_estimate(const ScenarioConfig& cfg, const MeasurementFrame& first,
                          const BodyState& truth, Rng& rng);

// One trial. Deterministic in (cfg, cfg.seed, trial).
TrialRecord run_scenario(const ScenarioConfig& cfg, std::uint64_t trial = 0);

void write_trial_csv(std::ostream& os, const TrialRecord& rec);
// "%.17g", with "nan" for NaN.
std::string format_double(double x);

struct PhaseStats {
  int index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<int> visible;
  int rows = 0;  // per trial
  ErrorMetrics ukf_mean;
  int pnp_rows = 0;  // PnP-available rows, summed over trials
  double pnp_rot_mean = 0.0;  // NaN with no PnP rows
  double pnp_pos_mean = 0.0;
  double nees_mean = 0.0;  // over rows and trials
  ObservabilityReport observability;
};

struct NeesStats {
  int dof = kErrorDim;
  int trials = 0;
  std::vector<double> mean_series;  // per row, averaged over trials
  double lower = 0.0;               // two-sided 95% bounds on a per-row average
  double upper = 0.0;
  double full_phase_mean = 0.0;     // average of mean_series over the phases seeing the most markers
  double containment = 0.0;         // fraction of those rows inside [lower, upper]
};

struct MonteCarloReport {
  ScenarioConfig cfg;
  int trials = 0;
  std::vector<PhaseStats> phases;
  NeesStats nees;
  // Means over rows of phases with >= 3 markers where PnP was available.
  double ukf_rot_multi = 0.0;
  double ukf_pos_multi = 0.0;
  double pnp_rot_multi = 0.0;
  double pnp_pos_multi = 0.0;
};

// Two-sided 95% interval for the mean of `samples` independent chi-square
// variables with `dof` degrees of freedom each.
std::array<double, 2> chi2_mean_interval(int dof, int samples, double confidence = 0.95);

// Trials run on `threads` workers (0 = hardware concurrency); results are
// ordered by trial index, so the report does not depend on scheduling.
std::vector<TrialRecord> run_trials(const ScenarioConfig& cfg, int n_trials, int threads = 0);
MonteCarloReport summarize(const ScenarioConfig& cfg, const std::vector<TrialRecord>& trials);
MonteCarloReport run_monte_carlo(const ScenarioConfig& cfg, int n_trials, int threads = 0);

void write_summary_json(std::ostream& os, const MonteCarloReport& report);

MeasurementKind measurement_kind(MeasurementMode mode);

// Observability of the initial relative state for the full marker set and
// for each schedule segment's visible set.
struct ObservabilityAudit {
  MeasurementMode mode = MeasurementMode::UnitVectors;
  ObservabilityReport all_markers;
  std::vector<ObservabilityReport> phases;
};
ObservabilityAudit audit_observability(const ScenarioConfig& cfg, MeasurementMode mode);
void write_observability_json(std::ostream& os, const ScenarioConfig& cfg,
                              const ObservabilityAudit& audit);

}  // namespace dqtrack
