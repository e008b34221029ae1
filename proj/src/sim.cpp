#include "dqtrack/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <thread>

#include <Eigen/Cholesky>
#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include "dqtrack/errors.hpp"
#include "dqtrack/pnp.hpp"

namespace dqtrack {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Relative-angle formula that stays accurate near zero, where acos loses
// half the digits.
double rotation_angle(const Quaternion& q_truth, const Quaternion& q_est) {
  const Quaternion d = mul(conj(q_truth), q_est);
  return 2.0 * std::atan2(d.v().norm(), std::abs(d.s()));
}

}  // namespace

Vec3 linear_velocity(const BodyState& x) {
  return x.vel.dual() + x.vel.real().cross(pose_translation_parent(x.pose));
}

BodyState relative_state(const BodyState& camera, const BodyState& target) {
  const DualPose p = chain(camera.pose, target.pose);
  return {p, transform(p, target.vel) - camera.vel};
}

ErrorMetrics pose_error(const DualPose& truth, const DualPose& est) {
  ErrorMetrics e;
  e.rot = rotation_angle(truth.real(), est.real());
  e.pos = (pose_translation_parent(est) - pose_translation_parent(truth)).norm();
  return e;
}

ErrorMetrics error_metrics(const BodyState& truth, const BodyState& est) {
  ErrorMetrics e = pose_error(truth.pose, est.pose);
  e.omega = (est.vel.real() - truth.vel.real()).norm();
  e.v = (linear_velocity(est) - linear_velocity(truth)).norm();
  return e;
}

FilterState init_estimate(const ScenarioConfig& cfg, const MeasurementFrame& first,
                          const BodyState& truth, Rng& rng) {
  FilterState x;
  x.P = cfg.initial_sigma.variances().asDiagonal();
  if (cfg.init_at_truth) {
    x.pose = truth.pose;
    x.vel = truth.vel;
    return x;
  }
  if (first.mode != MeasurementMode::Pixels) {
    throw InitializationError("PnP initialization needs pixel measurements");
  }
  std::vector<Vec3> pts;
  std::vector<Vec2> px;
  for (std::size_t i = 0; i < first.ids.size(); ++i) {
    pts.push_back(cfg.markers[first.ids[i]]);
    px.push_back(first.values[i]);
  }
  try {
    x.pose = solve_pnp(cfg.camera, pts, px, cfg.pnp).pose;
  } catch (const std::exception& e) {
    throw InitializationError(std::string("PnP failed on the first frame: ") + e.what());
  }

  const Vec3 w = truth.vel.real() + cfg.initial_sigma.omega * Vec3(rng.normal(), rng.normal(),
                                                                   rng.normal());
  const Vec3 v =
      linear_velocity(truth) + cfg.initial_sigma.v * Vec3(rng.normal(), rng.normal(), rng.normal());
  x.vel = DualVelocity(w, v - w.cross(pose_translation_parent(x.pose)));
  return x;
}

namespace {

VecX project_markers(const CameraModel& cam, const DualPose& pose, const std::vector<Vec3>& markers,
                     const std::vector<int>& ids) {
  VecX y(2 * static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Vec3 p = marker_position_camera(pose, markers[ids[i]]);
    if (!(p.z() > cam.depth_tol)) throw PositiveDepthError("sigma point puts a marker behind the camera");
    y.segment<2>(2 * i) = Vec2(cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy);
  }
  return y;
}

double nees_of(const FilterState& est, const BodyState& truth, bool canonicalize) {
  const Vec12 e = lift(est.manifold(), truth, canonicalize);
  const Eigen::LDLT<Mat12> ldlt(est.P);
  return e.dot(ldlt.solve(e));
}

}  // namespace

TrialRecord run_scenario(const ScenarioConfig& cfg, std::uint64_t trial) {
  cfg.validate();
  if (cfg.mode != MeasurementMode::Pixels) {
    throw std::invalid_argument("filter runs support the pixels measurement mode only");
  }
  TrialRecord rec;
  rec.seed = cfg.seed;
  rec.trial = trial;

  Rng pixel_rng(derive_seed(cfg.seed, trial, kPixelStream));
  Rng init_rng(derive_seed(cfg.seed, trial, kInitStream));

  const MassMatrix cam_mass = cfg.camera_body.mass_matrix();
  const MassMatrix tgt_mass = cfg.target_body.mass_matrix();
  const Wrench cam_wrench = cfg.camera_body.wrench();
  const Wrench tgt_wrench = cfg.target_body.wrench();
  const double dt = cfg.dt();

  BodyState cam = cfg.camera_body.initial_state();
  BodyState tgt = cfg.target_body.initial_state();
  rec.initial_truth = relative_state(cam, tgt);

  const MeasurementFrame first = measure_frame(cfg.camera, rec.initial_truth.pose, cfg.markers,
                                               cfg.schedule, 0.0, &pixel_rng, cfg.mode);
  rec.initial_estimate = init_estimate(cfg, first, rec.initial_truth, init_rng);
  DualQuaternionUkf ukf(rec.initial_estimate, cfg.ukf);

  const Mat12 Q = dt * Mat12(cfg.process_noise.variances().asDiagonal());
  const double r_var = cfg.filter_pixel_sigma * cfg.filter_pixel_sigma;
  const int min_pnp = cfg.pnp.allow_three_point ? 3 : 4;

  const int steps = cfg.steps();
  rec.rows.reserve(steps);
  for (int k = 1; k <= steps; ++k) {
    RelativeMotionModel f;
    f.target_mass = tgt_mass;
    f.target_wrench = tgt_wrench;
    f.camera_vel = cam.vel;
    f.camera_accel = inertial_accel(cam.vel, cam_mass, cam_wrench);
    f.dt = dt;
    ukf.predict(f, Q);

    cam = propagate_body(cam, cam_mass, cam_wrench, dt, cfg.truth_substeps);
    tgt = propagate_body(tgt, tgt_mass, tgt_wrench, dt, cfg.truth_substeps);

    TrialRow row;
    row.t = k / cfg.rate_hz;
    row.truth = relative_state(cam, tgt);

    const MeasurementFrame frame = measure_frame(cfg.camera, row.truth.pose, cfg.markers,
                                                 cfg.schedule, row.t, &pixel_rng, cfg.mode);
    row.n_markers = static_cast<int>(frame.ids.size());
    row.nis = kNaN;
    if (!frame.empty()) {
      const MeasurementModel h = [&](const BodyState& x) {
        return project_markers(cfg.camera, x.pose, cfg.markers, frame.ids);
      };
      const VecX y = frame.stacked();
      const MatX R = r_var * MatX::Identity(y.size(), y.size());
      row.nis = ukf.update(y, h, R).nis;
    }

    const FilterState& x = ukf.state();
    row.est = x.manifold();
    row.P_diag = x.P.diagonal();
    row.err = error_metrics(row.truth, row.est);
    row.nees = nees_of(x, row.truth, cfg.ukf.canonicalize_error_quat);

    row.pnp_err = {kNaN, kNaN, kNaN, kNaN};
    if (row.n_markers >= min_pnp) {
      std::vector<Vec3> pts;
      std::vector<Vec2> px;
      for (std::size_t i = 0; i < frame.ids.size(); ++i) {
        pts.push_back(cfg.markers[frame.ids[i]]);
        px.push_back(frame.values[i]);
      }
      try {
        row.pnp = solve_pnp(cfg.camera, pts, px, cfg.pnp).pose;
        const ErrorMetrics pe = pose_error(row.truth.pose, *row.pnp);
        row.pnp_err.rot = pe.rot;
        row.pnp_err.pos = pe.pos;
      } catch (const DegenerateConfigurationError&) {
        // Collinear visible subset: no baseline estimate for this frame.
      }
    }
    rec.rows.push_back(std::move(row));
  }
  return rec;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trial_csv(std::ostream& os, const TrialRecord& rec) {
  os << "# schema: " << kTrialCsvSchema << '\n';
  static const char* const kState[] = {"qw", "qx", "qy", "qz", "rx", "ry", "rz",
                                       "wx", "wy", "wz", "vx", "vy", "vz"};
  os << "t";
  for (const char* p : {"truth_", "est_"}) {
    for (const char* s : kState) os << ',' << p << s;
  }
  for (int i = 0; i < kErrorDim; ++i) os << ",P_diag_" << i;
  os << ",err_rot,err_pos,err_w,err_v,pnp_err_rot,pnp_err_pos,pnp_available,n_markers\n";

  auto state = [&](const BodyState& x) {
    const Vec4 q = x.pose.real().coeffs();
    const Vec3 r = pose_translation_parent(x.pose);
    const Vec3 w = x.vel.real();
    const Vec3 v = linear_velocity(x);
    for (int i = 0; i < 4; ++i) os << ',' << format_double(q[i]);
    for (const Vec3* a : {&r, &w, &v}) {
      for (int i = 0; i < 3; ++i) os << ',' << format_double((*a)[i]);
    }
  };
  for (const TrialRow& row : rec.rows) {
    os << format_double(row.t);
    state(row.truth);
    state(row.est);
    for (int i = 0; i < kErrorDim; ++i) os << ',' << format_double(row.P_diag[i]);
    os << ',' << format_double(row.err.rot) << ',' << format_double(row.err.pos) << ','
       << format_double(row.err.omega) << ',' << format_double(row.err.v) << ','
       << format_double(row.pnp_err.rot) << ',' << format_double(row.pnp_err.pos) << ','
       << (row.pnp ? 1 : 0) << ',' << row.n_markers << '\n';
  }
}

std::array<double, 2> chi2_mean_interval(int dof, int samples, double confidence) {
  if (dof < 1 || samples < 1 || !(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("chi2_mean_interval: bad arguments");
  }
  const boost::math::chi_squared dist(static_cast<double>(dof) * samples);
  const double tail = 0.5 * (1.0 - confidence);
  return {boost::math::quantile(dist, tail) / samples,
          boost::math::quantile(boost::math::complement(dist, tail)) / samples};
}

std::vector<TrialRecord> run_trials(const ScenarioConfig& cfg, int n_trials, int threads) {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  cfg.validate();
  std::vector<TrialRecord> out(n_trials);
  std::vector<std::exception_ptr> errors(n_trials);
  int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, n_trials);

  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n_trials; i = next++) {
      try {
        out[i] = run_scenario(cfg, static_cast<std::uint64_t>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

MeasurementKind measurement_kind(MeasurementMode mode) {
  return mode == MeasurementMode::Positions ? MeasurementKind::Position
                                            : MeasurementKind::UnitVector;
}

namespace {

std::vector<Vec3> subset(const std::vector<Vec3>& markers, const std::vector<int>& ids) {
  std::vector<Vec3> out;
  for (int id : ids) out.push_back(markers.at(id));
  return out;
}

ObservabilityReport observe(const BodyState& rel, const std::vector<Vec3>& markers,
                            MeasurementMode mode) {
  const TransformedState ts = TransformedState::from(rel.pose, rel.vel);
  if (markers.empty()) {
    ObservabilityReport r;
    r.kind = measurement_kind(mode);
    return r;
  }
  return analyze_observability(ts, markers, measurement_kind(mode));
}

}  // namespace

MonteCarloReport summarize(const ScenarioConfig& cfg, const std::vector<TrialRecord>& trials) {
  if (trials.empty()) throw std::invalid_argument("summarize: no trials");
  MonteCarloReport rep;
  rep.cfg = cfg;
  rep.trials = static_cast<int>(trials.size());
  const std::size_t n_rows = trials.front().rows.size();
  const double n_trials = static_cast<double>(trials.size());

  const auto& segs = cfg.schedule.segments();
  std::vector<int> phase_of(n_rows);
  for (std::size_t k = 0; k < n_rows; ++k) phase_of[k] = cfg.schedule.segment_at(trials.front().rows[k].t);

  rep.nees.trials = rep.trials;
  rep.nees.mean_series.assign(n_rows, 0.0);
  for (const TrialRecord& tr : trials) {
    for (std::size_t k = 0; k < n_rows; ++k) rep.nees.mean_series[k] += tr.rows[k].nees / n_trials;
  }
  const auto [lo, hi] = chi2_mean_interval(kErrorDim, rep.trials);
  rep.nees.lower = lo;
  rep.nees.upper = hi;

  std::size_t full = 0;
  for (const OcclusionSegment& seg : segs) full = std::max(full, seg.visible.size());
  double nees_sum = 0.0;
  int nees_rows = 0, inside = 0;
  double ukf_rot = 0.0, ukf_pos = 0.0, pnp_rot = 0.0, pnp_pos = 0.0;
  int multi_rows = 0;

  for (std::size_t s = 0; s < segs.size(); ++s) {
    PhaseStats ph;
    ph.index = static_cast<int>(s);
    ph.t_start = segs[s].t_start;
    ph.t_end = segs[s].t_end;
    ph.visible = segs[s].visible;
    double rot = 0.0, pos = 0.0, om = 0.0, vel = 0.0, nees = 0.0, prot = 0.0, ppos = 0.0;
    int first_row = -1;
    for (std::size_t k = 0; k < n_rows; ++k) {
      if (phase_of[k] != static_cast<int>(s)) continue;
      if (first_row < 0) first_row = static_cast<int>(k);
      ++ph.rows;
      for (const TrialRecord& tr : trials) {
        const TrialRow& r = tr.rows[k];
        rot += r.err.rot;
        pos += r.err.pos;
        om += r.err.omega;
        vel += r.err.v;
        nees += r.nees;
        if (r.pnp) {
          ++ph.pnp_rows;
          prot += r.pnp_err.rot;
          ppos += r.pnp_err.pos;
          if (ph.visible.size() >= 3) {
            ++multi_rows;
            ukf_rot += r.err.rot;
            ukf_pos += r.err.pos;
            pnp_rot += r.pnp_err.rot;
            pnp_pos += r.pnp_err.pos;
          }
        }
      }
      if (ph.visible.size() == full) {
        const double m = rep.nees.mean_series[k];
        nees_sum += m;
        ++nees_rows;
        if (m >= lo && m <= hi) ++inside;
      }
    }
    const double denom = ph.rows * n_trials;
    if (ph.rows > 0) {
      ph.ukf_mean = {rot / denom, pos / denom, om / denom, vel / denom};
      ph.nees_mean = nees / denom;
    }
    ph.pnp_rot_mean = ph.pnp_rows > 0 ? prot / ph.pnp_rows : kNaN;
    ph.pnp_pos_mean = ph.pnp_rows > 0 ? ppos / ph.pnp_rows : kNaN;
    const BodyState at = first_row >= 0 ? trials.front().rows[first_row].truth
                                        : trials.front().initial_truth;
    ph.observability = observe(at, subset(cfg.markers, ph.visible), cfg.mode);
    rep.phases.push_back(std::move(ph));
  }
  rep.nees.full_phase_mean = nees_rows > 0 ? nees_sum / nees_rows : kNaN;
  rep.nees.containment = nees_rows > 0 ? static_cast<double>(inside) / nees_rows : kNaN;
  rep.ukf_rot_multi = multi_rows > 0 ? ukf_rot / multi_rows : kNaN;
  rep.ukf_pos_multi = multi_rows > 0 ? ukf_pos / multi_rows : kNaN;
  rep.pnp_rot_multi = multi_rows > 0 ? pnp_rot / multi_rows : kNaN;
  rep.pnp_pos_multi = multi_rows > 0 ? pnp_pos / multi_rows : kNaN;
  return rep;
}

MonteCarloReport run_monte_carlo(const ScenarioConfig& cfg, int n_trials, int threads) {
  return summarize(cfg, run_trials(cfg, n_trials, threads));
}

namespace {

using nlohmann::ordered_json;

// JSON has no NaN; unavailable means are written as null.
ordered_json num(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

ordered_json codistribution_json(const CodistributionReport& r) {
  ordered_json j;
  j["rows"] = r.rows;
  j["cols"] = r.cols;
  j["rank"] = r.rank;
  j["threshold"] = r.threshold;
  j["singular_values"] = std::vector<double>(r.singular_values.data(),
                                             r.singular_values.data() + r.singular_values.size());
  j["verdict"] = r.verdict();
  return j;
}

ordered_json observability_json(const ObservabilityReport& r) {
  ordered_json j;
  j["measurement"] = r.kind == MeasurementKind::Position ? "positions" : "unit_vectors";
  j["marker_count"] = r.marker_count;
  j["verdict"] = r.observable() ? "observable" : "deficient";
  if (r.marker_count >= 3) {
    j["collinearity_margin"] = r.geometry.margin;
    j["collinear"] = r.geometry.collinear;
  } else {
    j["collinearity_margin"] = nullptr;
    j["collinear"] = nullptr;
  }
  if (r.has_triple) {
    ordered_json t = codistribution_json(r.best_triple);
    t["markers"] = r.geometry.triple;
    j["best_triple"] = t;
  } else {
    j["best_triple"] = nullptr;
  }
  j["stacked"] = r.stacked.rows > 0 ? codistribution_json(r.stacked) : ordered_json(nullptr);
  return j;
}

}  // namespace

void write_summary_json(std::ostream& os, const MonteCarloReport& rep) {
  ordered_json j;
  j["schema"] = kSummarySchema;
  j["seed"] = rep.cfg.seed;
  j["trials"] = rep.trials;
  j["duration"] = rep.cfg.duration;
  j["rate_hz"] = rep.cfg.rate_hz;
  j["mode"] = to_string(rep.cfg.mode);

  ordered_json phases = ordered_json::array();
  for (const PhaseStats& p : rep.phases) {
    ordered_json q;
    q["index"] = p.index;
    q["t_start"] = p.t_start;
    q["t_end"] = p.t_end;
    q["visible"] = p.visible;
    q["rows"] = p.rows;
    q["ukf"] = {{"err_rot", num(p.ukf_mean.rot)},
                {"err_pos", num(p.ukf_mean.pos)},
                {"err_w", num(p.ukf_mean.omega)},
                {"err_v", num(p.ukf_mean.v)}};
    q["pnp"] = {{"available_rows", p.pnp_rows},
                {"err_rot", num(p.pnp_rot_mean)},
                {"err_pos", num(p.pnp_pos_mean)}};
    q["nees_mean"] = num(p.nees_mean);
    q["observability"] = observability_json(p.observability);
    phases.push_back(q);
  }
  j["phases"] = phases;

  j["multi_marker"] = {{"ukf_err_rot", num(rep.ukf_rot_multi)},
                       {"ukf_err_pos", num(rep.ukf_pos_multi)},
                       {"pnp_err_rot", num(rep.pnp_rot_multi)},
                       {"pnp_err_pos", num(rep.pnp_pos_multi)}};

  ordered_json series = ordered_json::array();
  for (double x : rep.nees.mean_series) series.push_back(num(x));
  j["nees"] = {{"dof", rep.nees.dof},
               {"trials", rep.nees.trials},
               {"interval", {rep.nees.lower, rep.nees.upper}},
               {"full_phase_mean", num(rep.nees.full_phase_mean)},
               {"full_phase_inside",
                rep.nees.full_phase_mean >= rep.nees.lower &&
                    rep.nees.full_phase_mean <= rep.nees.upper},
               {"containment", num(rep.nees.containment)},
               {"mean_series", series}};
  os << j.dump(2) << '\n';
}

ObservabilityAudit audit_observability(const ScenarioConfig& cfg, MeasurementMode mode) {
  cfg.validate();
  ObservabilityAudit a;
  a.mode = mode;
  const BodyState rel =
      relative_state(cfg.camera_body.initial_state(), cfg.target_body.initial_state());
  a.all_markers = observe(rel, cfg.markers, mode);
  for (const OcclusionSegment& s : cfg.schedule.segments()) {
    a.phases.push_back(observe(rel, subset(cfg.markers, s.visible), mode));
  }
  return a;
}

void write_observability_json(std::ostream& os, const ScenarioConfig& cfg,
                              const ObservabilityAudit& audit) {
  ordered_json j;
  j["schema"] = kObservabilitySchema;
  j["mode"] = to_string(audit.mode);
  j["dims"] = {{"state", 16}, {"markers", cfg.markers.size()}};
  const ObservabilityReport& all = audit.all_markers;
  j["verdict"] = all.observable() ? "observable" : "deficient";
  if (all.has_triple) {
    j["rank"] = all.best_triple.rank;
    j["singular_values"] =
        std::vector<double>(all.best_triple.singular_values.data(),
                            all.best_triple.singular_values.data() +
                                all.best_triple.singular_values.size());
  } else {
    j["rank"] = all.stacked.rank;
    j["singular_values"] = std::vector<double>(
        all.stacked.singular_values.data(),
        all.stacked.singular_values.data() + all.stacked.singular_values.size());
  }
  j["collinearity_margin"] = all.marker_count >= 3 ? ordered_json(all.geometry.margin)
                                                   : ordered_json(nullptr);
  j["all_markers"] = observability_json(all);
  ordered_json phases = ordered_json::array();
  const auto& segs = cfg.schedule.segments();
  for (std::size_t i = 0; i < audit.phases.size(); ++i) {
    ordered_json p = observability_json(audit.phases[i]);
    p["t_start"] = segs[i].t_start;
    p["t_end"] = segs[i].t_end;
    p["visible"] = segs[i].visible;
    phases.push_back(p);
  }
  j["phases"] = phases;
  os << j.dump(2) << '\n';
}

}  // namespace dqtrack
