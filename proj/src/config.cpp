#include "dqtrack/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "dqtrack/errors.hpp"

namespace dqtrack {

BodyState BodyConfig::initial_state() const {
  return {pose_from(attitude, position), DualVelocity(omega, velocity)};
}

Vec12 ErrorSigmas::variances() const {
  Vec12 out;
  out << Vec3::Constant(phi * phi), Vec3::Constant(r * r), Vec3::Constant(omega * omega),
      Vec3::Constant(v * v);
  return out;
}

int ScenarioConfig::steps() const {
  return static_cast<int>(std::lround(duration * rate_hz));
}

ScenarioConfig ScenarioConfig::flyby_default() {
  ScenarioConfig c;
  c.markers = {Vec3(0, 0, 0), Vec3(1, 1, 0), Vec3(1, -1, 0), Vec3(-1, 1, 0), Vec3(-1, -1, 0)};
  c.schedule = OcclusionSchedule::flyby_default();

  // Camera starts at the inertial origin looking down +Z. Initial rates are
  // chosen so the constant body force and torque bring the camera back onto
  // its starting line of sight by the end of the run.
  c.camera_body.force = Vec3(0.5, 0, 0);
  c.camera_body.torque = Vec3(0, 0.05, 0);
  c.camera_body.velocity = Vec3(-1.25, 0, 0);
  c.camera_body.omega = Vec3(0, -0.125, 0);

  // Target 10 m ahead, spinning about and drifting along its -Z axis.
  c.target_body.position = Vec3(0, 0, 10);
  c.target_body.omega = Vec3(0, 0, -0.5);
  c.target_body.velocity = Vec3(0, 0, -0.2);

  c.process_noise = {0.0, 0.0, 0.3, 0.3};
  c.initial_sigma = {0.2, 0.2, 0.1, 0.5};
  c.filter_pixel_sigma = 2.0;
  // The scenario's baseline reports poses with three markers and is
  // unavailable only with two.
  c.pnp.allow_three_point = true;
  return c;
}

namespace {

bool finite_nonneg(double x) { return std::isfinite(x) && x >= 0.0; }

void validate_sigmas(const ErrorSigmas& s, const std::string& path) {
  if (!finite_nonneg(s.phi)) throw ConfigError(path + ".phi", "must be non-negative");
  if (!finite_nonneg(s.r)) throw ConfigError(path + ".r", "must be non-negative");
  if (!finite_nonneg(s.omega)) throw ConfigError(path + ".omega", "must be non-negative");
  if (!finite_nonneg(s.v)) throw ConfigError(path + ".v", "must be non-negative");
}

void validate_body(const BodyConfig& b, const std::string& path) {
  if (!(b.mass > 0.0) || !std::isfinite(b.mass)) throw ConfigError(path + ".mass", "must be positive");
  try {
    MassMatrix m(b.mass, b.inertia);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ".inertia", e.what());
  }
  auto finite3 = [&](const Vec3& v, const char* key) {
    if (!v.allFinite()) throw ConfigError(path + "." + key, "must be finite");
  };
  finite3(b.force, "force");
  finite3(b.torque, "torque");
  finite3(b.position, "position");
  finite3(b.omega, "omega");
  finite3(b.velocity, "velocity");
}

}  // namespace

void ScenarioConfig::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration)) throw ConfigError("duration", "must be positive");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) throw ConfigError("rate_hz", "must be positive");
  if (std::abs(duration * rate_hz - steps()) > 1e-9 * std::max(1.0, duration * rate_hz)) {
    throw ConfigError("rate_hz", "duration must be a whole number of measurement periods");
  }
  if (truth_substeps < 1) throw ConfigError("truth_substeps", "must be >= 1");
  camera.validate();
  if (markers.empty()) throw ConfigError("markers", "at least one marker required");
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (!markers[i].allFinite()) {
      throw ConfigError("markers[" + std::to_string(i) + "]", "must be finite");
    }
  }
  schedule.validate(duration, static_cast<int>(markers.size()));
  validate_body(camera_body, "bodies.camera");
  validate_body(target_body, "bodies.target");
  validate_sigmas(process_noise, "process_noise");
  validate_sigmas(initial_sigma, "initial_sigma");
  if (!(filter_pixel_sigma > 0.0) || !std::isfinite(filter_pixel_sigma)) {
    throw ConfigError("filter.pixel_sigma", "must be positive");
  }
  if (!(initial_sigma.phi > 0.0 && initial_sigma.r > 0.0 && initial_sigma.omega > 0.0 &&
        initial_sigma.v > 0.0)) {
    throw ConfigError("initial_sigma", "all entries must be positive (P0 must be definite)");
  }
  try {
    ukf.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("ukf.alpha", e.what());
  }
  if (pnp.max_iterations < 1) throw ConfigError("pnp.max_iterations", "must be >= 1");
  if (!(pnp.step_tol > 0.0)) throw ConfigError("pnp.step_tol", "must be positive");
}

namespace {

class Reader {
 public:
  explicit Reader(const YAML::Node& root) : root_(root) {}

  // Rejects keys outside `allowed` so typos do not silently fall back to
  // defaults.
  static void check_keys(const YAML::Node& n, const std::string& path,
                         const std::set<std::string>& allowed) {
    if (!n.IsMap()) throw ConfigError(path.empty() ? "<root>" : path, "expected a mapping");
    for (const auto& kv : n) {
      const std::string key = kv.first.as<std::string>();
      if (!allowed.count(key)) throw ConfigError(join(path, key), "unknown key");
    }
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  template <class T>
  static void scalar(const YAML::Node& n, const std::string& path, T& out) {
    if (!n) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError(path, "wrong type");
    }
  }

  static void vec3(const YAML::Node& n, const std::string& path, Vec3& out) {
    if (!n) return;
    if (!n.IsSequence() || n.size() != 3) throw ConfigError(path, "expected a list of 3 numbers");
    for (int i = 0; i < 3; ++i) scalar(n[i], path + "[" + std::to_string(i) + "]", out[i]);
  }

  static void inertia(const YAML::Node& n, const std::string& path, Mat3& out) {
    if (!n) return;
    if (n.IsSequence() && n.size() == 3 && n[0].IsScalar()) {
      Vec3 d;
      vec3(n, path, d);
      out = d.asDiagonal();
      return;
    }
    if (!n.IsSequence() || n.size() != 3) {
      throw ConfigError(path, "expected 3 diagonal entries or a 3x3 list");
    }
    for (int i = 0; i < 3; ++i) {
      Vec3 row;
      vec3(n[i], path + "[" + std::to_string(i) + "]", row);
      out.row(i) = row.transpose();
    }
  }

  static void attitude(const YAML::Node& n, const std::string& path, UnitQuaternion& out) {
    if (!n) return;
    if (!n.IsSequence() || n.size() != 4) {
      throw ConfigError(path, "expected a scalar-first quaternion [w, x, y, z]");
    }
    Vec4 c;
    for (int i = 0; i < 4; ++i) scalar(n[i], path + "[" + std::to_string(i) + "]", c[i]);
    if (!c.allFinite() || std::abs(c.norm() - 1.0) > 1e-6) {
      throw ConfigError(path, "quaternion must have unit norm");
    }
    out = UnitQuaternion(Quaternion::from_coeffs(c / c.norm()));
  }

  static void body(const YAML::Node& n, const std::string& path, BodyConfig& b) {
    if (!n) return;
    check_keys(n, path, {"mass", "inertia", "force", "torque", "position", "attitude", "omega",
                         "velocity"});
    scalar(n["mass"], path + ".mass", b.mass);
    inertia(n["inertia"], path + ".inertia", b.inertia);
    vec3(n["force"], path + ".force", b.force);
    vec3(n["torque"], path + ".torque", b.torque);
    vec3(n["position"], path + ".position", b.position);
    attitude(n["attitude"], path + ".attitude", b.attitude);
    vec3(n["omega"], path + ".omega", b.omega);
    vec3(n["velocity"], path + ".velocity", b.velocity);
  }

  static void sigmas(const YAML::Node& n, const std::string& path, ErrorSigmas& s) {
    if (!n) return;
    check_keys(n, path, {"phi", "r", "omega", "v"});
    scalar(n["phi"], path + ".phi", s.phi);
    scalar(n["r"], path + ".r", s.r);
    scalar(n["omega"], path + ".omega", s.omega);
    scalar(n["v"], path + ".v", s.v);
  }

  ScenarioConfig read() const {
    ScenarioConfig c = ScenarioConfig::flyby_default();
    if (!root_ || root_.IsNull()) return c;
    check_keys(root_, "",
               {"duration", "rate_hz", "seed", "truth_substeps", "mode", "camera", "markers",
                "schedule", "bodies", "process_noise", "initial_sigma", "filter", "ukf", "pnp",
                "output"});
    scalar(root_["duration"], "duration", c.duration);
    scalar(root_["rate_hz"], "rate_hz", c.rate_hz);
    scalar(root_["seed"], "seed", c.seed);
    scalar(root_["truth_substeps"], "truth_substeps", c.truth_substeps);
    if (const YAML::Node m = root_["mode"]) {
      std::string s;
      scalar(m, "mode", s);
      const auto mode = parse_measurement_mode(s);
      if (!mode) throw ConfigError("mode", "expected pixels, positions or unit_vectors");
      c.mode = *mode;
    }

    if (const YAML::Node cam = root_["camera"]) {
      check_keys(cam, "camera",
                 {"fx", "fy", "cx", "cy", "pixel_sigma", "clip_to_image", "width", "height",
                  "depth_tol"});
      scalar(cam["fx"], "camera.fx", c.camera.fx);
      scalar(cam["fy"], "camera.fy", c.camera.fy);
      scalar(cam["cx"], "camera.cx", c.camera.cx);
      scalar(cam["cy"], "camera.cy", c.camera.cy);
      scalar(cam["pixel_sigma"], "camera.pixel_sigma", c.camera.pixel_sigma);
      scalar(cam["clip_to_image"], "camera.clip_to_image", c.camera.clip_to_image);
      scalar(cam["width"], "camera.width", c.camera.width);
      scalar(cam["height"], "camera.height", c.camera.height);
      scalar(cam["depth_tol"], "camera.depth_tol", c.camera.depth_tol);
    }

    if (const YAML::Node m = root_["markers"]) {
      if (!m.IsSequence()) throw ConfigError("markers", "expected a list of [x, y, z]");
      c.markers.clear();
      for (std::size_t i = 0; i < m.size(); ++i) {
        Vec3 p;
        vec3(m[i], "markers[" + std::to_string(i) + "]", p);
        c.markers.push_back(p);
      }
    }

    if (const YAML::Node s = root_["schedule"]) {
      if (!s.IsSequence()) throw ConfigError("schedule", "expected a list of segments");
      std::vector<OcclusionSegment> segs;
      for (std::size_t i = 0; i < s.size(); ++i) {
        const std::string path = "schedule[" + std::to_string(i) + "]";
        check_keys(s[i], path, {"start", "end", "visible"});
        OcclusionSegment seg;
        if (!s[i]["start"]) throw ConfigError(path + ".start", "missing");
        if (!s[i]["end"]) throw ConfigError(path + ".end", "missing");
        scalar(s[i]["start"], path + ".start", seg.t_start);
        scalar(s[i]["end"], path + ".end", seg.t_end);
        const YAML::Node vis = s[i]["visible"];
        if (!vis || !vis.IsSequence()) throw ConfigError(path + ".visible", "expected a list of ids");
        for (std::size_t k = 0; k < vis.size(); ++k) {
          int id = 0;
          scalar(vis[k], path + ".visible[" + std::to_string(k) + "]", id);
          seg.visible.push_back(id);
        }
        segs.push_back(std::move(seg));
      }
      c.schedule = OcclusionSchedule(std::move(segs));
    }

    if (const YAML::Node b = root_["bodies"]) {
      check_keys(b, "bodies", {"camera", "target"});
      body(b["camera"], "bodies.camera", c.camera_body);
      body(b["target"], "bodies.target", c.target_body);
    }
    sigmas(root_["process_noise"], "process_noise", c.process_noise);
    sigmas(root_["initial_sigma"], "initial_sigma", c.initial_sigma);

    if (const YAML::Node f = root_["filter"]) {
      check_keys(f, "filter", {"pixel_sigma", "init_at_truth"});
      scalar(f["pixel_sigma"], "filter.pixel_sigma", c.filter_pixel_sigma);
      scalar(f["init_at_truth"], "filter.init_at_truth", c.init_at_truth);
    }
    if (const YAML::Node u = root_["ukf"]) {
      check_keys(u, "ukf", {"alpha", "beta", "kappa", "canonicalize_error_quat"});
      scalar(u["alpha"], "ukf.alpha", c.ukf.alpha);
      scalar(u["beta"], "ukf.beta", c.ukf.beta);
      scalar(u["kappa"], "ukf.kappa", c.ukf.kappa);
      scalar(u["canonicalize_error_quat"], "ukf.canonicalize_error_quat",
             c.ukf.canonicalize_error_quat);
    }
    if (const YAML::Node p = root_["pnp"]) {
      check_keys(p, "pnp", {"allow_three_point", "max_iterations", "step_tol"});
      scalar(p["allow_three_point"], "pnp.allow_three_point", c.pnp.allow_three_point);
      scalar(p["max_iterations"], "pnp.max_iterations", c.pnp.max_iterations);
      scalar(p["step_tol"], "pnp.step_tol", c.pnp.step_tol);
    }
    if (const YAML::Node o = root_["output"]) {
      check_keys(o, "output", {"dir"});
      std::string dir = c.output_dir.string();
      scalar(o["dir"], "output.dir", dir);
      c.output_dir = dir;
    }
    return c;
  }

 private:
  YAML::Node root_;
};

}  // namespace

ScenarioConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<yaml>", e.what());
  }
  ScenarioConfig c = Reader(root).read();
  c.validate();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace dqtrack
