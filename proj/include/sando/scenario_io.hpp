#pragma once

// YAML scenario files. Keys mirror the Scenario fields; an optional
// `generator` section builds a seeded forest first, and explicit obstacles
// are appended to it.

#include "sando/sim_bench.hpp"

#include <yaml-cpp/yaml.h>

#include <optional>
#include <string>

namespace sando {

namespace detail {

inline Vec3 yaml_vec3(const YAML::Node& n, const char* what) {
  if (!n || !n.IsSequence() || n.size() != 3) {
    throw std::invalid_argument(std::string("scenario: '") + what + "' must be a 3-vector");
  }
  return Vec3(n[0].as<double>(), n[1].as<double>(), n[2].as<double>());
}

template <typename T>
void yaml_get(const YAML::Node& n, const char* key, T& out) {
  if (n && n[key]) out = n[key].as<T>();
}

inline double yaml_range(const YAML::Node& n, const char* key, double fallback) {
  if (!n || !n[key]) return fallback;
  const auto s = n[key].as<std::string>();
  if (s == "inf" || s == ".inf") return std::numeric_limits<double>::infinity();
  return n[key].as<double>();
}

inline SfcMode parse_sfc_mode(const std::string& s) {
  if (s == "stsfc") return SfcMode::Stsfc;
  if (s == "worst_case") return SfcMode::WorstCase;
  throw std::invalid_argument("scenario: unknown sfc_mode '" + s + "'");
}

inline MotionModel parse_motion(const std::string& s) {
  for (auto m : {MotionModel::Trefoil, MotionModel::Line, MotionModel::Circle, MotionModel::FigureEight,
                 MotionModel::WaypointRandom}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("scenario: unknown motion model '" + s + "'");
}

inline PlannerSettings parse_planner(const YAML::Node& n) {
  PlannerSettings p;
  if (!n) return p;
  yaml_get(n, "N", p.N);
  yaml_get(n, "P", p.P);
  yaml_get(n, "v_obs_max", p.v_obs_max);
  yaml_get(n, "epsilon", p.epsilon);
  yaml_get(n, "r_margin", p.r_margin);
  yaml_get(n, "r_drone", p.r_drone);
  yaml_get(n, "w_heat", p.w_heat);
  yaml_get(n, "unknown_inflation", p.unknown_inflation);
  yaml_get(n, "horizon", p.horizon);
  yaml_get(n, "f_max", p.f_max);
  yaml_get(n, "kappa", p.kappa);
  yaml_get(n, "factor_step", p.factor_step);
  if (n["sfc_mode"]) p.sfc_mode = parse_sfc_mode(n["sfc_mode"].as<std::string>());
  return p;
}

inline DynamicObstacleSpec parse_dynamic(const YAML::Node& n, std::uint64_t seed) {
  DynamicObstacleSpec d;
  if (!n["model"]) throw std::invalid_argument("scenario: dynamic obstacle without 'model'");
  auto& m = d.motion;
  m.model = parse_motion(n["model"].as<std::string>());
  if (n["half_extents"]) d.half_extents = yaml_vec3(n["half_extents"], "half_extents");
  switch (m.model) {
    case MotionModel::Trefoil:
      m.trefoil.center = yaml_vec3(n["center"], "center");
      yaml_get(n, "scale", m.trefoil.scale);
      yaml_get(n, "speed", m.trefoil.speed);
      yaml_get(n, "offset", m.trefoil.offset);
      break;
    case MotionModel::Line:
      m.p0 = yaml_vec3(n["p0"], "p0");
      m.p1 = yaml_vec3(n["p1"], "p1");
      yaml_get(n, "speed", m.speed);
      break;
    case MotionModel::Circle:
    case MotionModel::FigureEight:
      m.center = yaml_vec3(n["center"], "center");
      yaml_get(n, "radius", m.radius);
      yaml_get(n, "omega", m.omega);
      break;
    case MotionModel::WaypointRandom: {
      m.center = yaml_vec3(n["center"], "center");
      yaml_get(n, "speed", m.speed);
      if (n["waypoints"]) {
        for (const auto& w : n["waypoints"]) m.waypoints.push_back(yaml_vec3(w, "waypoints[]"));
        break;
      }
      const Vec3 half = n["half_size"] ? yaml_vec3(n["half_size"], "half_size") : Vec3::Constant(1.0);
      int count = 4;
      yaml_get(n, "count", count);
      std::uint64_t wseed = seed;
      yaml_get(n, "seed", wseed);
      m.waypoints = random_waypoints(m.center, half, count, wseed);
      break;
    }
  }
  return d;
}

}  // namespace detail

/// `seed` overrides the file's seed before any generation.
inline Scenario scenario_from_yaml(const YAML::Node& root, std::optional<std::uint64_t> seed = {}) {
  Scenario sc;
  detail::yaml_get(root, "seed", sc.seed);
  if (seed) sc.seed = *seed;
  const PlannerSettings planner = detail::parse_planner(root["planner"]);
  DynamicLimits limits = sc.limits;
  if (const auto l = root["limits"]) {
    detail::yaml_get(l, "v_max", limits.v_max);
    detail::yaml_get(l, "a_max", limits.a_max);
    detail::yaml_get(l, "j_max", limits.j_max);
  }
  if (const auto g = root["generator"]) {
    DynamicSuiteOptions opt;
    detail::yaml_get(g, "length", opt.length);
    detail::yaml_get(g, "width", opt.width);
    detail::yaml_get(g, "height", opt.height);
    detail::yaml_get(g, "static_obstacles", opt.static_obstacles);
    detail::yaml_get(g, "dynamic_obstacles", opt.dynamic_obstacles);
    detail::yaml_get(g, "cylinder_radius_min", opt.cylinder_radius_min);
    detail::yaml_get(g, "cylinder_radius_max", opt.cylinder_radius_max);
    detail::yaml_get(g, "cube_half_min", opt.cube_half_min);
    detail::yaml_get(g, "cube_half_max", opt.cube_half_max);
    detail::yaml_get(g, "trefoil_scale_min", opt.trefoil_scale_min);
    detail::yaml_get(g, "trefoil_scale_max", opt.trefoil_scale_max);
    detail::yaml_get(g, "trefoil_speed_min", opt.trefoil_speed_min);
    detail::yaml_get(g, "trefoil_speed_max", opt.trefoil_speed_max);
    detail::yaml_get(g, "clearance", opt.clearance);
    sc = make_dynamic_scenario(sc.seed, opt, planner, limits);
  }
  sc.planner = planner;
  sc.limits = limits;
  detail::yaml_get(root, "name", sc.name);
  if (const auto b = root["bounds"]) {
    sc.bounds = Aabb::from_corners(detail::yaml_vec3(b["min"], "bounds.min"), detail::yaml_vec3(b["max"], "bounds.max"));
  }
  detail::yaml_get(root, "resolution", sc.resolution);
  if (root["start"]) sc.start = detail::yaml_vec3(root["start"], "start");
  if (root["goal"]) sc.goal = detail::yaml_vec3(root["goal"], "goal");
  detail::yaml_get(root, "noise_sigma", sc.noise_sigma);
  sc.sensing_range = detail::yaml_range(root, "sensing_range", sc.sensing_range);
  detail::yaml_get(root, "deterministic", sc.deterministic);
  if (const auto s = root["sim"]) {
    detail::yaml_get(s, "dt", sc.sim_dt);
    detail::yaml_get(s, "measurement_period", sc.measurement_period);
    detail::yaml_get(s, "replan_period", sc.replan_period);
    detail::yaml_get(s, "timeout", sc.timeout);
    detail::yaml_get(s, "goal_tolerance", sc.goal_tolerance);
  }
  for (const auto& c : root["cylinders"]) {
    Cylinder cyl;
    detail::yaml_get(c, "x", cyl.x);
    detail::yaml_get(c, "y", cyl.y);
    detail::yaml_get(c, "radius", cyl.radius);
    detail::yaml_get(c, "height", cyl.height);
    sc.cylinders.push_back(cyl);
  }
  for (const auto& d : root["dynamic"]) sc.dynamic.push_back(detail::parse_dynamic(d, sc.seed));
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::string& path, std::optional<std::uint64_t> seed = {}) {
  return scenario_from_yaml(YAML::LoadFile(path), seed);
}

/// Fully resolved scenario (generated obstacles included) as YAML.
inline std::string scenario_to_yaml(const Scenario& sc) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  auto vec = [&](const Vec3& v) {
    out << YAML::Flow << YAML::BeginSeq << v.x() << v.y() << v.z() << YAML::EndSeq;
  };
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << sc.name;
  out << YAML::Key << "seed" << YAML::Value << sc.seed;
  out << YAML::Key << "bounds" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "min" << YAML::Value;
  vec(sc.bounds.min());
  out << YAML::Key << "max" << YAML::Value;
  vec(sc.bounds.max());
  out << YAML::EndMap;
  out << YAML::Key << "resolution" << YAML::Value << sc.resolution;
  out << YAML::Key << "start" << YAML::Value;
  vec(sc.start);
  out << YAML::Key << "goal" << YAML::Value;
  vec(sc.goal);
  out << YAML::Key << "limits" << YAML::Value << YAML::BeginMap << YAML::Key << "v_max" << YAML::Value
      << sc.limits.v_max << YAML::Key << "a_max" << YAML::Value << sc.limits.a_max << YAML::Key << "j_max"
      << YAML::Value << sc.limits.j_max << YAML::EndMap;
  out << YAML::Key << "noise_sigma" << YAML::Value << sc.noise_sigma;
  if (std::isfinite(sc.sensing_range)) out << YAML::Key << "sensing_range" << YAML::Value << sc.sensing_range;
  out << YAML::Key << "deterministic" << YAML::Value << sc.deterministic;
  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap << YAML::Key << "dt" << YAML::Value << sc.sim_dt
      << YAML::Key << "measurement_period" << YAML::Value << sc.measurement_period << YAML::Key
      << "replan_period" << YAML::Value << sc.replan_period << YAML::Key << "timeout" << YAML::Value
      << sc.timeout << YAML::Key << "goal_tolerance" << YAML::Value << sc.goal_tolerance << YAML::EndMap;
  const auto& p = sc.planner;
  out << YAML::Key << "planner" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "N" << YAML::Value << p.N << YAML::Key << "P" << YAML::Value << p.P;
  out << YAML::Key << "v_obs_max" << YAML::Value << p.v_obs_max << YAML::Key << "epsilon" << YAML::Value
      << p.epsilon;
  out << YAML::Key << "r_margin" << YAML::Value << p.r_margin << YAML::Key << "r_drone" << YAML::Value
      << p.r_drone;
  out << YAML::Key << "w_heat" << YAML::Value << p.w_heat << YAML::Key << "unknown_inflation" << YAML::Value
      << p.unknown_inflation;
  out << YAML::Key << "sfc_mode" << YAML::Value << (p.sfc_mode == SfcMode::Stsfc ? "stsfc" : "worst_case");
  out << YAML::Key << "horizon" << YAML::Value << p.horizon << YAML::Key << "f_max" << YAML::Value << p.f_max;
  out << YAML::Key << "kappa" << YAML::Value << p.kappa << YAML::Key << "factor_step" << YAML::Value
      << p.factor_step;
  out << YAML::EndMap;
  out << YAML::Key << "cylinders" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : sc.cylinders) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "x" << YAML::Value << c.x << YAML::Key << "y"
        << YAML::Value << c.y << YAML::Key << "radius" << YAML::Value << c.radius << YAML::Key << "height"
        << YAML::Value << c.height << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "dynamic" << YAML::Value << YAML::BeginSeq;
  for (const auto& d : sc.dynamic) {
    const auto& m = d.motion;
    out << YAML::BeginMap << YAML::Key << "model" << YAML::Value << to_string(m.model);
    out << YAML::Key << "half_extents" << YAML::Value;
    vec(d.half_extents);
    switch (m.model) {
      case MotionModel::Trefoil:
        out << YAML::Key << "center" << YAML::Value;
        vec(m.trefoil.center);
        out << YAML::Key << "scale" << YAML::Value << m.trefoil.scale << YAML::Key << "speed" << YAML::Value
            << m.trefoil.speed << YAML::Key << "offset" << YAML::Value << m.trefoil.offset;
        break;
      case MotionModel::Line:
        out << YAML::Key << "p0" << YAML::Value;
        vec(m.p0);
        out << YAML::Key << "p1" << YAML::Value;
        vec(m.p1);
        out << YAML::Key << "speed" << YAML::Value << m.speed;
        break;
      case MotionModel::Circle:
      case MotionModel::FigureEight:
        out << YAML::Key << "center" << YAML::Value;
        vec(m.center);
        out << YAML::Key << "radius" << YAML::Value << m.radius << YAML::Key << "omega" << YAML::Value << m.omega;
        break;
      case MotionModel::WaypointRandom:
        // Waypoints are written out explicitly so the file stays exact.
        out << YAML::Key << "center" << YAML::Value;
        vec(m.center);
        out << YAML::Key << "speed" << YAML::Value << m.speed;
        out << YAML::Key << "waypoints" << YAML::Value << YAML::BeginSeq;
        for (const auto& w : m.waypoints) vec(w);
        out << YAML::EndSeq;
        break;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return out.c_str();
}

}  // namespace sando
