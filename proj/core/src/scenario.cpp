#include "haul/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace haul {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ScenarioError(msg); }

void require_keys(const json& j, std::initializer_list<const char*> allowed, const char* ctx) {
  if (!j.is_object()) fail(std::string(ctx) + " must be a JSON object");
  for (const auto& item : j.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return item.key() == a; });
    if (!known) fail("unknown key \"" + item.key() + "\" in " + ctx);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T def) {
  const auto it = j.find(key);
  return it == j.end() ? def : it->get<T>();
}

Eigen::VectorXd get_fixed_array(const json& j, const char* key, int len) {
  const json& a = j.at(key);
  if (!a.is_array() || static_cast<int>(a.size()) != len)
    fail(std::string("\"") + key + "\" must be an array of " + std::to_string(len) + " numbers");
  Eigen::VectorXd v(len);
  for (int i = 0; i < len; ++i) v[i] = a[i].get<double>();
  return v;
}

std::vector<ScriptedEvent> parse_events(const json& arr) {
  if (!arr.is_array()) fail("\"events\" must be an array");
  std::vector<ScriptedEvent> events;
  events.reserve(arr.size());
  for (const json& e : arr) {
    require_keys(e, {"step", "type", "offset", "dtheta", "robot", "sigma_pos", "sigma_theta"},
                 "event");
    ScriptedEvent ev;
    ev.trigger_step = e.at("step").get<int>();
    const std::string type = e.at("type").get<std::string>();
    if (type == "disturb") {
      DisturbEvent d;
      const Eigen::VectorXd off = get_fixed_array(e, "offset", 2);
      d.offset = {off[0], off[1]};
      d.dtheta = get_or(e, "dtheta", 0.0);
      ev.action = d;
    } else if (type == "fail") {
      FailEvent f;
      f.robot = e.at("robot").get<int>();
      ev.action = f;
    } else if (type == "noise_on") {
      NoiseOnEvent n;
      n.sigma_pos = get_or(e, "sigma_pos", 0.0);
      n.sigma_theta = get_or(e, "sigma_theta", 0.0);
      ev.action = n;
    } else {
      fail("unknown event type \"" + type + "\"");
    }
    events.push_back(ev);
  }
  return events;
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0)) fail(std::string("\"") + what + "\" must be positive");
}

void validate(const ScenarioConfig& cfg) {
  if (cfg.robots < 1) fail("\"robots\" must be at least 1");
  if (cfg.lever_arm < 0.0) fail("\"lever_arm\" must be nonnegative");
  if (cfg.steps < 1) fail("\"steps\" must be at least 1");
  check_positive(cfg.period, "period");
  check_positive(cfg.v_max, "v_max");
  check_positive(cfg.omega_max, "omega_max");
  check_positive(cfg.goal_tol, "goal_tol");
  check_positive(cfg.heading_tol, "heading_tol");
  check_positive(cfg.safety_radius, "safety_radius");
  if (!(cfg.state_var.minCoeff() > 0.0) || !(cfg.control_var.minCoeff() > 0.0) ||
      !(cfg.motion_var.minCoeff() > 0.0) || !(cfg.obstacle_var > 0.0))
    fail("noise variances must be positive");
  try {
    EventScript script(cfg.events);
  } catch (const std::exception& e) {
    fail(std::string("events: ") + e.what());
  }
  for (const ScriptedEvent& e : cfg.events)
    if (const auto* f = std::get_if<FailEvent>(&e.action))
      if (f->robot < 0 || f->robot >= cfg.robots) fail("fail event names a robot outside the team");
}

ScenarioConfig parse_root(const json& j) {
  require_keys(j,
               {"name", "solver", "seed", "robots", "lever_arm", "start", "goal", "steps",
                "period", "v_max", "omega_max", "goal_tol", "heading_tol", "safety_radius",
                "obstacles", "noise", "lm", "mpc", "events"},
               "scenario");
  ScenarioConfig cfg;
  if (!j.contains("name")) fail("scenario needs a \"name\"");
  cfg.name = j.at("name").get<std::string>();
  cfg.solver = solver_from_name(get_or<std::string>(j, "solver", "ours"));
  cfg.seed = get_or<std::uint64_t>(j, "seed", 1);
  cfg.robots = get_or(j, "robots", 4);
  cfg.lever_arm = get_or(j, "lever_arm", 0.35);

  if (!j.contains("start")) fail("scenario needs a \"start\" pose");
  if (!j.contains("goal")) fail("scenario needs a \"goal\" position");
  const Eigen::VectorXd s = get_fixed_array(j, "start", 3);
  cfg.start = Pose2(s[0], s[1], s[2]);
  const Eigen::VectorXd g = get_fixed_array(j, "goal", 2);
  cfg.goal = {g[0], g[1]};

  cfg.steps = get_or(j, "steps", 90);
  cfg.period = get_or(j, "period", 0.1);
  cfg.v_max = get_or(j, "v_max", 2.0);
  cfg.omega_max = get_or(j, "omega_max", 2.0);
  cfg.goal_tol = get_or(j, "goal_tol", 0.05);
  cfg.heading_tol = get_or(j, "heading_tol", 0.05);
  cfg.safety_radius = get_or(j, "safety_radius", 0.5);

  if (j.contains("obstacles")) {
    const json& obs = j.at("obstacles");
    if (!obs.is_array()) fail("\"obstacles\" must be an array of [x, y] pairs");
    for (const json& o : obs) {
      if (!o.is_array() || o.size() != 2) fail("each obstacle must be an [x, y] pair");
      cfg.obstacles.emplace_back(o[0].get<double>(), o[1].get<double>());
    }
  }

  if (j.contains("noise")) {
    const json& n = j.at("noise");
    require_keys(n, {"state", "control", "motion", "obstacle"}, "noise");
    if (n.contains("state")) cfg.state_var = get_fixed_array(n, "state", 3);
    if (n.contains("control")) cfg.control_var = get_fixed_array(n, "control", 2);
    if (n.contains("motion")) cfg.motion_var = get_fixed_array(n, "motion", 3);
    if (n.contains("obstacle")) cfg.obstacle_var = n.at("obstacle").get<double>();
  }

  if (j.contains("lm")) {
    const json& l = j.at("lm");
    require_keys(l,
                 {"rel_tol", "abs_tol", "err_tol", "lambda_init", "lambda_factor", "max_iters",
                  "lambda_max"},
                 "lm");
    cfg.lm.rel_tol = get_or(l, "rel_tol", cfg.lm.rel_tol);
    cfg.lm.abs_tol = get_or(l, "abs_tol", cfg.lm.abs_tol);
    cfg.lm.err_tol = get_or(l, "err_tol", cfg.lm.err_tol);
    cfg.lm.lambda_init = get_or(l, "lambda_init", cfg.lm.lambda_init);
    cfg.lm.lambda_factor = get_or(l, "lambda_factor", cfg.lm.lambda_factor);
    cfg.lm.max_iters = get_or(l, "max_iters", cfg.lm.max_iters);
    cfg.lm.lambda_max = get_or(l, "lambda_max", cfg.lm.lambda_max);
  }

  if (j.contains("mpc")) {
    const json& m = j.at("mpc");
    require_keys(m,
                 {"horizon", "state_weight", "terminal_weight", "control_weight", "motion_weight",
                  "obstacle_weight", "tol", "max_inner_iters", "max_outer_iters", "rho_init"},
                 "mpc");
    MpcParams mp = cfg.solver == SolverKind::MpcC ? MpcParams::constrained_defaults()
                                                  : MpcParams::penalty_defaults();
    mp.horizon = get_or(m, "horizon", mp.horizon);
    mp.state_weight = get_or(m, "state_weight", mp.state_weight);
    mp.terminal_weight = get_or(m, "terminal_weight", mp.terminal_weight);
    mp.control_weight = get_or(m, "control_weight", mp.control_weight);
    mp.motion_weight = get_or(m, "motion_weight", mp.motion_weight);
    mp.obstacle_weight = get_or(m, "obstacle_weight", mp.obstacle_weight);
    mp.tol = get_or(m, "tol", mp.tol);
    mp.max_inner_iters = get_or(m, "max_inner_iters", mp.max_inner_iters);
    mp.max_outer_iters = get_or(m, "max_outer_iters", mp.max_outer_iters);
    mp.rho_init = get_or(m, "rho_init", mp.rho_init);
    cfg.mpc = mp;
  }

  if (j.contains("events")) cfg.events = parse_events(j.at("events"));

  validate(cfg);
  return cfg;
}

}  // namespace

const char* solver_name(SolverKind kind) {
  switch (kind) {
    case SolverKind::Ours:
      return "ours";
    case SolverKind::MpcP:
      return "mpc_p";
    case SolverKind::MpcC:
      return "mpc_c";
  }
  return "unknown";
}

SolverKind solver_from_name(const std::string& name) {
  if (name == "ours") return SolverKind::Ours;
  if (name == "mpc_p") return SolverKind::MpcP;
  if (name == "mpc_c") return SolverKind::MpcC;
  throw ScenarioError("unknown solver \"" + name + "\" (expected ours, mpc_p, or mpc_c)");
}

ScenarioConfig parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(std::string("scenario JSON: ") + e.what());
  }
  try {
    return parse_root(j);
  } catch (const json::exception& e) {
    fail(std::string("scenario JSON: ") + e.what());
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open scenario file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

PlanProblem to_plan_problem(const ScenarioConfig& cfg) {
  PlanProblem p;
  p.reference = make_initial_path(cfg.start, cfg.goal, cfg.steps, cfg.period, cfg.v_max);
  p.obstacles.reserve(cfg.obstacles.size());
  for (std::size_t j = 0; j < cfg.obstacles.size(); ++j)
    p.obstacles.push_back({static_cast<int>(j), cfg.obstacles[j]});
  p.safety_radius = cfg.safety_radius;
  p.formation = Formation::circle(cfg.robots, cfg.lever_arm);
  p.state_noise = DiagNoise::from({cfg.state_var[0], cfg.state_var[1], cfg.state_var[2]});
  p.control_noise = DiagNoise::from({cfg.control_var[0], cfg.control_var[1]});
  p.motion_noise = DiagNoise::from({cfg.motion_var[0], cfg.motion_var[1], cfg.motion_var[2]});
  p.obstacle_noise = DiagNoise::from({cfg.obstacle_var});
  p.lm = cfg.lm;
  p.v_max = cfg.v_max;
  p.omega_max = cfg.omega_max;
  p.goal_tol = cfg.goal_tol;
  p.heading_tol = cfg.heading_tol;
  return p;
}

MpcParams effective_mpc(const ScenarioConfig& cfg) {
  if (cfg.mpc) return *cfg.mpc;
  return cfg.solver == SolverKind::MpcC ? MpcParams::constrained_defaults()
                                        : MpcParams::penalty_defaults();
}

WorldState make_world(const ScenarioConfig& cfg) {
  const Formation f = Formation::circle(cfg.robots, cfg.lever_arm);
  const std::vector<Pose2> robots = robots_from_centroid(cfg.start, f, Phase::translate());
  return make_world(robots, EventScript(cfg.events), cfg.seed);
}

std::string config_hash(const ScenarioConfig& cfg) {
  std::string s;
  s.reserve(512);
  char buf[64];
  const auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g;", v);
    s += buf;
  };
  const auto inum = [&](long long v) {
    std::snprintf(buf, sizeof buf, "%lld;", v);
    s += buf;
  };

  s += solver_name(cfg.solver);
  s += ';';
  inum(cfg.robots);
  num(cfg.lever_arm);
  num(cfg.start.x);
  num(cfg.start.y);
  num(cfg.start.theta);
  num(cfg.goal.x());
  num(cfg.goal.y());
  inum(cfg.steps);
  num(cfg.period);
  num(cfg.v_max);
  num(cfg.omega_max);
  num(cfg.goal_tol);
  num(cfg.heading_tol);
  num(cfg.safety_radius);
  s += "obs;";
  for (const Eigen::Vector2d& o : cfg.obstacles) {
    num(o.x());
    num(o.y());
  }
  s += "noise;";
  for (int i = 0; i < 3; ++i) num(cfg.state_var[i]);
  for (int i = 0; i < 2; ++i) num(cfg.control_var[i]);
  for (int i = 0; i < 3; ++i) num(cfg.motion_var[i]);
  num(cfg.obstacle_var);
  s += "lm;";
  num(cfg.lm.rel_tol);
  num(cfg.lm.abs_tol);
  num(cfg.lm.err_tol);
  num(cfg.lm.lambda_init);
  num(cfg.lm.lambda_factor);
  inum(cfg.lm.max_iters);
  num(cfg.lm.lambda_max);
  if (cfg.mpc) {
    s += "mpc;";
    inum(cfg.mpc->horizon);
    num(cfg.mpc->state_weight);
    num(cfg.mpc->terminal_weight);
    num(cfg.mpc->control_weight);
    num(cfg.mpc->motion_weight);
    num(cfg.mpc->obstacle_weight);
    num(cfg.mpc->tol);
    inum(cfg.mpc->max_inner_iters);
    inum(cfg.mpc->max_outer_iters);
    num(cfg.mpc->rho_init);
  } else {
    s += "nompc;";
  }
  s += "events;";
  for (const ScriptedEvent& e : cfg.events) {
    inum(e.trigger_step);
    if (const auto* d = std::get_if<DisturbEvent>(&e.action)) {
      s += "D;";
      num(d->offset.x());
      num(d->offset.y());
      num(d->dtheta);
    } else if (const auto* f = std::get_if<FailEvent>(&e.action)) {
      s += "F;";
      inum(f->robot);
    } else if (const auto* n = std::get_if<NoiseOnEvent>(&e.action)) {
      s += "N;";
      num(n->sigma_pos);
      num(n->sigma_theta);
    }
  }

  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace haul
