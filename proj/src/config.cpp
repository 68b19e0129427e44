#include "apex/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "json.hpp"

namespace apex {

using nlohmann::json;

namespace {

void require_keys(const json& obj, const std::string& section,
                  const std::set<std::string>& allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw std::runtime_error("config: unknown key '" + it.key() + "' in " + section);
    }
  }
}

double require_number(const json& obj, const std::string& section, const std::string& key) {
  if (!obj.contains(key)) {
    throw std::runtime_error("config: missing required key '" + key + "' in " + section);
  }
  return obj.at(key).get<double>();
}

}  // namespace

Variant variant_from_string(const std::string& name) {
  if (name == "pure_rl") return Variant::PureRl;
  if (name == "shared_and_reg") return Variant::SharedAndReg;
  if (name == "reg_only") return Variant::RegOnly;
  if (name == "augmented_only") return Variant::AugmentedOnly;
  if (name == "augmented_and_reg") return Variant::AugmentedAndReg;
  throw std::runtime_error("unknown variant '" + name + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::PureRl: return "pure_rl";
    case Variant::SharedAndReg: return "shared_and_reg";
    case Variant::RegOnly: return "reg_only";
    case Variant::AugmentedOnly: return "augmented_only";
    case Variant::AugmentedAndReg: return "augmented_and_reg";
  }
  return "pure_rl";
}

void ExperimentConfig::apply_variant(Variant v) {
  variant = v;
  imitation.shared_experience = false;
  imitation.regularization = false;
  imitation.augmented_reward = false;
  reward_weights.path_dev_w = 0.0;
  switch (v) {
    case Variant::PureRl:
      break;
    case Variant::SharedAndReg:
      imitation.shared_experience = true;
      imitation.regularization = true;
      break;
    case Variant::RegOnly:
      imitation.regularization = true;
      imitation.demo_mix_fraction = 0.0;
      break;
    case Variant::AugmentedOnly:
      imitation.augmented_reward = true;
      reward_weights.path_dev_w = 0.1;
      break;
    case Variant::AugmentedAndReg:
      imitation.augmented_reward = true;
      imitation.regularization = true;
      imitation.demo_mix_fraction = 0.0;
      reward_weights.path_dev_w = 0.1;
      break;
  }
}

ExperimentConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("config: parse failure: ") + e.what());
  }

  ExperimentConfig cfg;
  require_keys(doc, "root",
               {"track", "vehicle", "setups", "reward_weights", "episode", "normalization",
                "trainer", "imitation", "eval", "variant", "seeds"});

  cfg.track_path = doc.at("track").get<std::string>();

  {
    const json& v = doc.at("vehicle");
    require_keys(v, "vehicle",
                 {"mass", "yaw_inertia", "cg_to_front_axle", "cg_to_rear_axle", "base_mu",
                  "cornering_stiffness_front", "cornering_stiffness_rear", "peak_slip_front",
                  "peak_slip_rear", "max_engine_power", "max_drive_force", "max_brake_force",
                  "max_steer_angle", "steer_rate_limit", "drag_coeff", "rolling_resist"});
    // physics parameters have no silent defaults
    cfg.vehicle.mass = require_number(v, "vehicle", "mass");
    cfg.vehicle.yaw_inertia = require_number(v, "vehicle", "yaw_inertia");
    cfg.vehicle.cg_to_front_axle = require_number(v, "vehicle", "cg_to_front_axle");
    cfg.vehicle.cg_to_rear_axle = require_number(v, "vehicle", "cg_to_rear_axle");
    cfg.vehicle.base_mu = require_number(v, "vehicle", "base_mu");
    cfg.vehicle.cornering_stiffness_front = require_number(v, "vehicle", "cornering_stiffness_front");
    cfg.vehicle.cornering_stiffness_rear = require_number(v, "vehicle", "cornering_stiffness_rear");
    cfg.vehicle.peak_slip_front = require_number(v, "vehicle", "peak_slip_front");
    cfg.vehicle.peak_slip_rear = require_number(v, "vehicle", "peak_slip_rear");
    cfg.vehicle.max_engine_power = require_number(v, "vehicle", "max_engine_power");
    cfg.vehicle.max_drive_force = require_number(v, "vehicle", "max_drive_force");
    cfg.vehicle.max_brake_force = require_number(v, "vehicle", "max_brake_force");
    cfg.vehicle.max_steer_angle = require_number(v, "vehicle", "max_steer_angle");
    cfg.vehicle.steer_rate_limit = require_number(v, "vehicle", "steer_rate_limit");
    cfg.vehicle.drag_coeff = require_number(v, "vehicle", "drag_coeff");
    cfg.vehicle.rolling_resist = require_number(v, "vehicle", "rolling_resist");
    cfg.vehicle.validate();
  }

  if (!doc.contains("setups") || !doc.at("setups").is_array() || doc.at("setups").empty()) {
    throw std::runtime_error("config: setups must be a non-empty array");
  }
  for (const json& s : doc.at("setups")) {
    require_keys(s, "setups[]", {"setup_id", "mu_front_scale", "mu_rear_scale"});
    VehicleSetup setup;
    setup.setup_id = s.at("setup_id").get<std::string>();
    setup.mu_front_scale = s.at("mu_front_scale").get<double>();
    setup.mu_rear_scale = s.at("mu_rear_scale").get<double>();
    if (setup.mu_front_scale < 0.5 || setup.mu_front_scale > 1.5 ||
        setup.mu_rear_scale < 0.5 || setup.mu_rear_scale > 1.5) {
      throw std::runtime_error("config: setup scales must lie in [0.5, 1.5]");
    }
    cfg.setups.push_back(setup);
  }

  if (doc.contains("reward_weights")) {
    const json& r = doc.at("reward_weights");
    require_keys(r, "reward_weights",
                 {"progress_w", "q1", "q2", "steer_rate_w", "pedal_rate_w",
                  "steer_rate_threshold", "pedal_rate_threshold", "offtrack_terminal_penalty",
                  "path_dev_w", "sigma_min"});
    RewardWeights& w = cfg.reward_weights;
    w.progress_w = r.value("progress_w", w.progress_w);
    w.q1 = r.value("q1", w.q1);
    w.q2 = r.value("q2", w.q2);
    w.steer_rate_w = r.value("steer_rate_w", w.steer_rate_w);
    w.pedal_rate_w = r.value("pedal_rate_w", w.pedal_rate_w);
    w.steer_rate_threshold = r.value("steer_rate_threshold", w.steer_rate_threshold);
    w.pedal_rate_threshold = r.value("pedal_rate_threshold", w.pedal_rate_threshold);
    w.offtrack_terminal_penalty = r.value("offtrack_terminal_penalty", w.offtrack_terminal_penalty);
    w.path_dev_w = r.value("path_dev_w", w.path_dev_w);
    w.sigma_min = r.value("sigma_min", w.sigma_min);
    if (w.progress_w < 0 || w.q1 < 0 || w.q2 < 0 || w.steer_rate_w < 0 || w.pedal_rate_w < 0 ||
        w.path_dev_w < 0) {
      throw std::runtime_error("config: reward weights must be >= 0");
    }
  }

  if (doc.contains("episode")) {
    const json& e = doc.at("episode");
    require_keys(e, "episode",
                 {"max_steps", "offtrack_limit_e_norm", "stop_speed", "stop_patience",
                  "start_speed_fraction"});
    cfg.episode.max_steps = e.value("max_steps", cfg.episode.max_steps);
    cfg.episode.offtrack_limit_e_norm =
        e.value("offtrack_limit_e_norm", cfg.episode.offtrack_limit_e_norm);
    cfg.episode.stop_speed = e.value("stop_speed", cfg.episode.stop_speed);
    cfg.episode.stop_patience = e.value("stop_patience", cfg.episode.stop_patience);
    cfg.episode.start_speed_fraction =
        e.value("start_speed_fraction", cfg.episode.start_speed_fraction);
    if (cfg.episode.max_steps <= 0) throw std::runtime_error("config: max_steps must be > 0");
  }

  if (doc.contains("normalization")) {
    const json& n = doc.at("normalization");
    require_keys(n, "normalization",
                 {"vx", "vy", "yaw_rate", "steer_cmd", "throttle", "brake", "ax", "ay", "az",
                  "yaw_accel", "e_norm", "heading_error", "edge_x", "edge_y", "mu_scale"});
    NormTable& t = cfg.norm;
    t.vx = n.value("vx", t.vx);
    t.vy = n.value("vy", t.vy);
    t.yaw_rate = n.value("yaw_rate", t.yaw_rate);
    t.steer_cmd = n.value("steer_cmd", t.steer_cmd);
    t.throttle = n.value("throttle", t.throttle);
    t.brake = n.value("brake", t.brake);
    t.ax = n.value("ax", t.ax);
    t.ay = n.value("ay", t.ay);
    t.az = n.value("az", t.az);
    t.yaw_accel = n.value("yaw_accel", t.yaw_accel);
    t.e_norm = n.value("e_norm", t.e_norm);
    t.heading_error = n.value("heading_error", t.heading_error);
    t.edge_x = n.value("edge_x", t.edge_x);
    t.edge_y = n.value("edge_y", t.edge_y);
    t.mu_scale = n.value("mu_scale", t.mu_scale);
    t.validate();
  }

  if (doc.contains("trainer")) {
    const json& t = doc.at("trainer");
    require_keys(t, "trainer",
                 {"gamma", "tau", "batch_size", "replay_capacity", "prefill_steps",
                  "n_parallel_envs", "quantiles", "learning_rate", "entropy_target", "init_alpha",
                  "algorithm", "total_iterations", "eval_interval", "hidden_width",
                  "hidden_layers", "eval_laps"});
    TrainerConfig& c = cfg.trainer;
    c.gamma = t.value("gamma", c.gamma);
    c.tau = t.value("tau", c.tau);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.replay_capacity = t.value("replay_capacity", c.replay_capacity);
    c.prefill_steps = t.value("prefill_steps", c.prefill_steps);
    c.n_parallel_envs = t.value("n_parallel_envs", c.n_parallel_envs);
    c.quantiles = t.value("quantiles", c.quantiles);
    c.learning_rate = t.value("learning_rate", c.learning_rate);
    c.entropy_target = t.value("entropy_target", c.entropy_target);
    c.init_alpha = t.value("init_alpha", c.init_alpha);
    if (t.contains("algorithm")) {
      const std::string a = t.at("algorithm").get<std::string>();
      if (a == "DSAC" || a == "dsac") {
        c.algorithm = Algorithm::DSAC;
      } else if (a == "SAC" || a == "sac") {
        c.algorithm = Algorithm::SAC;
      } else {
        throw std::runtime_error("config: algorithm must be DSAC or SAC");
      }
    }
    c.total_iterations = t.value("total_iterations", c.total_iterations);
    c.eval_interval = t.value("eval_interval", c.eval_interval);
    c.hidden_width = t.value("hidden_width", c.hidden_width);
    c.hidden_layers = t.value("hidden_layers", c.hidden_layers);
    c.eval_laps = t.value("eval_laps", c.eval_laps);
    c.validate();
  }

  if (doc.contains("imitation")) {
    const json& i = doc.at("imitation");
    require_keys(i, "imitation",
                 {"lambda_imi", "demo_mix_fraction", "imitation_batch_size", "holdout_laps",
                  "demo_dir"});
    ImitationConfig& m = cfg.imitation;
    m.lambda_imi = i.value("lambda_imi", m.lambda_imi);
    m.demo_mix_fraction = i.value("demo_mix_fraction", m.demo_mix_fraction);
    m.imitation_batch_size = i.value("imitation_batch_size", m.imitation_batch_size);
    m.holdout_laps = i.value("holdout_laps", m.holdout_laps);
    m.demo_dir = i.value("demo_dir", m.demo_dir);
    m.validate();
  }

  if (doc.contains("eval")) {
    const json& e = doc.at("eval");
    require_keys(e, "eval",
                 {"n_laps", "fixed_start_u", "lap_valid_margin", "sweep_n", "max_eval_steps"});
    cfg.eval.n_laps = e.value("n_laps", cfg.eval.n_laps);
    cfg.eval.fixed_start_u = e.value("fixed_start_u", cfg.eval.fixed_start_u);
    cfg.eval.lap_valid_margin = e.value("lap_valid_margin", cfg.eval.lap_valid_margin);
    cfg.eval.sweep_n = e.value("sweep_n", cfg.eval.sweep_n);
    cfg.eval.max_eval_steps = e.value("max_eval_steps", cfg.eval.max_eval_steps);
  }

  if (doc.contains("variant")) {
    cfg.apply_variant(variant_from_string(doc.at("variant").get<std::string>()));
  } else {
    cfg.apply_variant(Variant::PureRl);
  }

  if (doc.contains("seeds")) {
    cfg.seeds.clear();
    for (const json& s : doc.at("seeds")) cfg.seeds.push_back(s.get<std::uint64_t>());
    if (cfg.seeds.empty()) throw std::runtime_error("config: seeds must not be empty");
  }

  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string ExperimentConfig::resolved_json() const {
  json doc;
  doc["track"] = track_path;
  doc["vehicle"] = {{"mass", vehicle.mass},
                    {"yaw_inertia", vehicle.yaw_inertia},
                    {"cg_to_front_axle", vehicle.cg_to_front_axle},
                    {"cg_to_rear_axle", vehicle.cg_to_rear_axle},
                    {"base_mu", vehicle.base_mu},
                    {"cornering_stiffness_front", vehicle.cornering_stiffness_front},
                    {"cornering_stiffness_rear", vehicle.cornering_stiffness_rear},
                    {"peak_slip_front", vehicle.peak_slip_front},
                    {"peak_slip_rear", vehicle.peak_slip_rear},
                    {"max_engine_power", vehicle.max_engine_power},
                    {"max_drive_force", vehicle.max_drive_force},
                    {"max_brake_force", vehicle.max_brake_force},
                    {"max_steer_angle", vehicle.max_steer_angle},
                    {"steer_rate_limit", vehicle.steer_rate_limit},
                    {"drag_coeff", vehicle.drag_coeff},
                    {"rolling_resist", vehicle.rolling_resist}};
  doc["setups"] = json::array();
  for (const VehicleSetup& s : setups) {
    doc["setups"].push_back({{"setup_id", s.setup_id},
                             {"mu_front_scale", s.mu_front_scale},
                             {"mu_rear_scale", s.mu_rear_scale}});
  }
  doc["reward_weights"] = {{"progress_w", reward_weights.progress_w},
                           {"q1", reward_weights.q1},
                           {"q2", reward_weights.q2},
                           {"steer_rate_w", reward_weights.steer_rate_w},
                           {"pedal_rate_w", reward_weights.pedal_rate_w},
                           {"steer_rate_threshold", reward_weights.steer_rate_threshold},
                           {"pedal_rate_threshold", reward_weights.pedal_rate_threshold},
                           {"offtrack_terminal_penalty", reward_weights.offtrack_terminal_penalty},
                           {"path_dev_w", reward_weights.path_dev_w},
                           {"sigma_min", reward_weights.sigma_min}};
  doc["episode"] = {{"max_steps", episode.max_steps},
                    {"offtrack_limit_e_norm", episode.offtrack_limit_e_norm},
                    {"stop_speed", episode.stop_speed},
                    {"stop_patience", episode.stop_patience},
                    {"start_speed_fraction", episode.start_speed_fraction}};
  doc["normalization"] = {{"vx", norm.vx},
                          {"vy", norm.vy},
                          {"yaw_rate", norm.yaw_rate},
                          {"steer_cmd", norm.steer_cmd},
                          {"throttle", norm.throttle},
                          {"brake", norm.brake},
                          {"ax", norm.ax},
                          {"ay", norm.ay},
                          {"az", norm.az},
                          {"yaw_accel", norm.yaw_accel},
                          {"e_norm", norm.e_norm},
                          {"heading_error", norm.heading_error},
                          {"edge_x", norm.edge_x},
                          {"edge_y", norm.edge_y},
                          {"mu_scale", norm.mu_scale}};
  doc["trainer"] = {{"gamma", trainer.gamma},
                    {"tau", trainer.tau},
                    {"batch_size", trainer.batch_size},
                    {"replay_capacity", trainer.replay_capacity},
                    {"prefill_steps", trainer.prefill_steps},
                    {"n_parallel_envs", trainer.n_parallel_envs},
                    {"quantiles", trainer.quantiles},
                    {"learning_rate", trainer.learning_rate},
                    {"entropy_target", trainer.entropy_target},
                    {"init_alpha", trainer.init_alpha},
                    {"algorithm", trainer.algorithm == Algorithm::SAC ? "SAC" : "DSAC"},
                    {"total_iterations", trainer.total_iterations},
                    {"eval_interval", trainer.eval_interval},
                    {"hidden_width", trainer.hidden_width},
                    {"hidden_layers", trainer.hidden_layers},
                    {"eval_laps", trainer.eval_laps}};
  doc["imitation"] = {{"lambda_imi", imitation.lambda_imi},
                      {"demo_mix_fraction", imitation.demo_mix_fraction},
                      {"imitation_batch_size", imitation.imitation_batch_size},
                      {"shared_experience", imitation.shared_experience},
                      {"regularization", imitation.regularization},
                      {"augmented_reward", imitation.augmented_reward},
                      {"holdout_laps", imitation.holdout_laps},
                      {"demo_dir", imitation.demo_dir}};
  doc["eval"] = {{"n_laps", eval.n_laps},
                 {"fixed_start_u", eval.fixed_start_u},
                 {"lap_valid_margin", eval.lap_valid_margin},
                 {"sweep_n", eval.sweep_n},
                 {"max_eval_steps", eval.max_eval_steps}};
  doc["variant"] = to_string(variant);
  doc["seeds"] = seeds;
  return doc.dump(2);
}

std::uint64_t fnv1a_hash(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a_hash(resolved_json()); }

}  // namespace apex
