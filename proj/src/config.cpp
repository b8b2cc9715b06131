#include "uav/config.hpp"

#include <fstream>
#include <set>

#include "uav/errors.hpp"

namespace uav {

namespace {

class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string name) : section_(j), name_(std::move(name)) {
    if (!section_.is_object()) throw ConfigError(name_ + ": must be a JSON object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!section_.contains(key)) return;
    try {
      out = section_[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  template <class T>
  void require(const char* key, T& out) {
    seen_.insert(key);
    if (!section_.contains(key)) throw ConfigError(name_ + "." + key + ": missing (mandatory)");
    try {
      out = section_[key].get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  void reject_unknown() const {
    for (auto it = section_.begin(); it != section_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(name_ + "." + it.key() + ": unknown key");
  }

 private:
  const nlohmann::json& section_;
  std::string name_;
  std::set<std::string> seen_;
};

const nlohmann::json kEmpty = nlohmann::json::object();

const nlohmann::json& section_or_empty(const nlohmann::json& j, const char* name) {
  if (!j.contains(name)) return kEmpty;
  return j.at(name);
}

}  // namespace

ModelConfig parse_model_config(const nlohmann::json& section) {
  ModelConfig m;
  SectionReader r(section, "model");
  r.get("dim", m.dim);
  r.get("depth", m.depth);
  r.get("heads", m.heads);
  r.get("patch_size", m.patch_size);
  r.get("visual_height", m.visual_height);
  r.get("visual_width", m.visual_width);
  r.get("audio_height", m.audio_height);
  r.get("audio_width", m.audio_width);
  r.get("joint_encoder_depth", m.joint_encoder_depth);
  r.get("joint_decoder_depth", m.joint_decoder_depth);
  r.get("decoder_dim", m.decoder_dim);
  r.reject_unknown();
  m.validate();
  return m;
}

nlohmann::json model_config_to_json(const ModelConfig& m) {
  nlohmann::json j;
  j["dim"] = m.dim;
  j["depth"] = m.depth;
  j["heads"] = m.heads;
  j["patch_size"] = m.patch_size;
  j["visual_height"] = m.visual_height;
  j["visual_width"] = m.visual_width;
  j["audio_height"] = m.audio_height;
  j["audio_width"] = m.audio_width;
  j["joint_encoder_depth"] = m.joint_encoder_depth;
  j["joint_decoder_depth"] = m.joint_decoder_depth;
  j["decoder_dim"] = m.decoder_dim;
  return j;
}

ModelConfig model_config_from_checkpoint(const nlohmann::json& config_echo) {
  if (!config_echo.contains("model"))
    throw FormatError("checkpoint config: missing model section");
  return parse_model_config(config_echo.at("model"));
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  static const std::set<std::string> known = {"model", "mask", "loss", "train", "eval"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError(it.key() + ": unknown config section");

  ExperimentConfig cfg;
  cfg.model = parse_model_config(section_or_empty(j, "model"));

  {
    SectionReader r(section_or_empty(j, "mask"), "mask");
    std::string mode = mask_mode_name(cfg.mask.mode);
    r.get("lo", cfg.mask.lo);
    r.get("hi", cfg.mask.hi);
    r.get("mode", mode);
    r.reject_unknown();
    cfg.mask.mode = mask_mode_from_string(mode);
    if (!(cfg.mask.lo > 0.0 && cfg.mask.lo <= cfg.mask.hi && cfg.mask.hi < 1.0))
      throw ConfigError("mask.lo/mask.hi: need 0 < lo <= hi < 1");
  }
  {
    if (!j.contains("loss")) throw ConfigError("loss: section is mandatory (tau, lambda)");
    SectionReader r(j.at("loss"), "loss");
    std::string direction = direction_name(cfg.loss.direction);
    std::string target = recon_target_name(cfg.loss.recon_target);
    r.require("tau", cfg.loss.tau);
    r.require("lambda", cfg.loss.lambda);
    r.get("direction", direction);
    r.get("recon_target", target);
    r.reject_unknown();
    cfg.loss.direction = direction_from_string(direction);
    cfg.loss.recon_target = recon_target_from_string(target);
    cfg.loss.validate();
  }
  {
    SectionReader r(section_or_empty(j, "train"), "train");
    std::string opt = optimizer_name(cfg.train.optimizer);
    r.get("steps", cfg.train.steps);
    r.get("batch_size", cfg.train.batch_size);
    r.get("learning_rate", cfg.train.learning_rate);
    r.get("optimizer", opt);
    r.get("seed", cfg.train.seed);
    r.get("checkpoint_every", cfg.train.checkpoint_every);
    r.get("log_every", cfg.train.log_every);
    r.get("grad_clip", cfg.train.grad_clip);
    r.reject_unknown();
    cfg.train.optimizer = optimizer_from_string(opt);
    cfg.train.validate();
  }
  {
    SectionReader r(section_or_empty(j, "eval"), "eval");
    r.get("p_target", cfg.eval.p_target);
    r.get("c_miss", cfg.eval.c_miss);
    r.get("c_fa", cfg.eval.c_fa);
    r.reject_unknown();
    if (!(cfg.eval.p_target > 0.0 && cfg.eval.p_target < 1.0))
      throw ConfigError("eval.p_target: must lie strictly between 0 and 1");
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_experiment_config: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("load_experiment_config: invalid JSON in " + path);
  return parse_experiment_config(j);
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["model"] = model_config_to_json(cfg.model);
  j["mask"] = {{"lo", cfg.mask.lo}, {"hi", cfg.mask.hi}, {"mode", mask_mode_name(cfg.mask.mode)}};
  j["loss"] = {{"tau", cfg.loss.tau},
               {"lambda", cfg.loss.lambda},
               {"direction", direction_name(cfg.loss.direction)},
               {"recon_target", recon_target_name(cfg.loss.recon_target)}};
  j["train"] = {{"steps", cfg.train.steps},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"optimizer", optimizer_name(cfg.train.optimizer)},
                {"seed", cfg.train.seed},
                {"checkpoint_every", cfg.train.checkpoint_every},
                {"log_every", cfg.train.log_every},
                {"grad_clip", cfg.train.grad_clip}};
  j["eval"] = {{"p_target", cfg.eval.p_target}, {"c_miss", cfg.eval.c_miss}, {"c_fa", cfg.eval.c_fa}};
  return j;
}

}  // namespace uav
