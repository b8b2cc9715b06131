#include "uav/trainer.hpp"

#include <filesystem>
#include <fstream>

#include "uav/checkpoint.hpp"
#include "uav/state_io.hpp"

namespace uav {

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("train.optimizer: unknown value '" + s + "'");
}

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

std::vector<int> epoch_permutation(const RngStream& root, std::uint64_t epoch, int n_samples) {
  RngStream r = root.substream("data.order", epoch);
  std::vector<int> perm(static_cast<std::size_t>(n_samples));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n_samples - 1; i > 0; --i) {
    const int j = static_cast<int>(r.next_below(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

std::vector<int> batch_indices(const RngStream& root, std::uint64_t step, int batch_size,
                               int n_samples) {
  if (n_samples < 1) throw PreconditionError("batch_indices: empty dataset");
  std::vector<int> out(static_cast<std::size_t>(batch_size));
  std::uint64_t epoch = (step * static_cast<std::uint64_t>(batch_size)) / static_cast<std::uint64_t>(n_samples);
  std::vector<int> perm = epoch_permutation(root, epoch, n_samples);
  for (int j = 0; j < batch_size; ++j) {
    const std::uint64_t g = step * static_cast<std::uint64_t>(batch_size) + static_cast<std::uint64_t>(j);
    const std::uint64_t e = g / static_cast<std::uint64_t>(n_samples);
    if (e != epoch) {
      epoch = e;
      perm = epoch_permutation(root, epoch, n_samples);
    }
    out[static_cast<std::size_t>(j)] = perm[static_cast<std::size_t>(g % static_cast<std::uint64_t>(n_samples))];
  }
  return out;
}

std::vector<TrainSample> load_train_samples(const std::string& manifest_path, const ModelConfig& cfg) {
  std::vector<ManifestRow> rows = load_manifest(manifest_path);
  if (rows.empty()) throw PreconditionError("load_train_samples: manifest is empty");
  std::vector<TrainSample> samples;
  samples.reserve(rows.size());
  for (const ManifestRow& row : rows) {
    TrainSample s;
    s.id = row.id;
    s.speaker = row.speaker;
    try {
      RawInput image = load_tensor(row.image_path, Modality::visual);
      RawInput spec = load_tensor(row.spectrogram_path, Modality::audio);
      s.visual = patchify(image, cfg.patch_size);
      s.audio = patchify(inflate_channels(spec), cfg.patch_size);
    } catch (const Error& e) {
      throw IoError("sample '" + row.id + "': " + e.what());
    }
    if (s.visual.count() != cfg.visual_tokens() || s.audio.count() != cfg.audio_tokens())
      throw GeometryError("sample '" + row.id + "': token grid does not match model config");
    samples.push_back(std::move(s));
  }
  return samples;
}

namespace {

CheckpointData make_checkpoint(const ModelState<float>& st, const OptState<float>& opt,
                               std::int64_t step, const nlohmann::json& config) {
  CheckpointData data;
  data.kind = "full";
  data.step = step;
  data.config = config;
  data.entries = entries_from_state(st);
  if (opt.kind == OptimizerKind::adam) {
    for (std::size_t i = 0; i < st.registry.size(); ++i) {
      CheckpointEntry m{"adam.m." + st.registry[i].name, st.registry[i].tensor.shape, true, opt.m[i]};
      CheckpointEntry v{"adam.v." + st.registry[i].name, st.registry[i].tensor.shape, true, opt.v[i]};
      data.opt_entries.push_back(std::move(m));
      data.opt_entries.push_back(std::move(v));
    }
  }
  nlohmann::json opt_meta;
  opt_meta["kind"] = optimizer_name(opt.kind);
  opt_meta["t"] = opt.t;
  data.config["optimizer_state"] = opt_meta;
  return data;
}

void restore_opt_state(OptState<float>& opt, const ModelState<float>& st, const CheckpointData& data) {
  if (!data.config.contains("optimizer_state"))
    throw FormatError("resume: checkpoint lacks optimizer state");
  const nlohmann::json& meta = data.config["optimizer_state"];
  const std::string kind = meta.at("kind").get<std::string>();
  if (kind != optimizer_name(opt.kind))
    throw ConfigError("resume: checkpoint optimizer '" + kind + "' does not match config");
  opt.t = meta.at("t").get<std::int64_t>();
  if (opt.kind != OptimizerKind::adam) return;
  std::unordered_map<std::string, const CheckpointEntry*> by_name;
  for (const CheckpointEntry& e : data.opt_entries) by_name[e.name] = &e;
  for (std::size_t i = 0; i < st.registry.size(); ++i) {
    for (const char* which : {"m", "v"}) {
      const std::string name = std::string("adam.") + which + "." + st.registry[i].name;
      auto it = by_name.find(name);
      if (it == by_name.end()) throw FormatError("resume: checkpoint is missing " + name);
      std::vector<float>& dst = which[0] == 'm' ? opt.m[i] : opt.v[i];
      if (it->second->values.size() != dst.size())
        throw DimensionError("resume: size mismatch for " + name);
      dst = it->second->values;
    }
  }
}

void append_metrics(std::ofstream& log, std::int64_t step_1based, const StepRecord& rec) {
  nlohmann::json j;
  j["step"] = step_1based;
  j["loss"] = rec.losses.total;
  j["loss_contrastive"] = rec.losses.contrastive;
  j["loss_reconstruction"] = rec.losses.reconstruction;
  j["ratio_audio"] = rec.ratio_audio;
  j["ratio_visual"] = rec.ratio_visual;
  log << j.dump() << "\n";
  log.flush();
}

}  // namespace

TrainResult train(const ModelConfig& model_cfg, const MaskConfig& mask_cfg, const LossConfig& loss_cfg,
                  const TrainConfig& train_cfg, const nlohmann::json& effective_config,
                  const std::string& manifest_path, const std::string& out_dir,
                  const std::string& resume_path) {
  model_cfg.validate();
  loss_cfg.validate();
  train_cfg.validate();
  std::filesystem::create_directories(out_dir);
  const auto out = std::filesystem::path(out_dir);

  std::vector<TrainSample> samples = load_train_samples(manifest_path, model_cfg);
  RngStream root = RngStream::from_seed(train_cfg.seed);
  ModelState<float> st = init_model_state<float>(model_cfg, root.substream("init"));
  OptState<float> opt = init_opt_state(st, train_cfg.optimizer);

  std::int64_t start_step = 0;
  if (!resume_path.empty()) {
    CheckpointData ckpt = load_checkpoint(resume_path);
    if (ckpt.kind != "full") throw PreconditionError("resume: needs a full checkpoint");
    load_state_values(st, ckpt);
    restore_opt_state(opt, st, ckpt);
    start_step = ckpt.step;
    if (start_step >= train_cfg.steps)
      throw PreconditionError("resume: checkpoint step " + std::to_string(start_step) +
                              " is beyond train.steps");
  }

  {
    std::ofstream cfg_echo(out / "effective_config.json");
    cfg_echo << effective_config.dump(2) << "\n";
  }
  const std::string metrics_path = (out / "metrics.jsonl").string();
  std::ofstream log(metrics_path, start_step > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw IoError("train: cannot open metrics log " + metrics_path);

  TrainResult result;
  result.metrics_log = metrics_path;
  for (std::int64_t step = start_step; step < train_cfg.steps; ++step) {
    std::vector<int> idx = batch_indices(root, static_cast<std::uint64_t>(step), train_cfg.batch_size,
                                         static_cast<int>(samples.size()));
    std::vector<const TrainSample*> batch;
    batch.reserve(idx.size());
    for (int i : idx) batch.push_back(&samples[static_cast<std::size_t>(i)]);
    StepRecord rec = train_step(batch, st, opt, train_cfg, mask_cfg, loss_cfg,
                                static_cast<std::uint64_t>(step), root);
    result.last = rec;
    const std::int64_t done = step + 1;
    if (step == 0 || done == train_cfg.steps || done % train_cfg.log_every == 0)
      append_metrics(log, done, rec);
    if (train_cfg.checkpoint_every > 0 && done % train_cfg.checkpoint_every == 0 &&
        done != train_cfg.steps) {
      const std::string path = (out / ("ckpt_step" + std::to_string(done) + ".uavc")).string();
      save_checkpoint(path, make_checkpoint(st, opt, done, effective_config));
    }
  }
  result.steps_run = train_cfg.steps - start_step;

  CheckpointData final_ckpt = make_checkpoint(st, opt, train_cfg.steps, effective_config);
  result.final_checkpoint = (out / "ckpt_final.uavc").string();
  save_checkpoint(result.final_checkpoint, final_ckpt);
  result.inference_checkpoint = (out / "ckpt_final_inference.uavc").string();
  save_checkpoint(result.inference_checkpoint, strip_for_inference(final_ckpt));
  return result;
}

}  // namespace uav
