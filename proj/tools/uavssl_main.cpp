// uavssl: one executable for the whole pipeline — synthetic data, masked
// dual-objective training on the shared backbone, embedding extraction,
// cosine scoring, EER/minDCF evaluation, parameter accounting and the
// built-in selfcheck suites.
//
// Machine-readable JSON goes to stdout; human logs go to stderr.
// Exit codes: 0 success, 1 runtime failure (error JSON on stdout), 2 usage.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "uav/checkpoint.hpp"
#include "uav/config.hpp"
#include "uav/errors.hpp"
#include "uav/metrics.hpp"
#include "uav/model.hpp"
#include "uav/parallel.hpp"
#include "uav/patchio.hpp"
#include "uav/selfcheck.hpp"
#include "uav/state_io.hpp"
#include "uav/synth.hpp"
#include "uav/trainer.hpp"
#include "uav/verify.hpp"

namespace {

using nlohmann::json;

void emit(const json& j) { std::cout << j.dump() << std::endl; }

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 7;
  int speakers = 8;
  int samples_per_speaker = 8;
  int eval_speakers = 0;
  int eval_samples_per_speaker = 6;
  int latent_dim = 16;
  double noise_std = 0.02;
  int visual_height = 64, visual_width = 64;
  int audio_height = 64, audio_width = 64;
};

int run_synth(const SynthArgs& a) {
  uav::SynthSpec spec;
  spec.n_speakers = a.speakers;
  spec.samples_per_speaker = a.samples_per_speaker;
  spec.latent_dim = a.latent_dim;
  spec.noise_std = a.noise_std;
  spec.seed = a.seed;
  spec.visual_height = a.visual_height;
  spec.visual_width = a.visual_width;
  spec.audio_height = a.audio_height;
  spec.audio_width = a.audio_width;

  const std::filesystem::path out(a.out);
  uav::SynthResult train = uav::generate_synthetic(spec, (out / "train").string());
  json j;
  j["train_manifest"] = train.manifest_path;
  j["n_train_samples"] = train.n_samples;

  if (a.eval_speakers > 0) {
    uav::SynthSpec eval_spec = spec;
    eval_spec.n_speakers = a.eval_speakers;
    eval_spec.samples_per_speaker = a.eval_samples_per_speaker;
    eval_spec.speaker_prefix = "ev";
    eval_spec.speaker_index_offset = a.speakers;  // same maps, disjoint speakers
    uav::SynthResult eval = uav::generate_synthetic(eval_spec, (out / "eval").string());
    const std::string trials = (out / "eval" / "trials.txt").string();
    uav::write_all_pairs_trials(uav::load_manifest(eval.manifest_path), trials);
    j["eval_manifest"] = eval.manifest_path;
    j["n_eval_samples"] = eval.n_samples;
    j["eval_trials"] = trials;
  }
  emit(j);
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string manifest;
  std::string out;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<std::string> optimizer;
  std::optional<std::string> mask_mode;
  std::optional<int> log_every;
  std::optional<int> checkpoint_every;
};

int run_train(const TrainArgs& a) {
  uav::ExperimentConfig cfg = uav::load_experiment_config(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  if (a.steps) cfg.train.steps = *a.steps;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.learning_rate) cfg.train.learning_rate = *a.learning_rate;
  if (a.optimizer) cfg.train.optimizer = uav::optimizer_from_string(*a.optimizer);
  if (a.mask_mode) cfg.mask.mode = uav::mask_mode_from_string(*a.mask_mode);
  if (a.log_every) cfg.train.log_every = *a.log_every;
  if (a.checkpoint_every) cfg.train.checkpoint_every = *a.checkpoint_every;
  cfg.train.validate();

  const json effective = uav::experiment_config_to_json(cfg);
  std::cerr << "[train] " << cfg.train.steps << " steps, batch " << cfg.train.batch_size
            << ", mask mode " << uav::mask_mode_name(cfg.mask.mode) << "\n";
  uav::TrainResult r = uav::train(cfg.model, cfg.mask, cfg.loss, cfg.train, effective, a.manifest,
                                  a.out, a.resume);
  json j;
  j["final_checkpoint"] = r.final_checkpoint;
  j["inference_checkpoint"] = r.inference_checkpoint;
  j["metrics_log"] = r.metrics_log;
  j["steps_run"] = r.steps_run;
  j["final_loss"] = r.last.losses.total;
  j["final_loss_contrastive"] = r.last.losses.contrastive;
  j["final_loss_reconstruction"] = r.last.losses.reconstruction;
  emit(j);
  return 0;
}

// ---------------------------------------------------------------------------
// embed
// ---------------------------------------------------------------------------

struct EmbedArgs {
  std::string checkpoint;
  std::string manifest;
  std::string mode = "audiovisual";
  std::string out;
};

int run_embed(const EmbedArgs& a) {
  const uav::EmbedMode mode = uav::embed_mode_from_string(a.mode);
  uav::CheckpointData ckpt = uav::load_checkpoint(a.checkpoint);
  const uav::ModelConfig mc = uav::model_config_from_checkpoint(ckpt.config);
  uav::ModelState<float> st = uav::init_model_state<float>(mc, uav::RngStream::from_seed(0));
  uav::load_state_values(st, ckpt);

  const std::vector<uav::ManifestRow> rows = uav::load_manifest(a.manifest);
  std::filesystem::create_directories(a.out);
  std::vector<uav::Embedding> embeddings(rows.size());
  std::vector<std::string> errors(rows.size());
  uav::parallel_for(static_cast<int>(rows.size()), [&](int i) {
    try {
      const uav::ManifestRow& row = rows[static_cast<std::size_t>(i)];
      std::optional<uav::RawInput> image, spec;
      if (mode != uav::EmbedMode::audio)
        image = uav::load_tensor(row.image_path, uav::Modality::visual);
      if (mode != uav::EmbedMode::visual)
        spec = uav::load_tensor(row.spectrogram_path, uav::Modality::audio);
      embeddings[static_cast<std::size_t>(i)] =
          uav::embed(image ? &*image : nullptr, spec ? &*spec : nullptr, mode, st);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(i)] = e.what();
    }
  });
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!errors[i].empty())
      throw uav::IoError("embed: sample '" + rows[i].id + "': " + errors[i]);

  const std::filesystem::path out(a.out);
  const std::string emb_manifest = (out / "embeddings.jsonl").string();
  std::ofstream mf(emb_manifest);
  if (!mf) throw uav::IoError("embed: cannot open " + emb_manifest);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string rel = rows[i].id + ".uavt";
    uav::save_vector((out / rel).string(), embeddings[i].values);
    json rec;
    rec["id"] = rows[i].id;
    rec["path"] = rel;
    mf << rec.dump() << "\n";
  }
  json j;
  j["manifest"] = emb_manifest;
  j["count"] = rows.size();
  j["dim"] = embeddings.empty() ? 0 : embeddings.front().values.size();
  j["mode"] = a.mode;
  emit(j);
  return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreArgs {
  std::string emb_a, emb_b;            // pairwise form
  std::string embeddings, trials, out; // batch form
};

std::unordered_map<std::string, std::vector<float>> load_embedding_map(const std::string& manifest) {
  std::ifstream in(manifest);
  if (!in) throw uav::IoError("score: cannot open " + manifest);
  const std::filesystem::path base = std::filesystem::path(manifest).parent_path();
  std::unordered_map<std::string, std::vector<float>> map;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json rec = json::parse(line, nullptr, false);
    if (rec.is_discarded() || !rec.contains("id") || !rec.contains("path"))
      throw uav::ParseError("score: bad embeddings manifest line in " + manifest);
    std::filesystem::path p(rec["path"].get<std::string>());
    if (!p.is_absolute()) p = base / p;
    map[rec["id"].get<std::string>()] = uav::load_vector(p.string());
  }
  return map;
}

int run_score(const ScoreArgs& a) {
  if (!a.emb_a.empty()) {
    const double s = uav::score(uav::load_vector(a.emb_a), uav::load_vector(a.emb_b));
    emit(json(s));
    return 0;
  }
  auto map = load_embedding_map(a.embeddings);
  uav::TrialSet trials = uav::parse_trials(a.trials);
  std::vector<uav::ScoreLine> lines;
  lines.reserve(trials.trials.size());
  for (const uav::Trial& t : trials.trials) {
    auto ia = map.find(t.enroll), ib = map.find(t.test);
    if (ia == map.end() || ib == map.end())
      throw uav::ParseError("score: trial id not present in embeddings manifest: " +
                            (ia == map.end() ? t.enroll : t.test));
    lines.emplace_back(t.enroll, t.test, uav::score(ia->second, ib->second));
  }
  uav::save_scores(a.out, lines);
  json j;
  j["scores"] = a.out;
  j["count"] = lines.size();
  emit(j);
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string trials, scores;
  double p_target = 0.01, c_miss = 1.0, c_fa = 1.0;
};

int run_eval(const EvalArgs& a) {
  uav::TrialSet trials = uav::parse_trials(a.trials);
  uav::ScoreSet set = uav::join_scores(trials, uav::load_scores(a.scores));
  int nt = 0, nn = 0;
  for (const uav::ScoredTrial& it : set.items) (it.label == 1 ? nt : nn)++;
  uav::EerResult eer = uav::compute_eer(set);
  uav::DcfResult dcf = uav::compute_min_dcf(set, a.p_target, a.c_miss, a.c_fa);
  json j;
  j["eer"] = eer.eer;
  j["eer_threshold"] = eer.threshold;
  j["min_dcf"] = dcf.dcf;
  j["dcf_threshold"] = dcf.threshold;
  j["n_target"] = nt;
  j["n_nontarget"] = nn;
  emit(j);
  return 0;
}

// ---------------------------------------------------------------------------
// params / selfcheck
// ---------------------------------------------------------------------------

int run_params(const std::string& config_path) {
  uav::ModelConfig mc;
  if (!config_path.empty()) mc = uav::load_experiment_config(config_path).model;
  const std::int64_t shared = uav::count_parameters_config(mc, uav::CountMode::shared);
  const std::int64_t dual = uav::count_parameters_config(mc, uav::CountMode::dual_hypothetical);
  json j;
  j["shared_count"] = shared;
  j["dual_count"] = dual;
  j["backbone_and_projection_count"] = dual - shared;
  j["ratio"] = static_cast<double>(dual) / static_cast<double>(shared);
  emit(j);
  return 0;
}

int run_selfcheck_cmd(std::uint64_t seed) {
  const json j = uav::run_selfcheck(seed);
  emit(j);
  return j["pass"].get<bool>() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unified audio-visual self-supervised speaker verification"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
  synth->add_option("--out", synth_args.out, "output directory")->required();
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--speakers", synth_args.speakers, "training speakers");
  synth->add_option("--samples-per-speaker", synth_args.samples_per_speaker, "samples per speaker");
  synth->add_option("--eval-speakers", synth_args.eval_speakers, "held-out speakers (0 = no eval split)");
  synth->add_option("--eval-samples-per-speaker", synth_args.eval_samples_per_speaker,
                    "samples per held-out speaker");
  synth->add_option("--latent-dim", synth_args.latent_dim, "speaker latent dimension");
  synth->add_option("--noise-std", synth_args.noise_std, "per-sample noise std");
  synth->add_option("--visual-height", synth_args.visual_height, "image height");
  synth->add_option("--visual-width", synth_args.visual_width, "image width");
  synth->add_option("--audio-height", synth_args.audio_height, "spectrogram bins");
  synth->add_option("--audio-width", synth_args.audio_width, "spectrogram frames");

  TrainArgs train_args;
  CLI::App* train = app.add_subcommand("train", "run the masked dual-objective training loop");
  train->add_option("--config", train_args.config, "experiment config JSON")->required();
  train->add_option("--manifest", train_args.manifest, "dataset manifest (JSON-lines)")->required();
  train->add_option("--out", train_args.out, "output directory")->required();
  train->add_option("--resume", train_args.resume, "full checkpoint to resume from");
  train->add_option("--seed", train_args.seed, "override train.seed");
  train->add_option("--steps", train_args.steps, "override train.steps");
  train->add_option("--batch-size", train_args.batch_size, "override train.batch_size");
  train->add_option("--learning-rate", train_args.learning_rate, "override train.learning_rate");
  train->add_option("--optimizer", train_args.optimizer, "override train.optimizer (sgd|adam)");
  train->add_option("--mask-mode", train_args.mask_mode,
                    "override mask.mode (asymmetric|symmetric|complementary)");
  train->add_option("--log-every", train_args.log_every, "override train.log_every");
  train->add_option("--checkpoint-every", train_args.checkpoint_every,
                    "override train.checkpoint_every");

  EmbedArgs embed_args;
  CLI::App* embed = app.add_subcommand("embed", "extract embeddings for a manifest");
  embed->add_option("--checkpoint", embed_args.checkpoint, "checkpoint (full or inference)")->required();
  embed->add_option("--manifest", embed_args.manifest, "dataset manifest")->required();
  embed->add_option("--mode", embed_args.mode, "audio|visual|audiovisual")->required();
  embed->add_option("--out", embed_args.out, "output directory")->required();

  ScoreArgs score_args;
  CLI::App* score = app.add_subcommand("score", "cosine-score embeddings");
  score->add_option("--emb-a", score_args.emb_a, "first embedding (pairwise form)");
  score->add_option("--emb-b", score_args.emb_b, "second embedding (pairwise form)");
  score->add_option("--embeddings", score_args.embeddings, "embeddings manifest (batch form)");
  score->add_option("--trials", score_args.trials, "trial list (batch form)");
  score->add_option("--out", score_args.out, "scores output path (batch form)");

  EvalArgs eval_args;
  CLI::App* eval = app.add_subcommand("eval", "EER / minDCF from trials and scores");
  eval->add_option("--trials", eval_args.trials, "trial list")->required();
  eval->add_option("--scores", eval_args.scores, "scores file")->required();
  eval->add_option("--p-target", eval_args.p_target, "target prior");
  eval->add_option("--c-miss", eval_args.c_miss, "miss cost");
  eval->add_option("--c-fa", eval_args.c_fa, "false-alarm cost");

  std::string params_config;
  CLI::App* params = app.add_subcommand("params", "parameter counts, shared vs dual-hypothetical");
  params->add_option("--config", params_config, "experiment config JSON (defaults when omitted)");

  std::uint64_t selfcheck_seed = 42;
  CLI::App* selfcheck = app.add_subcommand("selfcheck", "run built-in invariant suites");
  selfcheck->add_option("--seed", selfcheck_seed, "suite seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);
    if (train->parsed()) return run_train(train_args);
    if (embed->parsed()) return run_embed(embed_args);
    if (score->parsed()) {
      const bool pairwise = !score_args.emb_a.empty() || !score_args.emb_b.empty();
      if (pairwise && (score_args.emb_a.empty() || score_args.emb_b.empty()))
        throw uav::ConfigError("score: pairwise form needs both --emb-a and --emb-b");
      if (!pairwise &&
          (score_args.embeddings.empty() || score_args.trials.empty() || score_args.out.empty()))
        throw uav::ConfigError("score: batch form needs --embeddings, --trials and --out");
      return run_score(score_args);
    }
    if (eval->parsed()) return run_eval(eval_args);
    if (params->parsed()) return run_params(params_config);
    if (selfcheck->parsed()) return run_selfcheck_cmd(selfcheck_seed);
  } catch (const uav::Error& e) {
    json j;
    j["error"] = {{"type", e.kind()}, {"message", e.what()}};
    emit(j);
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json j;
    j["error"] = {{"type", "internal"}, {"message", e.what()}};
    emit(j);
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
