#pragma once

// Command implementations behind the causalfuse tool. Argument parsing lives in
// tools/causalfuse.cpp; everything here takes a resolved RunConfig.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "causalfuse/checkpoint.hpp"
#include "causalfuse/confounder.hpp"
#include "causalfuse/corpus.hpp"
#include "causalfuse/error.hpp"
#include "causalfuse/fusionnet.hpp"
#include "causalfuse/metrics.hpp"
#include "causalfuse/scenegen.hpp"
#include "causalfuse/training.hpp"

namespace causalfuse::cli {

namespace fs = std::filesystem;

struct DataSection {
  fs::path root;
  std::string split = "train";
  std::string eval_split = "eval";
  BiasProfile profile;
  std::size_t n = 300;
  std::size_t size = 32;
  std::size_t balanced_per_category = 0;  // > 0: ignore profile, emit an equal count per category
};

struct DictionarySection {
  std::size_t size = kDefaultDictionarySize;
  std::size_t dim = kDefaultReducedDim;
  std::string modality = "visible";
  fs::path visible;
  fs::path infrared;
};

struct TrainSection {
  TrainConfig train;
  LossConfig loss;
  bool resume = false;
};

struct EvalSection {
  fs::path checkpoint;
  std::vector<std::string> categories;  // empty: all
};

struct AblateSection {
  std::vector<std::size_t> dict_sizes{20, 25, 30};
  bool no_baffm = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  fs::path out;
  DataSection data;
  DictionarySection dictionary;
  FusionConfig model;
  TrainSection train;
  EvalSection eval;
  AblateSection ablate;
  fs::path ir;   // fuse inputs
  fs::path vis;
};

// ---------------------------------------------------------------------------
// Config file

namespace config_detail {

inline void check_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw FormatError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw FormatError("config: unknown key '" + key + "' in '" + where + "'");
  }
}

template <class T>
void read(const nlohmann::json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = obj.at(key).get<T>();
}

inline void read_path(const nlohmann::json& obj, const char* key, fs::path& dst, const fs::path& base) {
  if (!obj.contains(key)) return;
  fs::path p = obj.at(key).get<std::string>();
  dst = p.is_relative() ? base / p : p;
}

}  // namespace config_detail

/// Applies a config document on top of `cfg`. Relative paths resolve against
/// `base_dir` (the directory holding the config file).
inline void apply_config(RunConfig& cfg, const nlohmann::json& doc, const fs::path& base_dir) {
  using namespace config_detail;
  try {
    check_keys(doc, {"seed", "out", "data", "dictionary", "model", "train", "eval", "ablate"}, "top level");
    read(doc, "seed", cfg.seed);
    read_path(doc, "out", cfg.out, base_dir);
    if (doc.contains("data")) {
      const auto& d = doc.at("data");
      check_keys(d, {"root", "split", "eval_split", "street", "cloud", "bush", "n", "size", "balanced_per_category"},
                 "data");
      read_path(d, "root", cfg.data.root, base_dir);
      read(d, "split", cfg.data.split);
      read(d, "eval_split", cfg.data.eval_split);
      read(d, "street", cfg.data.profile.probabilities[0]);
      read(d, "cloud", cfg.data.profile.probabilities[1]);
      read(d, "bush", cfg.data.profile.probabilities[2]);
      read(d, "n", cfg.data.n);
      read(d, "size", cfg.data.size);
      read(d, "balanced_per_category", cfg.data.balanced_per_category);
    }
    if (doc.contains("dictionary")) {
      const auto& d = doc.at("dictionary");
      check_keys(d, {"N", "d", "modality", "visible", "infrared"}, "dictionary");
      read(d, "N", cfg.dictionary.size);
      read(d, "d", cfg.dictionary.dim);
      read(d, "modality", cfg.dictionary.modality);
      read_path(d, "visible", cfg.dictionary.visible, base_dir);
      read_path(d, "infrared", cfg.dictionary.infrared, base_dir);
    }
    if (doc.contains("model")) {
      const auto& d = doc.at("model");
      check_keys(d, {"stem_channels", "feature_channels", "fused_channels", "attention_dim", "kernel", "backdoor", "init_seed"},
                 "model");
      read(d, "stem_channels", cfg.model.stem_channels);
      read(d, "feature_channels", cfg.model.feature_channels);
      read(d, "fused_channels", cfg.model.fused_channels);
      read(d, "attention_dim", cfg.model.attention_dim);
      read(d, "kernel", cfg.model.kernel);
      read(d, "backdoor", cfg.model.backdoor);
      read(d, "init_seed", cfg.model.init_seed);
    }
    if (doc.contains("train")) {
      const auto& d = doc.at("train");
      check_keys(d, {"lr", "batch_size", "epochs", "crop", "alpha", "beta", "gamma", "resume"}, "train");
      read(d, "lr", cfg.train.train.lr);
      read(d, "batch_size", cfg.train.train.batch_size);
      read(d, "epochs", cfg.train.train.epochs);
      read(d, "crop", cfg.train.train.crop);
      read(d, "alpha", cfg.train.loss.alpha);
      read(d, "beta", cfg.train.loss.beta);
      read(d, "gamma", cfg.train.loss.gamma);
      read(d, "resume", cfg.train.resume);
    }
    if (doc.contains("eval")) {
      const auto& d = doc.at("eval");
      check_keys(d, {"checkpoint", "categories"}, "eval");
      read_path(d, "checkpoint", cfg.eval.checkpoint, base_dir);
      read(d, "categories", cfg.eval.categories);
    }
    if (doc.contains("ablate")) {
      const auto& d = doc.at("ablate");
      check_keys(d, {"dict_sizes", "no_baffm"}, "ablate");
      read(d, "dict_sizes", cfg.ablate.dict_sizes);
      read(d, "no_baffm", cfg.ablate.no_baffm);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
}

inline RunConfig load_run_config(const fs::path& path) {
  RunConfig cfg;
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  apply_config(cfg, doc, path.has_parent_path() ? path.parent_path() : fs::path("."));
  return cfg;
}

inline nlohmann::json config_snapshot(const RunConfig& c) {
  const auto& p = c.data.profile.probabilities;
  return {{"seed", c.seed},
          {"data",
           {{"root", c.data.root.generic_string()}, {"split", c.data.split}, {"eval_split", c.data.eval_split},
            {"street", p[0]}, {"cloud", p[1]}, {"bush", p[2]}, {"n", c.data.n}, {"size", c.data.size},
            {"balanced_per_category", c.data.balanced_per_category}}},
          {"dictionary",
           {{"N", c.dictionary.size}, {"d", c.dictionary.dim}, {"visible", c.dictionary.visible.generic_string()},
            {"infrared", c.dictionary.infrared.generic_string()}}},
          {"model", to_json(c.model)},
          {"train",
           {{"lr", c.train.train.lr}, {"batch_size", c.train.train.batch_size}, {"epochs", c.train.train.epochs},
            {"crop", c.train.train.crop}, {"alpha", c.train.loss.alpha}, {"beta", c.train.loss.beta},
            {"gamma", c.train.loss.gamma}}}};
}

// ---------------------------------------------------------------------------
// Commands

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ContractError(message);
}

/// Splits get distinct sub-seeds so "train" and "eval" never share a pair.
inline std::uint64_t split_seed(std::uint64_t seed, const std::string& split) {
  return derive_seed(seed, content_hash(split));
}

inline void cmd_gen_data(const RunConfig& cfg, std::ostream& log = std::cout) {
  const fs::path root = cfg.out.empty() ? cfg.data.root : cfg.out;
  require(!root.empty(), "gen-data: no output directory (use --out)");
  const auto seed = split_seed(cfg.seed, cfg.data.split);
  const auto pairs = cfg.data.balanced_per_category > 0
                         ? generate_balanced_dataset(cfg.data.balanced_per_category, cfg.data.size, seed, cfg.data.split)
                         : generate_dataset(cfg.data.profile, cfg.data.n, cfg.data.size, seed, cfg.data.split);
  write_corpus(root, cfg.data.split, pairs);
  log << "wrote " << pairs.size() << " pairs to " << (root / cfg.data.split).string() << "\n";
}

inline ConfounderDictionary build_modality_dictionary(const RunConfig& cfg, Modality m, std::size_t n) {
  require(!cfg.data.root.empty(), "no corpus directory (use --corpus)");
  const auto images = read_modality_images(cfg.data.root, cfg.data.split, m);
  require(!images.empty(), "corpus " + cfg.data.root.string() + " has no '" + cfg.data.split + "' images");
  return build_dictionary(images, m, n, cfg.dictionary.dim, cfg.seed);
}

inline void cmd_build_dict(const RunConfig& cfg, std::ostream& log = std::cout) {
  const auto modality = parse_modality(cfg.dictionary.modality);
  require(modality.has_value(), "build-dict: unknown modality '" + cfg.dictionary.modality + "'");
  require(!cfg.out.empty(), "build-dict: no output file (use --out)");
  const auto dict = build_modality_dictionary(cfg, *modality, cfg.dictionary.size);
  if (cfg.out.has_parent_path()) fs::create_directories(cfg.out.parent_path());
  write_file_atomic(cfg.out, serialize_dictionary(dict));
  log << "wrote " << to_string(*modality) << " dictionary (N=" << dict.size() << ", d=" << dict.dim() << ") to "
      << cfg.out.string() << "\n";
}

inline std::string loss_log_csv(const TrainState& state) {
  std::string out = "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < state.history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e + 1, state.history[e]);
    out += buf;
  }
  return out;
}

inline fs::path checkpoint_path(const fs::path& run_dir) { return run_dir / "checkpoint.json"; }

/// Trains into `run_dir`: config.json, loss.csv and checkpoint.json, the last
/// two rewritten after every epoch so a run can be resumed.
inline void train_run(const RunConfig& cfg, const fs::path& run_dir, std::ostream& log) {
  require(!run_dir.empty(), "train: no run directory (use --out)");
  for (const auto& [name, p] : {std::pair{"visible", cfg.dictionary.visible}, std::pair{"infrared", cfg.dictionary.infrared}})
    if (p.empty() || !fs::exists(p)) throw ContractError(std::string("train: ") + name + " dictionary file '" + p.string() + "' not found");
  require(!cfg.data.root.empty(), "train: no corpus directory (use --corpus)");
  cfg.train.train.validate();
  cfg.train.loss.validate();

  const auto dataset = read_corpus(cfg.data.root, cfg.data.split);
  require(!dataset.empty(), "train: corpus split '" + cfg.data.split + "' is empty");
  const DictionaryRef vis_ref = reference_dictionary_file(cfg.dictionary.visible);
  const DictionaryRef ir_ref = reference_dictionary_file(cfg.dictionary.infrared);

  fs::create_directories(run_dir);
  const fs::path ckpt = checkpoint_path(run_dir);
  std::optional<FusionModel> model;
  TrainState state;
  if (cfg.train.resume && fs::exists(ckpt)) {
    auto loaded = load_checkpoint(ckpt);
    if (loaded.visible.hash != vis_ref.hash || loaded.infrared.hash != ir_ref.hash)
      throw ContractError("train: --resume checkpoint was built with different dictionaries");
    model.emplace(std::move(loaded.model));
    state = std::move(loaded.state);
    log << "resuming from epoch " << state.epochs_completed << "\n";
  } else {
    FusionConfig mc = cfg.model;
    mc.init_seed = cfg.seed;
    model.emplace(mc, parse_dictionary(read_file(vis_ref.path)), parse_dictionary(read_file(ir_ref.path)));
  }
  write_file_atomic(run_dir / "config.json", config_snapshot(cfg).dump(1) + "\n");

  TrainConfig tc = cfg.train.train;
  tc.seed = cfg.seed;
  train(*model, dataset, tc, cfg.train.loss, state,
        [&](std::size_t epoch, double loss, const FusionModel& m, const TrainState& s) {
          save_checkpoint(ckpt, m, vis_ref, ir_ref, s);
          write_file_atomic(run_dir / "loss.csv", loss_log_csv(s));
          log << "epoch " << epoch + 1 << "/" << tc.epochs << " loss " << loss << "\n";
        });
  // Covers the zero-remaining-epochs case too.
  save_checkpoint(ckpt, *model, vis_ref, ir_ref, state);
  write_file_atomic(run_dir / "loss.csv", loss_log_csv(state));
}

inline void cmd_train(const RunConfig& cfg, std::ostream& log = std::cout) { train_run(cfg, cfg.out, log); }

inline void cmd_fuse(const RunConfig& cfg, std::ostream& log = std::cout) {
  require(!cfg.eval.checkpoint.empty(), "fuse: no checkpoint (use --checkpoint)");
  require(!cfg.ir.empty() && !cfg.vis.empty(), "fuse: both --ir and --vis are required");
  require(!cfg.out.empty(), "fuse: no output file (use --out)");
  const auto loaded = load_checkpoint(cfg.eval.checkpoint);
  const Image ir = read_pgm(cfg.ir), vis = read_pgm(cfg.vis);
  if (!ir.same_size(vis))
    throw DimensionError("fuse: infrared is " + std::to_string(ir.height) + "x" + std::to_string(ir.width) +
                         " but visible is " + std::to_string(vis.height) + "x" + std::to_string(vis.width));
  write_pgm(cfg.out, loaded.model.fuse(ir, vis));
  log << "wrote " << cfg.out.string() << "\n";
}

inline std::vector<ImagePair> filter_categories(std::vector<ImagePair> pairs, const std::vector<std::string>& categories) {
  if (categories.empty()) return pairs;
  std::set<SceneCategory> keep;
  for (const auto& c : categories) {
    const auto parsed = parse_category(c);
    require(parsed.has_value(), "unknown scene category '" + c + "'");
    keep.insert(*parsed);
  }
  std::erase_if(pairs, [&keep](const ImagePair& p) { return !keep.contains(p.category); });
  return pairs;
}

inline std::vector<ImagePair> load_eval_set(const RunConfig& cfg) {
  require(!cfg.data.root.empty(), "no corpus directory (use --corpus)");
  return filter_categories(read_corpus(cfg.data.root, cfg.data.eval_split), cfg.eval.categories);
}

inline void cmd_eval(const RunConfig& cfg, std::ostream& log = std::cout) {
  require(!cfg.eval.checkpoint.empty(), "eval: no checkpoint (use --checkpoint)");
  require(!cfg.out.empty(), "eval: no output file (use --out)");
  const auto loaded = load_checkpoint(cfg.eval.checkpoint);
  const auto report = evaluate(loaded.model, load_eval_set(cfg));
  if (cfg.out.has_parent_path()) fs::create_directories(cfg.out.parent_path());
  write_file_atomic(cfg.out, report_csv(report));
  log << "evaluated " << report.rows.size() << " pairs, wrote " << cfg.out.string() << "\n";
}

struct AblationRow {
  std::string variant;
  MetricReport mean;
};

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "variant,MI,VIF,Qabf,SSIM\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", r.mean.mi, r.mean.vif, r.mean.qabf, r.mean.ssim);
    out += r.variant + buf;
  }
  return out;
}

/// One train+eval cycle per dictionary size, plus an optional no-adjustment
/// baseline at the configured size. All variants share data and seed.
inline std::vector<AblationRow> cmd_ablate(const RunConfig& cfg, std::ostream& log = std::cout) {
  require(!cfg.out.empty(), "ablate: no output directory (use --out)");
  require(!cfg.ablate.dict_sizes.empty() || cfg.ablate.no_baffm, "ablate: nothing to run");
  const auto eval_set = load_eval_set(cfg);
  require(!eval_set.empty(), "ablate: evaluation split '" + cfg.data.eval_split + "' is empty");
  fs::create_directories(cfg.out);

  auto run_variant = [&](const std::string& name, std::size_t n, bool backdoor) {
    RunConfig v = cfg;
    v.dictionary.visible = cfg.out / "dicts" / ("visible_N" + std::to_string(n) + ".json");
    v.dictionary.infrared = cfg.out / "dicts" / ("infrared_N" + std::to_string(n) + ".json");
    v.model.backdoor = backdoor;
    v.train.resume = false;
    fs::create_directories(v.dictionary.visible.parent_path());
    for (auto [m, path] : {std::pair{Modality::visible, v.dictionary.visible}, std::pair{Modality::infrared, v.dictionary.infrared}})
      write_file_atomic(path, serialize_dictionary(build_modality_dictionary(v, m, n)));
    log << "variant " << name << "\n";
    const fs::path run_dir = cfg.out / name;
    train_run(v, run_dir, log);
    const auto loaded = load_checkpoint(checkpoint_path(run_dir));
    const auto report = evaluate(loaded.model, eval_set);
    write_file_atomic(run_dir / "eval.csv", report_csv(report));
    return AblationRow{name, *report.mean};
  };

  std::vector<AblationRow> rows;
  for (std::size_t n : cfg.ablate.dict_sizes) rows.push_back(run_variant("N" + std::to_string(n), n, true));
  if (cfg.ablate.no_baffm) rows.push_back(run_variant("no-baffm", cfg.dictionary.size, false));
  write_file_atomic(cfg.out / "ablation.csv", ablation_csv(rows));
  log << "wrote " << (cfg.out / "ablation.csv").string() << "\n";
  return rows;
}

}  // namespace causalfuse::cli
