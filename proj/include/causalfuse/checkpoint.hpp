#pragma once

// Model checkpoints: parameter values, optimizer state, architecture, training
// progress, and references (relative path + content hash) to the two
// dictionary files the model was built with.

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "causalfuse/confounder.hpp"
#include "causalfuse/error.hpp"
#include "causalfuse/fusionnet.hpp"
#include "causalfuse/image.hpp"
#include "causalfuse/param_store.hpp"
#include "causalfuse/training.hpp"

namespace causalfuse {

namespace fs = std::filesystem;

struct DictionaryRef {
  fs::path path;
  std::string hash;  // FNV-1a of the file bytes, 16 hex digits
};

inline DictionaryRef reference_dictionary_file(const fs::path& path) {
  return {path, hex64(content_hash(read_file(path)))};
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr}, {"batch_size", c.batch_size}, {"epochs", c.epochs}, {"crop", c.crop}, {"seed", c.seed}};
}

inline nlohmann::json to_json(const LossConfig& c) {
  return {{"alpha", c.alpha}, {"beta", c.beta}, {"gamma", c.gamma}};
}

/// In-memory checkpoint document. Dictionary paths are written relative to
/// `base_dir` when possible.
inline nlohmann::json checkpoint_to_json(const FusionModel& model, const DictionaryRef& visible,
                                         const DictionaryRef& infrared, const TrainState& state,
                                         const fs::path& base_dir = {}) {
  auto portable = [&base_dir](const fs::path& p) {
    if (base_dir.empty()) return p.generic_string();
    const auto rel = fs::weakly_canonical(p).lexically_relative(fs::weakly_canonical(base_dir));
    return (rel.empty() ? fs::absolute(p) : rel).generic_string();
  };
  return {{"format", "causalfuse-checkpoint"},
          {"version", 1},
          {"model", to_json(model.config())},
          {"dictionaries",
           {{"visible", {{"path", portable(visible.path)}, {"hash", visible.hash}}},
            {"infrared", {{"path", portable(infrared.path)}, {"hash", infrared.hash}}}}},
          {"params", params_to_json(model.params())},
          {"optimizer", optimizer_to_json(model.params())},
          {"train", {{"epochs_completed", state.epochs_completed}, {"history", state.history}}}};
}

inline FusionModel model_from_checkpoint_json(const nlohmann::json& doc, ConfounderDictionary visible,
                                              ConfounderDictionary infrared) {
  try {
    if (doc.at("format").get<std::string>() != "causalfuse-checkpoint") throw FormatError("not a checkpoint document");
    FusionModel model(fusion_config_from_json(doc.at("model")), std::move(visible), std::move(infrared));
    load_params(model.params(), doc.at("params"));
    load_optimizer(model.params(), doc.at("optimizer"));
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline TrainState train_state_from_checkpoint_json(const nlohmann::json& doc) {
  try {
    TrainState state;
    state.epochs_completed = doc.at("train").at("epochs_completed").get<std::size_t>();
    state.history = doc.at("train").at("history").get<std::vector<double>>();
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

struct LoadedCheckpoint {
  FusionModel model;
  TrainState state;
  DictionaryRef visible;
  DictionaryRef infrared;
};

inline void save_checkpoint(const fs::path& path, const FusionModel& model, const DictionaryRef& visible,
                            const DictionaryRef& infrared, const TrainState& state) {
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  write_file_atomic(path, checkpoint_to_json(model, visible, infrared, state, base).dump(1) + "\n");
}

/// Loads a checkpoint and the dictionaries it references, refusing files whose
/// content hash no longer matches.
inline LoadedCheckpoint load_checkpoint(const fs::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "causalfuse-checkpoint")
    throw FormatError(path.string() + " is not a causalfuse checkpoint");
  const auto base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto resolve = [&](const char* which) -> std::pair<DictionaryRef, ConfounderDictionary> {
    const auto& entry = doc.at("dictionaries").at(which);
    fs::path p = entry.at("path").get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw FormatError(std::string(which) + " dictionary " + p.string() + " not found");
    const std::string bytes = read_file(p);
    const std::string hash = hex64(content_hash(bytes));
    if (hash != entry.at("hash").get<std::string>())
      throw FormatError(std::string(which) + " dictionary " + p.string() + " does not match the checkpoint hash");
    return std::pair{DictionaryRef{p, hash}, parse_dictionary(bytes)};
  };
  std::pair<DictionaryRef, ConfounderDictionary> vis, ir;
  try {
    vis = resolve("visible");
    ir = resolve("infrared");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + " has malformed dictionary references: " + e.what());
  }
  auto& [vis_ref, vis_dict] = vis;
  auto& [ir_ref, ir_dict] = ir;
  auto model = model_from_checkpoint_json(doc, std::move(vis_dict), std::move(ir_dict));
  return {std::move(model), train_state_from_checkpoint_json(doc), vis_ref, ir_ref};
}

}  // namespace causalfuse
