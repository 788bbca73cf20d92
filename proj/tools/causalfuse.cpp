// causalfuse: data generation, dictionary building, training, fusion,
// evaluation and ablations from the command line.

#include <cstring>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "causalfuse/cli.hpp"

namespace {

namespace cf = causalfuse;
namespace fs = std::filesystem;

// --config has to be loaded before the remaining flags are parsed so that
// flags override file values.
std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return argv[i] + 9;
  }
  return {};
}

void add_path(CLI::App* app, const std::string& name, fs::path& dst, const std::string& help) {
  app->add_option_function<std::string>(name, [&dst](const std::string& s) { dst = s; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  cf::cli::RunConfig cfg;
  try {
    if (const auto path = find_config_arg(argc, argv); !path.empty()) cfg = cf::cli::load_run_config(path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"causality-driven infrared/visible image fusion"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON run configuration; flags override its values");
  app.add_option("--seed", cfg.seed, "master seed");
  add_path(&app, "--out", cfg.out, "output file or directory of the command");

  auto& profile = cfg.data.profile.probabilities;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus split");
  gen->add_option("--street", profile[0], "street probability");
  gen->add_option("--cloud", profile[1], "cloud probability");
  gen->add_option("--bush", profile[2], "bush probability");
  gen->add_option("-n,--count", cfg.data.n, "number of pairs");
  gen->add_option("--size", cfg.data.size, "image side in pixels");
  gen->add_option("--split", cfg.data.split, "split name");
  gen->add_option("--balanced", cfg.data.balanced_per_category, "pairs per category (overrides the profile)");

  auto* dict = app.add_subcommand("build-dict", "build a confounder dictionary for one modality");
  add_path(dict, "--corpus", cfg.data.root, "corpus root");
  dict->add_option("--split", cfg.data.split, "split to read");
  dict->add_option("--modality", cfg.dictionary.modality, "visible or infrared");
  dict->add_option("-N,--size", cfg.dictionary.size, "number of dictionary entries");
  dict->add_option("-d,--dim", cfg.dictionary.dim, "PCA dimension");

  auto add_training_flags = [&cfg](CLI::App* cmd) {
    add_path(cmd, "--corpus", cfg.data.root, "corpus root");
    cmd->add_option("--split", cfg.data.split, "training split");
    add_path(cmd, "--dict-vis", cfg.dictionary.visible, "visible dictionary file");
    add_path(cmd, "--dict-ir", cfg.dictionary.infrared, "infrared dictionary file");
    cmd->add_option("--epochs", cfg.train.train.epochs, "training epochs");
    cmd->add_option("--lr", cfg.train.train.lr, "Adam learning rate");
    cmd->add_option("--batch", cfg.train.train.batch_size, "batch size");
    cmd->add_option("--crop", cfg.train.train.crop, "random crop side");
    cmd->add_option("--alpha", cfg.train.loss.alpha, "intensity loss weight");
    cmd->add_option("--beta", cfg.train.loss.beta, "gradient loss weight");
    cmd->add_option("--gamma", cfg.train.loss.gamma, "structure loss weight");
  };

  auto* trn = app.add_subcommand("train", "train a fusion model into a run directory");
  add_training_flags(trn);
  trn->add_flag_function("--no-baffm", [&cfg](std::int64_t) { cfg.model.backdoor = false; },
                         "train without the back-door term");
  trn->add_flag("--resume", cfg.train.resume, "continue from the run directory's checkpoint");

  auto* fuse = app.add_subcommand("fuse", "fuse one infrared/visible pair");
  add_path(fuse, "--checkpoint", cfg.eval.checkpoint, "checkpoint file");
  add_path(fuse, "--ir", cfg.ir, "infrared PGM");
  add_path(fuse, "--vis", cfg.vis, "visible PGM");

  auto* eval = app.add_subcommand("eval", "score a checkpoint on a corpus split");
  add_path(eval, "--checkpoint", cfg.eval.checkpoint, "checkpoint file");
  add_path(eval, "--corpus", cfg.data.root, "corpus root");
  eval->add_option("--split", cfg.data.eval_split, "evaluation split");
  eval->add_option("--categories", cfg.eval.categories, "restrict to these scene categories")->delimiter(',');

  auto* ablate = app.add_subcommand("ablate", "dictionary-size sweep and no-adjustment baseline");
  add_training_flags(ablate);
  ablate->add_option("--eval-split", cfg.data.eval_split, "evaluation split");
  ablate->add_option("--dict-sizes", cfg.ablate.dict_sizes, "comma-separated dictionary sizes")->delimiter(',');
  ablate->add_flag("--no-baffm", cfg.ablate.no_baffm, "add a row trained without the back-door term");
  ablate->add_option("--categories", cfg.eval.categories, "restrict evaluation to these categories")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) cf::cli::cmd_gen_data(cfg);
    else if (dict->parsed()) cf::cli::cmd_build_dict(cfg);
    else if (trn->parsed()) cf::cli::cmd_train(cfg);
    else if (fuse->parsed()) cf::cli::cmd_fuse(cfg);
    else if (eval->parsed()) cf::cli::cmd_eval(cfg);
    else if (ablate->parsed()) cf::cli::cmd_ablate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
