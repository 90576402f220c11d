// Command-line pipeline driver: data generation, contrastive pretraining,
// feature extraction, MIL training, evaluation, diagnostics, and the
// similarity-weight ablation sweep.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wsc/config.hpp"
#include "wsc/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<double> tau;
  std::optional<std::string> mode;
  std::optional<std::string> mil_kind;
  std::optional<std::string> out;
  std::optional<std::size_t> repeats;
};

void attach_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (defaults used if omitted)");
  cmd->add_option("--seed", f.seed, "override the seed relevant to this command");
  cmd->add_option("--alpha", f.alpha, "override the similarity-loss weight");
  cmd->add_option("--tau", f.tau, "override the softmax temperature");
  cmd->add_option("--mode", f.mode, "pretraining objective: simclr|supcon|weaksupcon|similarity-only");
  cmd->add_option("--mil-kind", f.mil_kind, "MIL head: mean|max|abmil|dtfd");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--repeats", f.repeats, "override the repeat count for eval");
}

// Precedence: flags > config file > built-in defaults. --seed applies to the
// seed the subcommand consumes (data seed for gen-data, pretrain seed for
// pretrain/ablate, MIL seed for train-mil/eval).
wsc::RunConfig resolve(const CommonFlags& f, const std::string& command) {
  wsc::RunConfig c =
      f.config_path.empty() ? wsc::RunConfig{} : wsc::load_config_file(f.config_path);
  if (f.alpha) c.pretrain.loss.alpha = *f.alpha;
  if (f.tau) c.pretrain.loss.tau = *f.tau;
  if (f.mode) c.pretrain.mode = wsc::pretrain_mode_from_name(*f.mode);
  if (f.mil_kind) c.mil.kind = wsc::mil_kind_from_name(*f.mil_kind);
  if (f.out) c.out_dir = *f.out;
  if (f.repeats) c.repeats = *f.repeats;
  if (f.seed) {
    if (command == "gen-data") c.synthetic.seed = *f.seed;
    else if (command == "pretrain" || command == "ablate") c.pretrain.seed = *f.seed;
    else if (command == "train-mil" || command == "eval") c.mil_train.seed = *f.seed;
  }
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly supervised contrastive MIL laboratory"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string analyze_split = "train";

  CLI::App* gen = app.add_subcommand("gen-data", "generate the synthetic MIL benchmark");
  CLI::App* pre = app.add_subcommand("pretrain", "contrastive pretraining on the training split");
  CLI::App* ext = app.add_subcommand("extract", "extract frozen embedding and projected features");
  CLI::App* tml = app.add_subcommand("train-mil", "train one MIL head with validation selection");
  CLI::App* evl = app.add_subcommand("eval", "train and evaluate the MIL head over repeat seeds");
  CLI::App* anl = app.add_subcommand("analyze", "anchor cosine and PCA feature diagnostics");
  CLI::App* abl = app.add_subcommand("ablate", "sweep the similarity-loss weight (0.25, 1, 4)");
  for (CLI::App* cmd : {gen, pre, ext, tml, evl, anl, abl}) attach_common(cmd, flags);
  anl->add_option("--split", analyze_split, "which split to analyze (train|val|test)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) wsc::cmd_gen_data(resolve(flags, "gen-data"));
    if (pre->parsed()) wsc::cmd_pretrain(resolve(flags, "pretrain"));
    if (ext->parsed()) wsc::cmd_extract(resolve(flags, "extract"));
    if (tml->parsed()) wsc::cmd_train_mil(resolve(flags, "train-mil"));
    if (evl->parsed()) {
      wsc::EvalOutcome e = wsc::cmd_eval(resolve(flags, "eval"));
      std::cout << "test balanced_accuracy " << e.mean_balanced_accuracy << " +- "
                << e.std_balanced_accuracy << ", accuracy " << e.mean_accuracy << " +- "
                << e.std_accuracy << ", auc " << e.mean_auc << " +- " << e.std_auc << "\n";
    }
    if (anl->parsed()) wsc::cmd_analyze(resolve(flags, "analyze"), analyze_split);
    if (abl->parsed()) wsc::cmd_ablate(resolve(flags, "ablate"));
  } catch (const wsc::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
