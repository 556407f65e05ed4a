#include "CLI11.hpp"
#include "smaug/cli/commands.hpp"

#include <iostream>

int main(int argc, char** argv) {
  using namespace smaug::cli;
  CLI::App app{"SMAUG cooperative multi-agent training"};
  app.require_subcommand(1);

  TrainArgs train;
  std::uint64_t seed = 0;
  std::string preset, out_dir;
  auto* train_cmd = app.add_subcommand("train", "train one run per configured seed");
  train_cmd->add_option("--config", train.config_path, "experiment config file")->required();
  auto* seed_opt = train_cmd->add_option("--seed", seed, "train this seed only");
  auto* preset_opt = train_cmd->add_option("--preset", preset, "ablation preset")->check(CLI::IsMember(preset_names()));
  auto* out_opt = train_cmd->add_option("--out", out_dir, "output directory");

  std::string checkpoint;
  int episodes = 32;
  auto* eval_cmd = app.add_subcommand("eval", "greedy evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--episodes", episodes, "episodes to run")->required();

  std::string diag_out;
  auto* diag_cmd = app.add_subcommand("diagnose", "attention and subtask-recognition diagnostics");
  diag_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  diag_cmd->add_option("--episodes", episodes, "episodes to run")->required();
  auto* diag_out_opt = diag_cmd->add_option("--out", diag_out, "output directory (default: checkpoint directory)");

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks over every network");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  if (*train_cmd) {
    if (*seed_opt) train.seed = seed;
    if (*preset_opt) train.preset = preset;
    if (*out_opt) train.out_dir = out_dir;
    return cmd_train(train, std::cout, std::cerr);
  }
  if (*eval_cmd) return cmd_eval(checkpoint, episodes, std::cout, std::cerr);
  if (*diag_cmd) {
    std::optional<std::filesystem::path> dir;
    if (*diag_out_opt) dir = diag_out;
    return cmd_diagnose(checkpoint, episodes, dir, std::cout, std::cerr);
  }
  if (*grad_cmd) return cmd_gradcheck(std::cout);
  return kExitInvalid;
}
