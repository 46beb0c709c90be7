#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "helios/cli/commands.hpp"
#include "helios/cli/run_config.hpp"
#include "helios/core/error.hpp"

namespace {

struct Args {
  std::optional<std::string> config;
  helios::FlagOverrides flags;
  std::string axis;
  bool small = false;
};

void add_common_flags(CLI::App& cmd, Args& a) {
  cmd.add_option("--config", a.config, "key = value configuration file; flags override its entries");
  cmd.add_option("--seed", a.flags.seed, "master seed for data, split, initialisation and training")->default_str("0");
  cmd.add_option("--out", a.flags.out, "output directory")->default_str("out");
  cmd.add_option("--data", a.flags.data, "dataset CSV")->default_str("<out>/dataset.csv");
  cmd.add_option("--checkpoint", a.flags.checkpoint, "model checkpoint")->default_str("<out>/model.ckpt");
  cmd.add_option("--epochs", a.flags.epochs, "training epochs")->default_str("50");
  cmd.add_option("--batch-size", a.flags.batch_size, "mini-batch size")->default_str("128");
  cmd.add_option("--d-eff", a.flags.d_eff, "model width")->default_str("64");
  cmd.add_option("--heads", a.flags.heads, "attention heads (must divide --d-eff)")->default_str("4");
  cmd.add_option("--ff-dim", a.flags.ff_dim, "feed-forward inner width")->default_str("128");
  cmd.add_option("--dropout", a.flags.dropout, "dropout probability")->default_str("0.2");
  cmd.add_option("--lr-max", a.flags.lr_max, "peak learning rate of the one-cycle schedule")->default_str("0.01");
  cmd.add_option("--locations", a.flags.locations, "number of synthetic locations")->default_str("5");
  cmd.add_option("--years", a.flags.years, "years of hourly data per location")->default_str("1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"helios: transformer maximum-power-point voltage prediction for PV modules"};
  app.require_subcommand(1);
  Args args;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"gen-data", "calibrate the module and generate a synthetic hourly dataset"},
      {"train", "train a model and write a checkpoint plus per-epoch metrics"},
      {"eval", "score a checkpoint on the held-out hours"},
      {"lr-find", "run a learning-rate range test"},
      {"sweep", "train one hyperparameter axis at a time and tabulate the results"},
      {"predict", "predict voltage and power for every window of a dataset"},
  };
  for (const auto& s : subs) {
    CLI::App* cmd = app.add_subcommand(s.name, s.help);
    add_common_flags(*cmd, args);
    if (std::string(s.name) == "sweep") {
      cmd->add_option("--axis", args.axis, "d_eff, ff_dim, dropout or heads")->required();
      cmd->add_flag("--small", args.small, "desk-scale run: two locations, 256 windows, one epoch");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    if (rc != 0) std::cerr << "error_code=usage\n";
    return rc == 0 ? 0 : helios::exit_status(helios::ErrorCode::usage);
  }

  try {
    std::optional<std::filesystem::path> config;
    if (args.config) config = *args.config;
    const helios::RunConfig cfg = helios::load_run_config(config, args.flags);
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "gen-data") return helios::run_gen_data(cfg, std::cout, std::cerr);
    if (name == "train") return helios::run_train(cfg, std::cout, std::cerr);
    if (name == "eval") return helios::run_eval(cfg, std::cout, std::cerr);
    if (name == "lr-find") return helios::run_lr_find(cfg, std::cout, std::cerr);
    if (name == "sweep") return helios::run_sweep(cfg, args.axis, args.small, std::cout, std::cerr);
    return helios::run_predict(cfg, std::cout, std::cerr);
  } catch (const helios::Error& e) {
    std::cerr << "error: " << e.what() << "\nerror_code=" << helios::to_string(e.code()) << "\n";
    return helios::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\nerror_code=io\n";
    return helios::exit_status(helios::ErrorCode::io);
  }
}
