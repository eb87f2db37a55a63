#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "speedrs/config.hpp"
#include "speedrs/error.hpp"
#include "speedrs/tasks.hpp"

namespace {

int exit_code(speedrs::Errc code) {
  switch (speedrs::category(code)) {
    case speedrs::ErrorCategory::Config: return 2;
    case speedrs::ErrorCategory::Numerical: return 3;
    case speedrs::ErrorCategory::Io: return 4;
  }
  return 1;
}

const char* describe(const std::string& verb) {
  if (verb == "gen-mmd-corpus") return "Simulate bundle pairs and their oracle MMD targets";
  if (verb == "train-approximator") return "Fit the MMD approximator on the corpus";
  if (verb == "gen-task") return "Build reference sets and featurized datasets for a task";
  if (verb == "train") return "Fit the SPEEDRS and baseline regressors";
  if (verb == "evaluate") return "Score trained regressors on the test split";
  if (verb == "oos") return "Sweep a parameter outside the training regime";
  if (verb == "report") return "Collect result tables into one summary";
  if (verb == "simulate") return "Simulate one bundle and write it as PB1";
  if (verb == "gram") return "Signature kernel Gram matrix between two simulated bundles";
  if (verb == "mmd-matrix") return "Second-level MMD Gram blocks between two bundles";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distribution regression on stochastic processes via distances to reference sets"};
  app.require_subcommand(1, 1);

  std::string workdir = ".", config_file, manifest_file, task;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool paper_scale = false;

  std::vector<CLI::App*> verbs;
  for (const auto& name : speedrs::verb_names()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("-w,--workdir", workdir, "Root for every input and output path");
    sub->add_option("-c,--config", config_file, "key = value settings file");
    sub->add_option("-m,--manifest", manifest_file, "Rerun with the settings stored in a manifest");
    sub->add_option("-s,--set", overrides, "Override one setting, key=value (repeatable)");
    sub->add_option("-t,--task", task, "pricing | mixture_estimation | gas_temperature");
    sub->add_option("--seed", seed, "Master seed");
    sub->add_flag("--paper-scale", paper_scale, "Use the paper-scale sizes (hours of compute)");
    verbs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string verb;
  for (auto* v : verbs)
    if (v->parsed()) verb = v->get_name();

  try {
    speedrs::Config cfg;
    if (!manifest_file.empty()) {
      std::string stored;
      cfg = speedrs::config_from_manifest(manifest_file, &stored);
      if (stored != verb) throw speedrs::Error(speedrs::Errc::InvalidConfig, "manifest was written by '" + stored + "'");
    }
    if (!config_file.empty()) cfg.merge(speedrs::Config::load(config_file));
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos || eq == 0)
        throw speedrs::Error(speedrs::Errc::InvalidConfig, "--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    auto* sub = app.get_subcommand(verb);
    if (sub->count("--task")) cfg.set("task", task);
    if (sub->count("--seed")) cfg.set("seed", std::to_string(seed));
    if (paper_scale) cfg.set("paper_scale", "true");

    for (const auto& f : speedrs::run_verb(verb, cfg, workdir)) std::cout << f << '\n';
    return 0;
  } catch (const speedrs::Error& e) {
    std::cerr << "error [" << speedrs::to_string(e.code()) << "]: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
