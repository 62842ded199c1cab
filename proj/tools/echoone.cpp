// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <echoone/cli/commands.hpp>

namespace {

void add_common(CLI::App* cmd, echoone::CommonArgs* common) {
  cmd->add_option("--config", common->config_path,
                  "Run configuration file (key = value lines)");
  cmd->add_option("--set", common->overrides,
                  "Override a config key, e.g. --set train.epochs=20")
      ->type_name("KEY=VALUE");
  cmd->add_option("--out", common->out, "Output directory")
      ->capture_default_str();
  cmd->add_flag("--no-lffa", common->no_lffa,
                "Disable local feature fusion in the decoder");
  cmd->add_flag("--no-pcmask", common->no_pcmask,
                "Disable the prior-conditioned mask prompt");
  // Callback form: the optional stays empty unless the flag was given.
  cmd->add_option_function<std::uint64_t>(
      "--seed", [common](const std::uint64_t& v) { common->seed = v; },
      "Override every seed in the config");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"echoone: multi-plane echocardiography segmentation"};
  app.require_subcommand(1);

  echoone::HarmonizeArgs harmonize;
  auto* cmd_harmonize = app.add_subcommand(
      "harmonize", "Convert raw datasets to the unified label space");
  add_common(cmd_harmonize, &harmonize.common);

  echoone::BuildPriorsArgs priors;
  auto* cmd_priors = app.add_subcommand(
      "build-priors", "Train the latent encoder and cluster a prior atlas");
  add_common(cmd_priors, &priors.common);
  cmd_priors
      ->add_option("--manifests", priors.manifest_dir,
                   "Directory with train/val/test manifests")
      ->required();

  echoone::TrainArgs train;
  auto* cmd_train =
      app.add_subcommand("train", "Train the segmentation model");
  add_common(cmd_train, &train.common);
  cmd_train
      ->add_option("--manifests", train.manifest_dir,
                   "Directory with train/val/test manifests")
      ->required();
  cmd_train->add_option("--atlas", train.atlas_path, "Prior atlas archive");
  cmd_train->add_option("--encoder", train.encoder_path,
                        "Latent encoder archive");
  cmd_train->add_option("--resume", train.resume,
                        "Checkpoint archive to continue from");

  echoone::EvalArgs eval;
  auto* cmd_eval =
      app.add_subcommand("eval", "Evaluate a trained bundle on a split");
  add_common(cmd_eval, &eval.common);
  cmd_eval->add_option("--bundle", eval.bundle_path, "Model bundle archive")
      ->required();
  cmd_eval
      ->add_option("--manifests", eval.manifest_dir,
                   "Directory with train/val/test manifests")
      ->required();
  cmd_eval->add_option("--atlas", eval.atlas_path, "Prior atlas archive");
  cmd_eval->add_option("--encoder", eval.encoder_path,
                       "Latent encoder archive");

  echoone::InferArgs infer;
  auto* cmd_infer =
      app.add_subcommand("infer", "Segment individual images");
  add_common(cmd_infer, &infer.common);
  cmd_infer->add_option("--bundle", infer.bundle_path, "Model bundle archive")
      ->required();
  cmd_infer->add_option("--atlas", infer.atlas_path, "Prior atlas archive");
  cmd_infer->add_option("--encoder", infer.encoder_path,
                        "Latent encoder archive");
  cmd_infer->add_option("images", infer.images, "Input images (PNG or MHD)")
      ->required();

  CLI11_PARSE(app, argc, argv);

  if (cmd_harmonize->parsed()) return echoone::run_harmonize(harmonize, std::cout);
  if (cmd_priors->parsed()) return echoone::run_build_priors(priors, std::cout);
  if (cmd_train->parsed()) return echoone::run_train(train, std::cout);
  if (cmd_eval->parsed()) return echoone::run_eval(eval, std::cout);
  return echoone::run_infer(infer, std::cout);
}
