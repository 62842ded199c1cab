// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace echoone {

/// Flags shared by every command. `overrides` holds dotted-key assignments
/// ("train.epochs=3"); `seed` rewrites every *.seed key at once.
struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  bool no_lffa = false;
  bool no_pcmask = false;
};

struct HarmonizeArgs {
  CommonArgs common;
};

struct BuildPriorsArgs {
  CommonArgs common;
  std::string manifest_dir;
};

struct TrainArgs {
  CommonArgs common;
  std::string manifest_dir;
  std::string atlas_path;    // optional when prompting is disabled
  std::string encoder_path;  // optional when prompting is disabled
  std::string resume;        // checkpoint to continue from
};

struct EvalArgs {
  CommonArgs common;
  std::string bundle_path;
  std::string atlas_path;
  std::string encoder_path;
  std::string manifest_dir;
};

struct InferArgs {
  CommonArgs common;
  std::string bundle_path;
  std::string atlas_path;
  std::string encoder_path;
  std::vector<std::string> images;
};

/// Each command returns its process exit code: 0 success, 2 input/config
// error, 3 numerical failure. Progress and diagnostics go to `log`.
int run_harmonize(const HarmonizeArgs& args, std::ostream& log);
int run_build_priors(const BuildPriorsArgs& args, std::ostream& log);
int run_train(const TrainArgs& args, std::ostream& log);
int run_eval(const EvalArgs& args, std::ostream& log);
int run_infer(const InferArgs& args, std::ostream& log);

}  // namespace echoone
