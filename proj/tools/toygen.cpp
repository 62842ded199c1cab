// Copyright (c) 2026 The echoone Authors
// SPDX-License-Identifier: Apache-2.0

// Generates small synthetic echo-like datasets in the raw layout the
// harmonize command expects. Handy for demos and smoke runs on machines
// without access to real data.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "../tests/support/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"toygen: synthetic raw datasets for echoone"};
  std::string out = "data/raw";
  int datasets = 2;
  int subjects = 6;
  int frames = 2;
  int size = 64;
  std::uint64_t seed = 1234;
  bool myo_only = false;
  app.add_option("--out", out, "Root directory for the raw datasets")
      ->capture_default_str();
  app.add_option("--datasets", datasets, "Number of datasets")->capture_default_str();
  app.add_option("--subjects", subjects, "Subjects per dataset")->capture_default_str();
  app.add_option("--frames", frames, "Frames per subject and plane")
      ->capture_default_str();
  app.add_option("--size", size, "Image side length")->capture_default_str();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  app.add_flag("--myo-only", myo_only,
               "Write band-only annotations (no cavity label)");
  CLI11_PARSE(app, argc, argv);

  echoone::testsupport::ToyOptions opt;
  opt.size = size;
  opt.subjects = subjects;
  opt.frames_per_plane = frames;
  opt.seed = seed;
  opt.myo_only = myo_only;
  for (int d = 0; d < datasets; ++d) {
    const std::string name = "site" + std::string(1, static_cast<char>('A' + d));
    echoone::testsupport::write_toy_dataset(out, name, opt);
    std::cout << "wrote " << out << "/" << name << "\n";
  }
  return 0;
}
