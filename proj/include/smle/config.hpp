// Copyright 2026 The SMLE Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// JSON run configuration. Every key is optional; unknown keys are errors.
// The schema is documented in docs/config.md.

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "smle/data.hpp"
#include "smle/pipeline.hpp"

namespace smle {

struct RunConfig {
  TrainConfig train;
  SynthSpec synth;
  std::filesystem::path manifest;    // corpus.manifest
  std::filesystem::path output_dir = "runs";
  int eval_mixtures = 1000;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j,
                             const std::filesystem::path& base_dir = {});
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Applies SMLE_SEED from the environment when set.
void apply_seed_env(RunConfig& config);

/// "16x2" -> {16, 16}; "64,32" -> {64, 32}.
std::vector<int> parse_architecture(const std::string& text);

}  // namespace smle
