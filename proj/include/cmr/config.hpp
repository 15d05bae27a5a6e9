#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cmr/augment.hpp"
#include "cmr/diagnosis.hpp"
#include "cmr/features.hpp"
#include "cmr/loss.hpp"
#include "cmr/netgraph.hpp"
#include "cmr/postprocess.hpp"
#include "cmr/roi.hpp"

namespace cmr {

/// Flat key = value settings shared by every command. Sources apply in the
/// order defaults < config file < CMR_* environment < command-line --set.
struct PipelineConfig {
  RoiConfig roi;
  LossConfig loss;
  int weight_dilate = 1;
  bool postproc = true;
  PostprocessOptions post;
  FeatureOptions features;
  AugmentBounds augment;
  bool augment_flips = false;
  EnsembleConfig ensemble;
  std::string model_path;
  NetConfig net;
  int threads = 1;  // batch pipeline workers

  /// Unknown keys and unparsable values raise kConfig naming the key.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  /// Every key with its current value, in documentation order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// Range checks of the nested configs, as kConfig.
  void validate() const;
};

struct ConfigKey {
  std::string_view name;
  std::string_view help;
};

const std::vector<ConfigKey>& config_keys();

/// "roi.patch_size" -> "CMR_ROI_PATCH_SIZE".
std::string env_var_name(std::string_view key);

/// Lines are `key = value`; '#' starts a comment and blank lines are
/// ignored. `origin` prefixes error messages.
void apply_config_text(PipelineConfig& cfg, std::string_view text, const std::string& origin = "<config>");
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& path);

/// Applies (NAME, value) pairs whose NAME starts with CMR_. A CMR_ name that
/// maps to no key is rejected.
void apply_environment(PipelineConfig& cfg, const std::vector<std::pair<std::string, std::string>>& env);
/// Snapshot of the process environment as (NAME, value) pairs.
std::vector<std::pair<std::string, std::string>> process_environment();

/// `key=value` as given to --set.
void apply_assignment(PipelineConfig& cfg, std::string_view assignment);

/// Text form accepted by apply_config_text.
std::string dump_config(const PipelineConfig& cfg);

}  // namespace cmr
