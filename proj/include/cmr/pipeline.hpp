#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cmr/config.hpp"

namespace cmr {

/// One case. Segmentations are label volumes (UINT8) or class probability
/// volumes (FLOAT32, last axis = class), either on the cine grid or on the
/// ROI patch grid, in which case they are placed back at the ROI centre.
struct PipelineInputs {
  std::string case_id = "case";
  std::filesystem::path cine;
  std::optional<std::filesystem::path> ed;
  std::optional<std::filesystem::path> es;
  std::optional<std::filesystem::path> gt_ed;
  std::optional<std::filesystem::path> gt_es;
  std::filesystem::path out_dir;
};

struct PipelineResult {
  bool ok = false;
  std::string failed_stage;  // empty on success
  std::string error;
  std::filesystem::path report_path;
  std::string report;  // JSON text as written
};

/// roi -> segmentation -> postproc -> metrics -> features -> predict.
///
/// Artifacts and report.json go to out_dir. On a stage error the report is
/// still written (status "failed", artifacts produced so far are kept) and
/// kPipeline is thrown with the stage name and cause. The report holds no
/// timestamps or absolute paths it was not given, so equal inputs give
/// byte-identical reports.
PipelineResult run_pipeline(const PipelineInputs& in, const PipelineConfig& cfg);

/// Same as run_pipeline but reports a failed stage in the result instead of
/// throwing.
PipelineResult execute_pipeline(const PipelineInputs& in, const PipelineConfig& cfg);

/// CSV manifest with header case_id,cine,ed,es,gt_ed,gt_es (empty cells for
/// missing volumes). Relative paths resolve against the manifest's folder.
std::vector<PipelineInputs> parse_manifest(std::string_view text, const std::filesystem::path& base_dir,
                                           const std::filesystem::path& out_root);

/// Runs the cases on cfg.threads workers. Failures are reported per case,
/// never thrown; the summary lists cases in manifest order.
std::vector<PipelineResult> run_batch(const std::vector<PipelineInputs>& cases, const PipelineConfig& cfg);

}  // namespace cmr
