#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cmr/classifiers.hpp"
#include "cmr/features.hpp"

namespace cmr {

enum class Disease : std::uint8_t { kNOR = 0, kMINF, kDCM, kHCM, kARV };
inline constexpr int kDiseaseCount = 5;

std::string_view disease_name(Disease d) noexcept;
Disease parse_disease(std::string_view name);

struct EnsembleConfig {
  std::uint64_t seed = 0;
  int cv_folds = 5;
  bool compute_cv = true;
  /// false: all four stage-1 members vote. true: only members whose CV
  /// accuracy is strictly above `selection_threshold` vote.
  bool use_selection = false;
  double selection_threshold = 0.95;
  ClassifierSpec base;  // hyperparameters shared by the members and the expert
};

struct EnsembleMember {
  ClassifierKind kind = ClassifierKind::kGNB;
  std::unique_ptr<Classifier> model;
  std::optional<double> cv_mean;
  std::optional<double> cv_stdev;
  bool active = true;
};

/// Stage-1 SVM, MLP, GNB and RF on all 20 features plus the MINF/DCM expert
/// MLP on the four ES wall-thickness statistics.
struct EnsembleModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  Scaler scaler;
  std::vector<EnsembleMember> members;
  Scaler expert_scaler;
  std::unique_ptr<Classifier> expert;  // null when training lacked MINF or DCM
  std::uint64_t seed = 0;
  bool use_selection = false;
};

EnsembleModel train_ensemble(const std::vector<FeatureRecord>& records,
                             const std::vector<Disease>& labels, const EnsembleConfig& cfg = {});

struct MemberVote {
  std::string name;
  Disease label = Disease::kNOR;
};

struct Prediction {
  Disease label = Disease::kNOR;
  Disease stage1 = Disease::kNOR;
  std::vector<MemberVote> votes;
  bool tie = false;
  bool stage2_fired = false;
  std::optional<Disease> expert_label;
};

/// Majority vote of the active members. Tied labels are resolved in favour
/// of the label backed by the member with the highest CV accuracy (member
/// order when scores are equal or missing). A MINF or DCM outcome is handed
/// to the expert, which decides between those two.
Prediction predict_two_stage(const EnsembleModel& m, const FeatureRecord& f);

/// Stage-1 vote rule in isolation (used by predict_two_stage).
Disease majority_vote(const std::vector<Disease>& votes, const std::vector<std::optional<double>>& cv,
                      bool* tie = nullptr);

std::string serialize_model(const EnsembleModel& m);
EnsembleModel deserialize_model(std::string_view bytes);
void save_model(const EnsembleModel& m, const std::filesystem::path& path);
EnsembleModel load_model(const std::filesystem::path& path);

/// Two-column CSV (case_id,label) with a header row.
std::vector<std::pair<std::string, Disease>> parse_labels_csv(std::string_view text);

}  // namespace cmr
