#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cmr {

namespace detail {
class ByteWriter;
class ByteReader;
}  // namespace detail

/// Dense samples with integer class ids 0..classes-1.
struct Dataset {
  std::vector<std::vector<double>> x;
  std::vector<int> y;

  std::size_t size() const noexcept { return x.size(); }
  std::size_t dims() const noexcept { return x.empty() ? 0 : x.front().size(); }
  /// max label + 1
  int classes() const;
  /// Throws kArgument on ragged rows, negative labels or a length mismatch.
  void validate() const;
  Dataset subset(std::span<const std::size_t> rows) const;
};

using RawRow = std::vector<std::optional<double>>;

/// Median imputation followed by z-scoring. Fitted on training rows only.
struct Scaler {
  std::vector<double> median;
  std::vector<double> mean;
  std::vector<double> stdev;  // zero-variance features get 1

  static Scaler fit(const std::vector<RawRow>& rows);
  std::vector<double> apply(const RawRow& row) const;
  std::vector<std::vector<double>> apply(const std::vector<RawRow>& rows) const;
  std::size_t dims() const noexcept { return mean.size(); }
  Scaler select(std::span<const std::size_t> cols) const;
};

enum class ClassifierKind : std::uint8_t { kGNB = 1, kRF, kMLP, kSVM, kLR, kKNN };

std::string_view classifier_name(ClassifierKind k) noexcept;
ClassifierKind parse_classifier(std::string_view name);

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::kGNB;
  std::uint64_t seed = 0;
  // random forest
  int rf_trees = 1000;
  // multilayer perceptron
  std::vector<int> mlp_hidden{100, 100};
  double mlp_lr = 1e-3;
  int mlp_max_epochs = 2000;
  int mlp_patience = 200;
  double mlp_tol = 1e-6;
  double mlp_l2 = 1e-4;
  // support vector machine; gamma nullopt = 1 / (d * var(X))
  double svm_c = 1.0;
  std::optional<double> svm_gamma;
  double svm_tol = 1e-3;
  // k nearest neighbours
  int knn_k = 5;
  // logistic regression
  double lr_l2 = 1e-4;
  int lr_epochs = 2000;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ClassifierKind kind() const noexcept = 0;
  virtual int classes() const noexcept = 0;
  virtual std::size_t dims() const noexcept = 0;
  virtual int predict(std::span<const double> x) const = 0;
  virtual void write(detail::ByteWriter& w) const = 0;

  double accuracy(const Dataset& ds) const;
};

/// Trains the classifier named by `spec`. Fewer than two classes present
/// raises kTraining.
std::unique_ptr<Classifier> train_classifier(const ClassifierSpec& spec, const Dataset& ds);
void write_classifier(const Classifier& c, detail::ByteWriter& w);
std::unique_ptr<Classifier> read_classifier(detail::ByteReader& r);

// Concrete trainers, exposed for inspection in tests.

struct GaussianNB;
struct RandomForest;
struct Mlp;
struct Svm;

std::unique_ptr<GaussianNB> train_gnb(const Dataset& ds);
std::unique_ptr<RandomForest> train_rf(const Dataset& ds, int trees, std::uint64_t seed);
std::unique_ptr<Mlp> train_mlp(const Dataset& ds, const ClassifierSpec& spec);
std::unique_ptr<Svm> train_svm_rbf(const Dataset& ds, double c, std::optional<double> gamma,
                                   double tol = 1e-3);

struct GaussianNB final : Classifier {
  std::vector<double> log_prior;
  std::vector<std::vector<double>> mean;  // [class][feature]
  std::vector<std::vector<double>> var;
  double var_floor = 0.0;

  ClassifierKind kind() const noexcept override { return ClassifierKind::kGNB; }
  int classes() const noexcept override { return static_cast<int>(mean.size()); }
  std::size_t dims() const noexcept override { return mean.empty() ? 0 : mean[0].size(); }
  int predict(std::span<const double> x) const override;
  std::vector<double> log_posterior(std::span<const double> x) const;  // unnormalised
  void write(detail::ByteWriter& w) const override;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

struct RandomForest final : Classifier {
  int n_classes = 0;
  std::size_t n_features = 0;
  std::vector<std::vector<TreeNode>> trees;
  std::vector<double> importance_mean;   // mean impurity decrease, sums to 1
  std::vector<double> importance_stdev;  // across trees

  ClassifierKind kind() const noexcept override { return ClassifierKind::kRF; }
  int classes() const noexcept override { return n_classes; }
  std::size_t dims() const noexcept override { return n_features; }
  int predict(std::span<const double> x) const override;
  void write(detail::ByteWriter& w) const override;
};

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;
};

struct MlpTrainingLog {
  int epochs = 0;
  double initial_loss = 0.0;
  double best_loss = 0.0;
  bool early_stopped = false;
};

struct Mlp final : Classifier {
  std::vector<DenseLayer> layers;  // ReLU between, softmax after the last
  MlpTrainingLog log;

  ClassifierKind kind() const noexcept override { return ClassifierKind::kMLP; }
  int classes() const noexcept override {
    return layers.empty() ? 0 : static_cast<int>(layers.back().out);
  }
  std::size_t dims() const noexcept override { return layers.empty() ? 0 : layers.front().in; }
  int predict(std::span<const double> x) const override;
  std::vector<double> probabilities(std::span<const double> x) const;
  void write(detail::ByteWriter& w) const override;
};

struct BinarySvm {
  int pos = 0;  // class for positive decision values
  int neg = 0;
  std::vector<std::vector<double>> sv;
  std::vector<double> coef;  // alpha_i * y_i
  double rho = 0.0;
  std::vector<double> alpha;  // dual variables of the support vectors
  int iterations = 0;
};

struct Svm final : Classifier {
  int n_classes = 0;
  std::size_t n_features = 0;
  double gamma = 0.0;
  double c = 1.0;
  std::vector<BinarySvm> machines;  // one per class pair (i < j)

  ClassifierKind kind() const noexcept override { return ClassifierKind::kSVM; }
  int classes() const noexcept override { return n_classes; }
  std::size_t dims() const noexcept override { return n_features; }
  int predict(std::span<const double> x) const override;
  double decision(const BinarySvm& m, std::span<const double> x) const;
  void write(detail::ByteWriter& w) const override;
};

/// Stratified k-fold cross-validation. Each fold fits its own Scaler on the
/// training rows only.
struct CvResult {
  double mean = 0.0;
  double stdev = 0.0;  // population, over folds
  std::vector<double> fold_accuracy;
  std::vector<int> fold_of;  // validation fold per sample
};

CvResult cross_validate(const std::vector<RawRow>& rows, const std::vector<int>& y,
                        const ClassifierSpec& spec, int k = 5, std::uint64_t seed = 0);

/// Fold assignment only; exposed for the partition property.
std::vector<int> stratified_folds(const std::vector<int>& y, int k, std::uint64_t seed);

struct NamedScore {
  std::string name;
  double score = 0.0;
};

/// Names whose score is strictly above `threshold`, in input order.
std::vector<std::string> select_classifiers(const std::vector<NamedScore>& scores,
                                            double threshold = 0.95);

}  // namespace cmr
