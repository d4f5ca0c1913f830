#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctdgan/config.hpp"
#include "ctdgan/dataset.hpp"
#include "ctdgan/matrix.hpp"
#include "ctdgan/optim.hpp"

namespace ctdgan {

// ── metrics ────────────────────────────────────────────────────────────────

/// Binary (two classes): F1 of `positive`, defaulting to the rarest class in
/// y_true (ties to the higher index). More classes: unweighted macro mean.
/// A class with no true and no predicted members scores 0. Throws
/// LengthMismatch.
double f1_score(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred, std::size_t n_classes,
                std::optional<std::size_t> positive = std::nullopt);

/// Mean per-class recall. Throws EmptyClassInTruth and LengthMismatch.
double balanced_accuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                         std::size_t n_classes);

/// Rarest class, ties to the higher index.
std::size_t minority_class(std::span<const std::size_t> labels, std::size_t n_classes);

// ── classifiers ────────────────────────────────────────────────────────────

/// Min-max scaling of continuous columns to [0, 1] and one-hot discrete
/// columns, fitted on one dataset and applied to others.
class FeatureEncoder {
public:
    explicit FeatureEncoder(const Dataset& train);
    Matrix encode(const Dataset& ds) const;
    std::size_t width() const noexcept { return width_; }

private:
    DatasetSchema schema_;
    std::vector<double> lo_, hi_;
    std::size_t width_ = 0;
};

class Classifier {
public:
    virtual ~Classifier() = default;
    virtual void fit(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes, std::uint64_t seed) = 0;
    /// Throws NotFitted before fit.
    virtual std::vector<std::size_t> predict(const Matrix& x) const = 0;
    virtual std::string name() const = 0;
};

struct MlpOptions {
    std::size_t hidden = 128;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
};

/// Two relu hidden layers, softmax output, cross-entropy with Adam.
class MlpClassifier final : public Classifier {
public:
    explicit MlpClassifier(MlpOptions options = {}) : options_(options) {}
    void fit(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes, std::uint64_t seed) override;
    std::vector<std::size_t> predict(const Matrix& x) const override;
    /// Class probabilities, one row per input.
    Matrix predict_proba(const Matrix& x) const;
    std::string name() const override { return "mlp"; }

private:
    MlpOptions options_;
    ParamStore params_;
    bool fitted_ = false;
};

/// Euclidean 1-nearest-neighbour; ties go to the earliest training row.
class NearestNeighborClassifier final : public Classifier {
public:
    void fit(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes, std::uint64_t seed) override;
    std::vector<std::size_t> predict(const Matrix& x) const override;
    std::string name() const override { return "1nn"; }

private:
    Matrix train_;
    std::vector<std::size_t> labels_;
    bool fitted_ = false;
};

enum class ClassifierKind { Mlp, NearestNeighbor };
std::unique_ptr<Classifier> make_classifier(ClassifierKind kind);
ClassifierKind parse_classifier_kind(const std::string& name);

// ── generative methods ─────────────────────────────────────────────────────

class GenerativeMethod {
public:
    virtual ~GenerativeMethod() = default;
    virtual std::string name() const = 0;
    /// Training split plus synthetic rows equalizing every class.
    virtual Dataset balance(const Dataset& train, std::uint64_t seed) const = 0;
    /// A new dataset with the size and class counts of `train`.
    virtual Dataset synthesize(const Dataset& train, std::uint64_t seed) const = 0;
};

/// Leaves the data as it is.
class IdentityMethod final : public GenerativeMethod {
public:
    std::string name() const override { return "none"; }
    Dataset balance(const Dataset& train, std::uint64_t seed) const override;
    Dataset synthesize(const Dataset& train, std::uint64_t seed) const override;
};

/// Balances by duplicating random minority rows; synthesizes an exact copy.
class CopyMethod final : public GenerativeMethod {
public:
    std::string name() const override { return "copy"; }
    Dataset balance(const Dataset& train, std::uint64_t seed) const override;
    Dataset synthesize(const Dataset& train, std::uint64_t seed) const override;
};

/// Trains a model on the split (config seed replaced by the run seed) and
/// draws class-conditioned rows from it.
class CtdganMethod final : public GenerativeMethod {
public:
    explicit CtdganMethod(TrainConfig config) : config_(std::move(config)) {}
    std::string name() const override { return "ctdgan"; }
    Dataset balance(const Dataset& train, std::uint64_t seed) const override;
    Dataset synthesize(const Dataset& train, std::uint64_t seed) const override;

private:
    TrainConfig config_;
};

/// "none", "copy" or "ctdgan"; throws InvalidConfig otherwise.
std::unique_ptr<GenerativeMethod> make_method(const std::string& name, const TrainConfig& config);

// ── protocols ──────────────────────────────────────────────────────────────

struct ExperimentOptions {
    std::vector<std::uint64_t> seeds{0, 1, 42};
    std::size_t n_folds = 5;
    ClassifierKind classifier = ClassifierKind::Mlp;
    MlpOptions mlp;
    /// Worker threads over (seed, fold) units; results do not depend on it.
    std::size_t threads = 1;
    std::string dataset_name = "dataset";
};

struct MetricCell {
    std::uint64_t seed = 0;
    std::size_t fold = 0;
    double f1 = 0.0;
    double balanced_accuracy = 0.0;
};

struct MetricReport {
    std::string dataset;
    std::string method;
    std::string classifier;
    std::vector<MetricCell> cells;  // ordered by (seed, fold)
    double mean_f1 = 0.0;           // mean over folds, then over seeds
    double mean_balanced_accuracy = 0.0;
};

/// Per seed and fold: balance the training folds with `method`, fit the
/// classifier on the result, score it on the held-out fold.
MetricReport oversampling_experiment(const Dataset& ds, const GenerativeMethod& method,
                                     const ExperimentOptions& options);

/// 100 * (synthetic - real) / real. Throws DivisionByZeroMetric when real is 0.
double percent_difference(double real, double synthetic);

struct FidelityCell {
    std::uint64_t seed = 0;
    std::size_t fold = 0;
    double real_f1 = 0.0, synthetic_f1 = 0.0;
    double real_balanced_accuracy = 0.0, synthetic_balanced_accuracy = 0.0;
    std::optional<double> delta_f1;  // undefined when the real metric is 0
    std::optional<double> delta_balanced_accuracy;
};

struct FidelityReport {
    std::string dataset;
    std::string method;
    std::string classifier;
    std::vector<FidelityCell> cells;
    /// Mean over the defined cells; undefined when none are.
    std::optional<double> mean_delta_f1;
    std::optional<double> mean_delta_balanced_accuracy;
};

/// Per seed and fold: one classifier trained on the real training split, one
/// (same seed) on a same-size synthetic set; both scored on the real test fold.
FidelityReport fidelity_experiment(const Dataset& ds, const GenerativeMethod& method,
                                   const ExperimentOptions& options);

nlohmann::json to_json(const MetricReport& report);
nlohmann::json to_json(const FidelityReport& report);

// ── rank statistics ────────────────────────────────────────────────────────

/// Ranks within one dataset, 1 = best, ties share the average rank.
std::vector<double> rank_scores(std::span<const double> scores, bool higher_is_better = true);

/// scores: methods x datasets. Throws MissingCell on NaN.
std::vector<double> mean_ranks(const Matrix& scores, bool higher_is_better = true);

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t degrees_of_freedom = 0;
    std::vector<double> mean_ranks;
};

/// scores: methods x datasets. Chi-square statistic on the rank sums with
/// methods - 1 degrees of freedom. Throws DegenerateInput for fewer than two
/// methods or datasets.
FriedmanResult friedman_test(const Matrix& scores, bool higher_is_better = true);

}  // namespace ctdgan
