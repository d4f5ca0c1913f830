#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ctdgan/trainer.hpp"

namespace ctdgan {

struct SampleConditions {
    std::optional<std::size_t> label;
    std::map<std::size_t, std::size_t> discrete;  // schema column index -> category index
};

/// Resolves label and column=category strings against the schema. Throws
/// InvalidCondition for unknown classes, non-discrete or unknown columns,
/// and unknown categories.
SampleConditions make_conditions(const DatasetSchema& schema, const std::optional<std::string>& label,
                                 const std::vector<std::pair<std::string, std::string>>& where);
void validate_conditions(const DatasetSchema& schema, const SampleConditions& cond);

/// Everything the rejection sampler needs. `generate` maps a latent batch to
/// encoded rows in the pipeline layout.
struct SamplingModel {
    const TransformPipeline* pipeline = nullptr;
    const ProbabilityMatrix* probability = nullptr;
    std::size_t noise_dim = 0;
    std::size_t batch_size = 100;
    std::size_t max_attempts_factor = 100;
    std::function<Matrix(const Matrix& z, ad::Rng& rng)> generate;
};

/// Eval-mode generator of a fitted model. The returned object refers to
/// `model`, which must outlive it.
SamplingModel sampling_model(FittedModel& model);

struct SampleResult {
    DatasetSchema schema;
    std::vector<double> values;  // row-major, schema columns
    std::vector<std::size_t> labels;
    std::vector<std::size_t> latent_clusters;     // z^u of each accepted row
    std::vector<std::size_t> generated_clusters;  // arg-max of the cluster head
    std::size_t attempts = 0;
    /// Fraction of accepted rows whose discrete heads agree with every
    /// discrete condition; 1 when there are none.
    double discrete_match_rate = 1.0;

    std::size_t num_rows() const noexcept { return labels.size(); }
    Dataset to_dataset() const { return Dataset(schema, values, labels); }
};

/// Rejection sampling: rows are drawn in batches and accepted when the class
/// head's arg-max equals the latent class. With a class condition the latent
/// cluster follows that class's P_s row. Throws AcceptanceStalled after
/// n * max_attempts_factor attempts without n accepted rows.
SampleResult sample(const SamplingModel& model, std::size_t n, const SampleConditions& cond, ad::Rng& rng);
SampleResult sample(FittedModel& model, std::size_t n, const SampleConditions& cond, ad::Rng& rng);

/// Appends class-conditioned rows until every class reaches the majority
/// count. Original rows come first, unchanged.
Dataset balance(const SamplingModel& model, const Dataset& ds, ad::Rng& rng);
Dataset balance(FittedModel& model, const Dataset& ds, ad::Rng& rng);

}  // namespace ctdgan
