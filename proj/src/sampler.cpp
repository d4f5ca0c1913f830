#include "ctdgan/sampler.hpp"

#include <algorithm>
#include <random>

#include "ctdgan/error.hpp"

namespace ctdgan {

void validate_conditions(const DatasetSchema& schema, const SampleConditions& cond) {
    if (cond.label && *cond.label >= schema.num_classes())
        throw Error(ErrorCode::InvalidCondition, "class index " + std::to_string(*cond.label) + " out of range");
    for (const auto& [col, cat] : cond.discrete) {
        if (col >= schema.num_columns() || schema.columns[col].kind != ColumnKind::Discrete)
            throw Error(ErrorCode::InvalidCondition, "column " + std::to_string(col) + " is not a discrete column");
        if (cat >= schema.columns[col].categories.size())
            throw Error(ErrorCode::InvalidCondition,
                        "category " + std::to_string(cat) + " out of range for '" + schema.columns[col].name + "'");
    }
}

SampleConditions make_conditions(const DatasetSchema& schema, const std::optional<std::string>& label,
                                 const std::vector<std::pair<std::string, std::string>>& where) {
    SampleConditions cond;
    if (label) {
        const auto it = std::find(schema.class_labels.begin(), schema.class_labels.end(), *label);
        if (it == schema.class_labels.end()) throw Error(ErrorCode::InvalidCondition, "unknown class '" + *label + "'");
        cond.label = static_cast<std::size_t>(it - schema.class_labels.begin());
    }
    for (const auto& [name, category] : where) {
        const auto col = std::find_if(schema.columns.begin(), schema.columns.end(),
                                      [&](const ColumnSpec& c) { return c.name == name; });
        if (col == schema.columns.end()) throw Error(ErrorCode::InvalidCondition, "unknown column '" + name + "'");
        if (col->kind != ColumnKind::Discrete)
            throw Error(ErrorCode::InvalidCondition, "column '" + name + "' is not discrete");
        const auto cat = std::find(col->categories.begin(), col->categories.end(), category);
        if (cat == col->categories.end())
            throw Error(ErrorCode::InvalidCondition, "unknown category '" + category + "' for '" + name + "'");
        cond.discrete[static_cast<std::size_t>(col - schema.columns.begin())] =
            static_cast<std::size_t>(cat - col->categories.begin());
    }
    return cond;
}

SamplingModel sampling_model(FittedModel& model) {
    SamplingModel sm;
    sm.pipeline = &model.pipeline;
    sm.probability = &model.probability;
    sm.noise_dim = model.config.latent_dim;
    sm.batch_size = std::max<std::size_t>(1, model.config.batch_size);
    sm.max_attempts_factor = model.config.max_sample_attempts_factor;
    const double tau = model.config.gumbel_temperature;
    GeneratorNet* generator = &model.generator;
    sm.generate = [generator, tau](const Matrix& z, ad::Rng& rng) {
        ad::NoGradGuard no_grad;
        return generator->forward(z, tau, Mode::Eval, rng).rows.value();
    };
    return sm;
}

SampleResult sample(const SamplingModel& model, std::size_t n, const SampleConditions& cond, ad::Rng& rng) {
    if (n == 0) throw Error(ErrorCode::InvalidConfig, "sample size must be >= 1");
    const TransformPipeline& pipe = *model.pipeline;
    const Layout& layout = pipe.layout;
    validate_conditions(pipe.schema, cond);

    SampleResult result;
    result.schema = pipe.schema;
    result.values.reserve(n * pipe.schema.num_columns());

    std::optional<std::discrete_distribution<std::size_t>> cluster_given_class;
    if (cond.label) {
        const auto row = model.probability->row(*cond.label);
        cluster_given_class.emplace(row.begin(), row.end());
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    auto uniform = [&rng](std::size_t width) { return std::uniform_int_distribution<std::size_t>(0, width - 1)(rng); };

    const std::size_t cap = n * model.max_attempts_factor;
    std::size_t matched = 0;
    while (result.num_rows() < n) {
        if (result.attempts >= cap)
            throw Error(ErrorCode::AcceptanceStalled, std::to_string(result.num_rows()) + " of " + std::to_string(n) +
                                                          " rows accepted after " + std::to_string(result.attempts) +
                                                          " attempts");
        const std::size_t b = std::min(model.batch_size, cap - result.attempts);
        Matrix noise(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(model.noise_dim));
        for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = normal(rng);
        std::vector<std::vector<std::size_t>> discrete;
        for (const auto& seg : layout.discrete()) {
            std::vector<std::size_t> col(b);
            const auto fixed = cond.discrete.find(seg.column);
            for (auto& v : col) v = fixed != cond.discrete.end() ? fixed->second : uniform(seg.width);
            discrete.push_back(std::move(col));
        }
        std::vector<std::size_t> labels(b), clusters(b);
        for (std::size_t i = 0; i < b; ++i) {
            if (cond.label) {
                labels[i] = *cond.label;
                clusters[i] = (*cluster_given_class)(rng);
            } else {
                labels[i] = uniform(layout.label().width);
                clusters[i] = uniform(layout.cluster().width);
            }
        }
        const Matrix z = assemble_latent(noise, discrete, clusters, labels, layout);
        const Matrix out = model.generate(z, rng);
        if (out.rows() != z.rows() || static_cast<std::size_t>(out.cols()) != layout.width)
            throw Error(ErrorCode::WidthMismatch, "generator output does not match the layout");

        for (std::size_t i = 0; i < b && result.num_rows() < n; ++i) {
            ++result.attempts;
            const std::span<const double> encoded(out.row(static_cast<Eigen::Index>(i)).data(), layout.width);
            const auto& lb = layout.label();
            if (argmax(encoded.subspan(lb.offset, lb.width)) != labels[i]) continue;
            const InverseRow inv = inverse_transform_row(encoded, pipe);
            result.values.insert(result.values.end(), inv.values.begin(), inv.values.end());
            result.labels.push_back(inv.label);
            result.latent_clusters.push_back(clusters[i]);
            result.generated_clusters.push_back(inv.cluster);
            const bool all_match = std::all_of(cond.discrete.begin(), cond.discrete.end(), [&](const auto& c) {
                return static_cast<std::size_t>(inv.values[c.first]) == c.second;
            });
            if (all_match) ++matched;
        }
    }
    result.discrete_match_rate = static_cast<double>(matched) / static_cast<double>(n);
    return result;
}

SampleResult sample(FittedModel& model, std::size_t n, const SampleConditions& cond, ad::Rng& rng) {
    return sample(sampling_model(model), n, cond, rng);
}

Dataset balance(const SamplingModel& model, const Dataset& ds, ad::Rng& rng) {
    if (ds.schema().fingerprint() != model.pipeline->schema.fingerprint())
        throw Error(ErrorCode::InvalidSchema, "dataset schema differs from the model's");
    const auto counts = ds.class_counts();
    const std::size_t majority = *std::max_element(counts.begin(), counts.end());
    Dataset out = ds;
    for (std::size_t y = 0; y < counts.size(); ++y) {
        if (counts[y] >= majority) continue;
        SampleConditions cond;
        cond.label = y;
        out = out.concat(sample(model, majority - counts[y], cond, rng).to_dataset());
    }
    return out;
}

Dataset balance(FittedModel& model, const Dataset& ds, ad::Rng& rng) { return balance(sampling_model(model), ds, rng); }

}  // namespace ctdgan
