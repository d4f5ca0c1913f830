#include "ctdgan/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ctdgan/error.hpp"

namespace ctdgan {

ProbabilityMatrix compute_probability_matrix(std::span<const std::size_t> labels,
                                             std::span<const std::size_t> assignments, std::size_t n_classes,
                                             std::size_t k) {
    if (labels.size() != assignments.size())
        throw Error(ErrorCode::LengthMismatch, "labels and cluster assignments differ in length");
    ProbabilityMatrix p;
    p.counts.assign(n_classes, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] >= n_classes || assignments[i] >= k)
            throw Error(ErrorCode::IndexOutOfRange, "label or cluster index out of range at row " + std::to_string(i));
        ++p.counts[labels[i]][assignments[i]];
    }
    p.probs = Matrix::Zero(static_cast<Eigen::Index>(n_classes), static_cast<Eigen::Index>(k));
    for (std::size_t y = 0; y < n_classes; ++y) {
        const auto total = std::accumulate(p.counts[y].begin(), p.counts[y].end(), std::size_t{0});
        if (total == 0) throw Error(ErrorCode::EmptyClass, "class " + std::to_string(y) + " has no rows");
        for (std::size_t u = 0; u < k; ++u)
            p.probs(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(u)) =
                static_cast<double>(p.counts[y][u]) / static_cast<double>(total);
    }
    return p;
}

nlohmann::json probability_matrix_to_json(const ProbabilityMatrix& p) {
    return {{"probs", matrix_to_json(p.probs)}, {"counts", p.counts}};
}

ProbabilityMatrix probability_matrix_from_json(const nlohmann::json& j) {
    ProbabilityMatrix p;
    p.probs = matrix_from_json(j.at("probs"));
    p.counts = j.at("counts").get<std::vector<std::vector<std::size_t>>>();
    return p;
}

Matrix one_hot(std::span<const std::size_t> indices, std::size_t width) {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(width));
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= width) throw Error(ErrorCode::IndexOutOfRange, "one-hot index out of range");
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(indices[i])) = 1.0;
    }
    return out;
}

Matrix assemble_latent(const Matrix& noise, const std::vector<std::vector<std::size_t>>& discrete,
                       std::span<const std::size_t> cluster, std::span<const std::size_t> label,
                       const Layout& layout) {
    const auto rows = noise.rows();
    const auto disc = layout.discrete();
    if (discrete.size() != disc.size())
        throw Error(ErrorCode::DimensionMismatch, "latent discrete blocks do not match the layout");
    if (static_cast<Eigen::Index>(cluster.size()) != rows || static_cast<Eigen::Index>(label.size()) != rows)
        throw Error(ErrorCode::LengthMismatch, "latent label vectors do not match the batch");
    Matrix z = Matrix::Zero(rows, static_cast<Eigen::Index>(latent_width(layout, noise.cols())));
    z.leftCols(noise.cols()) = noise;
    auto offset = noise.cols();
    auto put = [&](std::span<const std::size_t> idx, std::size_t width) {
        if (static_cast<Eigen::Index>(idx.size()) != rows)
            throw Error(ErrorCode::LengthMismatch, "latent block does not match the batch");
        for (Eigen::Index i = 0; i < rows; ++i) {
            const auto v = idx[static_cast<std::size_t>(i)];
            if (v >= width) throw Error(ErrorCode::IndexOutOfRange, "latent index out of range");
            z(i, offset + static_cast<Eigen::Index>(v)) = 1.0;
        }
        offset += static_cast<Eigen::Index>(width);
    };
    for (std::size_t d = 0; d < disc.size(); ++d) put(discrete[d], disc[d].width);
    put(cluster, layout.cluster().width);
    put(label, layout.label().width);
    return z;
}

LatentBatch sample_latent_batch(std::size_t batch, const Layout& layout, std::size_t noise_dim, ad::Rng& rng) {
    if (batch == 0) throw Error(ErrorCode::InvalidConfig, "latent batch must be non-empty");
    LatentBatch lb;
    std::normal_distribution<double> normal(0.0, 1.0);
    lb.noise.resize(static_cast<Eigen::Index>(batch), static_cast<Eigen::Index>(noise_dim));
    for (Eigen::Index i = 0; i < lb.noise.size(); ++i) lb.noise.data()[i] = normal(rng);
    auto draw = [&](std::size_t width) {
        std::uniform_int_distribution<std::size_t> pick(0, width - 1);
        std::vector<std::size_t> out(batch);
        for (auto& v : out) v = pick(rng);
        return out;
    };
    for (const auto& seg : layout.discrete()) lb.discrete.push_back(draw(seg.width));
    lb.cluster = draw(layout.cluster().width);
    lb.label = draw(layout.label().width);
    lb.z = assemble_latent(lb.noise, lb.discrete, lb.cluster, lb.label, layout);
    return lb;
}

LatentBatch sample_latent_batch(std::size_t batch, const DatasetSchema& schema, std::size_t k, std::size_t noise_dim,
                                ad::Rng& rng) {
    return sample_latent_batch(batch, make_layout(schema, k), noise_dim, rng);
}

ad::Var gradient_penalty(const Matrix& packed_interpolates, const CriticNet& critic, double gp_lambda, ad::Rng& rng,
                         Mode mode) {
    const ad::Var x = ad::parameter(packed_interpolates);
    const ad::Var scores = critic.forward_packed(x, mode, rng);
    // Packs are scored independently, so the gradient of the sum holds each
    // pack's own input gradient in its row.
    const ad::Var g = ad::input_gradient(ad::sum_all(scores), x);
    const ad::Var deviation = ad::add_scalar(ad::row_norm(g), -1.0);
    return ad::scale(ad::mean_all(ad::square(deviation)), gp_lambda);
}

CriticLossTerms critic_loss(const ad::Var& real, const ad::Var& fake, const CriticNet& critic, double gp_lambda,
                            ad::Rng& rng, Mode mode) {
    if (real.rows() != fake.rows() || real.cols() != fake.cols())
        throw Error(ErrorCode::ShapeMismatch, "real and fake batches differ in shape");
    CriticLossTerms t;
    t.fake_score = ad::mean_all(critic.forward(fake, mode, rng));
    t.real_score = ad::mean_all(critic.forward(real, mode, rng));

    Matrix real_packed, fake_packed;
    {
        ad::NoGradGuard no_grad;
        real_packed = critic.pack(real).value();
        fake_packed = critic.pack(fake).value();
    }
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd eps(real_packed.rows());
    for (Eigen::Index p = 0; p < eps.size(); ++p) eps(p) = unit(rng);
    const Matrix interpolates =
        eps.asDiagonal() * real_packed + (Eigen::VectorXd::Ones(eps.size()) - eps).asDiagonal() * fake_packed;
    t.gradient_penalty = gradient_penalty(interpolates, critic, gp_lambda, rng, mode);
    t.total = ad::add(ad::sub(t.fake_score, t.real_score), t.gradient_penalty);
    return t;
}

ad::Var cluster_loss(std::span<const std::size_t> latent_clusters, const ad::Var& log_probs, std::size_t k,
                     double beta) {
    if (k <= 1) return ad::scalar_constant(0.0);
    const ad::Var targets = ad::constant(one_hot(latent_clusters, k));
    const ad::Var h = k == 2 ? ad::binary_cross_entropy(targets, log_probs) : ad::cross_entropy(targets, log_probs);
    return ad::scale(h, 1.0 + beta);
}

double update_beta(std::span<const std::size_t> latent_clusters, const Matrix& cluster_probs) {
    if (latent_clusters.empty()) throw Error(ErrorCode::InvalidConfig, "beta needs a non-empty batch");
    if (static_cast<Eigen::Index>(latent_clusters.size()) != cluster_probs.rows())
        throw Error(ErrorCode::LengthMismatch, "cluster labels and head outputs differ in length");
    std::size_t mismatched = 0;
    for (std::size_t i = 0; i < latent_clusters.size(); ++i) {
        const auto row = cluster_probs.row(static_cast<Eigen::Index>(i));
        if (argmax({row.data(), static_cast<std::size_t>(row.size())}) != latent_clusters[i]) ++mismatched;
    }
    return static_cast<double>(mismatched) / static_cast<double>(latent_clusters.size());
}

ad::Var class_loss(std::span<const std::size_t> latent_labels, const ad::Var& log_probs, std::size_t n_classes) {
    const ad::Var targets = ad::constant(one_hot(latent_labels, n_classes));
    const ad::Var h =
        n_classes == 2 ? ad::binary_cross_entropy(targets, log_probs) : ad::cross_entropy(targets, log_probs);
    return ad::scale(h, 2.0);
}

GeneratorLossTerms generator_loss(const LatentBatch& latent, const GeneratorOutput& fake, const CriticNet& critic,
                                  double beta, ad::Rng& rng, Mode critic_mode) {
    if (latent.discrete.size() + 3 != fake.probs.size())
        throw Error(ErrorCode::DimensionMismatch, "latent batch does not match generator heads");
    GeneratorLossTerms t;
    t.adversarial = ad::neg(ad::mean_all(critic.forward(fake.rows, critic_mode, rng)));
    ad::Var total = t.adversarial;
    for (std::size_t d = 0; d < latent.discrete.size(); ++d) {
        const ad::Var& lp = fake.log_probs[d + 1];
        const ad::Var targets = ad::constant(one_hot(latent.discrete[d], static_cast<std::size_t>(lp.cols())));
        t.discrete.push_back(ad::cross_entropy(targets, lp));
        total = ad::add(total, t.discrete.back());
    }
    const ad::Var& cluster_lp = fake.log_probs[fake.log_probs.size() - 2];
    const ad::Var& label_lp = fake.log_probs.back();
    t.cluster = cluster_loss(latent.cluster, cluster_lp, static_cast<std::size_t>(cluster_lp.cols()), beta);
    t.label = class_loss(latent.label, label_lp, static_cast<std::size_t>(label_lp.cols()));
    t.total = ad::add(ad::add(total, t.cluster), t.label);
    return t;
}

std::size_t effective_batch_size(const TrainConfig& cfg, std::size_t m) {
    if (m < cfg.pac)
        throw Error(ErrorCode::InvalidConfig,
                    std::to_string(m) + " rows cannot fill one pack of " + std::to_string(cfg.pac));
    const std::size_t b = std::min(cfg.batch_size, m);
    return b - b % cfg.pac;
}

namespace {

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

std::vector<Matrix> values_of(const std::vector<ad::Var>& grads) {
    std::vector<Matrix> out;
    out.reserve(grads.size());
    for (const auto& g : grads) out.push_back(g.value());
    return out;
}

}  // namespace

FittedModel train(const Dataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    const std::size_t m = ds.num_rows();
    FittedModel fm;
    fm.schema = ds.schema();
    fm.config = cfg;
    fm.batch_size = effective_batch_size(cfg, m);

    const Matrix features = build_cluster_features(ds);
    fm.clusters = select_k(features, cfg.k_max, cfg.inertia_penalty, cfg.seed, cfg.kmeans_max_iter);
    fm.pipeline = fit_transform_pipeline(ds, fm.clusters);
    fm.probability = compute_probability_matrix(ds.labels(), fm.clusters.assignments, fm.schema.num_classes(),
                                                fm.clusters.k);
    const Matrix real_all = transform_dataset(ds, fm.clusters.assignments, fm.pipeline);

    fm.generator = GeneratorNet(fm.pipeline.layout, cfg.latent_dim, cfg.hidden_width, stream_seed(cfg.seed, 1));
    fm.critic = CriticNet(fm.pipeline.layout.width, cfg.pac, cfg.hidden_width, stream_seed(cfg.seed, 2));
    ad::Rng rng(stream_seed(cfg.seed, 3));

    const AdamOptions adam{cfg.learning_rate, cfg.weight_decay};
    const std::size_t batch = fm.batch_size;
    const std::size_t steps_per_epoch = std::max<std::size_t>(1, m / batch);
    const auto generator_vars = fm.generator.params().trainable_vars();
    const auto critic_vars = fm.critic.params().trainable_vars();
    std::vector<std::size_t> order(m);
    double beta = 0.0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        double critic_sum = 0.0, generator_sum = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            double critic_value = 0.0, generator_value = 0.0;
            try {
                Matrix real_batch(static_cast<Eigen::Index>(batch), real_all.cols());
                for (std::size_t r = 0; r < batch; ++r)
                    real_batch.row(static_cast<Eigen::Index>(r)) =
                        real_all.row(static_cast<Eigen::Index>(order[step * batch + r]));
                const ad::Var real = ad::constant(real_batch);

                for (std::size_t c = 0; c < cfg.critic_steps_per_generator_step; ++c) {
                    const LatentBatch latent = sample_latent_batch(batch, fm.pipeline.layout, cfg.latent_dim, rng);
                    Matrix fake_value;
                    {
                        ad::NoGradGuard no_grad;
                        fake_value = fm.generator.forward(latent.z, cfg.gumbel_temperature, Mode::Train, rng)
                                         .rows.value();
                    }
                    const auto terms = critic_loss(real, ad::constant(fake_value), fm.critic, cfg.gp_lambda, rng);
                    critic_value = terms.total.item();
                    if (!std::isfinite(critic_value)) throw Error(ErrorCode::NonFiniteIntermediate, "critic loss");
                    adam_step(fm.critic.params(), values_of(ad::grad(terms.total, critic_vars)), adam);
                }

                const LatentBatch latent = sample_latent_batch(batch, fm.pipeline.layout, cfg.latent_dim, rng);
                const GeneratorOutput fake =
                    fm.generator.forward(latent.z, cfg.gumbel_temperature, Mode::Train, rng);
                const auto terms = generator_loss(latent, fake, fm.critic, beta, rng);
                generator_value = terms.total.item();
                if (!std::isfinite(generator_value)) throw Error(ErrorCode::NonFiniteIntermediate, "generator loss");
                adam_step(fm.generator.params(), values_of(ad::grad(terms.total, generator_vars)), adam);
                beta = update_beta(latent.cluster, fake.probs[fake.probs.size() - 2].value());
            } catch (const Error& e) {
                if (e.code() != ErrorCode::NonFiniteIntermediate) throw;
                throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch " +
                                                          std::to_string(step) + ": " + e.what());
            }
            fm.history.critic_per_batch.push_back(critic_value);
            fm.history.generator_per_batch.push_back(generator_value);
            fm.history.beta_per_batch.push_back(beta);
            critic_sum += critic_value;
            generator_sum += generator_value;
        }
        const double n = static_cast<double>(steps_per_epoch);
        fm.history.critic_per_epoch.push_back(critic_sum / n);
        fm.history.generator_per_epoch.push_back(generator_sum / n);
        if (on_epoch) on_epoch({epoch, critic_sum / n, generator_sum / n, beta});
    }
    fm.beta = beta;
    return fm;
}

}  // namespace ctdgan
