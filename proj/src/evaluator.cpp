#include "ctdgan/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <boost/math/special_functions/gamma.hpp>

#include "ctdgan/autodiff.hpp"
#include "ctdgan/error.hpp"
#include "ctdgan/folds.hpp"
#include "ctdgan/model.hpp"
#include "ctdgan/sampler.hpp"
#include "ctdgan/trainer.hpp"

namespace ctdgan {

namespace {

void require_same_length(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::LengthMismatch,
                    "label vectors of length " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
}

struct Confusion {
    std::vector<std::size_t> tp, fp, fn, support;
};

Confusion confusion(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred, std::size_t n) {
    Confusion c{std::vector<std::size_t>(n), std::vector<std::size_t>(n), std::vector<std::size_t>(n),
                std::vector<std::size_t>(n)};
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] >= n || y_pred[i] >= n) throw Error(ErrorCode::IndexOutOfRange, "class index out of range");
        ++c.support[y_true[i]];
        if (y_true[i] == y_pred[i]) {
            ++c.tp[y_true[i]];
        } else {
            ++c.fn[y_true[i]];
            ++c.fp[y_pred[i]];
        }
    }
    return c;
}

double class_f1(const Confusion& c, std::size_t y) {
    const double denom = 2.0 * static_cast<double>(c.tp[y]) + static_cast<double>(c.fp[y] + c.fn[y]);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp[y]) / denom;
}

}  // namespace

std::size_t minority_class(std::span<const std::size_t> labels, std::size_t n_classes) {
    std::vector<std::size_t> counts(n_classes, 0);
    for (auto y : labels) {
        if (y >= n_classes) throw Error(ErrorCode::IndexOutOfRange, "class index out of range");
        ++counts[y];
    }
    std::size_t best = 0;
    for (std::size_t y = 1; y < n_classes; ++y)
        if (counts[y] <= counts[best]) best = y;
    return best;
}

double f1_score(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred, std::size_t n_classes,
                std::optional<std::size_t> positive) {
    require_same_length(y_true, y_pred);
    const Confusion c = confusion(y_true, y_pred, n_classes);
    if (n_classes == 2) {
        const std::size_t pos = positive.value_or(minority_class(y_true, n_classes));
        if (pos >= n_classes) throw Error(ErrorCode::IndexOutOfRange, "positive class out of range");
        return class_f1(c, pos);
    }
    double sum = 0.0;
    for (std::size_t y = 0; y < n_classes; ++y) sum += class_f1(c, y);
    return sum / static_cast<double>(n_classes);
}

double balanced_accuracy(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                         std::size_t n_classes) {
    require_same_length(y_true, y_pred);
    const Confusion c = confusion(y_true, y_pred, n_classes);
    double sum = 0.0;
    for (std::size_t y = 0; y < n_classes; ++y) {
        if (c.support[y] == 0) throw Error(ErrorCode::EmptyClassInTruth, "class " + std::to_string(y) + " has no rows");
        sum += static_cast<double>(c.tp[y]) / static_cast<double>(c.support[y]);
    }
    return sum / static_cast<double>(n_classes);
}

// ── classifiers ────────────────────────────────────────────────────────────

FeatureEncoder::FeatureEncoder(const Dataset& train) : schema_(train.schema()) {
    const std::size_t n = schema_.num_columns();
    lo_.assign(n, std::numeric_limits<double>::infinity());
    hi_.assign(n, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < train.num_rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) {
            lo_[j] = std::min(lo_[j], train.at(i, j));
            hi_[j] = std::max(hi_[j], train.at(i, j));
        }
    for (const auto& col : schema_.columns)
        width_ += col.kind == ColumnKind::Continuous ? 1 : col.categories.size();
}

Matrix FeatureEncoder::encode(const Dataset& ds) const {
    if (ds.schema().fingerprint() != schema_.fingerprint())
        throw Error(ErrorCode::InvalidSchema, "encoder fitted on a different schema");
    Matrix x = Matrix::Zero(static_cast<Eigen::Index>(ds.num_rows()), static_cast<Eigen::Index>(width_));
    for (std::size_t i = 0; i < ds.num_rows(); ++i) {
        Eigen::Index offset = 0;
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < schema_.num_columns(); ++j) {
            const auto& col = schema_.columns[j];
            if (col.kind == ColumnKind::Continuous) {
                x(r, offset++) = hi_[j] > lo_[j] ? (ds.at(i, j) - lo_[j]) / (hi_[j] - lo_[j]) : 0.0;
            } else {
                x(r, offset + static_cast<Eigen::Index>(ds.at(i, j))) = 1.0;
                offset += static_cast<Eigen::Index>(col.categories.size());
            }
        }
    }
    return x;
}

namespace {

ad::Var mlp_logits(const ParamStore& p, const ad::Var& x) {
    ad::Var h = ad::relu(ad::affine(x, p.get("l1.weight"), p.get("l1.bias")));
    h = ad::relu(ad::affine(h, p.get("l2.weight"), p.get("l2.bias")));
    return ad::affine(h, p.get("out.weight"), p.get("out.bias"));
}

}  // namespace

void MlpClassifier::fit(const Matrix& x, std::span<const std::size_t> y, std::size_t n_classes, std::uint64_t seed) {
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw Error(ErrorCode::LengthMismatch, "feature rows and labels differ in length");
    if (y.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a classifier on no rows");
    ad::Rng rng(seed);
    params_ = ParamStore();
    init_affine(params_, "l1", static_cast<std::size_t>(x.cols()), options_.hidden, rng);
    init_affine(params_, "l2", options_.hidden, options_.hidden, rng);
    init_affine(params_, "out", options_.hidden, n_classes, rng);
    const auto vars = params_.trainable_vars();
    const AdamOptions adam{options_.learning_rate, 0.0};

    const std::size_t m = y.size();
    const std::size_t batch = std::min(options_.batch_size, m);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < options_.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < m; start += batch) {
            const std::size_t end = std::min(m, start + batch);
            Matrix xb(static_cast<Eigen::Index>(end - start), x.cols());
            Matrix targets = Matrix::Zero(xb.rows(), static_cast<Eigen::Index>(n_classes));
            for (std::size_t r = start; r < end; ++r) {
                xb.row(static_cast<Eigen::Index>(r - start)) = x.row(static_cast<Eigen::Index>(order[r]));
                targets(static_cast<Eigen::Index>(r - start), static_cast<Eigen::Index>(y[order[r]])) = 1.0;
            }
            const ad::Var loss = ad::cross_entropy(ad::constant(std::move(targets)),
                                                   ad::log_softmax_rows(mlp_logits(params_, ad::constant(xb))));
            std::vector<Matrix> grads;
            for (const auto& g : ad::grad(loss, vars)) grads.push_back(g.value());
            adam_step(params_, grads, adam);
        }
    }
    fitted_ = true;
}

Matrix MlpClassifier::predict_proba(const Matrix& x) const {
    if (!fitted_) throw Error(ErrorCode::NotFitted, "mlp classifier used before fit");
    ad::NoGradGuard no_grad;
    return ad::softmax_rows(mlp_logits(params_, ad::constant(x))).value();
}

std::vector<std::size_t> MlpClassifier::predict(const Matrix& x) const {
    const Matrix p = predict_proba(x);
    std::vector<std::size_t> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i).maxCoeff(&out[static_cast<std::size_t>(i)]);
    return out;
}

void NearestNeighborClassifier::fit(const Matrix& x, std::span<const std::size_t> y, std::size_t, std::uint64_t) {
    if (static_cast<std::size_t>(x.rows()) != y.size())
        throw Error(ErrorCode::LengthMismatch, "feature rows and labels differ in length");
    if (y.empty()) throw Error(ErrorCode::EmptyDataset, "cannot fit a classifier on no rows");
    train_ = x;
    labels_.assign(y.begin(), y.end());
    fitted_ = true;
}

std::vector<std::size_t> NearestNeighborClassifier::predict(const Matrix& x) const {
    if (!fitted_) throw Error(ErrorCode::NotFitted, "1-nn classifier used before fit");
    std::vector<std::size_t> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        Eigen::Index best = 0;
        (train_.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
        out[static_cast<std::size_t>(i)] = labels_[static_cast<std::size_t>(best)];
    }
    return out;
}

std::unique_ptr<Classifier> make_classifier(ClassifierKind kind) {
    if (kind == ClassifierKind::NearestNeighbor) return std::make_unique<NearestNeighborClassifier>();
    return std::make_unique<MlpClassifier>();
}

ClassifierKind parse_classifier_kind(const std::string& name) {
    if (name == "mlp") return ClassifierKind::Mlp;
    if (name == "1nn") return ClassifierKind::NearestNeighbor;
    throw Error(ErrorCode::InvalidConfig, "unknown classifier '" + name + "' (expected mlp or 1nn)");
}

// ── generative methods ─────────────────────────────────────────────────────

Dataset IdentityMethod::balance(const Dataset& train, std::uint64_t) const { return train; }

Dataset IdentityMethod::synthesize(const Dataset& train, std::uint64_t) const { return train; }

Dataset CopyMethod::balance(const Dataset& train, std::uint64_t seed) const {
    const auto counts = train.class_counts();
    const std::size_t majority = *std::max_element(counts.begin(), counts.end());
    std::vector<std::vector<std::size_t>> members(counts.size());
    for (std::size_t i = 0; i < train.num_rows(); ++i) members[train.label(i)].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> extra;
    for (std::size_t y = 0; y < counts.size(); ++y) {
        if (counts[y] == 0 || counts[y] >= majority) continue;
        std::uniform_int_distribution<std::size_t> pick(0, members[y].size() - 1);
        for (std::size_t n = counts[y]; n < majority; ++n) extra.push_back(members[y][pick(rng)]);
    }
    return extra.empty() ? train : train.concat(train.subset(extra));
}

Dataset CopyMethod::synthesize(const Dataset& train, std::uint64_t) const { return train; }

Dataset CtdganMethod::balance(const Dataset& train, std::uint64_t seed) const {
    TrainConfig cfg = config_;
    cfg.seed = seed;
    FittedModel model = ctdgan::train(train, cfg);
    ad::Rng rng(seed ^ 0x5eed5eed5eed5eedull);
    return ctdgan::balance(model, train, rng);
}

Dataset CtdganMethod::synthesize(const Dataset& train, std::uint64_t seed) const {
    TrainConfig cfg = config_;
    cfg.seed = seed;
    FittedModel model = ctdgan::train(train, cfg);
    ad::Rng rng(seed ^ 0x5eed5eed5eed5eedull);
    const auto counts = train.class_counts();
    std::optional<Dataset> out;
    for (std::size_t y = 0; y < counts.size(); ++y) {
        if (counts[y] == 0) continue;
        SampleConditions cond;
        cond.label = y;
        Dataset part = sample(model, counts[y], cond, rng).to_dataset();
        out = out ? out->concat(part) : std::move(part);
    }
    return *out;
}

std::unique_ptr<GenerativeMethod> make_method(const std::string& name, const TrainConfig& config) {
    if (name == "none") return std::make_unique<IdentityMethod>();
    if (name == "copy") return std::make_unique<CopyMethod>();
    if (name == "ctdgan") return std::make_unique<CtdganMethod>(config);
    throw Error(ErrorCode::InvalidConfig, "unknown method '" + name + "' (expected none, copy or ctdgan)");
}

// ── protocols ──────────────────────────────────────────────────────────────

namespace {

struct Unit {
    std::uint64_t seed;
    std::size_t fold;
    const Fold* split;
};

/// Runs fn(i) for every unit on up to `threads` workers. Exceptions are
/// rethrown in unit order.
template <typename Fn>
void for_each_unit(std::size_t n, std::size_t threads, Fn fn) {
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            fn(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::vector<FoldSplit> splits_for(const Dataset& ds, const ExperimentOptions& options, std::vector<Unit>& units) {
    std::vector<FoldSplit> splits;
    splits.reserve(options.seeds.size());
    for (auto seed : options.seeds) splits.push_back(stratified_folds(ds, options.n_folds, seed));
    for (std::size_t s = 0; s < options.seeds.size(); ++s)
        for (std::size_t f = 0; f < options.n_folds; ++f) units.push_back({options.seeds[s], f, &splits[s].folds[f]});
    return splits;
}

std::vector<std::size_t> fit_and_predict(const Dataset& train, const Dataset& test, const ExperimentOptions& options,
                                         std::uint64_t seed) {
    const FeatureEncoder encoder(train);
    std::unique_ptr<Classifier> clf = options.classifier == ClassifierKind::Mlp
                                          ? std::make_unique<MlpClassifier>(options.mlp)
                                          : make_classifier(options.classifier);
    clf->fit(encoder.encode(train), train.labels(), train.schema().num_classes(), seed);
    return clf->predict(encoder.encode(test));
}

/// Mean over folds within each seed, then over seeds; cells are seed-major.
template <typename Get>
double seed_then_fold_mean(std::size_t n_seeds, std::size_t n_folds, Get get) {
    double total = 0.0;
    for (std::size_t s = 0; s < n_seeds; ++s) {
        double fold_sum = 0.0;
        for (std::size_t f = 0; f < n_folds; ++f) fold_sum += get(s * n_folds + f);
        total += fold_sum / static_cast<double>(n_folds);
    }
    return total / static_cast<double>(n_seeds);
}

std::string classifier_name(ClassifierKind kind) { return kind == ClassifierKind::Mlp ? "mlp" : "1nn"; }

void check_options(const ExperimentOptions& options) {
    if (options.seeds.empty()) throw Error(ErrorCode::InvalidConfig, "at least one seed is required");
}

}  // namespace

MetricReport oversampling_experiment(const Dataset& ds, const GenerativeMethod& method,
                                     const ExperimentOptions& options) {
    check_options(options);
    std::vector<Unit> units;
    const auto splits = splits_for(ds, options, units);
    const std::size_t n_classes = ds.schema().num_classes();

    MetricReport report;
    report.dataset = options.dataset_name;
    report.method = method.name();
    report.classifier = classifier_name(options.classifier);
    report.cells.resize(units.size());
    for_each_unit(units.size(), options.threads, [&](std::size_t i) {
        const Unit& u = units[i];
        const Dataset train = ds.subset(u.split->train);
        const Dataset test = ds.subset(u.split->test);
        const std::size_t positive = minority_class(train.labels(), n_classes);
        const Dataset balanced = method.balance(train, u.seed);
        const auto pred = fit_and_predict(balanced, test, options, u.seed);
        report.cells[i] = {u.seed, u.fold, f1_score(test.labels(), pred, n_classes, positive),
                           balanced_accuracy(test.labels(), pred, n_classes)};
    });
    report.mean_f1 = seed_then_fold_mean(options.seeds.size(), options.n_folds,
                                         [&](std::size_t i) { return report.cells[i].f1; });
    report.mean_balanced_accuracy = seed_then_fold_mean(
        options.seeds.size(), options.n_folds, [&](std::size_t i) { return report.cells[i].balanced_accuracy; });
    return report;
}

double percent_difference(double real, double synthetic) {
    if (real == 0.0) throw Error(ErrorCode::DivisionByZeroMetric, "real metric is 0");
    return 100.0 * (synthetic - real) / real;
}

FidelityReport fidelity_experiment(const Dataset& ds, const GenerativeMethod& method,
                                   const ExperimentOptions& options) {
    check_options(options);
    std::vector<Unit> units;
    const auto splits = splits_for(ds, options, units);
    const std::size_t n_classes = ds.schema().num_classes();

    FidelityReport report;
    report.dataset = options.dataset_name;
    report.method = method.name();
    report.classifier = classifier_name(options.classifier);
    report.cells.resize(units.size());
    for_each_unit(units.size(), options.threads, [&](std::size_t i) {
        const Unit& u = units[i];
        const Dataset train = ds.subset(u.split->train);
        const Dataset test = ds.subset(u.split->test);
        const std::size_t positive = minority_class(train.labels(), n_classes);
        const auto real_pred = fit_and_predict(train, test, options, u.seed);
        const Dataset synthetic = method.synthesize(train, u.seed);
        const auto synth_pred = fit_and_predict(synthetic, test, options, u.seed);

        FidelityCell cell;
        cell.seed = u.seed;
        cell.fold = u.fold;
        cell.real_f1 = f1_score(test.labels(), real_pred, n_classes, positive);
        cell.synthetic_f1 = f1_score(test.labels(), synth_pred, n_classes, positive);
        cell.real_balanced_accuracy = balanced_accuracy(test.labels(), real_pred, n_classes);
        cell.synthetic_balanced_accuracy = balanced_accuracy(test.labels(), synth_pred, n_classes);
        if (cell.real_f1 != 0.0) cell.delta_f1 = percent_difference(cell.real_f1, cell.synthetic_f1);
        if (cell.real_balanced_accuracy != 0.0)
            cell.delta_balanced_accuracy =
                percent_difference(cell.real_balanced_accuracy, cell.synthetic_balanced_accuracy);
        report.cells[i] = cell;
    });

    auto mean_defined = [&](auto member) -> std::optional<double> {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& c : report.cells)
            if (const auto& v = c.*member) {
                sum += *v;
                ++n;
            }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    };
    report.mean_delta_f1 = mean_defined(&FidelityCell::delta_f1);
    report.mean_delta_balanced_accuracy = mean_defined(&FidelityCell::delta_balanced_accuracy);
    return report;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const MetricReport& report) {
    auto cells = nlohmann::json::array();
    for (const auto& c : report.cells)
        cells.push_back({{"seed", c.seed}, {"fold", c.fold}, {"f1", c.f1}, {"balanced_accuracy", c.balanced_accuracy}});
    return {{"protocol", "oversampling"},
            {"dataset", report.dataset},
            {"method", report.method},
            {"classifier", report.classifier},
            {"cells", std::move(cells)},
            {"mean", {{"f1", report.mean_f1}, {"balanced_accuracy", report.mean_balanced_accuracy}}}};
}

nlohmann::json to_json(const FidelityReport& report) {
    auto cells = nlohmann::json::array();
    for (const auto& c : report.cells)
        cells.push_back({{"seed", c.seed},
                         {"fold", c.fold},
                         {"real", {{"f1", c.real_f1}, {"balanced_accuracy", c.real_balanced_accuracy}}},
                         {"synthetic", {{"f1", c.synthetic_f1}, {"balanced_accuracy", c.synthetic_balanced_accuracy}}},
                         {"delta_percent",
                          {{"f1", optional_json(c.delta_f1)},
                           {"balanced_accuracy", optional_json(c.delta_balanced_accuracy)}}}});
    return {{"protocol", "fidelity"},
            {"dataset", report.dataset},
            {"method", report.method},
            {"classifier", report.classifier},
            {"cells", std::move(cells)},
            {"mean_delta_percent",
             {{"f1", optional_json(report.mean_delta_f1)},
              {"balanced_accuracy", optional_json(report.mean_delta_balanced_accuracy)}}}};
}

// ── rank statistics ────────────────────────────────────────────────────────

std::vector<double> rank_scores(std::span<const double> scores, bool higher_is_better) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return higher_is_better ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    std::vector<double> ranks(scores.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

std::vector<double> mean_ranks(const Matrix& scores, bool higher_is_better) {
    if (scores.hasNaN()) throw Error(ErrorCode::MissingCell, "score matrix has missing cells");
    if (scores.rows() == 0 || scores.cols() == 0) throw Error(ErrorCode::DegenerateInput, "empty score matrix");
    std::vector<double> sums(static_cast<std::size_t>(scores.rows()), 0.0);
    for (Eigen::Index d = 0; d < scores.cols(); ++d) {
        const Eigen::VectorXd column = scores.col(d);
        const auto ranks = rank_scores({column.data(), static_cast<std::size_t>(column.size())}, higher_is_better);
        for (std::size_t m = 0; m < sums.size(); ++m) sums[m] += ranks[m];
    }
    for (auto& s : sums) s /= static_cast<double>(scores.cols());
    return sums;
}

FriedmanResult friedman_test(const Matrix& scores, bool higher_is_better) {
    const auto k = static_cast<double>(scores.rows());
    const auto n = static_cast<double>(scores.cols());
    if (scores.rows() < 2 || scores.cols() < 2)
        throw Error(ErrorCode::DegenerateInput, "Friedman test needs at least two methods and two datasets");
    FriedmanResult r;
    r.mean_ranks = mean_ranks(scores, higher_is_better);
    double sum_sq = 0.0;
    for (double mr : r.mean_ranks) sum_sq += (mr * n) * (mr * n);
    r.statistic = 12.0 / (n * k * (k + 1.0)) * sum_sq - 3.0 * n * (k + 1.0);
    // Rounding can leave a tiny negative value for all-tied inputs.
    r.statistic = std::max(0.0, r.statistic);
    r.degrees_of_freedom = static_cast<std::size_t>(scores.rows()) - 1;
    const double df = static_cast<double>(r.degrees_of_freedom);
    r.p_value = r.statistic == 0.0 ? 1.0 : boost::math::gamma_q(df / 2.0, r.statistic / 2.0);
    return r;
}

}  // namespace ctdgan
