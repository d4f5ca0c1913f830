#include "ctdgan/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace ctdgan {

DatasetSchema synthetic_schema() {
    DatasetSchema schema;
    schema.columns = {{"x1", ColumnKind::Continuous, {}},
                      {"x2", ColumnKind::Continuous, {}},
                      {"region", ColumnKind::Discrete, {"a", "b", "c"}}};
    schema.target_name = "label";
    schema.class_labels = {"majority", "minority"};
    return schema;
}

Dataset make_synthetic_imbalanced(std::uint64_t seed) {
    using S = SyntheticSpec;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, S::spread);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_region(0, 2);

    struct Row {
        double x1, x2, region;
        std::size_t label;
    };
    std::vector<Row> rows;
    for (std::size_t c = 0; c < S::centers.size(); ++c) {
        for (std::size_t y = 0; y < 2; ++y) {
            const std::size_t count = y == 0 ? S::majority_per_center[c] : S::minority_per_center[c];
            const double shift = y == 0 ? 0.0 : S::minority_offset;
            for (std::size_t i = 0; i < count; ++i) {
                const double x1 = S::centers[c][0] + shift + noise(rng);
                const double x2 = S::centers[c][1] + shift + noise(rng);
                const std::size_t region = unit(rng) < S::region_noise ? any_region(rng) : c;
                rows.push_back({x1, x2, static_cast<double>(region), y});
            }
        }
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    std::vector<double> values;
    std::vector<std::size_t> labels;
    for (const auto& r : rows) {
        values.insert(values.end(), {r.x1, r.x2, r.region});
        labels.push_back(r.label);
    }
    return Dataset(synthetic_schema(), std::move(values), std::move(labels));
}

std::size_t nearest_planted_center(double x1, double x2) {
    std::size_t best = 0;
    double best_d = 0.0;
    for (std::size_t c = 0; c < SyntheticSpec::centers.size(); ++c) {
        const double dx = x1 - SyntheticSpec::centers[c][0];
        const double dy = x2 - SyntheticSpec::centers[c][1];
        const double d = dx * dx + dy * dy;
        if (c == 0 || d < best_d) {
            best = c;
            best_d = d;
        }
    }
    return best;
}

}  // namespace ctdgan
