#include "ctdgan/folds.hpp"

#include <algorithm>
#include <random>

#include "ctdgan/error.hpp"

namespace ctdgan {

FoldSplit stratified_folds(const Dataset& ds, std::size_t n_folds, std::uint64_t seed) {
    const std::size_t m = ds.num_rows();
    if (n_folds < 2) throw Error(ErrorCode::InvalidConfig, "need at least 2 folds");
    if (n_folds > m)
        throw Error(ErrorCode::FoldCountExceedsRows,
                    std::to_string(n_folds) + " folds for " + std::to_string(m) + " rows");

    std::vector<std::vector<std::size_t>> by_class(ds.schema().num_classes());
    for (std::size_t i = 0; i < m; ++i) by_class[ds.label(i)].push_back(i);

    std::mt19937_64 rng(seed);
    FoldSplit split;
    std::vector<std::vector<std::size_t>> test(n_folds);
    // The running offset keeps fold sizes within one of each other across classes.
    std::size_t offset = 0;
    for (std::size_t y = 0; y < by_class.size(); ++y) {
        auto& members = by_class[y];
        if (members.empty()) continue;
        if (members.size() < n_folds) split.unstratified_classes.push_back(y);
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t t = 0; t < members.size(); ++t) test[(offset + t) % n_folds].push_back(members[t]);
        offset = (offset + members.size()) % n_folds;
    }

    for (auto& t : test) {
        std::sort(t.begin(), t.end());
        Fold fold;
        fold.train.reserve(m - t.size());
        std::size_t k = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (k < t.size() && t[k] == i) {
                ++k;
                continue;
            }
            fold.train.push_back(i);
        }
        fold.test = std::move(t);
        split.folds.push_back(std::move(fold));
    }
    return split;
}

}  // namespace ctdgan
