#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ctdgan/dataset.hpp"

namespace ctdgan {

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct FoldSplit {
    std::vector<Fold> folds;
    // Classes with fewer members than folds; their rows are still dealt out
    // round-robin, so some test folds miss them entirely.
    std::vector<std::size_t> unstratified_classes;
};

/// Per-class shuffled round-robin assignment of rows to folds. Test index
/// sets partition [0, m); train is the complement, both sorted ascending.
FoldSplit stratified_folds(const Dataset& ds, std::size_t n_folds, std::uint64_t seed);

}  // namespace ctdgan
