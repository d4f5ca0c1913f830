#pragma once

#include <array>
#include <cstdint>

#include "ctdgan/dataset.hpp"

namespace ctdgan {

/// Imbalanced benchmark: 600 rows, 500 "majority" and 100 "minority", drawn
/// around three planted centers in (x1, x2) with a discrete "region" column
/// tied to the center. The minority class lives in the first two regions
/// only (60 and 40 rows), offset from the majority inside each region.
struct SyntheticSpec {
    static constexpr std::array<std::array<double, 2>, 3> centers{{{0.0, 0.0}, {6.0, 0.0}, {0.0, 6.0}}};
    static constexpr std::array<std::size_t, 3> majority_per_center{150, 150, 200};
    static constexpr std::array<std::size_t, 3> minority_per_center{60, 40, 0};
    static constexpr double spread = 0.5;
    static constexpr double minority_offset = 1.0;
    static constexpr double region_noise = 0.05;
};

DatasetSchema synthetic_schema();
Dataset make_synthetic_imbalanced(std::uint64_t seed);

/// Index of the planted center nearest to (x1, x2).
std::size_t nearest_planted_center(double x1, double x2);

}  // namespace ctdgan
