#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ctdgan/dataset.hpp"
#include "ctdgan/matrix.hpp"
#include "ctdgan/partitioner.hpp"

namespace ctdgan {

/// Per (cluster, continuous column) value range. Indexed by the continuous
/// column's position among continuous columns, not its schema index.
class ScalerStats {
public:
    ScalerStats() = default;
    ScalerStats(std::size_t k, std::size_t n_continuous);

    std::size_t num_clusters() const noexcept { return k_; }
    std::size_t num_continuous() const noexcept { return n_c_; }

    bool populated(std::size_t u, std::size_t j) const;
    double min(std::size_t u, std::size_t j) const;
    double max(std::size_t u, std::size_t j) const;

    /// Widens the (u, j) range to include v.
    void observe(std::size_t u, std::size_t j, double v);

    bool operator==(const ScalerStats&) const = default;

private:
    std::size_t cell(std::size_t u, std::size_t j) const;

    std::size_t k_ = 0;
    std::size_t n_c_ = 0;
    std::vector<double> min_;
    std::vector<double> max_;
    std::vector<bool> populated_;
};

/// Min-max scaling of v into [-1, 1] using the (u, j) range. A degenerate
/// range maps to 0; values outside the range are clamped.
double scale_continuous(double value, std::size_t u, std::size_t j, const ScalerStats& stats);

/// Inverse of scale_continuous; the input is clamped to [-1, 1] first.
double unscale_continuous(double scaled, std::size_t u, std::size_t j, const ScalerStats& stats);

struct Segment {
    enum class Kind { Continuous, Discrete, Cluster, Class };
    Kind kind;
    std::size_t offset = 0;
    std::size_t width = 0;
    // Schema column index for Discrete segments.
    std::size_t column = 0;

    bool operator==(const Segment&) const = default;
};

/// Segment order: continuous block, one block per discrete column (schema
/// order), cluster one-hot, class one-hot.
struct Layout {
    std::vector<Segment> segments;
    std::size_t width = 0;

    const Segment& continuous() const { return segments.front(); }
    const Segment& cluster() const { return segments[segments.size() - 2]; }
    const Segment& label() const { return segments.back(); }
    /// Discrete segments in schema order.
    std::span<const Segment> discrete() const {
        return {segments.data() + 1, segments.size() - 3};
    }

    bool operator==(const Layout&) const = default;
};

Layout make_layout(const DatasetSchema& schema, std::size_t k);

/// Category lists per discrete column plus the widths of the cluster and
/// class encoders.
struct EncoderMaps {
    std::vector<std::vector<std::string>> discrete_categories;
    std::size_t cluster_width = 0;
    std::vector<std::string> class_labels;

    bool operator==(const EncoderMaps&) const = default;
};

struct TransformPipeline {
    DatasetSchema schema;
    std::size_t k = 1;
    ScalerStats stats;
    EncoderMaps encoders;
    Layout layout;
    std::vector<std::size_t> continuous_columns;  // schema indices
    std::vector<std::size_t> discrete_columns;    // schema indices

    bool operator==(const TransformPipeline&) const = default;
};

TransformPipeline fit_transform_pipeline(const Dataset& ds, const std::vector<std::size_t>& assignments, std::size_t k);
TransformPipeline fit_transform_pipeline(const Dataset& ds, const ClusterModel& clusters);

/// Transformed vector of one raw row (schema column order, discrete cells as
/// category indices) given its cluster and class.
std::vector<double> transform_row(std::span<const double> row, std::size_t u, std::size_t y,
                                  const TransformPipeline& pipe);

/// All rows of `ds`, one transformed vector per row.
Matrix transform_dataset(const Dataset& ds, const std::vector<std::size_t>& assignments,
                         const TransformPipeline& pipe);

struct InverseRow {
    std::vector<double> values;  // schema column order
    std::size_t cluster = 0;
    std::size_t label = 0;
};

/// Arg-max decoding of every one-hot block; continuous values are unscaled
/// with the range of the decoded cluster.
InverseRow inverse_transform_row(std::span<const double> encoded, const TransformPipeline& pipe);

/// Index of the largest entry, ties to the lowest index.
std::size_t argmax(std::span<const double> values);

nlohmann::json pipeline_to_json(const TransformPipeline& pipe);
TransformPipeline pipeline_from_json(const nlohmann::json& j);

}  // namespace ctdgan
