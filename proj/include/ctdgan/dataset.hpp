#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ctdgan {

enum class ColumnKind { Continuous, Discrete };

struct ColumnSpec {
    std::string name;
    ColumnKind kind = ColumnKind::Continuous;
    std::vector<std::string> categories;  // Discrete only, frozen order

    bool operator==(const ColumnSpec&) const = default;
};

/// Feature columns in file order, plus the target column and its class labels.
struct DatasetSchema {
    std::vector<ColumnSpec> columns;
    std::string target_name;
    std::vector<std::string> class_labels;

    bool operator==(const DatasetSchema&) const = default;

    /// Throws InvalidSchema when any structural invariant is violated.
    /// With `require_classes` false an empty class list is accepted (it is
    /// filled in from the data at load time).
    void validate(bool require_classes = true) const;

    std::size_t num_columns() const noexcept { return columns.size(); }
    std::size_t num_classes() const noexcept { return class_labels.size(); }

    /// Indices into `columns`, in file order.
    std::vector<std::size_t> continuous_indices() const;
    std::vector<std::size_t> discrete_indices() const;

    std::size_t category_index(std::size_t column, const std::string& value) const;
    std::size_t class_index(const std::string& label) const;

    /// FNV-1a over the canonical JSON serialization.
    std::uint64_t fingerprint() const;
};

void to_json(nlohmann::json& j, const DatasetSchema& schema);
void from_json(const nlohmann::json& j, DatasetSchema& schema);

/// Row-major table of m rows by n feature columns. Discrete cells hold the
/// category index as an integral double. Immutable after construction.
class Dataset {
public:
    Dataset(DatasetSchema schema, std::vector<double> values, std::vector<std::size_t> labels);

    const DatasetSchema& schema() const noexcept { return schema_; }
    std::size_t num_rows() const noexcept { return labels_.size(); }
    std::size_t num_columns() const noexcept { return schema_.columns.size(); }

    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * num_columns(), num_columns()};
    }
    double at(std::size_t i, std::size_t j) const { return values_[i * num_columns() + j]; }
    std::size_t label(std::size_t i) const { return labels_[i]; }

    const std::vector<double>& values() const noexcept { return values_; }
    const std::vector<std::size_t>& labels() const noexcept { return labels_; }

    std::vector<std::size_t> class_counts() const;

    /// Rows selected by index, in the given order.
    Dataset subset(std::span<const std::size_t> indices) const;

    /// This dataset followed by the rows of `other` (same schema).
    Dataset concat(const Dataset& other) const;

    bool operator==(const Dataset&) const = default;

private:
    DatasetSchema schema_;
    std::vector<double> values_;
    std::vector<std::size_t> labels_;
};

}  // namespace ctdgan
