#include "ctdgan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ctdgan/error.hpp"

namespace ctdgan {

namespace {

std::string kind_name(ColumnKind kind) {
    return kind == ColumnKind::Continuous ? "continuous" : "discrete";
}

ColumnKind parse_kind(const std::string& s) {
    if (s == "continuous") return ColumnKind::Continuous;
    if (s == "discrete") return ColumnKind::Discrete;
    throw Error(ErrorCode::InvalidSchema, "unknown column kind '" + s + "'");
}

}  // namespace

void DatasetSchema::validate(bool require_classes) const {
    std::set<std::string> seen;
    for (const auto& col : columns) {
        if (col.name.empty()) throw Error(ErrorCode::InvalidSchema, "empty column name");
        if (!seen.insert(col.name).second)
            throw Error(ErrorCode::InvalidSchema, "duplicate column '" + col.name + "'");
        if (col.kind == ColumnKind::Discrete) {
            if (col.categories.empty())
                throw Error(ErrorCode::InvalidSchema, "discrete column '" + col.name + "' has no categories");
            std::set<std::string> cats(col.categories.begin(), col.categories.end());
            if (cats.size() != col.categories.size())
                throw Error(ErrorCode::InvalidSchema, "duplicate category in '" + col.name + "'");
        } else if (!col.categories.empty()) {
            throw Error(ErrorCode::InvalidSchema, "continuous column '" + col.name + "' lists categories");
        }
    }
    if (target_name.empty()) throw Error(ErrorCode::InvalidSchema, "missing target name");
    if (seen.count(target_name))
        throw Error(ErrorCode::InvalidSchema, "target '" + target_name + "' is also a feature column");
    if (require_classes || !class_labels.empty()) {
        if (class_labels.size() < 2) throw Error(ErrorCode::InvalidSchema, "need at least 2 class labels");
        std::set<std::string> cls(class_labels.begin(), class_labels.end());
        if (cls.size() != class_labels.size()) throw Error(ErrorCode::InvalidSchema, "duplicate class label");
    }
}

std::vector<std::size_t> DatasetSchema::continuous_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].kind == ColumnKind::Continuous) out.push_back(j);
    return out;
}

std::vector<std::size_t> DatasetSchema::discrete_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].kind == ColumnKind::Discrete) out.push_back(j);
    return out;
}

std::size_t DatasetSchema::category_index(std::size_t column, const std::string& value) const {
    const auto& cats = columns.at(column).categories;
    auto it = std::find(cats.begin(), cats.end(), value);
    if (it == cats.end())
        throw Error(ErrorCode::UnknownCategory,
                    "'" + value + "' is not a category of column '" + columns[column].name + "'");
    return static_cast<std::size_t>(it - cats.begin());
}

std::size_t DatasetSchema::class_index(const std::string& label) const {
    auto it = std::find(class_labels.begin(), class_labels.end(), label);
    if (it == class_labels.end())
        throw Error(ErrorCode::UnknownCategory, "'" + label + "' is not a class of '" + target_name + "'");
    return static_cast<std::size_t>(it - class_labels.begin());
}

std::uint64_t DatasetSchema::fingerprint() const {
    const std::string text = nlohmann::json(*this).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void to_json(nlohmann::json& j, const DatasetSchema& schema) {
    auto cols = nlohmann::json::array();
    for (const auto& c : schema.columns) {
        nlohmann::json col{{"name", c.name}, {"kind", kind_name(c.kind)}};
        col["categories"] = c.categories;
        cols.push_back(std::move(col));
    }
    j = nlohmann::json{{"columns", std::move(cols)}, {"target", schema.target_name}};
    if (!schema.class_labels.empty()) j["classes"] = schema.class_labels;
}

void from_json(const nlohmann::json& j, DatasetSchema& schema) {
    try {
        schema = DatasetSchema{};
        for (const auto& col : j.at("columns")) {
            ColumnSpec spec;
            spec.name = col.at("name").get<std::string>();
            spec.kind = parse_kind(col.at("kind").get<std::string>());
            if (col.contains("categories"))
                spec.categories = col.at("categories").get<std::vector<std::string>>();
            schema.columns.push_back(std::move(spec));
        }
        schema.target_name = j.at("target").get<std::string>();
        if (j.contains("classes")) schema.class_labels = j.at("classes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidSchema, e.what());
    }
}

Dataset::Dataset(DatasetSchema schema, std::vector<double> values, std::vector<std::size_t> labels)
    : schema_(std::move(schema)), values_(std::move(values)), labels_(std::move(labels)) {
    schema_.validate();
    const std::size_t n = schema_.columns.size();
    if (labels_.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no rows");
    if (values_.size() != labels_.size() * n)
        throw Error(ErrorCode::ShapeMismatch, "value table does not match row count");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
        if (labels_[i] >= schema_.class_labels.size())
            throw Error(ErrorCode::IndexOutOfRange, "class index out of range at row " + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) {
            const double v = values_[i * n + j];
            if (!std::isfinite(v))
                throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(i) + ", column '" +
                                                           schema_.columns[j].name + "'");
            if (schema_.columns[j].kind == ColumnKind::Discrete) {
                if (v < 0 || v != std::floor(v) || v >= static_cast<double>(schema_.columns[j].categories.size()))
                    throw Error(ErrorCode::UnknownCategory, "category index out of range at row " +
                                                                std::to_string(i) + ", column '" +
                                                                schema_.columns[j].name + "'");
            }
        }
    }
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(schema_.class_labels.size(), 0);
    for (auto y : labels_) ++counts[y];
    return counts;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    const std::size_t n = num_columns();
    std::vector<double> values;
    values.reserve(indices.size() * n);
    std::vector<std::size_t> labels;
    labels.reserve(indices.size());
    for (auto i : indices) {
        if (i >= num_rows()) throw Error(ErrorCode::IndexOutOfRange, "row index " + std::to_string(i));
        auto r = row(i);
        values.insert(values.end(), r.begin(), r.end());
        labels.push_back(labels_[i]);
    }
    return Dataset(schema_, std::move(values), std::move(labels));
}

Dataset Dataset::concat(const Dataset& other) const {
    if (!(other.schema_ == schema_)) throw Error(ErrorCode::InvalidSchema, "concat of incompatible schemas");
    std::vector<double> values = values_;
    values.insert(values.end(), other.values_.begin(), other.values_.end());
    std::vector<std::size_t> labels = labels_;
    labels.insert(labels.end(), other.labels_.begin(), other.labels_.end());
    return Dataset(schema_, std::move(values), std::move(labels));
}

}  // namespace ctdgan
