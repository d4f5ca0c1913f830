#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "ctdgan/dataset.hpp"

namespace ctdgan {

/// RFC-4180 style table: header row plus string cells.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable parse_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Quotes a cell when it contains a comma, quote, or line break.
std::string csv_escape(const std::string& cell);

/// Reads a CSV whose header contains every schema column plus the target.
/// If `schema.class_labels` is empty the labels are taken from the target
/// column in first-appearance order.
Dataset load_csv(const std::filesystem::path& path, DatasetSchema schema);
Dataset dataset_from_table(const CsvTable& table, DatasetSchema schema);

/// Writes feature columns in schema order followed by the target column.
/// Reals are printed with round-trip precision.
void write_csv(std::ostream& out, const Dataset& ds);
void write_csv_file(const std::filesystem::path& path, const Dataset& ds);

inline constexpr std::size_t kDefaultDiscreteThreshold = 20;

/// Columns with a non-numeric cell, or at most `discrete_threshold` distinct
/// values, become Discrete; categories and class labels keep first-appearance
/// order.
DatasetSchema infer_schema(const std::filesystem::path& path, const std::string& target_name,
                           std::size_t discrete_threshold = kDefaultDiscreteThreshold);
DatasetSchema infer_schema(const CsvTable& table, const std::string& target_name,
                           std::size_t discrete_threshold = kDefaultDiscreteThreshold);

DatasetSchema read_schema_file(const std::filesystem::path& path);
void write_schema_file(const std::filesystem::path& path, const DatasetSchema& schema);

}  // namespace ctdgan
