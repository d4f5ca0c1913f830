#include "ctdgan/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "ctdgan/error.hpp"

namespace ctdgan {

namespace {

bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::size_t header_position(const CsvTable& table, const std::string& name, ErrorCode code) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw Error(code, "column '" + name + "' not in header");
    return static_cast<std::size_t>(it - table.header.begin());
}

}  // namespace

CsvTable parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string cell;
    bool in_quotes = false;
    bool cell_started = false;
    std::size_t line = 1;

    auto end_cell = [&] {
        record.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
    };
    auto end_record = [&] {
        end_cell();
        // a bare blank line is not a record
        if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
        record.clear();
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    cell.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                cell.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (cell_started && !cell.empty())
                    throw Error(ErrorCode::ParseError, "stray quote on line " + std::to_string(line));
                in_quotes = true;
                cell_started = true;
                break;
            case ',':
                end_cell();
                break;
            case '\r':
                if (in.peek() == '\n') in.get(c);
                [[fallthrough]];
            case '\n':
                end_record();
                ++line;
                break;
            default:
                cell.push_back(c);
                cell_started = true;
        }
    }
    if (in_quotes) throw Error(ErrorCode::ParseError, "unterminated quoted cell");
    if (cell_started || !cell.empty() || !record.empty()) end_record();

    CsvTable table;
    if (records.empty()) throw Error(ErrorCode::EmptyDataset, "no header row");
    table.header = std::move(records.front());
    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != table.header.size())
            throw Error(ErrorCode::ParseError, "record " + std::to_string(r) + " has " +
                                                   std::to_string(records[r].size()) + " cells, header has " +
                                                   std::to_string(table.header.size()));
        table.rows.push_back(std::move(records[r]));
    }
    return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    return parse_csv(in);
}

std::string csv_escape(const std::string& cell) {
    if (cell.find_first_of(",\"\r\n") == std::string::npos) return cell;
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

Dataset dataset_from_table(const CsvTable& table, DatasetSchema schema) {
    schema.validate(/*require_classes=*/false);
    std::vector<std::size_t> positions;
    for (const auto& col : schema.columns)
        positions.push_back(header_position(table, col.name, ErrorCode::MissingColumn));
    const std::size_t target_pos = header_position(table, schema.target_name, ErrorCode::MissingColumn);
    if (table.rows.empty()) throw Error(ErrorCode::EmptyDataset, "CSV has a header but no rows");

    if (schema.class_labels.empty()) {
        std::unordered_set<std::string> seen;
        for (const auto& row : table.rows)
            if (seen.insert(row[target_pos]).second) schema.class_labels.push_back(row[target_pos]);
    }
    schema.validate();

    const std::size_t n = schema.columns.size();
    std::vector<double> values;
    values.reserve(table.rows.size() * n);
    std::vector<std::size_t> labels;
    labels.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        for (std::size_t j = 0; j < n; ++j) {
            const std::string& cell = row[positions[j]];
            if (schema.columns[j].kind == ColumnKind::Discrete) {
                values.push_back(static_cast<double>(schema.category_index(j, cell)));
            } else {
                double v = 0.0;
                if (!parse_real(cell, v) || !std::isfinite(v))
                    throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(i + 1) + ", column '" +
                                                               schema.columns[j].name + "': '" + cell + "'");
                values.push_back(v);
            }
        }
        labels.push_back(schema.class_index(row[target_pos]));
    }
    return Dataset(std::move(schema), std::move(values), std::move(labels));
}

Dataset load_csv(const std::filesystem::path& path, DatasetSchema schema) {
    return dataset_from_table(read_csv_file(path), std::move(schema));
}

void write_csv(std::ostream& out, const Dataset& ds) {
    const auto& schema = ds.schema();
    for (const auto& col : schema.columns) out << csv_escape(col.name) << ',';
    out << csv_escape(schema.target_name) << '\n';
    for (std::size_t i = 0; i < ds.num_rows(); ++i) {
        for (std::size_t j = 0; j < schema.columns.size(); ++j) {
            const double v = ds.at(i, j);
            if (schema.columns[j].kind == ColumnKind::Discrete)
                out << csv_escape(schema.columns[j].categories[static_cast<std::size_t>(v)]);
            else
                out << format_real(v);
            out << ',';
        }
        out << csv_escape(schema.class_labels[ds.label(i)]) << '\n';
    }
}

void write_csv_file(const std::filesystem::path& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    write_csv(out, ds);
}

DatasetSchema infer_schema(const CsvTable& table, const std::string& target_name, std::size_t discrete_threshold) {
    auto it = std::find(table.header.begin(), table.header.end(), target_name);
    if (it == table.header.end()) throw Error(ErrorCode::TargetMissing, "target '" + target_name + "' not in header");
    if (table.rows.empty()) throw Error(ErrorCode::EmptyDataset, "CSV has a header but no rows");
    const std::size_t target_pos = static_cast<std::size_t>(it - table.header.begin());

    DatasetSchema schema;
    schema.target_name = target_name;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        std::vector<std::string> distinct;
        std::unordered_set<std::string> seen;
        bool numeric = true;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const std::string& cell = table.rows[r][c];
            if (cell.empty())
                throw Error(ErrorCode::NonFiniteValue, "missing value in row " + std::to_string(r + 1) +
                                                           ", column '" + table.header[c] + "'");
            double v = 0.0;
            if (numeric && !(parse_real(cell, v) && std::isfinite(v))) numeric = false;
            if (seen.insert(cell).second) distinct.push_back(cell);
        }
        if (c == target_pos) {
            schema.class_labels = std::move(distinct);
            continue;
        }
        ColumnSpec spec;
        spec.name = table.header[c];
        if (!numeric || distinct.size() <= discrete_threshold) {
            spec.kind = ColumnKind::Discrete;
            spec.categories = std::move(distinct);
        }
        schema.columns.push_back(std::move(spec));
    }
    schema.validate();
    return schema;
}

DatasetSchema infer_schema(const std::filesystem::path& path, const std::string& target_name,
                           std::size_t discrete_threshold) {
    return infer_schema(read_csv_file(path), target_name, discrete_threshold);
}

DatasetSchema read_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    auto schema = j.get<DatasetSchema>();
    schema.validate(/*require_classes=*/false);
    return schema;
}

void write_schema_file(const std::filesystem::path& path, const DatasetSchema& schema) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << nlohmann::json(schema).dump(2) << '\n';
}

}  // namespace ctdgan
