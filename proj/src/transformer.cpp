#include "ctdgan/transformer.hpp"

#include <algorithm>
#include <cmath>

#include "ctdgan/error.hpp"

namespace ctdgan {

ScalerStats::ScalerStats(std::size_t k, std::size_t n_continuous)
    : k_(k), n_c_(n_continuous), min_(k * n_continuous, 0.0), max_(k * n_continuous, 0.0),
      populated_(k * n_continuous, false) {}

std::size_t ScalerStats::cell(std::size_t u, std::size_t j) const {
    if (u >= k_ || j >= n_c_)
        throw Error(ErrorCode::UnknownClusterColumn,
                    "cluster " + std::to_string(u) + ", continuous column " + std::to_string(j));
    return u * n_c_ + j;
}

bool ScalerStats::populated(std::size_t u, std::size_t j) const { return populated_[cell(u, j)]; }

double ScalerStats::min(std::size_t u, std::size_t j) const {
    const auto c = cell(u, j);
    if (!populated_[c]) throw Error(ErrorCode::UnknownClusterColumn, "cluster " + std::to_string(u) + " is empty");
    return min_[c];
}

double ScalerStats::max(std::size_t u, std::size_t j) const {
    const auto c = cell(u, j);
    if (!populated_[c]) throw Error(ErrorCode::UnknownClusterColumn, "cluster " + std::to_string(u) + " is empty");
    return max_[c];
}

void ScalerStats::observe(std::size_t u, std::size_t j, double v) {
    const auto c = cell(u, j);
    if (!populated_[c]) {
        min_[c] = max_[c] = v;
        populated_[c] = true;
    } else {
        min_[c] = std::min(min_[c], v);
        max_[c] = std::max(max_[c], v);
    }
}

double scale_continuous(double value, std::size_t u, std::size_t j, const ScalerStats& stats) {
    const double lo = stats.min(u, j);
    const double hi = stats.max(u, j);
    if (hi == lo) return 0.0;
    const double scaled = 2.0 * (value - lo) / (hi - lo) - 1.0;
    return std::clamp(scaled, -1.0, 1.0);
}

double unscale_continuous(double scaled, std::size_t u, std::size_t j, const ScalerStats& stats) {
    const double lo = stats.min(u, j);
    const double hi = stats.max(u, j);
    const double s = std::clamp(scaled, -1.0, 1.0);
    return (s + 1.0) / 2.0 * (hi - lo) + lo;
}

Layout make_layout(const DatasetSchema& schema, std::size_t k) {
    Layout layout;
    std::size_t offset = 0;
    const auto cont = schema.continuous_indices();
    layout.segments.push_back({Segment::Kind::Continuous, offset, cont.size(), 0});
    offset += cont.size();
    for (auto j : schema.discrete_indices()) {
        const auto w = schema.columns[j].categories.size();
        layout.segments.push_back({Segment::Kind::Discrete, offset, w, j});
        offset += w;
    }
    layout.segments.push_back({Segment::Kind::Cluster, offset, k, 0});
    offset += k;
    layout.segments.push_back({Segment::Kind::Class, offset, schema.num_classes(), 0});
    offset += schema.num_classes();
    layout.width = offset;
    return layout;
}

TransformPipeline fit_transform_pipeline(const Dataset& ds, const std::vector<std::size_t>& assignments,
                                         std::size_t k) {
    if (assignments.size() != ds.num_rows())
        throw Error(ErrorCode::DimensionMismatch, "assignments do not match row count");
    if (k < 1) throw Error(ErrorCode::InvalidConfig, "k must be >= 1");

    TransformPipeline pipe;
    pipe.schema = ds.schema();
    pipe.k = k;
    pipe.continuous_columns = pipe.schema.continuous_indices();
    pipe.discrete_columns = pipe.schema.discrete_indices();
    pipe.stats = ScalerStats(k, pipe.continuous_columns.size());
    for (std::size_t i = 0; i < ds.num_rows(); ++i) {
        if (assignments[i] >= k) throw Error(ErrorCode::IndexOutOfRange, "cluster label >= k");
        for (std::size_t c = 0; c < pipe.continuous_columns.size(); ++c)
            pipe.stats.observe(assignments[i], c, ds.at(i, pipe.continuous_columns[c]));
    }
    for (auto j : pipe.discrete_columns) pipe.encoders.discrete_categories.push_back(pipe.schema.columns[j].categories);
    pipe.encoders.cluster_width = k;
    pipe.encoders.class_labels = pipe.schema.class_labels;
    pipe.layout = make_layout(pipe.schema, k);
    return pipe;
}

TransformPipeline fit_transform_pipeline(const Dataset& ds, const ClusterModel& clusters) {
    return fit_transform_pipeline(ds, clusters.assignments, clusters.k);
}

std::vector<double> transform_row(std::span<const double> row, std::size_t u, std::size_t y,
                                  const TransformPipeline& pipe) {
    if (row.size() != pipe.schema.num_columns())
        throw Error(ErrorCode::WidthMismatch, "row has " + std::to_string(row.size()) + " cells");
    if (u >= pipe.k) throw Error(ErrorCode::IndexOutOfRange, "cluster " + std::to_string(u) + " >= k");
    if (y >= pipe.schema.num_classes()) throw Error(ErrorCode::IndexOutOfRange, "class " + std::to_string(y));

    std::vector<double> out(pipe.layout.width, 0.0);
    const auto& cont = pipe.layout.continuous();
    for (std::size_t c = 0; c < pipe.continuous_columns.size(); ++c)
        out[cont.offset + c] = scale_continuous(row[pipe.continuous_columns[c]], u, c, pipe.stats);
    for (const auto& seg : pipe.layout.discrete()) {
        const double v = row[seg.column];
        if (v < 0 || v != std::floor(v) || v >= static_cast<double>(seg.width))
            throw Error(ErrorCode::UnknownCategory, "category index " + std::to_string(v) + " in column '" +
                                                        pipe.schema.columns[seg.column].name + "'");
        out[seg.offset + static_cast<std::size_t>(v)] = 1.0;
    }
    out[pipe.layout.cluster().offset + u] = 1.0;
    out[pipe.layout.label().offset + y] = 1.0;
    return out;
}

Matrix transform_dataset(const Dataset& ds, const std::vector<std::size_t>& assignments,
                         const TransformPipeline& pipe) {
    if (assignments.size() != ds.num_rows())
        throw Error(ErrorCode::DimensionMismatch, "assignments do not match row count");
    Matrix out(static_cast<Eigen::Index>(ds.num_rows()), static_cast<Eigen::Index>(pipe.layout.width));
    for (std::size_t i = 0; i < ds.num_rows(); ++i) {
        const auto row = transform_row(ds.row(i), assignments[i], ds.label(i), pipe);
        std::copy(row.begin(), row.end(), out.row(static_cast<Eigen::Index>(i)).data());
    }
    return out;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

InverseRow inverse_transform_row(std::span<const double> encoded, const TransformPipeline& pipe) {
    if (encoded.size() != pipe.layout.width)
        throw Error(ErrorCode::WidthMismatch, "vector width " + std::to_string(encoded.size()) + ", layout width " +
                                                  std::to_string(pipe.layout.width));
    InverseRow out;
    out.values.assign(pipe.schema.num_columns(), 0.0);
    const auto& cl = pipe.layout.cluster();
    const auto& lb = pipe.layout.label();
    out.cluster = argmax(encoded.subspan(cl.offset, cl.width));
    out.label = argmax(encoded.subspan(lb.offset, lb.width));
    for (const auto& seg : pipe.layout.discrete())
        out.values[seg.column] = static_cast<double>(argmax(encoded.subspan(seg.offset, seg.width)));
    const auto& cont = pipe.layout.continuous();
    for (std::size_t c = 0; c < pipe.continuous_columns.size(); ++c)
        out.values[pipe.continuous_columns[c]] = unscale_continuous(encoded[cont.offset + c], out.cluster, c, pipe.stats);
    return out;
}

namespace {

std::string segment_kind_name(Segment::Kind kind) {
    switch (kind) {
        case Segment::Kind::Continuous: return "continuous";
        case Segment::Kind::Discrete: return "discrete";
        case Segment::Kind::Cluster: return "cluster";
        case Segment::Kind::Class: return "class";
    }
    return "";
}

Segment::Kind parse_segment_kind(const std::string& s) {
    if (s == "continuous") return Segment::Kind::Continuous;
    if (s == "discrete") return Segment::Kind::Discrete;
    if (s == "cluster") return Segment::Kind::Cluster;
    if (s == "class") return Segment::Kind::Class;
    throw Error(ErrorCode::ParseError, "unknown segment kind '" + s + "'");
}

}  // namespace

nlohmann::json pipeline_to_json(const TransformPipeline& pipe) {
    auto stats = nlohmann::json::array();
    for (std::size_t u = 0; u < pipe.k; ++u) {
        auto row = nlohmann::json::array();
        for (std::size_t j = 0; j < pipe.stats.num_continuous(); ++j) {
            if (pipe.stats.populated(u, j))
                row.push_back({pipe.stats.min(u, j), pipe.stats.max(u, j)});
            else
                row.push_back(nullptr);
        }
        stats.push_back(std::move(row));
    }
    auto segments = nlohmann::json::array();
    for (const auto& s : pipe.layout.segments) {
        nlohmann::json seg{{"kind", segment_kind_name(s.kind)}, {"offset", s.offset}, {"width", s.width}};
        if (s.kind == Segment::Kind::Discrete) seg["column"] = pipe.schema.columns[s.column].name;
        segments.push_back(std::move(seg));
    }
    return nlohmann::json{
        {"k", pipe.k},
        {"stats", std::move(stats)},
        {"encoders",
         {{"discrete", pipe.encoders.discrete_categories},
          {"cluster_width", pipe.encoders.cluster_width},
          {"classes", pipe.encoders.class_labels}}},
        {"layout", {{"segments", std::move(segments)}, {"width", pipe.layout.width}}},
        {"schema", pipe.schema},
    };
}

TransformPipeline pipeline_from_json(const nlohmann::json& j) {
    TransformPipeline pipe;
    pipe.schema = j.at("schema").get<DatasetSchema>();
    pipe.k = j.at("k").get<std::size_t>();
    pipe.continuous_columns = pipe.schema.continuous_indices();
    pipe.discrete_columns = pipe.schema.discrete_indices();
    pipe.stats = ScalerStats(pipe.k, pipe.continuous_columns.size());
    const auto& stats = j.at("stats");
    if (stats.size() != pipe.k) throw Error(ErrorCode::ParseError, "stats rows do not match k");
    for (std::size_t u = 0; u < pipe.k; ++u) {
        for (std::size_t c = 0; c < pipe.continuous_columns.size(); ++c) {
            const auto& cell = stats.at(u).at(c);
            if (cell.is_null()) continue;
            pipe.stats.observe(u, c, cell.at(0).get<double>());
            pipe.stats.observe(u, c, cell.at(1).get<double>());
        }
    }
    const auto& enc = j.at("encoders");
    pipe.encoders.discrete_categories = enc.at("discrete").get<std::vector<std::vector<std::string>>>();
    pipe.encoders.cluster_width = enc.at("cluster_width").get<std::size_t>();
    pipe.encoders.class_labels = enc.at("classes").get<std::vector<std::string>>();
    pipe.layout = make_layout(pipe.schema, pipe.k);
    const auto& segs = j.at("layout").at("segments");
    if (segs.size() != pipe.layout.segments.size()) throw Error(ErrorCode::ParseError, "layout segment count");
    for (std::size_t s = 0; s < segs.size(); ++s) {
        const auto& seg = pipe.layout.segments[s];
        if (parse_segment_kind(segs[s].at("kind").get<std::string>()) != seg.kind ||
            segs[s].at("offset").get<std::size_t>() != seg.offset ||
            segs[s].at("width").get<std::size_t>() != seg.width)
            throw Error(ErrorCode::ParseError, "layout does not match schema");
    }
    return pipe;
}

}  // namespace ctdgan
