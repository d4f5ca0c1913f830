#include "ctdgan/matrix.hpp"

#include "ctdgan/error.hpp"

namespace ctdgan {

nlohmann::json matrix_to_json(const Matrix& m) {
    std::vector<double> values(m.data(), m.data() + m.size());
    return nlohmann::json{{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
    const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
    const auto values = j.at("values").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] * shape[1] != static_cast<Eigen::Index>(values.size()))
        throw Error(ErrorCode::ShapeMismatch, "matrix shape does not match value count");
    Matrix m(shape[0], shape[1]);
    std::copy(values.begin(), values.end(), m.data());
    return m;
}

}  // namespace ctdgan
