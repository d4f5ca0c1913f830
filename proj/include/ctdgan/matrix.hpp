#pragma once

#include <Eigen/Dense>
#include <json.hpp>

namespace ctdgan {

/// Row-major so that a batch row is contiguous and packing is a reshape.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// {"shape":[r,c],"values":[row-major...]}
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace ctdgan
