#include "ctdgan/optim.hpp"

#include <cmath>

#include "ctdgan/error.hpp"

namespace ctdgan {

ParamStore::ParamStore(const ParamStore& other) : step_(other.step_) {
    for (const auto& [name, e] : other.entries_) {
        Entry copy = e;
        copy.var = e.trainable ? ad::parameter(e.var.value()) : ad::constant(e.var.value());
        entries_.emplace(name, std::move(copy));
    }
}

ParamStore& ParamStore::operator=(const ParamStore& other) {
    if (this != &other) *this = ParamStore(other);
    return *this;
}

ad::Var ParamStore::add(const std::string& name, Matrix init, bool trainable) {
    if (entries_.count(name)) throw Error(ErrorCode::InvalidConfig, "duplicate parameter '" + name + "'");
    Entry e;
    e.first_moment = Matrix::Zero(init.rows(), init.cols());
    e.second_moment = Matrix::Zero(init.rows(), init.cols());
    e.trainable = trainable;
    e.var = trainable ? ad::parameter(std::move(init)) : ad::constant(std::move(init));
    auto [it, inserted] = entries_.emplace(name, std::move(e));
    return it->second.var;
}

const ad::Var& ParamStore::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error(ErrorCode::InvalidConfig, "no parameter '" + name + "'");
    return it->second.var;
}

void ParamStore::set_value(const std::string& name, const Matrix& value) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw Error(ErrorCode::InvalidConfig, "no parameter '" + name + "'");
    Matrix& target = it->second.var.mutable_value();
    if (target.rows() != value.rows() || target.cols() != value.cols())
        throw Error(ErrorCode::ShapeMismatch, "shape change for parameter '" + name + "'");
    target = value;
}

std::vector<std::string> ParamStore::trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_)
        if (e.trainable) out.push_back(name);
    return out;
}

std::vector<ad::Var> ParamStore::trainable_vars() const {
    std::vector<ad::Var> out;
    for (const auto& [name, e] : entries_)
        if (e.trainable) out.push_back(e.var);
    return out;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

nlohmann::json ParamStore::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, e] : entries_) j[name] = matrix_to_json(e.var.value());
    return j;
}

void ParamStore::load_json(const nlohmann::json& j) {
    for (auto& [name, e] : entries_) {
        if (!j.contains(name)) throw Error(ErrorCode::ParseError, "checkpoint lacks parameter '" + name + "'");
        set_value(name, matrix_from_json(j.at(name)));
    }
}

bool ParamStore::values_equal(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    for (const auto& [name, e] : entries_) {
        auto it = other.entries_.find(name);
        if (it == other.entries_.end() || e.var.value() != it->second.var.value()) return false;
    }
    return true;
}

void AdamOptimizer::step(ParamStore& store, const std::vector<Matrix>& grads, const AdamOptions& options) {
    // Validate everything first so a rejected step leaves the store untouched.
    std::size_t idx = 0;
    for (const auto& [name, e] : store.entries_) {
        if (!e.trainable) continue;
        if (idx >= grads.size()) {
            ++idx;
            continue;
        }
        const Matrix& g = grads[idx++];
        const Matrix& theta = e.var.value();
        if (g.rows() != theta.rows() || g.cols() != theta.cols())
            throw Error(ErrorCode::ShapeMismatch, "gradient shape for '" + name + "'");
    }
    if (idx != grads.size())
        throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(idx) + " gradients, got " +
                                                  std::to_string(grads.size()));

    ++store.step_;
    const double t = static_cast<double>(store.step_);
    const double bias1 = 1.0 - std::pow(options.beta1, t);
    const double bias2 = 1.0 - std::pow(options.beta2, t);
    idx = 0;
    for (auto& [name, e] : store.entries_) {
        if (!e.trainable) continue;
        const Matrix& g = grads[idx++];
        Matrix& theta = e.var.mutable_value();
        if (options.weight_decay != 0.0) theta *= 1.0 - options.learning_rate * options.weight_decay;
        e.first_moment = options.beta1 * e.first_moment + (1.0 - options.beta1) * g;
        e.second_moment = options.beta2 * e.second_moment + (1.0 - options.beta2) * g.cwiseProduct(g);
        theta.array() -= options.learning_rate * (e.first_moment.array() / bias1) /
                         ((e.second_moment.array() / bias2).sqrt() + options.epsilon);
    }
}

}  // namespace ctdgan
