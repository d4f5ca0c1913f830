#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "ctdgan/autodiff.hpp"

namespace ctdgan {

/// Named parameter tensors with their Adam moments. Buffers (e.g. batch-norm
/// running statistics) live here too but are never updated by the optimizer.
class ParamStore {
public:
    ParamStore() = default;
    /// Copies own fresh leaves; a copy never aliases the original's values.
    ParamStore(const ParamStore& other);
    ParamStore& operator=(const ParamStore& other);
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;

    ad::Var add(const std::string& name, Matrix init, bool trainable = true);

    const ad::Var& get(const std::string& name) const;
    bool contains(const std::string& name) const { return entries_.count(name) > 0; }
    void set_value(const std::string& name, const Matrix& value);

    /// Trainable parameter names in lexicographic order; the gradient vector
    /// passed to adam_step follows the same order.
    std::vector<std::string> trainable_names() const;
    std::vector<ad::Var> trainable_vars() const;
    std::vector<std::string> names() const;

    std::size_t step_count() const noexcept { return step_; }

    /// {name: {"shape":[r,c],"values":[...]}} for every entry.
    nlohmann::json to_json() const;
    /// Overwrites values of existing entries; shapes must match.
    void load_json(const nlohmann::json& j);

    bool values_equal(const ParamStore& other) const;

private:
    friend struct AdamOptimizer;
    struct Entry {
        ad::Var var;
        Matrix first_moment;
        Matrix second_moment;
        bool trainable = true;
    };
    std::map<std::string, Entry> entries_;
    std::size_t step_ = 0;
};

struct AdamOptions {
    double learning_rate = 2e-4;
    double weight_decay = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamOptimizer {
    /// Decoupled weight decay (theta -= lr * wd * theta) followed by the
    /// bias-corrected Adam update. `grads` follows trainable_names().
    static void step(ParamStore& store, const std::vector<Matrix>& grads, const AdamOptions& options);
};

inline void adam_step(ParamStore& store, const std::vector<Matrix>& grads, const AdamOptions& options) {
    AdamOptimizer::step(store, grads, options);
}

}  // namespace ctdgan
