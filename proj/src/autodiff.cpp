#include "ctdgan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "ctdgan/error.hpp"

namespace ctdgan::ad {

namespace {

thread_local bool g_grad_enabled = true;

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + std::to_string(a.rows()) + "x" +
                                              std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                              std::to_string(b.cols()));
}

void require_same_shape(const char* op, const Var& a, const Var& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a.value(), b.value());
}

Var make_node(Op op, Matrix value, std::vector<Var> inputs, BackwardFn backward, bool second_order = true) {
    if (!value.allFinite())
        throw Error(ErrorCode::NonFiniteIntermediate, std::string("non-finite value produced by ") + op_name(op));
    auto node = std::make_shared<Node>();
    node->op = op;
    node->value = std::move(value);
    const bool needs_grad =
        g_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
    if (needs_grad) {
        node->inputs = std::move(inputs);
        node->backward = std::move(backward);
        node->requires_grad = true;
        node->second_order = second_order;
    }
    return Var(std::move(node));
}

bool wants(const Var& self, std::size_t i) { return self.get()->inputs[i].requires_grad(); }

const Var& input(const Var& self, std::size_t i) { return self.get()->inputs[i]; }

}  // namespace

const char* op_name(Op op) noexcept {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::MatMul: return "matmul";
        case Op::Transpose: return "transpose";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Scale: return "scale";
        case Op::AddScalar: return "add_scalar";
        case Op::BroadcastRows: return "broadcast_rows";
        case Op::SumRows: return "sum_rows";
        case Op::BroadcastCols: return "broadcast_cols";
        case Op::SumCols: return "sum_cols";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Tanh: return "tanh";
        case Op::Relu: return "relu";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::Reciprocal: return "reciprocal";
        case Op::Sqrt: return "sqrt";
        case Op::Reshape: return "reshape";
        case Op::SliceCols: return "slice_cols";
        case Op::PadCols: return "pad_cols";
        case Op::ConcatCols: return "concat_cols";
        case Op::BatchNorm: return "batch_norm";
    }
    return "unknown";
}

const Matrix& Var::value() const {
    if (!node_) throw Error(ErrorCode::ShapeMismatch, "use of an undefined variable");
    return node_->value;
}

double Var::item() const {
    const auto& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw Error(ErrorCode::NotScalarRoot, "item() on a non-scalar");
    return v(0, 0);
}

bool Var::requires_grad() const { return node_ && node_->requires_grad; }

Op Var::op() const { return node_ ? node_->op : Op::Leaf; }

Matrix& Var::mutable_value() {
    if (!node_ || node_->op != Op::Leaf) throw Error(ErrorCode::ShapeMismatch, "mutable_value on a non-leaf");
    return node_->value;
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var constant(Matrix value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(std::move(node));
}

Var parameter(Matrix value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(std::move(node));
}

Var scalar_constant(double v) { return constant(Matrix::Constant(1, 1, v)); }

// ── primitive ops ──────────────────────────────────────────────────────────

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
    Matrix out = a.value() * b.value();
    return make_node(Op::MatMul, std::move(out), {a, b}, [](const Var& self, const Var& g) {
        std::vector<Var> r(2);
        if (wants(self, 0)) r[0] = matmul(g, transpose(input(self, 1)));
        if (wants(self, 1)) r[1] = matmul(transpose(input(self, 0)), g);
        return r;
    });
}

Var transpose(const Var& a) {
    Matrix out = a.value().transpose();
    return make_node(Op::Transpose, std::move(out), {a},
                     [](const Var&, const Var& g) { return std::vector<Var>{transpose(g)}; });
}

Var add(const Var& a, const Var& b) {
    require_same_shape("add", a, b);
    Matrix out = a.value() + b.value();
    return make_node(Op::Add, std::move(out), {a, b},
                     [](const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape("sub", a, b);
    Matrix out = a.value() - b.value();
    return make_node(Op::Sub, std::move(out), {a, b}, [](const Var& self, const Var& g) {
        std::vector<Var> r(2);
        r[0] = g;
        if (wants(self, 1)) r[1] = neg(g);
        return r;
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape("mul", a, b);
    Matrix out = a.value().cwiseProduct(b.value());
    return make_node(Op::Mul, std::move(out), {a, b}, [](const Var& self, const Var& g) {
        std::vector<Var> r(2);
        if (wants(self, 0)) r[0] = mul(g, input(self, 1));
        if (wants(self, 1)) r[1] = mul(g, input(self, 0));
        return r;
    });
}

Var scale(const Var& a, double c) {
    Matrix out = a.value() * c;
    return make_node(Op::Scale, std::move(out), {a},
                     [c](const Var&, const Var& g) { return std::vector<Var>{scale(g, c)}; });
}

Var add_scalar(const Var& a, double c) {
    Matrix out = a.value().array() + c;
    return make_node(Op::AddScalar, std::move(out), {a},
                     [](const Var&, const Var& g) { return std::vector<Var>{g}; });
}

Var broadcast_rows(const Var& row, Eigen::Index rows) {
    if (row.rows() != 1) throw Error(ErrorCode::ShapeMismatch, "broadcast_rows expects a 1 x c input");
    Matrix out = row.value().replicate(rows, 1);
    return make_node(Op::BroadcastRows, std::move(out), {row},
                     [](const Var&, const Var& g) { return std::vector<Var>{sum_rows(g)}; });
}

Var sum_rows(const Var& a) {
    Matrix out = a.value().colwise().sum();
    const auto rows = a.rows();
    return make_node(Op::SumRows, std::move(out), {a},
                     [rows](const Var&, const Var& g) { return std::vector<Var>{broadcast_rows(g, rows)}; });
}

Var broadcast_cols(const Var& col, Eigen::Index cols) {
    if (col.cols() != 1) throw Error(ErrorCode::ShapeMismatch, "broadcast_cols expects an r x 1 input");
    Matrix out = col.value().replicate(1, cols);
    return make_node(Op::BroadcastCols, std::move(out), {col},
                     [](const Var&, const Var& g) { return std::vector<Var>{sum_cols(g)}; });
}

Var sum_cols(const Var& a) {
    Matrix out = a.value().rowwise().sum();
    const auto cols = a.cols();
    return make_node(Op::SumCols, std::move(out), {a},
                     [cols](const Var&, const Var& g) { return std::vector<Var>{broadcast_cols(g, cols)}; });
}

Var exp(const Var& a) {
    Matrix out = a.value().array().exp();
    return make_node(Op::Exp, std::move(out), {a},
                     [](const Var& self, const Var& g) { return std::vector<Var>{mul(g, self)}; });
}

Var log(const Var& a, double floor) {
    if (floor <= 0) {
        Matrix out = a.value().array().log();
        return make_node(Op::Log, std::move(out), {a}, [](const Var& self, const Var& g) {
            return std::vector<Var>{mul(g, reciprocal(input(self, 0)))};
        });
    }
    Matrix out = a.value().array().max(floor).log();
    Matrix mask = (a.value().array() > floor).cast<double>();
    return make_node(Op::Log, std::move(out), {a}, [mask = std::move(mask)](const Var& self, const Var& g) {
        return std::vector<Var>{mul(g, mul(constant(mask), reciprocal(input(self, 0))))};
    });
}

Var tanh(const Var& a) {
    Matrix out = a.value().array().tanh();
    return make_node(Op::Tanh, std::move(out), {a}, [](const Var& self, const Var& g) {
        return std::vector<Var>{mul(g, add_scalar(neg(square(self)), 1.0))};
    });
}

Var relu(const Var& a) {
    Matrix out = a.value().cwiseMax(0.0);
    Matrix mask = (a.value().array() > 0.0).cast<double>();
    return make_node(Op::Relu, std::move(out), {a}, [mask = std::move(mask)](const Var&, const Var& g) {
        return std::vector<Var>{mul(g, constant(mask))};
    });
}

Var leaky_relu(const Var& a, double slope) {
    Matrix mask = (a.value().array() > 0.0).select(Matrix::Ones(a.rows(), a.cols()), slope);
    Matrix out = a.value().cwiseProduct(mask);
    return make_node(Op::LeakyRelu, std::move(out), {a}, [mask = std::move(mask)](const Var&, const Var& g) {
        return std::vector<Var>{mul(g, constant(mask))};
    });
}

Var reciprocal(const Var& a) {
    Matrix out = a.value().unaryExpr([](double v) { return v == 0.0 ? 0.0 : 1.0 / v; });
    return make_node(Op::Reciprocal, std::move(out), {a},
                     [](const Var& self, const Var& g) { return std::vector<Var>{neg(mul(g, square(self)))}; });
}

Var sqrt(const Var& a) {
    if ((a.value().array() < 0).any()) throw Error(ErrorCode::NonFiniteIntermediate, "sqrt of a negative value");
    Matrix out = a.value().array().sqrt();
    return make_node(Op::Sqrt, std::move(out), {a}, [](const Var& self, const Var& g) {
        return std::vector<Var>{mul(g, scale(reciprocal(self), 0.5))};
    });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a.value().size())
        throw Error(ErrorCode::ShapeMismatch, "reshape to " + std::to_string(rows) + "x" + std::to_string(cols));
    Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
    const auto r0 = a.rows();
    const auto c0 = a.cols();
    return make_node(Op::Reshape, std::move(out), {a},
                     [r0, c0](const Var&, const Var& g) { return std::vector<Var>{reshape(g, r0, c0)}; });
}

Var slice_cols(const Var& a, Eigen::Index offset, Eigen::Index width) {
    if (offset < 0 || width < 0 || offset + width > a.cols())
        throw Error(ErrorCode::ShapeMismatch, "slice_cols out of range");
    Matrix out = a.value().middleCols(offset, width);
    const auto total = a.cols();
    return make_node(Op::SliceCols, std::move(out), {a}, [offset, total](const Var&, const Var& g) {
        return std::vector<Var>{pad_cols(g, offset, total)};
    });
}

Var pad_cols(const Var& a, Eigen::Index offset, Eigen::Index total) {
    if (offset < 0 || offset + a.cols() > total) throw Error(ErrorCode::ShapeMismatch, "pad_cols out of range");
    Matrix out = Matrix::Zero(a.rows(), total);
    out.middleCols(offset, a.cols()) = a.value();
    const auto width = a.cols();
    return make_node(Op::PadCols, std::move(out), {a}, [offset, width](const Var&, const Var& g) {
        return std::vector<Var>{slice_cols(g, offset, width)};
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
    const auto rows = parts.front().rows();
    Eigen::Index total = 0;
    std::vector<Eigen::Index> offsets;
    for (const auto& p : parts) {
        if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
        offsets.push_back(total);
        total += p.cols();
    }
    Matrix out(rows, total);
    for (std::size_t i = 0; i < parts.size(); ++i) out.middleCols(offsets[i], parts[i].cols()) = parts[i].value();
    std::vector<Var> inputs(parts.begin(), parts.end());
    return make_node(Op::ConcatCols, std::move(out), std::move(inputs),
                     [offsets = std::move(offsets)](const Var& self, const Var& g) {
                         const auto& in = self.get()->inputs;
                         std::vector<Var> r(in.size());
                         for (std::size_t i = 0; i < in.size(); ++i)
                             if (in[i].requires_grad()) r[i] = slice_cols(g, offsets[i], in[i].cols());
                         return r;
                     });
}

Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps, RowVector* batch_mean,
                     RowVector* batch_var) {
    const auto n = x.rows();
    if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 || beta.cols() != x.cols())
        throw Error(ErrorCode::ShapeMismatch, "batch_norm parameters must be 1 x features");
    const RowVector mean = x.value().colwise().mean();
    const Matrix centered = x.value().rowwise() - mean;
    const RowVector var = centered.array().square().colwise().mean();
    const RowVector inv_std = (var.array() + eps).rsqrt();
    Matrix normalized = centered.array().rowwise() * inv_std.array();
    Matrix out = (normalized.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
    if (batch_mean) *batch_mean = mean;
    if (batch_var) *batch_var = var;

    auto backward = [normalized, inv_std, n](const Var& self, const Var& g) {
        const Matrix& gv = g.value();
        const Matrix& gamma_v = input(self, 1).value();
        const RowVector sum_g = gv.colwise().sum();
        const RowVector sum_g_xhat = gv.cwiseProduct(normalized).colwise().sum();
        std::vector<Var> r(3);
        if (wants(self, 0)) {
            const RowVector coef = gamma_v.row(0).cwiseProduct(inv_std) / static_cast<double>(n);
            Matrix dx = (static_cast<double>(n) * gv).rowwise() - sum_g;
            dx -= (normalized.array().rowwise() * sum_g_xhat.array()).matrix();
            dx = dx.array().rowwise() * coef.array();
            r[0] = constant(std::move(dx));
        }
        if (wants(self, 1)) r[1] = constant(Matrix(sum_g_xhat));
        if (wants(self, 2)) r[2] = constant(Matrix(sum_g));
        return r;
    };
    return make_node(Op::BatchNorm, std::move(out), {x, gamma, beta}, std::move(backward), /*second_order=*/false);
}

// ── composites ─────────────────────────────────────────────────────────────

Var sum_all(const Var& a) { return sum_cols(sum_rows(a)); }

Var mean_all(const Var& a) { return scale(sum_all(a), 1.0 / static_cast<double>(a.value().size())); }

Var affine(const Var& x, const Var& weight, const Var& bias) {
    if (x.cols() != weight.cols()) shape_error("affine", x.value(), weight.value());
    return add(matmul(x, transpose(weight)), broadcast_rows(bias, x.rows()));
}

namespace {

Var shifted_rows(const Var& x) {
    Matrix row_max = x.value().rowwise().maxCoeff();
    return sub(x, broadcast_cols(constant(std::move(row_max)), x.cols()));
}

}  // namespace

Var softmax_rows(const Var& x) {
    const Var e = exp(shifted_rows(x));
    return mul(e, broadcast_cols(reciprocal(sum_cols(e)), x.cols()));
}

Var log_softmax_rows(const Var& x) {
    const Var s = shifted_rows(x);
    return sub(s, broadcast_cols(log(sum_cols(exp(s))), x.cols()));
}

Var row_norm(const Var& x) { return sqrt(sum_cols(square(x))); }

Var dropout(const Var& x, double p, bool training, Rng& rng) {
    if (!training || p <= 0.0) return x;
    std::bernoulli_distribution keep(1.0 - p);
    const double s = 1.0 / (1.0 - p);
    Matrix mask(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : 0.0;
    return mul(x, constant(std::move(mask)));
}

Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const RowVector& mean, const RowVector& var,
                    double eps) {
    const RowVector inv_std = (var.array() + eps).rsqrt();
    const Var centered = sub(x, constant(Matrix(mean).replicate(x.rows(), 1)));
    const Var normalized = mul(centered, constant(Matrix(inv_std).replicate(x.rows(), 1)));
    return add(mul(normalized, broadcast_rows(gamma, x.rows())), broadcast_rows(beta, x.rows()));
}

GumbelOutput gumbel_softmax(const Var& logits, double tau, Rng& rng) {
    if (!(tau > 0)) throw Error(ErrorCode::InvalidConfig, "gumbel temperature must be > 0");
    std::uniform_real_distribution<double> unif(std::numeric_limits<double>::min(), 1.0);
    Matrix noise(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = -std::log(-std::log(unif(rng)));
    const Var perturbed = scale(add(logits, constant(std::move(noise))), 1.0 / tau);
    return {softmax_rows(perturbed), log_softmax_rows(perturbed)};
}

Var cross_entropy(const Var& one_hot_targets, const Var& log_probs) {
    require_same_shape("cross_entropy", one_hot_targets, log_probs);
    return scale(sum_all(mul(one_hot_targets, log_probs)), -1.0 / static_cast<double>(log_probs.rows()));
}

Var binary_cross_entropy(const Var& one_hot_targets, const Var& log_probs) {
    require_same_shape("binary_cross_entropy", one_hot_targets, log_probs);
    if (log_probs.cols() != 2) throw Error(ErrorCode::ShapeMismatch, "binary_cross_entropy expects two columns");
    const Var parts[] = {slice_cols(log_probs, 1, 1), slice_cols(log_probs, 0, 1)};
    const Var log_complement = concat_cols(parts);
    Matrix flipped = 1.0 - one_hot_targets.value().array();
    const Var terms = add(mul(one_hot_targets, log_probs), mul(constant(std::move(flipped)), log_complement));
    return scale(sum_all(terms), -1.0 / static_cast<double>(log_probs.value().size()));
}

// ── differentiation ────────────────────────────────────────────────────────

std::vector<Var> grad(const Var& root, std::span<const Var> wrt, bool create_graph) {
    if (root.rows() != 1 || root.cols() != 1)
        throw Error(ErrorCode::NotScalarRoot, "gradient root is " + std::to_string(root.rows()) + "x" +
                                                  std::to_string(root.cols()));
    std::vector<Var> result(wrt.size());
    auto zeros_for = [&](std::size_t i) { return constant(Matrix::Zero(wrt[i].rows(), wrt[i].cols())); };
    if (!root.requires_grad()) {
        for (std::size_t i = 0; i < wrt.size(); ++i) result[i] = zeros_for(i);
        return result;
    }

    // Post-order DFS; reversed, it visits every node after all its consumers.
    std::vector<std::shared_ptr<Node>> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
    stack.emplace_back(root.node(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            const auto& child = node->inputs[next++].node();
            if (child && child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    std::unordered_set<Node*> targets;
    for (const auto& w : wrt) targets.insert(w.get());

    std::optional<NoGradGuard> no_grad;
    if (!create_graph) no_grad.emplace();

    std::unordered_map<Node*, Var> grads;
    grads[root.get()] = constant(Matrix::Ones(1, 1));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = it->get();
        auto found = grads.find(node);
        if (found == grads.end()) continue;
        if (node->op == Op::Leaf) continue;
        if (create_graph && !node->second_order)
            throw Error(ErrorCode::UnsupportedOpForSecondOrder,
                        std::string(op_name(node->op)) + " has no differentiable gradient rule");
        const Var g = found->second;
        if (!targets.count(node)) grads.erase(found);
        const auto input_grads = node->backward(Var(*it), g);
        for (std::size_t i = 0; i < node->inputs.size(); ++i) {
            const Var& in = node->inputs[i];
            if (!in.requires_grad() || !input_grads[i].defined()) continue;
            auto slot = grads.find(in.get());
            if (slot == grads.end())
                grads.emplace(in.get(), input_grads[i]);
            else
                slot->second = add(slot->second, input_grads[i]);
        }
    }

    for (std::size_t i = 0; i < wrt.size(); ++i) {
        auto found = grads.find(wrt[i].get());
        result[i] = found == grads.end() ? zeros_for(i) : found->second;
    }
    return result;
}

Var input_gradient(const Var& root, const Var& input) {
    const Var wrt[] = {input};
    return grad(root, wrt, /*create_graph=*/true).front();
}

}  // namespace ctdgan::ad
