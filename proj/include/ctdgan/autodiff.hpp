#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "ctdgan/matrix.hpp"

// Define-by-run reverse-mode differentiation over row-major matrices.
//
// Every operation evaluates eagerly and, when gradients are enabled and an
// input requires them, records a node whose backward rule is itself written
// in terms of recorded operations. Gradients computed with
// `create_graph = true` are therefore ordinary graph nodes and can be
// differentiated again, which is what the gradient penalty needs.

namespace ctdgan::ad {

using Rng = std::mt19937_64;

enum class Op {
    Leaf,
    MatMul,
    Transpose,
    Add,
    Sub,
    Mul,
    Scale,
    AddScalar,
    BroadcastRows,
    SumRows,
    BroadcastCols,
    SumCols,
    Exp,
    Log,
    Tanh,
    Relu,
    LeakyRelu,
    Reciprocal,
    Sqrt,
    Reshape,
    SliceCols,
    PadCols,
    ConcatCols,
    BatchNorm,
};

const char* op_name(Op op) noexcept;

struct Node;

/// Handle to a graph node. Cheap to copy; shares the node.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Matrix& value() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    /// Value of a 1x1 node.
    double item() const;
    bool requires_grad() const;
    Op op() const;

    /// Leaves only: in-place update of a parameter or buffer.
    Matrix& mutable_value();

    Node* get() const noexcept { return node_.get(); }
    const std::shared_ptr<Node>& node() const noexcept { return node_; }

private:
    std::shared_ptr<Node> node_;
};

using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad)>;

struct Node {
    Op op = Op::Leaf;
    Matrix value;
    std::vector<Var> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    // False when the backward rule produces detached values (batch norm in
    // training mode); such nodes cannot sit on a create_graph path.
    bool second_order = true;
};

/// True unless a NoGradGuard is alive on this thread.
bool grad_enabled() noexcept;

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

Var constant(Matrix value);
Var parameter(Matrix value);
Var scalar_constant(double v);

// ── primitive ops ──────────────────────────────────────────────────────────
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_scalar(const Var& a, double c);
Var broadcast_rows(const Var& row, Eigen::Index rows);  // 1 x c -> rows x c
Var sum_rows(const Var& a);                              // r x c -> 1 x c
Var broadcast_cols(const Var& col, Eigen::Index cols);  // r x 1 -> r x cols
Var sum_cols(const Var& a);                              // r x c -> r x 1
Var exp(const Var& a);
/// log(max(a, floor)); the gradient is zero where the floor is active.
Var log(const Var& a, double floor = 0.0);
Var tanh(const Var& a);
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope);
/// 1/a, defined as 0 where a == 0.
Var reciprocal(const Var& a);
/// Gradient taken as 0 where the value is 0.
Var sqrt(const Var& a);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var slice_cols(const Var& a, Eigen::Index offset, Eigen::Index width);
Var pad_cols(const Var& a, Eigen::Index offset, Eigen::Index total);
Var concat_cols(std::span<const Var> parts);

/// Normalizes each column with the batch statistics. The batch mean and
/// biased variance are written to the optional outputs. First-order only.
Var batch_norm_train(const Var& x, const Var& gamma, const Var& beta, double eps, RowVector* batch_mean = nullptr,
                     RowVector* batch_var = nullptr);

// ── composites ─────────────────────────────────────────────────────────────
inline Var neg(const Var& a) { return scale(a, -1.0); }
inline Var square(const Var& a) { return mul(a, a); }
Var sum_all(const Var& a);
Var mean_all(const Var& a);
/// x W^T + b with W stored as (out x in) and b as (1 x out).
Var affine(const Var& x, const Var& weight, const Var& bias);
Var softmax_rows(const Var& x);
Var log_softmax_rows(const Var& x);
/// Euclidean norm of every row, r x 1.
Var row_norm(const Var& x);
/// Inverted dropout with a fresh Bernoulli mask; identity when not training.
Var dropout(const Var& x, double p, bool training, Rng& rng);
/// Batch norm with fixed statistics (evaluation mode).
Var batch_norm_eval(const Var& x, const Var& gamma, const Var& beta, const RowVector& mean, const RowVector& var,
                    double eps);

struct GumbelOutput {
    Var probs;
    Var log_probs;
};

/// softmax((logits + g) / tau) with i.i.d. standard Gumbel g. The log of the
/// same output is computed stably alongside.
GumbelOutput gumbel_softmax(const Var& logits, double tau, Rng& rng);

/// Mean over rows of -sum_j t_ij log p_ij.
Var cross_entropy(const Var& one_hot_targets, const Var& log_probs);
/// Element-mean binary cross-entropy of a two-column simplex output, where
/// log(1 - p_j) is the log-probability of the other column.
Var binary_cross_entropy(const Var& one_hot_targets, const Var& log_probs);

// ── differentiation ────────────────────────────────────────────────────────

/// Gradients of the 1x1 `root` with respect to each of `wrt` (zeros when
/// unreachable). With `create_graph` the results are differentiable nodes.
std::vector<Var> grad(const Var& root, std::span<const Var> wrt, bool create_graph = false);

/// d root / d input as a graph node, for double backpropagation.
Var input_gradient(const Var& root, const Var& input);

}  // namespace ctdgan::ad
