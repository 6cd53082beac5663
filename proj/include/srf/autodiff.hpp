#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "srf/array.hpp"

namespace srf {

// Reverse-mode tape node. Graphs are built fresh per step; parameter leaves
// live across steps and accumulate gradients until the caller zeroes them.
struct Node {
    Array value;
    Array grad;  // materialized lazily; empty until first write
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad();
    bool has_grad() const { return !grad.data.empty(); }
};

using NodePtr = std::shared_ptr<Node>;

// Value-semantics handle to a Node. Arrays are immutable once wrapped.
class Var {
public:
    Var() = default;
    explicit Var(Array value, bool requires_grad = false);
    explicit Var(NodePtr node) : node_(std::move(node)) {}

    bool defined() const { return node_ != nullptr; }
    const Array& value() const { return node_->value; }
    const Array& grad() const;
    bool requires_grad() const { return node_->requires_grad; }
    void zero_grad();
    const NodePtr& node() const { return node_; }

    // In-place parameter update (optimizer use only; never call on a node
    // that is part of a live graph).
    std::vector<double>& mutable_data() { return node_->value.data; }

private:
    NodePtr node_;
};

// Elementwise binary ops. Broadcasting: identical shapes, scalar against
// anything, or a 1-D vector against the rows of a 2-D matrix.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

Var matmul(const Var& a, const Var& b);            // 2-D x 2-D
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);
Var reshape(const Var& a, const Shape& shape);     // same element count

Var exp_op(const Var& a);
Var log_op(const Var& a);
Var pow_op(const Var& a, double exponent);
Var abs_op(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var clamp(const Var& a, double lo, double hi);

Var sum_all(const Var& a);
Var mean_all(const Var& a);
Var sum_last_axis(const Var& a);    // (m, d) -> (m); (d) -> scalar
Var norm_last_axis(const Var& a);   // Euclidean norm; subgradient 0 at zero rows

// Row differences x_j - x_k over unordered pairs j < k of a (m, d) matrix;
// result is (m(m-1)/2, d).
Var pairwise_diff(const Var& a);

Var scale(const Var& a, double c);  // mul by a constant scalar

// Accumulates d(root)/d(leaf) into every reachable requires_grad leaf.
// root must be scalar. Repeated calls accumulate; callers zero between steps.
void backward(const Var& root);

// Hot loops (matmul) use OpenMP unless disabled for the current thread;
// sweep workers disable it to avoid oversubscription.
void set_intra_op_parallelism(bool enabled);
bool intra_op_parallelism();

// While alive, ops on this thread record no backward rules and their results
// do not require grad. Used by evaluation paths.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

}  // namespace srf
