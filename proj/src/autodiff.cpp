#include "srf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace srf {

namespace {

thread_local bool g_intra_op_parallel = true;
thread_local int g_no_grad_depth = 0;

constexpr std::size_t kParallelRowThreshold = 64;

void check_defined(const Var& v, const char* op) {
    if (!v.defined()) throw std::invalid_argument(std::string(op) + ": undefined operand");
}

Var make_result(Array value, std::vector<NodePtr> parents, std::function<void(Node&)> fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    bool needs_grad = false;
    if (g_no_grad_depth == 0)
        for (const auto& p : parents) needs_grad = needs_grad || p->requires_grad;
    node->requires_grad = needs_grad;
    if (needs_grad) {
        node->parents = std::move(parents);
        node->backward_fn = std::move(fn);
    }
    return Var(std::move(node));
}

enum class Broadcast { None, AScalar, BScalar, ARow, BRow };

// Resolves the supported broadcast patterns for elementwise binary ops.
Broadcast resolve_broadcast(const Array& a, const Array& b, const char* op) {
    if (a.shape == b.shape) return Broadcast::None;
    if (a.numel() == 1 && a.rank() <= 1) return Broadcast::AScalar;
    if (b.numel() == 1 && b.rank() <= 1) return Broadcast::BScalar;
    if (a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1]) return Broadcast::BRow;
    if (b.rank() == 2 && a.rank() == 1 && a.shape[0] == b.shape[1]) return Broadcast::ARow;
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                " vs " + shape_str(b.shape));
}

// g has the result shape; reduce it onto an operand that was broadcast.
void accumulate_broadcast_grad(Array& target, const Array& g, bool was_scalar) {
    if (was_scalar) {
        double s = 0.0;
        for (double v : g.data) s += v;
        target.data[0] += s;
        return;
    }
    // row-vector broadcast over a 2-D result: sum over rows
    const std::size_t rows = g.shape[0];
    const std::size_t cols = g.shape[1];
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) target.data[j] += g.data[i * cols + j];
}

template <typename Fwd>
Array broadcast_apply(const Array& a, const Array& b, Broadcast bc, Fwd f) {
    switch (bc) {
        case Broadcast::None: {
            Array out = Array::zeros(a.shape);
            for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = f(a.data[i], b.data[i]);
            return out;
        }
        case Broadcast::AScalar: {
            Array out = Array::zeros(b.shape);
            for (std::size_t i = 0; i < b.numel(); ++i) out.data[i] = f(a.data[0], b.data[i]);
            return out;
        }
        case Broadcast::BScalar: {
            Array out = Array::zeros(a.shape);
            for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = f(a.data[i], b.data[0]);
            return out;
        }
        case Broadcast::BRow: {
            Array out = Array::zeros(a.shape);
            const std::size_t rows = a.shape[0], cols = a.shape[1];
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    out.data[i * cols + j] = f(a.data[i * cols + j], b.data[j]);
            return out;
        }
        case Broadcast::ARow: {
            Array out = Array::zeros(b.shape);
            const std::size_t rows = b.shape[0], cols = b.shape[1];
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    out.data[i * cols + j] = f(a.data[j], b.data[i * cols + j]);
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

// Backward helper for add/sub: da = +g (or -g), honoring broadcast reduction.
void add_like_backward(Node& self, int sign_a, int sign_b, Broadcast bc) {
    const Array& g = self.grad;
    Node& pa = *self.parents[0];
    Node& pb = *self.parents[1];
    auto push = [&](Node& p, int sign, bool scalar_bc, bool row_bc) {
        if (!p.requires_grad) return;
        p.ensure_grad();
        if (!scalar_bc && !row_bc) {
            for (std::size_t i = 0; i < g.numel(); ++i) p.grad.data[i] += sign * g.data[i];
        } else if (scalar_bc) {
            double s = 0.0;
            for (double v : g.data) s += v;
            p.grad.data[0] += sign * s;
        } else {
            const std::size_t rows = g.shape[0], cols = g.shape[1];
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j)
                    p.grad.data[j] += sign * g.data[i * cols + j];
        }
    };
    push(pa, sign_a, bc == Broadcast::AScalar, bc == Broadcast::ARow);
    push(pb, sign_b, bc == Broadcast::BScalar, bc == Broadcast::BRow);
}

}  // namespace

void Node::ensure_grad() {
    if (grad.data.empty()) grad = Array::zeros(value.shape);
}

Var::Var(Array value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

const Array& Var::grad() const {
    if (!node_->has_grad()) {
        // Lazily materialize so callers can read a zero gradient before any backward().
        node_->ensure_grad();
    }
    return node_->grad;
}

void Var::zero_grad() {
    if (node_->has_grad()) std::fill(node_->grad.data.begin(), node_->grad.data.end(), 0.0);
}

void set_intra_op_parallelism(bool enabled) { g_intra_op_parallel = enabled; }
bool intra_op_parallelism() { return g_intra_op_parallel; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

Var add(const Var& a, const Var& b) {
    check_defined(a, "add");
    check_defined(b, "add");
    Broadcast bc = resolve_broadcast(a.value(), b.value(), "add");
    Array out = broadcast_apply(a.value(), b.value(), bc, [](double x, double y) { return x + y; });
    return make_result(std::move(out), {a.node(), b.node()},
                       [bc](Node& self) { add_like_backward(self, +1, +1, bc); });
}

Var sub(const Var& a, const Var& b) {
    check_defined(a, "sub");
    check_defined(b, "sub");
    Broadcast bc = resolve_broadcast(a.value(), b.value(), "sub");
    Array out = broadcast_apply(a.value(), b.value(), bc, [](double x, double y) { return x - y; });
    return make_result(std::move(out), {a.node(), b.node()},
                       [bc](Node& self) { add_like_backward(self, +1, -1, bc); });
}

Var mul(const Var& a, const Var& b) {
    check_defined(a, "mul");
    check_defined(b, "mul");
    Broadcast bc = resolve_broadcast(a.value(), b.value(), "mul");
    Array out = broadcast_apply(a.value(), b.value(), bc, [](double x, double y) { return x * y; });
    return make_result(std::move(out), {a.node(), b.node()}, [bc](Node& self) {
        const Array& g = self.grad;
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        const Array& va = pa.value;
        const Array& vb = pb.value;
        auto other_at = [&](const Array& other, Broadcast other_bc_scalar, Broadcast other_bc_row,
                            Broadcast bc_now, std::size_t flat, std::size_t cols) -> double {
            if (bc_now == other_bc_scalar) return other.data[0];
            if (bc_now == other_bc_row) return other.data[flat % cols];
            return other.data[flat];
        };
        const std::size_t cols = g.rank() == 2 ? g.shape[1] : g.numel();
        if (pa.requires_grad) {
            pa.ensure_grad();
            if (bc == Broadcast::AScalar) {
                double s = 0.0;
                for (std::size_t i = 0; i < g.numel(); ++i) s += g.data[i] * vb.data[i];
                pa.grad.data[0] += s;
            } else if (bc == Broadcast::ARow) {
                for (std::size_t i = 0; i < g.numel(); ++i)
                    pa.grad.data[i % cols] += g.data[i] * vb.data[i];
            } else {
                for (std::size_t i = 0; i < g.numel(); ++i)
                    pa.grad.data[i] +=
                        g.data[i] * other_at(vb, Broadcast::BScalar, Broadcast::BRow, bc, i, cols);
            }
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            if (bc == Broadcast::BScalar) {
                double s = 0.0;
                for (std::size_t i = 0; i < g.numel(); ++i) s += g.data[i] * va.data[i];
                pb.grad.data[0] += s;
            } else if (bc == Broadcast::BRow) {
                for (std::size_t i = 0; i < g.numel(); ++i)
                    pb.grad.data[i % cols] += g.data[i] * va.data[i];
            } else {
                for (std::size_t i = 0; i < g.numel(); ++i)
                    pb.grad.data[i] +=
                        g.data[i] * other_at(va, Broadcast::AScalar, Broadcast::ARow, bc, i, cols);
            }
        }
    });
}

namespace {

// C = A(M,K) * B(K,N), C preallocated and zeroed
void matmul_nn(const double* __restrict a, const double* __restrict b, double* __restrict c,
               std::size_t M, std::size_t K, std::size_t N) {
    const bool par = g_intra_op_parallel && M >= kParallelRowThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (long long ii = 0; ii < static_cast<long long>(M); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        double* crow = c + i * N;
        const double* arow = a + i * K;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            const double* brow = b + k * N;
            for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
        }
    }
}

// C += A(M,N) * B(K,N)^T  -> (M,K)
void matmul_nt_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
                   std::size_t M, std::size_t N, std::size_t K) {
    const bool par = g_intra_op_parallel && M >= kParallelRowThreshold;
#pragma omp parallel for schedule(static) if (par)
    for (long long ii = 0; ii < static_cast<long long>(M); ++ii) {
        const std::size_t i = static_cast<std::size_t>(ii);
        const double* arow = a + i * N;
        double* crow = c + i * K;
        for (std::size_t k = 0; k < K; ++k) {
            const double* brow = b + k * N;
            double s = 0.0;
            for (std::size_t j = 0; j < N; ++j) s += arow[j] * brow[j];
            crow[k] += s;
        }
    }
}

// C += A(M,K)^T * B(M,N)  -> (K,N). Row-major walk keeps the K x N
// accumulator hot; sequential so gradient accumulation stays bit-stable.
void matmul_tn_acc(const double* __restrict a, const double* __restrict b, double* __restrict c,
                   std::size_t M, std::size_t K, std::size_t N) {
    for (std::size_t i = 0; i < M; ++i) {
        const double* arow = a + i * K;
        const double* brow = b + i * N;
        for (std::size_t k = 0; k < K; ++k) {
            const double av = arow[k];
            if (av == 0.0) continue;
            double* crow = c + k * N;
            for (std::size_t j = 0; j < N; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    const Array& va = a.value();
    const Array& vb = b.value();
    if (va.rank() != 2 || vb.rank() != 2 || va.shape[1] != vb.shape[0]) {
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(va.shape) + " vs " +
                                    shape_str(vb.shape));
    }
    const std::size_t M = va.shape[0], K = va.shape[1], N = vb.shape[1];
    Array out = Array::zeros({M, N});
    matmul_nn(va.data.data(), vb.data.data(), out.data.data(), M, K, N);
    return make_result(std::move(out), {a.node(), b.node()}, [M, K, N](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) {
            pa.ensure_grad();
            matmul_nt_acc(self.grad.data.data(), pb.value.data.data(), pa.grad.data.data(), M, N, K);
        }
        if (pb.requires_grad) {
            pb.ensure_grad();
            matmul_tn_acc(pa.value.data.data(), self.grad.data.data(), pb.grad.data.data(), M, K, N);
        }
    });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: empty input list");
    for (const auto& p : parts) check_defined(p, "concat");
    const std::size_t rank = parts[0].value().rank();
    if (axis >= std::max<std::size_t>(rank, 1))
        throw std::invalid_argument("concat: axis " + std::to_string(axis) + " out of range for rank " +
                                    std::to_string(rank));
    for (const auto& p : parts) {
        if (p.value().rank() != rank)
            throw std::invalid_argument("concat: rank mismatch " + shape_str(parts[0].value().shape) +
                                        " vs " + shape_str(p.value().shape));
        for (std::size_t d = 0; d < rank; ++d) {
            if (d != axis && p.value().shape[d] != parts[0].value().shape[d])
                throw std::invalid_argument("concat: shape mismatch " +
                                            shape_str(parts[0].value().shape) + " vs " +
                                            shape_str(p.value().shape));
        }
    }

    Shape out_shape = parts[0].value().shape;
    std::size_t total = 0;
    for (const auto& p : parts) total += p.value().shape[axis];
    out_shape[axis] = total;

    Array out = Array::zeros(out_shape);
    std::vector<std::size_t> offsets(parts.size());
    if (rank == 1 || (rank == 2 && axis == 0)) {
        std::size_t pos = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            offsets[p] = pos;
            const auto& d = parts[p].value().data;
            std::copy(d.begin(), d.end(), out.data.begin() + pos);
            pos += d.size();
        }
    } else if (rank == 2 && axis == 1) {
        const std::size_t rows = out_shape[0];
        std::size_t col_off = 0;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            offsets[p] = col_off;
            const Array& src = parts[p].value();
            const std::size_t pc = src.shape[1];
            for (std::size_t i = 0; i < rows; ++i)
                std::copy(src.data.begin() + i * pc, src.data.begin() + (i + 1) * pc,
                          out.data.begin() + i * total + col_off);
            col_off += pc;
        }
    } else {
        throw std::invalid_argument("concat: only rank-1 and rank-2 inputs supported, got rank " +
                                    std::to_string(rank));
    }

    std::vector<NodePtr> parents;
    parents.reserve(parts.size());
    for (const auto& p : parts) parents.push_back(p.node());
    return make_result(std::move(out), std::move(parents), [rank, axis, offsets, total](Node& self) {
        for (std::size_t p = 0; p < self.parents.size(); ++p) {
            Node& par = *self.parents[p];
            if (!par.requires_grad) continue;
            par.ensure_grad();
            if (rank == 1 || (rank == 2 && axis == 0)) {
                const std::size_t n = par.value.numel();
                for (std::size_t i = 0; i < n; ++i) par.grad.data[i] += self.grad.data[offsets[p] + i];
            } else {
                const std::size_t rows = par.value.shape[0];
                const std::size_t pc = par.value.shape[1];
                for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < pc; ++j)
                        par.grad.data[i * pc + j] += self.grad.data[i * total + offsets[p] + j];
            }
        }
    });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
    check_defined(a, "slice_rows");
    const Array& v = a.value();
    if (v.rank() != 2)
        throw std::invalid_argument("slice_rows: need rank-2 input, got " + shape_str(v.shape));
    if (begin > end || end > v.shape[0])
        throw std::invalid_argument("slice_rows: range [" + std::to_string(begin) + ", " +
                                    std::to_string(end) + ") out of bounds for " + shape_str(v.shape));
    const std::size_t cols = v.shape[1];
    Array out = Array::zeros({end - begin, cols});
    std::copy(v.data.begin() + begin * cols, v.data.begin() + end * cols, out.data.begin());
    return make_result(std::move(out), {a.node()}, [begin, cols](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            p.grad.data[begin * cols + i] += self.grad.data[i];
    });
}

Var reshape(const Var& a, const Shape& shape) {
    check_defined(a, "reshape");
    if (shape_numel(shape) != a.value().numel())
        throw std::invalid_argument("reshape: cannot view " + shape_str(a.value().shape) + " as " +
                                    shape_str(shape));
    Array out(shape, a.value().data);
    return make_result(std::move(out), {a.node()}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i) p.grad.data[i] += self.grad.data[i];
    });
}

namespace {

template <typename F, typename DF>
Var unary_op(const Var& a, const char* name, F f, DF df) {
    check_defined(a, name);
    Array out = Array::zeros(a.value().shape);
    for (std::size_t i = 0; i < out.numel(); ++i) out.data[i] = f(a.value().data[i]);
    return make_result(std::move(out), {a.node()}, [df](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.numel(); ++i)
            p.grad.data[i] += self.grad.data[i] * df(p.value.data[i], self.value.data[i]);
    });
}

}  // namespace

Var exp_op(const Var& a) {
    return unary_op(
        a, "exp", [](double x) { return std::exp(x); },
        [](double, double y) { return y; });
}

Var log_op(const Var& a) {
    return unary_op(
        a, "log", [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Var pow_op(const Var& a, double exponent) {
    if (exponent == 1.0) {
        // identity exponent: pass through with unit derivative
        return unary_op(
            a, "pow", [](double x) { return x; }, [](double, double) { return 1.0; });
    }
    return unary_op(
        a, "pow", [exponent](double x) { return std::pow(x, exponent); },
        [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Var abs_op(const Var& a) {
    return unary_op(
        a, "abs", [](double x) { return std::abs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var leaky_relu(const Var& a, double slope) {
    return unary_op(
        a, "leaky_relu", [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var clamp(const Var& a, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("clamp: need lo < hi");
    return unary_op(
        a, "clamp", [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum_all(const Var& a) {
    check_defined(a, "sum");
    double s = 0.0;
    for (double v : a.value().data) s += v;
    return make_result(Array::scalar(s), {a.node()}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad.data[0];
        for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad.data[i] += g;
    });
}

Var mean_all(const Var& a) {
    check_defined(a, "mean");
    const std::size_t n = a.value().numel();
    if (n == 0) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double v : a.value().data) s += v;
    return make_result(Array::scalar(s / static_cast<double>(n)), {a.node()}, [n](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        const double g = self.grad.data[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < p.grad.numel(); ++i) p.grad.data[i] += g;
    });
}

namespace {

void last_axis_dims(const Array& v, const char* op, std::size_t& rows, std::size_t& d, Shape& out_shape) {
    if (v.rank() == 1) {
        rows = 1;
        d = v.shape[0];
        out_shape = Shape{};
    } else if (v.rank() == 2) {
        rows = v.shape[0];
        d = v.shape[1];
        out_shape = Shape{rows};
    } else {
        throw std::invalid_argument(std::string(op) + ": need rank 1 or 2, got " + shape_str(v.shape));
    }
}

}  // namespace

Var sum_last_axis(const Var& a) {
    check_defined(a, "sum_last_axis");
    std::size_t rows, d;
    Shape out_shape;
    last_axis_dims(a.value(), "sum_last_axis", rows, d, out_shape);
    Array out = Array::zeros(out_shape);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += a.value().data[i * d + j];
        out.data[i] = s;
    }
    return make_result(std::move(out), {a.node()}, [rows, d](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < d; ++j) p.grad.data[i * d + j] += self.grad.data[i];
    });
}

Var norm_last_axis(const Var& a) {
    check_defined(a, "norm_last_axis");
    std::size_t rows, d;
    Shape out_shape;
    last_axis_dims(a.value(), "norm_last_axis", rows, d, out_shape);
    Array out = Array::zeros(out_shape);
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double x = a.value().data[i * d + j];
            s += x * x;
        }
        out.data[i] = std::sqrt(s);
    }
    return make_result(std::move(out), {a.node()}, [rows, d](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < rows; ++i) {
            const double nrm = self.value.data[i];
            if (nrm == 0.0) continue;  // subgradient 0 at the zero vector
            const double g = self.grad.data[i] / nrm;
            for (std::size_t j = 0; j < d; ++j)
                p.grad.data[i * d + j] += g * p.value.data[i * d + j];
        }
    });
}

Var pairwise_diff(const Var& a) {
    check_defined(a, "pairwise_diff");
    const Array& v = a.value();
    if (v.rank() != 2)
        throw std::invalid_argument("pairwise_diff: need rank-2 input, got " + shape_str(v.shape));
    const std::size_t m = v.shape[0], d = v.shape[1];
    if (m < 2)
        throw std::invalid_argument("pairwise_diff: need at least 2 rows, got " +
                                    std::to_string(m));
    const std::size_t npairs = m * (m - 1) / 2;
    Array out = Array::zeros({npairs, d});
    std::size_t p = 0;
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k, ++p)
            for (std::size_t c = 0; c < d; ++c)
                out.data[p * d + c] = v.data[j * d + c] - v.data[k * d + c];
    return make_result(std::move(out), {a.node()}, [m, d](Node& self) {
        Node& par = *self.parents[0];
        if (!par.requires_grad) return;
        par.ensure_grad();
        std::size_t p = 0;
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t k = j + 1; k < m; ++k, ++p)
                for (std::size_t c = 0; c < d; ++c) {
                    const double g = self.grad.data[p * d + c];
                    par.grad.data[j * d + c] += g;
                    par.grad.data[k * d + c] -= g;
                }
    });
}

Var scale(const Var& a, double c) { return mul(a, Var(Array::scalar(c), false)); }

void backward(const Var& root) {
    if (!root.defined()) throw std::invalid_argument("backward: undefined root");
    if (root.value().rank() != 0)
        throw std::invalid_argument("backward: root must be scalar, got shape " +
                                    shape_str(root.value().shape));
    if (!root.requires_grad())
        throw std::invalid_argument("backward: root does not require grad");

    // Iterative post-order DFS; reversed it yields a topological order with
    // the root first. Order depends only on graph construction, so repeated
    // backward passes are bit-for-bit identical.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.node().get(), 0});
    visited.insert(root.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    // Interior grads are per-pass scratch; only leaf grads accumulate across
    // repeated backward() calls.
    for (Node* n : order) {
        if (n->backward_fn && n->has_grad())
            std::fill(n->grad.data.begin(), n->grad.data.end(), 0.0);
    }

    root.node()->ensure_grad();
    root.node()->grad.data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->has_grad()) n->backward_fn(*n);
    }
}

}  // namespace srf
