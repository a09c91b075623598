#pragma once

// Dense 2-D tensors of doubles with reverse-mode differentiation over a
// dynamic (define-by-run) tape. Ops executed while a Tape is alive are
// recorded on it; without an active tape they evaluate values only.
// A Tape and the tensors taped on it are confined to one thread.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "skvmn/errors.hpp"

namespace skvmn {

namespace detail {

struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
    std::vector<double> grad;  // persistent accumulator, lazily allocated
    std::vector<double> adj;   // backward scratch, owned by the running Tape
    bool requires_grad = false;
    std::uint64_t tape_mark = 0;  // dedup stamp for Tape::touch
};

}  // namespace detail

class Tensor;

class Tape {
public:
    Tape() : serial_(++counter_), parent_(current_) { current_ = this; }
    ~Tape() { current_ = parent_; }

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current() { return current_; }

    // Registers a node as participating in this tape (idempotent).
    void touch(const std::shared_ptr<detail::Node>& n) {
        if (n->tape_mark == serial_) return;
        n->tape_mark = serial_;
        touched_.push_back(n);
    }

    void record(std::function<void()> back) { entries_.push_back(std::move(back)); }

    // Seeds the scalar loss with adjoint 1, replays recorded ops in reverse,
    // then folds adjoints into the persistent grad of every requires_grad node.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }

private:
    std::uint64_t serial_;
    Tape* parent_;
    std::vector<std::function<void()>> entries_;
    std::vector<std::shared_ptr<detail::Node>> touched_;

    static inline thread_local Tape* current_ = nullptr;
    static inline thread_local std::uint64_t counter_ = 0;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(int rows, int cols) { return filled(rows, cols, 0.0); }

    static Tensor filled(int rows, int cols, double v) {
        Tensor t = make(rows, cols);
        std::fill(t.n_->value.begin(), t.n_->value.end(), v);
        return t;
    }

    static Tensor scalar(double v) { return filled(1, 1, v); }

    static Tensor from_data(int rows, int cols, std::vector<double> data) {
        if (static_cast<std::size_t>(rows) * cols != data.size())
            throw DimensionError("from_data: " + std::to_string(data.size()) +
                                 " values for shape " + shape_str(rows, cols));
        Tensor t = make(rows, cols);
        t.n_->value = std::move(data);
        return t;
    }

    static Tensor row(std::vector<double> data) {
        const int c = static_cast<int>(data.size());
        return from_data(1, c, std::move(data));
    }

    bool defined() const { return n_ != nullptr; }
    int rows() const { return n_->rows; }
    int cols() const { return n_->cols; }
    int size() const { return n_->rows * n_->cols; }

    double at(int r, int c) const { return n_->value[static_cast<std::size_t>(r) * n_->cols + c]; }
    double& at(int r, int c) { return n_->value[static_cast<std::size_t>(r) * n_->cols + c]; }
    double item() const {
        if (size() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(rows(), cols()));
        return n_->value[0];
    }

    const std::vector<double>& data() const { return n_->value; }
    std::vector<double>& data() { return n_->value; }

    bool requires_grad() const { return n_->requires_grad; }
    Tensor& set_requires_grad(bool b = true) {
        n_->requires_grad = b;
        return *this;
    }

    bool has_grad() const { return !n_->grad.empty(); }
    const std::vector<double>& grad() const { return n_->grad; }
    std::vector<double>& grad_buffer() {
        if (n_->grad.empty()) n_->grad.assign(n_->value.size(), 0.0);
        return n_->grad;
    }
    void zero_grad() { n_->grad.assign(n_->value.size(), 0.0); }

    // Value-copy with no tape history; grads never flow through.
    Tensor detached() const {
        Tensor t = make(rows(), cols());
        t.n_->value = n_->value;
        return t;
    }

    std::shared_ptr<detail::Node> node() const { return n_; }

    static std::string shape_str(int r, int c) {
        return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
    }
    std::string shape_str() const { return shape_str(rows(), cols()); }

private:
    static Tensor make(int rows, int cols) {
        if (rows <= 0 || cols <= 0)
            throw DimensionError("tensor extents must be positive, got " + shape_str(rows, cols));
        Tensor t;
        t.n_ = std::make_shared<detail::Node>();
        t.n_->rows = rows;
        t.n_->cols = cols;
        t.n_->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        return t;
    }

    std::shared_ptr<detail::Node> n_;

    friend Tensor make_result(int rows, int cols);
};

inline Tensor make_result(int rows, int cols) { return Tensor::zeros(rows, cols); }

inline void Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ContractError("backward requires a scalar loss, got " +
                            (loss.defined() ? loss.shape_str() : std::string("<undefined>")));
    for (auto& n : touched_) n->adj.assign(n->value.size(), 0.0);
    auto ln = loss.node();
    if (ln->adj.empty()) ln->adj.assign(1, 0.0);
    ln->adj[0] = 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) (*it)();
    for (auto& n : touched_) {
        if (!n->requires_grad) continue;
        if (n->grad.empty()) n->grad.assign(n->value.size(), 0.0);
        for (std::size_t i = 0; i < n->adj.size(); ++i) n->grad[i] += n->adj[i];
    }
}

namespace detail {

// Registers the op on the active tape, if any. The closure reads out->adj and
// accumulates into the inputs' adj buffers.
inline void tape_op(std::initializer_list<Tensor> inputs, const Tensor& out,
                    std::function<void()> back) {
    Tape* t = Tape::current();
    if (!t) return;
    bool any_grad = false;
    for (const auto& in : inputs) {
        t->touch(in.node());
        if (in.node()->requires_grad) any_grad = true;
    }
    t->touch(out.node());
    if (any_grad) out.node()->requires_grad = true;
    t->record(std::move(back));
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                             b.shape_str());
}

}  // namespace detail

// ---- binary elementwise (same shape, or scalar on either side) ----

namespace detail {

template <class Fwd, class Back>
Tensor binary_ew(const char* name, const Tensor& a, const Tensor& b, Fwd fwd, Back back) {
    const bool a_scalar = a.size() == 1;
    const bool b_scalar = b.size() == 1;
    if (!a_scalar && !b_scalar) check_same_shape(name, a, b);
    const Tensor& shape_src = a_scalar ? b : a;
    Tensor out = make_result(shape_src.rows(), shape_src.cols());
    const int n = out.size();
    for (int i = 0; i < n; ++i) {
        const double x = a_scalar ? a.data()[0] : a.data()[i];
        const double y = b_scalar ? b.data()[0] : b.data()[i];
        out.data()[i] = fwd(x, y);
    }
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    tape_op({a, b}, out, [an, bn, on, a_scalar, b_scalar, back]() {
        const std::size_t n = on->adj.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double x = a_scalar ? an->value[0] : an->value[i];
            const double y = b_scalar ? bn->value[0] : bn->value[i];
            double dx = 0.0, dy = 0.0;
            back(x, y, on->adj[i], dx, dy);
            an->adj[a_scalar ? 0 : i] += dx;
            bn->adj[b_scalar ? 0 : i] += dy;
        }
    });
    return out;
}

template <class Fwd, class Back>
Tensor unary_ew(const Tensor& a, Fwd fwd, Back back) {
    Tensor out = make_result(a.rows(), a.cols());
    const int n = out.size();
    for (int i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i]);
    auto an = a.node();
    auto on = out.node();
    tape_op({a}, out, [an, on, back]() {
        for (std::size_t i = 0; i < on->adj.size(); ++i)
            an->adj[i] += back(an->value[i], on->value[i]) * on->adj[i];
    });
    return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::binary_ew(
        "add", a, b, [](double x, double y) { return x + y; },
        [](double, double, double d, double& dx, double& dy) {
            dx = d;
            dy = d;
        });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::binary_ew(
        "sub", a, b, [](double x, double y) { return x - y; },
        [](double, double, double d, double& dx, double& dy) {
            dx = d;
            dy = -d;
        });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::binary_ew(
        "mul", a, b, [](double x, double y) { return x * y; },
        [](double x, double y, double d, double& dx, double& dy) {
            dx = d * y;
            dy = d * x;
        });
}

inline Tensor scale(const Tensor& a, double c) {
    return detail::unary_ew(
        a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::unary_ew(
        a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
    return detail::unary_ew(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor log(const Tensor& a) {
    for (double v : a.data())
        if (v <= 0.0) throw Error("log: non-positive input " + std::to_string(v));
    return detail::unary_ew(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// ---- linear algebra ----

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + a.shape_str() + " vs " +
                             b.shape_str());
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_result(m, n);
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double av = a.at(i, p);
            if (av == 0.0) continue;
            for (int j = 0; j < n; ++j) out.at(i, j) += av * b.at(p, j);
        }
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    detail::tape_op({a, b}, out, [an, bn, on, m, k, n]() {
        // dA = dC * B^T ; dB = A^T * dC
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                double s = 0.0;
                for (int j = 0; j < n; ++j)
                    s += on->adj[static_cast<std::size_t>(i) * n + j] *
                         bn->value[static_cast<std::size_t>(p) * n + j];
                an->adj[static_cast<std::size_t>(i) * k + p] += s;
            }
        for (int p = 0; p < k; ++p)
            for (int j = 0; j < n; ++j) {
                double s = 0.0;
                for (int i = 0; i < m; ++i)
                    s += an->value[static_cast<std::size_t>(i) * k + p] *
                         on->adj[static_cast<std::size_t>(i) * n + j];
                bn->adj[static_cast<std::size_t>(p) * n + j] += s;
            }
    });
    return out;
}

inline Tensor transpose(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out = make_result(n, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    auto an = a.node();
    auto on = out.node();
    detail::tape_op({a}, out, [an, on, m, n]() {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                an->adj[static_cast<std::size_t>(i) * n + j] +=
                    on->adj[static_cast<std::size_t>(j) * m + i];
    });
    return out;
}

// Row-wise softmax with max-subtraction for stability.
inline Tensor softmax_rows(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor out = make_result(m, n);
    for (int i = 0; i < m; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < n; ++j) out.at(i, j) /= z;
    }
    auto an = a.node();
    auto on = out.node();
    detail::tape_op({a}, out, [an, on, m, n]() {
        // dx_j = y_j * (dy_j - sum_k dy_k y_k), per row
        for (int i = 0; i < m; ++i) {
            const std::size_t base = static_cast<std::size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += on->adj[base + j] * on->value[base + j];
            for (int j = 0; j < n; ++j)
                an->adj[base + j] += on->value[base + j] * (on->adj[base + j] - dot);
        }
    });
    return out;
}

inline Tensor sum(const Tensor& a) {
    Tensor out = make_result(1, 1);
    double s = 0.0;
    for (double v : a.data()) s += v;
    out.data()[0] = s;
    auto an = a.node();
    auto on = out.node();
    detail::tape_op({a}, out, [an, on]() {
        for (auto& g : an->adj) g += on->adj[0];
    });
    return out;
}

// Column-wise concatenation of row-compatible tensors.
inline Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw DimensionError("concat: row counts differ, " + a.shape_str() + " vs " +
                             b.shape_str());
    const int m = a.rows(), ca = a.cols(), cb = b.cols();
    Tensor out = make_result(m, ca + cb);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < ca; ++j) out.at(i, j) = a.at(i, j);
        for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b.at(i, j);
    }
    auto an = a.node();
    auto bn = b.node();
    auto on = out.node();
    detail::tape_op({a, b}, out, [an, bn, on, m, ca, cb]() {
        const int c = ca + cb;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < ca; ++j)
                an->adj[static_cast<std::size_t>(i) * ca + j] +=
                    on->adj[static_cast<std::size_t>(i) * c + j];
            for (int j = 0; j < cb; ++j)
                bn->adj[static_cast<std::size_t>(i) * cb + j] +=
                    on->adj[static_cast<std::size_t>(i) * c + ca + j];
        }
    });
    return out;
}

// Rows [r0, r1) as a new tensor.
inline Tensor slice_rows(const Tensor& a, int r0, int r1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw DimensionError("slice_rows: range [" + std::to_string(r0) + "," +
                             std::to_string(r1) + ") out of " + a.shape_str());
    const int n = a.cols(), m = r1 - r0;
    Tensor out = make_result(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.at(i, j) = a.at(r0 + i, j);
    auto an = a.node();
    auto on = out.node();
    detail::tape_op({a}, out, [an, on, r0, m, n]() {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                an->adj[static_cast<std::size_t>(r0 + i) * n + j] +=
                    on->adj[static_cast<std::size_t>(i) * n + j];
    });
    return out;
}

inline void backward(const Tensor& loss) {
    Tape* t = Tape::current();
    if (!t) throw ContractError("backward called without an active tape");
    t->backward(loss);
}

}  // namespace skvmn
