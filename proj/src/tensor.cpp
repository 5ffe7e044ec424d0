#include "morl/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace morl {

namespace {

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::int64_t shape_size(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("non-finite result in op '") + op + "'");
    }
}

Tape* common_tape(const Tensor& a, const Tensor& b) {
    if (a.tracked() && b.tracked() && a.tape() != b.tape())
        throw std::invalid_argument("operands live on different tapes");
    return a.tracked() ? a.tape() : (b.tracked() ? b.tape() : nullptr);
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)),
      data_(std::make_shared<std::vector<double>>(std::move(data))) {
    if (static_cast<std::int64_t>(data_->size()) != shape_size(shape_))
        throw std::invalid_argument("data length does not match shape");
}

Tensor Tensor::zeros(std::vector<int> shape) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    auto n = shape_size(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

std::int64_t Tensor::size() const { return data_ ? static_cast<std::int64_t>(data_->size()) : 0; }

int Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

int Tensor::cols() const {
    if (shape_.size() < 2) return shape_.size() == 1 ? shape_[0] : 1;
    int c = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
    return c;
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item() requires a scalar tensor");
    return (*data_)[0];
}

// ---------------------------------------------------------------------------
// Tape

Tensor Tape::leaf(std::vector<int> shape, std::span<const double> values) {
    if (consumed_) throw std::runtime_error("tape already consumed by backward");
    Tensor t(std::move(shape), std::vector<double>(values.begin(), values.end()));
    t.tape_ = this;
    t.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back({t.size(), nullptr});
    return t;
}

std::vector<double>& Tape::grad_buffer(int i) {
    auto& g = grads_[static_cast<std::size_t>(i)];
    if (g.empty()) g.assign(static_cast<std::size_t>(nodes_[static_cast<std::size_t>(i)].size), 0.0);
    return g;
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw std::runtime_error("backward called twice on one tape");
    if (nodes_.empty()) throw std::runtime_error("backward on empty tape");
    if (!loss.tracked() || loss.tape() != this)
        throw std::invalid_argument("loss is not tracked on this tape");
    if (loss.size() != 1) throw std::invalid_argument("backward requires a scalar loss");

    grads_.assign(nodes_.size(), {});
    grad_buffer(loss.node())[0] = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        auto& node = nodes_[static_cast<std::size_t>(i)];
        if (node.pull && has_grad(i)) node.pull(*this, i);
    }
    consumed_ = true;
}

std::vector<double> Tape::grad(const Tensor& t) const {
    if (!consumed_) throw std::runtime_error("grad queried before backward");
    if (!t.tracked() || t.tape() != this)
        throw std::invalid_argument("tensor is not tracked on this tape");
    const auto& g = grads_[static_cast<std::size_t>(t.node())];
    if (g.empty()) return std::vector<double>(static_cast<std::size_t>(t.size()), 0.0);
    return g;
}

// Internal helper: attach a freshly computed tensor to the tape.
Tensor detail_make_node(Tape* tape, Tensor t, std::vector<int> parents,
                        std::function<void(Tape&, int)> pull) {
    if (!tape) return t;
    if (tape->consumed()) throw std::runtime_error("tape already consumed by backward");
    t.tape_ = tape;
    t.node_ = static_cast<int>(tape->nodes_.size());
    (void)parents;
    tape->nodes_.push_back({t.size(), std::move(pull)});
    return t;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

// Builds the result tensor and, when tracked, registers a pull closure that
// routes the output gradient to up to two parents.
template <typename PullFn>
Tensor unary_node(const char* name, const Tensor& a, std::vector<int> shape,
                  std::vector<double> out, PullFn&& pull_into_parent) {
    check_finite(out, name);
    Tensor r(std::move(shape), std::move(out));
    if (!a.tracked()) return r;
    int pa = a.node();
    return detail_make_node(
        a.tape(), std::move(r), {pa},
        [pa, pull = std::forward<PullFn>(pull_into_parent)](Tape& tape, int self) {
            pull(tape.grad_buffer(self), tape.grad_buffer(pa));
        });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw std::invalid_argument("matmul shape mismatch");
    const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    {
        ConstMatMap A(a.data().data(), m, k), B(b.data().data(), k, n);
        MatMap C(out.data(), m, n);
        C.noalias() = A * B;
    }
    check_finite(out, "matmul");
    Tensor r({m, n}, std::move(out));
    Tape* tape = common_tape(a, b);
    if (!tape) return r;
    int pa = a.tracked() ? a.node() : -1;
    int pb = b.tracked() ? b.node() : -1;
    auto adata = a.data();  // value copies for the backward pass
    auto bdata = b.data();
    return detail_make_node(tape, std::move(r), {pa, pb},
                            [=](Tape& t, int self) {
        ConstMatMap G(t.grad_buffer(self).data(), m, n);
        if (pa >= 0) {
            ConstMatMap B(bdata.data(), k, n);
            MatMap dA(t.grad_buffer(pa).data(), m, k);
            dA.noalias() += G * B.transpose();
        }
        if (pb >= 0) {
            ConstMatMap A(adata.data(), m, k);
            MatMap dB(t.grad_buffer(pb).data(), k, n);
            dB.noalias() += A.transpose() * G;
        }
    });
}

namespace {

// add/sub/mul share shape handling: same shape, or (m,n) op (n) broadcast.
enum class Broadcast { None, Row };

Broadcast binary_mode(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) return Broadcast::None;
    if (a.shape().size() == 2 && b.shape().size() == 1 && a.shape()[1] == b.shape()[0])
        return Broadcast::Row;
    throw std::invalid_argument("binary op shape mismatch");
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    Broadcast mode = binary_mode(a, b);
    std::vector<double> out(a.data());
    if (mode == Broadcast::None) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
    } else {
        const int n = b.shape()[0];
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i % static_cast<std::size_t>(n)];
    }
    check_finite(out, "add");
    Tensor r(a.shape(), std::move(out));
    Tape* tape = common_tape(a, b);
    if (!tape) return r;
    int pa = a.tracked() ? a.node() : -1;
    int pb = b.tracked() ? b.node() : -1;
    const int n = (mode == Broadcast::Row) ? b.shape()[0] : 0;
    return detail_make_node(tape, std::move(r), {pa, pb}, [=](Tape& t, int self) {
        const auto& g = t.grad_buffer(self);
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (pb >= 0) {
            auto& gb = t.grad_buffer(pb);
            if (mode == Broadcast::None) {
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
            } else {
                for (std::size_t i = 0; i < g.size(); ++i) gb[i % static_cast<std::size_t>(n)] += g[i];
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("sub shape mismatch");
    std::vector<double> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
    check_finite(out, "sub");
    Tensor r(a.shape(), std::move(out));
    Tape* tape = common_tape(a, b);
    if (!tape) return r;
    int pa = a.tracked() ? a.node() : -1;
    int pb = b.tracked() ? b.node() : -1;
    return detail_make_node(tape, std::move(r), {pa, pb}, [=](Tape& t, int self) {
        const auto& g = t.grad_buffer(self);
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (pb >= 0) {
            auto& gb = t.grad_buffer(pb);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    Broadcast mode = binary_mode(a, b);
    const int n = (mode == Broadcast::Row) ? b.shape()[0] : 0;
    std::vector<double> out(a.data());
    if (mode == Broadcast::None) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i % static_cast<std::size_t>(n)];
    }
    check_finite(out, "mul");
    Tensor r(a.shape(), std::move(out));
    Tape* tape = common_tape(a, b);
    if (!tape) return r;
    int pa = a.tracked() ? a.node() : -1;
    int pb = b.tracked() ? b.node() : -1;
    auto adata = a.data();
    auto bdata = b.data();
    return detail_make_node(tape, std::move(r), {pa, pb}, [=](Tape& t, int self) {
        const auto& g = t.grad_buffer(self);
        if (pa >= 0) {
            auto& ga = t.grad_buffer(pa);
            if (mode == Broadcast::None)
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bdata[i];
            else
                for (std::size_t i = 0; i < g.size(); ++i)
                    ga[i] += g[i] * bdata[i % static_cast<std::size_t>(n)];
        }
        if (pb >= 0) {
            auto& gb = t.grad_buffer(pb);
            if (mode == Broadcast::None)
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * adata[i];
            else
                for (std::size_t i = 0; i < g.size(); ++i)
                    gb[i % static_cast<std::size_t>(n)] += g[i] * adata[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (auto& v : out) v *= c;
    return unary_node("scale", a, a.shape(), std::move(out),
                      [c](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    });
}

Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> out(a.data());
    for (auto& v : out) v += c;
    return unary_node("add_scalar", a, a.shape(), std::move(out),
                      [](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Tensor tanh(const Tensor& a) {
    std::vector<double> out(a.data());
    for (auto& v : out) v = std::tanh(v);
    auto y = out;  // captured by the pull closure
    return unary_node("tanh", a, a.shape(), std::move(out),
                      [y = std::move(y)](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    });
}

Tensor relu(const Tensor& a) {
    std::vector<double> out(a.data());
    for (auto& v : out) v = v > 0.0 ? v : 0.0;
    auto x = a.data();
    return unary_node("relu", a, a.shape(), std::move(out),
                      [x = std::move(x)](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) ga[i] += g[i];
    });
}

Tensor softplus(const Tensor& a) {
    std::vector<double> out(a.data());
    // log(1 + e^x), stably: max(x, 0) + log1p(e^{-|x|})
    for (auto& v : out) v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
    auto x = a.data();
    return unary_node("softplus", a, a.shape(), std::move(out),
                      [x = std::move(x)](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += g[i] / (1.0 + std::exp(-x[i]));
    });
}

Tensor exp(const Tensor& a) {
    std::vector<double> out(a.data());
    for (auto& v : out) v = std::exp(v);
    auto y = out;
    return unary_node("exp", a, a.shape(), std::move(out),
                      [y = std::move(y)](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    });
}

Tensor log(const Tensor& a) {
    for (double v : a.data())
        if (!(v > 0.0)) throw std::runtime_error("log requires strictly positive inputs");
    std::vector<double> out(a.data());
    for (auto& v : out) v = std::log(v);
    auto x = a.data();
    return unary_node("log", a, a.shape(), std::move(out),
                      [x = std::move(x)](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
    });
}

Tensor square(const Tensor& a) {
    std::vector<double> out(a.data());
    for (auto& v : out) v *= v;
    auto x = a.data();
    return unary_node("square", a, a.shape(), std::move(out),
                      [x = std::move(x)](const std::vector<double>& g, std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += 2.0 * x[i] * g[i];
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return unary_node("sum", a, {1}, {s},
                      [](const std::vector<double>& g, std::vector<double>& ga) {
        for (auto& v : ga) v += g[0];
    });
}

Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double inv_n = 1.0 / static_cast<double>(a.size());
    return unary_node("mean", a, {1}, {s * inv_n},
                      [inv_n](const std::vector<double>& g, std::vector<double>& ga) {
        for (auto& v : ga) v += g[0] * inv_n;
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("clamp requires lo < hi");
    std::vector<double> out(a.data());
    for (auto& v : out) v = std::min(std::max(v, lo), hi);
    auto x = a.data();
    return unary_node("clamp", a, a.shape(), std::move(out),
                      [x = std::move(x), lo, hi](const std::vector<double>& g,
                                                 std::vector<double>& ga) {
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > lo && x[i] < hi) ga[i] += g[i];
    });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0])
        throw std::invalid_argument("concat_cols shape mismatch");
    const int m = a.shape()[0], p = a.shape()[1], q = b.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(m) * (p + q));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < p; ++j) out[static_cast<std::size_t>(i) * (p + q) + j] = a.data()[static_cast<std::size_t>(i) * p + j];
        for (int j = 0; j < q; ++j) out[static_cast<std::size_t>(i) * (p + q) + p + j] = b.data()[static_cast<std::size_t>(i) * q + j];
    }
    Tensor r({m, p + q}, std::move(out));
    Tape* tape = common_tape(a, b);
    if (!tape) return r;
    int pa = a.tracked() ? a.node() : -1;
    int pb = b.tracked() ? b.node() : -1;
    return detail_make_node(tape, std::move(r), {pa, pb}, [=](Tape& t, int self) {
        const auto& g = t.grad_buffer(self);
        for (int i = 0; i < m; ++i) {
            if (pa >= 0) {
                auto& ga = t.grad_buffer(pa);
                for (int j = 0; j < p; ++j)
                    ga[static_cast<std::size_t>(i) * p + j] += g[static_cast<std::size_t>(i) * (p + q) + j];
            }
            if (pb >= 0) {
                auto& gb = t.grad_buffer(pb);
                for (int j = 0; j < q; ++j)
                    gb[static_cast<std::size_t>(i) * q + j] += g[static_cast<std::size_t>(i) * (p + q) + p + j];
            }
        }
    });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw std::invalid_argument("minimum shape mismatch");
    std::vector<double> out(a.data());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], b.data()[i]);
    check_finite(out, "minimum");
    Tensor r(a.shape(), std::move(out));
    Tape* tape = common_tape(a, b);
    if (!tape) return r;
    int pa = a.tracked() ? a.node() : -1;
    int pb = b.tracked() ? b.node() : -1;
    auto adata = a.data();
    auto bdata = b.data();
    return detail_make_node(tape, std::move(r), {pa, pb}, [=](Tape& t, int self) {
        const auto& g = t.grad_buffer(self);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const bool take_a = adata[i] <= bdata[i];
            if (take_a && pa >= 0) t.grad_buffer(pa)[i] += g[i];
            if (!take_a && pb >= 0) t.grad_buffer(pb)[i] += g[i];
        }
    });
}

Tensor row_sum(const Tensor& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("row_sum requires a matrix");
    const int m = a.shape()[0], n = a.shape()[1];
    std::vector<double> out(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i)] += a.data()[static_cast<std::size_t>(i) * n + j];
    return unary_node("row_sum", a, {m, 1}, std::move(out),
                      [m, n](const std::vector<double>& g, std::vector<double>& ga) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) ga[static_cast<std::size_t>(i) * n + j] += g[static_cast<std::size_t>(i)];
    });
}

}  // namespace morl
