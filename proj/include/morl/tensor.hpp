#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace morl {

class Tape;

// Dense tensor of doubles. Copies are shallow (data is shared); values are
// treated as immutable once an op has consumed them. A tensor is "tracked"
// when it carries a node on a Tape, in which case gradients flow to it
// during Tape::backward.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    const std::vector<int>& shape() const { return shape_; }
    std::int64_t size() const;
    int rows() const;
    int cols() const;

    const std::vector<double>& data() const { return *data_; }
    std::vector<double>& mutable_data() { return *data_; }

    bool tracked() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int node() const { return node_; }

    // Scalar extraction; size() must be 1.
    double item() const;

private:
    friend class Tape;
    friend Tensor detail_make_node(Tape* tape, Tensor t,
                                   std::vector<int> parents,
                                   std::function<void(Tape&, int)> pull);
    std::vector<int> shape_;
    std::shared_ptr<std::vector<double>> data_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

// Define-by-run tape. One tape = one forward graph = at most one backward
// pass. Nodes are stored in insertion order, which is a topological order by
// construction; backward visits them once in reverse.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Registers a tracked leaf holding a copy of `values`.
    Tensor leaf(std::vector<int> shape, std::span<const double> values);

    // Runs reverse accumulation from a scalar loss. The tape is consumed:
    // recording further ops or calling backward again throws.
    void backward(const Tensor& loss);

    // Gradient of the last backward's loss w.r.t. a tracked tensor on this
    // tape. Zero-filled if the loss did not depend on it.
    std::vector<double> grad(const Tensor& t) const;

    bool consumed() const { return consumed_; }
    std::size_t num_nodes() const { return nodes_.size(); }

private:
    friend Tensor detail_make_node(Tape* tape, Tensor t,
                                   std::vector<int> parents,
                                   std::function<void(Tape&, int)> pull);

    struct Node {
        std::int64_t size;
        // Accumulates into parent grads given this node's grad.
        std::function<void(Tape&, int)> pull;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<double>> grads_;
    bool consumed_ = false;

public:
    // Internal: gradient buffer of node `i`, allocated on first touch.
    std::vector<double>& grad_buffer(int i);
    bool has_grad(int i) const { return !grads_[i].empty(); }
};

// Forward ops. Binary ops require both tracked operands to live on the same
// tape; the result is tracked iff any operand is. All ops verify the result
// is finite and throw std::runtime_error otherwise.
Tensor matmul(const Tensor& a, const Tensor& b);
// Same-shape add, or row-broadcast bias add (m,n) + (n).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// Elementwise product; also supports (m,n) * (n) row broadcast.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // strictly positive inputs
Tensor square(const Tensor& a);
Tensor sum(const Tensor& a);   // -> scalar
Tensor mean(const Tensor& a);  // -> scalar
// Hard clamp; gradient is 1 strictly inside (lo, hi), 0 outside.
Tensor clamp(const Tensor& a, double lo, double hi);
// (m,p) ++ (m,q) -> (m, p+q).
Tensor concat_cols(const Tensor& a, const Tensor& b);
// (m,n) -> (m,1), sum over columns.
Tensor row_sum(const Tensor& a);
Tensor add_scalar(const Tensor& a, double c);
// Elementwise min; gradient routes to the smaller operand (ties to a).
Tensor minimum(const Tensor& a, const Tensor& b);

}  // namespace morl
