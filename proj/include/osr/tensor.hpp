#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "osr/errors.hpp"

namespace osr {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// One recorded operation (or leaf) in the computation graph. Ops append
// nodes in recording order (`seq`); backward() replays reachable nodes in
// reverse `seq` order, visiting each exactly once. Graphs are rebuilt on
// every forward pass, tape style: nothing is retained between passes except
// leaf tensors.
struct GraphNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; // allocated on demand, same length as value
    bool requires_grad{false};
    bool leaf{true};
    std::uint64_t seq{0};
    std::vector<std::shared_ptr<GraphNode>> parents;
    std::function<void(GraphNode&)> backprop; // accumulates into parents' grad

    std::size_t size() const { return value.size(); }
};

// Dense row-major tensor of 64-bit floats with reverse-mode autodiff.
// Copying a Tensor is cheap (shared node). Gradients accumulate into leaf
// tensors: repeated backward() calls without zero_grad() add up.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<GraphNode> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);
    static Tensor from_data(Shape shape, std::vector<double> data);
    // A requires_grad leaf (trainable parameter or grad_check probe).
    static Tensor param(Shape shape, std::vector<double> data);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t ndim() const { return node_->shape.size(); }
    std::size_t rows() const;
    std::size_t cols() const;

    bool requires_grad() const { return node_ && node_->requires_grad; }
    void set_requires_grad(bool b);

    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& values() { return node_->value; }
    double value() const; // scalar tensors only
    double at(std::size_t r, std::size_t c) const;

    bool has_grad() const { return node_ && !node_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Reverse-mode sweep from a scalar root. Populates grad on every
    // requires_grad leaf reachable from this node. Leaf gradients
    // accumulate across calls; intermediate gradients are reset per call.
    void backward() const;

    const std::shared_ptr<GraphNode>& node() const { return node_; }

private:
    std::shared_ptr<GraphNode> node_;
};

// ---- graph-building operations ------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);    // [m×k]·[k×n] -> [m×n]
Tensor matmul_nt(const Tensor& a, const Tensor& b); // [m×k]·[n×k]ᵀ -> [m×n]

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);   // gradient at exactly 0 is 0
Tensor square(const Tensor& a);
Tensor tanh(const Tensor& a);

// a[m×n] + b[n] broadcast over rows (bias add).
Tensor add_rowvec(const Tensor& a, const Tensor& b);

Tensor sum(const Tensor& a);  // scalar
Tensor mean(const Tensor& a); // scalar
Tensor sum_axis0(const Tensor& a); // [m×n] -> [n]
Tensor sum_axis1(const Tensor& a); // [m×n] -> [m]

Tensor row(const Tensor& a, std::size_t i);                 // [m×n] -> [n]
Tensor gather(const Tensor& a, const std::vector<int>& idx); // a[i, idx[i]] -> [m]

Tensor dot(const Tensor& a, const Tensor& b); // 1-D · 1-D -> scalar

Tensor l1_norm(const Tensor& a); // Σ|x|; subgradient of |x| at 0 is 0
Tensor l2_norm(const Tensor& a); // sqrt(Σx²); gradient at the zero vector is 0
std::pair<Tensor, Tensor> norms(const Tensor& a); // (l1, l2)

// Numerically stable log-softmax over the last dimension (1-D vector or
// row-wise on 2-D). Throws NumericError on NaN/Inf input.
Tensor log_softmax(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }

// ---- gradient verification ----------------------------------------------

// Compares the analytic gradient of a scalar-valued f against central finite
// differences at x. Returns max over coordinates of
//   |analytic − numeric| / max(1, |numeric|).
// f must build its graph off the tensor it is handed.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                  double step);

} // namespace osr
