#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "stst/common.hpp"

namespace stst {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

// Epsilon used in every normalization denominator.
inline constexpr double kNormEps = 1e-5;

struct TensorNode;

// Dense 64-bit float tensor with reverse-mode autodiff. A Tensor is a cheap
// handle onto a graph node; operations on tensors whose inputs require
// gradients record a local gradient rule, and backward() replays the record
// in reverse topological order. One graph is single-threaded; independent
// graphs may live on different threads.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);
    // Uniform samples in [lo, hi); the canonical initializer for weights.
    static Tensor uniform(Shape shape, double lo, double hi, std::mt19937_64& rng,
                          bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rows() const;  // rank-2 only
    std::size_t cols() const;  // rank-2 only

    double value() const;  // single-element tensors
    double at(std::size_t r, std::size_t c) const;

    std::vector<double>& values();
    const std::vector<double>& values() const;

    bool requires_grad() const;
    void set_requires_grad(bool v);

    // Gradient accumulated by the last backward() pass (empty if untouched).
    const std::vector<double>& grad() const;
    void zero_grad();

    const char* op_name() const;

    std::shared_ptr<TensorNode> node() const { return node_; }
    static Tensor wrap(std::shared_ptr<TensorNode> node);

  private:
    std::shared_ptr<TensorNode> node_;
};

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Pushes this node's gradient into its parents. Set only on op nodes
    // whose inputs require gradients.
    std::function<void(TensorNode&)> backward;

    std::size_t size() const { return values.size(); }
    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);

// a: m x n, bias: n. Adds bias to every row.
Tensor add_row(const Tensor& a, const Tensor& bias);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// x W + b, broadcast over rows of x.
Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor log(const Tensor& x);
Tensor clamp(const Tensor& x, double lo, double hi);

// Identity on column 0, sine on all remaining columns. The activation that
// turns a linear time projection into a Time2Vec encoding.
Tensor periodic_activation(const Tensor& x);

// Softmax over the last dimension; each slice sums to 1.
Tensor softmax_lastdim(const Tensor& x);

// Per-row normalization to zero mean / unit variance, then affine.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

// Per-column normalization. In training mode uses the batch statistics and
// differentiates through them; running stats (plain value tensors, never in
// the graph) are updated with `momentum`. In eval mode uses running stats.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum = 0.9);

// Per-column rescale by the running quadratic mean; no mean subtraction, so
// the sign pattern of x is preserved. The forward pass reads the running
// statistic as-is and the gradient treats it as a constant; in training mode
// the statistic is then updated with `momentum` as a side effect.
Tensor power_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_sq,
                  bool training, double momentum = 0.9);

// Inverted dropout; eval mode returns x untouched.
Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng);

Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t first, std::size_t count);
Tensor select_row(const Tensor& x, std::size_t row);
Tensor reshape(const Tensor& x, Shape shape);
// Repeats each row `times` times consecutively: m x n -> (m*times) x n.
Tensor repeat_rows(const Tensor& x, std::size_t times);
// Packs single-element tensors into one vector of shape {n}.
Tensor stack_scalars(const std::vector<Tensor>& parts);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Reverse-mode pass from a scalar loss. Gradients accumulate into .grad of
// every reachable tensor that requires one; call zero_grad between steps.
void backward(const Tensor& loss);

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst;  // which tensor/coordinate was worst
};

// Compares reverse-mode gradients of f at x against central differences
// (f(x+h)-f(x-h))/2h per coordinate. Relative error uses a small absolute
// floor in the denominator so near-zero coordinates do not dominate.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h,
                           double tol, double floor = 1e-3);

// Same check for a loss closure over a set of parameter tensors.
GradCheckReport grad_check_params(const std::function<Tensor()>& loss_fn,
                                  const std::vector<Tensor>& params, double h, double tol,
                                  double floor = 1e-3);

}  // namespace stst
