#include "stst/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace stst {

namespace {

std::size_t numel_of(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

std::shared_ptr<TensorNode> make_node(Shape shape, const char* op,
                                      std::vector<std::shared_ptr<TensorNode>> parents) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values.assign(numel_of(node->shape), 0.0);
    node->op = op;
    for (const auto& p : parents)
        if (p->requires_grad) node->requires_grad = true;
    node->parents = std::move(parents);
    return node;
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.shape().size() != 2)
        throw ShapeError(std::string(op) + ": expected rank-2 tensor, got shape " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

// Accumulate src node's grad into dst if dst participates in the pass.
void add_grad(TensorNode* dst, const double* g, std::size_t n) {
    if (!dst->requires_grad) return;
    dst->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) dst->grad[i] += g[i];
}

}  // namespace

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

Tensor Tensor::wrap(std::shared_ptr<TensorNode> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = make_node(std::move(shape), "leaf", {});
    n->requires_grad = requires_grad;
    return wrap(n);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (numel_of(shape) != values.size())
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " needs " +
                         std::to_string(numel_of(shape)) + " values, got " +
                         std::to_string(values.size()));
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return wrap(n);
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::uniform(Shape shape, double lo, double hi, std::mt19937_64& rng, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.values()) v = dist(rng);
    return t;
}

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->values.size(); }

std::size_t Tensor::rows() const {
    require_rank2(*this, "rows");
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    require_rank2(*this, "cols");
    return node_->shape[1];
}

double Tensor::value() const {
    if (size() != 1)
        throw ShapeError("value(): tensor has " + std::to_string(size()) + " elements, expected 1");
    return node_->values[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    require_rank2(*this, "at");
    return node_->values[r * node_->shape[1] + c];
}

std::vector<double>& Tensor::values() { return node_->values; }
const std::vector<double>& Tensor::values() const { return node_->values; }
bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool v) { node_->requires_grad = v; }
const std::vector<double>& Tensor::grad() const { return node_->grad; }

void Tensor::zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

const char* Tensor::op_name() const { return node_->op; }

// ---------------------------------------------------------------------------
// elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto out = make_node(a.shape(), "add", {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = av[i] + bv[i];
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            add_grad(self.parents[0].get(), self.grad.data(), self.grad.size());
            add_grad(self.parents[1].get(), self.grad.data(), self.grad.size());
        };
    }
    return Tensor::wrap(out);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto out = make_node(a.shape(), "sub", {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = av[i] - bv[i];
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            add_grad(self.parents[0].get(), self.grad.data(), self.grad.size());
            TensorNode* b_node = self.parents[1].get();
            if (b_node->requires_grad) {
                b_node->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i) b_node->grad[i] -= self.grad[i];
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "hadamard");
    auto out = make_node(a.shape(), "hadamard", {a.node(), b.node()});
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = av[i] * bv[i];
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            TensorNode* a_node = self.parents[0].get();
            TensorNode* b_node = self.parents[1].get();
            if (a_node->requires_grad) {
                a_node->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    a_node->grad[i] += self.grad[i] * b_node->values[i];
            }
            if (b_node->requires_grad) {
                b_node->ensure_grad();
                for (std::size_t i = 0; i < self.grad.size(); ++i)
                    b_node->grad[i] += self.grad[i] * a_node->values[i];
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor scale(const Tensor& a, double c) {
    auto out = make_node(a.shape(), "scale", {a.node()});
    const auto& av = a.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = av[i] * c;
    if (out->requires_grad) {
        out->backward = [c](TensorNode& self) {
            TensorNode* a_node = self.parents[0].get();
            a_node->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) a_node->grad[i] += self.grad[i] * c;
        };
    }
    return Tensor::wrap(out);
}

Tensor add_row(const Tensor& a, const Tensor& bias) {
    require_rank2(a, "add_row");
    if (bias.shape().size() != 1 || bias.shape()[0] != a.cols())
        throw ShapeError("add_row: bias shape " + shape_str(bias.shape()) + " does not match columns of " +
                         shape_str(a.shape()));
    auto out = make_node(a.shape(), "add_row", {a.node(), bias.node()});
    const std::size_t m = a.rows(), n = a.cols();
    const auto& av = a.values();
    const auto& bv = bias.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->values[i * n + j] = av[i * n + j] + bv[j];
    if (out->requires_grad) {
        out->backward = [m, n](TensorNode& self) {
            add_grad(self.parents[0].get(), self.grad.data(), self.grad.size());
            TensorNode* b_node = self.parents[1].get();
            if (b_node->requires_grad) {
                b_node->ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) b_node->grad[j] += self.grad[i * n + j];
            }
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    if (a.cols() != b.rows())
        throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    auto out = make_node({m, n}, "matmul", {a.node(), b.node()});
    const double* av = a.values().data();
    const double* bv = b.values().data();
    double* cv = out->values.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            const double* brow = bv + kk * n;
            double* crow = cv + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    if (out->requires_grad) {
        out->backward = [m, k, n](TensorNode& self) {
            TensorNode* a_node = self.parents[0].get();
            TensorNode* b_node = self.parents[1].get();
            const double* g = self.grad.data();
            if (a_node->requires_grad) {
                a_node->ensure_grad();
                const double* bv = b_node->values.data();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) {
                        const double gij = g[i * n + j];
                        const double* brow = bv + j;  // column j, stride n
                        for (std::size_t kk = 0; kk < k; ++kk)
                            a_node->grad[i * k + kk] += gij * brow[kk * n];
                    }
            }
            if (b_node->requires_grad) {
                b_node->ensure_grad();
                const double* av = a_node->values.data();
                for (std::size_t kk = 0; kk < k; ++kk)
                    for (std::size_t i = 0; i < m; ++i) {
                        const double aik = av[i * k + kk];
                        const double* grow = g + i * n;
                        for (std::size_t j = 0; j < n; ++j)
                            b_node->grad[kk * n + j] += aik * grow[j];
                    }
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    auto out = make_node({n, m}, "transpose", {a.node()});
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out->values[j * m + i] = av[i * n + j];
    if (out->requires_grad) {
        out->backward = [m, n](TensorNode& self) {
            TensorNode* a_node = self.parents[0].get();
            a_node->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) a_node->grad[i * n + j] += self.grad[j * m + i];
        };
    }
    return Tensor::wrap(out);
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add_row(matmul(x, w), b);
}

// ---------------------------------------------------------------------------
// activations

Tensor relu(const Tensor& x) {
    auto out = make_node(x.shape(), "relu", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                if (x_node->values[i] > 0.0) x_node->grad[i] += self.grad[i];
        };
    }
    return Tensor::wrap(out);
}

namespace {
double sigmoid_stable(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}
}  // namespace

Tensor sigmoid(const Tensor& x) {
    auto out = make_node(x.shape(), "sigmoid", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = sigmoid_stable(xv[i]);
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.values[i];
                x_node->grad[i] += self.grad[i] * y * (1.0 - y);
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor tanh(const Tensor& x) {
    auto out = make_node(x.shape(), "tanh", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = std::tanh(xv[i]);
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double y = self.values[i];
                x_node->grad[i] += self.grad[i] * (1.0 - y * y);
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor log(const Tensor& x) {
    for (double v : x.values())
        if (!(v > 0.0)) throw ValueError("log: non-positive input " + fnum(v));
    auto out = make_node(x.shape(), "log", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = std::log(xv[i]);
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                x_node->grad[i] += self.grad[i] / x_node->values[i];
        };
    }
    return Tensor::wrap(out);
}

Tensor clamp(const Tensor& x, double lo, double hi) {
    auto out = make_node(x.shape(), "clamp", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = std::min(std::max(xv[i], lo), hi);
    if (out->requires_grad) {
        out->backward = [lo, hi](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                const double v = x_node->values[i];
                if (v >= lo && v <= hi) x_node->grad[i] += self.grad[i];
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor periodic_activation(const Tensor& x) {
    require_rank2(x, "periodic_activation");
    const std::size_t m = x.rows(), n = x.cols();
    auto out = make_node(x.shape(), "periodic_activation", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        out->values[i * n] = xv[i * n];
        for (std::size_t j = 1; j < n; ++j) out->values[i * n + j] = std::sin(xv[i * n + j]);
    }
    if (out->requires_grad) {
        out->backward = [m, n](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                x_node->grad[i * n] += self.grad[i * n];
                for (std::size_t j = 1; j < n; ++j)
                    x_node->grad[i * n + j] += self.grad[i * n + j] * std::cos(x_node->values[i * n + j]);
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.shape().empty() || x.shape().back() < 1)
        throw ShapeError("softmax_lastdim: empty last dimension, shape " + shape_str(x.shape()));
    const std::size_t n = x.shape().back();
    const std::size_t m = x.size() / n;
    auto out = make_node(x.shape(), "softmax", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = xv.data() + i * n;
        double* orow = out->values.data() + i * n;
        double mx = row[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            orow[j] = std::exp(row[j] - mx);
            total += orow[j];
        }
        for (std::size_t j = 0; j < n; ++j) orow[j] /= total;
    }
    if (out->requires_grad) {
        out->backward = [m, n](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* y = self.values.data() + i * n;
                const double* g = self.grad.data() + i * n;
                double dot = 0.0;
                for (std::size_t j = 0; j < n; ++j) dot += y[j] * g[j];
                double* gx = x_node->grad.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) gx[j] += y[j] * (g[j] - dot);
            }
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// normalization

namespace {
void require_affine(const Tensor& x, const Tensor& gamma, const Tensor& beta, std::size_t width,
                    const char* op) {
    if (gamma.shape() != Shape{width} || beta.shape() != Shape{width})
        throw ShapeError(std::string(op) + ": affine parameters must have shape [" +
                         std::to_string(width) + "], got gamma " + shape_str(gamma.shape()) +
                         ", beta " + shape_str(beta.shape()) + " for input " + shape_str(x.shape()));
}
}  // namespace

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    require_rank2(x, "layer_norm");
    const std::size_t m = x.rows(), n = x.cols();
    require_affine(x, gamma, beta, n, "layer_norm");
    auto out = make_node(x.shape(), "layer_norm", {x.node(), gamma.node(), beta.node()});
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();
    std::vector<double> inv_std(m), mu(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = xv.data() + i * n;
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += row[j];
        mu[i] = s / double(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = row[j] - mu[i];
            var += d * d;
        }
        var /= double(n);
        inv_std[i] = 1.0 / std::sqrt(var + kNormEps);
        for (std::size_t j = 0; j < n; ++j)
            out->values[i * n + j] = gv[j] * (row[j] - mu[i]) * inv_std[i] + bv[j];
    }
    if (out->requires_grad) {
        out->backward = [m, n, mu, inv_std](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            TensorNode* g_node = self.parents[1].get();
            TensorNode* b_node = self.parents[2].get();
            if (g_node->requires_grad) g_node->ensure_grad();
            if (b_node->requires_grad) b_node->ensure_grad();
            if (x_node->requires_grad) x_node->ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                const double* xrow = x_node->values.data() + i * n;
                const double* grow = self.grad.data() + i * n;
                const double istd = inv_std[i];
                if (g_node->requires_grad || b_node->requires_grad) {
                    for (std::size_t j = 0; j < n; ++j) {
                        const double xhat = (xrow[j] - mu[i]) * istd;
                        if (g_node->requires_grad) g_node->grad[j] += grow[j] * xhat;
                        if (b_node->requires_grad) b_node->grad[j] += grow[j];
                    }
                }
                if (x_node->requires_grad) {
                    // dxhat = g * gamma; dx = istd*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
                    double sum_dxh = 0.0, sum_dxh_xhat = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dxh = grow[j] * g_node->values[j];
                        const double xhat = (xrow[j] - mu[i]) * istd;
                        sum_dxh += dxh;
                        sum_dxh_xhat += dxh * xhat;
                    }
                    const double inv_n = 1.0 / double(n);
                    for (std::size_t j = 0; j < n; ++j) {
                        const double dxh = grow[j] * g_node->values[j];
                        const double xhat = (xrow[j] - mu[i]) * istd;
                        x_node->grad[i * n + j] +=
                            istd * (dxh - inv_n * sum_dxh - xhat * inv_n * sum_dxh_xhat);
                    }
                }
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                  Tensor& running_var, bool training, double momentum) {
    require_rank2(x, "batch_norm");
    const std::size_t m = x.rows(), n = x.cols();
    require_affine(x, gamma, beta, n, "batch_norm");
    auto out = make_node(x.shape(), "batch_norm", {x.node(), gamma.node(), beta.node()});
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();

    std::vector<double> mu(n), inv_std(n);
    if (training) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += xv[i * n + j];
            mu[j] = s / double(m);
            double var = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double d = xv[i * n + j] - mu[j];
                var += d * d;
            }
            var /= double(m);
            inv_std[j] = 1.0 / std::sqrt(var + kNormEps);
            running_mean.values()[j] = momentum * running_mean.values()[j] + (1.0 - momentum) * mu[j];
            running_var.values()[j] = momentum * running_var.values()[j] + (1.0 - momentum) * var;
        }
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            mu[j] = running_mean.values()[j];
            inv_std[j] = 1.0 / std::sqrt(running_var.values()[j] + kNormEps);
        }
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out->values[i * n + j] = gv[j] * (xv[i * n + j] - mu[j]) * inv_std[j] + bv[j];

    if (out->requires_grad) {
        out->backward = [m, n, mu, inv_std, training](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            TensorNode* g_node = self.parents[1].get();
            TensorNode* b_node = self.parents[2].get();
            if (g_node->requires_grad) g_node->ensure_grad();
            if (b_node->requires_grad) b_node->ensure_grad();
            if (x_node->requires_grad) x_node->ensure_grad();
            for (std::size_t j = 0; j < n; ++j) {
                const double istd = inv_std[j];
                double sum_dxh = 0.0, sum_dxh_xhat = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double g = self.grad[i * n + j];
                    const double xhat = (x_node->values[i * n + j] - mu[j]) * istd;
                    if (g_node->requires_grad) g_node->grad[j] += g * xhat;
                    if (b_node->requires_grad) b_node->grad[j] += g;
                    const double dxh = g * g_node->values[j];
                    sum_dxh += dxh;
                    sum_dxh_xhat += dxh * xhat;
                }
                if (!x_node->requires_grad) continue;
                if (training) {
                    const double inv_m = 1.0 / double(m);
                    for (std::size_t i = 0; i < m; ++i) {
                        const double dxh = self.grad[i * n + j] * g_node->values[j];
                        const double xhat = (x_node->values[i * n + j] - mu[j]) * istd;
                        x_node->grad[i * n + j] +=
                            istd * (dxh - inv_m * sum_dxh - xhat * inv_m * sum_dxh_xhat);
                    }
                } else {
                    // running statistics are constants
                    for (std::size_t i = 0; i < m; ++i)
                        x_node->grad[i * n + j] += self.grad[i * n + j] * g_node->values[j] * istd;
                }
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor power_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_sq,
                  bool training, double momentum) {
    require_rank2(x, "power_norm");
    const std::size_t m = x.rows(), n = x.cols();
    require_affine(x, gamma, beta, n, "power_norm");
    auto out = make_node(x.shape(), "power_norm", {x.node(), gamma.node(), beta.node()});
    const auto& xv = x.values();
    const auto& gv = gamma.values();
    const auto& bv = beta.values();

    std::vector<double> inv_rms(n);
    for (std::size_t j = 0; j < n; ++j) inv_rms[j] = 1.0 / std::sqrt(running_sq.values()[j] + kNormEps);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out->values[i * n + j] = gv[j] * xv[i * n + j] * inv_rms[j] + bv[j];
    if (training) {
        for (std::size_t j = 0; j < n; ++j) {
            double sq = 0.0;
            for (std::size_t i = 0; i < m; ++i) sq += xv[i * n + j] * xv[i * n + j];
            sq /= double(m);
            running_sq.values()[j] = momentum * running_sq.values()[j] + (1.0 - momentum) * sq;
        }
    }

    if (out->requires_grad) {
        out->backward = [m, n, inv_rms](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            TensorNode* g_node = self.parents[1].get();
            TensorNode* b_node = self.parents[2].get();
            if (g_node->requires_grad) g_node->ensure_grad();
            if (b_node->requires_grad) b_node->ensure_grad();
            if (x_node->requires_grad) x_node->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = self.grad[i * n + j];
                    if (g_node->requires_grad)
                        g_node->grad[j] += g * x_node->values[i * n + j] * inv_rms[j];
                    if (b_node->requires_grad) b_node->grad[j] += g;
                    if (x_node->requires_grad)
                        x_node->grad[i * n + j] += g * g_node->values[j] * inv_rms[j];
                }
        };
    }
    return Tensor::wrap(out);
}

Tensor dropout(const Tensor& x, double p, bool training, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0) throw ValueError("dropout: rate must be in [0, 1), got " + fnum(p));
    if (!training || p == 0.0) return x;
    const double keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<double>>(x.size());
    std::bernoulli_distribution dist(keep);
    for (auto& v : *mask) v = dist(rng) ? 1.0 / keep : 0.0;
    auto out = make_node(x.shape(), "dropout", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < out->values.size(); ++i) out->values[i] = xv[i] * (*mask)[i];
    if (out->requires_grad) {
        out->backward = [mask](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                x_node->grad[i] += self.grad[i] * (*mask)[i];
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// reshaping and slicing

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.rows() != m)
            throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                             shape_str(p.shape()));
        total += p.cols();
        parents.push_back(p.node());
    }
    auto out = make_node({m, total}, "concat_cols", std::move(parents));
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j)
                out->values[i * total + off + j] = p.values()[i * w + j];
        off += w;
    }
    if (out->requires_grad) {
        out->backward = [m, total](TensorNode& self) {
            std::size_t off = 0;
            for (auto& parent : self.parents) {
                const std::size_t w = parent->shape[1];
                if (parent->requires_grad) {
                    parent->ensure_grad();
                    for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < w; ++j)
                            parent->grad[i * w + j] += self.grad[i * total + off + j];
                }
                off += w;
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor slice_cols(const Tensor& x, std::size_t first, std::size_t count) {
    require_rank2(x, "slice_cols");
    const std::size_t m = x.rows(), n = x.cols();
    if (first + count > n)
        throw ShapeError("slice_cols: [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") out of range for " + shape_str(x.shape()));
    auto out = make_node({m, count}, "slice_cols", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) out->values[i * count + j] = xv[i * n + first + j];
    if (out->requires_grad) {
        out->backward = [m, n, first, count](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < count; ++j)
                    x_node->grad[i * n + first + j] += self.grad[i * count + j];
        };
    }
    return Tensor::wrap(out);
}

Tensor select_row(const Tensor& x, std::size_t row) {
    require_rank2(x, "select_row");
    const std::size_t n = x.cols();
    if (row >= x.rows())
        throw ShapeError("select_row: row " + std::to_string(row) + " out of range for " +
                         shape_str(x.shape()));
    auto out = make_node({1, n}, "select_row", {x.node()});
    const auto& xv = x.values();
    for (std::size_t j = 0; j < n; ++j) out->values[j] = xv[row * n + j];
    if (out->requires_grad) {
        out->backward = [row, n](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t j = 0; j < n; ++j) x_node->grad[row * n + j] += self.grad[j];
        };
    }
    return Tensor::wrap(out);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (numel_of(shape) != x.size())
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    auto out = make_node(std::move(shape), "reshape", {x.node()});
    out->values = x.values();
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            add_grad(self.parents[0].get(), self.grad.data(), self.grad.size());
        };
    }
    return Tensor::wrap(out);
}

Tensor repeat_rows(const Tensor& x, std::size_t times) {
    require_rank2(x, "repeat_rows");
    if (times == 0) throw ShapeError("repeat_rows: times must be positive");
    const std::size_t m = x.rows(), n = x.cols();
    auto out = make_node({m * times, n}, "repeat_rows", {x.node()});
    const auto& xv = x.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t t = 0; t < times; ++t)
            for (std::size_t j = 0; j < n; ++j) out->values[(i * times + t) * n + j] = xv[i * n + j];
    if (out->requires_grad) {
        out->backward = [m, n, times](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < times; ++t)
                    for (std::size_t j = 0; j < n; ++j)
                        x_node->grad[i * n + j] += self.grad[(i * times + t) * n + j];
        };
    }
    return Tensor::wrap(out);
}

Tensor stack_scalars(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("stack_scalars: no inputs");
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const auto& p : parts) {
        if (p.size() != 1)
            throw ShapeError("stack_scalars: inputs must be single-element, got " + shape_str(p.shape()));
        parents.push_back(p.node());
    }
    auto out = make_node({parts.size()}, "stack_scalars", std::move(parents));
    for (std::size_t i = 0; i < parts.size(); ++i) out->values[i] = parts[i].values()[0];
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            for (std::size_t i = 0; i < self.parents.size(); ++i) {
                TensorNode* p = self.parents[i].get();
                if (!p->requires_grad) continue;
                p->ensure_grad();
                p->grad[0] += self.grad[i];
            }
        };
    }
    return Tensor::wrap(out);
}

Tensor sum(const Tensor& x) {
    auto out = make_node({1}, "sum", {x.node()});
    double s = 0.0;
    for (double v : x.values()) s += v;
    out->values[0] = s;
    if (out->requires_grad) {
        out->backward = [](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (auto& g : x_node->grad) g += self.grad[0];
        };
    }
    return Tensor::wrap(out);
}

Tensor mean(const Tensor& x) {
    auto out = make_node({1}, "mean", {x.node()});
    double s = 0.0;
    for (double v : x.values()) s += v;
    const double inv = 1.0 / double(x.size());
    out->values[0] = s * inv;
    if (out->requires_grad) {
        out->backward = [inv](TensorNode& self) {
            TensorNode* x_node = self.parents[0].get();
            x_node->ensure_grad();
            for (auto& g : x_node->grad) g += self.grad[0] * inv;
        };
    }
    return Tensor::wrap(out);
}

// ---------------------------------------------------------------------------
// reverse pass

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw ValueError("backward: loss must be a defined scalar tensor");
    if (!loss.requires_grad()) return;

    // Iterative postorder DFS over grad-requiring ancestry = topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> visited;
    struct Frame {
        TensorNode* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({loss.node().get(), 0});
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorNode* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward && !node->grad.empty()) node->backward(*node);
    }
}

// ---------------------------------------------------------------------------
// finite-difference verification

namespace {
double rel_err(double a, double b, double floor) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}
}  // namespace

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h,
                           double tol, double floor) {
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor y = f(x);
    if (y.size() != 1) throw ValueError("grad_check: f must be scalar-valued");
    backward(y);
    std::vector<double> analytic = x.grad();
    if (analytic.empty()) analytic.assign(x.size(), 0.0);

    GradCheckReport report;
    report.pass = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x.values()[i];
        x.values()[i] = saved + h;
        const double up = f(x).value();
        x.values()[i] = saved - h;
        const double down = f(x).value();
        x.values()[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double err = rel_err(analytic[i], fd, floor);
        if (err > report.max_rel_err) {
            report.max_rel_err = err;
            report.worst = "x[" + std::to_string(i) + "] ad=" + fnum(analytic[i]) + " fd=" + fnum(fd);
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

GradCheckReport grad_check_params(const std::function<Tensor()>& loss_fn,
                                  const std::vector<Tensor>& params, double h, double tol,
                                  double floor) {
    for (auto p : params) {
        p.set_requires_grad(true);
        p.zero_grad();
    }
    Tensor loss = loss_fn();
    if (loss.size() != 1) throw ValueError("grad_check_params: loss must be scalar");
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) {
        auto g = p.grad();
        if (g.empty()) g.assign(p.size(), 0.0);
        analytic.push_back(std::move(g));
    }

    GradCheckReport report;
    report.pass = true;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double saved = p.values()[i];
            p.values()[i] = saved + h;
            const double up = loss_fn().value();
            p.values()[i] = saved - h;
            const double down = loss_fn().value();
            p.values()[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            const double err = rel_err(analytic[pi][i], fd, floor);
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst = "param " + std::to_string(pi) + "[" + std::to_string(i) +
                               "] ad=" + fnum(analytic[pi][i]) + " fd=" + fnum(fd);
            }
        }
    }
    report.pass = report.max_rel_err <= tol;
    return report;
}

}  // namespace stst
