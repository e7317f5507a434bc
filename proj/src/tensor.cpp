#include "tgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tgan {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void check_finite(const char* op, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericError(std::string(op) + ": non-finite value at flat index " +
                               std::to_string(i));
        }
    }
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> data,
                                        bool requires_grad) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match " +
                         std::to_string(data.size()) + " data values");
    }
    check_finite("tensor", data);
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    if (requires_grad) n->grad.assign(n->value.size(), 0.0);
    return n;
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), 0.0);
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(make_leaf({1}, {v}, requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    std::vector<double> data(shape_numel(shape), v);
    return Tensor(make_leaf(std::move(shape), std::move(data), requires_grad));
}

const Shape& Tensor::shape() const {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::numel() const { return shape_numel(shape()); }

std::size_t Tensor::rows() const {
    if (shape().size() != 2) throw ShapeError("rows(): tensor is not 2-D");
    return shape()[0];
}

std::size_t Tensor::cols() const {
    if (shape().size() != 2) throw ShapeError("cols(): tensor is not 2-D");
    return shape()[1];
}

std::span<const double> Tensor::values() const {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->value;
}

std::span<double> Tensor::values_mut() {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->value;
}

std::span<const double> Tensor::grad() const {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->grad;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::zero_grad() {
    if (node_ && node_->requires_grad) {
        std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }
}

double Tensor::item() const {
    if (values().size() != 1) {
        throw ContractError("item(): tensor has " + std::to_string(values().size()) +
                            " elements, expected 1");
    }
    return values()[0];
}

double Tensor::at(std::size_t flat) const { return values()[flat]; }

Tensor Graph::make_op(const char* name, Shape shape, std::vector<double> value,
                      const std::vector<Tensor>& parents,
                      std::function<void(detail::Node&)> backward) {
    check_finite(name, value);
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool needs_grad = false;
    for (const auto& p : parents) needs_grad = needs_grad || p.requires_grad();
    node->requires_grad = record_ && needs_grad;
    if (node->requires_grad) {
        node->grad.assign(node->value.size(), 0.0);
        node->owner = this;
        detail::Node* raw = node.get();
        node->backprop = [raw, fn = std::move(backward)]() { fn(*raw); };
        tape_.push_back(node);
    }
    return Tensor(std::move(node));
}

Tensor Graph::matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2) {
        throw ShapeError("matmul: operands must be 2-D, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " * " + shape_str(b.shape()));
    }
    const double* av = a.values().data();
    const double* bv = b.values().data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double* orow = out.data() + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            const double* brow = bv + kk * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    auto an = a.node_, bn = b.node_;
    return make_op("matmul", {m, n}, std::move(out), {a, b},
                   [an, bn, m, k, n](detail::Node& o) {
                       const double* g = o.grad.data();
                       if (an->requires_grad) {
                           // dA = g * B^T
                           double* ga = an->grad.data();
                           const double* bvv = bn->value.data();
                           for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t kk = 0; kk < k; ++kk) {
                                   double acc = 0.0;
                                   const double* grow = g + i * n;
                                   const double* brow = bvv + kk * n;
                                   for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                   ga[i * k + kk] += acc;
                               }
                           }
                       }
                       if (bn->requires_grad) {
                           // dB = A^T * g
                           double* gb = bn->grad.data();
                           const double* avv = an->value.data();
                           for (std::size_t i = 0; i < m; ++i) {
                               const double* grow = g + i * n;
                               for (std::size_t kk = 0; kk < k; ++kk) {
                                   const double aik = avv[i * k + kk];
                                   double* gbrow = gb + kk * n;
                                   for (std::size_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
                               }
                           }
                       }
                   });
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
    auto an = a.node_, bn = b.node_;
    return make_op("add", a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] += o.grad[i];
    });
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
    auto an = a.node_, bn = b.node_;
    return make_op("sub", a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i) bn->grad[i] -= o.grad[i];
    });
}

Tensor Graph::mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
    auto an = a.node_, bn = b.node_;
    return make_op("mul", a.shape(), std::move(out), {a, b}, [an, bn](detail::Node& o) {
        if (an->requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                an->grad[i] += o.grad[i] * bn->value[i];
        if (bn->requires_grad)
            for (std::size_t i = 0; i < o.grad.size(); ++i)
                bn->grad[i] += o.grad[i] * an->value[i];
    });
}

Tensor Graph::unary_map(const char* name, const Tensor& a,
                        const std::function<double(double)>& f,
                        const std::function<double(double, double)>& dfdx_from_x_y) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.at(i));
    auto an = a.node_;
    return make_op(name, a.shape(), std::move(out), {a},
                   [an, df = dfdx_from_x_y](detail::Node& o) {
                       if (!an->requires_grad) return;
                       for (std::size_t i = 0; i < o.grad.size(); ++i)
                           an->grad[i] += o.grad[i] * df(an->value[i], o.value[i]);
                   });
}

Tensor Graph::neg(const Tensor& a) {
    return unary_map("neg", a, [](double x) { return -x; },
                     [](double, double) { return -1.0; });
}

Tensor Graph::exp(const Tensor& a) {
    return unary_map("exp", a, [](double x) { return std::exp(x); },
                     [](double, double y) { return y; });
}

Tensor Graph::log(const Tensor& a) {
    for (std::size_t i = 0; i < a.numel(); ++i) {
        if (!(a.at(i) > 0.0)) {
            throw DomainError("log: non-positive operand " + std::to_string(a.at(i)) +
                              " at flat index " + std::to_string(i));
        }
    }
    return unary_map("log", a, [](double x) { return std::log(x); },
                     [](double x, double) { return 1.0 / x; });
}

Tensor Graph::log_clamped(const Tensor& a, double floor) {
    return unary_map("log_clamped", a,
                     [floor](double x) { return std::log(std::max(x, floor)); },
                     [floor](double x, double) { return x > floor ? 1.0 / x : 0.0; });
}

Tensor Graph::leaky_relu(const Tensor& a, double slope) {
    // Gradient at exactly 0 takes the positive branch.
    return unary_map("leaky_relu", a,
                     [slope](double x) { return x >= 0.0 ? x : slope * x; },
                     [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

Tensor Graph::sigmoid(const Tensor& a) {
    auto sig = [](double x) {
        return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                        : std::exp(x) / (1.0 + std::exp(x));
    };
    return unary_map("sigmoid", a, sig,
                     [](double, double y) { return y * (1.0 - y); });
}

Tensor Graph::tanh(const Tensor& a) {
    return unary_map("tanh", a, [](double x) { return std::tanh(x); },
                     [](double, double y) { return 1.0 - y * y; });
}

Tensor Graph::softplus(const Tensor& a) {
    // max(x,0) + log1p(exp(-|x|)) is overflow-safe on both sides.
    return unary_map("softplus", a,
                     [](double x) {
                         return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
                     },
                     [](double x, double) {
                         return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                         : std::exp(x) / (1.0 + std::exp(x));
                     });
}

Tensor Graph::activate(const Tensor& a, Activation act) {
    switch (act.kind) {
        case Activation::Kind::identity: return a;
        case Activation::Kind::leaky_relu: return leaky_relu(a, act.slope);
        case Activation::Kind::sigmoid: return sigmoid(a);
        case Activation::Kind::tanh: return tanh(a);
    }
    throw ContractError("activate: unknown activation");
}

Tensor Graph::softmax(const Tensor& a) {
    std::size_t nrows, ncols;
    if (a.shape().size() == 1) {
        nrows = 1;
        ncols = a.shape()[0];
    } else if (a.shape().size() == 2) {
        nrows = a.shape()[0];
        ncols = a.shape()[1];
    } else {
        throw ShapeError("softmax: expected 1-D or 2-D tensor, got " + shape_str(a.shape()));
    }
    if (ncols == 0) throw ShapeError("softmax: empty rows");
    std::vector<double> out(a.numel());
    const double* x = a.values().data();
    for (std::size_t r = 0; r < nrows; ++r) {
        const double* xr = x + r * ncols;
        double* yr = out.data() + r * ncols;
        double mx = xr[0];
        for (std::size_t j = 1; j < ncols; ++j) mx = std::max(mx, xr[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < ncols; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            denom += yr[j];
        }
        for (std::size_t j = 0; j < ncols; ++j) yr[j] /= denom;
    }
    auto an = a.node_;
    return make_op("softmax", a.shape(), std::move(out), {a},
                   [an, nrows, ncols](detail::Node& o) {
                       if (!an->requires_grad) return;
                       for (std::size_t r = 0; r < nrows; ++r) {
                           const double* y = o.value.data() + r * ncols;
                           const double* g = o.grad.data() + r * ncols;
                           double dot = 0.0;
                           for (std::size_t j = 0; j < ncols; ++j) dot += g[j] * y[j];
                           double* ga = an->grad.data() + r * ncols;
                           for (std::size_t j = 0; j < ncols; ++j)
                               ga[j] += y[j] * (g[j] - dot);
                       }
                   });
}

Tensor Graph::sum(const Tensor& a) {
    if (a.numel() == 0) throw DomainError("sum: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i);
    auto an = a.node_;
    return make_op("sum", {1}, {s}, {a}, [an](detail::Node& o) {
        if (!an->requires_grad) return;
        for (auto& g : an->grad) g += o.grad[0];
    });
}

Tensor Graph::mean(const Tensor& a) {
    if (a.numel() == 0) throw DomainError("mean: empty tensor");
    double s = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i);
    const double inv = 1.0 / static_cast<double>(a.numel());
    auto an = a.node_;
    return make_op("mean", {1}, {s * inv}, {a}, [an, inv](detail::Node& o) {
        if (!an->requires_grad) return;
        for (auto& g : an->grad) g += o.grad[0] * inv;
    });
}

Tensor Graph::scale(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.at(i);
    auto an = a.node_;
    return make_op("scale", a.shape(), std::move(out), {a}, [an, c](detail::Node& o) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += c * o.grad[i];
    });
}

Tensor Graph::add_const(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + c;
    auto an = a.node_;
    return make_op("add_const", a.shape(), std::move(out), {a}, [an](detail::Node& o) {
        if (!an->requires_grad) return;
        for (std::size_t i = 0; i < o.grad.size(); ++i) an->grad[i] += o.grad[i];
    });
}

Tensor Graph::add_rowwise(const Tensor& x, const Tensor& v) {
    if (x.shape().size() != 2 || v.shape().size() != 1 || x.shape()[1] != v.shape()[0]) {
        throw ShapeError("add_rowwise: " + shape_str(x.shape()) + " + " +
                         shape_str(v.shape()));
    }
    const std::size_t b = x.shape()[0], o = x.shape()[1];
    std::vector<double> out(b * o);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t j = 0; j < o; ++j) out[r * o + j] = x.at(r * o + j) + v.at(j);
    auto xn = x.node_, vn = v.node_;
    return make_op("add_rowwise", x.shape(), std::move(out), {x, v},
                   [xn, vn, b, o](detail::Node& n) {
                       if (xn->requires_grad)
                           for (std::size_t i = 0; i < n.grad.size(); ++i)
                               xn->grad[i] += n.grad[i];
                       if (vn->requires_grad)
                           for (std::size_t r = 0; r < b; ++r)
                               for (std::size_t j = 0; j < o; ++j)
                                   vn->grad[j] += n.grad[r * o + j];
                   });
}

Tensor Graph::mul_rowwise(const Tensor& x, const Tensor& v) {
    if (x.shape().size() != 2 || v.shape().size() != 1 || x.shape()[1] != v.shape()[0]) {
        throw ShapeError("mul_rowwise: " + shape_str(x.shape()) + " * " +
                         shape_str(v.shape()));
    }
    const std::size_t b = x.shape()[0], o = x.shape()[1];
    std::vector<double> out(b * o);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t j = 0; j < o; ++j) out[r * o + j] = x.at(r * o + j) * v.at(j);
    auto xn = x.node_, vn = v.node_;
    return make_op("mul_rowwise", x.shape(), std::move(out), {x, v},
                   [xn, vn, b, o](detail::Node& n) {
                       if (xn->requires_grad)
                           for (std::size_t r = 0; r < b; ++r)
                               for (std::size_t j = 0; j < o; ++j)
                                   xn->grad[r * o + j] += n.grad[r * o + j] * vn->value[j];
                       if (vn->requires_grad)
                           for (std::size_t r = 0; r < b; ++r)
                               for (std::size_t j = 0; j < o; ++j)
                                   vn->grad[j] += n.grad[r * o + j] * xn->value[r * o + j];
                   });
}

Tensor Graph::reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                         shape_str(shape));
    }
    std::vector<double> out(a.values().begin(), a.values().end());
    auto an = a.node_;
    return make_op("reshape", std::move(shape), std::move(out), {a},
                   [an](detail::Node& o) {
                       if (!an->requires_grad) return;
                       for (std::size_t i = 0; i < o.grad.size(); ++i)
                           an->grad[i] += o.grad[i];
                   });
}

Tensor Graph::concat_cols(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[0] != b.shape()[0]) {
        throw ShapeError("concat_cols: " + shape_str(a.shape()) + " ++ " +
                         shape_str(b.shape()));
    }
    const std::size_t r = a.shape()[0], ca = a.shape()[1], cb = b.shape()[1];
    std::vector<double> out(r * (ca + cb));
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a.at(i * ca + j);
        for (std::size_t j = 0; j < cb; ++j)
            out[i * (ca + cb) + ca + j] = b.at(i * cb + j);
    }
    auto an = a.node_, bn = b.node_;
    return make_op("concat_cols", {r, ca + cb}, std::move(out), {a, b},
                   [an, bn, r, ca, cb](detail::Node& o) {
                       for (std::size_t i = 0; i < r; ++i) {
                           if (an->requires_grad)
                               for (std::size_t j = 0; j < ca; ++j)
                                   an->grad[i * ca + j] += o.grad[i * (ca + cb) + j];
                           if (bn->requires_grad)
                               for (std::size_t j = 0; j < cb; ++j)
                                   bn->grad[i * cb + j] += o.grad[i * (ca + cb) + ca + j];
                       }
                   });
}

Tensor Graph::component_mix(const Tensor& components, const Tensor& weights) {
    if (components.shape().size() != 3 || weights.shape().size() != 2 ||
        components.shape()[0] != weights.shape()[0] ||
        components.shape()[1] != weights.shape()[1]) {
        throw ShapeError("component_mix: " + shape_str(components.shape()) + " with " +
                         shape_str(weights.shape()));
    }
    const std::size_t b = components.shape()[0], N = components.shape()[1],
                      p = components.shape()[2];
    std::vector<double> out(b * p, 0.0);
    const double* cv = components.values().data();
    const double* wv = weights.values().data();
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t i = 0; i < N; ++i) {
            const double w = wv[r * N + i];
            const double* crow = cv + (r * N + i) * p;
            double* orow = out.data() + r * p;
            for (std::size_t j = 0; j < p; ++j) orow[j] += w * crow[j];
        }
    auto cn = components.node_, wn = weights.node_;
    return make_op("component_mix", {b, p}, std::move(out), {components, weights},
                   [cn, wn, b, N, p](detail::Node& o) {
                       for (std::size_t r = 0; r < b; ++r)
                           for (std::size_t i = 0; i < N; ++i) {
                               const double w = wn->value[r * N + i];
                               const double* g = o.grad.data() + r * p;
                               if (cn->requires_grad) {
                                   double* gc = cn->grad.data() + (r * N + i) * p;
                                   for (std::size_t j = 0; j < p; ++j) gc[j] += w * g[j];
                               }
                               if (wn->requires_grad) {
                                   const double* crow = cn->value.data() + (r * N + i) * p;
                                   double acc = 0.0;
                                   for (std::size_t j = 0; j < p; ++j)
                                       acc += crow[j] * g[j];
                                   wn->grad[r * N + i] += acc;
                               }
                           }
                   });
}

Tensor Graph::pick_log(const Tensor& probs, const std::vector<std::size_t>& labels,
                       double floor, std::size_t* clamp_count) {
    if (probs.shape().size() != 2) {
        throw ShapeError("pick_log: expected 2-D probabilities, got " +
                         shape_str(probs.shape()));
    }
    const std::size_t b = probs.shape()[0], c = probs.shape()[1];
    if (labels.size() != b) {
        throw ShapeError("pick_log: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(b) + " rows");
    }
    std::vector<double> out(b);
    for (std::size_t r = 0; r < b; ++r) {
        if (labels[r] >= c)
            throw DomainError("pick_log: label " + std::to_string(labels[r]) +
                              " out of range for " + std::to_string(c) + " classes");
        double pr = probs.at(r * c + labels[r]);
        if (pr < floor && clamp_count) ++*clamp_count;
        out[r] = std::log(std::max(pr, floor));
    }
    auto pn = probs.node_;
    auto lab = labels;
    return make_op("pick_log", {b, 1}, std::move(out), {probs},
                   [pn, lab, c, floor](detail::Node& o) {
                       if (!pn->requires_grad) return;
                       for (std::size_t r = 0; r < lab.size(); ++r) {
                           const double pr = pn->value[r * c + lab[r]];
                           if (pr > floor) pn->grad[r * c + lab[r]] += o.grad[r] / pr;
                       }
                   });
}

Tensor Graph::dense(const Tensor& x, const Tensor& W, const Tensor& b, Activation act) {
    return activate(add_rowwise(matmul(x, W), b), act);
}

void Graph::backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward: loss must be a scalar tensor");
    }
    if (!loss.node_->requires_grad || loss.node_->owner != this) {
        throw ContractError("backward: loss was not produced by ops recorded on this graph");
    }
    // Tape nodes are transient op outputs: reset them so each backward pass
    // deposits exactly d(loss)/d(leaf) into the persistent leaf accumulators.
    for (auto& n : tape_) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    loss.node_->grad[0] = 1.0;
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop();
    }
}

}  // namespace tgan
