#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "tgan/common.hpp"

namespace tgan {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Activation {
    enum class Kind { identity, leaky_relu, sigmoid, tanh };
    Kind kind = Kind::identity;
    double slope = 0.2;

    static Activation identity() { return {Kind::identity, 0.0}; }
    static Activation leaky_relu(double slope = 0.2) { return {Kind::leaky_relu, slope}; }
    static Activation sigmoid() { return {Kind::sigmoid, 0.0}; }
    static Activation tanh() { return {Kind::tanh, 0.0}; }
};

class Graph;

namespace detail {
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated iff requires_grad
    bool requires_grad = false;
    const Graph* owner = nullptr;  // null for leaves/constants
    std::function<void()> backprop;
};
}  // namespace detail

// Value-semantic handle to a tensor node. Leaf tensors hold parameters (or
// constants) and persist across graphs; op results come from Graph methods
// and live as long as some handle or the recording graph keeps them alive.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t rows() const;  // 2-D only
    std::size_t cols() const;  // 2-D only

    std::span<const double> values() const;
    // In-place mutation of a leaf's payload (optimizer updates, init).
    std::span<double> values_mut();
    std::span<const double> grad() const;
    bool requires_grad() const;
    void zero_grad();

    double item() const;  // numel() == 1
    double at(std::size_t flat) const;

  private:
    friend class Graph;
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

// Define-by-run tape. Ops execute eagerly, validate shapes and finiteness,
// and append a backward closure; backward() replays the tape in exact
// reverse execution order. A graph constructed with record=false computes
// values only, which is what sampling and evaluation paths use.
class Graph {
  public:
    explicit Graph(bool record = true) : record_(record) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Tensor matmul(const Tensor& a, const Tensor& b);

    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor mul(const Tensor& a, const Tensor& b);
    Tensor neg(const Tensor& a);
    Tensor exp(const Tensor& a);
    Tensor log(const Tensor& a);  // DomainError on non-positive entries
    Tensor log_clamped(const Tensor& a, double floor = 1e-12);
    Tensor leaky_relu(const Tensor& a, double slope = 0.2);
    Tensor sigmoid(const Tensor& a);
    Tensor tanh(const Tensor& a);
    Tensor softplus(const Tensor& a);
    Tensor activate(const Tensor& a, Activation act);

    Tensor softmax(const Tensor& a);  // 1-D, or row-wise on 2-D

    Tensor sum(const Tensor& a);
    Tensor mean(const Tensor& a);

    Tensor scale(const Tensor& a, double c);
    Tensor add_const(const Tensor& a, double c);

    // Row broadcasts: x is [b x o], v is [o].
    Tensor add_rowwise(const Tensor& x, const Tensor& v);
    Tensor mul_rowwise(const Tensor& x, const Tensor& v);

    Tensor reshape(const Tensor& a, Shape shape);
    Tensor concat_cols(const Tensor& a, const Tensor& b);

    // out[r,j] = sum_i weights[r,i] * components[r,i,j]
    Tensor component_mix(const Tensor& components, const Tensor& weights);

    // out[r,0] = log(max(probs[r, labels[r]], floor)); counts clamps.
    Tensor pick_log(const Tensor& probs, const std::vector<std::size_t>& labels,
                    double floor = 1e-12, std::size_t* clamp_count = nullptr);

    Tensor dense(const Tensor& x, const Tensor& W, const Tensor& b, Activation act);

    void backward(const Tensor& loss);

    bool recording() const { return record_; }
    std::size_t num_ops() const { return tape_.size(); }

  private:
    using NodePtr = std::shared_ptr<detail::Node>;
    Tensor make_op(const char* name, Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& parents,
                   std::function<void(detail::Node&)> backward);
    Tensor unary_map(const char* name, const Tensor& a,
                     const std::function<double(double)>& f,
                     const std::function<double(double, double)>& dfdx_from_x_y);

    bool record_;
    std::vector<NodePtr> tape_;
};

}  // namespace tgan
