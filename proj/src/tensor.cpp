#include "funl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "funl/errors.hpp"

namespace funl {

Dim shape_numel(const Shape& shape) {
    Dim n = 1;
    for (Dim d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) {
            os << "x";
        }
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
    for (Dim d : shape) {
        if (d <= 0) {
            throw ShapeError("non-positive dimension in shape " + shape_str(shape));
        }
    }
}

}  // namespace

Tensor::Tensor(Shape shape, bool requires_grad) {
    validate_shape(shape);
    node_ = std::make_shared<Node>();
    node_->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
    validate_shape(shape);
    if (shape_numel(shape) != static_cast<Dim>(values.size())) {
        throw ShapeError("data length " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    node_ = std::make_shared<Node>();
    node_->shape = std::move(shape);
    node_->data = std::move(values);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
    Tensor t(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), v);
    return t;
}

Tensor::Node& Tensor::node() {
    if (!node_) {
        throw ValueError("use of an undefined Tensor");
    }
    return *node_;
}

const Tensor::Node& Tensor::node() const {
    if (!node_) {
        throw ValueError("use of an undefined Tensor");
    }
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

Dim Tensor::numel() const { return static_cast<Dim>(node().data.size()); }

Dim Tensor::dim(int axis) const {
    const Shape& s = shape();
    if (axis < 0 || axis >= static_cast<int>(s.size())) {
        throw IndexError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
    }
    return s[static_cast<std::size_t>(axis)];
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::vector<double>& Tensor::data() { return node().data; }
const std::vector<double>& Tensor::data() const { return node().data; }

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool on) { node().requires_grad = on; }

bool Tensor::has_grad() const { return !node().grad.empty(); }

std::vector<double>& Tensor::grad() {
    Node& n = node();
    if (n.grad.empty()) {
        n.grad.assign(n.data.size(), 0.0);
    }
    return n.grad;
}

const std::vector<double>& Tensor::grad() const {
    const Node& n = node();
    if (n.grad.empty()) {
        throw ValueError("gradient requested but never populated");
    }
    return n.grad;
}

void Tensor::zero_grad() {
    Node& n = node();
    if (!n.grad.empty()) {
        std::fill(n.grad.begin(), n.grad.end(), 0.0);
    }
}

void Tensor::drop_grad() { node().grad.clear(); }

void Tensor::accumulate_grad(const std::vector<double>& g) {
    Node& n = node();
    if (g.size() != n.data.size()) {
        throw ShapeError("gradient length " + std::to_string(g.size()) +
                         " does not match tensor " + shape_str(n.shape));
    }
    if (n.grad.empty()) {
        n.grad = g;
        return;
    }
    for (std::size_t i = 0; i < g.size(); ++i) {
        n.grad[i] += g[i];
    }
}

double Tensor::value() const {
    const Node& n = node();
    if (n.data.size() != 1) {
        throw ShapeError("value() on non-scalar tensor " + shape_str(n.shape));
    }
    return n.data[0];
}

Tensor Tensor::clone() const {
    const Node& n = node();
    return Tensor(n.shape, n.data, n.requires_grad);
}

bool Tensor::shares_storage(const Tensor& other) const { return node_ == other.node_; }

void Tape::record(std::function<void()> backward) {
    entries_.push_back(std::move(backward));
}

void Tape::backward(Tensor& root) {
    if (root.numel() != 1) {
        throw ShapeError("backward root must be a scalar, got " + shape_str(root.shape()));
    }
    root.grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        (*it)();
    }
}

void Tape::backward_with(Tensor& root, const std::vector<double>& cotangent) {
    root.accumulate_grad(cotangent);
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        (*it)();
    }
}

void Tape::clear() { entries_.clear(); }

void check_finite(const Tensor& t, const char* op, const char* arg) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) {
            throw ValueError(std::string(op) + ": non-finite value in argument '" + arg + "'");
        }
    }
}

}  // namespace funl
