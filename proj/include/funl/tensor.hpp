#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace funl {

using Dim = std::int64_t;
using Shape = std::vector<Dim>;

Dim shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor of 64-bit reals with an optional gradient slot.
// Tensor is a cheap handle onto shared storage: ops hold their inputs alive
// through the tape, and model parameters stay aliased between forward,
// backward and the optimizer step. Deep copies are explicit via clone().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double v, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    Dim numel() const;
    Dim dim(int axis) const;
    int rank() const;

    std::vector<double>& data();
    const std::vector<double>& data() const;

    bool requires_grad() const;
    void set_requires_grad(bool on);

    bool has_grad() const;
    // Gradient buffer, allocated as zeros on first access.
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();
    void drop_grad();
    void accumulate_grad(const std::vector<double>& g);

    // Value of a 1-element tensor.
    double value() const;

    // Deep copy of shape/data/flags; gradient is not carried over.
    Tensor clone() const;
    bool shares_storage(const Tensor& other) const;

private:
    struct Node {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;  // empty until first touched
        bool requires_grad = false;
    };

    std::shared_ptr<Node> node_;

    Node& node();
    const Node& node() const;
};

struct NamedParam {
    std::string name;
    Tensor tensor;
};

// Reverse-mode tape, rebuilt for every forward pass. Ops append one entry
// per recorded operation in execution order, which is a topological order
// of the graph by construction; backward() replays the entries exactly once
// in reverse.
class Tape {
public:
    void record(std::function<void()> backward);
    std::size_t size() const { return entries_.size(); }
    // Seeds d(root) = 1 and propagates. root must be a 1-element tensor.
    void backward(Tensor& root);
    // Seeds d(root) with an arbitrary cotangent of matching length.
    void backward_with(Tensor& root, const std::vector<double>& cotangent);
    void clear();

private:
    std::vector<std::function<void()>> entries_;
};

// Throws ValueError if any element of t is NaN or infinite. Ops call this
// on their inputs so non-finite values never propagate silently.
void check_finite(const Tensor& t, const char* op, const char* arg);

}  // namespace funl
