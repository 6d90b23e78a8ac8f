#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "funl/tensor.hpp"

namespace funl {

struct Conv2dLayer {
    Dim in_channels = 0;
    Dim out_channels = 0;
    Dim kernel_h = 1;
    Dim kernel_w = 1;
    Dim stride = 1;
    Dim padding = 0;
};

struct LinearLayer {
    Dim in_features = 0;
    Dim out_features = 0;
};

struct ReluLayer {};

struct MaxPool2dLayer {
    Dim pool_h = 1;
    Dim pool_w = 1;
};

struct FlattenLayer {};

using LayerSpec = std::variant<Conv2dLayer, LinearLayer, ReluLayer, MaxPool2dLayer, FlattenLayer>;

// Ordered stack of layers with a named parameter collection. Construction
// runs a symbolic shape pass over `input_shape` (the per-sample shape,
// without the batch dimension) and rejects stacks whose layers do not
// compose. Copying a Model deep-copies its parameters.
class Model {
public:
    Model() = default;
    Model(std::string arch_id, Shape input_shape, std::vector<LayerSpec> layers);

    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    bool defined() const { return !layers_.empty(); }
    const std::string& arch_id() const { return arch_id_; }
    const Shape& input_shape() const { return input_shape_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    Dim num_classes() const { return num_classes_; }

    std::vector<NamedParam>& params() { return params_; }
    const std::vector<NamedParam>& params() const { return params_; }
    Tensor* find_param(const std::string& name);
    Dim param_count() const;

    // Seeded uniform(-b, b) fill with b = sqrt(6 / fan_in) per layer.
    void init_params(std::uint64_t seed);

    // batch: [N, ...input_shape] (flat inputs may be [N, d]).
    // Returns logits [N, num_classes].
    Tensor forward(const Tensor& batch, Tape* tape) const;

    // Symbolic shape propagation for an input of the given per-sample shape.
    Shape output_shape_for(const Shape& sample_shape) const;

    bool params_bitwise_equal(const Model& other) const;
    void zero_grads();

private:
    std::string arch_id_;
    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<NamedParam> params_;
    Dim num_classes_ = 0;

    void build_params();
    void validate_composition();
};

// Conv net for windowed inertial signals, realized as 2-D convolutions of
// height 1 so the same conv path serves images and time series:
//   Conv(C->16, 1x5) ReLU Pool(1x2) Conv(16->32, 1x5) ReLU Pool(1x2)
//   Flatten FC(->64) ReLU FC(->num_classes)
Model build_har_net(Dim input_channels, Dim window_len, Dim num_classes,
                    std::uint64_t seed = 0);

// Classic LeNet-5 for 1x28x28 inputs:
//   Conv(1->6, 5x5, pad 2) ReLU Pool(2) Conv(6->16, 5x5) ReLU Pool(2)
//   Flatten FC(400->120) ReLU FC(120->84) ReLU FC(84->num_classes)
Model build_lenet5(Dim num_classes, std::uint64_t seed = 0);

// Linear/ReLU stack over flat features; empty `hidden` yields one linear map.
Model build_mlp(Dim input_dim, const std::vector<Dim>& hidden, Dim num_classes,
                std::uint64_t seed = 0);

// Rebuilds the architecture a self-describing arch_id denotes (params
// zero-initialized). Throws FormatError for unknown ids.
Model model_from_arch_id(const std::string& arch_id);

}  // namespace funl
