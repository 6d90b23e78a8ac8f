#include "funl/model.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "funl/errors.hpp"
#include "funl/ops.hpp"
#include "funl/rng.hpp"

namespace funl {

Model::Model(std::string arch_id, Shape input_shape, std::vector<LayerSpec> layers)
    : arch_id_(std::move(arch_id)), input_shape_(std::move(input_shape)),
      layers_(std::move(layers)) {
    build_params();
    validate_composition();
}

Model::Model(const Model& other)
    : arch_id_(other.arch_id_), input_shape_(other.input_shape_), layers_(other.layers_),
      num_classes_(other.num_classes_) {
    params_.reserve(other.params_.size());
    for (const NamedParam& p : other.params_) {
        params_.push_back({p.name, p.tensor.clone()});
    }
}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        Model copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Tensor* Model::find_param(const std::string& name) {
    for (NamedParam& p : params_) {
        if (p.name == name) {
            return &p.tensor;
        }
    }
    return nullptr;
}

Dim Model::param_count() const {
    Dim n = 0;
    for (const NamedParam& p : params_) {
        n += p.tensor.numel();
    }
    return n;
}

void Model::build_params() {
    int conv_idx = 0;
    int fc_idx = 0;
    for (const LayerSpec& layer : layers_) {
        if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
            const std::string base = "conv" + std::to_string(conv_idx++);
            params_.push_back(
                {base + ".weight", Tensor(Shape{conv->out_channels, conv->in_channels,
                                                conv->kernel_h, conv->kernel_w},
                                          true)});
            params_.push_back({base + ".bias", Tensor(Shape{conv->out_channels}, true)});
        } else if (const auto* fc = std::get_if<LinearLayer>(&layer)) {
            const std::string base = "fc" + std::to_string(fc_idx++);
            params_.push_back(
                {base + ".weight", Tensor(Shape{fc->out_features, fc->in_features}, true)});
            params_.push_back({base + ".bias", Tensor(Shape{fc->out_features}, true)});
        }
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        for (std::size_t j = i + 1; j < params_.size(); ++j) {
            if (params_[i].name == params_[j].name) {
                throw ValueError("duplicate parameter name '" + params_[i].name + "'");
            }
        }
    }
}

Shape Model::output_shape_for(const Shape& sample_shape) const {
    Shape s = sample_shape;
    int idx = 0;
    for (const LayerSpec& layer : layers_) {
        ++idx;
        if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
            if (s.size() != 3) {
                throw ShapeError("layer " + std::to_string(idx) + " (conv) expects C,H,W input, got " +
                                 shape_str(s));
            }
            if (s[0] != conv->in_channels) {
                throw ShapeError("layer " + std::to_string(idx) + " (conv) expects " +
                                 std::to_string(conv->in_channels) + " channels, got " +
                                 shape_str(s));
            }
            const Dim ph = s[1] + 2 * conv->padding;
            const Dim pw = s[2] + 2 * conv->padding;
            if (conv->kernel_h > ph || conv->kernel_w > pw) {
                throw ShapeError("layer " + std::to_string(idx) + " (conv) kernel exceeds input " +
                                 shape_str(s));
            }
            s = {conv->out_channels, (ph - conv->kernel_h) / conv->stride + 1,
                 (pw - conv->kernel_w) / conv->stride + 1};
        } else if (const auto* pool = std::get_if<MaxPool2dLayer>(&layer)) {
            if (s.size() != 3) {
                throw ShapeError("layer " + std::to_string(idx) + " (pool) expects C,H,W input, got " +
                                 shape_str(s));
            }
            const Dim oh = s[1] / pool->pool_h;
            const Dim ow = s[2] / pool->pool_w;
            if (oh < 1 || ow < 1) {
                throw ShapeError("layer " + std::to_string(idx) + " (pool) window exceeds input " +
                                 shape_str(s));
            }
            s = {s[0], oh, ow};
        } else if (std::get_if<FlattenLayer>(&layer)) {
            s = {shape_numel(s)};
        } else if (const auto* fc = std::get_if<LinearLayer>(&layer)) {
            if (s.size() != 1) {
                throw ShapeError("layer " + std::to_string(idx) + " (linear) expects flat input, got " +
                                 shape_str(s));
            }
            if (s[0] != fc->in_features) {
                throw ShapeError("layer " + std::to_string(idx) + " (linear) expects width " +
                                 std::to_string(fc->in_features) + ", got " + shape_str(s));
            }
            s = {fc->out_features};
        }
        // ReLU keeps the shape
    }
    return s;
}

void Model::validate_composition() {
    const Shape out = output_shape_for(input_shape_);
    if (out.size() != 1 || out[0] < 2) {
        throw ShapeError("model must end in at least 2 logits, got " + shape_str(out));
    }
    num_classes_ = out[0];
}

void Model::init_params(std::uint64_t seed) {
    Rng rng(seed);
    std::size_t cursor = 0;
    for (const LayerSpec& layer : layers_) {
        Dim fan_in = 0;
        if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
            fan_in = conv->in_channels * conv->kernel_h * conv->kernel_w;
        } else if (const auto* fc = std::get_if<LinearLayer>(&layer)) {
            fan_in = fc->in_features;
        } else {
            continue;
        }
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (int t = 0; t < 2; ++t) {  // weight then bias
            Tensor& p = params_[cursor++].tensor;
            for (double& v : p.data()) {
                v = rng.uniform(-bound, bound);
            }
            p.drop_grad();
        }
    }
}

Tensor Model::forward(const Tensor& batch, Tape* tape) const {
    if (batch.rank() < 2) {
        throw ShapeError("forward: batch must include a leading N dimension, got " +
                         shape_str(batch.shape()));
    }
    {
        const Shape& bs = batch.shape();
        Shape sample(bs.begin() + 1, bs.end());
        if (shape_numel(sample) != shape_numel(input_shape_)) {
            throw ShapeError("forward: sample shape " + shape_str(sample) +
                             " incompatible with model input " + shape_str(input_shape_));
        }
    }
    Tensor x = batch;
    // Conv stacks take [N,C,H,W], linear stacks [N,d]; reshape when needed.
    if (x.rank() == 2 && input_shape_.size() == 3) {
        Shape full{x.dim(0)};
        full.insert(full.end(), input_shape_.begin(), input_shape_.end());
        x = Tensor(full, x.data(), false);
    } else if (x.rank() > 2 && input_shape_.size() == 1) {
        x = Tensor(Shape{x.dim(0), x.numel() / x.dim(0)}, x.data(), false);
    }
    std::size_t cursor = 0;
    for (const LayerSpec& layer : layers_) {
        if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
            const Tensor& w = params_[cursor++].tensor;
            const Tensor& b = params_[cursor++].tensor;
            x = conv2d(x, w, conv->stride, conv->padding, tape);
            x = add_channel_bias(x, b, tape);
        } else if (std::get_if<LinearLayer>(&layer)) {
            const Tensor& w = params_[cursor++].tensor;
            const Tensor& b = params_[cursor++].tensor;
            x = linear(x, w, b, tape);
        } else if (std::get_if<ReluLayer>(&layer)) {
            x = relu(x, tape);
        } else if (const auto* pool = std::get_if<MaxPool2dLayer>(&layer)) {
            x = maxpool2d(x, pool->pool_h, pool->pool_w, tape);
        } else if (std::get_if<FlattenLayer>(&layer)) {
            x = flatten(x, tape);
        }
    }
    return x;
}

bool Model::params_bitwise_equal(const Model& other) const {
    if (params_.size() != other.params_.size()) {
        return false;
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name != other.params_[i].name) {
            return false;
        }
        const std::vector<double>& a = params_[i].tensor.data();
        const std::vector<double>& b = other.params_[i].tensor.data();
        if (a.size() != b.size()) {
            return false;
        }
        if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) {
            return false;
        }
    }
    return true;
}

void Model::zero_grads() {
    for (NamedParam& p : params_) {
        p.tensor.zero_grad();
    }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

Dim parse_dim(const std::string& s) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size() || v <= 0) {
            throw FormatError("bad dimension '" + s + "' in arch_id");
        }
        return static_cast<Dim>(v);
    } catch (const std::exception&) {
        throw FormatError("bad dimension '" + s + "' in arch_id");
    }
}

}  // namespace

Model build_har_net(Dim input_channels, Dim window_len, Dim num_classes, std::uint64_t seed) {
    if (input_channels < 1) {
        throw ValueError("build_har_net: input_channels must be positive");
    }
    if (window_len < 8) {
        throw ValueError("build_har_net: window_len must be at least 8");
    }
    if (num_classes < 2) {
        throw ValueError("build_har_net: need at least 2 classes");
    }
    // Width after conv(1x5) pool(1x2) conv(1x5) pool(1x2).
    const Dim w1 = window_len - 4;
    const Dim w2 = (w1 / 2) - 4;
    if (w1 < 2 || w2 < 2 || w2 / 2 < 1) {
        throw ShapeError("build_har_net: window of " + std::to_string(window_len) +
                         " too short for two conv/pool stages");
    }
    const Dim flat = 32 * (w2 / 2);
    std::ostringstream id;
    id << "har:" << input_channels << ":" << window_len << ":" << num_classes;
    Model m(id.str(), Shape{input_channels, 1, window_len},
            {Conv2dLayer{input_channels, 16, 1, 5, 1, 0}, ReluLayer{}, MaxPool2dLayer{1, 2},
             Conv2dLayer{16, 32, 1, 5, 1, 0}, ReluLayer{}, MaxPool2dLayer{1, 2}, FlattenLayer{},
             LinearLayer{flat, 64}, ReluLayer{}, LinearLayer{64, num_classes}});
    m.init_params(seed);
    return m;
}

Model build_lenet5(Dim num_classes, std::uint64_t seed) {
    if (num_classes < 2) {
        throw ValueError("build_lenet5: need at least 2 classes");
    }
    Model m("lenet5:" + std::to_string(num_classes), Shape{1, 28, 28},
            {Conv2dLayer{1, 6, 5, 5, 1, 2}, ReluLayer{}, MaxPool2dLayer{2, 2},
             Conv2dLayer{6, 16, 5, 5, 1, 0}, ReluLayer{}, MaxPool2dLayer{2, 2}, FlattenLayer{},
             LinearLayer{400, 120}, ReluLayer{}, LinearLayer{120, 84}, ReluLayer{},
             LinearLayer{84, num_classes}});
    m.init_params(seed);
    return m;
}

Model build_mlp(Dim input_dim, const std::vector<Dim>& hidden, Dim num_classes,
                std::uint64_t seed) {
    if (input_dim < 1) {
        throw ValueError("build_mlp: input_dim must be positive");
    }
    if (num_classes < 2) {
        throw ValueError("build_mlp: need at least 2 classes");
    }
    std::vector<LayerSpec> layers;
    Dim width = input_dim;
    std::ostringstream id;
    id << "mlp:" << input_dim << ":";
    for (std::size_t i = 0; i < hidden.size(); ++i) {
        if (hidden[i] < 1) {
            throw ValueError("build_mlp: hidden widths must be positive");
        }
        layers.push_back(LinearLayer{width, hidden[i]});
        layers.push_back(ReluLayer{});
        width = hidden[i];
        if (i > 0) {
            id << ",";
        }
        id << hidden[i];
    }
    layers.push_back(LinearLayer{width, num_classes});
    id << ":" << num_classes;
    Model m(id.str(), Shape{input_dim}, std::move(layers));
    m.init_params(seed);
    return m;
}

Model model_from_arch_id(const std::string& arch_id) {
    const std::vector<std::string> parts = split(arch_id, ':');
    if (parts.size() == 2 && parts[0] == "lenet5") {
        return build_lenet5(parse_dim(parts[1]));
    }
    if (parts.size() == 4 && parts[0] == "har") {
        return build_har_net(parse_dim(parts[1]), parse_dim(parts[2]), parse_dim(parts[3]));
    }
    if (parts.size() == 4 && parts[0] == "mlp") {
        std::vector<Dim> hidden;
        if (!parts[2].empty()) {
            for (const std::string& h : split(parts[2], ',')) {
                hidden.push_back(parse_dim(h));
            }
        }
        return build_mlp(parse_dim(parts[1]), hidden, parse_dim(parts[3]));
    }
    throw FormatError("unknown arch_id '" + arch_id + "'");
}

}  // namespace funl
