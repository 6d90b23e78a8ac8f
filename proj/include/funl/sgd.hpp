#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "funl/tensor.hpp"

namespace funl {

struct SgdConfig {
    double learning_rate = 0.01;
    double momentum = 0.0;      // in [0, 1)
    double weight_decay = 0.0;  // non-negative

    void validate() const;
};

using VelocityMap = std::map<std::string, std::vector<double>>;

// One SGD update over a named parameter collection:
//   g_eff = grad + weight_decay * p
//   no momentum:    p -= lr * g_eff
//   with momentum:  v = momentum * v + g_eff;  p -= lr * v
// Every parameter must carry a populated gradient; gradients are zeroed
// after the step. `velocity` persists momentum buffers across steps and is
// keyed by parameter name.
void sgd_step(std::vector<NamedParam>& params, const SgdConfig& cfg, VelocityMap& velocity);

// Convenience wrapper owning the velocity buffers.
class SgdOptimizer {
public:
    explicit SgdOptimizer(SgdConfig cfg);

    void step(std::vector<NamedParam>& params);
    const SgdConfig& config() const { return cfg_; }

private:
    SgdConfig cfg_;
    VelocityMap velocity_;
};

}  // namespace funl
