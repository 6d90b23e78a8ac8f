#include "funl/sgd.hpp"

#include <cmath>

#include "funl/errors.hpp"

namespace funl {

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ValueError("SgdConfig: learning_rate must be positive");
    }
    if (momentum < 0.0 || momentum >= 1.0) {
        throw ValueError("SgdConfig: momentum must be in [0,1)");
    }
    if (weight_decay < 0.0) {
        throw ValueError("SgdConfig: weight_decay must be non-negative");
    }
}

void sgd_step(std::vector<NamedParam>& params, const SgdConfig& cfg, VelocityMap& velocity) {
    cfg.validate();
    for (NamedParam& p : params) {
        if (!p.tensor.has_grad()) {
            throw ValueError("sgd_step: parameter '" + p.name + "' has no gradient");
        }
    }
    const double lr = cfg.learning_rate;
    const bool use_momentum = cfg.momentum != 0.0;
    for (NamedParam& p : params) {
        std::vector<double>& w = p.tensor.data();
        std::vector<double>& g = p.tensor.grad();
        if (use_momentum) {
            std::vector<double>& v = velocity[p.name];
            if (v.size() != w.size()) {
                v.assign(w.size(), 0.0);
            }
            for (std::size_t i = 0; i < w.size(); ++i) {
                const double ge = g[i] + cfg.weight_decay * w[i];
                v[i] = cfg.momentum * v[i] + ge;
                w[i] -= lr * v[i];
            }
        } else {
            for (std::size_t i = 0; i < w.size(); ++i) {
                w[i] -= lr * (g[i] + cfg.weight_decay * w[i]);
            }
        }
        p.tensor.zero_grad();
    }
}

SgdOptimizer::SgdOptimizer(SgdConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SgdOptimizer::step(std::vector<NamedParam>& params) { sgd_step(params, cfg_, velocity_); }

}  // namespace funl
