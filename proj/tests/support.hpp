#pragma once

// Shared test utilities: independent oracles and small data generators.
// Everything here is deliberately written without reusing the library's
// computation paths, so tests compare two independent routes.

#include <cmath>
#include <functional>
#include <vector>

#include "funl/rng.hpp"
#include "funl/tensor.hpp"

namespace funl::testing {

inline double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1.0});
    return std::abs(a - b) / scale;
}

// Central finite differences through an arbitrary scalar-valued function of
// one tensor's entries. Returns the max relative error against `analytic`.
inline double fd_max_rel_err(Tensor& input, const std::vector<double>& analytic,
                             const std::function<double()>& eval, double step = 1e-5) {
    double worst = 0.0;
    std::vector<double>& v = input.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double saved = v[i];
        v[i] = saved + step;
        const double fp = eval();
        v[i] = saved - step;
        const double fm = eval();
        v[i] = saved;
        const double fd = (fp - fm) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    for (double& v : t.data()) {
        v = rng.uniform(lo, hi);
    }
    return t;
}

// Six-nested-loop cross-correlation reference, independent of the op's
// im2col path.
inline std::vector<double> conv2d_naive(const std::vector<double>& x, Dim n, Dim c, Dim h, Dim w,
                                        const std::vector<double>& k, Dim f, Dim kh, Dim kw,
                                        Dim stride, Dim padding, Dim oh, Dim ow) {
    std::vector<double> out(static_cast<std::size_t>(n * f * oh * ow), 0.0);
    for (Dim in = 0; in < n; ++in) {
        for (Dim of = 0; of < f; ++of) {
            for (Dim y = 0; y < oh; ++y) {
                for (Dim xo = 0; xo < ow; ++xo) {
                    double acc = 0.0;
                    for (Dim ic = 0; ic < c; ++ic) {
                        for (Dim dy = 0; dy < kh; ++dy) {
                            for (Dim dx = 0; dx < kw; ++dx) {
                                const Dim iy = y * stride - padding + dy;
                                const Dim ix = xo * stride - padding + dx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                                    continue;
                                }
                                acc += x[((in * c + ic) * h + iy) * w + ix] *
                                       k[((of * c + ic) * kh + dy) * kw + dx];
                            }
                        }
                    }
                    out[((in * f + of) * oh + y) * ow + xo] = acc;
                }
            }
        }
    }
    return out;
}

}  // namespace funl::testing
