#include "funl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "funl/errors.hpp"

namespace funl {

namespace {

bool wants_grad(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (tape == nullptr) {
        return false;
    }
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) {
            return true;
        }
    }
    return false;
}

// C[m,n] += A[m,k] * B[k,n]
void matmul_nn_acc(const double* a, const double* b, double* c, Dim m, Dim k, Dim n) {
    for (Dim i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (Dim kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            if (aik == 0.0) {
                continue;
            }
            const double* brow = b + kk * n;
            for (Dim j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
}

// C[m,n] += A[m,k] * B[n,k]^T  (rows of both operands are contiguous)
void matmul_nt_acc(const double* a, const double* b, double* c, Dim m, Dim k, Dim n) {
    for (Dim i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (Dim j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (Dim kk = 0; kk < k; ++kk) {
                acc += arow[kk] * brow[kk];
            }
            crow[j] += acc;
        }
    }
}

// C[k,n] += A[m,k]^T * B[m,n]
void matmul_tn_acc(const double* a, const double* b, double* c, Dim m, Dim k, Dim n) {
    for (Dim i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (Dim kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            if (aik == 0.0) {
                continue;
            }
            double* crow = c + kk * n;
            for (Dim j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
}

void require_rank(const Tensor& t, int rank, const char* op, const char* arg) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": argument '" + arg + "' must have rank " +
                         std::to_string(rank) + ", got " + shape_str(t.shape()));
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape) {
    require_rank(a, 2, "matmul", "a");
    require_rank(b, 2, "matmul", "b");
    check_finite(a, "matmul", "a");
    check_finite(b, "matmul", "b");
    const Dim m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw ShapeError("matmul: inner dimensions disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out(Shape{m, n});
    matmul_nn_acc(a.data().data(), b.data().data(), out.data().data(), m, k, n);

    if (wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        tape->record([ac, bc, oc, m, k, n]() mutable {
            const std::vector<double>& go = oc.grad();
            if (ac.requires_grad()) {
                // dA = dC * B^T
                std::vector<double> da(static_cast<std::size_t>(m * k), 0.0);
                matmul_nt_acc(go.data(), bc.data().data(), da.data(), m, n, k);
                ac.accumulate_grad(da);
            }
            if (bc.requires_grad()) {
                // dB = A^T * dC
                std::vector<double> db(static_cast<std::size_t>(k * n), 0.0);
                matmul_tn_acc(ac.data().data(), go.data(), db.data(), m, k, n);
                bc.accumulate_grad(db);
            }
        });
    }
    return out;
}

Tensor relu(const Tensor& x, Tape* tape) {
    check_finite(x, "relu", "x");
    Tensor out(x.shape());
    const std::vector<double>& xs = x.data();
    std::vector<double>& os = out.data();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        os[i] = xs[i] > 0.0 ? xs[i] : 0.0;
    }
    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record([xc, oc]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double> dx(go.size());
            const std::vector<double>& xs = xc.data();
            for (std::size_t i = 0; i < go.size(); ++i) {
                dx[i] = xs[i] > 0.0 ? go[i] : 0.0;
            }
            xc.accumulate_grad(dx);
        });
    }
    return out;
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias, Tape* tape) {
    require_rank(x, 2, "linear", "x");
    require_rank(weight, 2, "linear", "weight");
    require_rank(bias, 1, "linear", "bias");
    check_finite(x, "linear", "x");
    check_finite(weight, "linear", "weight");
    check_finite(bias, "linear", "bias");
    const Dim n = x.dim(0), in = x.dim(1), out_f = weight.dim(0);
    if (weight.dim(1) != in) {
        throw ShapeError("linear: input width " + shape_str(x.shape()) +
                         " does not match weight " + shape_str(weight.shape()));
    }
    if (bias.dim(0) != out_f) {
        throw ShapeError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    Tensor out(Shape{n, out_f});
    // y = x * W^T + b
    matmul_nt_acc(x.data().data(), weight.data().data(), out.data().data(), n, in, out_f);
    {
        std::vector<double>& os = out.data();
        const std::vector<double>& bs = bias.data();
        for (Dim i = 0; i < n; ++i) {
            double* row = os.data() + i * out_f;
            for (Dim o = 0; o < out_f; ++o) {
                row[o] += bs[static_cast<std::size_t>(o)];
            }
        }
    }
    if (wants_grad(tape, {&x, &weight, &bias})) {
        out.set_requires_grad(true);
        Tensor xc = x, wc = weight, bc = bias, oc = out;
        tape->record([xc, wc, bc, oc, n, in, out_f]() mutable {
            const std::vector<double>& go = oc.grad();
            if (xc.requires_grad()) {
                // dX = dY * W
                std::vector<double> dx(static_cast<std::size_t>(n * in), 0.0);
                matmul_nn_acc(go.data(), wc.data().data(), dx.data(), n, out_f, in);
                xc.accumulate_grad(dx);
            }
            if (wc.requires_grad()) {
                // dW = dY^T * X
                std::vector<double> dw(static_cast<std::size_t>(out_f * in), 0.0);
                matmul_tn_acc(go.data(), xc.data().data(), dw.data(), n, out_f, in);
                wc.accumulate_grad(dw);
            }
            if (bc.requires_grad()) {
                std::vector<double> db(static_cast<std::size_t>(out_f), 0.0);
                for (Dim i = 0; i < n; ++i) {
                    const double* row = go.data() + i * out_f;
                    for (Dim o = 0; o < out_f; ++o) {
                        db[static_cast<std::size_t>(o)] += row[o];
                    }
                }
                bc.accumulate_grad(db);
            }
        });
    }
    return out;
}

namespace {

struct ConvDims {
    Dim n, c, h, w, f, kh, kw, oh, ow, cols;
};

ConvDims conv_dims(const Tensor& input, const Tensor& kernel, Dim stride, Dim padding) {
    ConvDims d{};
    d.n = input.dim(0);
    d.c = input.dim(1);
    d.h = input.dim(2);
    d.w = input.dim(3);
    d.f = kernel.dim(0);
    d.kh = kernel.dim(2);
    d.kw = kernel.dim(3);
    if (kernel.dim(1) != d.c) {
        throw ShapeError("conv2d: kernel channels " + shape_str(kernel.shape()) +
                         " do not match input " + shape_str(input.shape()));
    }
    const Dim ph = d.h + 2 * padding;
    const Dim pw = d.w + 2 * padding;
    if (d.kh > ph || d.kw > pw) {
        throw ShapeError("conv2d: kernel " + shape_str(kernel.shape()) +
                         " larger than padded input " + shape_str({d.n, d.c, ph, pw}));
    }
    d.oh = (ph - d.kh) / stride + 1;
    d.ow = (pw - d.kw) / stride + 1;
    d.cols = d.c * d.kh * d.kw;
    return d;
}

// cols has one row per output position, laid out [(n,oh,ow), (c,kh,kw)].
std::vector<double> im2col(const std::vector<double>& x, const ConvDims& d, Dim stride,
                           Dim padding) {
    std::vector<double> cols(static_cast<std::size_t>(d.n * d.oh * d.ow * d.cols), 0.0);
    for (Dim n = 0; n < d.n; ++n) {
        for (Dim oh = 0; oh < d.oh; ++oh) {
            for (Dim ow = 0; ow < d.ow; ++ow) {
                double* row = cols.data() + ((n * d.oh + oh) * d.ow + ow) * d.cols;
                for (Dim c = 0; c < d.c; ++c) {
                    for (Dim i = 0; i < d.kh; ++i) {
                        const Dim ih = oh * stride - padding + i;
                        if (ih < 0 || ih >= d.h) {
                            continue;
                        }
                        const double* src = x.data() + ((n * d.c + c) * d.h + ih) * d.w;
                        double* dst = row + (c * d.kh + i) * d.kw;
                        for (Dim j = 0; j < d.kw; ++j) {
                            const Dim iw = ow * stride - padding + j;
                            if (iw >= 0 && iw < d.w) {
                                dst[j] = src[iw];
                            }
                        }
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_acc(const std::vector<double>& cols, std::vector<double>& dx, const ConvDims& d,
                Dim stride, Dim padding) {
    for (Dim n = 0; n < d.n; ++n) {
        for (Dim oh = 0; oh < d.oh; ++oh) {
            for (Dim ow = 0; ow < d.ow; ++ow) {
                const double* row = cols.data() + ((n * d.oh + oh) * d.ow + ow) * d.cols;
                for (Dim c = 0; c < d.c; ++c) {
                    for (Dim i = 0; i < d.kh; ++i) {
                        const Dim ih = oh * stride - padding + i;
                        if (ih < 0 || ih >= d.h) {
                            continue;
                        }
                        double* dst = dx.data() + ((n * d.c + c) * d.h + ih) * d.w;
                        const double* src = row + (c * d.kh + i) * d.kw;
                        for (Dim j = 0; j < d.kw; ++j) {
                            const Dim iw = ow * stride - padding + j;
                            if (iw >= 0 && iw < d.w) {
                                dst[iw] += src[j];
                            }
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, Dim stride, Dim padding, Tape* tape) {
    require_rank(input, 4, "conv2d", "input");
    require_rank(kernel, 4, "conv2d", "kernel");
    if (stride < 1) {
        throw ValueError("conv2d: stride must be positive");
    }
    if (padding < 0) {
        throw ValueError("conv2d: padding must be non-negative");
    }
    check_finite(input, "conv2d", "input");
    check_finite(kernel, "conv2d", "kernel");
    const ConvDims d = conv_dims(input, kernel, stride, padding);

    // im2col + matmul: out[(n,oh,ow), f] = cols[(n,oh,ow), :] . kernel[f, :]
    std::vector<double> cols = im2col(input.data(), d, stride, padding);
    const Dim rows = d.n * d.oh * d.ow;
    std::vector<double> out_mat(static_cast<std::size_t>(rows * d.f), 0.0);
    matmul_nt_acc(cols.data(), kernel.data().data(), out_mat.data(), rows, d.cols, d.f);

    Tensor out(Shape{d.n, d.f, d.oh, d.ow});
    {
        std::vector<double>& os = out.data();
        for (Dim n = 0; n < d.n; ++n) {
            for (Dim f = 0; f < d.f; ++f) {
                for (Dim oh = 0; oh < d.oh; ++oh) {
                    for (Dim ow = 0; ow < d.ow; ++ow) {
                        os[((n * d.f + f) * d.oh + oh) * d.ow + ow] =
                            out_mat[((n * d.oh + oh) * d.ow + ow) * d.f + f];
                    }
                }
            }
        }
    }

    if (wants_grad(tape, {&input, &kernel})) {
        out.set_requires_grad(true);
        Tensor ic = input, kc = kernel, oc = out;
        tape->record([ic, kc, oc, d, stride, padding, cols = std::move(cols), rows]() mutable {
            const std::vector<double>& go = oc.grad();
            // Regroup dOut back into the [(n,oh,ow), f] layout.
            std::vector<double> go_mat(static_cast<std::size_t>(rows * d.f));
            for (Dim n = 0; n < d.n; ++n) {
                for (Dim f = 0; f < d.f; ++f) {
                    for (Dim oh = 0; oh < d.oh; ++oh) {
                        for (Dim ow = 0; ow < d.ow; ++ow) {
                            go_mat[((n * d.oh + oh) * d.ow + ow) * d.f + f] =
                                go[((n * d.f + f) * d.oh + oh) * d.ow + ow];
                        }
                    }
                }
            }
            if (kc.requires_grad()) {
                // dK[f, :] = sum_rows dOut[row, f] * cols[row, :]
                std::vector<double> dk(static_cast<std::size_t>(d.f * d.cols), 0.0);
                matmul_tn_acc(go_mat.data(), cols.data(), dk.data(), rows, d.f, d.cols);
                kc.accumulate_grad(dk);
            }
            if (ic.requires_grad()) {
                // dCols = dOut * K, then scatter back into the input.
                std::vector<double> dcols(static_cast<std::size_t>(rows * d.cols), 0.0);
                matmul_nn_acc(go_mat.data(), kc.data().data(), dcols.data(), rows, d.f, d.cols);
                std::vector<double> dx(ic.data().size(), 0.0);
                col2im_acc(dcols, dx, d, stride, padding);
                ic.accumulate_grad(dx);
            }
        });
    }
    return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias, Tape* tape) {
    require_rank(x, 4, "add_channel_bias", "x");
    require_rank(bias, 1, "add_channel_bias", "bias");
    check_finite(x, "add_channel_bias", "x");
    check_finite(bias, "add_channel_bias", "bias");
    const Dim n = x.dim(0), f = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (bias.dim(0) != f) {
        throw ShapeError("add_channel_bias: bias " + shape_str(bias.shape()) +
                         " does not match channels of " + shape_str(x.shape()));
    }
    Tensor out(x.shape());
    const Dim plane = h * w;
    const std::vector<double>& xs = x.data();
    const std::vector<double>& bs = bias.data();
    std::vector<double>& os = out.data();
    for (Dim i = 0; i < n; ++i) {
        for (Dim c = 0; c < f; ++c) {
            const double b = bs[static_cast<std::size_t>(c)];
            const Dim base = (i * f + c) * plane;
            for (Dim p = 0; p < plane; ++p) {
                os[base + p] = xs[base + p] + b;
            }
        }
    }
    if (wants_grad(tape, {&x, &bias})) {
        out.set_requires_grad(true);
        Tensor xc = x, bc = bias, oc = out;
        tape->record([xc, bc, oc, n, f, plane]() mutable {
            const std::vector<double>& go = oc.grad();
            if (xc.requires_grad()) {
                xc.accumulate_grad(go);
            }
            if (bc.requires_grad()) {
                std::vector<double> db(static_cast<std::size_t>(f), 0.0);
                for (Dim i = 0; i < n; ++i) {
                    for (Dim c = 0; c < f; ++c) {
                        const Dim base = (i * f + c) * plane;
                        double acc = 0.0;
                        for (Dim p = 0; p < plane; ++p) {
                            acc += go[base + p];
                        }
                        db[static_cast<std::size_t>(c)] += acc;
                    }
                }
                bc.accumulate_grad(db);
            }
        });
    }
    return out;
}

Tensor maxpool2d(const Tensor& x, Dim pool_h, Dim pool_w, Tape* tape) {
    require_rank(x, 4, "maxpool2d", "x");
    if (pool_h < 1 || pool_w < 1) {
        throw ValueError("maxpool2d: window must be positive");
    }
    check_finite(x, "maxpool2d", "x");
    const Dim n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const Dim oh = h / pool_h, ow = w / pool_w;
    if (oh < 1 || ow < 1) {
        throw ShapeError("maxpool2d: window (" + std::to_string(pool_h) + "," +
                         std::to_string(pool_w) + ") larger than input " + shape_str(x.shape()));
    }
    Tensor out(Shape{n, c, oh, ow});
    std::vector<Dim> argmax(static_cast<std::size_t>(out.numel()));
    const std::vector<double>& xs = x.data();
    std::vector<double>& os = out.data();
    for (Dim i = 0; i < n; ++i) {
        for (Dim ch = 0; ch < c; ++ch) {
            const Dim in_base = (i * c + ch) * h * w;
            const Dim out_base = (i * c + ch) * oh * ow;
            for (Dim py = 0; py < oh; ++py) {
                for (Dim px = 0; px < ow; ++px) {
                    double best = -std::numeric_limits<double>::infinity();
                    Dim best_idx = -1;
                    for (Dim dy = 0; dy < pool_h; ++dy) {
                        const Dim row = in_base + (py * pool_h + dy) * w + px * pool_w;
                        for (Dim dx = 0; dx < pool_w; ++dx) {
                            const double v = xs[row + dx];
                            if (v > best) {  // first maximum wins on ties
                                best = v;
                                best_idx = row + dx;
                            }
                        }
                    }
                    os[out_base + py * ow + px] = best;
                    argmax[static_cast<std::size_t>(out_base + py * ow + px)] = best_idx;
                }
            }
        }
    }
    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record([xc, oc, argmax = std::move(argmax)]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double> dx(xc.data().size(), 0.0);
            for (std::size_t i = 0; i < go.size(); ++i) {
                dx[static_cast<std::size_t>(argmax[i])] += go[i];
            }
            xc.accumulate_grad(dx);
        });
    }
    return out;
}

Tensor flatten(const Tensor& x, Tape* tape) {
    if (x.rank() < 2) {
        throw ShapeError("flatten: input must have a batch dimension, got " +
                         shape_str(x.shape()));
    }
    check_finite(x, "flatten", "x");
    const Dim n = x.dim(0);
    const Dim rest = x.numel() / n;
    Tensor out(Shape{n, rest}, x.data());
    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record([xc, oc]() mutable {
            if (xc.requires_grad()) {
                xc.accumulate_grad(oc.grad());
            }
        });
    }
    return out;
}

Tensor softmax(const Tensor& logits, Tape* tape) {
    require_rank(logits, 2, "softmax", "logits");
    check_finite(logits, "softmax", "logits");
    const Dim n = logits.dim(0), k = logits.dim(1);
    if (k < 2) {
        throw ShapeError("softmax: needs at least 2 classes, got " + shape_str(logits.shape()));
    }
    Tensor out(logits.shape());
    const std::vector<double>& zs = logits.data();
    std::vector<double>& os = out.data();
    for (Dim i = 0; i < n; ++i) {
        const double* row = zs.data() + i * k;
        double* orow = os.data() + i * k;
        double mx = row[0];
        for (Dim j = 1; j < k; ++j) {
            mx = std::max(mx, row[j]);
        }
        double sum = 0.0;
        for (Dim j = 0; j < k; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (Dim j = 0; j < k; ++j) {
            orow[j] /= sum;
        }
    }
    if (wants_grad(tape, {&logits})) {
        out.set_requires_grad(true);
        Tensor zc = logits, oc = out;
        tape->record([zc, oc, n, k]() mutable {
            const std::vector<double>& go = oc.grad();
            const std::vector<double>& s = oc.data();
            std::vector<double> dz(zc.data().size());
            for (Dim i = 0; i < n; ++i) {
                const double* grow = go.data() + i * k;
                const double* srow = s.data() + i * k;
                double dot = 0.0;
                for (Dim j = 0; j < k; ++j) {
                    dot += grow[j] * srow[j];
                }
                double* drow = dz.data() + i * k;
                for (Dim j = 0; j < k; ++j) {
                    drow[j] = srow[j] * (grow[j] - dot);
                }
            }
            zc.accumulate_grad(dz);
        });
    }
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tape* tape) {
    require_rank(logits, 2, "cross_entropy", "logits");
    check_finite(logits, "cross_entropy", "logits");
    const Dim n = logits.dim(0), k = logits.dim(1);
    if (static_cast<Dim>(labels.size()) != n) {
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    }
    for (int y : labels) {
        if (y < 0 || y >= k) {
            throw IndexError("cross_entropy: label " + std::to_string(y) + " outside [0," +
                             std::to_string(k) + ")");
        }
    }
    const std::vector<double>& zs = logits.data();
    // softmax probabilities are kept for the backward rule
    std::vector<double> probs(zs.size());
    double loss = 0.0;
    for (Dim i = 0; i < n; ++i) {
        const double* row = zs.data() + i * k;
        double* prow = probs.data() + i * k;
        double mx = row[0];
        for (Dim j = 1; j < k; ++j) {
            mx = std::max(mx, row[j]);
        }
        double sum = 0.0;
        for (Dim j = 0; j < k; ++j) {
            prow[j] = std::exp(row[j] - mx);
            sum += prow[j];
        }
        for (Dim j = 0; j < k; ++j) {
            prow[j] /= sum;
        }
        // -log softmax[label] = log(sum) - (z[label] - mx)
        loss += std::log(sum) - (row[labels[static_cast<std::size_t>(i)]] - mx);
    }
    Tensor out = Tensor::scalar(loss / static_cast<double>(n));
    if (wants_grad(tape, {&logits})) {
        out.set_requires_grad(true);
        Tensor zc = logits, oc = out;
        tape->record([zc, oc, probs = std::move(probs), labels, n, k]() mutable {
            const double g = oc.grad()[0] / static_cast<double>(n);
            std::vector<double> dz(probs.size());
            for (Dim i = 0; i < n; ++i) {
                const double* prow = probs.data() + i * k;
                double* drow = dz.data() + i * k;
                const int y = labels[static_cast<std::size_t>(i)];
                for (Dim j = 0; j < k; ++j) {
                    drow[j] = g * (prow[j] - (j == y ? 1.0 : 0.0));
                }
            }
            zc.accumulate_grad(dz);
        });
    }
    return out;
}

namespace {

void require_distribution_rows(const Tensor& t, const char* op, const char* arg) {
    const Dim n = t.dim(0), k = t.dim(1);
    const std::vector<double>& v = t.data();
    for (Dim i = 0; i < n; ++i) {
        double sum = 0.0;
        for (Dim j = 0; j < k; ++j) {
            const double p = v[i * k + j];
            if (p < 0.0) {
                throw ValueError(std::string(op) + ": negative entry in row " + std::to_string(i) +
                                 " of '" + arg + "'");
            }
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-6) {
            throw ValueError(std::string(op) + ": row " + std::to_string(i) + " of '" + arg +
                             "' sums to " + std::to_string(sum) + ", not 1");
        }
    }
}

}  // namespace

Tensor kl_divergence(const Tensor& p, const Tensor& q, Tape* tape) {
    require_rank(p, 2, "kl_divergence", "p");
    require_rank(q, 2, "kl_divergence", "q");
    check_finite(p, "kl_divergence", "p");
    check_finite(q, "kl_divergence", "q");
    if (p.shape() != q.shape()) {
        throw ShapeError("kl_divergence: shape mismatch " + shape_str(p.shape()) + " vs " +
                         shape_str(q.shape()));
    }
    require_distribution_rows(p, "kl_divergence", "p");
    require_distribution_rows(q, "kl_divergence", "q");
    const Dim n = p.dim(0), k = p.dim(1);
    const std::vector<double>& ps = p.data();
    const std::vector<double>& qs = q.data();
    double total = 0.0;
    for (Dim i = 0; i < n * k; ++i) {
        const double pc = std::max(ps[static_cast<std::size_t>(i)], kKlLogClamp);
        const double qc = std::max(qs[static_cast<std::size_t>(i)], kKlLogClamp);
        total += ps[static_cast<std::size_t>(i)] * (std::log(pc) - std::log(qc));
    }
    Tensor out = Tensor::scalar(total / static_cast<double>(n));
    if (wants_grad(tape, {&p, &q})) {
        out.set_requires_grad(true);
        Tensor pc_t = p, qc_t = q, oc = out;
        tape->record([pc_t, qc_t, oc, n, k]() mutable {
            const double g = oc.grad()[0] / static_cast<double>(n);
            const std::vector<double>& ps = pc_t.data();
            const std::vector<double>& qs = qc_t.data();
            if (pc_t.requires_grad()) {
                std::vector<double> dp(ps.size());
                for (std::size_t i = 0; i < ps.size(); ++i) {
                    const double pc = std::max(ps[i], kKlLogClamp);
                    const double qc = std::max(qs[i], kKlLogClamp);
                    double d = std::log(pc) - std::log(qc);
                    if (ps[i] > kKlLogClamp) {
                        d += ps[i] / pc;  // = 1 away from the clamp
                    }
                    dp[i] = g * d;
                }
                pc_t.accumulate_grad(dp);
            }
            if (qc_t.requires_grad()) {
                std::vector<double> dq(qs.size());
                for (std::size_t i = 0; i < qs.size(); ++i) {
                    const double qc = std::max(qs[i], kKlLogClamp);
                    dq[i] = (qs[i] > kKlLogClamp) ? -g * ps[i] / qc : 0.0;
                }
                qc_t.accumulate_grad(dq);
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& x, double c, Tape* tape) {
    check_finite(x, "scale", "x");
    if (!std::isfinite(c)) {
        throw ValueError("scale: non-finite factor");
    }
    Tensor out(x.shape());
    const std::vector<double>& xs = x.data();
    std::vector<double>& os = out.data();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        os[i] = c * xs[i];
    }
    if (wants_grad(tape, {&x})) {
        out.set_requires_grad(true);
        Tensor xc = x, oc = out;
        tape->record([xc, oc, c]() mutable {
            const std::vector<double>& go = oc.grad();
            std::vector<double> dx(go.size());
            for (std::size_t i = 0; i < go.size(); ++i) {
                dx[i] = c * go[i];
            }
            xc.accumulate_grad(dx);
        });
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b, Tape* tape) {
    check_finite(a, "add", "a");
    check_finite(b, "add", "b");
    if (a.shape() != b.shape()) {
        throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out(a.shape());
    const std::vector<double>& as = a.data();
    const std::vector<double>& bs = b.data();
    std::vector<double>& os = out.data();
    for (std::size_t i = 0; i < as.size(); ++i) {
        os[i] = as[i] + bs[i];
    }
    if (wants_grad(tape, {&a, &b})) {
        out.set_requires_grad(true);
        Tensor ac = a, bc = b, oc = out;
        tape->record([ac, bc, oc]() mutable {
            const std::vector<double>& go = oc.grad();
            if (ac.requires_grad()) {
                ac.accumulate_grad(go);
            }
            if (bc.requires_grad()) {
                bc.accumulate_grad(go);
            }
        });
    }
    return out;
}

}  // namespace funl
