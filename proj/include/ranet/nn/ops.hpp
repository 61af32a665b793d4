// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "ranet/nn/graph.hpp"

namespace ranet::nn {

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeometry {
    int in_c, in_h, in_w;
    int kernel, stride, pad;
    int out_h, out_w;

    int rows() const { return in_c * kernel * kernel; }
    int plane() const { return out_h * out_w; }
};

// cols(row, n * P + p): row = (ci * k + ky) * k + kx, p = oy * out_w + ox.
template <typename T>
void im2col(const Tensor<T>& x, const ConvGeometry& g, RowMat<T>& cols)
{
    const int batch = x.shape().n;
    const int P = g.plane();
    cols.resize(g.rows(), static_cast<Eigen::Index>(batch) * P);
    for (int ci = 0; ci < g.in_c; ++ci) {
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                T* row = cols.row((ci * g.kernel + ky) * g.kernel + kx).data();
                for (int n = 0; n < batch; ++n) {
                    const T* src = x.plane(n, ci);
                    T* dst = row + static_cast<std::size_t>(n) * P;
                    for (int oy = 0; oy < g.out_h; ++oy) {
                        const int iy = oy * g.stride - g.pad + ky;
                        T* out = dst + oy * g.out_w;
                        if (iy < 0 || iy >= g.in_h) {
                            std::fill(out, out + g.out_w, T(0));
                            continue;
                        }
                        const T* in_row = src + static_cast<std::size_t>(iy) * g.in_w;
                        for (int ox = 0; ox < g.out_w; ++ox) {
                            const int ix = ox * g.stride - g.pad + kx;
                            out[ox] = (ix >= 0 && ix < g.in_w) ? in_row[ix] : T(0);
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const RowMat<T>& cols, const ConvGeometry& g, Tensor<T>& dx)
{
    const int batch = dx.shape().n;
    const int P = g.plane();
    for (int ci = 0; ci < g.in_c; ++ci) {
        for (int ky = 0; ky < g.kernel; ++ky) {
            for (int kx = 0; kx < g.kernel; ++kx) {
                const T* row = cols.row((ci * g.kernel + ky) * g.kernel + kx).data();
                for (int n = 0; n < batch; ++n) {
                    T* dst = dx.plane(n, ci);
                    const T* src = row + static_cast<std::size_t>(n) * P;
                    for (int oy = 0; oy < g.out_h; ++oy) {
                        const int iy = oy * g.stride - g.pad + ky;
                        if (iy < 0 || iy >= g.in_h) {
                            continue;
                        }
                        T* out_row = dst + static_cast<std::size_t>(iy) * g.in_w;
                        const T* in = src + oy * g.out_w;
                        for (int ox = 0; ox < g.out_w; ++ox) {
                            const int ix = ox * g.stride - g.pad + kx;
                            if (ix >= 0 && ix < g.in_w) {
                                out_row[ix] += in[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace detail

/// 2-D convolution. Weight shape [C_out, C_in, k, k], bias shape [1, C_out, 1, 1].
template <typename T>
Var conv2d(Graph<T>& graph, Var x, Var weight, Var bias, int stride, int pad)
{
    const Shape xs = graph.value(x).shape();
    const Shape ws = graph.value(weight).shape();
    if (ws.c != xs.c || ws.h != ws.w) {
        throw std::invalid_argument("conv2d: weight " + ws.str() + " does not match input " + xs.str());
    }
    if (graph.value(bias).size() != static_cast<std::size_t>(ws.n)) {
        throw std::invalid_argument("conv2d: bias size mismatch");
    }
    detail::ConvGeometry geo{xs.c, xs.h, xs.w, ws.h, stride, pad, 0, 0};
    geo.out_h = (xs.h + 2 * pad - ws.h) / stride + 1;
    geo.out_w = (xs.w + 2 * pad - ws.w) / stride + 1;
    if (geo.out_h <= 0 || geo.out_w <= 0) {
        throw std::invalid_argument("conv2d: empty output for input " + xs.str());
    }
    const int cout = ws.n;
    const int P = geo.plane();

    auto cols = std::make_shared<detail::RowMat<T>>();
    detail::im2col(graph.value(x), geo, *cols);
    Eigen::Map<const detail::RowMat<T>> wmat(graph.value(weight).data(), cout, geo.rows());
    detail::RowMat<T> y = wmat * (*cols);

    Tensor<T> out(Shape{xs.n, cout, geo.out_h, geo.out_w});
    const Tensor<T>& b = graph.value(bias);
    for (int n = 0; n < xs.n; ++n) {
        for (int co = 0; co < cout; ++co) {
            const T* src = y.row(co).data() + static_cast<std::size_t>(n) * P;
            T* dst = out.plane(n, co);
            const T bv = b[co];
            for (int p = 0; p < P; ++p) {
                dst[p] = src[p] + bv;
            }
        }
    }
    if (!graph.records()) {
        cols.reset();
    }
    return graph.emit(std::move(out), {x, weight, bias}, [=](Graph<T>& g, int self) {
        const Tensor<T>& dout = g.grad(Var{self});
        detail::RowMat<T> dy(cout, static_cast<Eigen::Index>(xs.n) * P);
        for (int n = 0; n < xs.n; ++n) {
            for (int co = 0; co < cout; ++co) {
                std::copy_n(dout.plane(n, co), P, dy.row(co).data() + static_cast<std::size_t>(n) * P);
            }
        }
        if (g.needs_grad(weight)) {
            Eigen::Map<detail::RowMat<T>> dw(g.grad(weight).data(), cout, geo.rows());
            dw.noalias() += dy * cols->transpose();
        }
        if (g.needs_grad(bias)) {
            Tensor<T>& db = g.grad(bias);
            for (int co = 0; co < cout; ++co) {
                db[co] += dy.row(co).sum();
            }
        }
        if (g.needs_grad(x)) {
            Eigen::Map<const detail::RowMat<T>> w(g.value(weight).data(), cout, geo.rows());
            detail::RowMat<T> dcols = w.transpose() * dy;
            detail::col2im_add(dcols, geo, g.grad(x));
        }
    });
}

template <typename T>
Var relu(Graph<T>& graph, Var x)
{
    Tensor<T> out = graph.value(x);
    for (auto& v : out.values()) {
        v = v > T(0) ? v : T(0);
    }
    return graph.emit(std::move(out), {x}, [x](Graph<T>& g, int self) {
        const Tensor<T>& y = g.value(Var{self});
        const Tensor<T>& dy = g.grad(Var{self});
        Tensor<T>& dx = g.grad(x);
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (y[i] > T(0)) {
                dx[i] += dy[i];
            }
        }
    });
}

template <typename T>
Var add(Graph<T>& graph, Var a, Var b)
{
    if (graph.value(a).shape() != graph.value(b).shape()) {
        throw std::invalid_argument("add: shape mismatch " + graph.value(a).shape().str() + " vs " +
                                    graph.value(b).shape().str());
    }
    Tensor<T> out = graph.value(a);
    const Tensor<T>& bv = graph.value(b);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += bv[i];
    }
    return graph.emit(std::move(out), {a, b}, [a, b](Graph<T>& g, int self) {
        const Tensor<T>& dy = g.grad(Var{self});
        for (Var in : {a, b}) {
            if (g.needs_grad(in)) {
                Tensor<T>& dx = g.grad(in);
                for (std::size_t i = 0; i < dx.size(); ++i) {
                    dx[i] += dy[i];
                }
            }
        }
    });
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
template <typename T>
Var max_pool2(Graph<T>& graph, Var x)
{
    const Tensor<T>& in = graph.value(x);
    const Shape s = in.shape();
    const Shape os{s.n, s.c, s.h / 2, s.w / 2};
    Tensor<T> out(os);
    auto argmax = std::make_shared<std::vector<std::uint32_t>>(os.size());
    std::size_t o = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const T* src = in.plane(n, c);
            for (int y = 0; y < os.h; ++y) {
                for (int xx = 0; xx < os.w; ++xx, ++o) {
                    std::uint32_t best = static_cast<std::uint32_t>((2 * y) * s.w + 2 * xx);
                    for (int dy = 0; dy < 2; ++dy) {
                        for (int dx = 0; dx < 2; ++dx) {
                            const auto idx = static_cast<std::uint32_t>((2 * y + dy) * s.w + 2 * xx + dx);
                            if (src[idx] > src[best]) {
                                best = idx;
                            }
                        }
                    }
                    out[o] = src[best];
                    (*argmax)[o] = best;
                }
            }
        }
    }
    return graph.emit(std::move(out), {x}, [x, s, os, argmax](Graph<T>& g, int self) {
        const Tensor<T>& dy = g.grad(Var{self});
        Tensor<T>& dx = g.grad(x);
        std::size_t o = 0;
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                T* dst = dx.plane(n, c);
                for (std::size_t p = 0; p < os.plane(); ++p, ++o) {
                    dst[(*argmax)[o]] += dy[o];
                }
            }
        }
    });
}

/// Nearest-neighbour 2x upsampling.
template <typename T>
Var upsample2(Graph<T>& graph, Var x)
{
    const Tensor<T>& in = graph.value(x);
    const Shape s = in.shape();
    Tensor<T> out(Shape{s.n, s.c, s.h * 2, s.w * 2});
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const T* src = in.plane(n, c);
            T* dst = out.plane(n, c);
            for (int y = 0; y < 2 * s.h; ++y) {
                for (int xx = 0; xx < 2 * s.w; ++xx) {
                    dst[y * 2 * s.w + xx] = src[(y / 2) * s.w + xx / 2];
                }
            }
        }
    }
    return graph.emit(std::move(out), {x}, [x, s](Graph<T>& g, int self) {
        const Tensor<T>& dy = g.grad(Var{self});
        Tensor<T>& dx = g.grad(x);
        for (int n = 0; n < s.n; ++n) {
            for (int c = 0; c < s.c; ++c) {
                const T* src = dy.plane(n, c);
                T* dst = dx.plane(n, c);
                for (int y = 0; y < 2 * s.h; ++y) {
                    for (int xx = 0; xx < 2 * s.w; ++xx) {
                        dst[(y / 2) * s.w + xx / 2] += src[y * 2 * s.w + xx];
                    }
                }
            }
        }
    });
}

/// Mean squared error against a constant target; returns a scalar node.
template <typename T>
Var mse(Graph<T>& graph, Var prediction, const Tensor<T>& target)
{
    const Tensor<T>& p = graph.value(prediction);
    if (p.shape() != target.shape()) {
        throw std::invalid_argument("mse: shape mismatch " + p.shape().str() + " vs " + target.shape().str());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - target[i];
        sum += d * d;
    }
    const double count = static_cast<double>(std::max<std::size_t>(p.size(), 1));
    Tensor<T> out(Shape{1, 1, 1, 1}, static_cast<T>(sum / count));
    auto tgt = std::make_shared<Tensor<T>>(target);
    return graph.emit(std::move(out), {prediction}, [prediction, tgt, count](Graph<T>& g, int self) {
        const T dy = g.grad(Var{self})[0];
        const Tensor<T>& pv = g.value(prediction);
        Tensor<T>& dx = g.grad(prediction);
        const T scale = static_cast<T>(2.0 / count) * dy;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            dx[i] += scale * (pv[i] - (*tgt)[i]);
        }
    });
}

/// Weighted sum of scalar nodes.
template <typename T>
Var weighted_sum(Graph<T>& graph, std::span<const Var> scalars, std::span<const double> weights)
{
    if (scalars.size() != weights.size() || scalars.empty()) {
        throw std::invalid_argument("weighted_sum: need matching non-empty scalars and weights");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        total += weights[i] * static_cast<double>(graph.value(scalars[i])[0]);
    }
    std::vector<Var> ins(scalars.begin(), scalars.end());
    std::vector<double> ws(weights.begin(), weights.end());
    return graph.emit(Tensor<T>(Shape{1, 1, 1, 1}, static_cast<T>(total)), std::span<const Var>(ins), [ins, ws](Graph<T>& g, int self) {
        const T dy = g.grad(Var{self})[0];
        for (std::size_t i = 0; i < ins.size(); ++i) {
            if (g.needs_grad(ins[i])) {
                g.grad(ins[i])[0] += static_cast<T>(ws[i]) * dy;
            }
        }
    });
}

} // namespace ranet::nn
