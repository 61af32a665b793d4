// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "ranet/network.hpp"
#include "ranet/nn/ops.hpp"
#include "ranet/nn/optim.hpp"
#include "test_support.hpp"

using namespace ranet;
using namespace ranet::nn;
using ranet::testing::Gen;

namespace {

Tensor<double> random_tensor(Gen& g, Shape s)
{
    Tensor<double> t(s);
    for (auto& v : t.values()) {
        v = g.uniform(-1, 1);
    }
    return t;
}

// Direct nested-loop convolution used as the oracle for the im2col path.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride, int pad)
{
    const Shape xs = x.shape(), ws = w.shape();
    const int oh = (xs.h + 2 * pad - ws.h) / stride + 1;
    const int ow = (xs.w + 2 * pad - ws.w) / stride + 1;
    Tensor<double> y(Shape{xs.n, ws.n, oh, ow});
    for (int n = 0; n < xs.n; ++n)
        for (int co = 0; co < ws.n; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = b[co];
                    for (int ci = 0; ci < xs.c; ++ci)
                        for (int ky = 0; ky < ws.h; ++ky)
                            for (int kx = 0; kx < ws.w; ++kx) {
                                const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                                if (iy >= 0 && iy < xs.h && ix >= 0 && ix < xs.w) {
                                    acc += w.at(co, ci, ky, kx) * x.at(n, ci, iy, ix);
                                }
                            }
                    y.at(n, co, oy, ox) = acc;
                }
    return y;
}

// Central differences of f() w.r.t. every entry of `t`.
template <typename F>
std::vector<double> numeric_grad(Tensor<double>& t, F f, double h = 1e-6)
{
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double v = t[i];
        t[i] = v + h;
        const double fp = f();
        t[i] = v - h;
        const double fm = f();
        t[i] = v;
        out[i] = (fp - fm) / (2 * h);
    }
    return out;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

} // namespace

TEST(Conv2d, MatchesNaiveOracle)
{
    Gen g(41);
    for (int stride : {1, 2}) {
        for (int k : {1, 3, 7}) {
            Parameter<double> w("w", Shape{4, 3, k, k}), b("b", Shape{1, 4, 1, 1});
            w.value = random_tensor(g, w.value.shape());
            b.value = random_tensor(g, b.value.shape());
            const Tensor<double> x = random_tensor(g, Shape{2, 3, 9, 8});
            Graph<double> graph(false);
            const Var y = conv2d(graph, graph.constant(x), graph.parameter(w), graph.parameter(b), stride, k / 2);
            const Tensor<double> expected = naive_conv(x, w.value, b.value, stride, k / 2);
            ASSERT_EQ(graph.value(y).shape(), expected.shape());
            for (std::size_t i = 0; i < expected.size(); ++i) {
                EXPECT_NEAR(graph.value(y)[i], expected[i], 1e-12);
            }
        }
    }
}

TEST(Ops, GradientsMatchFiniteDifferences)
{
    Gen g(42);
    Parameter<double> x("x", Shape{2, 3, 6, 6}), w("w", Shape{4, 3, 3, 3}), b("b", Shape{1, 4, 1, 1});
    x.value = random_tensor(g, x.value.shape());
    w.value = random_tensor(g, w.value.shape());
    b.value = random_tensor(g, b.value.shape());
    const Tensor<double> target = random_tensor(g, Shape{2, 4, 6, 6});
    auto build = [&](Graph<double>& graph) {
        const Var xv = graph.parameter(x);
        Var y = conv2d(graph, xv, graph.parameter(w), graph.parameter(b), 2, 1);
        y = relu(graph, y);
        const Var pooled = upsample2(graph, max_pool2(graph, upsample2(graph, y)));
        y = add(graph, pooled, upsample2(graph, y));
        const Var l1 = mse(graph, y, target);
        const Var l2 = mse(graph, upsample2(graph, max_pool2(graph, y)), target);
        const std::vector<Var> terms{l1, l2};
        const std::vector<double> weights{1.0, 0.5};
        return weighted_sum(graph, std::span<const Var>(terms), std::span<const double>(weights));
    };
    Graph<double> graph;
    const Var loss = build(graph);
    graph.backward(loss);
    auto f = [&] {
        Graph<double> gr(false);
        return gr.value(build(gr))[0];
    };
    for (auto* p : {&x, &w, &b}) {
        const auto num = numeric_grad(p->value, f);
        for (std::size_t i = 0; i < num.size(); ++i) {
            EXPECT_LT(rel_err(p->grad[i], num[i]), 1e-4) << p->name << "[" << i << "]";
        }
    }
}

TEST(RmsProp, StepOracle)
{
    Parameter<double> p("p", Shape{1, 1, 1, 2});
    p.value[0] = 1.0;
    p.value[1] = -2.0;
    std::vector<Parameter<double>*> params{&p};
    RmsProp<double> opt(params);
    p.grad[0] = 0.5;
    p.grad[1] = 0.0;
    opt.step(0.01);
    const double s = 0.01 * 0.25;
    EXPECT_NEAR(p.value[0], 1.0 - 0.01 * 0.5 / (std::sqrt(s) + 1e-8), 1e-12);
    EXPECT_EQ(p.value[1], -2.0);
    EXPECT_THROW(opt.step(0.0), std::invalid_argument);
}

TEST(Graph, BackwardRequiresRecording)
{
    Graph<double> graph(false);
    const Var v = graph.constant(Tensor<double>(Shape{1, 1, 1, 1}, 2.0));
    EXPECT_THROW(graph.backward(v), std::logic_error);
}
