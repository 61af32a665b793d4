// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ranet/nn/tensor.hpp"

namespace ranet::nn {

/// Trainable tensor with its accumulated gradient.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}
};

/// Handle to a node of a Graph.
struct Var {
    int id = -1;
    bool valid() const noexcept { return id >= 0; }
};

/// Reverse-mode tape. Each op appends a node holding its value and a closure that
/// propagates the node's gradient into its inputs. Built fresh for every forward pass.
template <typename T>
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, int)>;

    explicit Graph(bool record = true) : record_(record) {}

    bool records() const noexcept { return record_; }

    Var constant(Tensor<T> value) { return push(std::move(value), false, nullptr, {}); }

    Var parameter(Parameter<T>& p) { return push(p.value, record_, &p, {}); }

    const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
    Tensor<T>& mutable_value(Var v) { return nodes_.at(v.id).value; }
    bool needs_grad(Var v) const { return nodes_.at(v.id).needs_grad; }

    /// Gradient buffer of `v`, allocated on first use.
    Tensor<T>& grad(Var v)
    {
        auto& node = nodes_.at(v.id);
        if (node.grad.shape() != node.value.shape()) {
            node.grad = Tensor<T>(node.value.shape());
        }
        return node.grad;
    }
    bool has_grad(Var v) const { return nodes_.at(v.id).grad.shape() == nodes_.at(v.id).value.shape() && !nodes_.at(v.id).grad.empty(); }

    /// Append the result of an op. The closure runs only when some input needs a gradient.
    Var emit(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn fn)
    {
        return emit(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
    }

    Var emit(Tensor<T> value, std::span<const Var> inputs, BackwardFn fn)
    {
        bool needs = false;
        if (record_) {
            for (Var in : inputs) {
                needs = needs || nodes_.at(in.id).needs_grad;
            }
        }
        return push(std::move(value), needs, nullptr, needs ? std::move(fn) : BackwardFn{});
    }

    /// Seed d(root)/d(root) = 1 for a scalar root and run the tape backwards.
    /// Parameter gradients are accumulated into Parameter::grad.
    void backward(Var root)
    {
        if (!record_) {
            throw std::logic_error("backward on a graph built without gradient recording");
        }
        if (value(root).size() != 1) {
            throw std::invalid_argument("backward expects a scalar root");
        }
        grad(root)[0] = T(1);
        for (int id = root.id; id >= 0; --id) {
            Node& node = nodes_[id];
            if (!node.needs_grad || node.grad.empty()) {
                continue;
            }
            if (node.backward) {
                node.backward(*this, id);
            }
            if (node.param) {
                auto& dst = node.param->grad;
                for (std::size_t i = 0; i < dst.size(); ++i) {
                    dst[i] += node.grad[i];
                }
            }
        }
    }

    std::size_t node_count() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        bool needs_grad = false;
        Parameter<T>* param = nullptr;
        BackwardFn backward;
    };

    Var push(Tensor<T> value, bool needs_grad, Parameter<T>* param, BackwardFn fn)
    {
        nodes_.push_back(Node{std::move(value), {}, needs_grad, param, std::move(fn)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    bool record_;
    std::vector<Node> nodes_;
};

} // namespace ranet::nn
