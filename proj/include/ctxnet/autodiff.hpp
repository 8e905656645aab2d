#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "ctxnet/error.hpp"
#include "ctxnet/rng.hpp"

// Minimal reverse-mode engine. A Tensor is a shared handle to a graph node;
// each op allocates a node that records its inputs and a backward rule.
// backward(root) orders the reachable subgraph topologically and runs every
// rule exactly once, last-created first. Gradients of leaf parameters
// accumulate across calls until zero_grad().

namespace ctxnet::ad {

using Extents = std::vector<std::size_t>;

inline std::size_t extent_product(const Extents& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string extents_str(const Extents& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + "]";
}

template <typename T>
struct Node {
    Extents shape;
    std::vector<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    std::function<void(Node&)> backward_fn;

    T* grad_buffer() {
        if (grad.size() != value.size()) grad.assign(value.size(), T(0));
        return grad.data();
    }
};

template <typename T>
class Tensor {
public:
    using Scalar = T;

    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor from(Extents shape, std::vector<T> values, bool requires_grad = false) {
        require(!shape.empty(), "shape", "tensor needs at least one extent");
        for (auto e : shape) require(e > 0, "shape", "tensor extents must be positive, got " + extents_str(shape));
        require(values.size() == extent_product(shape), "shape",
                "value length " + std::to_string(values.size()) + " does not match " + extents_str(shape));
        auto n = std::make_shared<Node<T>>();
        n->shape = std::move(shape);
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor zeros(Extents shape, bool requires_grad = false) {
        const auto sz = extent_product(shape);
        return from(std::move(shape), std::vector<T>(sz, T(0)), requires_grad);
    }

    static Tensor parameter(Extents shape, std::vector<T> values) {
        return from(std::move(shape), std::move(values), true);
    }

    explicit operator bool() const { return static_cast<bool>(node_); }

    const Extents& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t rows() const { return node_->shape[0]; }
    std::size_t cols() const { return node_->value.size() / node_->shape[0]; }
    std::size_t size() const { return node_->value.size(); }

    std::span<const T> value() const { return node_->value; }
    std::span<T> mutable_value() { return node_->value; }
    T at(std::size_t i, std::size_t j) const { return node_->value[i * cols() + j]; }
    T item() const {
        require(size() == 1, "shape", "item() on tensor of shape " + extents_str(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->grad.size() == node_->value.size(); }
    /// Empty span until a backward pass reaches this tensor.
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return {node_->grad_buffer(), node_->value.size()}; }
    void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

    const char* op() const { return node_->op; }
    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& handle() const { return node_; }

    /// Fresh leaf holding a copy of the values.
    Tensor detach(bool requires_grad = false) const { return from(shape(), node_->value, requires_grad); }

    template <typename U>
    Tensor<U> cast(bool requires_grad) const {
        std::vector<U> v(node_->value.begin(), node_->value.end());
        return Tensor<U>::from(shape(), std::move(v), requires_grad);
    }

private:
    std::shared_ptr<Node<T>> node_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

namespace detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const RowMat<T>>;

template <typename T>
MapConstMat<T> mat(const Tensor<T>& t) {
    return MapConstMat<T>(t.value().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

template <typename T>
MapMat<T> grad_mat(Node<T>& n) {
    return MapMat<T>(n.grad_buffer(), static_cast<Eigen::Index>(n.shape[0]),
                     static_cast<Eigen::Index>(n.value.size() / n.shape[0]));
}

template <typename T>
MapConstMat<T> out_grad(const Node<T>& n) {
    return MapConstMat<T>(n.grad.data(), static_cast<Eigen::Index>(n.shape[0]),
                          static_cast<Eigen::Index>(n.value.size() / n.shape[0]));
}

/// Builds the result node. Inputs and the backward rule are only retained
/// when some input needs a gradient.
template <typename T>
Tensor<T> make_result(const char* op, Extents shape, std::vector<T> value, std::vector<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward_fn) {
    auto n = std::make_shared<Node<T>>();
    n->op = op;
    n->shape = std::move(shape);
    n->value = std::move(value);
    for (const auto& in : inputs) n->requires_grad = n->requires_grad || in.requires_grad();
    if (n->requires_grad) {
        for (auto& in : inputs) n->inputs.push_back(in.handle());
        n->backward_fn = std::move(backward_fn);
    }
    return Tensor<T>(std::move(n));
}

inline void require_matrix(std::size_t rank, const char* op) {
    require(rank == 2, "shape", std::string(op) + " expects a 2-d tensor");
}

}  // namespace detail

/// Reverse sweep from `root`. The root gradient is seeded with ones.
template <typename T>
void backward(const Tensor<T>& root) {
    if (!root.requires_grad()) return;
    std::vector<Node<T>*> topo;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
    seen.insert(root.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node<T>* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    std::fill_n(root.node()->grad_buffer(), root.size(), T(1));
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) {
            n->grad_buffer();
            n->backward_fn(*n);
        }
    }
}

// ---------------------------------------------------------------------------
// Partitions of rows into groups

/// Assigns every row to one of `count` groups.
struct Segments {
    std::vector<std::uint32_t> ids;
    std::size_t count = 0;

    std::size_t rows() const { return ids.size(); }

    /// Contiguous groups of `size` rows.
    static Segments contiguous(std::size_t rows, std::size_t size) {
        require(size >= 1 && rows % size == 0, "argument", "rows not divisible into equal segments");
        Segments s;
        s.count = rows / size;
        s.ids.resize(rows);
        for (std::size_t i = 0; i < rows; ++i) s.ids[i] = static_cast<std::uint32_t>(i / size);
        return s;
    }

    static Segments single(std::size_t rows) { return contiguous(rows, rows); }

    void validate() const {
        std::vector<char> used(count, 0);
        for (auto id : ids) {
            require(id < count, "argument", "segment id out of range");
            used[id] = 1;
        }
        for (std::size_t s = 0; s < count; ++s)
            require(used[s], "argument", "segment " + std::to_string(s) + " is empty");
    }
};

// ---------------------------------------------------------------------------
// Ops

/// out = x * w + b, one shared 1x1 "convolution" over rows.
template <typename T>
Tensor<T> affine(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    detail::require_matrix(x.rank(), "affine");
    detail::require_matrix(w.rank(), "affine");
    require(x.cols() == w.rows(), "shape",
            "affine: input " + extents_str(x.shape()) + " vs weight " + extents_str(w.shape()));
    require(b.size() == w.cols(), "shape", "affine: bias length does not match output width");
    const std::size_t n = x.rows(), co = w.cols();
    std::vector<T> out(n * co);
    detail::MapMat<T> y(out.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(co));
    y.noalias() = detail::mat(x) * detail::mat(w);
    const T* bias = b.value().data();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < co; ++j) out[i * co + j] += bias[j];
    return detail::make_result<T>("affine", {n, co}, std::move(out), {x, w, b}, [](Node<T>& self) {
        auto dy = detail::out_grad(self);
        auto& xn = *self.inputs[0];
        auto& wn = *self.inputs[1];
        auto& bn = *self.inputs[2];
        const auto xi = static_cast<Eigen::Index>(xn.shape[0]), ci = static_cast<Eigen::Index>(wn.shape[0]);
        const auto cw = static_cast<Eigen::Index>(wn.shape[1]);
        detail::MapConstMat<T> xv(xn.value.data(), xi, ci);
        detail::MapConstMat<T> wv(wn.value.data(), ci, cw);
        if (xn.requires_grad) detail::grad_mat(xn).noalias() += dy * wv.transpose();
        if (wn.requires_grad) detail::grad_mat(wn).noalias() += xv.transpose() * dy;
        if (bn.requires_grad) {
            T* db = bn.grad_buffer();
            for (Eigen::Index i = 0; i < dy.rows(); ++i)
                for (Eigen::Index j = 0; j < dy.cols(); ++j) db[j] += dy(i, j);
        }
    });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_matrix(a.rank(), "matmul");
    detail::require_matrix(b.rank(), "matmul");
    require(a.cols() == b.rows(), "shape",
            "matmul: " + extents_str(a.shape()) + " x " + extents_str(b.shape()));
    const std::size_t n = a.rows(), m = b.cols();
    std::vector<T> out(n * m);
    detail::MapMat<T>(out.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)).noalias() =
        detail::mat(a) * detail::mat(b);
    return detail::make_result<T>("matmul", {n, m}, std::move(out), {a, b}, [](Node<T>& self) {
        auto dy = detail::out_grad(self);
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        const auto r = static_cast<Eigen::Index>(an.shape[0]), k = static_cast<Eigen::Index>(an.shape[1]);
        const auto c = static_cast<Eigen::Index>(bn.shape[1]);
        detail::MapConstMat<T> av(an.value.data(), r, k);
        detail::MapConstMat<T> bv(bn.value.data(), k, c);
        if (an.requires_grad) detail::grad_mat(an).noalias() += dy * bv.transpose();
        if (bn.requires_grad) detail::grad_mat(bn).noalias() += av.transpose() * dy;
    });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    detail::require_matrix(x.rank(), "transpose");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<T> out(r * c);
    detail::MapMat<T>(out.data(), static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) =
        detail::mat(x).transpose();
    return detail::make_result<T>("transpose", {c, r}, std::move(out), {x}, [](Node<T>& self) {
        auto& xn = *self.inputs[0];
        detail::grad_mat(xn) += detail::out_grad(self).transpose();
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    std::vector<T> out(x.value().begin(), x.value().end());
    for (auto& v : out) v = v > T(0) ? v : T(0);
    return detail::make_result<T>("relu", x.shape(), std::move(out), {x}, [](Node<T>& self) {
        auto& xn = *self.inputs[0];
        T* dx = xn.grad_buffer();
        for (std::size_t i = 0; i < self.value.size(); ++i)
            if (xn.value[i] > T(0)) dx[i] += self.grad[i];
    });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = x.value()[i];
        // split by sign so exp never overflows
        if (v >= T(0)) {
            out[i] = T(1) / (T(1) + std::exp(-v));
        } else {
            const T e = std::exp(v);
            out[i] = e / (T(1) + e);
        }
    }
    return detail::make_result<T>("sigmoid", x.shape(), std::move(out), {x}, [](Node<T>& self) {
        T* dx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.value.size(); ++i) {
            const T s = self.value[i];
            dx[i] += self.grad[i] * s * (T(1) - s);
        }
    });
}

/// Elementwise product of equally shaped tensors.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.shape() == b.shape(), "shape", "mul: " + extents_str(a.shape()) + " vs " + extents_str(b.shape()));
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    return detail::make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        auto& an = *self.inputs[0];
        auto& bn = *self.inputs[1];
        if (an.requires_grad) {
            T* da = an.grad_buffer();
            for (std::size_t i = 0; i < self.value.size(); ++i) da[i] += self.grad[i] * bn.value[i];
        }
        if (bn.requires_grad) {
            T* db = bn.grad_buffer();
            for (std::size_t i = 0; i < self.value.size(); ++i) db[i] += self.grad[i] * an.value[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
    std::vector<T> out(x.value().begin(), x.value().end());
    for (auto& v : out) v *= factor;
    return detail::make_result<T>("scale", x.shape(), std::move(out), {x}, [factor](Node<T>& self) {
        T* dx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < self.value.size(); ++i) dx[i] += factor * self.grad[i];
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    require(a.shape() == b.shape(), "shape", "add: " + extents_str(a.shape()) + " vs " + extents_str(b.shape()));
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    return detail::make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
        for (auto& in : self.inputs) {
            if (!in->requires_grad) continue;
            T* d = in->grad_buffer();
            for (std::size_t i = 0; i < self.value.size(); ++i) d[i] += self.grad[i];
        }
    });
}

/// Sum of all entries, shape [1].
template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
    T s = T(0);
    for (T v : x.value()) s += v;
    return detail::make_result<T>("sum", {1}, {s}, {x}, [](Node<T>& self) {
        auto& xn = *self.inputs[0];
        T* dx = xn.grad_buffer();
        for (std::size_t i = 0; i < xn.value.size(); ++i) dx[i] += self.grad[0];
    });
}

/// Columnwise max within each segment. The gradient of each output entry
/// goes to the earliest row attaining the max.
template <typename T>
Tensor<T> segment_max(const Tensor<T>& x, const Segments& seg) {
    detail::require_matrix(x.rank(), "segment_max");
    require(seg.rows() == x.rows(), "shape", "segment_max: partition covers " + std::to_string(seg.rows()) +
                                                 " rows, tensor has " + std::to_string(x.rows()));
    seg.validate();
    const std::size_t c = x.cols(), r = seg.count;
    std::vector<T> out(r * c, -std::numeric_limits<T>::infinity());
    std::vector<std::uint32_t> arg(r * c, 0);
    std::vector<char> filled(r * c, 0);
    const T* xv = x.value().data();
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const std::size_t s = seg.ids[i];
        for (std::size_t j = 0; j < c; ++j) {
            const T v = xv[i * c + j];
            if (!filled[s * c + j] || v > out[s * c + j]) {
                out[s * c + j] = v;
                arg[s * c + j] = static_cast<std::uint32_t>(i);
                filled[s * c + j] = 1;
            }
        }
    }
    return detail::make_result<T>("segment_max", {r, c}, std::move(out), {x},
                                  [arg = std::move(arg), c](Node<T>& self) {
                                      T* dx = self.inputs[0]->grad_buffer();
                                      for (std::size_t k = 0; k < arg.size(); ++k)
                                          dx[arg[k] * c + k % c] += self.grad[k];
                                  });
}

/// Copies group row s to every member row of s.
template <typename T>
Tensor<T> broadcast_rows(const Tensor<T>& x, const Segments& seg) {
    detail::require_matrix(x.rank(), "broadcast_rows");
    require(seg.count == x.rows(), "shape", "broadcast_rows: " + std::to_string(seg.count) + " segments vs " +
                                                std::to_string(x.rows()) + " rows");
    const std::size_t c = x.cols(), n = seg.rows();
    std::vector<T> out(n * c);
    const T* xv = x.value().data();
    for (std::size_t i = 0; i < n; ++i) {
        require(seg.ids[i] < seg.count, "argument", "segment id out of range");
        std::copy_n(xv + seg.ids[i] * c, c, out.data() + i * c);
    }
    return detail::make_result<T>("broadcast_rows", {n, c}, std::move(out), {x}, [ids = seg.ids, c](Node<T>& self) {
        T* dx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) dx[ids[i] * c + j] += self.grad[i * c + j];
    });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& xs) {
    require(!xs.empty(), "argument", "concat_cols of nothing");
    const std::size_t n = xs[0].rows();
    std::vector<std::size_t> widths;
    for (const auto& x : xs) {
        detail::require_matrix(x.rank(), "concat_cols");
        require(x.rows() == n, "shape", "concat_cols: row counts " + std::to_string(n) + " vs " +
                                            std::to_string(x.rows()));
        widths.push_back(x.cols());
    }
    const std::size_t total = std::accumulate(widths.begin(), widths.end(), std::size_t{0});
    std::vector<T> out(n * total);
    std::size_t off = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const T* xv = xs[k].value().data();
        for (std::size_t i = 0; i < n; ++i) std::copy_n(xv + i * widths[k], widths[k], out.data() + i * total + off);
        off += widths[k];
    }
    return detail::make_result<T>("concat_cols", {n, total}, std::move(out), xs,
                                  [widths = std::move(widths), total, n](Node<T>& self) {
                                      std::size_t off = 0;
                                      for (std::size_t k = 0; k < widths.size(); ++k) {
                                          auto& in = *self.inputs[k];
                                          if (in.requires_grad) {
                                              T* d = in.grad_buffer();
                                              for (std::size_t i = 0; i < n; ++i)
                                                  for (std::size_t j = 0; j < widths[k]; ++j)
                                                      d[i * widths[k] + j] += self.grad[i * total + off + j];
                                          }
                                          off += widths[k];
                                      }
                                  });
}

/// Softmax along each row, max-subtracted.
template <typename T>
Tensor<T> rowwise_softmax(const Tensor<T>& x) {
    detail::require_matrix(x.rank(), "rowwise_softmax");
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<T> out(r * c);
    const T* xv = x.value().data();
    for (std::size_t i = 0; i < r; ++i) {
        const T m = *std::max_element(xv + i * c, xv + (i + 1) * c);
        T s = T(0);
        for (std::size_t j = 0; j < c; ++j) s += out[i * c + j] = std::exp(xv[i * c + j] - m);
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= s;
    }
    return detail::make_result<T>("rowwise_softmax", {r, c}, std::move(out), {x}, [r, c](Node<T>& self) {
        T* dx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            T dot = T(0);
            for (std::size_t j = 0; j < c; ++j) dot += self.grad[i * c + j] * self.value[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                dx[i * c + j] += self.value[i * c + j] * (self.grad[i * c + j] - dot);
        }
    });
}

/// Inverted dropout: survivors are scaled by 1/(1-p). A no-op unless
/// training with p > 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, std::uint64_t seed) {
    require(p >= 0.0 && p < 1.0, "argument", "dropout rate must be in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    Rng rng(seed);
    const T keep_scale = T(1.0 / (1.0 - p));
    std::vector<T> mask(x.size());
    for (auto& m : mask) m = rng.uniform() < p ? T(0) : keep_scale;
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] * mask[i];
    return detail::make_result<T>("dropout", x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node<T>& self) {
        T* dx = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < mask.size(); ++i) dx[i] += self.grad[i] * mask[i];
    });
}

/// Mean over rows of -w[label] * log softmax(logits)[label]. Empty
/// `class_weights` means every class weighs 1.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const std::uint32_t> labels,
                        std::span<const double> class_weights = {}) {
    detail::require_matrix(logits.rank(), "cross_entropy");
    const std::size_t n = logits.rows(), k = logits.cols();
    require(labels.size() == n, "shape", "cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                                             std::to_string(n) + " rows");
    require(class_weights.empty() || class_weights.size() == k, "shape", "cross_entropy: class weight count");
    std::vector<T> probs(n * k);
    std::vector<T> weights(n, T(1));
    const T* lv = logits.value().data();
    T loss = T(0);
    for (std::size_t i = 0; i < n; ++i) {
        require(labels[i] < k, "data", "label " + std::to_string(labels[i]) + " outside " + std::to_string(k) +
                                           " classes");
        if (!class_weights.empty()) weights[i] = static_cast<T>(class_weights[labels[i]]);
        const T m = *std::max_element(lv + i * k, lv + (i + 1) * k);
        T s = T(0);
        for (std::size_t j = 0; j < k; ++j) s += probs[i * k + j] = std::exp(lv[i * k + j] - m);
        for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= s;
        loss -= weights[i] * (lv[i * k + labels[i]] - m - std::log(s));
    }
    loss /= static_cast<T>(n);
    std::vector<std::uint32_t> lab(labels.begin(), labels.end());
    return detail::make_result<T>(
        "cross_entropy", {1}, {loss}, {logits},
        [probs = std::move(probs), weights = std::move(weights), lab = std::move(lab), n, k](Node<T>& self) {
            T* dx = self.inputs[0]->grad_buffer();
            const T g = self.grad[0] / static_cast<T>(n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j)
                    dx[i * k + j] += g * weights[i] * (probs[i * k + j] - (j == lab[i] ? T(1) : T(0)));
        });
}

}  // namespace ctxnet::ad
