#pragma once

#include <vector>

#include "ctxnet/autodiff.hpp"

namespace ctxnet {

/// One pointwise layer: out = x * w + b.
template <typename T>
struct Linear {
    ad::Tensor<T> w;  // [in, out]
    ad::Tensor<T> b;  // [out]

    std::size_t in_width() const { return w.rows(); }
    std::size_t out_width() const { return w.cols(); }
};

template <typename T>
ad::Tensor<T> apply(const Linear<T>& layer, const ad::Tensor<T>& x) {
    return ad::affine(x, layer.w, layer.b);
}

/// Plain MLP: relu between layers; the last layer is linear unless
/// `relu_last` is set.
template <typename T>
struct Mlp {
    std::vector<Linear<T>> layers;
    bool relu_last = false;
};

template <typename T>
ad::Tensor<T> mlp_forward(const Mlp<T>& mlp, ad::Tensor<T> x) {
    for (std::size_t k = 0; k < mlp.layers.size(); ++k) {
        x = apply(mlp.layers[k], x);
        if (k + 1 < mlp.layers.size() || mlp.relu_last) x = ad::relu(x);
    }
    return x;
}

/// Shared-MLP stack of one learning level. With dense connections layer k
/// sees concat(x, y_0, ..., y_{k-1}); otherwise only y_{k-1}.
template <typename T>
struct DenseMlpBlock {
    std::size_t in_width = 0;
    std::vector<Linear<T>> layers;
    bool dense = true;

    std::size_t out_width() const { return layers.empty() ? in_width : layers.back().out_width(); }
};

/// Input width of each layer of a dense (or plain) stack.
inline std::vector<std::size_t> dense_input_widths(std::size_t in_width, const std::vector<std::size_t>& widths,
                                                   bool dense) {
    std::vector<std::size_t> out;
    std::size_t acc = in_width;
    std::size_t prev = in_width;
    for (auto w : widths) {
        out.push_back(dense ? acc : prev);
        acc += w;
        prev = w;
    }
    return out;
}

template <typename T>
ad::Tensor<T> dense_mlp_forward(const DenseMlpBlock<T>& block, const ad::Tensor<T>& x) {
    require(x.cols() == block.in_width, "shape",
            "dense block expects width " + std::to_string(block.in_width) + ", got " + std::to_string(x.cols()));
    std::vector<ad::Tensor<T>> features{x};
    ad::Tensor<T> y = x;
    for (const auto& layer : block.layers) {
        const auto input = (block.dense && features.size() > 1) ? ad::concat_cols(features) : y;
        y = ad::relu(apply(layer, input));
        features.push_back(y);
    }
    return y;
}

/// Local recalibration: every point of a region is scaled elementwise by
/// sigmoid(columnwise max over the region). `pooled` must be
/// segment_max(points, seg); the gate is returned through `gate_out`.
template <typename T>
ad::Tensor<T> local_recalibrate(const ad::Tensor<T>& points, const ad::Tensor<T>& pooled, const ad::Segments& seg,
                                ad::Tensor<T>* gate_out = nullptr) {
    auto gate = ad::sigmoid(pooled);
    if (gate_out) *gate_out = gate;
    return ad::mul(ad::broadcast_rows(gate, seg), points);
}

template <typename T>
ad::Tensor<T> local_recalibrate(const ad::Tensor<T>& points, const ad::Segments& seg,
                                ad::Tensor<T>* gate_out = nullptr) {
    return local_recalibrate(points, ad::segment_max(points, seg), seg, gate_out);
}

/// Non-local response over region descriptors with an embedded-Gaussian
/// affinity and one shared embedding (theta = phi):
///   W = rowwise_softmax(theta(X) theta(X)^T),  out = W * H(X)
template <typename T>
struct NonLocalBlock {
    Mlp<T> theta;
    Mlp<T> h;
};

template <typename T>
ad::Tensor<T> non_local(const NonLocalBlock<T>& block, const ad::Tensor<T>& regions,
                        ad::Tensor<T>* weights_out = nullptr) {
    const auto e = mlp_forward(block.theta, regions);
    const auto w = ad::rowwise_softmax(ad::matmul(e, ad::transpose(e)));
    if (weights_out) *weights_out = w;
    return ad::matmul(w, mlp_forward(block.h, regions));
}

}  // namespace ctxnet
