#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ctxnet/network.hpp"

namespace ctxnet {

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Adaptive moment estimation with bias correction. Moments are keyed by
/// parameter path so they can be checkpointed alongside the weights.
template <typename T>
class Adam {
public:
    Adam() = default;
    explicit Adam(AdamOptions opt) : opt_(opt) {}

    void step(ModelParams<T>& params, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
        for (auto& [key, p] : params.tensors) {
            if (!p.has_grad()) continue;
            auto& m = m_[key];
            auto& v = v_[key];
            if (m.size() != p.size()) m.assign(p.size(), T(0));
            if (v.size() != p.size()) v.assign(p.size(), T(0));
            auto g = p.grad();
            auto w = p.mutable_value();
            for (std::size_t i = 0; i < w.size(); ++i) {
                m[i] = static_cast<T>(opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i]);
                v[i] = static_cast<T>(opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i]);
                const double mhat = m[i] / c1, vhat = v[i] / c2;
                w[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + opt_.epsilon));
            }
        }
    }

    std::uint64_t steps() const { return t_; }
    const AdamOptions& options() const { return opt_; }
    const std::map<std::string, std::vector<T>>& first_moments() const { return m_; }
    const std::map<std::string, std::vector<T>>& second_moments() const { return v_; }

    void restore(std::uint64_t steps, std::map<std::string, std::vector<T>> m, std::map<std::string, std::vector<T>> v) {
        t_ = steps;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    AdamOptions opt_;
    std::uint64_t t_ = 0;
    std::map<std::string, std::vector<T>> m_, v_;
};

}  // namespace ctxnet
