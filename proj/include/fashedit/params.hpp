#pragma once

#include <map>
#include <string>

#include "fashedit/tensor.hpp"

namespace fashedit {

template <typename S>
struct Param {
    Tensor<S> value;
    Tensor<S> grad;
    Tensor<S> m, v;  // Adam moments
    int64_t step = 0;
};

// Named parameter map. std::map keeps iteration order deterministic, which
// both checkpoints and name-wise transfer rely on.
template <typename S>
class ParamStore {
public:
    Param<S>& declare(const std::string& name, const std::vector<int64_t>& shape) {
        auto [it, inserted] = params_.try_emplace(name);
        if (!inserted) fail(ErrorKind::RejectedConfig, "duplicate parameter name: " + name);
        it->second.value = Tensor<S>(shape);
        it->second.grad = Tensor<S>(shape);
        it->second.m = Tensor<S>(shape);
        it->second.v = Tensor<S>(shape);
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Param<S>& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) fail(ErrorKind::Transfer, "unknown parameter: " + name);
        return it->second;
    }
    const Param<S>& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) fail(ErrorKind::Transfer, "unknown parameter: " + name);
        return it->second;
    }

    void zero_grads() {
        for (auto& [_, p] : params_)
            std::fill(p.grad.data.begin(), p.grad.data.end(), S(0));
    }

    // Standard Adam with bias correction. Defaults mirror the training
    // config: lr 1e-4, beta1 0.9, beta2 0.999, eps 1e-8.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
        for (auto& [name, p] : params_) {
            p.step++;
            double bc1 = 1.0 - std::pow(beta1, (double)p.step);
            double bc2 = 1.0 - std::pow(beta2, (double)p.step);
            for (int64_t i = 0; i < p.value.numel(); i++) {
                double g = (double)p.grad[i];
                if (!std::isfinite(g)) fail(ErrorKind::Numeric, "adam_step: non-finite gradient in " + name);
                double m = beta1 * (double)p.m[i] + (1.0 - beta1) * g;
                double v = beta2 * (double)p.v[i] + (1.0 - beta2) * g * g;
                p.m[i] = (S)m;
                p.v[i] = (S)v;
                p.value[i] = (S)((double)p.value[i] - lr * (m / bc1) / (std::sqrt(v / bc2) + eps));
            }
        }
    }

    int64_t total_params() const {
        int64_t n = 0;
        for (const auto& [_, p] : params_) n += p.value.numel();
        return n;
    }

    uint64_t value_checksum(const std::string& name) const {
        const auto& p = at(name);
        return fnv1a64(std::string_view((const char*)p.value.data.data(),
                                        p.value.data.size() * sizeof(S)));
    }

    template <typename T>
    ParamStore<T> cast() const {
        ParamStore<T> out;
        for (const auto& [name, p] : params_) {
            auto& q = out.declare(name, p.value.shape);
            q.value = p.value.template cast<T>();
        }
        return out;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    size_t size() const { return params_.size(); }

private:
    std::map<std::string, Param<S>> params_;
};

template <typename S>
void init_trunc_normal(Tensor<S>& t, Rng& rng, double sigma = 0.02) {
    for (auto& v : t.data) {
        double z;
        do {
            z = rng.normal();
        } while (std::abs(z) > 2.0);
        v = (S)(z * sigma);
    }
}

}  // namespace fashedit
