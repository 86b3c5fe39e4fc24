#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "uniid/tensor.hpp"

namespace uniid {

template <typename S>
struct ParameterT {
    std::string name;
    TensorT<S> tensor; // requires_grad tracks !frozen
    bool frozen = false;
};

// Ordered, uniquely named parameter registry. Registration order is the
// serialization order, so checkpoints are bit-stable for a fixed model build.
template <typename S>
class ParamStoreT {
public:
    ParameterT<S>& create(std::string name, Shape shape, Rng& rng, S init_stddev) {
        TensorT<S> t = TensorT<S>::randn(std::move(shape), rng, init_stddev);
        return insert(std::move(name), std::move(t));
    }

    ParameterT<S>& create_filled(std::string name, Shape shape, S v) {
        return insert(std::move(name), TensorT<S>::filled(std::move(shape), v));
    }

    ParameterT<S>& insert(std::string name, TensorT<S> t) {
        if (by_name_.count(name)) throw std::runtime_error("parameter name not unique: " + name);
        auto p = std::make_unique<ParameterT<S>>();
        p->name = std::move(name);
        p->tensor = std::move(t);
        p->tensor.set_requires_grad(true);
        by_name_[p->name] = p.get();
        params_.push_back(std::move(p));
        return *params_.back();
    }

    ParameterT<S>* find(const std::string& name) {
        auto it = by_name_.find(name);
        return it == by_name_.end() ? nullptr : it->second;
    }

    ParameterT<S>& at(const std::string& name) {
        auto* p = find(name);
        if (!p) throw std::runtime_error("no such parameter: " + name);
        return *p;
    }

    void set_frozen(bool frozen) {
        for (auto& p : params_) {
            p->frozen = frozen;
            p->tensor.set_requires_grad(!frozen);
        }
    }

    void zero_grad() {
        for (auto& p : params_) p->tensor.zero_grad();
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(params_.size());
        for (const auto& p : params_) out.push_back(p->name);
        return out;
    }

    size_t size() const { return params_.size(); }
    ParameterT<S>& operator[](size_t i) { return *params_[i]; }
    const ParameterT<S>& operator[](size_t i) const { return *params_[i]; }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    int64_t total_elements() const {
        int64_t n = 0;
        for (const auto& p : params_) n += p->tensor.numel();
        return n;
    }

private:
    std::vector<std::unique_ptr<ParameterT<S>>> params_;
    std::unordered_map<std::string, ParameterT<S>*> by_name_;
};

template <typename S>
struct OptimizerStateT {
    int64_t step_count = 0;
    S learning_rate;
    S weight_decay;
    S beta1;
    S beta2;
    S epsilon;
    // keyed by parameter index in the store
    std::vector<std::vector<S>> first_moment;
    std::vector<std::vector<S>> second_moment;
};

// Decoupled-weight-decay Adam. Frozen parameters receive no update; grads of
// updated parameters are zeroed after each apply.
template <typename S>
class AdamWT {
public:
    AdamWT(ParamStoreT<S>& store, S lr, S weight_decay = S(0), S beta1 = S(0.9),
           S beta2 = S(0.999), S epsilon = S(1e-8))
        : store_(store) {
        state_.learning_rate = lr;
        state_.weight_decay = weight_decay;
        state_.beta1 = beta1;
        state_.beta2 = beta2;
        state_.epsilon = epsilon;
        state_.first_moment.resize(store.size());
        state_.second_moment.resize(store.size());
    }

    void step() {
        state_.step_count += 1;
        const S b1 = state_.beta1, b2 = state_.beta2;
        const S bc1 = S(1) - std::pow(b1, S(state_.step_count));
        const S bc2 = S(1) - std::pow(b2, S(state_.step_count));
        for (size_t i = 0; i < store_.size(); ++i) {
            ParameterT<S>& p = store_[i];
            if (p.frozen) continue;
            if (!p.tensor.has_grad())
                throw std::runtime_error("adamw: missing gradient on unfrozen parameter " + p.name);
            auto& m = state_.first_moment[i];
            auto& v = state_.second_moment[i];
            if (m.size() != (size_t)p.tensor.numel()) {
                m.assign(p.tensor.numel(), S(0));
                v.assign(p.tensor.numel(), S(0));
            }
            auto& val = p.tensor.data();
            auto& g = p.tensor.grad();
            for (size_t j = 0; j < val.size(); ++j) {
                m[j] = b1 * m[j] + (S(1) - b1) * g[j];
                v[j] = b2 * v[j] + (S(1) - b2) * g[j] * g[j];
                const S mhat = m[j] / bc1;
                const S vhat = v[j] / bc2;
                val[j] -= state_.learning_rate *
                          (mhat / (std::sqrt(vhat) + state_.epsilon) + state_.weight_decay * val[j]);
            }
            p.tensor.zero_grad();
        }
    }

    const OptimizerStateT<S>& state() const { return state_; }
    void set_learning_rate(S lr) { state_.learning_rate = lr; }

private:
    ParamStoreT<S>& store_;
    OptimizerStateT<S> state_;
};

using Parameter = ParameterT<float>;
using ParamStore = ParamStoreT<float>;
using AdamW = AdamWT<float>;

} // namespace uniid
