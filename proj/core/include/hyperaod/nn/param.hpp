#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hyperaod/array.hpp"
#include "hyperaod/common.hpp"

namespace hyperaod::nn {

struct Parameter {
    std::string name;  // stable hierarchical name, set at registration
    ArrayD value;
    ArrayD grad;

    explicit Parameter(std::vector<std::size_t> shape)
        : value(shape), grad(std::move(shape)) {}

    std::size_t size() const { return value.size(); }
    void zero_grad() { grad.fill(0.0); }
};

// Non-owning, ordered view over a model's parameters. Registration order is
// the checkpoint payload order and the optimizer state order.
class ParamRegistry {
public:
    void add(Parameter& p, const std::string& scoped_name) {
        p.name = scoped_name;
        items_.push_back(&p);
    }

    std::vector<Parameter*>& items() { return items_; }
    const std::vector<Parameter*>& items() const { return items_; }

    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto* p : items_) n += p->size();
        return n;
    }

    void zero_grad() {
        for (auto* p : items_) p->zero_grad();
    }

    std::vector<ArrayD> snapshot() const {
        std::vector<ArrayD> out;
        out.reserve(items_.size());
        for (const auto* p : items_) out.push_back(p->value);
        return out;
    }

    void restore(const std::vector<ArrayD>& state) {
        if (state.size() != items_.size())
            throw DataError("ParamRegistry::restore: state size mismatch");
        for (std::size_t i = 0; i < items_.size(); ++i) {
            if (!state[i].same_shape(items_[i]->value))
                throw DataError("ParamRegistry::restore: shape mismatch for " + items_[i]->name);
            items_[i]->value = state[i];
        }
    }

    Parameter* find(const std::string& name) {
        for (auto* p : items_)
            if (p->name == name) return p;
        return nullptr;
    }

private:
    std::vector<Parameter*> items_;
};

// Initializers. Truncated normal (+/- 2 sigma) for transformer weights,
// He-normal for conv kernels.
void init_trunc_normal(Parameter& p, Rng& rng, double stddev = 0.02);
void init_he_normal(Parameter& p, Rng& rng, std::size_t fan_in);
void init_zeros(Parameter& p);
void init_ones(Parameter& p);

}  // namespace hyperaod::nn
