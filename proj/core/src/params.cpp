#include "dmps/params.hpp"

#include <cmath>

#include "dmps/errors.hpp"

namespace dmps {

Tensor& ParamStore::create(const std::string& name, int rows, int cols) {
    if (has(name)) throw DimensionError("duplicate parameter name: " + name);
    names_.push_back(name);
    grads_.emplace(name, Tensor(rows, cols));
    return values_.emplace(name, Tensor(rows, cols)).first->second;
}

Tensor& ParamStore::create_glorot(const std::string& name, int fan_in, int fan_out, SplitRng& rng) {
    Tensor& w = create(name, fan_in, fan_out);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
    return w;
}

Tensor& ParamStore::create_scalar(const std::string& name, double value) {
    Tensor& t = create(name, 1, 1);
    t[0] = value;
    return t;
}

const Tensor& ParamStore::value(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw DimensionError("unknown parameter: " + name);
    return it->second;
}

Tensor& ParamStore::value(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw DimensionError("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamStore::grad(const std::string& name) const {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw DimensionError("unknown parameter: " + name);
    return it->second;
}

Tensor& ParamStore::grad(const std::string& name) {
    auto it = grads_.find(name);
    if (it == grads_.end()) throw DimensionError("unknown parameter: " + name);
    return it->second;
}

size_t ParamStore::scalar_count() const {
    size_t n = 0;
    for (const auto& name : names_) n += static_cast<size_t>(value(name).size());
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, g] : grads_) g.zero();
    grad_ready_.clear();
}

}  // namespace dmps
