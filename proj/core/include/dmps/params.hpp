#pragma once

#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dmps/rng.hpp"
#include "dmps/tensor.hpp"

namespace dmps {

// Named collection of trainable tensors plus their gradient buffers.
// Iteration order is creation order, which keeps optimizer updates and
// checkpoints deterministic.
class ParamStore {
public:
    Tensor& create(const std::string& name, int rows, int cols);
    // Glorot-uniform weight in +-sqrt(6 / (fan_in + fan_out)).
    Tensor& create_glorot(const std::string& name, int fan_in, int fan_out, SplitRng& rng);
    Tensor& create_scalar(const std::string& name, double value);

    bool has(const std::string& name) const { return values_.count(name) > 0; }
    const Tensor& value(const std::string& name) const;
    Tensor& value(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    Tensor& grad(const std::string& name);

    const std::vector<std::string>& names() const { return names_; }
    size_t count() const { return names_.size(); }
    size_t scalar_count() const;

    void zero_grads();
    void mark_grad_ready(const std::string& name) { grad_ready_.insert(name); }
    bool grad_ready(const std::string& name) const { return grad_ready_.count(name) > 0; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, Tensor> values_;
    std::unordered_map<std::string, Tensor> grads_;
    std::unordered_set<std::string> grad_ready_;
};

}  // namespace dmps
