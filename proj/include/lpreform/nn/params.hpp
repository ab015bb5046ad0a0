#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "lpreform/nn/tensor.hpp"
#include "lpreform/random.hpp"

namespace lpreform::nn {

/// Named trainable tensors plus named frozen buffers, both in insertion order.
class ParamSet {
public:
    Tensor add(const std::string& name, Matrix init);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const std::vector<std::string>& names() const { return names_; }
    std::vector<std::string> names_with_prefix(const std::string& prefix) const;
    std::size_t num_scalars() const;

    void zero_grad();
    /// Independent copy: fresh leaf tensors with the same values and zero grads.
    ParamSet clone() const;
    /// Adds `other`'s gradients into this set, matching by name.
    void accumulate_grads(const ParamSet& other);
    /// Copies values (not grads) from `other`, matching by name.
    void copy_values(const ParamSet& other);

    void set_buffer(const std::string& name, Matrix value);
    const Matrix* buffer(const std::string& name) const;
    const std::vector<std::string>& buffer_names() const { return buffer_names_; }

    /// FNV-1a over the bit patterns of the named values.
    std::uint64_t hash(const std::vector<std::string>& names) const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> buffer_names_;
    std::unordered_map<std::string, Matrix> buffers_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

}  // namespace lpreform::nn
