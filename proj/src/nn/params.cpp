#include "lpreform/nn/params.hpp"

#include <cmath>
#include <cstring>

#include "lpreform/errors.hpp"

namespace lpreform::nn {

Tensor ParamSet::add(const std::string& name, Matrix init) {
    if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_[name] = tensors_.size();
    names_.push_back(name);
    tensors_.push_back(Tensor::parameter(std::move(init)));
    return tensors_.back();
}

const Tensor& ParamSet::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return tensors_[it->second];
}

std::vector<std::string> ParamSet::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& n : names_) {
        if (n.compare(0, prefix.size(), prefix) == 0) out.push_back(n);
    }
    return out;
}

std::size_t ParamSet::num_scalars() const {
    std::size_t total = 0;
    for (const auto& t : tensors_) total += static_cast<std::size_t>(t.value().size());
    return total;
}

void ParamSet::zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
}

ParamSet ParamSet::clone() const {
    ParamSet out;
    for (std::size_t i = 0; i < names_.size(); ++i) out.add(names_[i], tensors_[i].value());
    out.buffer_names_ = buffer_names_;
    out.buffers_ = buffers_;
    return out;
}

void ParamSet::accumulate_grads(const ParamSet& other) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        tensors_[i].mutable_grad() += other.get(names_[i]).grad();
    }
}

void ParamSet::copy_values(const ParamSet& other) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        const Matrix& src = other.get(names_[i]).value();
        if (src.rows() != tensors_[i].rows() || src.cols() != tensors_[i].cols()) {
            throw DimensionMismatch("copy_values: shape mismatch for '" + names_[i] + "'");
        }
        tensors_[i].mutable_value() = src;
    }
}

void ParamSet::set_buffer(const std::string& name, Matrix value) {
    if (!buffers_.count(name)) buffer_names_.push_back(name);
    buffers_[name] = std::move(value);
}

const Matrix* ParamSet::buffer(const std::string& name) const {
    auto it = buffers_.find(name);
    return it == buffers_.end() ? nullptr : &it->second;
}

std::uint64_t ParamSet::hash(const std::vector<std::string>& names) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& n : names) {
        const Matrix& v = get(n).value();
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            std::uint64_t bits;
            std::memcpy(&bits, v.data() + i, sizeof bits);
            for (int b = 0; b < 8; ++b) {
                h ^= (bits >> (8 * b)) & 0xff;
                h *= 0x100000001b3ULL;
            }
        }
    }
    return h;
}

Matrix glorot(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -a, a);
    return w;
}

}  // namespace lpreform::nn
