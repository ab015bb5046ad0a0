#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "lpreform/nn/optim.hpp"
#include "lpreform/nn/params.hpp"

namespace lpreform::nn {

/// Binary container, little-endian:
///   "LPRFCKPT" | u32 version | u64 step | str meta | str rng
///   | u32 n, n x (str name, u64 rows, u64 cols, f64[rows*cols])   parameters
///   | u32 n, same layout                                          buffers
///   | u32 n, n x (str group, u64 step, u32 n, n x (str name, matrix m, matrix v))
/// where str = u32 length + bytes.
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;

    std::uint64_t step = 0;
    std::string meta;  // free-form JSON from the caller
    std::string rng_state;
    ParamSet params;
    std::map<std::string, AdamState> optimizers;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lpreform::nn
