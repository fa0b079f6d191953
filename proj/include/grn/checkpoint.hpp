#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "grn/tensor.hpp"
#include "json.hpp"

namespace grn {

struct NamedTensor {
    std::string name;
    ad::Tensor tensor;
};

struct Checkpoint {
    nlohmann::json manifest;
    std::vector<NamedTensor> parameters;

    const ad::Tensor& at(const std::string& name) const;
};

/**
 * Writes `manifest.json` plus one little-endian float64 blob per parameter
 * (`<name>.f64`) into `dir`. `metadata` is merged into the manifest; it is
 * where callers put hyperparameters, the RNG seed and the step count.
 */
void save_checkpoint(const std::filesystem::path& dir, std::span<const NamedTensor> parameters,
                     const nlohmann::json& metadata);

Checkpoint load_checkpoint(const std::filesystem::path& dir);

} // namespace grn
