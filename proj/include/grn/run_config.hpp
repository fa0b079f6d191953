#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "grn/centrality.hpp"
#include "grn/gat.hpp"
#include "grn/graph.hpp"
#include "grn/trainer.hpp"

namespace grn {

/**
 * Everything a CLI run depends on. Serializes to an INI file that is echoed
 * next to every output; feeding the echo back reproduces the run.
 */
struct RunConfig {
    // [data]
    std::string dataset;                     ///< directory of sample subdirectories
    std::vector<std::string> samples{"*"};   ///< glob patterns over sample directory names
    std::string dropout = "none";            ///< none, 50 or 70
    std::string network;                     ///< explicit refNetwork CSV; overrides dataset lookup
    AliasMap aliases;
    double min_weight = 1.0;

    // [metrics]
    Convention convention = Convention::UndirectedWithLoops;

    // [model]
    FeatureMode features = FeatureMode::OneHot;
    GatConfig model;

    // [train]
    std::size_t seeds = 1;
    std::size_t epochs = 200;
    double lr = 0.01;
    SplitRatios ratios;
    std::size_t neg_per_pos = 1;
    double threshold = 0.5;
    std::size_t patience = 20;
    bool pool = false;
    std::size_t workers = 1;

    // [importance]
    int layer = -1; ///< -1 averages all layers
    bool untrained = false;
    std::string focus = "Gata2"; ///< gene whose median rank the stability report calls out

    // [run]
    std::uint64_t seed = 0;
    std::string out = "grn_out";

    /// Seed of the k-th run (0-based) under this master seed.
    std::uint64_t run_seed(std::size_t k) const { return seed + k; }
    TrainConfig train_config(std::uint64_t run_seed) const;
    void validate() const;
};

std::string to_ini(const RunConfig& config);
/// Unknown sections or keys and malformed values raise ParseError.
RunConfig from_ini(std::string_view text);
RunConfig load_run_config(const std::string& path);

AliasMap parse_aliases(std::string_view text);

} // namespace grn
