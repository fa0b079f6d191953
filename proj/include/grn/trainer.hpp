#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <vector>

#include "grn/gat.hpp"
#include "grn/graph.hpp"
#include "grn/rng.hpp"
#include "json.hpp"

namespace grn {

struct SplitRatios {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
};

/**
 * Train/validation/test partition of a network's edges for link prediction.
 * Validation and test negatives are drawn once, when the split is made.
 */
struct EdgeSplit {
    std::size_t n_nodes = 0;
    std::vector<EdgePair> train_pos;
    std::vector<EdgePair> val_pos;
    std::vector<EdgePair> test_pos;
    std::vector<EdgePair> val_neg;
    std::vector<EdgePair> test_neg;
    std::uint64_t seed = 0;
    SplitRatios ratios;
};

/// Seeded shuffle, then val = floor(val*E), test = floor(test*E), train takes the rest.
EdgeSplit split_edges(const RegulatoryNetwork& net, const SplitRatios& ratios, std::uint64_t seed);

/**
 * k distinct ordered non-self pairs that are neither edges of `net` nor in
 * `exclude`, drawn uniformly by rejection.
 */
std::vector<EdgePair> sample_negatives(const RegulatoryNetwork& net, std::size_t k, Rng& rng,
                                       const std::set<EdgePair>& exclude = {});
std::vector<EdgePair> sample_negatives(const RegulatoryNetwork& net, std::size_t k, std::uint64_t seed,
                                       const std::set<EdgePair>& exclude = {});

struct TrainConfig {
    std::size_t epochs = 200;
    double lr = 0.01;
    std::uint64_t seed = 0;
    SplitRatios ratios;
    std::size_t neg_per_pos = 1;
    double threshold = 0.5;
    std::size_t patience = 20;
    GatConfig model;

    /// Throws DomainError on invalid settings.
    void validate() const;
};

struct TrainResult {
    GatModel model; ///< parameters restored to the best validation epoch
    EdgeSplit split;
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::size_t best_epoch = 0; ///< 1-based
    bool early_stopped = false;
};

/**
 * Full-batch training. Each epoch draws fresh negatives (neg_per_pos per
 * training edge), encodes on the training edges only, and takes one Adam
 * step on the BCE loss. Both losses for epoch e are measured on the
 * parameters entering that epoch.
 */
TrainResult train(const GatModel& model, const RegulatoryNetwork& net, const ad::Tensor& features,
                  const TrainConfig& config);

/// The message-passing graph seen during training and evaluation.
MessageGraph training_graph(const EdgeSplit& split, bool symmetrize);

struct Metrics {
    double loss = 0.0;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double threshold = 0.5;
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    /// No predicted positives: precision is reported as 1.0.
    bool precision_degenerate = false;
};

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn, double threshold = 0.5);

/// Scores strictly above the threshold are positive.
Metrics score_metrics(std::span<const double> pos_scores, std::span<const double> neg_scores, double threshold);

Metrics evaluate(const GatModel& model, const EdgeSplit& split, const ad::Tensor& features, double threshold);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const TrainConfig& c);

} // namespace grn
