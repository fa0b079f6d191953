#include "grn/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "grn/errors.hpp"

namespace grn {

namespace {

enum Stream : std::uint64_t { ShuffleStream = 1, HeldOutNegativeStream = 2, EpochNegativeStream = 3 };

std::size_t portion(double ratio, std::size_t total) {
    // The epsilon keeps e.g. 0.1 * 30 from flooring to 2.
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(total) + 1e-9));
}

std::vector<double> labels(std::size_t positives, std::size_t negatives) {
    std::vector<double> y(positives + negatives, 0.0);
    std::fill_n(y.begin(), positives, 1.0);
    return y;
}

std::vector<EdgePair> join(std::span<const EdgePair> a, std::span<const EdgePair> b) {
    std::vector<EdgePair> out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

double bce_value(const ad::Tensor& embeddings, std::span<const EdgePair> pos, std::span<const EdgePair> neg) {
    const auto pairs = join(pos, neg);
    const auto p = decode(embeddings, pairs);
    return ad::binary_cross_entropy(p, ad::Tensor::from({pairs.size()}, labels(pos.size(), neg.size()))).item();
}

} // namespace

EdgeSplit split_edges(const RegulatoryNetwork& net, const SplitRatios& ratios, std::uint64_t seed) {
    if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test <= 0.0 ||
        std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw DomainError("split ratios must be non-negative, with a positive test share, and sum to 1");
    }
    const std::size_t total = net.edges().size();
    if (total < 5) {
        throw DomainError("link prediction needs at least 5 edges, got " + std::to_string(total));
    }
    const std::size_t n_test = portion(ratios.test, total);
    const std::size_t n_val = portion(ratios.val, total);
    if (n_test == 0) {
        throw DomainError("too few edges (" + std::to_string(total) + ") for a nonempty test set");
    }

    std::vector<EdgePair> edges;
    for (const auto& e : net.edges()) {
        edges.emplace_back(e.source, e.target);
    }
    Rng shuffle_rng(Rng::derive(seed, ShuffleStream));
    shuffle_rng.shuffle(edges);

    EdgeSplit split;
    split.n_nodes = net.size();
    split.seed = seed;
    split.ratios = ratios;
    split.test_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.val_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test),
                         edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val));
    split.train_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_test + n_val), edges.end());

    Rng neg_rng(Rng::derive(seed, HeldOutNegativeStream));
    split.test_neg = sample_negatives(net, n_test, neg_rng);
    const std::set<EdgePair> taken(split.test_neg.begin(), split.test_neg.end());
    split.val_neg = sample_negatives(net, n_val, neg_rng, taken);
    return split;
}

std::vector<EdgePair> sample_negatives(const RegulatoryNetwork& net, std::size_t k, Rng& rng,
                                       const std::set<EdgePair>& exclude) {
    const std::size_t n = net.size();
    std::size_t blocked = 0;
    for (const auto& e : net.edges()) {
        blocked += e.source != e.target ? 1 : 0;
    }
    for (const auto& [u, v] : exclude) {
        if (u != v && u < n && v < n && !net.has_edge(u, v)) {
            ++blocked;
        }
    }
    const std::size_t pairs = n < 2 ? 0 : n * (n - 1);
    const std::size_t available = pairs - blocked;
    if (k > available) {
        throw CapacityError("requested " + std::to_string(k) + " negative edges but only " +
                            std::to_string(available) + " non-edges are available");
    }

    std::vector<EdgePair> out;
    std::set<EdgePair> chosen;
    while (out.size() < k) {
        const auto u = static_cast<std::size_t>(rng.below(n));
        const auto v = static_cast<std::size_t>(rng.below(n));
        if (u == v || net.has_edge(u, v)) {
            continue;
        }
        const EdgePair pair{u, v};
        if (exclude.count(pair) != 0 || !chosen.insert(pair).second) {
            continue;
        }
        out.push_back(pair);
    }
    return out;
}

std::vector<EdgePair> sample_negatives(const RegulatoryNetwork& net, std::size_t k, std::uint64_t seed,
                                       const std::set<EdgePair>& exclude) {
    Rng rng(seed);
    return sample_negatives(net, k, rng, exclude);
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw DomainError("epochs must be at least 1");
    }
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw DomainError("threshold must lie in (0, 1)");
    }
    if (!(lr >= 0.0) || !std::isfinite(lr)) {
        throw DomainError("learning rate must be finite and non-negative");
    }
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
        throw DomainError("split ratios must sum to 1");
    }
}

MessageGraph training_graph(const EdgeSplit& split, bool symmetrize) {
    return message_graph(split.n_nodes, split.train_pos, symmetrize);
}

TrainResult train(const GatModel& initial, const RegulatoryNetwork& net, const ad::Tensor& features,
                  const TrainConfig& config) {
    config.validate();

    TrainResult result;
    result.split = split_edges(net, config.ratios, config.seed);
    const auto& split = result.split;
    const auto graph = training_graph(split, initial.config.symmetrize);

    auto model = initial.clone();
    auto params = model.parameters();
    auto adam = ad::AdamState::for_params(params, config.lr);

    std::set<EdgePair> held_out(split.val_neg.begin(), split.val_neg.end());
    held_out.insert(split.test_neg.begin(), split.test_neg.end());
    Rng rng(Rng::derive(config.seed, EpochNegativeStream));

    const bool has_val = !split.val_pos.empty();
    double best = 0.0;
    std::vector<std::vector<double>> best_params;
    auto snapshot = [&] {
        best_params.clear();
        for (const auto& p : params) {
            best_params.emplace_back(p.data().begin(), p.data().end());
        }
    };

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto negatives = sample_negatives(net, config.neg_per_pos * split.train_pos.size(), rng, held_out);
        const auto pairs = join(split.train_pos, negatives);
        const auto y = ad::Tensor::from({pairs.size()}, labels(split.train_pos.size(), negatives.size()));

        const auto enc = encode(model, graph, features);
        const auto loss = ad::binary_cross_entropy(decode(enc.embeddings, pairs), y);
        const double train_loss = loss.item();
        if (!std::isfinite(train_loss)) {
            throw TrainingError("training loss is not finite", epoch);
        }
        // Without a validation split, model selection falls back to the training loss.
        const double val_loss =
            has_val ? bce_value(enc.embeddings.detach(), split.val_pos, split.val_neg) : train_loss;
        if (!std::isfinite(val_loss)) {
            throw TrainingError("validation loss is not finite", epoch);
        }
        result.train_loss.push_back(train_loss);
        result.val_loss.push_back(val_loss);

        if (result.best_epoch == 0 || val_loss < best) {
            best = val_loss;
            result.best_epoch = epoch;
            snapshot();
        } else if (epoch - result.best_epoch >= config.patience) {
            result.early_stopped = true;
            break;
        }

        ad::backward(loss);
        ad::adam_step(params, adam);
        for (auto& p : params) {
            p.zero_grad();
        }
    }

    for (std::size_t k = 0; k < params.size(); ++k) {
        auto values = params[k].mutable_data();
        std::copy(best_params[k].begin(), best_params[k].end(), values.begin());
    }
    result.model = std::move(model);
    return result;
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn, double threshold) {
    const std::size_t total = tp + fp + tn + fn;
    if (total == 0) {
        throw DomainError("metrics need at least one scored example");
    }
    Metrics m;
    m.threshold = threshold;
    m.tp = tp;
    m.fp = fp;
    m.tn = tn;
    m.fn = fn;
    m.accuracy = static_cast<double>(tp + tn) / static_cast<double>(total);
    if (tp + fp == 0) {
        m.precision = 1.0;
        m.precision_degenerate = true;
    } else {
        m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
    m.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    m.f1 = m.precision + m.recall == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

Metrics score_metrics(std::span<const double> pos_scores, std::span<const double> neg_scores, double threshold) {
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const double s : pos_scores) {
        tp += s > threshold ? 1 : 0;
    }
    for (const double s : neg_scores) {
        fp += s > threshold ? 1 : 0;
    }
    return metrics_from_counts(tp, fp, neg_scores.size() - fp, pos_scores.size() - tp, threshold);
}

Metrics evaluate(const GatModel& model, const EdgeSplit& split, const ad::Tensor& features, double threshold) {
    if (split.test_pos.empty() || split.test_neg.empty()) {
        throw DomainError("evaluation needs nonempty positive and negative test sets");
    }
    const auto graph = training_graph(split, model.config.symmetrize);
    const auto z = encode(model, graph, features).embeddings.detach();

    const auto pos = decode(z, split.test_pos);
    const auto neg = decode(z, split.test_neg);
    auto m = score_metrics(pos.data(), neg.data(), threshold);
    m.loss = bce_value(z, split.test_pos, split.test_neg);
    return m;
}

nlohmann::json to_json(const Metrics& m) {
    return {{"loss", m.loss},
            {"accuracy", m.accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"threshold", m.threshold},
            {"precision_degenerate", m.precision_degenerate},
            {"counts", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},
            {"lr", c.lr},
            {"seed", c.seed},
            {"ratios", {c.ratios.train, c.ratios.val, c.ratios.test}},
            {"neg_per_pos", c.neg_per_pos},
            {"threshold", c.threshold},
            {"patience", c.patience},
            {"model",
             {{"hidden", c.model.hidden},
              {"heads", c.model.heads},
              {"embedding", c.model.embedding},
              {"out_heads", c.model.out_heads},
              {"scoring", std::string(to_string(c.model.scoring))},
              {"negative_slope", c.model.negative_slope},
              {"symmetrize", c.model.symmetrize}}}};
}

} // namespace grn
