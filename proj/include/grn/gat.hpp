#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "grn/checkpoint.hpp"
#include "grn/graph.hpp"
#include "grn/rng.hpp"
#include "grn/tensor.hpp"

namespace grn {

using EdgePair = std::pair<std::size_t, std::size_t>;

/// V1: e = LeakyReLU(a . [W h_t || W h_s]). V2: e = a . LeakyReLU(W_t h_t + W_s h_s).
enum class Scoring { V1, V2 };
enum class FeatureMode { OneHot, ExpressionStats };

std::string_view to_string(Scoring s);
Scoring parse_scoring(std::string_view s);
std::string_view to_string(FeatureMode m);
FeatureMode parse_feature_mode(std::string_view s);

/**
 * Node features for the encoder.
 *
 * OneHot gives the n x n identity. ExpressionStats gives per-gene
 * [mean, standard deviation, fraction nonzero] over cells, each column
 * standardized across genes (zero-variance columns become 0).
 */
ad::Tensor build_features(const RegulatoryNetwork& net, const ExpressionMatrix* expr, FeatureMode mode);

/// Message-passing edge list: source -> target, including exactly one self-loop per node.
struct MessageGraph {
    std::size_t n_nodes = 0;
    std::vector<std::size_t> source;
    std::vector<std::size_t> target;

    std::size_t n_edges() const { return source.size(); }
};

/// Existing self-loops are merged with the added ones; `symmetrize` adds reverse edges.
MessageGraph message_graph(std::size_t n_nodes, std::span<const EdgePair> edges, bool symmetrize = false);
MessageGraph message_graph(const RegulatoryNetwork& net, bool symmetrize = false);

struct GatLayerParams {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0; ///< per head
    std::size_t heads = 1;
    bool concat = true;      ///< concatenate heads, otherwise average them
    Scoring scoring = Scoring::V2;
    double negative_slope = 0.2;
    ad::Tensor w_target;     ///< [in, heads*out]; the same tensor as w_source under V1
    ad::Tensor w_source;     ///< [in, heads*out]; projects the messages
    ad::Tensor attention;    ///< V2: [heads*out]; V1: [2, heads*out] (row 0 target, row 1 source)
    ad::Tensor bias;         ///< [heads*out] when concatenating, [out] when averaging

    std::size_t width() const { return heads * out_dim; }
    std::size_t output_dim() const { return concat ? width() : out_dim; }

    static GatLayerParams init(std::size_t in_dim, std::size_t out_dim, std::size_t heads, bool concat,
                               Scoring scoring, double negative_slope, Rng& rng);
};

/**
 * Raw attention logits, one row per edge and one column per head.
 * Row i pairs target features h_target[i] with neighbor features h_source[i].
 */
ad::Tensor attention_scores(const GatLayerParams& params, const ad::Tensor& h_target, const ad::Tensor& h_source);

enum class Activation { None, Elu };

struct LayerOutput {
    ad::Tensor embeddings; ///< [n, output_dim]
    ad::Tensor alpha;      ///< [edges, heads], normalized over each target's incoming edges
};

LayerOutput gat_layer_forward(const GatLayerParams& params, const ad::Tensor& features, const MessageGraph& graph,
                              Activation activation);

struct GatConfig {
    std::size_t hidden = 8;
    std::size_t heads = 4;
    std::size_t embedding = 16;
    std::size_t out_heads = 1;
    Scoring scoring = Scoring::V2;
    double negative_slope = 0.2;
    bool symmetrize = false;
};

/// Two attention layers (concat + ELU, then head mean) and a dot-product decoder.
struct GatModel {
    GatConfig config;
    GatLayerParams layer1;
    GatLayerParams layer2;

    static GatModel init(std::size_t in_dim, const GatConfig& config, Rng& rng);

    /// Distinct trainable tensors (the shared V1 weight appears once).
    std::vector<ad::Tensor> parameters() const;
    std::vector<NamedTensor> named_parameters() const;
    /// Rebuilds a model from checkpoint tensors; shapes must match `config`.
    static GatModel from_parameters(std::size_t in_dim, const GatConfig& config, const Checkpoint& ckpt);

    void zero_attention();
    GatModel clone() const;
};

struct Encoding {
    ad::Tensor embeddings;          ///< [n, embedding]
    std::vector<ad::Tensor> alpha;  ///< per layer, [edges, heads]
};

Encoding encode(const GatModel& model, const MessageGraph& graph, const ad::Tensor& features);

/// sigmoid(z_u . z_v) for each pair; differentiable in z.
ad::Tensor decode(const ad::Tensor& embeddings, std::span<const EdgePair> pairs);
double decode(std::span<const double> z_u, std::span<const double> z_v);

/// Attention coefficients captured from one forward pass.
struct AttentionMap {
    std::vector<std::string> genes;
    std::vector<std::size_t> source; ///< message-passing edges, self-loops included
    std::vector<std::size_t> target;
    /// alpha[layer][head][edge]
    std::vector<std::vector<std::vector<double>>> alpha;

    std::size_t n_layers() const { return alpha.size(); }
};

AttentionMap extract_attention(const GatModel& model, const RegulatoryNetwork& net, const ad::Tensor& features);
AttentionMap extract_attention(const GatModel& model, const MessageGraph& graph, const ad::Tensor& features,
                               std::vector<std::string> genes);

/// `layer,head,source,target,alpha`, rows sorted by (layer, head, source name, target name).
std::string attention_csv(const AttentionMap& att);

} // namespace grn
