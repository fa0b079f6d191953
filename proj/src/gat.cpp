#include "grn/gat.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

#include "format.hpp"
#include "grn/errors.hpp"

namespace grn {

namespace {

using ad::Tensor;

Tensor glorot(ad::Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::size_t count = 1;
    for (const auto d : shape) {
        count *= d;
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        v = rng.uniform(-bound, bound);
    }
    return Tensor::from(std::move(shape), std::move(values), true);
}

/// [heads*out, heads] with ones where column block h belongs to head h.
Tensor head_indicator(std::size_t heads, std::size_t out_dim) {
    std::vector<double> values(heads * out_dim * heads, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t c = 0; c < out_dim; ++c) {
            values[(h * out_dim + c) * heads + h] = 1.0;
        }
    }
    return Tensor::from({heads * out_dim, heads}, std::move(values));
}

/// [heads, heads*out], the transpose of head_indicator.
Tensor head_expander(std::size_t heads, std::size_t out_dim) {
    std::vector<double> values(heads * heads * out_dim, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t c = 0; c < out_dim; ++c) {
            values[h * heads * out_dim + h * out_dim + c] = 1.0;
        }
    }
    return Tensor::from({heads, heads * out_dim}, std::move(values));
}

/// [heads*out, out] averaging the heads.
Tensor head_mean(std::size_t heads, std::size_t out_dim) {
    std::vector<double> values(heads * out_dim * out_dim, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        for (std::size_t c = 0; c < out_dim; ++c) {
            values[(h * out_dim + c) * out_dim + c] = 1.0 / static_cast<double>(heads);
        }
    }
    return Tensor::from({heads * out_dim, out_dim}, std::move(values));
}

/// Logits from already projected per-edge target and source rows.
Tensor edge_scores(const GatLayerParams& p, const Tensor& target_rows, const Tensor& source_rows) {
    const auto indicator = head_indicator(p.heads, p.out_dim);
    if (p.scoring == Scoring::V2) {
        const auto hidden = ad::leaky_relu(ad::add(target_rows, source_rows), p.negative_slope);
        return ad::matmul(ad::elementwise_mul(hidden, p.attention), indicator);
    }
    const std::size_t row0[] = {0};
    const std::size_t row1[] = {1};
    const auto a_target = ad::gather_rows(p.attention, row0);
    const auto a_source = ad::gather_rows(p.attention, row1);
    const auto mixed =
        ad::add(ad::elementwise_mul(target_rows, a_target), ad::elementwise_mul(source_rows, a_source));
    return ad::leaky_relu(ad::matmul(mixed, indicator), p.negative_slope);
}

void check_features(const GatLayerParams& p, const Tensor& features, const char* where) {
    if (features.rank() != 2 || features.shape()[1] != p.in_dim) {
        throw ShapeError(std::string(where) + ": features of shape " + ad::shape_string(features.shape()) +
                         " do not match layer input dimension " + std::to_string(p.in_dim));
    }
}

Tensor copy_of(const Tensor& t) { return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true); }

const std::vector<std::string> layer_names = {"layer1", "layer2"};

} // namespace

std::string_view to_string(Scoring s) { return s == Scoring::V1 ? "v1" : "v2"; }

Scoring parse_scoring(std::string_view s) {
    if (s == "v1") {
        return Scoring::V1;
    }
    if (s == "v2") {
        return Scoring::V2;
    }
    throw DomainError("unknown scoring '" + std::string(s) + "' (v1|v2)");
}

std::string_view to_string(FeatureMode m) { return m == FeatureMode::OneHot ? "onehot" : "expr"; }

FeatureMode parse_feature_mode(std::string_view s) {
    if (s == "onehot") {
        return FeatureMode::OneHot;
    }
    if (s == "expr") {
        return FeatureMode::ExpressionStats;
    }
    throw DomainError("unknown feature mode '" + std::string(s) + "' (onehot|expr)");
}

Tensor build_features(const RegulatoryNetwork& net, const ExpressionMatrix* expr, FeatureMode mode) {
    const std::size_t n = net.size();
    if (mode == FeatureMode::OneHot) {
        return Tensor::identity(n);
    }
    if (expr == nullptr) {
        throw CoverageError("expression features need an expression matrix");
    }

    std::vector<std::string> missing;
    std::vector<std::size_t> rows;
    for (const auto& g : net.genes()) {
        const auto row = expr->find(g.name);
        if (!row) {
            missing.push_back(g.name);
        } else {
            rows.push_back(*row);
        }
    }
    if (!missing.empty()) {
        std::string listed;
        for (const auto& m : missing) {
            listed += (listed.empty() ? "" : ", ") + m;
        }
        throw CoverageError("expression matrix lacks genes: " + listed);
    }

    constexpr std::size_t n_stats = 3;
    std::vector<double> stats(n * n_stats, 0.0);
    const double cells = static_cast<double>(expr->n_cells());
    for (std::size_t i = 0; i < n; ++i) {
        const auto values = expr->row(rows[i]);
        if (values.empty()) {
            continue;
        }
        double mean = 0.0;
        double nonzero = 0.0;
        for (const double v : values) {
            mean += v;
            nonzero += v != 0.0 ? 1.0 : 0.0;
        }
        mean /= cells;
        double var = 0.0;
        for (const double v : values) {
            var += (v - mean) * (v - mean);
        }
        stats[i * n_stats + 0] = mean;
        stats[i * n_stats + 1] = std::sqrt(var / cells);
        stats[i * n_stats + 2] = nonzero / cells;
    }

    for (std::size_t c = 0; c < n_stats; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mean += stats[i * n_stats + c];
        }
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = stats[i * n_stats + c] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i) {
            auto& v = stats[i * n_stats + c];
            v = sd > 1e-12 ? (v - mean) / sd : 0.0;
        }
    }
    return Tensor::from({n, n_stats}, std::move(stats));
}

MessageGraph message_graph(std::size_t n_nodes, std::span<const EdgePair> edges, bool symmetrize) {
    std::set<EdgePair> unique;
    for (const auto& [s, t] : edges) {
        if (s >= n_nodes || t >= n_nodes) {
            throw IndexError("message graph edge outside [0, " + std::to_string(n_nodes) + ")");
        }
        unique.emplace(s, t);
        if (symmetrize) {
            unique.emplace(t, s);
        }
    }
    for (std::size_t v = 0; v < n_nodes; ++v) {
        unique.emplace(v, v);
    }
    MessageGraph g;
    g.n_nodes = n_nodes;
    for (const auto& [s, t] : unique) {
        g.source.push_back(s);
        g.target.push_back(t);
    }
    return g;
}

MessageGraph message_graph(const RegulatoryNetwork& net, bool symmetrize) {
    std::vector<EdgePair> edges;
    for (const auto& e : net.edges()) {
        edges.emplace_back(e.source, e.target);
    }
    return message_graph(net.size(), edges, symmetrize);
}

GatLayerParams GatLayerParams::init(std::size_t in_dim, std::size_t out_dim, std::size_t heads, bool concat,
                                    Scoring scoring, double negative_slope, Rng& rng) {
    if (in_dim == 0 || out_dim == 0 || heads == 0) {
        throw DomainError("attention layer dimensions must be positive");
    }
    GatLayerParams p;
    p.in_dim = in_dim;
    p.out_dim = out_dim;
    p.heads = heads;
    p.concat = concat;
    p.scoring = scoring;
    p.negative_slope = negative_slope;
    const std::size_t width = heads * out_dim;
    p.w_target = glorot({in_dim, width}, in_dim, width, rng);
    p.w_source = scoring == Scoring::V1 ? p.w_target : glorot({in_dim, width}, in_dim, width, rng);
    if (scoring == Scoring::V2) {
        p.attention = glorot({width}, heads, out_dim, rng);
    } else {
        p.attention = glorot({2, width}, heads, 2 * out_dim, rng);
    }
    p.bias = Tensor::zeros({concat ? width : out_dim}, true);
    return p;
}

Tensor attention_scores(const GatLayerParams& params, const Tensor& h_target, const Tensor& h_source) {
    check_features(params, h_target, "attention_scores");
    check_features(params, h_source, "attention_scores");
    if (h_target.shape()[0] != h_source.shape()[0]) {
        throw ShapeError("attention_scores: " + ad::shape_string(h_target.shape()) + " target rows vs " +
                         ad::shape_string(h_source.shape()) + " source rows");
    }
    return edge_scores(params, ad::matmul(h_target, params.w_target), ad::matmul(h_source, params.w_source));
}

LayerOutput gat_layer_forward(const GatLayerParams& params, const Tensor& features, const MessageGraph& graph,
                              Activation activation) {
    if (graph.n_nodes == 0) {
        throw DomainError("attention layer on an empty node set");
    }
    check_features(params, features, "gat_layer_forward");
    if (features.shape()[0] != graph.n_nodes) {
        throw ShapeError("gat_layer_forward: " + std::to_string(features.shape()[0]) + " feature rows for " +
                         std::to_string(graph.n_nodes) + " nodes");
    }

    const auto x_target = ad::matmul(features, params.w_target);
    const auto x_source = params.scoring == Scoring::V1 ? x_target : ad::matmul(features, params.w_source);
    const auto target_rows = ad::gather_rows(x_target, graph.target);
    const auto source_rows = ad::gather_rows(x_source, graph.source);

    const auto scores = edge_scores(params, target_rows, source_rows);
    const auto alpha = ad::segment_softmax(scores, graph.target, graph.n_nodes);

    const auto weights = ad::matmul(alpha, head_expander(params.heads, params.out_dim));
    const auto messages = ad::elementwise_mul(weights, source_rows);
    auto out = ad::scatter_sum(messages, graph.target, graph.n_nodes);
    if (!params.concat) {
        out = ad::matmul(out, head_mean(params.heads, params.out_dim));
    }
    out = ad::add(out, params.bias);
    if (activation == Activation::Elu) {
        out = ad::elu(out);
    }
    return LayerOutput{out, alpha};
}

GatModel GatModel::init(std::size_t in_dim, const GatConfig& config, Rng& rng) {
    GatModel m;
    m.config = config;
    m.layer1 = GatLayerParams::init(in_dim, config.hidden, config.heads, true, config.scoring, config.negative_slope,
                                    rng);
    m.layer2 = GatLayerParams::init(m.layer1.output_dim(), config.embedding, config.out_heads, false, config.scoring,
                                    config.negative_slope, rng);
    return m;
}

std::vector<Tensor> GatModel::parameters() const {
    std::vector<Tensor> out;
    for (const auto& named : named_parameters()) {
        out.push_back(named.tensor);
    }
    return out;
}

std::vector<NamedTensor> GatModel::named_parameters() const {
    std::vector<NamedTensor> out;
    const GatLayerParams* layers[] = {&layer1, &layer2};
    for (std::size_t l = 0; l < 2; ++l) {
        const auto& p = *layers[l];
        const auto& prefix = layer_names[l];
        if (p.scoring == Scoring::V1) {
            out.push_back({prefix + ".weight", p.w_target});
        } else {
            out.push_back({prefix + ".w_target", p.w_target});
            out.push_back({prefix + ".w_source", p.w_source});
        }
        out.push_back({prefix + ".attention", p.attention});
        out.push_back({prefix + ".bias", p.bias});
    }
    return out;
}

GatModel GatModel::from_parameters(std::size_t in_dim, const GatConfig& config, const Checkpoint& ckpt) {
    // Initialize for shapes, then overwrite every tensor from the checkpoint.
    Rng rng(0);
    auto model = init(in_dim, config, rng);
    GatLayerParams* layers[] = {&model.layer1, &model.layer2};
    for (std::size_t l = 0; l < 2; ++l) {
        auto& p = *layers[l];
        const auto& prefix = layer_names[l];
        auto load = [&](const std::string& name, const Tensor& like) {
            const auto& t = ckpt.at(prefix + "." + name);
            if (t.shape() != like.shape()) {
                throw ShapeError("checkpoint tensor " + prefix + "." + name + " has shape " +
                                 ad::shape_string(t.shape()) + ", expected " + ad::shape_string(like.shape()));
            }
            return copy_of(t);
        };
        if (p.scoring == Scoring::V1) {
            p.w_target = load("weight", p.w_target);
            p.w_source = p.w_target;
        } else {
            p.w_target = load("w_target", p.w_target);
            p.w_source = load("w_source", p.w_source);
        }
        p.attention = load("attention", p.attention);
        p.bias = load("bias", p.bias);
    }
    return model;
}

void GatModel::zero_attention() {
    for (auto* p : {&layer1, &layer2}) {
        auto values = p->attention.mutable_data();
        std::fill(values.begin(), values.end(), 0.0);
    }
}

GatModel GatModel::clone() const {
    GatModel m = *this;
    for (auto* p : {&m.layer1, &m.layer2}) {
        p->w_target = copy_of(p->w_target);
        p->w_source = p->scoring == Scoring::V1 ? p->w_target : copy_of(p->w_source);
        p->attention = copy_of(p->attention);
        p->bias = copy_of(p->bias);
    }
    return m;
}

Encoding encode(const GatModel& model, const MessageGraph& graph, const Tensor& features) {
    auto first = gat_layer_forward(model.layer1, features, graph, Activation::Elu);
    auto second = gat_layer_forward(model.layer2, first.embeddings, graph, Activation::None);
    return Encoding{second.embeddings, {first.alpha, second.alpha}};
}

Tensor decode(const Tensor& embeddings, std::span<const EdgePair> pairs) {
    std::vector<std::size_t> us;
    std::vector<std::size_t> vs;
    us.reserve(pairs.size());
    vs.reserve(pairs.size());
    for (const auto& [u, v] : pairs) {
        us.push_back(u);
        vs.push_back(v);
    }
    const auto zu = ad::gather_rows(embeddings, us);
    const auto zv = ad::gather_rows(embeddings, vs);
    return ad::sigmoid(ad::row_sum(ad::elementwise_mul(zu, zv)));
}

double decode(std::span<const double> z_u, std::span<const double> z_v) {
    if (z_u.size() != z_v.size()) {
        throw ShapeError("decode: embedding lengths " + std::to_string(z_u.size()) + " and " +
                         std::to_string(z_v.size()));
    }
    double dot = 0.0;
    for (std::size_t i = 0; i < z_u.size(); ++i) {
        dot += z_u[i] * z_v[i];
    }
    return dot >= 0.0 ? 1.0 / (1.0 + std::exp(-dot)) : std::exp(dot) / (1.0 + std::exp(dot));
}

AttentionMap extract_attention(const GatModel& model, const MessageGraph& graph, const Tensor& features,
                               std::vector<std::string> genes) {
    const auto enc = encode(model, graph, features);
    AttentionMap att;
    att.genes = std::move(genes);
    att.source = graph.source;
    att.target = graph.target;
    for (const auto& alpha : enc.alpha) {
        const std::size_t heads = alpha.row_size();
        std::vector<std::vector<double>> per_head(heads, std::vector<double>(graph.n_edges()));
        for (std::size_t e = 0; e < graph.n_edges(); ++e) {
            for (std::size_t h = 0; h < heads; ++h) {
                per_head[h][e] = alpha.at(e, h);
            }
        }
        att.alpha.push_back(std::move(per_head));
    }
    return att;
}

AttentionMap extract_attention(const GatModel& model, const RegulatoryNetwork& net, const Tensor& features) {
    return extract_attention(model, message_graph(net, model.config.symmetrize), features, net.gene_names());
}

std::string attention_csv(const AttentionMap& att) {
    std::vector<std::size_t> order(att.source.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(att.genes[att.source[a]], att.genes[att.target[a]]) <
               std::tie(att.genes[att.source[b]], att.genes[att.target[b]]);
    });
    std::string out = "layer,head,source,target,alpha\n";
    for (std::size_t l = 0; l < att.alpha.size(); ++l) {
        for (std::size_t h = 0; h < att.alpha[l].size(); ++h) {
            for (const auto e : order) {
                out += std::to_string(l + 1) + "," + std::to_string(h) + "," + att.genes[att.source[e]] + "," +
                       att.genes[att.target[e]] + "," + detail::format_double(att.alpha[l][h][e]) + "\n";
            }
        }
    }
    return out;
}

} // namespace grn
