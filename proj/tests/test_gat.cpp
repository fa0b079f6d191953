#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "grn/checkpoint.hpp"
#include "grn/errors.hpp"
#include "grn/gat.hpp"
#include "support/dense_gat.hpp"
#include "support/oracles.hpp"

using namespace grn;
using ad::Tensor;

namespace {

std::vector<std::vector<int>> message_adjacency(const MessageGraph& g) {
    std::vector<std::vector<int>> adj(g.n_nodes, std::vector<int>(g.n_nodes, 0));
    for (std::size_t e = 0; e < g.n_edges(); ++e) {
        adj[g.source[e]][g.target[e]] = 1;
    }
    return adj;
}

Tensor random_features(std::mt19937_64& rng, std::size_t n, std::size_t f) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n * f);
    for (auto& x : v) {
        x = u(rng);
    }
    return Tensor::from({n, f}, v);
}

/// Random nonzero biases so the oracle also checks where the bias enters.
void perturb_bias(GatModel& m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (auto* layer : {&m.layer1, &m.layer2}) {
        for (auto& v : layer->bias.mutable_data()) {
            v = u(rng);
        }
    }
}

RegulatoryNetwork hsc() {
    std::ifstream in(std::string(GRN_FIXTURES) + "/hsc/HSC-2000-1-50/refNetwork.csv");
    return parse_ref_network(in, "hsc");
}

void expect_targets_normalized(const AttentionMap& att) {
    for (const auto& layer : att.alpha) {
        for (const auto& head : layer) {
            std::vector<double> totals(att.genes.size(), 0.0);
            for (std::size_t e = 0; e < head.size(); ++e) {
                totals[att.target[e]] += head[e];
            }
            for (const double t : totals) {
                EXPECT_NEAR(t, 1.0, 1e-9);
            }
        }
    }
}

} // namespace

TEST(MessageGraph, SelfLoopsMergedAndSorted) {
    const std::vector<EdgePair> edges{{1, 0}, {0, 0}, {0, 1}};
    const auto g = message_graph(3, edges);
    EXPECT_EQ(g.n_edges(), 5u);
    std::size_t loops = 0;
    for (std::size_t e = 0; e < g.n_edges(); ++e) {
        loops += g.source[e] == g.target[e] ? 1 : 0;
    }
    EXPECT_EQ(loops, 3u);
    const auto sym = message_graph(3, std::vector<EdgePair>{{0, 2}}, true);
    EXPECT_EQ(sym.n_edges(), 5u);
}

TEST(Features, OneHotIsIdentity) {
    const auto f = build_features(hsc(), nullptr, FeatureMode::OneHot);
    EXPECT_EQ(f.shape(), (ad::Shape{11, 11}));
    EXPECT_EQ(f.at(3, 3), 1.0);
    EXPECT_EQ(f.at(3, 4), 0.0);
}

TEST(Features, TwoGeneToyMatchesHandStats) {
    std::ifstream in(std::string(GRN_FIXTURES) + "/toy/two_genes.csv");
    const auto m = parse_expression(in);
    const RegulatoryNetwork net({"B", "A"}, {{0, 1, 1, 1.0}}, "toy");
    const auto f = build_features(net, &m, FeatureMode::ExpressionStats);
    ASSERT_EQ(f.shape(), (ad::Shape{2, 3}));
    // A = [0, 2, 4, 2]: mean 2, sd sqrt(2), nonzero 3/4. B = [1, 1, 0, 0]: mean 1/2, sd 1/2, nonzero 1/2.
    const double raw_b[] = {0.5, 0.5, 0.5};
    const double raw_a[] = {2.0, std::sqrt(2.0), 0.75};
    for (std::size_t c = 0; c < 3; ++c) {
        const double mu = 0.5 * (raw_a[c] + raw_b[c]);
        const double sd = std::abs(raw_a[c] - raw_b[c]) / 2.0;
        EXPECT_NEAR(f.at(0, c), (raw_b[c] - mu) / sd, 1e-12);
        EXPECT_NEAR(f.at(1, c), (raw_a[c] - mu) / sd, 1e-12);
    }
}

TEST(Features, ConstantMatrixGivesZeros) {
    const ExpressionMatrix m({"A", "B", "C"}, {"c1", "c2"}, std::vector<double>(6, 3.0));
    const RegulatoryNetwork net({"A", "B", "C"}, {{0, 1, 1, 1.0}}, "c");
    const auto f = build_features(net, &m, FeatureMode::ExpressionStats);
    for (const double v : f.data()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(Features, MissingGeneIsCoverageError) {
    const ExpressionMatrix m({"A"}, {"c1"}, {1.0});
    const RegulatoryNetwork net({"A", "B"}, {{0, 1, 1, 1.0}}, "c");
    EXPECT_THROW(build_features(net, &m, FeatureMode::ExpressionStats), CoverageError);
    EXPECT_THROW(build_features(net, nullptr, FeatureMode::ExpressionStats), CoverageError);
}

TEST(AttentionScores, ZeroAttentionV2IsUniform) {
    Rng rng(3);
    auto p = GatLayerParams::init(3, 4, 2, true, Scoring::V2, 0.2, rng);
    std::fill(p.attention.mutable_data().begin(), p.attention.mutable_data().end(), 0.0);
    std::mt19937_64 gen(1);
    const auto s = attention_scores(p, random_features(gen, 5, 3), random_features(gen, 5, 3));
    for (const double v : s.data()) {
        EXPECT_EQ(v, 0.0);
    }
}

TEST(AttentionScores, V1IdenticalNeighborsUniform) {
    Rng rng(4);
    GatConfig cfg;
    cfg.scoring = Scoring::V1;
    auto model = GatModel::init(3, cfg, rng);
    const std::vector<EdgePair> star{{1, 0}, {2, 0}, {3, 0}};
    const auto g = message_graph(4, star);
    const auto same = Tensor::from({4, 3}, {0.3, -0.2, 0.9, 0.3, -0.2, 0.9, 0.3, -0.2, 0.9, 0.3, -0.2, 0.9});
    const auto out = gat_layer_forward(model.layer1, same, g, Activation::Elu);
    for (std::size_t e = 0; e < g.n_edges(); ++e) {
        if (g.target[e] == 0) {
            for (std::size_t h = 0; h < model.layer1.heads; ++h) {
                EXPECT_NEAR(out.alpha.at(e, h), 0.25, 1e-12);
            }
        }
    }
}

TEST(AttentionScores, SingleEdgeScalarOracle) {
    std::mt19937_64 gen(12);
    for (const auto scoring : {Scoring::V1, Scoring::V2}) {
        Rng rng(5);
        const auto p = GatLayerParams::init(3, 2, 2, true, scoring, 0.2, rng);
        const auto ht = random_features(gen, 1, 3);
        const auto hs = random_features(gen, 1, 3);
        const auto s = attention_scores(p, ht, hs);
        ASSERT_EQ(s.shape(), (ad::Shape{1, 2}));
        for (std::size_t h = 0; h < 2; ++h) {
            double expected = 0.0;
            double mixed = 0.0;
            for (std::size_t c = 0; c < 2; ++c) {
                const std::size_t j = h * 2 + c;
                double wt = 0.0;
                double ws = 0.0;
                for (std::size_t i = 0; i < 3; ++i) {
                    wt += ht.data()[i] * p.w_target.data()[i * 4 + j];
                    ws += hs.data()[i] * p.w_source.data()[i * 4 + j];
                }
                if (scoring == Scoring::V2) {
                    expected += p.attention.data()[j] * oracle::lrelu(wt + ws, 0.2);
                } else {
                    mixed += p.attention.data()[j] * wt + p.attention.data()[4 + j] * ws;
                }
            }
            if (scoring == Scoring::V1) {
                expected = oracle::lrelu(mixed, 0.2);
            }
            EXPECT_NEAR(s.at(0, h), expected, 1e-12);
        }
    }
}

TEST(AttentionScores, DimensionMismatch) {
    Rng rng(5);
    const auto p = GatLayerParams::init(3, 2, 2, true, Scoring::V2, 0.2, rng);
    EXPECT_THROW(attention_scores(p, Tensor::zeros({1, 4}), Tensor::zeros({1, 3})), ShapeError);
}

TEST(GatLayer, SingleNodeSelfLoop) {
    Rng rng(6);
    const auto p = GatLayerParams::init(2, 3, 1, true, Scoring::V2, 0.2, rng);
    const auto x = Tensor::from({1, 2}, {0.4, -1.1});
    const auto out = gat_layer_forward(p, x, message_graph(1, std::vector<EdgePair>{}), Activation::Elu);
    EXPECT_EQ(out.alpha.data()[0], 1.0);
    const auto wx = ad::matmul(x, p.w_source);
    for (std::size_t j = 0; j < 3; ++j) {
        const double v = wx.data()[j];
        EXPECT_NEAR(out.embeddings.data()[j], v > 0 ? v : std::exp(v) - 1.0, 1e-15);
    }
}

TEST(GatLayer, IsolatedNodesAreLocal) {
    Rng rng(7);
    const auto p = GatLayerParams::init(2, 3, 2, true, Scoring::V2, 0.2, rng);
    const auto g = message_graph(2, std::vector<EdgePair>{});
    const auto a = gat_layer_forward(p, Tensor::from({2, 2}, {1.0, 2.0, 3.0, 4.0}), g, Activation::Elu);
    const auto b = gat_layer_forward(p, Tensor::from({2, 2}, {1.0, 2.0, -5.0, 0.5}), g, Activation::Elu);
    for (std::size_t j = 0; j < 6; ++j) {
        EXPECT_EQ(a.embeddings.at(0, j), b.embeddings.at(0, j));
    }
}

TEST(GatLayer, EmptyNodeSet) {
    Rng rng(7);
    const auto p = GatLayerParams::init(2, 3, 1, true, Scoring::V2, 0.2, rng);
    EXPECT_THROW(gat_layer_forward(p, Tensor::zeros({0, 2}), MessageGraph{}, Activation::None), DomainError);
}

TEST(Encoder, MatchesDenseOracle) {
    std::mt19937_64 gen(31);
    for (int k = 0; k < 20; ++k) {
        for (const auto scoring : {Scoring::V1, Scoring::V2}) {
            const auto g = oracle::random_graph(gen, 4 + gen() % 3, 0.35);
            std::vector<EdgePair> edges(g.edges.begin(), g.edges.end());
            const auto mg = message_graph(g.n, edges, k % 2 == 1);
            GatConfig cfg;
            cfg.scoring = scoring;
            cfg.hidden = 3;
            cfg.heads = 2;
            cfg.embedding = 4;
            cfg.out_heads = 1 + k % 2;
            Rng rng(static_cast<std::uint64_t>(k));
            auto model = GatModel::init(3, cfg, rng);
            perturb_bias(model, gen);
            const auto x = random_features(gen, g.n, 3);
            const auto enc = encode(model, mg, x);
            const auto ref = oracle::dense_encode(model, oracle::dense(x), message_adjacency(mg));
            for (std::size_t i = 0; i < g.n; ++i) {
                for (std::size_t j = 0; j < cfg.embedding; ++j) {
                    EXPECT_NEAR(enc.embeddings.at(i, j), ref.z[i][j], 1e-10);
                }
            }
            for (std::size_t l = 0; l < 2; ++l) {
                for (std::size_t e = 0; e < mg.n_edges(); ++e) {
                    for (std::size_t h = 0; h < enc.alpha[l].shape()[1]; ++h) {
                        EXPECT_NEAR(enc.alpha[l].at(e, h), ref.layers[l].alpha[h][mg.source[e]][mg.target[e]], 1e-10);
                    }
                }
            }
        }
    }
}

TEST(Encoder, PermutationEquivariance) {
    std::mt19937_64 gen(17);
    for (int k = 0; k < 10; ++k) {
        const std::size_t n = 5;
        const auto g = oracle::random_graph(gen, n, 0.4);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<EdgePair> a(g.edges.begin(), g.edges.end());
        std::vector<EdgePair> b;
        for (const auto& [u, v] : a) {
            b.emplace_back(perm[u], perm[v]);
        }
        const auto x = random_features(gen, n, 3);
        std::vector<double> px(n * 3);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < 3; ++j) {
                px[perm[i] * 3 + j] = x.at(i, j);
            }
        }
        Rng rng(static_cast<std::uint64_t>(k));
        const auto model = GatModel::init(3, GatConfig{}, rng);
        const auto za = encode(model, message_graph(n, a), x).embeddings;
        const auto zb = encode(model, message_graph(n, b), Tensor::from({n, 3}, px)).embeddings;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < 16; ++j) {
                EXPECT_NEAR(za.at(i, j), zb.at(perm[i], j), 1e-12);
            }
        }
    }
}

TEST(Encoder, IsomorphicGraphsZeroAttentionOneHot) {
    // OneHot features are tied to node identity, so relabeling the graph and permuting
    // the first-layer weight rows together must permute the embeddings.
    const std::size_t n = 4;
    const std::vector<EdgePair> a{{0, 1}, {1, 2}, {2, 3}, {3, 0}, {0, 2}};
    const std::size_t perm[] = {2, 0, 3, 1};
    std::vector<EdgePair> b;
    for (const auto& [u, v] : a) {
        b.emplace_back(perm[u], perm[v]);
    }
    Rng rng(9);
    auto ma = GatModel::init(n, GatConfig{}, rng);
    ma.zero_attention();
    auto mb = ma.clone();
    for (auto* wb : {&mb.layer1.w_target, &mb.layer1.w_source}) {
        const auto& wa = wb == &mb.layer1.w_target ? ma.layer1.w_target : ma.layer1.w_source;
        const std::size_t width = wa.shape()[1];
        auto values = wb->mutable_data();
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < width; ++j) {
                values[perm[i] * width + j] = wa.data()[i * width + j];
            }
        }
    }
    const auto x = Tensor::identity(n);
    const auto za = encode(ma, message_graph(n, a), x).embeddings;
    const auto zb = encode(mb, message_graph(n, b), x).embeddings;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < 16; ++j) {
            EXPECT_NEAR(za.at(i, j), zb.at(perm[i], j), 1e-12);
        }
    }
}

TEST(Decoder, ZeroVectorAndSelfSimilarity) {
    std::mt19937_64 gen(2);
    const auto z = random_features(gen, 4, 5);
    std::vector<double> zero(5, 0.0);
    for (std::size_t i = 0; i < 4; ++i) {
        std::vector<double> row(z.data().begin() + static_cast<std::ptrdiff_t>(i * 5),
                                z.data().begin() + static_cast<std::ptrdiff_t>(i * 5 + 5));
        EXPECT_EQ(decode(zero, row), 0.5);
        EXPECT_GE(decode(row, row), 0.5);
    }
}

TEST(Decoder, ScalarOracle) {
    std::mt19937_64 gen(3);
    const auto z = random_features(gen, 6, 4);
    std::vector<EdgePair> pairs;
    for (int k = 0; k < 15; ++k) {
        pairs.emplace_back(gen() % 6, gen() % 6);
    }
    const auto p = decode(z, pairs);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            dot += z.at(pairs[k].first, j) * z.at(pairs[k].second, j);
        }
        EXPECT_NEAR(p.data()[k], 1.0 / (1.0 + std::exp(-dot)), 1e-12);
    }
}

TEST(Attention, ZeroAttentionIsUniformOnHsc) {
    const auto net = hsc();
    Rng rng(1);
    auto model = GatModel::init(net.size(), GatConfig{}, rng);
    model.zero_attention();
    const auto att = extract_attention(model, net, build_features(net, nullptr, FeatureMode::OneHot));
    std::vector<std::size_t> in_degree(net.size(), 0);
    for (const auto t : att.target) {
        ++in_degree[t];
    }
    for (const auto& layer : att.alpha) {
        for (const auto& head : layer) {
            for (std::size_t e = 0; e < head.size(); ++e) {
                EXPECT_NEAR(head[e], 1.0 / static_cast<double>(in_degree[att.target[e]]), 1e-15);
            }
        }
    }
    expect_targets_normalized(att);
}

TEST(Attention, NormalizedAndMatchesOracleOnHsc) {
    const auto net = hsc();
    std::mt19937_64 gen(5);
    for (const auto scoring : {Scoring::V1, Scoring::V2}) {
        GatConfig cfg;
        cfg.scoring = scoring;
        Rng rng(2);
        auto model = GatModel::init(net.size(), cfg, rng);
        perturb_bias(model, gen);
        const auto x = build_features(net, nullptr, FeatureMode::OneHot);
        const auto att = extract_attention(model, net, x);
        expect_targets_normalized(att);
        const auto mg = message_graph(net);
        const auto ref = oracle::dense_encode(model, oracle::dense(x), message_adjacency(mg));
        for (std::size_t l = 0; l < 2; ++l) {
            for (std::size_t h = 0; h < att.alpha[l].size(); ++h) {
                for (std::size_t e = 0; e < att.source.size(); ++e) {
                    EXPECT_NEAR(att.alpha[l][h][e], ref.layers[l].alpha[h][att.source[e]][att.target[e]], 1e-10);
                }
            }
        }
        EXPECT_EQ(attention_csv(att), attention_csv(extract_attention(model, net, x)));
    }
}

TEST(Attention, CsvHeaderAndOrdering) {
    const auto net = hsc();
    Rng rng(3);
    const auto model = GatModel::init(net.size(), GatConfig{}, rng);
    const auto csv = attention_csv(extract_attention(model, net, Tensor::identity(net.size())));
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "layer,head,source,target,alpha");
    std::vector<std::tuple<int, int, std::string, std::string>> keys;
    while (std::getline(in, line)) {
        const auto f = [&] {
            std::vector<std::string> out;
            std::stringstream ss(line);
            std::string item;
            while (std::getline(ss, item, ',')) {
                out.push_back(item);
            }
            return out;
        }();
        ASSERT_EQ(f.size(), 5u);
        keys.emplace_back(std::stoi(f[0]), std::stoi(f[1]), f[2], f[3]);
    }
    EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
    const std::size_t edges = message_graph(net).n_edges();
    EXPECT_EQ(keys.size(), edges * (4 + 1));
}

TEST(Checkpoint, RoundTripPreservesModel) {
    const auto dir = std::filesystem::temp_directory_path() / "grn_ckpt_test";
    std::filesystem::remove_all(dir);
    for (const auto scoring : {Scoring::V1, Scoring::V2}) {
        GatConfig cfg;
        cfg.scoring = scoring;
        Rng rng(8);
        const auto model = GatModel::init(5, cfg, rng);
        const auto named = model.named_parameters();
        save_checkpoint(dir, named, {{"seed", 8}, {"step", 3}});
        const auto ckpt = load_checkpoint(dir);
        EXPECT_EQ(ckpt.manifest["seed"], 8);
        EXPECT_EQ(ckpt.manifest["step"], 3);
        const auto back = GatModel::from_parameters(5, cfg, ckpt);
        const auto a = model.parameters();
        const auto b = back.parameters();
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            EXPECT_EQ(a[k].shape(), b[k].shape());
            EXPECT_TRUE(std::equal(a[k].data().begin(), a[k].data().end(), b[k].data().begin()));
        }
        if (scoring == Scoring::V1) {
            EXPECT_EQ(back.layer1.w_target.node(), back.layer1.w_source.node());
        }
        std::filesystem::remove_all(dir);
    }
    EXPECT_THROW(load_checkpoint(dir), ResolutionError);
}

TEST(Checkpoint, ShapeMismatchRejected) {
    const auto dir = std::filesystem::temp_directory_path() / "grn_ckpt_shape";
    std::filesystem::remove_all(dir);
    Rng rng(8);
    const auto model = GatModel::init(5, GatConfig{}, rng);
    save_checkpoint(dir, model.named_parameters(), {});
    GatConfig wider;
    wider.hidden = 9;
    EXPECT_ANY_THROW(GatModel::from_parameters(5, wider, load_checkpoint(dir)));
    std::filesystem::remove_all(dir);
}

TEST(Checkpoint, LittleEndianBlob) {
    const auto dir = std::filesystem::temp_directory_path() / "grn_ckpt_le";
    std::filesystem::remove_all(dir);
    const std::vector<NamedTensor> params{{"w", Tensor::from({1}, {1.0})}};
    save_checkpoint(dir, params, {});
    std::ifstream in(dir / "w.f64", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::vector<unsigned char> one{0, 0, 0, 0, 0, 0, 0xF0, 0x3F};
    EXPECT_EQ(bytes, one);
    std::filesystem::remove_all(dir);
}
