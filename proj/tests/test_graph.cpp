#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <fstream>
#include <random>

#include "grn/errors.hpp"
#include "grn/graph.hpp"
#include "support/oracles.hpp"

using namespace grn;

namespace {

RegulatoryNetwork net_of(const std::vector<std::string>& genes, const std::vector<std::tuple<int, int, int>>& edges,
                         const std::string& label = "s") {
    std::vector<RegEdge> out;
    for (const auto& [s, t, sign] : edges) {
        out.push_back({static_cast<std::size_t>(s), static_cast<std::size_t>(t), sign, static_cast<double>(sign)});
    }
    return RegulatoryNetwork(genes, out, label);
}

} // namespace

TEST(ParseRefNetwork, SingleEdge) {
    const auto net = parse_ref_network("Gene1,Gene2,Type\nGata1,Fli1,+", "x");
    ASSERT_EQ(net.size(), 2u);
    ASSERT_EQ(net.edges().size(), 1u);
    EXPECT_EQ(net.name(net.edges()[0].source), "Gata1");
    EXPECT_EQ(net.name(net.edges()[0].target), "Fli1");
    EXPECT_EQ(net.edges()[0].sign, 1);
    EXPECT_EQ(net.label(), "x");
}

TEST(ParseRefNetwork, DuplicateRowsCollapse) {
    const auto net = parse_ref_network("Gene1,Gene2,Type\nPu1,Gata1,-\nPu1,Gata1,-");
    ASSERT_EQ(net.edges().size(), 1u);
    EXPECT_EQ(net.edges()[0].sign, -1);
    EXPECT_EQ(net.edges()[0].weight, -1.0);
}

TEST(ParseRefNetwork, ConflictNamesPair) {
    try {
        parse_ref_network("Gene1,Gene2,Type\nA,B,+\nA,B,-");
        FAIL() << "expected a conflict";
    } catch (const ConflictError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find('A'), std::string::npos);
        EXPECT_NE(what.find('B'), std::string::npos);
    }
}

TEST(ParseRefNetwork, MalformedRowReportsLine) {
    try {
        parse_ref_network("Gene1,Gene2,Type\nA,B,+\nA,B\n");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(ParseRefNetwork, BadTypeAndHeader) {
    EXPECT_THROW(parse_ref_network("Gene1,Gene2,Type\nA,B,x"), ParseError);
    EXPECT_THROW(parse_ref_network("From,To,Type\nA,B,+"), ParseError);
}

TEST(ParseRefNetwork, CrlfAndSelfLoopsAndAliases) {
    const auto net = parse_ref_network("Gene1,Gene2,Type\r\nSc1,Sc1,+\r\nGata1,Sc1,-\r\n", "", {{"Sc1", "Scl"}});
    EXPECT_TRUE(net.find("Scl").has_value());
    EXPECT_FALSE(net.find("Sc1").has_value());
    EXPECT_TRUE(net.has_edge(*net.find("Scl"), *net.find("Scl")));
    EXPECT_EQ(net.edges().size(), 2u);
}

TEST(ParseRefNetwork, UniverseInAppearanceOrder) {
    const auto net = parse_ref_network("Gene1,Gene2,Type\nC,A,+\nB,C,-\n");
    EXPECT_EQ(net.gene_names(), (std::vector<std::string>{"C", "A", "B"}));
}

TEST(ParseRefNetwork, CsvRoundTrip) {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 20; ++k) {
        const auto net = oracle::to_network(oracle::random_graph(rng, 6, 0.3));
        if (net.edges().empty()) {
            continue;
        }
        const auto back = parse_ref_network(to_ref_csv(net), net.label());
        ASSERT_EQ(back.edges().size(), net.edges().size());
        for (const auto& e : net.edges()) {
            const auto s = back.find(net.name(e.source));
            const auto t = back.find(net.name(e.target));
            ASSERT_TRUE(s && t);
            ASSERT_TRUE(back.has_edge(*s, *t));
            EXPECT_EQ(back.edge(*s, *t)->sign, e.sign);
        }
    }
}

TEST(RegulatoryNetwork, RejectsDuplicatesAndBadSigns) {
    EXPECT_THROW(net_of({"A", "B"}, {{0, 1, 1}, {0, 1, 1}}), ConflictError);
    EXPECT_ANY_THROW(net_of({"A", "B"}, {{0, 1, 2}}));
    EXPECT_ANY_THROW(net_of({"A", "B"}, {{0, 5, 1}}));
    EXPECT_ANY_THROW(RegulatoryNetwork({"A", "A"}, {}, ""));
}

TEST(ParseExpression, Basic) {
    const auto m = parse_expression(",c1,c2\nGata1,0.0,2.5");
    ASSERT_EQ(m.n_genes(), 1u);
    ASSERT_EQ(m.n_cells(), 2u);
    EXPECT_EQ(m.at(0, 0), 0.0);
    EXPECT_EQ(m.at(0, 1), 2.5);
    EXPECT_EQ(m.cells(), (std::vector<std::string>{"c1", "c2"}));
}

TEST(ParseExpression, GeneHeaderAccepted) {
    const auto m = parse_expression("Gene,c1\nA,1\nB,2\n");
    EXPECT_EQ(m.genes(), (std::vector<std::string>{"A", "B"}));
}

TEST(ParseExpression, Errors) {
    EXPECT_THROW(parse_expression(",c1,c2,c3\nA,1,2"), ParseError);
    EXPECT_THROW(parse_expression(",c1\nA,-1.0"), DomainError);
    try {
        parse_expression(",c1,c2\nA,1,2\nB,3,abc");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find("column"), std::string::npos) << what;
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Aggregate, SignedSums) {
    const std::vector<std::string> genes{"A", "B"};
    const std::vector<RegulatoryNetwork> samples{
        net_of(genes, {{0, 1, 1}}), net_of(genes, {{0, 1, 1}}), net_of(genes, {{0, 1, 1}}), net_of(genes, {{0, 1, -1}})};
    const auto agg = aggregate(samples);
    ASSERT_EQ(agg.edges().size(), 1u);
    EXPECT_EQ(agg.edges()[0].weight, 2.0);
    EXPECT_EQ(agg.edges()[0].sign, 1);
}

TEST(Aggregate, ZeroSumRetainedWithPlusSign) {
    const std::vector<std::string> genes{"A", "B"};
    const std::vector<RegulatoryNetwork> samples{net_of(genes, {{0, 1, 1}}), net_of(genes, {{0, 1, -1}})};
    const auto agg = aggregate(samples);
    ASSERT_EQ(agg.edges().size(), 1u);
    EXPECT_EQ(agg.edges()[0].weight, 0.0);
    EXPECT_EQ(agg.edges()[0].sign, 1);
    EXPECT_TRUE(agg.filtered(1.0).edges().empty());
}

TEST(Aggregate, SingleSampleIsIdentity) {
    const auto net = net_of({"A", "B", "C"}, {{0, 1, 1}, {1, 2, -1}, {2, 2, 1}});
    const std::vector<RegulatoryNetwork> one{net};
    const auto agg = aggregate(one);
    ASSERT_EQ(agg.edges().size(), net.edges().size());
    for (std::size_t k = 0; k < net.edges().size(); ++k) {
        EXPECT_EQ(agg.edges()[k].weight, net.edges()[k].sign);
        EXPECT_EQ(agg.edges()[k].sign, net.edges()[k].sign);
    }
}

TEST(Aggregate, UniverseMismatchListsDifference) {
    const std::vector<RegulatoryNetwork> samples{net_of({"A", "B"}, {{0, 1, 1}}), net_of({"A", "C"}, {{0, 1, 1}})};
    try {
        aggregate(samples);
        FAIL() << "expected a universe error";
    } catch (const UniverseError& e) {
        const std::string what = e.what();
        EXPECT_NE(what.find('B'), std::string::npos);
        EXPECT_NE(what.find('C'), std::string::npos);
    }
}

TEST(Aggregate, BruteForceSumAndPermutationInvariance) {
    std::mt19937_64 rng(5);
    const std::vector<std::string> genes{"a", "b", "c", "d", "e"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<RegulatoryNetwork> samples;
        std::map<std::pair<std::size_t, std::size_t>, int> expected;
        std::map<std::pair<std::size_t, std::size_t>, int> seen;
        const std::size_t count = 1 + trial % 10;
        for (std::size_t s = 0; s < count; ++s) {
            std::vector<RegEdge> edges;
            for (std::size_t u = 0; u < genes.size(); ++u) {
                for (std::size_t v = 0; v < genes.size(); ++v) {
                    const auto r = rng() % 4;
                    if (r == 0) {
                        continue;
                    }
                    const int sign = r == 1 ? -1 : 1;
                    edges.push_back({u, v, sign, static_cast<double>(sign)});
                    expected[{u, v}] += sign;
                    seen[{u, v}] = 1;
                }
            }
            samples.emplace_back(genes, edges, "s" + std::to_string(s));
        }
        const auto agg = aggregate(samples);
        ASSERT_EQ(agg.edges().size(), seen.size());
        for (const auto& e : agg.edges()) {
            const int w = expected[{e.source, e.target}];
            EXPECT_EQ(e.weight, w);
            EXPECT_LE(std::abs(e.weight), static_cast<double>(count));
        }
        auto shuffled = samples;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        EXPECT_EQ(to_json(aggregate(shuffled)), to_json(agg));
    }
}

TEST(Aggregate, TenUnanimousSamples) {
    const auto base = net_of({"A", "B"}, {{0, 1, 1}, {1, 0, -1}});
    const std::vector<RegulatoryNetwork> samples(10, base);
    const auto agg = aggregate(samples);
    double max_abs = 0.0;
    for (const auto& e : agg.edges()) {
        max_abs = std::max(max_abs, std::abs(e.weight));
    }
    EXPECT_EQ(agg.edge(0, 1)->weight, 10.0);
    EXPECT_EQ(max_abs, 10.0);
}

TEST(Dropout, RatesAndDeterminism) {
    const std::vector<std::string> genes = [] {
        std::vector<std::string> g;
        for (int i = 0; i < 100; ++i) {
            g.push_back("g" + std::to_string(i));
        }
        return g;
    }();
    std::vector<std::string> cells(genes.begin(), genes.end());
    const ExpressionMatrix ones(genes, cells, std::vector<double>(100 * 100, 1.0));

    EXPECT_EQ(inject_dropout(ones, 0, 3).values(), ones.values());
    const auto all = inject_dropout(ones, 100, 3);
    EXPECT_TRUE(std::all_of(all.values().begin(), all.values().end(), [](double v) { return v == 0.0; }));
    for (std::uint64_t seed : {0u, 1u, 2u, 99u}) {
        const auto half = inject_dropout(ones, 50, seed);
        const auto zeros = std::count(half.values().begin(), half.values().end(), 0.0);
        EXPECT_GE(zeros, 4500);
        EXPECT_LE(zeros, 5500);
        EXPECT_EQ(half.dropout_q(), 50);
        EXPECT_EQ(inject_dropout(ones, 50, seed).values(), half.values());
    }
    EXPECT_THROW(inject_dropout(ones, -1, 0), DomainError);
    EXPECT_THROW(inject_dropout(ones, 101, 0), DomainError);
}

TEST(Export, EmptyNetworkDocuments) {
    const RegulatoryNetwork empty({}, {}, "empty");
    const auto dot = to_dot(empty);
    EXPECT_NE(dot.find("digraph"), std::string::npos);
    EXPECT_EQ(dot.find("->"), std::string::npos);
    EXPECT_TRUE(to_json(empty)["edges"].empty());
}

TEST(Export, DotStylesSigns) {
    const auto net = net_of({"A", "B"}, {{0, 1, 1}, {1, 0, -1}});
    const auto dot = to_dot(net);
    EXPECT_EQ(dot, to_dot(net));
    const auto pos = dot.find("\"A\" -> \"B\"");
    const auto neg = dot.find("\"B\" -> \"A\"");
    ASSERT_NE(pos, std::string::npos) << dot;
    ASSERT_NE(neg, std::string::npos) << dot;
    EXPECT_LT(pos, neg);
    const auto line_of = [&](std::size_t at) { return dot.substr(at, dot.find('\n', at) - at); };
    EXPECT_NE(line_of(pos).find("arrowhead=normal"), std::string::npos);
    EXPECT_NE(line_of(neg).find("arrowhead=tee"), std::string::npos);
}

TEST(Export, JsonRoundTripOnHscFixture) {
    std::ifstream in(std::string(GRN_FIXTURES) + "/hsc/HSC-2000-1-50/refNetwork.csv");
    ASSERT_TRUE(in.good());
    const auto net = parse_ref_network(in, "hsc");
    const std::vector<RegulatoryNetwork> samples{net, net, net};
    const auto agg = aggregate(samples);
    const auto back = from_json(to_json(agg));
    EXPECT_EQ(back.gene_names(), agg.gene_names());
    EXPECT_EQ(back.label(), agg.label());
    ASSERT_EQ(back.edges().size(), agg.edges().size());
    for (std::size_t k = 0; k < agg.edges().size(); ++k) {
        EXPECT_EQ(back.edges()[k].source, agg.edges()[k].source);
        EXPECT_EQ(back.edges()[k].target, agg.edges()[k].target);
        EXPECT_EQ(back.edges()[k].sign, agg.edges()[k].sign);
        EXPECT_EQ(back.edges()[k].weight, agg.edges()[k].weight);
    }
    EXPECT_EQ(to_json(back), to_json(agg));
}
