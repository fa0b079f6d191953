#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace grn {

struct Gene {
    std::string name;
    std::size_t index = 0;

    bool operator==(const Gene&) const = default;
};

/// Directed regulatory interaction between two genes of one network.
struct RegEdge {
    std::size_t source = 0;
    std::size_t target = 0;
    int sign = 1;        ///< +1 activation, -1 repression
    double weight = 1.0; ///< sign for raw samples, signed occurrence count after aggregation

    bool operator==(const RegEdge&) const = default;
};

/// Maps alternative spellings onto canonical gene names, applied at ingestion.
using AliasMap = std::map<std::string, std::string>;

/**
 * Signed directed graph over a fixed, ordered gene universe.
 *
 * Immutable after construction. Edges are kept sorted by (source, target)
 * index and at most one edge exists per ordered pair. Self-loops are allowed.
 */
class RegulatoryNetwork {
public:
    RegulatoryNetwork() = default;

    /// Validates endpoints, signs and pair uniqueness; sorts the edges.
    RegulatoryNetwork(std::vector<std::string> genes, std::vector<RegEdge> edges, std::string label = {});

    const std::vector<Gene>& genes() const { return genes_; }
    const std::vector<RegEdge>& edges() const { return edges_; }
    const std::string& label() const { return label_; }
    std::size_t size() const { return genes_.size(); }

    const std::string& name(std::size_t index) const { return genes_.at(index).name; }
    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;

    const RegEdge* edge(std::size_t source, std::size_t target) const;
    bool has_edge(std::size_t source, std::size_t target) const { return edge(source, target) != nullptr; }

    std::vector<std::string> gene_names() const;

    /// Copy keeping only edges with |weight| >= min_abs_weight.
    RegulatoryNetwork filtered(double min_abs_weight) const;

    RegulatoryNetwork with_label(std::string label) const;

    /**
     * Renames genes so that gene i of the result is `order[i]` of this network.
     * Used to reorder a universe; the edge set is unchanged up to relabeling.
     */
    RegulatoryNetwork reordered(std::span<const std::size_t> order) const;

private:
    std::vector<Gene> genes_;
    std::vector<RegEdge> edges_;
    std::unordered_map<std::string, std::size_t> lookup_;
    std::string label_;
};

/// Genes x cells matrix of non-negative expression values.
class ExpressionMatrix {
public:
    ExpressionMatrix() = default;
    ExpressionMatrix(std::vector<std::string> genes, std::vector<std::string> cells, std::vector<double> values,
                     std::optional<int> dropout_q = std::nullopt);

    std::size_t n_genes() const { return genes_.size(); }
    std::size_t n_cells() const { return cells_.size(); }
    const std::vector<std::string>& genes() const { return genes_; }
    const std::vector<std::string>& cells() const { return cells_; }
    const std::vector<double>& values() const { return values_; }
    std::optional<int> dropout_q() const { return dropout_q_; }

    double at(std::size_t gene, std::size_t cell) const { return values_[gene * cells_.size() + cell]; }
    std::span<const double> row(std::size_t gene) const {
        return {values_.data() + gene * cells_.size(), cells_.size()};
    }
    std::optional<std::size_t> find(std::string_view gene) const;

private:
    std::vector<std::string> genes_;
    std::vector<std::string> cells_;
    std::vector<double> values_;
    std::unordered_map<std::string, std::size_t> lookup_;
    std::optional<int> dropout_q_;
};

/**
 * Parses a reference network CSV with header `Gene1,Gene2,Type`.
 *
 * Type is `+` or `-`. Repeated rows collapse; a pair listed with both signs
 * raises ConflictError. The gene universe is every name in order of first
 * appearance, after alias resolution.
 */
RegulatoryNetwork parse_ref_network(std::istream& in, std::string label = {}, const AliasMap& aliases = {});
RegulatoryNetwork parse_ref_network(std::string_view text, std::string label = {}, const AliasMap& aliases = {});

/// Parses a genes x cells CSV; the first header cell is empty or `Gene`.
ExpressionMatrix parse_expression(std::istream& in, const AliasMap& aliases = {});
ExpressionMatrix parse_expression(std::string_view text, const AliasMap& aliases = {});

/// Emits the reference-network CSV form (signs only; weights are dropped).
std::string to_ref_csv(const RegulatoryNetwork& net);

/**
 * Signed-sum consensus of sample networks over a shared gene universe.
 *
 * weight(u,v) is the number of samples with u->v as activation minus the
 * number with it as repression. Edges whose weights cancel to 0 are kept
 * with sign +1 so callers can decide how to threshold.
 */
RegulatoryNetwork aggregate(std::span<const RegulatoryNetwork> samples, std::string label = "aggregate");

/// Zeroes each entry independently with probability q/100.
ExpressionMatrix inject_dropout(const ExpressionMatrix& m, int q, std::uint64_t seed);

std::string to_dot(const RegulatoryNetwork& net);

nlohmann::json to_json(const RegulatoryNetwork& net);
RegulatoryNetwork from_json(const nlohmann::json& doc);

} // namespace grn
