#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "grn/graph.hpp"
#include "json.hpp"

namespace grn {

/**
 * How the signed digraph is read when computing topology metrics.
 *
 * Directed keeps edge direction. UndirectedProjection merges opposite edges
 * and drops self-loops. UndirectedWithLoops merges opposite edges but keeps
 * self-loops as loops: a loop adds 2 to degree and 1 to the adjacency used
 * for eigenvector centrality. Loops never affect paths or triangles.
 */
enum class Convention { Directed, UndirectedProjection, UndirectedWithLoops };

std::string_view to_string(Convention c);
Convention parse_convention(std::string_view s);

/// Per-gene scores are indexed by gene index.
using NodeScores = std::vector<double>;

/// (in + out) / (n - 1) for Directed, neighbor count / (n - 1) otherwise.
NodeScores degree_centrality(const RegulatoryNetwork& net, Convention convention);

/// Local clustering on the undirected projection without self-loops.
NodeScores clustering_coefficient(const RegulatoryNetwork& net);

/**
 * Hop-count closeness with the Wasserman-Faust correction for nodes that
 * only part of the graph can reach. Directed uses distances toward v.
 */
NodeScores closeness_centrality(const RegulatoryNetwork& net, Convention convention);

/// Brandes betweenness, normalized to [0, 1].
NodeScores betweenness_centrality(const RegulatoryNetwork& net, Convention convention);

struct EigenvectorOptions {
    double tol = 1e-10;
    std::size_t max_iter = 1000;
};

/**
 * Power iteration on the unsigned adjacency, shifted by the identity so
 * bipartite components converge. Directed scores aggregate in-neighbors.
 * The result has unit Euclidean norm and non-negative entries.
 */
NodeScores eigenvector_centrality(const RegulatoryNetwork& net, Convention convention,
                                  const EigenvectorOptions& options = {});

struct CentralityRecord {
    std::string gene;
    double clustering = 0.0;
    double degree = 0.0;
    double closeness = 0.0;
    double betweenness = 0.0;
    double eigenvector = 0.0;
};

struct CentralityOptions {
    Convention convention = Convention::UndirectedWithLoops;
    /// Edges with |weight| below this are ignored (weight-0 aggregates by default).
    double min_abs_weight = 1.0;
    EigenvectorOptions eigenvector;
};

struct CentralityReport {
    Convention convention = Convention::UndirectedWithLoops;
    std::vector<CentralityRecord> rows; ///< gene index order
    bool degree_exceeds_one = false;
};

CentralityReport centrality_report(const RegulatoryNetwork& net, const CentralityOptions& options = {});

/// `gene,clustering,degree,closeness,betweenness,eigenvector` with 3 decimals.
std::string to_csv(const CentralityReport& report);
nlohmann::json to_json(const CentralityReport& report);

} // namespace grn
