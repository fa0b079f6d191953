#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "grn/gat.hpp"
#include "grn/graph.hpp"
#include "json.hpp"

namespace grn {

struct ImportanceRecord {
    std::string gene;
    double raw = 0.0;   ///< attention mass flowing out of the gene
    double score = 0.0; ///< raw minus the mean over genes
    std::size_t rank = 0; ///< 1 = largest score; ties go to the lower gene index
};

struct ImportanceReport {
    std::string method = "centered_incoming_attention";
    std::string provenance;
    std::vector<ImportanceRecord> genes; ///< gene index order
};

/**
 * raw(g) averages, over the selected layers and all heads, the attention
 * that other genes pay to g, i.e. alpha summed over g's outgoing non-self
 * message edges. Scores are raw values centered to mean zero, so they come
 * out signed.
 *
 * `layer` selects one layer (0-based); by default all layers are averaged.
 */
ImportanceReport node_importance(const AttentionMap& att, const RegulatoryNetwork& net,
                                 std::optional<std::size_t> layer = std::nullopt);

struct StabilitySummary {
    std::vector<std::string> genes;
    std::vector<std::vector<double>> spearman; ///< pairwise over reports
    double median_spearman = 1.0;
    std::map<std::string, std::size_t> top1_counts;
    std::vector<double> median_rank; ///< per gene, aligned with `genes`
};

/// Rank agreement between reports over the same genes (matched by name).
StabilitySummary importance_stability(std::span<const ImportanceReport> reports);

std::string to_csv(const ImportanceReport& report);
nlohmann::json to_json(const StabilitySummary& summary);

} // namespace grn
