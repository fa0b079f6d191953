#include "grn/importance.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "format.hpp"
#include "grn/errors.hpp"

namespace grn {

namespace {

double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n == 0) {
        return 0.0;
    }
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace

ImportanceReport node_importance(const AttentionMap& att, const RegulatoryNetwork& net,
                                 std::optional<std::size_t> layer) {
    const std::size_t n = net.size();
    if (att.genes != net.gene_names()) {
        throw UniverseError("attention map genes do not match network '" + net.label() + "'");
    }
    if (att.source.size() != att.target.size()) {
        throw ShapeError("attention map has mismatched source/target lists");
    }
    if (att.alpha.empty()) {
        throw CoverageError("attention map has no layers");
    }
    if (layer && *layer >= att.n_layers()) {
        throw IndexError("attention layer " + std::to_string(*layer) + " outside [0, " +
                         std::to_string(att.n_layers()) + ")");
    }

    std::set<EdgePair> present;
    for (std::size_t e = 0; e < att.source.size(); ++e) {
        present.emplace(att.source[e], att.target[e]);
    }
    for (const auto& e : net.edges()) {
        if (present.count({e.source, e.target}) == 0) {
            throw CoverageError("attention map lacks edge (" + net.name(e.source) + "," + net.name(e.target) + ")");
        }
    }

    const std::size_t first = layer ? *layer : 0;
    const std::size_t last = layer ? *layer + 1 : att.n_layers();
    std::vector<double> raw(n, 0.0);
    std::size_t slices = 0;
    for (std::size_t l = first; l < last; ++l) {
        for (const auto& alpha : att.alpha[l]) {
            if (alpha.size() != att.source.size()) {
                throw ShapeError("attention head does not cover every message edge");
            }
            for (std::size_t e = 0; e < alpha.size(); ++e) {
                if (att.source[e] != att.target[e]) {
                    raw[att.source[e]] += alpha[e];
                }
            }
            ++slices;
        }
    }
    if (slices == 0) {
        throw CoverageError("attention map has no heads");
    }
    for (auto& r : raw) {
        r /= static_cast<double>(slices);
    }
    const double centre = std::accumulate(raw.begin(), raw.end(), 0.0) / static_cast<double>(n);

    ImportanceReport report;
    report.provenance = net.label();
    for (std::size_t g = 0; g < n; ++g) {
        report.genes.push_back(ImportanceRecord{net.name(g), raw[g], raw[g] - centre, 0});
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return report.genes[a].score > report.genes[b].score; });
    for (std::size_t r = 0; r < n; ++r) {
        report.genes[order[r]].rank = r + 1;
    }
    return report;
}

StabilitySummary importance_stability(std::span<const ImportanceReport> reports) {
    if (reports.size() < 2) {
        throw DomainError("stability needs at least 2 importance reports");
    }
    StabilitySummary summary;
    for (const auto& rec : reports.front().genes) {
        summary.genes.push_back(rec.gene);
    }
    const std::size_t n = summary.genes.size();
    if (n < 2) {
        throw DomainError("stability needs at least 2 genes");
    }
    const std::set<std::string> universe(summary.genes.begin(), summary.genes.end());

    // ranks[r][g] = rank of summary.genes[g] in report r
    std::vector<std::vector<double>> ranks;
    for (const auto& report : reports) {
        std::map<std::string, std::size_t> by_name;
        for (const auto& rec : report.genes) {
            by_name.emplace(rec.gene, rec.rank);
        }
        std::set<std::string> names;
        for (const auto& [name, rank] : by_name) {
            names.insert(name);
        }
        if (names != universe || report.genes.size() != n) {
            throw UniverseError("importance reports cover different gene sets");
        }
        std::vector<double> row(n);
        for (std::size_t g = 0; g < n; ++g) {
            row[g] = static_cast<double>(by_name.at(summary.genes[g]));
            if (by_name.at(summary.genes[g]) == 1) {
                summary.top1_counts[summary.genes[g]] += 1;
            }
        }
        ranks.push_back(std::move(row));
    }

    const std::size_t m = reports.size();
    const double denom = static_cast<double>(n) * (static_cast<double>(n) * static_cast<double>(n) - 1.0);
    summary.spearman.assign(m, std::vector<double>(m, 1.0));
    std::vector<double> off_diagonal;
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a + 1; b < m; ++b) {
            double d2 = 0.0;
            for (std::size_t g = 0; g < n; ++g) {
                const double d = ranks[a][g] - ranks[b][g];
                d2 += d * d;
            }
            const double rho = 1.0 - 6.0 * d2 / denom;
            summary.spearman[a][b] = rho;
            summary.spearman[b][a] = rho;
            off_diagonal.push_back(rho);
        }
    }
    summary.median_spearman = median(off_diagonal);

    for (std::size_t g = 0; g < n; ++g) {
        std::vector<double> column;
        for (std::size_t r = 0; r < m; ++r) {
            column.push_back(ranks[r][g]);
        }
        summary.median_rank.push_back(median(std::move(column)));
    }
    return summary;
}

std::string to_csv(const ImportanceReport& report) {
    std::string out = "gene,score,rank\n";
    for (const auto& rec : report.genes) {
        out += rec.gene + "," + detail::format_double(rec.score) + "," + std::to_string(rec.rank) + "\n";
    }
    return out;
}

nlohmann::json to_json(const StabilitySummary& summary) {
    nlohmann::json median_rank = nlohmann::json::object();
    for (std::size_t g = 0; g < summary.genes.size(); ++g) {
        median_rank[summary.genes[g]] = summary.median_rank[g];
    }
    return {{"genes", summary.genes},
            {"spearman", summary.spearman},
            {"median_spearman", summary.median_spearman},
            {"top1_counts", summary.top1_counts},
            {"median_rank", std::move(median_rank)}};
}

} // namespace grn
