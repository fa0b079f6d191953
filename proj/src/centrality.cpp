#include "grn/centrality.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>

#include "grn/errors.hpp"

namespace grn {

namespace {

/// Deduplicated adjacency with self-loops split out.
struct Topology {
    std::size_t n = 0;
    bool directed = false;
    std::vector<std::vector<std::size_t>> out;
    std::vector<std::vector<std::size_t>> in;
    std::vector<bool> loop;
};

Topology build_topology(const RegulatoryNetwork& net, bool directed) {
    Topology t;
    t.n = net.size();
    t.directed = directed;
    t.out.resize(t.n);
    t.in.resize(t.n);
    t.loop.assign(t.n, false);
    for (const auto& e : net.edges()) {
        if (e.source == e.target) {
            t.loop[e.source] = true;
            continue;
        }
        t.out[e.source].push_back(e.target);
        t.in[e.target].push_back(e.source);
        if (!directed) {
            t.out[e.target].push_back(e.source);
            t.in[e.source].push_back(e.target);
        }
    }
    for (std::size_t v = 0; v < t.n; ++v) {
        for (auto* list : {&t.out[v], &t.in[v]}) {
            std::sort(list->begin(), list->end());
            list->erase(std::unique(list->begin(), list->end()), list->end());
        }
    }
    return t;
}

Topology build_topology(const RegulatoryNetwork& net, Convention c) {
    return build_topology(net, c == Convention::Directed);
}

void require_nodes(const RegulatoryNetwork& net, std::size_t minimum, const char* what) {
    if (net.size() < minimum) {
        throw DomainError(std::string(what) + " needs at least " + std::to_string(minimum) + " genes, got " +
                          std::to_string(net.size()));
    }
}

/// Hop distances from `start` following `adjacency`; unreachable nodes get -1.
std::vector<long> bfs(const std::vector<std::vector<std::size_t>>& adjacency, std::size_t start) {
    std::vector<long> dist(adjacency.size(), -1);
    std::queue<std::size_t> frontier;
    dist[start] = 0;
    frontier.push(start);
    while (!frontier.empty()) {
        const auto v = frontier.front();
        frontier.pop();
        for (const auto w : adjacency[v]) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                frontier.push(w);
            }
        }
    }
    return dist;
}

std::string format3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v == 0.0 ? 0.0 : v);
    return buf;
}

} // namespace

std::string_view to_string(Convention c) {
    switch (c) {
    case Convention::Directed:
        return "directed";
    case Convention::UndirectedProjection:
        return "undirected-simple";
    case Convention::UndirectedWithLoops:
        return "undirected";
    }
    return "?";
}

Convention parse_convention(std::string_view s) {
    if (s == "directed") {
        return Convention::Directed;
    }
    if (s == "undirected-simple") {
        return Convention::UndirectedProjection;
    }
    if (s == "undirected") {
        return Convention::UndirectedWithLoops;
    }
    throw DomainError("unknown convention '" + std::string(s) + "' (directed|undirected|undirected-simple)");
}

NodeScores degree_centrality(const RegulatoryNetwork& net, Convention convention) {
    require_nodes(net, 2, "degree centrality");
    const auto topo = build_topology(net, convention);
    const double scale = 1.0 / static_cast<double>(topo.n - 1);
    NodeScores out(topo.n, 0.0);
    for (std::size_t v = 0; v < topo.n; ++v) {
        double degree = 0.0;
        switch (convention) {
        case Convention::Directed:
            degree = static_cast<double>(topo.out[v].size() + topo.in[v].size()) + (topo.loop[v] ? 2.0 : 0.0);
            break;
        case Convention::UndirectedProjection:
            degree = static_cast<double>(topo.out[v].size());
            break;
        case Convention::UndirectedWithLoops:
            degree = static_cast<double>(topo.out[v].size()) + (topo.loop[v] ? 2.0 : 0.0);
            break;
        }
        out[v] = degree * scale;
    }
    return out;
}

NodeScores clustering_coefficient(const RegulatoryNetwork& net) {
    const auto topo = build_topology(net, false);
    std::vector<std::vector<bool>> adjacent(topo.n, std::vector<bool>(topo.n, false));
    for (std::size_t v = 0; v < topo.n; ++v) {
        for (const auto w : topo.out[v]) {
            adjacent[v][w] = true;
        }
    }
    NodeScores out(topo.n, 0.0);
    for (std::size_t v = 0; v < topo.n; ++v) {
        const auto& nbrs = topo.out[v];
        const std::size_t k = nbrs.size();
        if (k < 2) {
            continue;
        }
        std::size_t links = 0;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = i + 1; j < k; ++j) {
                links += adjacent[nbrs[i]][nbrs[j]] ? 1 : 0;
            }
        }
        out[v] = 2.0 * static_cast<double>(links) / static_cast<double>(k * (k - 1));
    }
    return out;
}

NodeScores closeness_centrality(const RegulatoryNetwork& net, Convention convention) {
    require_nodes(net, 2, "closeness centrality");
    const auto topo = build_topology(net, convention);
    const double n_minus_1 = static_cast<double>(topo.n - 1);
    NodeScores out(topo.n, 0.0);
    for (std::size_t v = 0; v < topo.n; ++v) {
        // Walking predecessor lists from v yields the distances d(u, v).
        const auto dist = bfs(topo.in, v);
        double total = 0.0;
        std::size_t reached = 0;
        for (const auto d : dist) {
            if (d >= 0) {
                total += static_cast<double>(d);
                ++reached;
            }
        }
        if (reached > 1 && total > 0.0) {
            const double r = static_cast<double>(reached - 1);
            out[v] = (r / n_minus_1) * (r / total);
        }
    }
    return out;
}

NodeScores betweenness_centrality(const RegulatoryNetwork& net, Convention convention) {
    require_nodes(net, 3, "betweenness centrality");
    const auto topo = build_topology(net, convention);
    const std::size_t n = topo.n;
    NodeScores score(n, 0.0);

    std::vector<std::size_t> order;
    std::vector<std::vector<std::size_t>> preds(n);
    std::vector<double> sigma(n);
    std::vector<long> dist(n);
    std::vector<double> delta(n);

    for (std::size_t s = 0; s < n; ++s) {
        order.clear();
        for (auto& p : preds) {
            p.clear();
        }
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(dist.begin(), dist.end(), -1);
        std::fill(delta.begin(), delta.end(), 0.0);

        sigma[s] = 1.0;
        dist[s] = 0;
        std::queue<std::size_t> frontier;
        frontier.push(s);
        while (!frontier.empty()) {
            const auto v = frontier.front();
            frontier.pop();
            order.push_back(v);
            for (const auto w : topo.out[v]) {
                if (dist[w] < 0) {
                    dist[w] = dist[v] + 1;
                    frontier.push(w);
                }
                if (dist[w] == dist[v] + 1) {
                    sigma[w] += sigma[v];
                    preds[w].push_back(v);
                }
            }
        }

        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const auto w = *it;
            for (const auto v : preds[w]) {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if (w != s) {
                score[w] += delta[w];
            }
        }
    }

    // Ordered-pair sums: directed pairs once, undirected pairs twice, so the
    // same factor gives 1/((n-1)(n-2)) and 2/((n-1)(n-2)) per unordered pair.
    const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
    for (auto& v : score) {
        v *= scale;
    }
    return score;
}

NodeScores eigenvector_centrality(const RegulatoryNetwork& net, Convention convention,
                                  const EigenvectorOptions& options) {
    if (net.edges().empty()) {
        throw DomainError("eigenvector centrality needs at least one edge");
    }
    const auto topo = build_topology(net, convention);
    const std::size_t n = topo.n;
    const bool loops = convention != Convention::UndirectedProjection;

    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> next(n);
    double residual = 0.0;
    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        for (std::size_t v = 0; v < n; ++v) {
            double acc = x[v];
            if (loops && topo.loop[v]) {
                acc += x[v];
            }
            for (const auto u : topo.in[v]) {
                acc += x[u];
            }
            next[v] = acc;
        }
        double norm = 0.0;
        for (const auto value : next) {
            norm += value * value;
        }
        norm = std::sqrt(norm);
        residual = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            next[v] /= norm;
            residual = std::max(residual, std::abs(next[v] - x[v]));
        }
        x.swap(next);
        if (residual < options.tol) {
            return x;
        }
    }
    throw ConvergenceError("eigenvector centrality did not converge in " + std::to_string(options.max_iter) +
                               " iterations (residual " + std::to_string(residual) + ")",
                           residual);
}

CentralityReport centrality_report(const RegulatoryNetwork& net, const CentralityOptions& options) {
    require_nodes(net, 3, "centrality report");
    const auto kept = net.filtered(options.min_abs_weight);

    const auto clustering = clustering_coefficient(kept);
    const auto degree = degree_centrality(kept, options.convention);
    const auto closeness = closeness_centrality(kept, options.convention);
    const auto betweenness = betweenness_centrality(kept, options.convention);
    const auto eigenvector = eigenvector_centrality(kept, options.convention, options.eigenvector);

    CentralityReport report;
    report.convention = options.convention;
    for (std::size_t v = 0; v < kept.size(); ++v) {
        report.rows.push_back(
            CentralityRecord{kept.name(v), clustering[v], degree[v], closeness[v], betweenness[v], eigenvector[v]});
        report.degree_exceeds_one = report.degree_exceeds_one || degree[v] > 1.0;
    }
    return report;
}

std::string to_csv(const CentralityReport& report) {
    std::string out = "gene,clustering,degree,closeness,betweenness,eigenvector\n";
    for (const auto& r : report.rows) {
        out += r.gene + "," + format3(r.clustering) + "," + format3(r.degree) + "," + format3(r.closeness) + "," +
               format3(r.betweenness) + "," + format3(r.eigenvector) + "\n";
    }
    return out;
}

nlohmann::json to_json(const CentralityReport& report) {
    nlohmann::json doc;
    doc["convention"] = std::string(to_string(report.convention));
    doc["degree_exceeds_one"] = report.degree_exceeds_one;
    auto rows = nlohmann::json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"gene", r.gene},
                        {"clustering", r.clustering},
                        {"degree", r.degree},
                        {"closeness", r.closeness},
                        {"betweenness", r.betweenness},
                        {"eigenvector", r.eigenvector}});
    }
    doc["rows"] = std::move(rows);
    return doc;
}

} // namespace grn
