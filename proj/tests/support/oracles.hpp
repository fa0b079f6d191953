#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the code paths it is compared against.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "grn/graph.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<int>>;

struct Graph {
    std::size_t n = 0;
    std::vector<std::pair<std::size_t, std::size_t>> edges; ///< distinct ordered pairs, loops allowed
};

inline Graph random_graph(std::mt19937_64& rng, std::size_t n, double p, bool loops = true) {
    std::bernoulli_distribution coin(p);
    Graph g;
    g.n = n;
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
            if ((u != v || loops) && coin(rng)) {
                g.edges.emplace_back(u, v);
            }
        }
    }
    return g;
}

inline grn::RegulatoryNetwork to_network(const Graph& g, const std::string& prefix = "g") {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < g.n; ++i) {
        names.push_back(prefix + std::to_string(i));
    }
    std::vector<grn::RegEdge> edges;
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
        const int sign = k % 3 == 0 ? -1 : 1;
        edges.push_back({g.edges[k].first, g.edges[k].second, sign, static_cast<double>(sign)});
    }
    return grn::RegulatoryNetwork(names, edges, "oracle");
}

/// adj[u][v] = 1 for an edge u->v. Undirected mirrors it; loops kept only on request.
inline Matrix adjacency(const Graph& g, bool directed, bool loops) {
    Matrix a(g.n, std::vector<int>(g.n, 0));
    for (const auto& [u, v] : g.edges) {
        if (u == v && !loops) {
            continue;
        }
        a[u][v] = 1;
        if (!directed) {
            a[v][u] = 1;
        }
    }
    return a;
}

constexpr int unreachable = std::numeric_limits<int>::max() / 4;

inline Matrix floyd_warshall(const Matrix& a) {
    const std::size_t n = a.size();
    Matrix d(n, std::vector<int>(n, unreachable));
    for (std::size_t u = 0; u < n; ++u) {
        d[u][u] = 0;
        for (std::size_t v = 0; v < n; ++v) {
            if (u != v && a[u][v]) {
                d[u][v] = 1;
            }
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
            }
        }
    }
    return d;
}

/// Wasserman-Faust closeness over distances toward each node.
inline std::vector<double> closeness(const Matrix& a) {
    const auto d = floyd_warshall(a);
    const std::size_t n = a.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        double total = 0.0;
        double r = 0.0;
        for (std::size_t u = 0; u < n; ++u) {
            if (u != v && d[u][v] < unreachable) {
                total += d[u][v];
                r += 1.0;
            }
        }
        if (r > 0.0) {
            out[v] = (r / static_cast<double>(n - 1)) * (r / total);
        }
    }
    return out;
}

/// Lists every shortest path for every ordered pair, and credits interior nodes.
inline std::vector<double> betweenness(const Matrix& a) {
    const auto d = floyd_warshall(a);
    const std::size_t n = a.size();
    std::vector<double> out(n, 0.0);
    std::vector<std::size_t> path;
    std::vector<std::vector<std::size_t>> found;
    std::function<void(std::size_t, std::size_t, int)> walk = [&](std::size_t at, std::size_t t, int left) {
        if (left == 0) {
            if (at == t) {
                found.push_back(path);
            }
            return;
        }
        for (std::size_t w = 0; w < n; ++w) {
            if (w != at && a[at][w] && std::find(path.begin(), path.end(), w) == path.end()) {
                path.push_back(w);
                walk(w, t, left - 1);
                path.pop_back();
            }
        }
    };
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            if (s == t || d[s][t] >= unreachable) {
                continue;
            }
            found.clear();
            path = {s};
            walk(s, t, d[s][t]);
            for (const auto& p : found) {
                for (std::size_t k = 1; k + 1 < p.size(); ++k) {
                    out[p[k]] += 1.0 / static_cast<double>(found.size());
                }
            }
        }
    }
    const double scale = 1.0 / (static_cast<double>(n - 1) * static_cast<double>(n - 2));
    for (auto& v : out) {
        v *= scale;
    }
    return out;
}

/// Triangle count over all neighbor pairs on the loop-free undirected graph.
inline std::vector<double> clustering(const Matrix& sym) {
    const std::size_t n = sym.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t v = 0; v < n; ++v) {
        std::size_t k = 0;
        std::size_t closed = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i == v || !sym[v][i]) {
                continue;
            }
            ++k;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (j != v && sym[v][j] && sym[i][j]) {
                    ++closed;
                }
            }
        }
        if (k >= 2) {
            out[v] = 2.0 * static_cast<double>(closed) / static_cast<double>(k * (k - 1));
        }
    }
    return out;
}

inline bool strongly_connected(const Matrix& a) {
    const auto d = floyd_warshall(a);
    for (const auto& row : d) {
        for (const int v : row) {
            if (v >= unreachable) {
                return false;
            }
        }
    }
    return true;
}

/// Perron vector of the in-neighbor operator x_v = sum_u a[u][v] x_u, unit norm, non-negative.
inline std::vector<double> dominant_eigenvector(const Matrix& a) {
    const auto n = static_cast<Eigen::Index>(a.size());
    Eigen::MatrixXd m(n, n);
    bool symmetric = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            m(i, j) = a[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
            symmetric = symmetric && a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                                         a[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
        }
    }
    Eigen::VectorXd vec;
    if (symmetric) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
        vec = solver.eigenvectors().col(n - 1);
    } else {
        Eigen::EigenSolver<Eigen::MatrixXd> solver(m);
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < n; ++k) {
            if (solver.eigenvalues()(k).real() > solver.eigenvalues()(best).real()) {
                best = k;
            }
        }
        vec = solver.eigenvectors().col(best).real();
    }
    vec /= vec.norm();
    if (vec.sum() < 0) {
        vec = -vec;
    }
    return {vec.data(), vec.data() + n};
}

/// Central differences of a scalar function of a flat parameter vector.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = f(x);
        x[i] = saved - h;
        const double down = f(x);
        x[i] = saved;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-6) {
    double diff = 0.0;
    double scale = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
    }
    return diff / scale;
}

inline double spearman_by_pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace oracle
