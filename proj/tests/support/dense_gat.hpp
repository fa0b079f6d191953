#pragma once

// Plain-loop GAT forward pass over a dense adjacency, for comparison with the
// sparse tape implementation.

#include <cmath>
#include <limits>
#include <vector>

#include "grn/gat.hpp"

namespace oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense dense(const grn::ad::Tensor& t) {
    const std::size_t r = t.shape()[0];
    const std::size_t c = t.size() / r;
    Dense out(r, std::vector<double>(c));
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[i][j] = t.data()[i * c + j];
        }
    }
    return out;
}

inline Dense multiply(const Dense& a, const Dense& b) {
    Dense out(a.size(), std::vector<double>(b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t k = 0; k < b.size(); ++k) {
            for (std::size_t j = 0; j < b[0].size(); ++j) {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    return out;
}

inline double lrelu(double x, double slope) { return x > 0 ? x : slope * x; }

struct DenseLayer {
    Dense out;
    /// alpha[h][s][t], zero where s -> t is not a message edge
    std::vector<Dense> alpha;
};

/// `adj[s][t]` marks message edges s -> t (self-loops expected to be set).
inline DenseLayer dense_layer(const grn::GatLayerParams& p, const Dense& h, const std::vector<std::vector<int>>& adj,
                              bool elu) {
    const std::size_t n = h.size();
    const std::size_t H = p.heads;
    const std::size_t C = p.out_dim;
    const auto xt = multiply(h, dense(p.w_target));
    const auto xs = multiply(h, dense(p.w_source));
    const auto a = p.attention.data();

    DenseLayer res;
    res.alpha.assign(H, Dense(n, std::vector<double>(n, 0.0)));
    Dense concat(n, std::vector<double>(H * C, 0.0));
    for (std::size_t hd = 0; hd < H; ++hd) {
        for (std::size_t t = 0; t < n; ++t) {
            std::vector<double> e(n, -std::numeric_limits<double>::infinity());
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t s = 0; s < n; ++s) {
                if (!adj[s][t]) {
                    continue;
                }
                double score = 0.0;
                if (p.scoring == grn::Scoring::V2) {
                    for (std::size_t c = 0; c < C; ++c) {
                        const std::size_t j = hd * C + c;
                        score += a[j] * lrelu(xt[t][j] + xs[s][j], p.negative_slope);
                    }
                } else {
                    for (std::size_t c = 0; c < C; ++c) {
                        const std::size_t j = hd * C + c;
                        score += a[j] * xt[t][j] + a[H * C + j] * xs[s][j];
                    }
                    score = lrelu(score, p.negative_slope);
                }
                e[s] = score;
                top = std::max(top, score);
            }
            double total = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                if (adj[s][t]) {
                    total += std::exp(e[s] - top);
                }
            }
            for (std::size_t s = 0; s < n; ++s) {
                if (!adj[s][t]) {
                    continue;
                }
                const double w = std::exp(e[s] - top) / total;
                res.alpha[hd][s][t] = w;
                for (std::size_t c = 0; c < C; ++c) {
                    concat[t][hd * C + c] += w * xs[s][hd * C + c];
                }
            }
        }
    }
    const auto bias = p.bias.data();
    res.out.assign(n, std::vector<double>(p.output_dim(), 0.0));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < p.output_dim(); ++j) {
            double v = 0.0;
            if (p.concat) {
                v = concat[t][j];
            } else {
                for (std::size_t hd = 0; hd < H; ++hd) {
                    v += concat[t][hd * C + j] / static_cast<double>(H);
                }
            }
            v += bias[j];
            res.out[t][j] = elu && v < 0 ? std::exp(v) - 1.0 : v;
        }
    }
    return res;
}

struct DenseEncoding {
    Dense z;
    std::vector<DenseLayer> layers;
};

inline DenseEncoding dense_encode(const grn::GatModel& m, const Dense& x, const std::vector<std::vector<int>>& adj) {
    DenseEncoding enc;
    enc.layers.push_back(dense_layer(m.layer1, x, adj, true));
    enc.layers.push_back(dense_layer(m.layer2, enc.layers[0].out, adj, false));
    enc.z = enc.layers[1].out;
    return enc;
}

} // namespace oracle
