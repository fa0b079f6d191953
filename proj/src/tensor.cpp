#include "grn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "grn/errors.hpp"

namespace grn::ad {

namespace {

std::atomic<std::uint64_t> next_node_id{1};

std::size_t product(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::shared_ptr<detail::Node> new_node(Shape shape, std::vector<double> value, bool requires_grad) {
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    node->id = next_node_id.fetch_add(1, std::memory_order_relaxed);
    return node;
}

/// Builds an op result; history is only kept when some input needs gradients.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<std::shared_ptr<detail::Node>> parents,
                   std::function<void(detail::Node&)> rule) {
    const bool needs = std::any_of(parents.begin(), parents.end(), [](const auto& p) { return p->requires_grad; });
    auto node = new_node(std::move(shape), std::move(value), needs);
    if (needs) {
        node->parents = std::move(parents);
        node->backward = std::move(rule);
    }
    return Tensor(std::move(node));
}

/// Adds `contribution` into a parent's gradient when that parent wants one.
template <typename F>
void accumulate(const std::shared_ptr<detail::Node>& parent, F&& contribution) {
    if (!parent->requires_grad) {
        return;
    }
    parent->ensure_grad();
    contribution(parent->grad);
}

std::size_t trailing(const Shape& shape) {
    if (shape.empty()) {
        return 1;
    }
    return product(Shape(shape.begin() + 1, shape.end()));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) {
        throw DomainError(std::string(op) + ": undefined tensor");
    }
}

enum class Broadcast { Same, Rows };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() == b.shape()) {
        return Broadcast::Same;
    }
    if (a.rank() == 2) {
        const auto cols = a.shape()[1];
        const bool row_vector = (b.rank() == 1 && b.shape()[0] == cols) ||
                                (b.rank() == 2 && b.shape()[0] == 1 && b.shape()[1] == cols);
        if (row_vector) {
            return Broadcast::Rows;
        }
    }
    throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
}

template <typename Forward, typename Backward>
Tensor unary(const Tensor& x, const char* op, Forward f, Backward df) {
    require_defined(x, op);
    const auto xn = x.node();
    std::vector<double> out(xn->value.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = f(xn->value[i]);
    }
    return make_result(xn->shape, std::move(out), {xn}, [xn, df](detail::Node& self) {
        accumulate(xn, [&](std::vector<double>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * df(xn->value[i], self.value[i]);
            }
        });
    });
}

void check_segments(std::span<const std::size_t> ids, std::size_t n_segments, const char* op) {
    for (const auto id : ids) {
        if (id >= n_segments) {
            throw IndexError(std::string(op) + ": segment id " + std::to_string(id) + " outside [0, " +
                             std::to_string(n_segments) + ")");
        }
    }
}

} // namespace

std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        s += (i ? ", " : "") + std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    const auto n = product(shape);
    return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (product(shape) != values.size()) {
        throw ShapeError("shape " + shape_string(shape) + " does not hold " + std::to_string(values.size()) +
                         " values");
    }
    return Tensor(new_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

Tensor Tensor::identity(std::size_t n) {
    std::vector<double> values(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        values[i * n + i] = 1.0;
    }
    return from({n, n}, std::move(values));
}

std::size_t Tensor::row_size() const { return trailing(node_->shape); }

double Tensor::item() const {
    if (size() != 1) {
        throw ShapeError("item() on tensor of shape " + shape_string(shape()));
    }
    return node_->value[0];
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) {
        return std::vector<double>(node_->value.size(), 0.0);
    }
    return node_->grad;
}

Tensor Tensor::detach() const { return Tensor(new_node(node_->shape, node_->value, false)); }

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
    }
    const std::size_t m = a.shape()[0];
    const std::size_t k = a.shape()[1];
    const std::size_t n = b.shape()[1];
    const auto an = a.node();
    const auto bn = b.node();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = an->value[i * k + p];
            if (aip == 0.0) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                out[i * n + j] += aip * bn->value[p * n + j];
            }
        }
    }
    return make_result({m, n}, std::move(out), {an, bn}, [an, bn, m, k, n](detail::Node& self) {
        const auto& g = self.grad;
        accumulate(an, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) {
                        acc += g[i * n + j] * bn->value[p * n + j];
                    }
                    ga[i * k + p] += acc;
                }
            }
        });
        accumulate(bn, [&](std::vector<double>& gb) {
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = an->value[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) {
                        gb[p * n + j] += aip * g[i * n + j];
                    }
                }
            }
        });
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_defined(a, "add");
    require_defined(b, "add");
    const auto kind = broadcast_kind(a, b, "add");
    const auto an = a.node();
    const auto bn = b.node();
    const std::size_t width = kind == Broadcast::Rows ? b.size() : a.size();
    std::vector<double> out(an->value.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = an->value[i] + bn->value[i % width];
    }
    return make_result(an->shape, std::move(out), {an, bn}, [an, bn, width](detail::Node& self) {
        accumulate(an, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += self.grad[i];
            }
        });
        accumulate(bn, [&](std::vector<double>& gb) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                gb[i % width] += self.grad[i];
            }
        });
    });
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
    require_defined(a, "elementwise_mul");
    require_defined(b, "elementwise_mul");
    const auto kind = broadcast_kind(a, b, "elementwise_mul");
    const auto an = a.node();
    const auto bn = b.node();
    const std::size_t width = kind == Broadcast::Rows ? b.size() : a.size();
    std::vector<double> out(an->value.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = an->value[i] * bn->value[i % width];
    }
    return make_result(an->shape, std::move(out), {an, bn}, [an, bn, width](detail::Node& self) {
        accumulate(an, [&](std::vector<double>& ga) {
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += self.grad[i] * bn->value[i % width];
            }
        });
        accumulate(bn, [&](std::vector<double>& gb) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                gb[i % width] += self.grad[i] * an->value[i];
            }
        });
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary(
        a, "scale", [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) {
        throw DomainError("concat_rows: no inputs");
    }
    for (const auto& p : parts) {
        require_defined(p, "concat_rows");
    }
    const Shape& first = parts.front().shape();
    if (first.empty()) {
        throw ShapeError("concat_rows: scalar input");
    }
    std::size_t rows = 0;
    std::vector<std::shared_ptr<detail::Node>> nodes;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size() || !std::equal(s.begin() + 1, s.end(), first.begin() + 1)) {
            throw ShapeError("concat_rows: incompatible shapes " + shape_string(first) + " and " + shape_string(s));
        }
        rows += s[0];
        nodes.push_back(p.node());
    }
    Shape shape = first;
    shape[0] = rows;
    std::vector<double> out;
    out.reserve(product(shape));
    for (const auto& n : nodes) {
        out.insert(out.end(), n->value.begin(), n->value.end());
    }
    auto parents = nodes;
    return make_result(std::move(shape), std::move(out), std::move(parents), [nodes](detail::Node& self) {
        std::size_t offset = 0;
        for (const auto& n : nodes) {
            accumulate(n, [&](std::vector<double>& g) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[offset + i];
                }
            });
            offset += n->value.size();
        }
    });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary(
        x, "leaky_relu", [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor elu(const Tensor& x, double alpha) {
    return unary(
        x, "elu", [alpha](double v) { return v > 0.0 ? v : alpha * std::expm1(v); },
        [alpha](double v, double) { return v > 0.0 ? 1.0 : alpha * std::exp(v); });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, "sigmoid",
        [](double v) {
            if (v >= 0.0) {
                return 1.0 / (1.0 + std::exp(-v));
            }
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
    return unary(
        x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> index) {
    require_defined(t, "gather_rows");
    if (t.rank() == 0) {
        throw ShapeError("gather_rows: scalar input");
    }
    const std::size_t rows = t.shape()[0];
    const std::size_t width = t.row_size();
    for (const auto i : index) {
        if (i >= rows) {
            throw IndexError("gather_rows: row " + std::to_string(i) + " outside [0, " + std::to_string(rows) + ")");
        }
    }
    const auto tn = t.node();
    Shape shape = tn->shape;
    shape[0] = index.size();
    std::vector<double> out(index.size() * width);
    for (std::size_t r = 0; r < index.size(); ++r) {
        std::copy_n(tn->value.begin() + static_cast<std::ptrdiff_t>(index[r] * width), width,
                    out.begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    std::vector<std::size_t> idx(index.begin(), index.end());
    return make_result(std::move(shape), std::move(out), {tn}, [tn, idx = std::move(idx), width](detail::Node& self) {
        accumulate(tn, [&](std::vector<double>& g) {
            for (std::size_t r = 0; r < idx.size(); ++r) {
                for (std::size_t c = 0; c < width; ++c) {
                    g[idx[r] * width + c] += self.grad[r * width + c];
                }
            }
        });
    });
}

Tensor scatter_sum(const Tensor& values, std::span<const std::size_t> segment_ids, std::size_t n_segments) {
    require_defined(values, "scatter_sum");
    if (values.rank() == 0 || values.shape()[0] != segment_ids.size()) {
        throw ShapeError("scatter_sum: " + std::to_string(segment_ids.size()) + " segment ids for values of shape " +
                         shape_string(values.shape()));
    }
    check_segments(segment_ids, n_segments, "scatter_sum");
    const std::size_t width = values.row_size();
    const auto vn = values.node();
    Shape shape = vn->shape;
    shape[0] = n_segments;
    std::vector<double> out(n_segments * width, 0.0);
    for (std::size_t r = 0; r < segment_ids.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            out[segment_ids[r] * width + c] += vn->value[r * width + c];
        }
    }
    std::vector<std::size_t> ids(segment_ids.begin(), segment_ids.end());
    return make_result(std::move(shape), std::move(out), {vn}, [vn, ids = std::move(ids), width](detail::Node& self) {
        accumulate(vn, [&](std::vector<double>& g) {
            for (std::size_t r = 0; r < ids.size(); ++r) {
                for (std::size_t c = 0; c < width; ++c) {
                    g[r * width + c] += self.grad[ids[r] * width + c];
                }
            }
        });
    });
}

Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> segment_ids, std::size_t n_segments) {
    require_defined(scores, "segment_softmax");
    if (scores.size() == 0) {
        throw DomainError("segment_softmax: empty score tensor");
    }
    if (scores.rank() == 0 || scores.rank() > 2 || scores.shape()[0] != segment_ids.size()) {
        throw ShapeError("segment_softmax: " + std::to_string(segment_ids.size()) +
                         " segment ids for scores of shape " + shape_string(scores.shape()));
    }
    check_segments(segment_ids, n_segments, "segment_softmax");
    const std::size_t rows = segment_ids.size();
    const std::size_t cols = scores.row_size();
    const auto sn = scores.node();

    std::vector<double> seg_max(n_segments * cols, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            auto& m = seg_max[segment_ids[r] * cols + c];
            m = std::max(m, sn->value[r * cols + c]);
        }
    }
    std::vector<double> out(rows * cols);
    std::vector<double> seg_sum(n_segments * cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const auto s = segment_ids[r] * cols + c;
            out[r * cols + c] = std::exp(sn->value[r * cols + c] - seg_max[s]);
            seg_sum[s] += out[r * cols + c];
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out[r * cols + c] /= seg_sum[segment_ids[r] * cols + c];
        }
    }

    std::vector<std::size_t> ids(segment_ids.begin(), segment_ids.end());
    return make_result(sn->shape, std::move(out), {sn},
                       [sn, ids = std::move(ids), n_segments, cols](detail::Node& self) {
                           // dx = y * (g - sum_segment(y * g))
                           std::vector<double> dot(n_segments * cols, 0.0);
                           for (std::size_t r = 0; r < ids.size(); ++r) {
                               for (std::size_t c = 0; c < cols; ++c) {
                                   dot[ids[r] * cols + c] += self.value[r * cols + c] * self.grad[r * cols + c];
                               }
                           }
                           accumulate(sn, [&](std::vector<double>& g) {
                               for (std::size_t r = 0; r < ids.size(); ++r) {
                                   for (std::size_t c = 0; c < cols; ++c) {
                                       const auto i = r * cols + c;
                                       g[i] += self.value[i] * (self.grad[i] - dot[ids[r] * cols + c]);
                                   }
                               }
                           });
                       });
}

Tensor row_sum(const Tensor& x) {
    require_defined(x, "row_sum");
    if (x.rank() == 0) {
        throw ShapeError("row_sum: scalar input");
    }
    const std::size_t rows = x.shape()[0];
    const std::size_t width = x.row_size();
    const auto xn = x.node();
    std::vector<double> out(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            out[r] += xn->value[r * width + c];
        }
    }
    return make_result({rows}, std::move(out), {xn}, [xn, width](detail::Node& self) {
        accumulate(xn, [&](std::vector<double>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i / width];
            }
        });
    });
}

Tensor sum(const Tensor& x) {
    require_defined(x, "sum");
    const auto xn = x.node();
    const double total = std::accumulate(xn->value.begin(), xn->value.end(), 0.0);
    return make_result({}, {total}, {xn}, [xn](detail::Node& self) {
        accumulate(xn, [&](std::vector<double>& g) {
            for (auto& v : g) {
                v += self.grad[0];
            }
        });
    });
}

Tensor mean(const Tensor& x) {
    require_defined(x, "mean");
    if (x.size() == 0) {
        throw DomainError("mean of an empty tensor");
    }
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor binary_cross_entropy(const Tensor& p, const Tensor& y) {
    require_defined(p, "binary_cross_entropy");
    require_defined(y, "binary_cross_entropy");
    if (p.shape() != y.shape()) {
        throw ShapeError("binary_cross_entropy: incompatible shapes " + shape_string(p.shape()) + " and " +
                         shape_string(y.shape()));
    }
    if (p.size() == 0) {
        throw DomainError("binary_cross_entropy: empty batch");
    }
    const auto pn = p.node();
    const auto yn = y.node();
    const double n = static_cast<double>(p.size());
    double total = 0.0;
    for (std::size_t i = 0; i < pn->value.size(); ++i) {
        const double pc = std::clamp(pn->value[i], bce_clamp, 1.0 - bce_clamp);
        const double t = yn->value[i];
        total -= t * std::log(pc) + (1.0 - t) * std::log1p(-pc);
    }
    return make_result({}, {total / n}, {pn, yn}, [pn, yn, n](detail::Node& self) {
        accumulate(pn, [&](std::vector<double>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double pc = std::clamp(pn->value[i], bce_clamp, 1.0 - bce_clamp);
                g[i] += self.grad[0] * (pc - yn->value[i]) / (pc * (1.0 - pc)) / n;
            }
        });
        accumulate(yn, [&](std::vector<double>& g) {
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double pc = std::clamp(pn->value[i], bce_clamp, 1.0 - bce_clamp);
                g[i] += self.grad[0] * (std::log1p(-pc) - std::log(pc)) / n;
            }
        });
    });
}

void backward(const Tensor& loss) {
    require_defined(loss, "backward");
    if (loss.size() != 1) {
        throw DomainError("backward needs a scalar loss, got shape " + shape_string(loss.shape()));
    }
    const auto& root = loss.node();
    if (!root->requires_grad) {
        return;
    }

    std::vector<detail::Node*> nodes;
    std::vector<detail::Node*> stack{root.get()};
    std::unordered_set<const detail::Node*> seen;
    while (!stack.empty()) {
        auto* node = stack.back();
        stack.pop_back();
        if (!seen.insert(node).second) {
            continue;
        }
        nodes.push_back(node);
        for (const auto& p : node->parents) {
            if (p->requires_grad) {
                stack.push_back(p.get());
            }
        }
    }
    // Parents are created before children, so descending id is a reverse topological order.
    std::sort(nodes.begin(), nodes.end(), [](const auto* a, const auto* b) { return a->id > b->id; });

    root->ensure_grad();
    root->grad[0] += 1.0;
    for (auto* node : nodes) {
        if (node->backward && !node->grad.empty()) {
            node->backward(*node);
        }
    }
}

AdamState AdamState::for_params(std::span<const Tensor> params, double lr) {
    AdamState state;
    state.lr = lr;
    for (const auto& p : params) {
        state.m.emplace_back(p.size(), 0.0);
        state.v.emplace_back(p.size(), 0.0);
    }
    return state;
}

void adam_step(std::span<Tensor> params, AdamState& state) {
    if (params.size() != state.m.size()) {
        throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) + " parameters, got " +
                         std::to_string(params.size()));
    }
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double correct1 = 1.0 - std::pow(state.beta1, t);
    const double correct2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        if (p.size() != state.m[k].size()) {
            throw ShapeError("adam_step: parameter " + std::to_string(k) + " changed shape");
        }
        const auto& g = p.node()->grad;
        auto values = p.mutable_data();
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double gi = g.empty() ? 0.0 : g[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
            const double m_hat = m[i] / correct1;
            const double v_hat = v[i] / correct2;
            values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

} // namespace grn::ad
