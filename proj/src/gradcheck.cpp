#include "grn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "grn/gat.hpp"
#include "grn/rng.hpp"

namespace grn {

namespace {

using ad::Tensor;

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool avoid_zero = false) {
    std::size_t count = 1;
    for (const auto d : shape) {
        count *= d;
    }
    std::vector<double> values(count);
    for (auto& v : values) {
        do {
            v = rng.uniform(lo, hi);
        } while (avoid_zero && std::abs(v) < 0.05);
    }
    return Tensor::from(std::move(shape), std::move(values), true);
}

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) {
    return lo + static_cast<std::size_t>(rng.below(hi - lo + 1));
}

/// Reduces a tensor to a scalar with fixed random weights so every output element matters.
Tensor project(const Tensor& out, const std::vector<double>& weights) {
    return ad::sum(ad::elementwise_mul(out, Tensor::from(out.shape(), weights)));
}

struct Case {
    std::vector<Tensor> inputs;
    ScalarFunction f;
};

/// Wraps an op whose output gets a random linear projection.
template <typename Op>
Case projected(std::vector<Tensor> inputs, Op op, Rng& rng) {
    const auto probe = op(std::span<const Tensor>(inputs));
    std::vector<double> weights(probe.size());
    for (auto& w : weights) {
        w = rng.uniform(-1.0, 1.0);
    }
    return Case{std::move(inputs),
                [op, weights](std::span<const Tensor> in) { return project(op(in), weights); }};
}

std::vector<std::size_t> random_ids(std::size_t count, std::size_t bound, Rng& rng) {
    std::vector<std::size_t> ids(count);
    for (auto& id : ids) {
        id = static_cast<std::size_t>(rng.below(bound));
    }
    return ids;
}

Case gat_case(Scoring scoring, Rng& rng) {
    const std::size_t n = dim(rng, 3, 5);
    std::vector<EdgePair> edges;
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t t = 0; t < n; ++t) {
            if (s != t && rng.uniform() < 0.4) {
                edges.emplace_back(s, t);
            }
        }
    }
    const auto graph = message_graph(n, edges);
    GatConfig config;
    config.hidden = 3;
    config.heads = 2;
    config.embedding = 4;
    config.scoring = scoring;
    const std::size_t f = 3;
    auto model = GatModel::init(f, config, rng);
    // Nonzero biases so every parameter path is exercised.
    for (auto* layer : {&model.layer1, &model.layer2}) {
        for (auto& v : layer->bias.mutable_data()) {
            v = rng.uniform(-0.5, 0.5);
        }
    }
    std::vector<EdgePair> pairs;
    std::vector<double> labels;
    for (std::size_t k = 0; k < 6; ++k) {
        pairs.emplace_back(static_cast<std::size_t>(rng.below(n)), static_cast<std::size_t>(rng.below(n)));
        labels.push_back(static_cast<double>(rng.below(2)));
    }

    std::vector<Tensor> inputs = model.parameters();
    inputs.push_back(random_tensor({n, f}, rng));
    auto f_loss = [model, graph, pairs, labels](std::span<const Tensor> in) {
        // Parameter tensors are shared handles, so `model` already sees any perturbation.
        const auto enc = encode(model, graph, in.back());
        const auto p = decode(enc.embeddings, pairs);
        return ad::binary_cross_entropy(p, Tensor::from({labels.size()}, labels));
    };
    return Case{std::move(inputs), f_loss};
}

Case make_case(const std::string& op, Rng& rng) {
    const std::size_t r = dim(rng);
    const std::size_t c = dim(rng);
    if (op == "matmul") {
        const std::size_t k = dim(rng);
        return projected({random_tensor({r, k}, rng), random_tensor({k, c}, rng)},
                         [](std::span<const Tensor> in) { return ad::matmul(in[0], in[1]); }, rng);
    }
    if (op == "add") {
        return projected({random_tensor({r, c}, rng), random_tensor({r, c}, rng)},
                         [](std::span<const Tensor> in) { return ad::add(in[0], in[1]); }, rng);
    }
    if (op == "add_row_broadcast") {
        return projected({random_tensor({r, c}, rng), random_tensor({c}, rng)},
                         [](std::span<const Tensor> in) { return ad::add(in[0], in[1]); }, rng);
    }
    if (op == "elementwise_mul") {
        return projected({random_tensor({r, c}, rng), random_tensor({r, c}, rng)},
                         [](std::span<const Tensor> in) { return ad::elementwise_mul(in[0], in[1]); }, rng);
    }
    if (op == "mul_row_broadcast") {
        return projected({random_tensor({r, c}, rng), random_tensor({1, c}, rng)},
                         [](std::span<const Tensor> in) { return ad::elementwise_mul(in[0], in[1]); }, rng);
    }
    if (op == "scale") {
        const double factor = rng.uniform(-2.0, 2.0);
        return projected({random_tensor({r, c}, rng)},
                         [factor](std::span<const Tensor> in) { return ad::scale(in[0], factor); }, rng);
    }
    if (op == "concat_rows") {
        return projected({random_tensor({r, c}, rng), random_tensor({dim(rng), c}, rng)},
                         [](std::span<const Tensor> in) { return ad::concat_rows(in); }, rng);
    }
    if (op == "leaky_relu") {
        return projected({random_tensor({r, c}, rng, -2.0, 2.0, true)},
                         [](std::span<const Tensor> in) { return ad::leaky_relu(in[0], 0.2); }, rng);
    }
    if (op == "elu") {
        return projected({random_tensor({r, c}, rng, -2.0, 2.0, true)},
                         [](std::span<const Tensor> in) { return ad::elu(in[0]); }, rng);
    }
    if (op == "sigmoid") {
        return projected({random_tensor({r, c}, rng, -3.0, 3.0)},
                         [](std::span<const Tensor> in) { return ad::sigmoid(in[0]); }, rng);
    }
    if (op == "exp") {
        return projected({random_tensor({r, c}, rng, -2.0, 2.0)},
                         [](std::span<const Tensor> in) { return ad::exp(in[0]); }, rng);
    }
    if (op == "gather_rows") {
        const auto idx = random_ids(dim(rng, 1, 6), r, rng);
        return projected({random_tensor({r, c}, rng)},
                         [idx](std::span<const Tensor> in) { return ad::gather_rows(in[0], idx); }, rng);
    }
    if (op == "scatter_sum") {
        const std::size_t rows = dim(rng, 1, 6);
        const auto ids = random_ids(rows, r, rng);
        return projected({random_tensor({rows, c}, rng)},
                         [ids, r](std::span<const Tensor> in) { return ad::scatter_sum(in[0], ids, r); }, rng);
    }
    if (op == "segment_softmax") {
        const std::size_t rows = dim(rng, 2, 8);
        const auto ids = random_ids(rows, r, rng);
        return projected({random_tensor({rows, c}, rng, -2.0, 2.0)},
                         [ids, r](std::span<const Tensor> in) { return ad::segment_softmax(in[0], ids, r); }, rng);
    }
    if (op == "row_sum") {
        return projected({random_tensor({r, c}, rng)},
                         [](std::span<const Tensor> in) { return ad::row_sum(in[0]); }, rng);
    }
    if (op == "sum") {
        return Case{{random_tensor({r, c}, rng)}, [](std::span<const Tensor> in) { return ad::sum(in[0]); }};
    }
    if (op == "mean") {
        return Case{{random_tensor({r, c}, rng)}, [](std::span<const Tensor> in) { return ad::mean(in[0]); }};
    }
    if (op == "binary_cross_entropy") {
        std::vector<double> y(r * c);
        for (auto& v : y) {
            v = static_cast<double>(rng.below(2));
        }
        const auto labels = Tensor::from({r, c}, y);
        return Case{{random_tensor({r, c}, rng, 0.05, 0.95)}, [labels](std::span<const Tensor> in) {
                        return ad::binary_cross_entropy(in[0], labels);
                    }};
    }
    if (op == "gat_v1_encode_decode_bce") {
        return gat_case(Scoring::V1, rng);
    }
    return gat_case(Scoring::V2, rng);
}

const std::vector<std::string> operator_suite = {
    "matmul",  "add",         "add_row_broadcast", "elementwise_mul", "mul_row_broadcast",
    "scale",   "concat_rows", "leaky_relu",        "elu",             "sigmoid",
    "exp",     "gather_rows", "scatter_sum",       "segment_softmax", "row_sum",
    "sum",     "mean",        "binary_cross_entropy", "gat_v1_encode_decode_bce", "gat_v2_encode_decode_bce"};

} // namespace

double gradient_error(const ScalarFunction& f, std::span<Tensor> inputs, double step) {
    for (auto& t : inputs) {
        t.zero_grad();
    }
    ad::backward(f(inputs));

    double worst = 0.0;
    for (auto& t : inputs) {
        if (!t.requires_grad()) {
            continue;
        }
        const auto analytic = t.grad();
        auto values = t.mutable_data();
        double diff = 0.0;
        double scale = 1e-6;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double saved = values[i];
            values[i] = saved + step;
            const double up = f(inputs).item();
            values[i] = saved - step;
            const double down = f(inputs).item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            diff = std::max(diff, std::abs(analytic[i] - numeric));
            scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric)});
        }
        worst = std::max(worst, diff / scale);
        t.zero_grad();
    }
    return worst;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options) {
    std::vector<GradcheckResult> results;
    for (std::size_t k = 0; k < operator_suite.size(); ++k) {
        const auto& op = operator_suite[k];
        Rng rng(Rng::derive(options.seed, k + 1));
        GradcheckResult res;
        res.op = op;
        for (std::size_t i = 0; i < options.instances; ++i) {
            auto c = make_case(op, rng);
            res.max_error = std::max(res.max_error, gradient_error(c.f, c.inputs, options.step));
            ++res.instances;
        }
        res.passed = res.max_error < options.tolerance;
        results.push_back(res);
    }
    return results;
}

} // namespace grn
