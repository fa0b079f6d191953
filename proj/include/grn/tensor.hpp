#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace grn::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad; ///< empty until touched by backward
    bool requires_grad = false;
    std::uint64_t id = 0;     ///< creation order; parents always have smaller ids
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad() {
        if (grad.empty()) {
            grad.assign(value.size(), 0.0);
        }
    }
};

} // namespace detail

/**
 * Dense row-major float64 array that records how it was computed.
 *
 * A Tensor is a shared handle: copies refer to the same node. Operations on
 * tensors that require gradients append a node carrying its vector-Jacobian
 * rule; backward() replays those rules in reverse creation order. Rows are
 * the first dimension; the remaining dimensions form one row.
 */
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor identity(std::size_t n);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t rows() const { return node_->shape.empty() ? 1 : node_->shape[0]; }
    /// Elements per row (product of the trailing dimensions).
    std::size_t row_size() const;

    std::span<const double> data() const { return node_->value; }
    /// Direct write access, meant for optimizers and initializers only.
    std::span<double> mutable_data() { return node_->value; }
    double item() const;
    double at(std::size_t row, std::size_t col = 0) const { return node_->value[row * row_size() + col]; }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient buffer; all zeros when backward never reached this tensor.
    std::vector<double> grad() const;
    void zero_grad() { node_->grad.clear(); }

    /// Same values, no history.
    Tensor detach() const;

    std::uint64_t tape_id() const { return node_->id; }

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

Tensor matmul(const Tensor& a, const Tensor& b);
/// Same shapes, or b a row vector ([c] or [1, c]) broadcast over the rows of a [r, c].
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise product with the same broadcasting rule as add.
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
/// Stacks tensors along the first dimension; trailing dimensions must agree.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor elu(const Tensor& x, double alpha = 1.0);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> index);
/// out[s] = sum of rows i with segment_ids[i] == s.
Tensor scatter_sum(const Tensor& values, std::span<const std::size_t> segment_ids, std::size_t n_segments);
/// Softmax over the rows sharing a segment id, independently per column.
Tensor segment_softmax(const Tensor& scores, std::span<const std::size_t> segment_ids, std::size_t n_segments);
/// [r, c] -> [r]
Tensor row_sum(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

inline constexpr double bce_clamp = 1e-7;

/**
 * Mean binary cross-entropy; p is clamped to [1e-7, 1 - 1e-7].
 * The gradient is evaluated at the clamped value and passed straight
 * through the clamp, so saturated wrong predictions still get a signal.
 */
Tensor binary_cross_entropy(const Tensor& p, const Tensor& y);

/// Reverse sweep from a scalar; gradients accumulate into every requires_grad node.
void backward(const Tensor& loss);

/// Adam with bias correction.
struct AdamState {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t t = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;

    static AdamState for_params(std::span<const Tensor> params, double lr = 0.01);
};

/// One update from the current gradients, then t += 1. Missing grads count as zero.
void adam_step(std::span<Tensor> params, AdamState& state);

} // namespace grn::ad
