#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "guji/common.hpp"

namespace guji::nn {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct TensorImpl;

// Dense float32 tensor handle with a gradient slot, shared-ownership value
// semantics. Ops on tensors record a reverse-mode tape while grad mode is on
// (the default); backward(loss) then fills the grad buffers of every
// reachable tensor that requires one. Calling backward repeatedly without
// zero_grad accumulates gradients.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<float> values,
                              bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int64_t numel() const;
    int64_t dim(size_t i) const { return shape().at(i); }

    std::span<float> values();
    std::span<const float> values() const;
    float item() const; // scalar tensors only

    bool requires_grad() const;
    bool grad_allocated() const;
    std::span<float> grad();             // allocates (zeroed) on first use
    std::span<const float> grad() const; // empty if never allocated
    void zero_grad();

    TensorImpl* impl() const { return impl_.get(); }

  private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
    friend Tensor make_node(Shape shape, std::vector<Tensor> parents,
                            std::function<void(TensorImpl&)> backprop);
};

struct TensorImpl {
    Shape shape;
    std::vector<float> values;
    std::vector<float> grad; // empty until first touched
    bool requires_grad = false;
    bool needs_grad = false; // requires_grad or downstream of such a tensor
    std::vector<Tensor> parents;
    std::function<void(TensorImpl&)> backprop;

    void ensure_grad() {
        if (grad.empty()) grad.assign(values.size(), 0.0f);
    }
};

// True while operations should record the tape (thread-local).
bool grad_enabled();

// RAII guard disabling tape recording, for inference passes.
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// Reverse-mode sweep from a scalar loss. Seeds d(loss)/d(loss) = 1 and runs
// the tape in reverse topological order, accumulating into grad buffers.
void backward(const Tensor& loss);

// --- primitive operations ---------------------------------------------------

// c = a @ b for a [m,k], b [k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
// c = a @ b^T for a [m,k], b [n,k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// Elementwise sum; b may also be a vector broadcast across rows of a.
Tensor add(const Tensor& a, const Tensor& b);
// Elementwise product of same-shape tensors.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);
// 2-D transpose.
Tensor transpose(const Tensor& a);
// rows of `table` selected by ids; backward scatter-adds.
Tensor gather_rows(const Tensor& table, std::vector<int32_t> ids);
// Row-wise softmax / log-softmax over the last dimension. Non-finite inputs
// are a NumericError.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
// Row-wise layer norm over the last dimension with affine gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
Tensor gelu(const Tensor& x);
// Causal multi-head attention; q,k,v are [batch*seq, n_heads*head_dim] and
// `lengths` (optional, per batch row) masks padding keys.
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t batch,
                        int64_t seq, int64_t n_heads, std::vector<int32_t> lengths = {});
// Mean over masked rows of -log softmax(logits)[target]; logits [rows, vocab].
// An all-false mask is a DataError.
Tensor cross_entropy(const Tensor& logits, std::vector<int32_t> targets,
                     std::vector<uint8_t> mask);
Tensor sum(const Tensor& a);

} // namespace guji::nn
