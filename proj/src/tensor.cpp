#include "guji/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "guji/kernels.hpp"

namespace guji::nn {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

namespace {

thread_local bool g_grad_enabled = true;

void check_2d(const Tensor& t, const char* op) {
    if (t.shape().size() != 2)
        throw ConfigError(std::string(op) + ": expected a 2-D tensor, got " +
                          shape_str(t.shape()));
}

} // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->values.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    impl->needs_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_values(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != static_cast<int64_t>(values.size()))
        throw ConfigError("from_values: " + std::to_string(values.size()) +
                          " values do not fill shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->values = std::move(values);
    impl->requires_grad = requires_grad;
    impl->needs_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
int64_t Tensor::numel() const { return static_cast<int64_t>(impl_->values.size()); }
std::span<float> Tensor::values() { return impl_->values; }
std::span<const float> Tensor::values() const { return impl_->values; }

float Tensor::item() const {
    if (numel() != 1) throw ConfigError("item: tensor is not a scalar");
    return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
bool Tensor::grad_allocated() const { return !impl_->grad.empty(); }

std::span<float> Tensor::grad() {
    impl_->ensure_grad();
    return impl_->grad;
}

std::span<const float> Tensor::grad() const { return impl_->grad; }

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

// Builds a graph node. Records parents/backprop only when grad mode is on and
// some parent participates in differentiation.
Tensor make_node(Shape shape, std::vector<Tensor> parents,
                 std::function<void(TensorImpl&)> backprop) {
    auto impl = std::make_shared<TensorImpl>();
    impl->values.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
    impl->shape = std::move(shape);
    bool needs = false;
    if (grad_enabled()) {
        for (const Tensor& p : parents) needs = needs || p.impl()->needs_grad;
    }
    if (needs) {
        impl->needs_grad = true;
        impl->parents = std::move(parents);
        impl->backprop = std::move(backprop);
    }
    return Tensor(std::move(impl));
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1)
        throw ConfigError("backward: loss must be a defined scalar tensor");

    // Iterative DFS, post-order. State 1 = on stack (cycle sentinel), 2 = done.
    std::vector<TensorImpl*> order;
    std::unordered_map<TensorImpl*, int> state;
    std::vector<std::pair<TensorImpl*, size_t>> stack;
    stack.emplace_back(loss.impl(), 0);
    state[loss.impl()] = 1;
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorImpl* p = node->parents[next].impl();
            ++next;
            auto it = state.find(p);
            if (it == state.end()) {
                state[p] = 1;
                stack.emplace_back(p, 0);
            } else if (it->second == 1) {
                throw std::logic_error("backward: cycle in autodiff graph");
            }
        } else {
            state[node] = 2;
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.impl()->ensure_grad();
    loss.impl()->grad[0] += 1.0f;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        if (node->backprop && node->needs_grad && !node->grad.empty()) node->backprop(*node);
    }
}

// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul");
    check_2d(b, "matmul");
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw ConfigError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
    Tensor out = make_node({m, n}, {a, b}, [a, b, m, k, n](TensorImpl& node) {
        Tensor ta = a, tb = b;
        if (ta.impl()->needs_grad) {
            ta.impl()->ensure_grad();
            kernels::matmul_nt(node.grad.data(), tb.values().data(), ta.impl()->grad.data(), m,
                               n, k, true);
        }
        if (tb.impl()->needs_grad) {
            tb.impl()->ensure_grad();
            kernels::matmul_tn(ta.values().data(), node.grad.data(), tb.impl()->grad.data(), k,
                               m, n, true);
        }
    });
    kernels::matmul(a.values().data(), b.values().data(), out.values().data(), m, k, n, false);
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_2d(a, "matmul_nt");
    check_2d(b, "matmul_nt");
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    if (b.dim(1) != k)
        throw ConfigError("matmul_nt: inner dimensions disagree, " + shape_str(a.shape()) +
                          " vs " + shape_str(b.shape()));
    Tensor out = make_node({m, n}, {a, b}, [a, b, m, k, n](TensorImpl& node) {
        Tensor ta = a, tb = b;
        if (ta.impl()->needs_grad) {
            ta.impl()->ensure_grad();
            // da = dc @ b  ([m,n] @ [n,k])
            kernels::matmul(node.grad.data(), tb.values().data(), ta.impl()->grad.data(), m, n,
                            k, true);
        }
        if (tb.impl()->needs_grad) {
            tb.impl()->ensure_grad();
            // db = dc^T @ a ([n,m] @ [m,k])
            kernels::matmul_tn(node.grad.data(), ta.values().data(), tb.impl()->grad.data(), n,
                               m, k, true);
        }
    });
    kernels::matmul_nt(a.values().data(), b.values().data(), out.values().data(), m, k, n,
                       false);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    const bool broadcast = a.shape() != b.shape();
    int64_t rows = 1, cols = b.numel();
    if (broadcast) {
        if (a.shape().empty() || a.shape().back() != b.numel() || b.shape().size() != 1)
            throw ConfigError("add: shapes " + shape_str(a.shape()) + " and " +
                              shape_str(b.shape()) + " are not addable");
        cols = b.numel();
        rows = a.numel() / cols;
    }
    Tensor out = make_node(a.shape(), {a, b}, [a, b, broadcast, rows, cols](TensorImpl& node) {
        Tensor ta = a, tb = b;
        if (ta.impl()->needs_grad) {
            ta.impl()->ensure_grad();
            auto g = ta.impl()->grad.data();
            for (size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
        }
        if (tb.impl()->needs_grad) {
            tb.impl()->ensure_grad();
            auto g = tb.impl()->grad.data();
            if (!broadcast) {
                for (size_t i = 0; i < node.grad.size(); ++i) g[i] += node.grad[i];
            } else {
                for (int64_t j = 0; j < cols; ++j) {
                    double acc = 0.0;
                    for (int64_t r = 0; r < rows; ++r)
                        acc += static_cast<double>(node.grad[static_cast<size_t>(r * cols + j)]);
                    g[j] += static_cast<float>(acc);
                }
            }
        }
    });
    auto av = a.values();
    auto bv = b.values();
    auto ov = out.values();
    if (!broadcast) {
        for (size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    } else {
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < cols; ++j)
                ov[static_cast<size_t>(r * cols + j)] =
                    av[static_cast<size_t>(r * cols + j)] + bv[static_cast<size_t>(j)];
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ConfigError("mul: shapes disagree, " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    Tensor out = make_node(a.shape(), {a, b}, [a, b](TensorImpl& node) {
        Tensor ta = a, tb = b;
        if (ta.impl()->needs_grad) {
            ta.impl()->ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i)
                ta.impl()->grad[i] += node.grad[i] * tb.values()[i];
        }
        if (tb.impl()->needs_grad) {
            tb.impl()->ensure_grad();
            for (size_t i = 0; i < node.grad.size(); ++i)
                tb.impl()->grad[i] += node.grad[i] * ta.values()[i];
        }
    });
    for (size_t i = 0; i < out.values().size(); ++i)
        out.values()[i] = a.values()[i] * b.values()[i];
    return out;
}

Tensor scale(const Tensor& a, float s) {
    Tensor out = make_node(a.shape(), {a}, [a, s](TensorImpl& node) {
        Tensor ta = a;
        if (!ta.impl()->needs_grad) return;
        ta.impl()->ensure_grad();
        for (size_t i = 0; i < node.grad.size(); ++i) ta.impl()->grad[i] += node.grad[i] * s;
    });
    for (size_t i = 0; i < out.values().size(); ++i) out.values()[i] = a.values()[i] * s;
    return out;
}

Tensor transpose(const Tensor& a) {
    check_2d(a, "transpose");
    const int64_t m = a.dim(0), n = a.dim(1);
    Tensor out = make_node({n, m}, {a}, [a, m, n](TensorImpl& node) {
        Tensor ta = a;
        if (!ta.impl()->needs_grad) return;
        ta.impl()->ensure_grad();
        for (int64_t i = 0; i < m; ++i)
            for (int64_t j = 0; j < n; ++j)
                ta.impl()->grad[static_cast<size_t>(i * n + j)] +=
                    node.grad[static_cast<size_t>(j * m + i)];
    });
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j)
            out.values()[static_cast<size_t>(j * m + i)] =
                a.values()[static_cast<size_t>(i * n + j)];
    return out;
}

Tensor gather_rows(const Tensor& table, std::vector<int32_t> ids) {
    check_2d(table, "gather_rows");
    const int64_t rows = table.dim(0), cols = table.dim(1);
    for (int32_t id : ids)
        if (id < 0 || id >= rows)
            throw DataError("gather_rows: id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(rows) + ")");
    const int64_t n = static_cast<int64_t>(ids.size());
    auto shared_ids = std::make_shared<std::vector<int32_t>>(std::move(ids));
    Tensor out =
        make_node({n, cols}, {table}, [table, shared_ids, n, cols](TensorImpl& node) {
            Tensor t = table;
            if (!t.impl()->needs_grad) return;
            t.impl()->ensure_grad();
            kernels::scatter_add_rows(shared_ids->data(), node.grad.data(),
                                      t.impl()->grad.data(), n, cols);
        });
    kernels::gather_rows(table.values().data(), shared_ids->data(), out.values().data(), n,
                         cols);
    return out;
}

namespace {

void check_finite(const Tensor& t, const char* op) {
    for (float v : t.values())
        if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
}

std::pair<int64_t, int64_t> rows_cols(const Tensor& t) {
    if (t.shape().empty()) throw ConfigError("expected a non-scalar tensor");
    int64_t cols = t.shape().back();
    return {t.numel() / cols, cols};
}

} // namespace

Tensor softmax(const Tensor& a) {
    check_finite(a, "softmax");
    auto [rows, cols] = rows_cols(a);
    Tensor out = make_node(a.shape(), {a}, [a, rows, cols](TensorImpl& node) {
        Tensor ta = a;
        if (!ta.impl()->needs_grad) return;
        ta.impl()->ensure_grad();
        kernels::softmax_rows_backward(node.values.data(), node.grad.data(),
                                       ta.impl()->grad.data(), rows, cols);
    });
    kernels::softmax_rows(a.values().data(), out.values().data(), rows, cols);
    return out;
}

Tensor log_softmax(const Tensor& a) {
    check_finite(a, "log_softmax");
    auto [rows, cols] = rows_cols(a);
    Tensor out = make_node(a.shape(), {a}, [a, rows, cols](TensorImpl& node) {
        Tensor ta = a;
        if (!ta.impl()->needs_grad) return;
        ta.impl()->ensure_grad();
        kernels::log_softmax_rows_backward(node.values.data(), node.grad.data(),
                                           ta.impl()->grad.data(), rows, cols);
    });
    kernels::log_softmax_rows(a.values().data(), out.values().data(), rows, cols);
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    auto [rows, cols] = rows_cols(x);
    if (gain.numel() != cols || bias.numel() != cols)
        throw ConfigError("layer_norm: gain/bias must have " + std::to_string(cols) +
                          " elements");
    auto mean = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    auto rstd = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
    Tensor out =
        make_node(x.shape(), {x, gain, bias}, [x, gain, bias, mean, rstd, rows, cols](
                                                  TensorImpl& node) {
            Tensor tx = x, tg = gain, tb = bias;
            // dgain/dbias accumulate even when only x needs grad; the kernels
            // write all three, so route through scratch when a side is frozen.
            std::vector<float> scratch_dx, scratch_dg, scratch_db;
            float* dx = nullptr;
            float* dg = nullptr;
            float* db = nullptr;
            if (tx.impl()->needs_grad) {
                tx.impl()->ensure_grad();
                dx = tx.impl()->grad.data();
            } else {
                scratch_dx.assign(tx.values().size(), 0.0f);
                dx = scratch_dx.data();
            }
            if (tg.impl()->needs_grad) {
                tg.impl()->ensure_grad();
                dg = tg.impl()->grad.data();
            } else {
                scratch_dg.assign(static_cast<size_t>(cols), 0.0f);
                dg = scratch_dg.data();
            }
            if (tb.impl()->needs_grad) {
                tb.impl()->ensure_grad();
                db = tb.impl()->grad.data();
            } else {
                scratch_db.assign(static_cast<size_t>(cols), 0.0f);
                db = scratch_db.data();
            }
            kernels::layer_norm_backward(tx.values().data(), tg.values().data(), mean->data(),
                                         rstd->data(), node.grad.data(), dx, dg, db, rows,
                                         cols);
        });
    kernels::layer_norm_forward(x.values().data(), gain.values().data(), bias.values().data(),
                                out.values().data(), mean->data(), rstd->data(), rows, cols,
                                eps);
    return out;
}

Tensor gelu(const Tensor& x) {
    Tensor out = make_node(x.shape(), {x}, [x](TensorImpl& node) {
        Tensor tx = x;
        if (!tx.impl()->needs_grad) return;
        tx.impl()->ensure_grad();
        kernels::gelu_backward(tx.values().data(), node.grad.data(), tx.impl()->grad.data(),
                               static_cast<int64_t>(node.values.size()));
    });
    kernels::gelu_forward(x.values().data(), out.values().data(), x.numel());
    return out;
}

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, int64_t batch,
                        int64_t seq, int64_t n_heads, std::vector<int32_t> lengths) {
    check_2d(q, "causal_attention");
    const int64_t channels = q.dim(1);
    if (q.shape() != k.shape() || q.shape() != v.shape())
        throw ConfigError("causal_attention: q/k/v shapes disagree");
    if (q.dim(0) != batch * seq)
        throw ConfigError("causal_attention: expected " + std::to_string(batch * seq) +
                          " rows, got " + std::to_string(q.dim(0)));
    if (channels % n_heads != 0)
        throw ConfigError("causal_attention: channels not divisible by heads");
    if (!lengths.empty()) {
        if (static_cast<int64_t>(lengths.size()) != batch)
            throw ConfigError("causal_attention: lengths size must equal batch");
        for (int32_t len : lengths)
            if (len < 1 || len > seq)
                throw ConfigError("causal_attention: row length out of range");
    }
    const int64_t head_dim = channels / n_heads;
    auto att = std::make_shared<std::vector<float>>(
        static_cast<size_t>(batch * n_heads * seq * seq));
    auto shared_len = std::make_shared<std::vector<int32_t>>(std::move(lengths));

    Tensor out = make_node(q.shape(), {q, k, v},
                           [q, k, v, att, shared_len, batch, seq, n_heads, head_dim](
                               TensorImpl& node) {
                               Tensor tq = q, tk = k, tv = v;
                               // attention couples q/k/v; gradients for all three
                               // are produced in one sweep.
                               tq.impl()->ensure_grad();
                               tk.impl()->ensure_grad();
                               tv.impl()->ensure_grad();
                               kernels::attention_backward(
                                   tq.values().data(), tk.values().data(), tv.values().data(),
                                   att->data(), node.grad.data(), tq.impl()->grad.data(),
                                   tk.impl()->grad.data(), tv.impl()->grad.data(), batch, seq,
                                   n_heads, head_dim,
                                   shared_len->empty() ? nullptr : shared_len->data());
                           });
    kernels::attention_forward(q.values().data(), k.values().data(), v.values().data(),
                               att->data(), out.values().data(), batch, seq, n_heads, head_dim,
                               shared_len->empty() ? nullptr : shared_len->data());
    return out;
}

Tensor cross_entropy(const Tensor& logits, std::vector<int32_t> targets,
                     std::vector<uint8_t> mask) {
    check_2d(logits, "cross_entropy");
    const int64_t rows = logits.dim(0), cols = logits.dim(1);
    if (static_cast<int64_t>(targets.size()) != rows ||
        static_cast<int64_t>(mask.size()) != rows)
        throw ConfigError("cross_entropy: targets/mask must have one entry per row");
    int64_t count = 0;
    for (int64_t r = 0; r < rows; ++r) {
        if (!mask[static_cast<size_t>(r)]) continue;
        ++count;
        int32_t t = targets[static_cast<size_t>(r)];
        if (t < 0 || t >= cols)
            throw DataError("cross_entropy: target id " + std::to_string(t) +
                            " out of range at row " + std::to_string(r));
    }
    if (count == 0) throw DataError("cross_entropy: mask selects no positions");

    auto shared_targets = std::make_shared<std::vector<int32_t>>(std::move(targets));
    auto shared_mask = std::make_shared<std::vector<uint8_t>>(std::move(mask));
    auto lse = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));

    Tensor out = make_node(
        {1}, {logits},
        [logits, shared_targets, shared_mask, lse, rows, cols, count](TensorImpl& node) {
            Tensor tl = logits;
            if (!tl.impl()->needs_grad) return;
            tl.impl()->ensure_grad();
            float dscale = node.grad[0] / static_cast<float>(count);
            kernels::cross_entropy_backward(tl.values().data(), shared_targets->data(),
                                            shared_mask->data(), lse->data(), dscale,
                                            tl.impl()->grad.data(), rows, cols);
        });
    std::vector<double> nll(static_cast<size_t>(rows));
    kernels::cross_entropy_forward(logits.values().data(), shared_targets->data(),
                                   shared_mask->data(), nll.data(), lse->data(), rows, cols);
    double total = 0.0;
    for (int64_t r = 0; r < rows; ++r) total += nll[static_cast<size_t>(r)];
    out.values()[0] = static_cast<float>(total / static_cast<double>(count));
    return out;
}

Tensor sum(const Tensor& a) {
    Tensor out = make_node({1}, {a}, [a](TensorImpl& node) {
        Tensor ta = a;
        if (!ta.impl()->needs_grad) return;
        ta.impl()->ensure_grad();
        for (float& g : ta.impl()->grad) g += node.grad[0];
    });
    double acc = 0.0;
    for (float v : a.values()) acc += static_cast<double>(v);
    out.values()[0] = static_cast<float>(acc);
    return out;
}

} // namespace guji::nn
