#pragma once

#include <cstdint>
#include <span>

namespace guji::kernels {

// Dense float32 kernels with float64 accumulation in every reduction.
//
// Parallel versions split work only across disjoint output elements and keep
// the per-element reduction order fixed (ascending index), so their results
// are bitwise identical to the serial references below and independent of
// the OpenMP thread count. tests/kernels_test.cpp asserts the equivalence;
// bench/bench_kernels.cpp compares throughput.

// c[m,n] = a[m,k] * b[k,n]        (+= when accumulate)
void matmul(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
            bool accumulate);
// c[m,n] = a[k,m]^T * b[k,n]      (+= when accumulate)
void matmul_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate);
// c[m,n] = a[m,k] * b[n,k]^T      (+= when accumulate)
void matmul_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate);

void gelu_forward(const float* x, float* y, int64_t n);
void gelu_backward(const float* x, const float* dy, float* dx_acc, int64_t n);

// Row-wise softmax with max subtraction; rows of length `cols`.
void softmax_rows(const float* x, float* y, int64_t rows, int64_t cols);
void softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                           int64_t cols);
void log_softmax_rows(const float* x, float* y, int64_t rows, int64_t cols);
void log_softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                               int64_t cols);

// Row-wise layer norm over `cols` features; mean/rstd are per-row caches the
// backward pass consumes.
void layer_norm_forward(const float* x, const float* gain, const float* bias, float* y,
                        double* mean, double* rstd, int64_t rows, int64_t cols, double eps);
void layer_norm_backward(const float* x, const float* gain, const double* mean,
                         const double* rstd, const float* dy, float* dx_acc, float* dgain_acc,
                         float* dbias_acc, int64_t rows, int64_t cols);

// Causal multi-head attention over row-major [batch*seq, heads*head_dim]
// activations. Position i attends to keys j with j <= i and j < lengths[b].
// `att` caches the [batch, heads, seq, seq] probabilities for the backward
// pass (rows beyond the valid prefix are zeroed).
void attention_forward(const float* q, const float* k, const float* v, float* att, float* out,
                       int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                       const int32_t* lengths);
void attention_backward(const float* q, const float* k, const float* v, const float* att,
                        const float* dout, float* dq_acc, float* dk_acc, float* dv_acc,
                        int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                        const int32_t* lengths);

// Per-row negative log likelihood of `targets` under softmax(logits); rows
// with mask == 0 contribute zero. `lse` caches the per-row log-sum-exp.
void cross_entropy_forward(const float* logits, const int32_t* targets, const uint8_t* mask,
                           double* nll, double* lse, int64_t rows, int64_t cols);
// dlogits += scale * (softmax(row) - onehot(target)) on masked rows.
void cross_entropy_backward(const float* logits, const int32_t* targets, const uint8_t* mask,
                            const double* lse, float dscale, float* dlogits_acc, int64_t rows,
                            int64_t cols);

// out[i,:] = table[ids[i],:]
void gather_rows(const float* table, const int32_t* ids, float* out, int64_t n, int64_t cols);
// dtable[ids[i],:] += dout[i,:]; deterministic for repeated ids.
void scatter_add_rows(const int32_t* ids, const float* dout, float* dtable_acc, int64_t n,
                      int64_t cols);

// One bias-corrected Adam step over a flat parameter vector. step_t >= 1.
void adam_update(float* params, const float* grads, float* m, float* v, int64_t n,
                 int64_t step_t, double lr, double beta1, double beta2, double eps);

namespace ref {
// Serial reference implementations (naive loops, same accumulation order).
void matmul(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
            bool accumulate);
void matmul_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate);
void matmul_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate);
void gelu_forward(const float* x, float* y, int64_t n);
void gelu_backward(const float* x, const float* dy, float* dx_acc, int64_t n);
void softmax_rows(const float* x, float* y, int64_t rows, int64_t cols);
void softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                           int64_t cols);
void log_softmax_rows(const float* x, float* y, int64_t rows, int64_t cols);
void log_softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                               int64_t cols);
void layer_norm_forward(const float* x, const float* gain, const float* bias, float* y,
                        double* mean, double* rstd, int64_t rows, int64_t cols, double eps);
void layer_norm_backward(const float* x, const float* gain, const double* mean,
                         const double* rstd, const float* dy, float* dx_acc, float* dgain_acc,
                         float* dbias_acc, int64_t rows, int64_t cols);
void attention_forward(const float* q, const float* k, const float* v, float* att, float* out,
                       int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                       const int32_t* lengths);
void attention_backward(const float* q, const float* k, const float* v, const float* att,
                        const float* dout, float* dq_acc, float* dk_acc, float* dv_acc,
                        int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                        const int32_t* lengths);
void cross_entropy_forward(const float* logits, const int32_t* targets, const uint8_t* mask,
                           double* nll, double* lse, int64_t rows, int64_t cols);
void cross_entropy_backward(const float* logits, const int32_t* targets, const uint8_t* mask,
                            const double* lse, float dscale, float* dlogits_acc, int64_t rows,
                            int64_t cols);
void gather_rows(const float* table, const int32_t* ids, float* out, int64_t n, int64_t cols);
void scatter_add_rows(const int32_t* ids, const float* dout, float* dtable_acc, int64_t n,
                      int64_t cols);
void adam_update(float* params, const float* grads, float* m, float* v, int64_t n,
                 int64_t step_t, double lr, double beta1, double beta2, double eps);
} // namespace ref

} // namespace guji::kernels
