#include "guji/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace guji::kernels {

namespace {

constexpr double kGeluCoef = 0.044715;
const double kSqrt2OverPi = std::sqrt(2.0 / 3.14159265358979323846);

inline float gelu_scalar(float xf) {
    double x = xf;
    double u = kSqrt2OverPi * (x + kGeluCoef * x * x * x);
    return static_cast<float>(0.5 * x * (1.0 + std::tanh(u)));
}

inline float gelu_grad_scalar(float xf, float dyf) {
    double x = xf;
    double u = kSqrt2OverPi * (x + kGeluCoef * x * x * x);
    double t = std::tanh(u);
    double du = kSqrt2OverPi * (1.0 + 3.0 * kGeluCoef * x * x);
    double g = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
    return static_cast<float>(g * static_cast<double>(dyf));
}

// One matmul output row: c[i,:] (+)= a_row[k] * b[k,:].
inline void matmul_row(const float* a_row, const float* b, float* c_row, int64_t k, int64_t n,
                       bool accumulate, double* buf) {
    if (accumulate) {
        for (int64_t j = 0; j < n; ++j) buf[j] = static_cast<double>(c_row[j]);
    } else {
        std::fill(buf, buf + n, 0.0);
    }
    for (int64_t kk = 0; kk < k; ++kk) {
        double av = static_cast<double>(a_row[kk]);
        const float* b_row = b + kk * n;
        for (int64_t j = 0; j < n; ++j) buf[j] += av * static_cast<double>(b_row[j]);
    }
    for (int64_t j = 0; j < n; ++j) c_row[j] = static_cast<float>(buf[j]);
}

// c[i,:] (+)= sum_k a[k,i] * b[k,:]   (a is [k, m])
inline void matmul_tn_row(const float* a, const float* b, float* c_row, int64_t i, int64_t m,
                          int64_t k, int64_t n, bool accumulate, double* buf) {
    if (accumulate) {
        for (int64_t j = 0; j < n; ++j) buf[j] = static_cast<double>(c_row[j]);
    } else {
        std::fill(buf, buf + n, 0.0);
    }
    for (int64_t kk = 0; kk < k; ++kk) {
        double av = static_cast<double>(a[kk * m + i]);
        const float* b_row = b + kk * n;
        for (int64_t j = 0; j < n; ++j) buf[j] += av * static_cast<double>(b_row[j]);
    }
    for (int64_t j = 0; j < n; ++j) c_row[j] = static_cast<float>(buf[j]);
}

// c[i,:] (+)= a[i,:] . b[j,:]  for each j   (b is [n, k])
inline void matmul_nt_row(const float* a_row, const float* b, float* c_row, int64_t k, int64_t n,
                          bool accumulate) {
    for (int64_t j = 0; j < n; ++j) {
        const float* b_row = b + j * k;
        double acc = accumulate ? static_cast<double>(c_row[j]) : 0.0;
        for (int64_t kk = 0; kk < k; ++kk)
            acc += static_cast<double>(a_row[kk]) * static_cast<double>(b_row[kk]);
        c_row[j] = static_cast<float>(acc);
    }
}

inline void softmax_row(const float* x, float* y, int64_t cols) {
    float mx = x[0];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
        double e = std::exp(static_cast<double>(x[j]) - static_cast<double>(mx));
        y[j] = static_cast<float>(e);
        sum += e;
    }
    double inv = 1.0 / sum;
    for (int64_t j = 0; j < cols; ++j)
        y[j] = static_cast<float>(static_cast<double>(y[j]) * inv);
}

inline void softmax_row_backward(const float* y, const float* dy, float* dx_acc, int64_t cols) {
    double dot = 0.0;
    for (int64_t j = 0; j < cols; ++j)
        dot += static_cast<double>(y[j]) * static_cast<double>(dy[j]);
    for (int64_t j = 0; j < cols; ++j)
        dx_acc[j] += static_cast<float>(static_cast<double>(y[j]) *
                                        (static_cast<double>(dy[j]) - dot));
}

inline void log_softmax_row(const float* x, float* y, int64_t cols) {
    float mx = x[0];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < cols; ++j)
        sum += std::exp(static_cast<double>(x[j]) - static_cast<double>(mx));
    double lse = static_cast<double>(mx) + std::log(sum);
    for (int64_t j = 0; j < cols; ++j)
        y[j] = static_cast<float>(static_cast<double>(x[j]) - lse);
}

inline void log_softmax_row_backward(const float* y, const float* dy, float* dx_acc,
                                     int64_t cols) {
    double sum = 0.0;
    for (int64_t j = 0; j < cols; ++j) sum += static_cast<double>(dy[j]);
    for (int64_t j = 0; j < cols; ++j)
        dx_acc[j] += static_cast<float>(static_cast<double>(dy[j]) -
                                        std::exp(static_cast<double>(y[j])) * sum);
}

inline void layer_norm_row(const float* x, const float* gain, const float* bias, float* y,
                           double* mean, double* rstd, int64_t cols, double eps) {
    double mu = 0.0;
    for (int64_t j = 0; j < cols; ++j) mu += static_cast<double>(x[j]);
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
        double d = static_cast<double>(x[j]) - mu;
        var += d * d;
    }
    var /= static_cast<double>(cols);
    double rs = 1.0 / std::sqrt(var + eps);
    *mean = mu;
    *rstd = rs;
    for (int64_t j = 0; j < cols; ++j) {
        double xhat = (static_cast<double>(x[j]) - mu) * rs;
        y[j] = static_cast<float>(xhat * static_cast<double>(gain[j]) +
                                  static_cast<double>(bias[j]));
    }
}

inline void layer_norm_row_backward_dx(const float* x, const float* gain, double mean,
                                       double rstd, const float* dy, float* dx_acc,
                                       int64_t cols) {
    double dnorm_mean = 0.0, dnorm_xhat_mean = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
        double xhat = (static_cast<double>(x[j]) - mean) * rstd;
        double dnorm = static_cast<double>(dy[j]) * static_cast<double>(gain[j]);
        dnorm_mean += dnorm;
        dnorm_xhat_mean += dnorm * xhat;
    }
    dnorm_mean /= static_cast<double>(cols);
    dnorm_xhat_mean /= static_cast<double>(cols);
    for (int64_t j = 0; j < cols; ++j) {
        double xhat = (static_cast<double>(x[j]) - mean) * rstd;
        double dnorm = static_cast<double>(dy[j]) * static_cast<double>(gain[j]);
        dx_acc[j] += static_cast<float>((dnorm - dnorm_mean - xhat * dnorm_xhat_mean) * rstd);
    }
}

// dgain/dbias for one column: reduce over rows in ascending order.
inline void layer_norm_col_backward(const float* x, const double* mean, const double* rstd,
                                    const float* dy, float* dgain_acc, float* dbias_acc,
                                    int64_t rows, int64_t cols, int64_t j) {
    double dg = 0.0, db = 0.0;
    for (int64_t r = 0; r < rows; ++r) {
        double xhat = (static_cast<double>(x[r * cols + j]) - mean[r]) * rstd[r];
        double d = static_cast<double>(dy[r * cols + j]);
        dg += d * xhat;
        db += d;
    }
    dgain_acc[j] += static_cast<float>(dg);
    dbias_acc[j] += static_cast<float>(db);
}

// Attention over one (batch row, head) pair; queries processed in order.
inline void attention_bh_forward(const float* q, const float* k, const float* v, float* att,
                                 float* out, int64_t b, int64_t h, int64_t seq, int64_t heads,
                                 int64_t head_dim, int64_t valid_len) {
    const int64_t stride = heads * head_dim;
    const int64_t col0 = h * head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<double> scores(static_cast<size_t>(seq));
    float* att_bh = att + ((b * heads + h) * seq) * seq;

    for (int64_t i = 0; i < seq; ++i) {
        const int64_t jn = std::min<int64_t>(i + 1, valid_len);
        const float* q_i = q + (b * seq + i) * stride + col0;
        double mx = -1e300;
        for (int64_t j = 0; j < jn; ++j) {
            const float* k_j = k + (b * seq + j) * stride + col0;
            double s = 0.0;
            for (int64_t d = 0; d < head_dim; ++d)
                s += static_cast<double>(q_i[d]) * static_cast<double>(k_j[d]);
            s *= scale;
            scores[static_cast<size_t>(j)] = s;
            mx = std::max(mx, s);
        }
        double sum = 0.0;
        for (int64_t j = 0; j < jn; ++j) {
            double e = std::exp(scores[static_cast<size_t>(j)] - mx);
            scores[static_cast<size_t>(j)] = e;
            sum += e;
        }
        double inv = 1.0 / sum;
        float* att_i = att_bh + i * seq;
        for (int64_t j = 0; j < jn; ++j)
            att_i[j] = static_cast<float>(scores[static_cast<size_t>(j)] * inv);
        for (int64_t j = jn; j < seq; ++j) att_i[j] = 0.0f;

        float* out_i = out + (b * seq + i) * stride + col0;
        std::vector<double> acc(static_cast<size_t>(head_dim), 0.0);
        for (int64_t j = 0; j < jn; ++j) {
            double a = static_cast<double>(att_i[j]);
            const float* v_j = v + (b * seq + j) * stride + col0;
            for (int64_t d = 0; d < head_dim; ++d)
                acc[static_cast<size_t>(d)] += a * static_cast<double>(v_j[d]);
        }
        for (int64_t d = 0; d < head_dim; ++d)
            out_i[d] = static_cast<float>(acc[static_cast<size_t>(d)]);
    }
}

inline void attention_bh_backward(const float* q, const float* k, const float* v,
                                  const float* att, const float* dout, float* dq_acc,
                                  float* dk_acc, float* dv_acc, int64_t b, int64_t h,
                                  int64_t seq, int64_t heads, int64_t head_dim,
                                  int64_t valid_len) {
    const int64_t stride = heads * head_dim;
    const int64_t col0 = h * head_dim;
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const float* att_bh = att + ((b * heads + h) * seq) * seq;
    std::vector<double> datt(static_cast<size_t>(seq));
    std::vector<double> dq_buf(static_cast<size_t>(head_dim));

    for (int64_t i = 0; i < seq; ++i) {
        const int64_t jn = std::min<int64_t>(i + 1, valid_len);
        const float* att_i = att_bh + i * seq;
        const float* dout_i = dout + (b * seq + i) * stride + col0;
        const float* q_i = q + (b * seq + i) * stride + col0;

        // datt_j = dout_i . v_j ; dv_j += att_ij * dout_i
        for (int64_t j = 0; j < jn; ++j) {
            const float* v_j = v + (b * seq + j) * stride + col0;
            float* dv_j = dv_acc + (b * seq + j) * stride + col0;
            double a = static_cast<double>(att_i[j]);
            double dot = 0.0;
            for (int64_t d = 0; d < head_dim; ++d) {
                dot += static_cast<double>(dout_i[d]) * static_cast<double>(v_j[d]);
                dv_j[d] += static_cast<float>(a * static_cast<double>(dout_i[d]));
            }
            datt[static_cast<size_t>(j)] = dot;
        }
        // softmax backward
        double s = 0.0;
        for (int64_t j = 0; j < jn; ++j)
            s += static_cast<double>(att_i[j]) * datt[static_cast<size_t>(j)];
        // dq_i += scale * sum_j ds_j k_j ; dk_j += scale * ds_j * q_i
        std::fill(dq_buf.begin(), dq_buf.end(), 0.0);
        for (int64_t j = 0; j < jn; ++j) {
            double ds = static_cast<double>(att_i[j]) * (datt[static_cast<size_t>(j)] - s);
            const float* k_j = k + (b * seq + j) * stride + col0;
            float* dk_j = dk_acc + (b * seq + j) * stride + col0;
            for (int64_t d = 0; d < head_dim; ++d) {
                dq_buf[static_cast<size_t>(d)] += ds * static_cast<double>(k_j[d]);
                dk_j[d] += static_cast<float>(scale * ds * static_cast<double>(q_i[d]));
            }
        }
        float* dq_i = dq_acc + (b * seq + i) * stride + col0;
        for (int64_t d = 0; d < head_dim; ++d)
            dq_i[d] += static_cast<float>(scale * dq_buf[static_cast<size_t>(d)]);
    }
}

inline void cross_entropy_row(const float* logits, int32_t target, double* nll, double* lse,
                              int64_t cols) {
    float mx = logits[0];
    for (int64_t j = 1; j < cols; ++j) mx = std::max(mx, logits[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < cols; ++j)
        sum += std::exp(static_cast<double>(logits[j]) - static_cast<double>(mx));
    double l = static_cast<double>(mx) + std::log(sum);
    *lse = l;
    *nll = l - static_cast<double>(logits[target]);
}

inline void cross_entropy_row_backward(const float* logits, int32_t target, double lse,
                                       double dscale, float* dlogits_acc, int64_t cols) {
    for (int64_t j = 0; j < cols; ++j) {
        double p = std::exp(static_cast<double>(logits[j]) - lse);
        double g = (p - (j == target ? 1.0 : 0.0)) * dscale;
        dlogits_acc[j] += static_cast<float>(g);
    }
}

inline void adam_element(float* p, const float* g, float* m, float* v, double lr, double beta1,
                         double beta2, double eps, double bc1, double bc2) {
    double grad = static_cast<double>(*g);
    double mn = beta1 * static_cast<double>(*m) + (1.0 - beta1) * grad;
    double vn = beta2 * static_cast<double>(*v) + (1.0 - beta2) * grad * grad;
    *m = static_cast<float>(mn);
    *v = static_cast<float>(vn);
    double mhat = mn / bc1;
    double vhat = vn / bc2;
    *p = static_cast<float>(static_cast<double>(*p) - lr * mhat / (std::sqrt(vhat) + eps));
}

} // namespace

// ---------------------------------------------------------------------------
// OpenMP versions
// ---------------------------------------------------------------------------

void matmul(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
            bool accumulate) {
#pragma omp parallel
    {
        std::vector<double> buf(static_cast<size_t>(n));
#pragma omp for schedule(static)
        for (int64_t i = 0; i < m; ++i)
            matmul_row(a + i * k, b, c + i * n, k, n, accumulate, buf.data());
    }
}

void matmul_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
#pragma omp parallel
    {
        std::vector<double> buf(static_cast<size_t>(n));
#pragma omp for schedule(static)
        for (int64_t i = 0; i < m; ++i)
            matmul_tn_row(a, b, c + i * n, i, m, k, n, accumulate, buf.data());
    }
}

void matmul_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) matmul_nt_row(a + i * k, b, c + i * n, k, n, accumulate);
}

void gelu_forward(const float* x, float* y, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_backward(const float* x, const float* dy, float* dx_acc, int64_t n) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) dx_acc[i] += gelu_grad_scalar(x[i], dy[i]);
}

void softmax_rows(const float* x, float* y, int64_t rows, int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                           int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        softmax_row_backward(y + r * cols, dy + r * cols, dx_acc + r * cols, cols);
}

void log_softmax_rows(const float* x, float* y, int64_t rows, int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) log_softmax_row(x + r * cols, y + r * cols, cols);
}

void log_softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                               int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        log_softmax_row_backward(y + r * cols, dy + r * cols, dx_acc + r * cols, cols);
}

void layer_norm_forward(const float* x, const float* gain, const float* bias, float* y,
                        double* mean, double* rstd, int64_t rows, int64_t cols, double eps) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        layer_norm_row(x + r * cols, gain, bias, y + r * cols, mean + r, rstd + r, cols, eps);
}

void layer_norm_backward(const float* x, const float* gain, const double* mean,
                         const double* rstd, const float* dy, float* dx_acc, float* dgain_acc,
                         float* dbias_acc, int64_t rows, int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r)
        layer_norm_row_backward_dx(x + r * cols, gain, mean[r], rstd[r], dy + r * cols,
                                   dx_acc + r * cols, cols);
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < cols; ++j)
        layer_norm_col_backward(x, mean, rstd, dy, dgain_acc, dbias_acc, rows, cols, j);
}

void attention_forward(const float* q, const float* k, const float* v, float* att, float* out,
                       int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                       const int32_t* lengths) {
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t h = 0; h < heads; ++h)
            attention_bh_forward(q, k, v, att, out, b, h, seq, heads, head_dim,
                                 lengths ? lengths[b] : seq);
}

void attention_backward(const float* q, const float* k, const float* v, const float* att,
                        const float* dout, float* dq_acc, float* dk_acc, float* dv_acc,
                        int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                        const int32_t* lengths) {
#pragma omp parallel for schedule(static) collapse(2)
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t h = 0; h < heads; ++h)
            attention_bh_backward(q, k, v, att, dout, dq_acc, dk_acc, dv_acc, b, h, seq, heads,
                                  head_dim, lengths ? lengths[b] : seq);
}

void cross_entropy_forward(const float* logits, const int32_t* targets, const uint8_t* mask,
                           double* nll, double* lse, int64_t rows, int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        if (mask[r]) {
            cross_entropy_row(logits + r * cols, targets[r], nll + r, lse + r, cols);
        } else {
            nll[r] = 0.0;
            lse[r] = 0.0;
        }
    }
}

void cross_entropy_backward(const float* logits, const int32_t* targets, const uint8_t* mask,
                            const double* lse, float dscale, float* dlogits_acc, int64_t rows,
                            int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t r = 0; r < rows; ++r) {
        if (!mask[r]) continue;
        cross_entropy_row_backward(logits + r * cols, targets[r], lse[r],
                                   static_cast<double>(dscale), dlogits_acc + r * cols, cols);
    }
}

void gather_rows(const float* table, const int32_t* ids, float* out, int64_t n, int64_t cols) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out + i * cols, table + static_cast<int64_t>(ids[i]) * cols,
                    sizeof(float) * static_cast<size_t>(cols));
}

void scatter_add_rows(const int32_t* ids, const float* dout, float* dtable_acc, int64_t n,
                      int64_t cols) {
    // Parallel over columns: every (row, column) cell is owned by exactly one
    // thread and repeated ids accumulate in ascending input order.
#pragma omp parallel for schedule(static)
    for (int64_t j = 0; j < cols; ++j) {
        for (int64_t i = 0; i < n; ++i) {
            dtable_acc[static_cast<int64_t>(ids[i]) * cols + j] += dout[i * cols + j];
        }
    }
}

void adam_update(float* params, const float* grads, float* m, float* v, int64_t n,
                 int64_t step_t, double lr, double beta1, double beta2, double eps) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_t));
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i)
        adam_element(params + i, grads + i, m + i, v + i, lr, beta1, beta2, eps, bc1, bc2);
}

// ---------------------------------------------------------------------------
// Serial references
// ---------------------------------------------------------------------------

namespace ref {

void matmul(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
            bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = accumulate ? static_cast<double>(c[i * n + j]) : 0.0;
            for (int64_t kk = 0; kk < k; ++kk)
                acc += static_cast<double>(a[i * k + kk]) * static_cast<double>(b[kk * n + j]);
            c[i * n + j] = static_cast<float>(acc);
        }
    }
}

void matmul_tn(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = accumulate ? static_cast<double>(c[i * n + j]) : 0.0;
            for (int64_t kk = 0; kk < k; ++kk)
                acc += static_cast<double>(a[kk * m + i]) * static_cast<double>(b[kk * n + j]);
            c[i * n + j] = static_cast<float>(acc);
        }
    }
}

void matmul_nt(const float* a, const float* b, float* c, int64_t m, int64_t k, int64_t n,
               bool accumulate) {
    for (int64_t i = 0; i < m; ++i) matmul_nt_row(a + i * k, b, c + i * n, k, n, accumulate);
}

void gelu_forward(const float* x, float* y, int64_t n) {
    for (int64_t i = 0; i < n; ++i) y[i] = gelu_scalar(x[i]);
}

void gelu_backward(const float* x, const float* dy, float* dx_acc, int64_t n) {
    for (int64_t i = 0; i < n; ++i) dx_acc[i] += gelu_grad_scalar(x[i], dy[i]);
}

void softmax_rows(const float* x, float* y, int64_t rows, int64_t cols) {
    for (int64_t r = 0; r < rows; ++r) softmax_row(x + r * cols, y + r * cols, cols);
}

void softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                           int64_t cols) {
    for (int64_t r = 0; r < rows; ++r)
        softmax_row_backward(y + r * cols, dy + r * cols, dx_acc + r * cols, cols);
}

void log_softmax_rows(const float* x, float* y, int64_t rows, int64_t cols) {
    for (int64_t r = 0; r < rows; ++r) log_softmax_row(x + r * cols, y + r * cols, cols);
}

void log_softmax_rows_backward(const float* y, const float* dy, float* dx_acc, int64_t rows,
                               int64_t cols) {
    for (int64_t r = 0; r < rows; ++r)
        log_softmax_row_backward(y + r * cols, dy + r * cols, dx_acc + r * cols, cols);
}

void layer_norm_forward(const float* x, const float* gain, const float* bias, float* y,
                        double* mean, double* rstd, int64_t rows, int64_t cols, double eps) {
    for (int64_t r = 0; r < rows; ++r)
        layer_norm_row(x + r * cols, gain, bias, y + r * cols, mean + r, rstd + r, cols, eps);
}

void layer_norm_backward(const float* x, const float* gain, const double* mean,
                         const double* rstd, const float* dy, float* dx_acc, float* dgain_acc,
                         float* dbias_acc, int64_t rows, int64_t cols) {
    for (int64_t r = 0; r < rows; ++r)
        layer_norm_row_backward_dx(x + r * cols, gain, mean[r], rstd[r], dy + r * cols,
                                   dx_acc + r * cols, cols);
    for (int64_t j = 0; j < cols; ++j)
        layer_norm_col_backward(x, mean, rstd, dy, dgain_acc, dbias_acc, rows, cols, j);
}

void attention_forward(const float* q, const float* k, const float* v, float* att, float* out,
                       int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                       const int32_t* lengths) {
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t h = 0; h < heads; ++h)
            attention_bh_forward(q, k, v, att, out, b, h, seq, heads, head_dim,
                                 lengths ? lengths[b] : seq);
}

void attention_backward(const float* q, const float* k, const float* v, const float* att,
                        const float* dout, float* dq_acc, float* dk_acc, float* dv_acc,
                        int64_t batch, int64_t seq, int64_t heads, int64_t head_dim,
                        const int32_t* lengths) {
    for (int64_t b = 0; b < batch; ++b)
        for (int64_t h = 0; h < heads; ++h)
            attention_bh_backward(q, k, v, att, dout, dq_acc, dk_acc, dv_acc, b, h, seq, heads,
                                  head_dim, lengths ? lengths[b] : seq);
}

void cross_entropy_forward(const float* logits, const int32_t* targets, const uint8_t* mask,
                           double* nll, double* lse, int64_t rows, int64_t cols) {
    for (int64_t r = 0; r < rows; ++r) {
        if (mask[r]) {
            cross_entropy_row(logits + r * cols, targets[r], nll + r, lse + r, cols);
        } else {
            nll[r] = 0.0;
            lse[r] = 0.0;
        }
    }
}

void cross_entropy_backward(const float* logits, const int32_t* targets, const uint8_t* mask,
                            const double* lse, float dscale, float* dlogits_acc, int64_t rows,
                            int64_t cols) {
    for (int64_t r = 0; r < rows; ++r) {
        if (!mask[r]) continue;
        cross_entropy_row_backward(logits + r * cols, targets[r], lse[r],
                                   static_cast<double>(dscale), dlogits_acc + r * cols, cols);
    }
}

void gather_rows(const float* table, const int32_t* ids, float* out, int64_t n, int64_t cols) {
    for (int64_t i = 0; i < n; ++i)
        std::memcpy(out + i * cols, table + static_cast<int64_t>(ids[i]) * cols,
                    sizeof(float) * static_cast<size_t>(cols));
}

void scatter_add_rows(const int32_t* ids, const float* dout, float* dtable_acc, int64_t n,
                      int64_t cols) {
    for (int64_t j = 0; j < cols; ++j)
        for (int64_t i = 0; i < n; ++i)
            dtable_acc[static_cast<int64_t>(ids[i]) * cols + j] += dout[i * cols + j];
}

void adam_update(float* params, const float* grads, float* m, float* v, int64_t n,
                 int64_t step_t, double lr, double beta1, double beta2, double eps) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_t));
    for (int64_t i = 0; i < n; ++i)
        adam_element(params + i, grads + i, m + i, v + i, lr, beta1, beta2, eps, bc1, bc2);
}

} // namespace ref

} // namespace guji::kernels
