// Times the OpenMP kernels against their serial references and reports
// speedups. Shapes roughly match a desk-scale training step.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "guji/common.hpp"
#include "guji/kernels.hpp"

using guji::Rng;
namespace kernels = guji::kernels;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(rng.normal());
    return v;
}

double time_of(const std::function<void()>& fn, int reps) {
    fn(); // warm up
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return dt / reps;
}

void report(const char* name, double flops, double serial_s, double parallel_s) {
    std::printf("%-22s %9.3f ms serial %9.3f ms parallel %7.2fx  %8.2f GF/s\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                flops / parallel_s / 1e9);
}

} // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serial code\n");
#endif

    Rng rng(7);
    const int reps = 5;

    { // matmul family at the MLP shape of a 128-d model
        const int64_t m = 256, k = 128, n = 512;
        auto a = random_vec(static_cast<size_t>(m * k), rng);
        auto b = random_vec(static_cast<size_t>(k * n), rng);
        std::vector<float> c(static_cast<size_t>(m * n));
        double flops = 2.0 * static_cast<double>(m) * k * n;
        report("matmul 256x128x512", flops,
               time_of([&] { kernels::ref::matmul(a.data(), b.data(), c.data(), m, k, n, false); },
                       reps),
               time_of([&] { kernels::matmul(a.data(), b.data(), c.data(), m, k, n, false); },
                       reps));
        auto bt = random_vec(static_cast<size_t>(n * k), rng);
        report("matmul_nt 256x128x512", flops,
               time_of([&] { kernels::ref::matmul_nt(a.data(), bt.data(), c.data(), m, k, n,
                                                     false); },
                       reps),
               time_of([&] { kernels::matmul_nt(a.data(), bt.data(), c.data(), m, k, n, false); },
                       reps));
        auto at = random_vec(static_cast<size_t>(k * m), rng);
        report("matmul_tn 256x128x512", flops,
               time_of([&] { kernels::ref::matmul_tn(at.data(), b.data(), c.data(), m, k, n,
                                                     false); },
                       reps),
               time_of([&] { kernels::matmul_tn(at.data(), b.data(), c.data(), m, k, n, false); },
                       reps));
    }

    { // attention at batch 8, seq 64, 4 heads of 32
        const int64_t B = 8, T = 64, H = 4, hs = 32, C = H * hs;
        auto q = random_vec(static_cast<size_t>(B * T * C), rng);
        auto k = random_vec(static_cast<size_t>(B * T * C), rng);
        auto v = random_vec(static_cast<size_t>(B * T * C), rng);
        std::vector<float> att(static_cast<size_t>(B * H * T * T));
        std::vector<float> out(static_cast<size_t>(B * T * C));
        double flops = 2.0 * B * H * (T * (T + 1) / 2.0) * hs * 2.0;
        report("attention fwd 8x64x4", flops,
               time_of([&] { kernels::ref::attention_forward(q.data(), k.data(), v.data(),
                                                             att.data(), out.data(), B, T, H,
                                                             hs, nullptr); },
                       reps),
               time_of([&] { kernels::attention_forward(q.data(), k.data(), v.data(), att.data(),
                                                        out.data(), B, T, H, hs, nullptr); },
                       reps));
    }

    { // layer norm and gelu at [2048, 128]
        const int64_t rows = 2048, cols = 128;
        auto x = random_vec(static_cast<size_t>(rows * cols), rng);
        auto gain = random_vec(static_cast<size_t>(cols), rng);
        auto bias = random_vec(static_cast<size_t>(cols), rng);
        std::vector<float> y(static_cast<size_t>(rows * cols));
        std::vector<double> mean(static_cast<size_t>(rows)), rstd(static_cast<size_t>(rows));
        double flops = 8.0 * static_cast<double>(rows) * cols;
        report("layer_norm 2048x128", flops,
               time_of([&] { kernels::ref::layer_norm_forward(x.data(), gain.data(), bias.data(),
                                                              y.data(), mean.data(), rstd.data(),
                                                              rows, cols, 1e-5); },
                       reps),
               time_of([&] { kernels::layer_norm_forward(x.data(), gain.data(), bias.data(),
                                                         y.data(), mean.data(), rstd.data(),
                                                         rows, cols, 1e-5); },
                       reps));
        report("gelu 2048x128", flops,
               time_of([&] { kernels::ref::gelu_forward(x.data(), y.data(), rows * cols); },
                       reps),
               time_of([&] { kernels::gelu_forward(x.data(), y.data(), rows * cols); }, reps));
    }

    { // adam over 1M parameters
        const int64_t n = 1 << 20;
        auto p = random_vec(static_cast<size_t>(n), rng);
        auto g = random_vec(static_cast<size_t>(n), rng);
        std::vector<float> m(static_cast<size_t>(n), 0.0f), v(static_cast<size_t>(n), 0.0f);
        double flops = 12.0 * static_cast<double>(n);
        report("adam 1M params", flops,
               time_of([&] { kernels::ref::adam_update(p.data(), g.data(), m.data(), v.data(), n,
                                                       1, 1e-3, 0.9, 0.999, 1e-8); },
                       reps),
               time_of([&] { kernels::adam_update(p.data(), g.data(), m.data(), v.data(), n, 1,
                                                  1e-3, 0.9, 0.999, 1e-8); },
                       reps));
    }
    return 0;
}
