#include "nde/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nde::kernels {

namespace {

// Row-major copy of op(X) so the inner loop always streams contiguous memory.
std::vector<double> materialize(std::span<const double> x, std::size_t rows, std::size_t cols, Trans t) {
    std::vector<double> out(rows * cols);
    if (t == Trans::No) {
        std::copy(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(rows * cols), out.begin());
        return out;
    }
    // x is stored cols x rows
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            out[r * cols + c] = x[c * rows + r];
    return out;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t n, std::size_t k,
          Trans trans_a, Trans trans_b, bool accumulate) {
    const std::vector<double> lhs = materialize(a, m, k, trans_a);
    const std::vector<double> rhs = materialize(b, k, n, trans_b);
    const double* pa = lhs.data();
    const double* pb = rhs.data();
    double* pc = c.data();
    const auto rows = static_cast<std::ptrdiff_t>(m);

#pragma omp parallel
    {
        std::vector<double> acc(n);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double* arow = pa + static_cast<std::size_t>(i) * k;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = arow[p];
                const double* brow = pb + p * n;
                for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
            }
            double* crow = pc + static_cast<std::size_t>(i) * n;
            if (accumulate) {
                for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
            } else {
                std::copy(acc.begin(), acc.end(), crow);
            }
        }
    }
}

void im2col(std::span<const double> image, std::span<double> columns, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const auto patch = static_cast<std::ptrdiff_t>(g.patch_size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t row = 0; row < patch; ++row) {
        const auto r = static_cast<std::size_t>(row);
        const std::size_t ch = r / (g.kernel_h * g.kernel_w);
        const std::size_t ki = (r / g.kernel_w) % g.kernel_h;
        const std::size_t kj = r % g.kernel_w;
        double* out = columns.data() + r * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ki) - static_cast<std::ptrdiff_t>(g.padding);
            for (std::size_t x = 0; x < ow; ++x) {
                const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kj) - static_cast<std::ptrdiff_t>(g.padding);
                const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.height) &&
                                    ix < static_cast<std::ptrdiff_t>(g.width);
                out[y * ow + x] = inside ? image[(ch * g.height + static_cast<std::size_t>(iy)) * g.width +
                                                 static_cast<std::size_t>(ix)]
                                         : 0.0;
            }
        }
    }
}

void col2im(std::span<const double> columns, std::span<double> image, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    const std::size_t per_channel = g.kernel_h * g.kernel_w;
    const auto channels = static_cast<std::ptrdiff_t>(g.channels);
    // Each thread owns whole channel planes, so no two threads write the same pixel.
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t chi = 0; chi < channels; ++chi) {
        const auto ch = static_cast<std::size_t>(chi);
        for (std::size_t local = 0; local < per_channel; ++local) {
            const std::size_t r = ch * per_channel + local;
            const std::size_t ki = local / g.kernel_w;
            const std::size_t kj = local % g.kernel_w;
            const double* in = columns.data() + r * oh * ow;
            for (std::size_t y = 0; y < oh; ++y) {
                const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ki) - static_cast<std::ptrdiff_t>(g.padding);
                if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
                for (std::size_t x = 0; x < ow; ++x) {
                    const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kj) - static_cast<std::ptrdiff_t>(g.padding);
                    if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) continue;
                    image[(ch * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)] +=
                        in[y * ow + x];
                }
            }
        }
    }
}

namespace serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t n, std::size_t k,
          Trans trans_a, Trans trans_b, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = trans_a == Trans::No ? a[i * k + p] : a[p * m + i];
                const double bv = trans_b == Trans::No ? b[p * n + j] : b[j * k + p];
                sum += av * bv;
            }
            c[i * n + j] = accumulate ? c[i * n + j] + sum : sum;
        }
    }
}

void im2col(std::span<const double> image, std::span<double> columns, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    std::size_t row = 0;
    for (std::size_t ch = 0; ch < g.channels; ++ch)
        for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row)
                for (std::size_t y = 0; y < oh; ++y)
                    for (std::size_t x = 0; x < ow; ++x) {
                        const long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.padding);
                        const long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.padding);
                        double v = 0.0;
                        if (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) && ix < static_cast<long>(g.width))
                            v = image[(ch * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)];
                        columns[row * oh * ow + y * ow + x] = v;
                    }
}

void col2im(std::span<const double> columns, std::span<double> image, const ConvGeometry& g) {
    const std::size_t oh = g.out_h(), ow = g.out_w();
    std::size_t row = 0;
    for (std::size_t ch = 0; ch < g.channels; ++ch)
        for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row)
                for (std::size_t y = 0; y < oh; ++y)
                    for (std::size_t x = 0; x < ow; ++x) {
                        const long iy = static_cast<long>(y * g.stride + ki) - static_cast<long>(g.padding);
                        const long ix = static_cast<long>(x * g.stride + kj) - static_cast<long>(g.padding);
                        if (iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) && ix < static_cast<long>(g.width))
                            image[(ch * g.height + static_cast<std::size_t>(iy)) * g.width + static_cast<std::size_t>(ix)] +=
                                columns[row * oh * ow + y * ow + x];
                    }
}

}  // namespace serial

}  // namespace nde::kernels
