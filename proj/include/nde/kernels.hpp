#pragma once

// Dense numeric kernels used by the tensor engine.
//
// Every kernel has an OpenMP version in `nde::kernels` and a plain loop version
// in `nde::kernels::serial`. The serial versions are kept as the reference for
// tests and benchmarks. Parallel kernels partition work over output rows only,
// so each output element is accumulated in the same order regardless of the
// thread count.

#include <cstddef>
#include <span>

namespace nde::kernels {

enum class Trans { No, Yes };

// C[m x n] (+)= op(A) * op(B), with op(A) m x k and op(B) k x n, all row-major.
// A is stored k x m when trans_a == Yes, B is stored n x k when trans_b == Yes.
void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t n, std::size_t k,
          Trans trans_a = Trans::No, Trans trans_b = Trans::No, bool accumulate = false);

struct ConvGeometry {
    std::size_t channels, height, width;
    std::size_t kernel_h, kernel_w;
    std::size_t stride, padding;

    std::size_t out_h() const { return (height + 2 * padding - kernel_h) / stride + 1; }
    std::size_t out_w() const { return (width + 2 * padding - kernel_w) / stride + 1; }
    std::size_t patch_size() const { return channels * kernel_h * kernel_w; }
};

// One image [C x H x W] -> columns [C*kh*kw x out_h*out_w].
void im2col(std::span<const double> image, std::span<double> columns, const ConvGeometry& g);
// Adjoint of im2col: scatters-adds columns back into an image buffer.
void col2im(std::span<const double> columns, std::span<double> image, const ConvGeometry& g);

int max_threads();

namespace serial {

void gemm(std::span<const double> a, std::span<const double> b, std::span<double> c,
          std::size_t m, std::size_t n, std::size_t k,
          Trans trans_a = Trans::No, Trans trans_b = Trans::No, bool accumulate = false);
void im2col(std::span<const double> image, std::span<double> columns, const ConvGeometry& g);
void col2im(std::span<const double> columns, std::span<double> image, const ConvGeometry& g);

}  // namespace serial

}  // namespace nde::kernels
