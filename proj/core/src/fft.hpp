#pragma once

#include <complex>
#include <cstddef>

namespace bfc::detail {

// In-place DFT of length n. sign = -1 computes sum_k x_k exp(-2 pi i k n / N).
void fft_inplace(std::complex<double>* data, std::size_t n, int sign);

// Smallest 2^a or 3 * 2^a that is >= n.
std::size_t fft_size_at_least(std::size_t n);

}  // namespace bfc::detail
