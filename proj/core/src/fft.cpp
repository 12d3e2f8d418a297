#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

namespace bfc::detail {

namespace {

std::mutex plan_mutex;

fftw_plan plan_for(std::size_t n, int sign) {
  static std::map<std::pair<std::size_t, int>, fftw_plan> cache;
  std::lock_guard<std::mutex> lock(plan_mutex);
  auto key = std::make_pair(n, sign);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto* buf = fftw_alloc_complex(n);
  fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), buf, buf,
                                 sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  cache.emplace(key, p);
  return p;
}

}  // namespace

void fft_inplace(std::complex<double>* data, std::size_t n, int sign) {
  if (n < 2) return;
  auto* d = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan_for(n, sign), d, d);
}

std::size_t fft_size_at_least(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  if (p >= 4 && 3 * (p / 4) >= n) return 3 * (p / 4);
  return p;
}

}  // namespace bfc::detail
