#include <cmath>
#include <complex>
#include <memory>
#include <mutex>

#include <fftw3.h>

#include "qjump/error.hpp"
#include "qjump/instrument.hpp"

namespace qjump {
namespace {

// The FFTW planner is not re-entrant; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
FftwBuffer<T> fftw_buffer(std::size_t n) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * n));
  if (p == nullptr) throw std::bad_alloc();
  return FftwBuffer<T>(p);
}

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {}
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    const std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

std::size_t check_sizes(std::span<const double> extended, double bin_width,
                        const DetectorResponse& g) {
  g.validate();
  if (std::abs(bin_width - g.bin_width) > 1e-9 * g.bin_width) {
    throw GridMismatch("model bin width differs from the response bin width");
  }
  const ConvolutionPadding pad = convolution_padding(g);
  if (extended.size() <= pad.before + pad.after) {
    throw GridMismatch("extended model grid is shorter than the response padding");
  }
  return extended.size() - pad.before - pad.after;
}

std::size_t next_fast_size(std::size_t n) {
  std::size_t m = 1;
  while (m < n) m <<= 1;
  return m;
}

}  // namespace

std::vector<double> convolve_direct(std::span<const double> extended, double bin_width,
                                    const DetectorResponse& g) {
  const std::size_t n = check_sizes(extended, bin_width, g);
  const ConvolutionPadding pad = convolution_padding(g);
  const long lag0 = g.first_lag();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      const long idx = static_cast<long>(i + pad.before) - (lag0 + static_cast<long>(k));
      acc += g.weights[k] * extended[static_cast<std::size_t>(idx)];
    }
    out[i] = acc;
  }
  return out;
}

std::vector<double> convolve_fft(std::span<const double> extended, double bin_width,
                                 const DetectorResponse& g) {
  const std::size_t n = check_sizes(extended, bin_width, g);
  const ConvolutionPadding pad = convolution_padding(g);
  const std::size_t m = extended.size();
  const std::size_t len = next_fast_size(m + g.size() - 1);
  const std::size_t spectrum = len / 2 + 1;

  auto a = fftw_buffer<double>(len);
  auto b = fftw_buffer<double>(len);
  auto fa = fftw_buffer<fftw_complex>(spectrum);
  auto fb = fftw_buffer<fftw_complex>(spectrum);

  std::unique_ptr<Plan> forward_a, forward_b, backward;
  {
    const std::lock_guard lock(planner_mutex());
    const int ilen = static_cast<int>(len);
    forward_a = std::make_unique<Plan>(
        fftw_plan_dft_r2c_1d(ilen, a.get(), fa.get(), FFTW_ESTIMATE));
    forward_b = std::make_unique<Plan>(
        fftw_plan_dft_r2c_1d(ilen, b.get(), fb.get(), FFTW_ESTIMATE));
    backward = std::make_unique<Plan>(
        fftw_plan_dft_c2r_1d(ilen, fa.get(), a.get(), FFTW_ESTIMATE));
  }

  std::fill(a.get(), a.get() + len, 0.0);
  std::fill(b.get(), b.get() + len, 0.0);
  std::copy(extended.begin(), extended.end(), a.get());
  std::copy(g.weights.begin(), g.weights.end(), b.get());
  forward_a->execute();
  forward_b->execute();
  for (std::size_t k = 0; k < spectrum; ++k) {
    const std::complex<double> x(fa[k][0], fa[k][1]);
    const std::complex<double> y(fb[k][0], fb[k][1]);
    const std::complex<double> z = x * y;
    fa[k][0] = z.real();
    fa[k][1] = z.imag();
  }
  backward->execute();

  // Full linear convolution c[j] = sum_k w_k ext[j - k]; output i reads
  // c[i + before - first_lag].
  const long shift = static_cast<long>(pad.before) - g.first_lag();
  std::vector<double> out(n);
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a[static_cast<std::size_t>(static_cast<long>(i) + shift)] * inv;
  }
  return out;
}

std::vector<double> convolve(std::span<const double> extended, double bin_width,
                             const DetectorResponse& g) {
  if (g.size() <= kDirectConvolutionLimit) return convolve_direct(extended, bin_width, g);
  return convolve_fft(extended, bin_width, g);
}

}  // namespace qjump
