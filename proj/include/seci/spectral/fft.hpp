#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>

#include "seci/core/common.hpp"

namespace seci::spectral {

// Cached in-place 3d complex FFTW plans, one per (N, sign). Plan creation is
// serialized; execution on distinct buffers is thread-safe.
class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  void execute(int N, int sign, cplx* data) {
    fftw_plan plan;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto key = std::make_pair(N, sign);
      auto it = plans_.find(key);
      if (it == plans_.end()) {
        auto* p = reinterpret_cast<fftw_complex*>(data);
        plan = fftw_plan_dft_3d(N, N, N, p, p, sign,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (!plan) throw seci_error("fftw plan creation failed");
        plans_.emplace(key, plan);
      } else {
        plan = it->second;
      }
    }
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, p, p);
  }

  FftPlanCache(const FftPlanCache&) = delete;
  FftPlanCache& operator=(const FftPlanCache&) = delete;

 private:
  FftPlanCache() = default;
  ~FftPlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::map<std::pair<int, int>, fftw_plan> plans_;
  std::mutex mu_;
};

// samples -> coefficients for f(x) = sum_k c_k e^{i k.x}
inline void fft3_samples_to_coeffs(int N, cplx* data) {
  FftPlanCache::instance().execute(N, FFTW_FORWARD, data);
  const double scale = 1.0 / (double(N) * N * N);
  const std::int64_t n3 = std::int64_t(N) * N * N;
  for (std::int64_t i = 0; i < n3; ++i) data[i] *= scale;
}

// coefficients -> samples
inline void fft3_coeffs_to_samples(int N, cplx* data) {
  FftPlanCache::instance().execute(N, FFTW_BACKWARD, data);
}

}  // namespace seci::spectral
