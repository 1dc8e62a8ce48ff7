#include "fft.hpp"

#include <cstring>

namespace artifact::detail {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

FftGrid::FftGrid(std::vector<int> dims) : dims_(std::move(dims)) {
  for (int d : dims_) size_ *= d;
  std::lock_guard lock(planner_mutex());
  buf_ = fftw_alloc_complex(size_);
  // FFTW_ESTIMATE keeps plans, and hence rounding, identical from run to run.
  fwd_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
  bwd_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
}

FftGrid::~FftGrid() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(fwd_);
  fftw_destroy_plan(bwd_);
  fftw_free(buf_);
}

void FftGrid::run(fftw_plan plan, const cplx* in, cplx* out) const {
  std::lock_guard lock(mu_);
  std::memcpy(buf_, in, sizeof(cplx) * size_);
  fftw_execute(plan);
  std::memcpy(out, buf_, sizeof(cplx) * size_);
}

}  // namespace artifact::detail
